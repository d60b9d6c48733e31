//! Element partition of `[0, 1]`, Lagrange bases, Gauss-Legendre rules and
//! the nodal coordinate layout.

use std::ops::Range;

use crate::error::{Error, Result};

/// Position coordinates per node: centerline point and quaternion.
pub const NODE_POSITION_DOFS: usize = 7;
/// Velocity coordinates per node: centerline velocity and angular velocity.
pub const NODE_VELOCITY_DOFS: usize = 6;

pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    n_el: usize,
    order: usize,
    boundaries: Vec<f64>,
}

impl Mesh {
    /// `n_el` linearly spaced elements of polynomial order `order` in 1..=3.
    pub fn new(n_el: usize, order: usize) -> Result<Self> {
        if n_el == 0 {
            return Err(Error::InvalidInput("mesh needs at least one element".into()));
        }
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::InvalidInput(format!(
                "polynomial order {order} not supported (1..={MAX_ORDER})"
            )));
        }
        let boundaries = (0..=n_el).map(|e| e as f64 / n_el as f64).collect();
        Ok(Self {
            n_el,
            order,
            boundaries,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.n_el
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_nodes(&self) -> usize {
        self.order * self.n_el + 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn element_interval(&self, e: usize) -> (f64, f64) {
        (self.boundaries[e], self.boundaries[e + 1])
    }

    /// Global node indices of element `e`; the last node of `e` is the
    /// first node of `e + 1`.
    pub fn element_nodes(&self, e: usize) -> Range<usize> {
        e * self.order..e * self.order + self.order + 1
    }

    /// The `p + 1` evenly spaced node parameters of element `e`.
    pub fn element_node_xis(&self, e: usize) -> Vec<f64> {
        self.element_nodes(e).map(|a| self.node_xi(a)).collect()
    }

    pub fn node_xi(&self, a: usize) -> f64 {
        a as f64 / (self.n_nodes() - 1) as f64
    }

    /// Element containing `xi` for the half-open partition `[xi_e, xi_e+1)`,
    /// with `xi = 1` assigned to the last element.
    pub fn element_of(&self, xi: f64) -> usize {
        let e = (xi * self.n_el as f64).floor();
        if e < 0.0 {
            0
        } else {
            (e as usize).min(self.n_el - 1)
        }
    }
}

/// Offsets of the nodal coordinates inside the global `q` (7 per node) and
/// `u` (6 per node) tuples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    n_nodes: usize,
}

impl DofLayout {
    pub fn new(n_nodes: usize) -> Self {
        Self { n_nodes }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_q(&self) -> usize {
        NODE_POSITION_DOFS * self.n_nodes
    }

    pub fn n_u(&self) -> usize {
        NODE_VELOCITY_DOFS * self.n_nodes
    }

    pub fn node_q(&self, a: usize) -> Range<usize> {
        NODE_POSITION_DOFS * a..NODE_POSITION_DOFS * (a + 1)
    }

    pub fn node_u(&self, a: usize) -> Range<usize> {
        NODE_VELOCITY_DOFS * a..NODE_VELOCITY_DOFS * (a + 1)
    }

    pub fn node_centerline(&self, a: usize) -> Range<usize> {
        NODE_POSITION_DOFS * a..NODE_POSITION_DOFS * a + 3
    }

    pub fn node_quaternion(&self, a: usize) -> Range<usize> {
        NODE_POSITION_DOFS * a + 3..NODE_POSITION_DOFS * (a + 1)
    }

    pub fn node_linear_velocity(&self, a: usize) -> Range<usize> {
        NODE_VELOCITY_DOFS * a..NODE_VELOCITY_DOFS * a + 3
    }

    pub fn node_angular_velocity(&self, a: usize) -> Range<usize> {
        NODE_VELOCITY_DOFS * a + 3..NODE_VELOCITY_DOFS * (a + 1)
    }
}

/// Position and velocity index ranges of element `e`. Element nodes are
/// consecutive, so both selections are contiguous.
pub fn element_slices(mesh: &Mesh, layout: &DofLayout, e: usize) -> (Range<usize>, Range<usize>) {
    let nodes = mesh.element_nodes(e);
    (
        layout.node_q(nodes.start).start..layout.node_q(nodes.end - 1).end,
        layout.node_u(nodes.start).start..layout.node_u(nodes.end - 1).end,
    )
}

/// Lagrange polynomials through `nodes` and their derivatives at `xi`.
///
/// Derivatives use the product rule directly, so evaluation at a node is
/// regular.
pub fn lagrange_basis(nodes: &[f64], xi: f64) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    let mut values = vec![0.0; n];
    let mut derivs = vec![0.0; n];
    for i in 0..n {
        let mut v = 1.0;
        for j in (0..n).filter(|&j| j != i) {
            v *= (xi - nodes[j]) / (nodes[i] - nodes[j]);
        }
        values[i] = v;

        let mut d = 0.0;
        for k in (0..n).filter(|&k| k != i) {
            let mut term = 1.0 / (nodes[i] - nodes[k]);
            for j in (0..n).filter(|&j| j != i && j != k) {
                term *= (xi - nodes[j]) / (nodes[i] - nodes[j]);
            }
            d += term;
        }
        derivs[i] = d;
    }
    (values, derivs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p_prev, mut p) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// `n_pt`-point Gauss-Legendre rule on `[a, b]`, `1 <= n_pt <= 64`.
///
/// Roots of `P_n` are found by Newton iteration from Chebyshev-like
/// initial guesses.
pub fn gauss_legendre(n_pt: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if !(1..=64).contains(&n_pt) {
        return Err(Error::InvalidInput(format!(
            "Gauss-Legendre rule with {n_pt} points not supported (1..=64)"
        )));
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut points = vec![0.0; n_pt];
    let mut weights = vec![0.0; n_pt];
    let nf = n_pt as f64;
    for i in 0..(n_pt + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n_pt, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n_pt, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // ascending order: the i-th guess is the i-th largest root
        points[i] = mid - half * x;
        points[n_pt - 1 - i] = mid + half * x;
        weights[i] = half * w;
        weights[n_pt - 1 - i] = half * w;
    }
    if n_pt % 2 == 1 {
        points[n_pt / 2] = mid;
    }
    Ok(QuadratureRule { points, weights })
}

/// `ceil((p + 1)^2 / 2)`: points of the full rule used for mass, external
/// and gyroscopic terms.
pub fn full_rule_points(order: usize) -> usize {
    ((order + 1) * (order + 1)).div_ceil(2)
}

/// `p`: points of the reduced rule used for the internal forces.
pub fn reduced_rule_points(order: usize) -> usize {
    order
}
