//! Discrete centerline/orientation fields and strain measures.
//!
//! Centerline points and nodal rotation matrices are interpolated entrywise
//! with the element's Lagrange basis. The interpolated orientation is in
//! general not orthogonal between nodes; no re-orthogonalization is applied.

use crate::error::{Error, Result};
use crate::mesh::{lagrange_basis, Mesh, NODE_POSITION_DOFS};
use crate::rotations::{inv_skew_symmetric_part, Mat3, Quaternion, Vec3};

/// Nodal centerline points and rotation matrices of one element.
#[derive(Debug, Clone)]
pub struct ElementNodes {
    pub r: Vec<Vec3>,
    pub a: Vec<Mat3>,
}

impl ElementNodes {
    /// Unpacks `7 (p + 1)` element position coordinates.
    pub fn from_coords(q_e: &[f64]) -> Result<Self> {
        let n = q_e.len() / NODE_POSITION_DOFS;
        let mut r = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        for node in q_e.chunks_exact(NODE_POSITION_DOFS) {
            r.push(Vec3::new(node[0], node[1], node[2]));
            a.push(Quaternion::from_slice(&node[3..]).rotation()?);
        }
        Ok(Self { r, a })
    }

    /// Interpolated centerline point and (generally non-orthogonal)
    /// orientation for basis values `n`.
    pub fn pose(&self, n: &[f64]) -> (Vec3, Mat3) {
        let mut r = Vec3::zeros();
        let mut a = Mat3::zeros();
        for (i, &ni) in n.iter().enumerate() {
            r += self.r[i] * ni;
            a += self.a[i] * ni;
        }
        (r, a)
    }
}

/// Field values and strains at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEvaluation {
    pub r: Vec3,
    pub r_xi: Vec3,
    pub a: Mat3,
    pub a_xi: Mat3,
    /// Reference tangent length `|r0_xi|`.
    pub j: f64,
    /// `A^T r_xi`
    pub gamma_bar: Vec3,
    /// `j^-1(Skw(A^T A_xi))`
    pub kappa_bar: Vec3,
    pub gamma: Vec3,
    pub kappa: Vec3,
}

/// Evaluates the fields from nodal data and basis values/derivatives (the
/// derivatives taken with respect to `xi`).
pub fn interpolate_fields(nodes: &ElementNodes, n: &[f64], dn: &[f64], j: f64) -> FieldEvaluation {
    let mut r = Vec3::zeros();
    let mut r_xi = Vec3::zeros();
    let mut a = Mat3::zeros();
    let mut a_xi = Mat3::zeros();
    for i in 0..n.len() {
        r += nodes.r[i] * n[i];
        r_xi += nodes.r[i] * dn[i];
        a += nodes.a[i] * n[i];
        a_xi += nodes.a[i] * dn[i];
    }
    let at = a.transpose();
    let gamma_bar = at * r_xi;
    let kappa_bar = inv_skew_symmetric_part(&(at * a_xi));
    FieldEvaluation {
        r,
        r_xi,
        a,
        a_xi,
        j,
        gamma_bar,
        kappa_bar,
        gamma: gamma_bar / j,
        kappa: kappa_bar / j,
    }
}

/// Fields of element `e` at the global parameter `xi`.
pub fn evaluate_fields(q_e: &[f64], mesh: &Mesh, e: usize, xi: f64, j: f64) -> Result<FieldEvaluation> {
    let nodes = ElementNodes::from_coords(q_e)?;
    let (n, dn) = lagrange_basis(&mesh.element_node_xis(e), xi);
    Ok(interpolate_fields(&nodes, &n, &dn, j))
}

/// Lagrange basis tabulated at the quadrature points of one element. The
/// mesh is uniform, so a single table serves every element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementRule {
    /// Quadrature points relative to the element start.
    pub offsets: Vec<f64>,
    /// Weights in `xi` (they sum to the element length).
    pub weights: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub derivs: Vec<Vec<f64>>,
}

impl ElementRule {
    pub fn new(mesh: &Mesh, n_points: usize) -> Result<Self> {
        let (a, b) = mesh.element_interval(0);
        let nodes = mesh.element_node_xis(0);
        let rule = crate::mesh::gauss_legendre(n_points, a, b)?;
        let (values, derivs) = rule
            .points
            .iter()
            .map(|&x| lagrange_basis(&nodes, x))
            .unzip();
        Ok(Self {
            offsets: rule.points.iter().map(|x| x - a).collect(),
            weights: rule.weights,
            values,
            derivs,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, mesh: &Mesh, e: usize, k: usize) -> f64 {
        mesh.element_interval(e).0 + self.offsets[k]
    }
}

/// Reference data frozen per quadrature point: `J` for both rules and the
/// reference strains at the reduced (internal-force) points. Indexed by
/// `e * rule.len() + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceGeometry {
    pub j_reduced: Vec<f64>,
    pub gamma0: Vec<Vec3>,
    pub kappa0: Vec<Vec3>,
    pub j_full: Vec<f64>,
}

/// Samples `J = |r0_xi|` and the strains of the configuration `q0`.
pub fn reference_from_configuration(
    mesh: &Mesh,
    reduced: &ElementRule,
    full: &ElementRule,
    q0: &[f64],
) -> Result<ReferenceGeometry> {
    let n_el = mesh.n_elements();
    let mut geo = ReferenceGeometry {
        j_reduced: Vec::with_capacity(n_el * reduced.len()),
        gamma0: Vec::with_capacity(n_el * reduced.len()),
        kappa0: Vec::with_capacity(n_el * reduced.len()),
        j_full: Vec::with_capacity(n_el * full.len()),
    };
    let tangent_length = |f: &FieldEvaluation, xi: f64| -> Result<f64> {
        let j = f.r_xi.norm();
        if j > 1e-14 {
            Ok(j)
        } else {
            Err(Error::ZeroTangent { xi })
        }
    };
    for e in 0..n_el {
        let nodes = mesh.element_nodes(e);
        let q_e = &q0[NODE_POSITION_DOFS * nodes.start..NODE_POSITION_DOFS * nodes.end];
        let en = ElementNodes::from_coords(q_e)?;
        for k in 0..reduced.len() {
            let f = interpolate_fields(&en, &reduced.values[k], &reduced.derivs[k], 1.0);
            let j = tangent_length(&f, reduced.point(mesh, e, k))?;
            geo.j_reduced.push(j);
            geo.gamma0.push(f.gamma_bar / j);
            geo.kappa0.push(f.kappa_bar / j);
        }
        for k in 0..full.len() {
            let f = interpolate_fields(&en, &full.values[k], &full.derivs[k], 1.0);
            geo.j_full.push(tangent_length(&f, full.point(mesh, e, k))?);
        }
    }
    Ok(geo)
}
