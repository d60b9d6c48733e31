//! Pre-curved reference configurations.
//!
//! A target curve is sampled together with cross-section frames and the
//! nodal coordinates are fitted by Levenberg-Marquardt on the relative
//! twists `log(H_j^-1 H(xi_j))` between target and interpolated poses. The
//! fit runs on unconstrained quaternions; the nodal quaternions are
//! normalized afterwards, which leaves every interpolated pose unchanged.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kinematics::ElementNodes;
use crate::mesh::{element_slices, lagrange_basis, DofLayout, Mesh};
pub use crate::rotations::quaternion_from_rotation;
use crate::rotations::{se3_log, EuclideanTransform, Mat3, Quaternion, Vec3};

/// Target poses at linearly spaced parameters `xi_j = j / (m - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FramedCurveSamples {
    pub xi: Vec<f64>,
    pub positions: Vec<Vec3>,
    pub frames: Vec<Mat3>,
}

impl FramedCurveSamples {
    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    fn pose(&self, j: usize) -> EuclideanTransform {
        EuclideanTransform::new(self.frames[j], self.positions[j])
    }
}

fn sample_parameters(m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 samples, got {m}")));
    }
    Ok((0..m).map(|j| j as f64 / (m - 1) as f64).collect())
}

/// Circular helix `R (sin phi, -cos phi, c phi)` with `c = k / (2 pi R)` and
/// `phi = 2 pi n_c xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelixSpec {
    pub radius: f64,
    pub pitch: f64,
    pub coils: f64,
}

impl HelixSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !(self.coils > 0.0) || !self.pitch.is_finite() {
            return Err(Error::InvalidInput(format!("invalid helix {self:?}")));
        }
        Ok(())
    }

    fn slope(&self) -> f64 {
        self.pitch / (2.0 * PI * self.radius)
    }

    fn dphi(&self) -> f64 {
        2.0 * PI * self.coils
    }

    pub fn position(&self, xi: f64) -> Vec3 {
        let phi = self.dphi() * xi;
        self.radius * Vec3::new(phi.sin(), -phi.cos(), self.slope() * phi)
    }

    pub fn tangent(&self, xi: f64) -> Vec3 {
        let phi = self.dphi() * xi;
        self.radius * self.dphi() * Vec3::new(phi.cos(), phi.sin(), self.slope())
    }

    pub fn second_derivative(&self, xi: f64) -> Vec3 {
        let phi = self.dphi() * xi;
        self.radius * self.dphi().powi(2) * Vec3::new(-phi.sin(), phi.cos(), 0.0)
    }

    /// `|r_xi| = 2 pi n_c R sqrt(1 + c^2)`, the wire length.
    pub fn length(&self) -> f64 {
        self.dphi() * self.radius * (1.0 + self.slope().powi(2)).sqrt()
    }

    /// Serret-Frenet frame `(t, n, t x n)`.
    pub fn frame(&self, xi: f64) -> Result<Mat3> {
        frenet_frame(&self.tangent(xi), &self.second_derivative(xi), xi)
    }

    pub fn curvature(&self) -> f64 {
        1.0 / (self.radius * (1.0 + self.slope().powi(2)))
    }

    pub fn torsion(&self) -> f64 {
        self.slope() / (self.radius * (1.0 + self.slope().powi(2)))
    }
}

fn frenet_frame(r_xi: &Vec3, r_xixi: &Vec3, xi: f64) -> Result<Mat3> {
    let nn = r_xixi.norm();
    if nn <= 1e-14 {
        return Err(Error::DegenerateFrame { xi });
    }
    let ex = r_xi.normalize();
    let ey = r_xixi / nn;
    let ez = ex.cross(&ey);
    Ok(Mat3::from_columns(&[ex, ey, ez]))
}

pub fn sample_helix(spec: &HelixSpec, m: usize) -> Result<FramedCurveSamples> {
    spec.validate()?;
    let xi = sample_parameters(m)?;
    let positions = xi.iter().map(|&x| spec.position(x)).collect();
    let frames = xi.iter().map(|&x| spec.frame(x)).collect::<Result<_>>()?;
    Ok(FramedCurveSamples {
        xi,
        positions,
        frames,
    })
}

/// Frame whose first axis is `direction`; for `direction = e_x` it is the
/// identity.
pub fn straight_frame(direction: &Vec3) -> Result<Mat3> {
    let n = direction.norm();
    if !(n > 0.0) {
        return Err(Error::InvalidInput("straight rod direction must be nonzero".into()));
    }
    let ex = direction / n;
    let helper = if ex.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
    let ey = helper.cross(&ex).normalize();
    Ok(Mat3::from_columns(&[ex, ey, ex.cross(&ey)]))
}

pub fn sample_straight(start: &Vec3, direction: &Vec3, length: f64, m: usize) -> Result<FramedCurveSamples> {
    let frame = straight_frame(direction)?;
    let xi = sample_parameters(m)?;
    let positions = xi.iter().map(|&x| start + frame.column(0) * (length * x)).collect();
    Ok(FramedCurveSamples {
        frames: vec![frame; xi.len()],
        xi,
        positions,
    })
}

/// Straight rod with nodes exactly on the line, no fitting needed.
pub fn straight_configuration(mesh: &Mesh, start: &Vec3, direction: &Vec3, length: f64) -> Result<DVector<f64>> {
    let frame = straight_frame(direction)?;
    let p = quaternion_from_rotation(&frame)?;
    let layout = DofLayout::new(mesh.n_nodes());
    let mut q = DVector::zeros(layout.n_q());
    for a in 0..mesh.n_nodes() {
        let r = start + frame.column(0) * (length * mesh.node_xi(a));
        q.rows_mut(layout.node_centerline(a).start, 3).copy_from(&r);
        q.rows_mut(layout.node_quaternion(a).start, 4)
            .copy_from_slice(&p.to_array());
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    pub initial_damping: f64,
    /// Stop once `|grad K|_inf <= gradient_tol * max(|grad K(q_start)|_inf, 1)`.
    pub gradient_tol: f64,
    /// Stop once accepted steps fall below `step_tol (1 + |q|_inf)`.
    pub step_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            initial_damping: 1e-3,
            gradient_tol: 1e-10,
            step_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Fitted coordinates with unit nodal quaternions.
    pub q: DVector<f64>,
    /// `K` at the directly assigned start.
    pub initial_residual: f64,
    /// `K` at the fitted configuration.
    pub residual: f64,
    pub iterations: usize,
    /// `K` after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

/// Sample basis data grouped per element.
struct FitProblem<'a> {
    samples: &'a FramedCurveSamples,
    mesh: &'a Mesh,
    layout: DofLayout,
    /// `(sample index, basis values)` per element.
    groups: Vec<Vec<(usize, Vec<f64>)>>,
}

impl<'a> FitProblem<'a> {
    fn new(samples: &'a FramedCurveSamples, mesh: &'a Mesh) -> Result<Self> {
        let mut groups = vec![Vec::new(); mesh.n_elements()];
        for (j, &xi) in samples.xi.iter().enumerate() {
            let e = mesh.element_of(xi);
            let (n, _) = lagrange_basis(&mesh.element_node_xis(e), xi);
            groups[e].push((j, n));
        }
        if let Some(e) = groups.iter().position(|g| g.is_empty()) {
            return Err(Error::InvalidInput(format!(
                "element {e} contains no target sample; use more samples"
            )));
        }
        Ok(Self {
            samples,
            mesh,
            layout: DofLayout::new(mesh.n_nodes()),
            groups,
        })
    }

    /// Relative twists of the samples of element `e`, stacked.
    fn element_residual(&self, e: usize, q_e: &[f64], out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        let nodes = ElementNodes::from_coords(q_e)?;
        for (j, n) in &self.groups[e] {
            let (r, a) = nodes.pose(n);
            let target = self.samples.pose(*j);
            let at = target.rotation.transpose();
            let rel = EuclideanTransform::new(at * a, at * (r - target.translation));
            out.extend_from_slice(&se3_log(&rel)?.to_array());
        }
        Ok(())
    }

    fn cost(&self, q: &[f64]) -> Result<f64> {
        let mut buf = Vec::new();
        let mut k = 0.0;
        for e in 0..self.mesh.n_elements() {
            let (qs, _) = element_slices(self.mesh, &self.layout, e);
            self.element_residual(e, &q[qs], &mut buf)?;
            k += buf.iter().map(|x| x * x).sum::<f64>();
        }
        Ok(0.5 * k)
    }

    /// Gauss-Newton normal matrix `J^T J` and gradient `J^T r`, with the
    /// element Jacobians from forward differences.
    fn normal_equations(&self, q: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let n_q = self.layout.n_q();
        let mut jtj = DMatrix::zeros(n_q, n_q);
        let mut grad = DVector::zeros(n_q);
        let mut base = Vec::new();
        let mut pert = Vec::new();
        for e in 0..self.mesh.n_elements() {
            let (qs, _) = element_slices(self.mesh, &self.layout, e);
            let q_e = &q[qs.clone()];
            self.element_residual(e, q_e, &mut base)?;
            let n_loc = q_e.len();
            let mut jac = DMatrix::zeros(base.len(), n_loc);
            let mut qp = q_e.to_vec();
            for c in 0..n_loc {
                let h = 1e-7 * (1.0 + q_e[c].abs());
                qp[c] = q_e[c] + h;
                self.element_residual(e, &qp, &mut pert)?;
                qp[c] = q_e[c];
                for (row, (p, b)) in pert.iter().zip(&base).enumerate() {
                    jac[(row, c)] = (p - b) / h;
                }
            }
            let r = DVector::from_column_slice(&base);
            let local = jac.transpose() * &jac;
            let g = jac.transpose() * r;
            let mut block = jtj.view_mut((qs.start, qs.start), (n_loc, n_loc));
            block += local;
            let mut gb = grad.rows_mut(qs.start, n_loc);
            gb += g;
        }
        Ok((jtj, grad))
    }

    /// Nearest-sample positions and frames, quaternions aligned to the same
    /// hemisphere along the node chain.
    fn initial_guess(&self) -> Result<DVector<f64>> {
        let m = self.samples.len();
        let mut q = DVector::zeros(self.layout.n_q());
        let mut prev: Option<Quaternion> = None;
        for a in 0..self.mesh.n_nodes() {
            let xi = self.mesh.node_xi(a);
            let j = nearest_sample(&self.samples.xi, xi).min(m - 1);
            let mut p = quaternion_from_rotation(&self.samples.frames[j])?;
            if let Some(prev) = prev {
                if p.dot(&prev) < 0.0 {
                    p = p.scale(-1.0);
                }
            }
            prev = Some(p);
            q.rows_mut(self.layout.node_centerline(a).start, 3)
                .copy_from(&self.samples.positions[j]);
            q.rows_mut(self.layout.node_quaternion(a).start, 4)
                .copy_from_slice(&p.to_array());
        }
        Ok(q)
    }
}

fn nearest_sample(xis: &[f64], xi: f64) -> usize {
    match xis.binary_search_by(|x| x.total_cmp(&xi)) {
        Ok(j) => j,
        Err(j) if j == 0 => 0,
        Err(j) if j >= xis.len() => xis.len() - 1,
        Err(j) => {
            if (xis[j] - xi).abs() < (xi - xis[j - 1]).abs() {
                j
            } else {
                j - 1
            }
        }
    }
}

/// Fitting cost `K(q) = 1/2 sum_j |theta_j(q)|^2`.
pub fn fit_residual(samples: &FramedCurveSamples, mesh: &Mesh, q: &[f64]) -> Result<f64> {
    FitProblem::new(samples, mesh)?.cost(q)
}

/// Largest distance between interpolated centerline and target points.
pub fn max_position_error(samples: &FramedCurveSamples, mesh: &Mesh, q: &[f64]) -> Result<f64> {
    let layout = DofLayout::new(mesh.n_nodes());
    let mut err: f64 = 0.0;
    for (j, &xi) in samples.xi.iter().enumerate() {
        let e = mesh.element_of(xi);
        let (qs, _) = element_slices(mesh, &layout, e);
        let nodes = ElementNodes::from_coords(&q[qs])?;
        let (n, _) = lagrange_basis(&mesh.element_node_xis(e), xi);
        err = err.max((nodes.pose(&n).0 - samples.positions[j]).norm());
    }
    Ok(err)
}

/// Starting point of the fit: nearest-sample positions and frames.
pub fn direct_assignment(samples: &FramedCurveSamples, mesh: &Mesh) -> Result<DVector<f64>> {
    FitProblem::new(samples, mesh)?.initial_guess()
}

/// Levenberg-Marquardt fit of nodal coordinates to framed samples.
pub fn fit_configuration(samples: &FramedCurveSamples, mesh: &Mesh, options: &FitOptions) -> Result<FitResult> {
    let problem = FitProblem::new(samples, mesh)?;
    let mut q = problem.initial_guess()?;
    let initial = problem.cost(q.as_slice())?;
    let mut cost = initial;
    let mut history = vec![initial];
    let mut damping = options.initial_damping;
    let mut grad_scale = None;
    let mut converged = false;
    let mut iterations = 0;

    'outer: while iterations < options.max_iter {
        if cost == 0.0 {
            converged = true;
            break;
        }
        let (jtj, grad) = problem.normal_equations(q.as_slice())?;
        let gmax = grad.amax();
        let scale: f64 = *grad_scale.get_or_insert(gmax.max(1.0));
        if gmax <= options.gradient_tol * scale {
            converged = true;
            break;
        }
        iterations += 1;
        let dmax = jtj.diagonal().amax();
        let diag = jtj.diagonal().map(|d| d.max(1e-12 * dmax).max(f64::MIN_POSITIVE));
        loop {
            let mut lhs = jtj.clone();
            for k in 0..lhs.nrows() {
                lhs[(k, k)] += damping * diag[k];
            }
            let step = match lhs.clone().cholesky() {
                Some(ch) => Some(ch.solve(&(-&grad))),
                None => lhs.lu().solve(&(-&grad)),
            };
            let small = |d: &DVector<f64>| d.amax() <= options.step_tol * (1.0 + q.amax());
            let Some(step) = step.filter(|d| d.iter().all(|x| x.is_finite())) else {
                damping *= 4.0;
                if damping > 1e20 {
                    converged = true;
                    break 'outer;
                }
                continue;
            };
            let trial = &q + &step;
            let trial_cost = problem.cost(trial.as_slice()).unwrap_or(f64::INFINITY);
            if trial_cost < cost {
                let stagnant = small(&step) || cost - trial_cost <= 1e-15 * cost;
                q = trial;
                cost = trial_cost;
                history.push(cost);
                damping *= 0.5;
                if stagnant {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            damping *= 4.0;
            if small(&step) || damping > 1e20 {
                converged = true;
                break 'outer;
            }
        }
    }
    if !converged {
        return Err(Error::FitDivergence {
            iterations,
            residual: cost,
        });
    }

    for a in 0..mesh.n_nodes() {
        let qs = problem.layout.node_quaternion(a);
        let p = Quaternion::from_slice(&q.as_slice()[qs.clone()]).normalized()?;
        q.rows_mut(qs.start, 4).copy_from_slice(&p.to_array());
    }
    let residual = problem.cost(q.as_slice())?;
    Ok(FitResult {
        q,
        initial_residual: initial,
        residual,
        iterations,
        history,
    })
}
