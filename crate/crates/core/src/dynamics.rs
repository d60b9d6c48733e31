//! Time integration of `q' = B(q) u`, `M u' = f_int(q) + f_ext(q) - f_gyr(u)`
//! with the first-order generalized-alpha method.
//!
//! Both equations are stepped monolithically in the state `y = (q, u)` of
//! the free nodes. The unknown of each step is the increment `dy`, from
//! which
//!
//! ```text
//! y'_{n+1}      = y'_n + (dy / dt - y'_n) / gamma
//! y_{n+alpha_f} = y_n + alpha_f dy
//! y'_{n+alpha_m} = y'_n + alpha_m (y'_{n+1} - y'_n)
//! ```
//!
//! and the residual `E y'_{n+alpha_m} - F(y_{n+alpha_f})` with
//! `E = diag(I, M_ff)` is driven to zero by Newton's method. Nodal
//! quaternions are normalized after every step.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::assembly::LoadSpec;
use crate::error::{Error, Result};
use crate::model::RodModel;
use crate::reduction::{check_start, Reduction};
use crate::statics::DifferenceScheme;
use crate::rotations::{Mat3, Vec3};

/// Coefficients of the first-order generalized-alpha scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedAlpha {
    pub alpha_m: f64,
    pub alpha_f: f64,
    pub gamma: f64,
}

impl GeneralizedAlpha {
    /// `alpha_m = (3 - rho) / (2 (1 + rho))`, `alpha_f = 1 / (1 + rho)`,
    /// `gamma = 1/2 + alpha_m - alpha_f`.
    pub fn from_spectral_radius(rho_inf: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho_inf) {
            return Err(Error::InvalidInput(format!(
                "spectral radius {rho_inf} outside [0, 1]"
            )));
        }
        let alpha_m = 0.5 * (3.0 - rho_inf) / (1.0 + rho_inf);
        let alpha_f = 1.0 / (1.0 + rho_inf);
        Ok(Self {
            alpha_m,
            alpha_f,
            gamma: 0.5 + alpha_m - alpha_f,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicProblem {
    /// Constant loads, applied with load factor 1 at all times.
    pub loads: LoadSpec,
    pub fixed_nodes: Vec<usize>,
    pub t_end: f64,
    pub dt: f64,
    pub rho_inf: f64,
    /// Max-abs residual tolerance of the per-step Newton iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// The Jacobian is computed at the first iteration of every step and
    /// recomputed whenever an iteration reduces the residual by less than
    /// this factor.
    pub jacobian_reuse_ratio: f64,
    pub jacobian: DifferenceScheme,
}

impl DynamicProblem {
    pub fn new(loads: LoadSpec, fixed_nodes: Vec<usize>, t_end: f64, dt: f64, rho_inf: f64) -> Self {
        Self {
            loads,
            fixed_nodes,
            t_end,
            dt,
            rho_inf,
            tol: 1e-8,
            max_iter: 25,
            jacobian_reuse_ratio: 0.1,
            jacobian: DifferenceScheme::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidInput(format!("time step {} must be positive", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidInput(format!("final time {} must be non-negative", self.t_end)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidInput("Newton tolerance and iteration limit must be positive".into()));
        }
        GeneralizedAlpha::from_spectral_radius(self.rho_inf).map(|_| ())
    }

    /// `t_end / dt` rounded to the nearest integer.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// State after a completed step (step 0 is the initial state).
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub step: usize,
    pub t: f64,
    pub q: &'a DVector<f64>,
    pub u: &'a DVector<f64>,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub q: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Free-node right-hand side `F(y)` and its finite-difference Jacobian.
struct DynamicSystem<'a> {
    model: &'a RodModel,
    loads: &'a LoadSpec,
    red: Reduction,
    mass_ff: DMatrix<f64>,
    q_template: DVector<f64>,
    n_qf: usize,
    n_uf: usize,
}

impl<'a> DynamicSystem<'a> {
    fn new(model: &'a RodModel, loads: &'a LoadSpec, fixed: &[usize], q0: &DVector<f64>) -> Result<Self> {
        let red = Reduction::new(model.layout(), fixed)?;
        let mass = model.mass_matrix();
        let mass_ff = mass.select_rows(&red.free_u).select_columns(&red.free_u);
        Ok(Self {
            model,
            loads,
            n_qf: red.free_q.len(),
            n_uf: red.free_u.len(),
            red,
            mass_ff,
            q_template: q0.clone(),
        })
    }

    fn dim(&self) -> usize {
        self.n_qf + self.n_uf
    }

    fn pack(&self, q: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim());
        for (k, &i) in self.red.free_q.iter().enumerate() {
            y[k] = q[i];
        }
        for (k, &i) in self.red.free_u.iter().enumerate() {
            y[self.n_qf + k] = u[i];
        }
        y
    }

    fn unpack(&self, y: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let mut q = self.q_template.clone();
        let mut u = DVector::zeros(self.model.layout().n_u());
        Reduction::scatter(&self.red.free_q, &y[..self.n_qf], q.as_mut_slice());
        Reduction::scatter(&self.red.free_u, &y[self.n_qf..], u.as_mut_slice());
        (q, u)
    }

    /// `f_int(q) + f_ext(q)` over all velocity coordinates.
    fn static_forces(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let mut f = self.model.internal_forces(q.as_slice())?;
        self.model
            .add_external_forces(1.0, q.as_slice(), self.loads, f.as_mut_slice())?;
        Ok(f)
    }

    fn rhs_with(&self, q: &DVector<f64>, u: &DVector<f64>, static_forces: &DVector<f64>) -> DVector<f64> {
        let qdot = self.model.kinematic_apply(q.as_slice(), u.as_slice());
        let f = static_forces - self.model.gyroscopic_forces(u.as_slice());
        let mut out = DVector::zeros(self.dim());
        for (k, &i) in self.red.free_q.iter().enumerate() {
            out[k] = qdot[i];
        }
        for (k, &i) in self.red.free_u.iter().enumerate() {
            out[self.n_qf + k] = f[i];
        }
        out
    }

    fn rhs(&self, y: &[f64]) -> Result<DVector<f64>> {
        let (q, u) = self.unpack(y);
        let fs = self.static_forces(&q)?;
        Ok(self.rhs_with(&q, &u, &fs))
    }

    /// Velocity columns reuse the elastic forces, which do not depend on `u`.
    fn rhs_jacobian(&self, y: &[f64], scheme: DifferenceScheme) -> Result<DMatrix<f64>> {
        let (q, u) = self.unpack(y);
        let fs = self.static_forces(&q)?;
        let base = self.rhs_with(&q, &u, &fs);
        let n_qf = self.n_qf;
        let columns: Vec<DVector<f64>> = (0..self.dim())
            .into_par_iter()
            .map(|j| {
                if j < n_qf {
                    scheme.column(y, j, &base, |yp| self.rhs(yp))
                } else {
                    scheme.column(y, j, &base, |yp| {
                        let (q, u) = self.unpack(yp);
                        Ok::<_, Error>(self.rhs_with(&q, &u, &fs))
                    })
                }
            })
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_columns(&columns))
    }

    /// `E x` with `E = diag(I, M_ff)`.
    fn apply_e(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = x.clone();
        let v = &self.mass_ff * x.rows(self.n_qf, self.n_uf);
        out.rows_mut(self.n_qf, self.n_uf).copy_from(&v);
        out
    }

    fn normalize(&self, y: &mut DVector<f64>) -> Result<()> {
        let (mut q, _) = self.unpack(y.as_slice());
        self.model.normalize_quaternions(q.as_mut_slice())?;
        for (k, &i) in self.red.free_q.iter().enumerate() {
            y[k] = q[i];
        }
        Ok(())
    }
}

/// Integrates from `(q0, u0)` and calls `on_sample` after every step,
/// starting with the initial state. On failure the samples delivered so far
/// remain valid.
pub fn integrate_with(
    model: &RodModel,
    problem: &DynamicProblem,
    q0: &DVector<f64>,
    u0: &DVector<f64>,
    mut on_sample: impl FnMut(Sample<'_>),
) -> Result<()> {
    problem.validate()?;
    check_start(model, q0, &problem.fixed_nodes)?;
    if u0.len() != model.layout().n_u() {
        return Err(Error::InvalidInput(format!(
            "initial velocity has {} entries, expected {}",
            u0.len(),
            model.layout().n_u()
        )));
    }
    let coeffs = GeneralizedAlpha::from_spectral_radius(problem.rho_inf)?;
    let sys = DynamicSystem::new(model, &problem.loads, &problem.fixed_nodes, q0)?;
    let mass_chol = sys
        .mass_ff
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("mass matrix is not positive definite".into()))?;

    let mut y = sys.pack(q0, u0);
    let mut ydot = sys.rhs(y.as_slice())?;
    {
        let acc = mass_chol.solve(&ydot.rows(sys.n_qf, sys.n_uf).into_owned());
        ydot.rows_mut(sys.n_qf, sys.n_uf).copy_from(&acc);
    }
    {
        let (q, u) = sys.unpack(y.as_slice());
        on_sample(Sample {
            step: 0,
            t: 0.0,
            q: &q,
            u: &u,
            newton_iterations: 0,
        });
    }

    let dt = problem.dt;
    let GeneralizedAlpha {
        alpha_m,
        alpha_f,
        gamma,
    } = coeffs;
    let c = alpha_m / (gamma * dt);
    for step in 1..=problem.n_steps() {
        let mut dy = &ydot * dt;
        let mut lu = None;
        let mut converged = None;
        let mut residual = f64::INFINITY;
        let mut previous = f64::INFINITY;
        for iter in 0..=problem.max_iter {
            let ydot1 = &ydot + (&dy / dt - &ydot) / gamma;
            let yf = &y + &dy * alpha_f;
            let ydot_m = &ydot + (&ydot1 - &ydot) * alpha_m;
            let r = sys.apply_e(&ydot_m) - sys.rhs(yf.as_slice())?;
            residual = r.amax();
            if !residual.is_finite() {
                break;
            }
            if residual <= problem.tol {
                converged = Some((iter, ydot1));
                break;
            }
            if iter == problem.max_iter {
                break;
            }
            if lu.is_none() || residual > problem.jacobian_reuse_ratio * previous {
                let mut jac = sys.rhs_jacobian(yf.as_slice(), problem.jacobian)? * (-alpha_f);
                for k in 0..sys.n_qf {
                    jac[(k, k)] += c;
                }
                let mut block = jac.view_mut((sys.n_qf, sys.n_qf), (sys.n_uf, sys.n_uf));
                block += &sys.mass_ff * c;
                lu = Some(jac.lu());
            }
            let delta = lu
                .as_ref()
                .and_then(|lu| lu.solve(&(-&r)))
                .filter(|d| d.iter().all(|x| x.is_finite()))
                .ok_or(Error::SingularJacobian { step })?;
            dy += delta;
            previous = residual;
        }
        let Some((iterations, ydot1)) = converged else {
            return Err(Error::NonConvergence {
                step,
                iterations: problem.max_iter,
                residual,
            });
        };
        y += dy;
        ydot = ydot1;
        sys.normalize(&mut y)?;
        let (q, u) = sys.unpack(y.as_slice());
        on_sample(Sample {
            step,
            t: step as f64 * dt,
            q: &q,
            u: &u,
            newton_iterations: iterations,
        });
    }
    Ok(())
}

pub fn integrate(
    model: &RodModel,
    problem: &DynamicProblem,
    q0: &DVector<f64>,
    u0: &DVector<f64>,
) -> Result<Trajectory> {
    let mut traj = Trajectory::default();
    integrate_with(model, problem, q0, u0, |s| {
        traj.times.push(s.t);
        traj.q.push(s.q.clone());
        traj.u.push(s.u.clone());
    })?;
    Ok(traj)
}

/// Euler angles `(alpha, beta, gamma)` of `A = R_z(alpha) R_y(beta) R_x(gamma)`.
pub fn zyx_euler_angles(a: &Mat3) -> (f64, f64, f64) {
    let alpha = a[(1, 0)].atan2(a[(0, 0)]);
    let beta = (-a[(2, 0)]).clamp(-1.0, 1.0).asin();
    let gamma = a[(2, 1)].atan2(a[(2, 2)]);
    (alpha, beta, gamma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub t: f64,
    pub tip_position: Vec3,
    /// First zyx Euler angle of the tip frame, unwrapped.
    pub alpha: f64,
    pub kinetic_energy: f64,
    pub strain_energy: f64,
    /// Second zyx angle within `1e-6` of `+-pi/2`; `alpha` is unreliable.
    pub euler_singular: bool,
}

/// Streaming evaluation of [`Observables`] with continuous `alpha`.
pub struct ObservableTracker<'a> {
    model: &'a RodModel,
    mass: DMatrix<f64>,
    last_raw: Option<f64>,
    alpha: f64,
}

impl<'a> ObservableTracker<'a> {
    pub fn new(model: &'a RodModel) -> Self {
        Self {
            model,
            mass: model.mass_matrix(),
            last_raw: None,
            alpha: 0.0,
        }
    }

    pub fn observe(&mut self, t: f64, q: &DVector<f64>, u: &DVector<f64>) -> Result<Observables> {
        let tip = self.model.last_node();
        let a = self.model.node_rotation(q.as_slice(), tip)?;
        let (raw, beta, _) = zyx_euler_angles(&a);
        self.alpha = match self.last_raw {
            None => raw,
            Some(prev) => self.alpha + wrap_angle(raw - prev),
        };
        self.last_raw = Some(raw);
        Ok(Observables {
            t,
            tip_position: self.model.node_position(q.as_slice(), tip),
            alpha: self.alpha,
            kinetic_energy: self.model.kinetic_energy(&self.mass, u),
            strain_energy: self.model.strain_energy(q.as_slice())?,
            euler_singular: (beta.abs() - 0.5 * PI).abs() <= 1e-6,
        })
    }
}

/// Maps an angle difference into `(-pi, pi]`.
fn wrap_angle(d: f64) -> f64 {
    let w = (d + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

pub fn observables(trajectory: &Trajectory, model: &RodModel) -> Result<Vec<Observables>> {
    let mut tracker = ObservableTracker::new(model);
    trajectory
        .times
        .iter()
        .zip(&trajectory.q)
        .zip(&trajectory.u)
        .map(|((&t, q), u)| tracker.observe(t, q, u))
        .collect()
}
