//! Load-stepped Newton solver for the static equilibrium
//! `f_int(q) + f_ext(q) = 0` augmented by the quaternion constraints
//! `|P_a|^2 - 1 = 0`.
//!
//! Clamped nodes are eliminated, which leaves a square system of `7 n_free`
//! equations in the `7 n_free` free position coordinates. The Jacobian is
//! built from forward differences of the force rows; the constraint rows
//! are exact.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::assembly::LoadSpec;
use crate::error::{Error, Result};
use crate::model::RodModel;
use crate::reduction::{check_start, Reduction};

/// Finite-difference scheme for Jacobian columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DifferenceScheme {
    /// `(R(q + h e_j) - R(q)) / h` with `h = 1e-7 (1 + |q_j|)`.
    Forward,
    /// `(R(q + h e_j) - R(q - h e_j)) / 2h` with `h = 1e-6 (1 + |q_j|)`.
    /// The truncation error of forward differences in the stiff axial
    /// terms swamps the bending stiffness of slender coils, which stalls
    /// Newton's method.
    #[default]
    Central,
}

impl DifferenceScheme {
    pub fn step(self, x: f64) -> f64 {
        match self {
            DifferenceScheme::Forward => 1e-7 * (1.0 + x.abs()),
            DifferenceScheme::Central => 1e-6 * (1.0 + x.abs()),
        }
    }

    /// Column `j` of the Jacobian of `f` at `x`; `base = f(x)` is only used
    /// by the forward scheme.
    pub fn column<E>(
        self,
        x: &[f64],
        j: usize,
        base: &DVector<f64>,
        f: impl Fn(&[f64]) -> std::result::Result<DVector<f64>, E>,
    ) -> std::result::Result<DVector<f64>, E> {
        let h = self.step(x[j]);
        let mut xp = x.to_vec();
        xp[j] += h;
        let fp = f(&xp)?;
        match self {
            DifferenceScheme::Forward => Ok((fp - base) / h),
            DifferenceScheme::Central => {
                xp[j] = x[j] - h;
                let fm = f(&xp)?;
                Ok((fp - fm) / (2.0 * h))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticProblem {
    pub loads: LoadSpec,
    pub fixed_nodes: Vec<usize>,
    /// Number of load increments; load factors are `k / n_steps`.
    pub n_steps: usize,
    /// Max-abs residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub jacobian: DifferenceScheme,
}

impl StaticProblem {
    pub fn new(loads: LoadSpec, fixed_nodes: Vec<usize>, n_steps: usize) -> Self {
        Self {
            loads,
            fixed_nodes,
            n_steps,
            tol: 1e-8,
            max_iter: 30,
            jacobian: DifferenceScheme::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticStep {
    pub load_factor: f64,
    pub q: DVector<f64>,
    /// Max-abs residual at convergence.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StaticSolution {
    /// One entry per load factor, starting with `0`.
    pub steps: Vec<StaticStep>,
}

impl StaticSolution {
    pub fn last(&self) -> Option<&StaticStep> {
        self.steps.last()
    }
}

/// Reduced residual and Jacobian of the constrained equilibrium.
pub struct StaticSystem<'a> {
    model: &'a RodModel,
    loads: &'a LoadSpec,
    reduction: Reduction,
}

impl<'a> StaticSystem<'a> {
    pub fn new(model: &'a RodModel, loads: &'a LoadSpec, fixed_nodes: &[usize]) -> Result<Self> {
        Ok(Self {
            model,
            loads,
            reduction: Reduction::new(model.layout(), fixed_nodes)?,
        })
    }

    /// Number of unknowns (and equations).
    pub fn dim(&self) -> usize {
        self.reduction.free_q.len()
    }

    pub fn free_coordinates(&self) -> &[usize] {
        &self.reduction.free_q
    }

    fn force_rows(&self, q: &[f64], lambda: f64) -> Result<DVector<f64>> {
        let mut f = self.model.internal_forces(q)?;
        self.model
            .add_external_forces(lambda, q, self.loads, f.as_mut_slice())?;
        Ok(Reduction::gather(&self.reduction.free_u, f.as_slice()))
    }

    /// `[f_int + f_ext; g]` restricted to the free nodes.
    pub fn residual(&self, q: &[f64], lambda: f64) -> Result<DVector<f64>> {
        let forces = self.force_rows(q, lambda)?;
        let n_f = forces.len();
        let mut r = DVector::zeros(self.dim());
        r.rows_mut(0, n_f).copy_from(&forces);
        let layout = self.model.layout();
        for (row, &a) in self.reduction.free_nodes.iter().enumerate() {
            let p = &q[layout.node_quaternion(a)];
            r[n_f + row] = p.iter().map(|x| x * x).sum::<f64>() - 1.0;
        }
        Ok(r)
    }

    /// Jacobian of [`Self::residual`] with respect to the free coordinates.
    /// Force rows: forward differences with step `1e-7 (1 + |q_j|)`;
    /// constraint rows: `2 P_a^T`.
    pub fn jacobian(&self, q: &[f64], lambda: f64) -> Result<DMatrix<f64>> {
        self.jacobian_with(q, lambda, DifferenceScheme::Forward)
    }

    pub fn jacobian_with(&self, q: &[f64], lambda: f64, scheme: DifferenceScheme) -> Result<DMatrix<f64>> {
        let base = self.force_rows(q, lambda)?;
        let n_f = base.len();
        let dim = self.dim();
        let columns: Vec<DVector<f64>> = self
            .reduction
            .free_q
            .par_iter()
            .map(|&j| scheme.column(q, j, &base, |qp| self.force_rows(qp, lambda)))
            .collect::<Result<_>>()?;
        let mut jac = DMatrix::zeros(dim, dim);
        for (c, col) in columns.iter().enumerate() {
            jac.view_mut((0, c), (n_f, 1)).copy_from(col);
        }
        let layout = self.model.layout();
        // free_q lists the free nodes in order, 7 coordinates each
        for (row, &a) in self.reduction.free_nodes.iter().enumerate() {
            let p = &q[layout.node_quaternion(a)];
            for k in 0..4 {
                jac[(n_f + row, 7 * row + 3 + k)] = 2.0 * p[k];
            }
        }
        Ok(jac)
    }

    /// Newton iteration at fixed `lambda`, updating `q` in place.
    fn newton(
        &self,
        q: &mut DVector<f64>,
        lambda: f64,
        problem: &StaticProblem,
        step: usize,
    ) -> Result<(usize, f64)> {
        let (tol, max_iter) = (problem.tol, problem.max_iter);
        let free = &self.reduction.free_q;
        let mut residual = f64::INFINITY;
        for iter in 0..=max_iter {
            let r = self.residual(q.as_slice(), lambda)?;
            residual = r.amax();
            if !residual.is_finite() {
                break;
            }
            if residual <= tol {
                return Ok((iter, residual));
            }
            if iter == max_iter {
                break;
            }
            let jac = self.jacobian_with(q.as_slice(), lambda, problem.jacobian)?;
            let dx = jac
                .lu()
                .solve(&(-r))
                .filter(|dx| dx.iter().all(|x| x.is_finite()))
                .ok_or(Error::SingularJacobian { step })?;
            for (k, &i) in free.iter().enumerate() {
                q[i] += dx[k];
            }
        }
        Err(Error::NonConvergence {
            step,
            iterations: max_iter,
            residual,
        })
    }
}

/// Ramps the load factor from 0 to 1 in `n_steps` increments, calling
/// `on_step` after every converged step (including the initial `0`).
///
/// A failed increment is retried once as two half increments.
pub fn solve_static_with(
    model: &RodModel,
    problem: &StaticProblem,
    q_start: &DVector<f64>,
    mut on_step: impl FnMut(&StaticStep),
) -> Result<StaticSolution> {
    if problem.n_steps == 0 {
        return Err(Error::InvalidInput("at least one load increment is required".into()));
    }
    check_start(model, q_start, &problem.fixed_nodes)?;
    let system = StaticSystem::new(model, &problem.loads, &problem.fixed_nodes)?;

    let mut q = q_start.clone();
    let mut solution = StaticSolution::default();
    let (iterations, residual) = system.newton(&mut q, 0.0, problem, 0)?;
    let first = StaticStep {
        load_factor: 0.0,
        q: q.clone(),
        residual,
        iterations,
    };
    on_step(&first);
    solution.steps.push(first);

    for k in 1..=problem.n_steps {
        let lambda = k as f64 / problem.n_steps as f64;
        let mut trial = q.clone();
        let outcome = match system.newton(&mut trial, lambda, problem, k) {
            Ok(done) => Ok(done),
            Err(Error::NonConvergence { .. }) | Err(Error::SingularJacobian { .. }) => {
                trial = q.clone();
                let half = (k as f64 - 0.5) / problem.n_steps as f64;
                system
                    .newton(&mut trial, half, problem, k)
                    .and_then(|(i0, _)| {
                        let (i1, r) = system.newton(&mut trial, lambda, problem, k)?;
                        Ok((i0 + i1, r))
                    })
            }
            Err(e) => Err(e),
        };
        let (iterations, residual) = outcome?;
        q = trial;
        let step = StaticStep {
            load_factor: lambda,
            q: q.clone(),
            residual,
            iterations,
        };
        on_step(&step);
        solution.steps.push(step);
    }
    Ok(solution)
}

pub fn solve_static(model: &RodModel, problem: &StaticProblem, q_start: &DVector<f64>) -> Result<StaticSolution> {
    solve_static_with(model, problem, q_start, |_| {})
}

/// Free-function form of [`StaticSystem::jacobian`] (forward differences).
pub fn residual_jacobian(
    model: &RodModel,
    loads: &LoadSpec,
    fixed_nodes: &[usize],
    q: &[f64],
    lambda: f64,
) -> Result<DMatrix<f64>> {
    StaticSystem::new(model, loads, fixed_nodes)?.jacobian(q, lambda)
}
