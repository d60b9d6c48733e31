//! Element-wise assembly of the discrete generalized forces, the mass matrix,
//! the quaternion constraints and the kinematic differential equation.
//!
//! Connectivity is realized by contiguous index ranges; element
//! contributions are scattered in element order.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::kinematics::interpolate_fields;
use crate::mesh::element_slices;
use crate::model::RodModel;
use crate::rotations::{Quaternion, Vec3};

/// External loads; every term is scaled by the load factor passed to
/// [`RodModel::external_forces`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadSpec {
    /// Line force density (N/m), inertial frame.
    pub distributed_force: Vec3,
    /// Line moment density (N m/m), cross-section frame.
    pub distributed_moment: Vec3,
    /// Point force at `xi = 0` (N), inertial frame.
    pub start_force: Vec3,
    /// Point moment at `xi = 0` (N m), cross-section frame.
    pub start_moment: Vec3,
    /// Point force at `xi = 1` (N), inertial frame.
    pub end_force: Vec3,
    /// Point moment at `xi = 1` (N m), cross-section frame.
    pub end_moment: Vec3,
    /// Offset of the point where `end_force` acts, rigidly attached to the
    /// tip cross-section and given in its frame. `None` applies the force
    /// at the centerline.
    pub end_force_lever: Option<Vec3>,
}

impl RodModel {
    /// Internal generalized forces `f_int(q)` (reduced quadrature).
    pub fn internal_forces(&self, q: &[f64]) -> Result<DVector<f64>> {
        let mut f = DVector::zeros(self.layout().n_u());
        self.add_internal_forces(q, f.as_mut_slice())?;
        Ok(f)
    }

    pub(crate) fn add_internal_forces(&self, q: &[f64], f: &mut [f64]) -> Result<()> {
        let rule = self.reduced_rule();
        let geo = self.reference();
        let n_qp = rule.len();
        for e in 0..self.mesh().n_elements() {
            let nodes = self.element_nodes(q, e)?;
            let (_, us) = element_slices(self.mesh(), self.layout(), e);
            let fe = &mut f[us];
            for k in 0..n_qp {
                let idx = e * n_qp + k;
                let (n, dn) = (&rule.values[k], &rule.derivs[k]);
                let fld = interpolate_fields(&nodes, n, dn, geo.j_reduced[idx]);
                let (nf, mf) = self.law().contact_force_and_moment(
                    &fld.gamma,
                    &fld.kappa,
                    &geo.gamma0[idx],
                    &geo.kappa0[idx],
                );
                let w = rule.weights[k];
                let an = fld.a * nf;
                let coupling = fld.gamma_bar.cross(&nf) + fld.kappa_bar.cross(&mf);
                for i in 0..n.len() {
                    let ft = an * (w * dn[i]);
                    let fr = mf * (w * dn[i]) - coupling * (w * n[i]);
                    for c in 0..3 {
                        fe[6 * i + c] -= ft[c];
                        fe[6 * i + 3 + c] -= fr[c];
                    }
                }
            }
        }
        Ok(())
    }

    /// External generalized forces for load factor `lambda`.
    pub fn external_forces(&self, lambda: f64, q: &[f64], loads: &LoadSpec) -> Result<DVector<f64>> {
        let mut f = DVector::zeros(self.layout().n_u());
        self.add_external_forces(lambda, q, loads, f.as_mut_slice())?;
        Ok(f)
    }

    pub(crate) fn add_external_forces(
        &self,
        lambda: f64,
        q: &[f64],
        loads: &LoadSpec,
        f: &mut [f64],
    ) -> Result<()> {
        let layout = self.layout();
        if loads.distributed_force != Vec3::zeros() || loads.distributed_moment != Vec3::zeros() {
            let rule = self.full_rule();
            let n_qp = rule.len();
            let b = loads.distributed_force * lambda;
            let c = loads.distributed_moment * lambda;
            for e in 0..self.mesh().n_elements() {
                let (_, us) = element_slices(self.mesh(), layout, e);
                let fe = &mut f[us];
                for k in 0..n_qp {
                    let wj = rule.weights[k] * self.reference().j_full[e * n_qp + k];
                    for (i, &ni) in rule.values[k].iter().enumerate() {
                        for d in 0..3 {
                            fe[6 * i + d] += wj * ni * b[d];
                            fe[6 * i + 3 + d] += wj * ni * c[d];
                        }
                    }
                }
            }
        }
        let last = self.last_node();
        let mut end_moment = loads.end_moment * lambda;
        if let Some(lever) = loads.end_force_lever {
            let a = self.node_rotation(q, last)?;
            end_moment += lever.cross(&(a.transpose() * loads.end_force)) * lambda;
        }
        let point_loads = [
            (0, loads.start_force * lambda, loads.start_moment * lambda),
            (last, loads.end_force * lambda, end_moment),
        ];
        for (a, force, moment) in point_loads {
            let us = layout.node_u(a);
            for d in 0..3 {
                f[us.start + d] += force[d];
                f[us.start + 3 + d] += moment[d];
            }
        }
        Ok(())
    }

    /// Constant symmetric mass matrix (full quadrature), including the tip
    /// body when present.
    pub fn mass_matrix(&self) -> DMatrix<f64> {
        let n_u = self.layout().n_u();
        let mut m = DMatrix::zeros(n_u, n_u);
        let rule = self.full_rule();
        let n_qp = rule.len();
        let section = self.section();
        for e in 0..self.mesh().n_elements() {
            let (_, us) = element_slices(self.mesh(), self.layout(), e);
            let base = us.start;
            for k in 0..n_qp {
                let wj = rule.weights[k] * self.reference().j_full[e * n_qp + k];
                let n = &rule.values[k];
                for i in 0..n.len() {
                    for l in 0..n.len() {
                        let s = wj * n[i] * n[l];
                        let (ri, rl) = (base + 6 * i, base + 6 * l);
                        for d in 0..3 {
                            m[(ri + d, rl + d)] += s * section.line_density;
                            for c in 0..3 {
                                m[(ri + 3 + d, rl + 3 + c)] += s * section.inertia[(d, c)];
                            }
                        }
                    }
                }
            }
        }
        if let Some(body) = self.tip_body() {
            let us = self.layout().node_u(self.last_node());
            for d in 0..3 {
                m[(us.start + d, us.start + d)] += body.mass;
                for c in 0..3 {
                    m[(us.start + 3 + d, us.start + 3 + c)] += body.inertia[(d, c)];
                }
            }
        }
        m
    }

    /// Gyroscopic forces `int N_i (omega x I omega) J dxi`, plus the tip
    /// body's `omega x I_b omega`. They enter the equations of motion as
    /// `M u' = f_int + f_ext - f_gyr`.
    pub fn gyroscopic_forces(&self, u: &[f64]) -> DVector<f64> {
        let mut f = DVector::zeros(self.layout().n_u());
        self.add_gyroscopic_forces(u, f.as_mut_slice());
        f
    }

    pub(crate) fn add_gyroscopic_forces(&self, u: &[f64], f: &mut [f64]) {
        let rule = self.full_rule();
        let n_qp = rule.len();
        let inertia = self.section().inertia;
        for e in 0..self.mesh().n_elements() {
            let (_, us) = element_slices(self.mesh(), self.layout(), e);
            let ue = &u[us.clone()];
            let fe = &mut f[us];
            for k in 0..n_qp {
                let n = &rule.values[k];
                let mut omega = Vec3::zeros();
                for (i, &ni) in n.iter().enumerate() {
                    omega += Vec3::from_column_slice(&ue[6 * i + 3..6 * i + 6]) * ni;
                }
                let g = omega.cross(&(inertia * omega));
                let wj = rule.weights[k] * self.reference().j_full[e * n_qp + k];
                for (i, &ni) in n.iter().enumerate() {
                    for d in 0..3 {
                        fe[6 * i + 3 + d] += wj * ni * g[d];
                    }
                }
            }
        }
        if let Some(body) = self.tip_body() {
            let ws = self.layout().node_angular_velocity(self.last_node());
            let omega = Vec3::from_column_slice(&u[ws.clone()]);
            let g = omega.cross(&(body.inertia * omega));
            for d in 0..3 {
                f[ws.start + d] += g[d];
            }
        }
    }

    /// Quaternion constraints `g_a = |P_a|^2 - 1` and their Jacobian.
    pub fn constraints(&self, q: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n_nodes();
        let layout = self.layout();
        let mut g = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, layout.n_q());
        for a in 0..n {
            let qs = layout.node_quaternion(a);
            let p = &q[qs.clone()];
            g[a] = p.iter().map(|x| x * x).sum::<f64>() - 1.0;
            for (c, &pc) in qs.zip(p) {
                jac[(a, c)] = 2.0 * pc;
            }
        }
        (g, jac)
    }

    /// `q' = B(q) u`: centerline rates copy the nodal velocities, quaternion
    /// rates are `Q(P) omega`.
    pub fn kinematic_apply(&self, q: &[f64], u: &[f64]) -> DVector<f64> {
        let mut qdot = DVector::zeros(self.layout().n_q());
        self.add_kinematic_apply(q, u, qdot.as_mut_slice(), 1.0);
        qdot
    }

    pub(crate) fn add_kinematic_apply(&self, q: &[f64], u: &[f64], out: &mut [f64], scale: f64) {
        let layout = self.layout();
        for a in 0..self.n_nodes() {
            let (qs, ps) = (layout.node_centerline(a), layout.node_quaternion(a));
            let (vs, ws) = (layout.node_linear_velocity(a), layout.node_angular_velocity(a));
            for (i, j) in qs.zip(vs) {
                out[i] += scale * u[j];
            }
            let p = Quaternion::from_slice(&q[ps.clone()]);
            let pdot = p.rate_matrix() * Vec3::from_column_slice(&u[ws]);
            for (k, i) in ps.enumerate() {
                out[i] += scale * pdot[k];
            }
        }
    }

    /// Strain energy `sum w J W` over the reduced quadrature points, i.e. the
    /// potential whose rate the internal forces balance.
    pub fn strain_energy(&self, q: &[f64]) -> Result<f64> {
        let rule = self.reduced_rule();
        let geo = self.reference();
        let n_qp = rule.len();
        let mut energy = 0.0;
        for e in 0..self.mesh().n_elements() {
            let nodes = self.element_nodes(q, e)?;
            for k in 0..n_qp {
                let idx = e * n_qp + k;
                let j = geo.j_reduced[idx];
                let f = interpolate_fields(&nodes, &rule.values[k], &rule.derivs[k], j);
                energy += rule.weights[k]
                    * j
                    * self
                        .law()
                        .strain_energy_density(&f.gamma, &f.kappa, &geo.gamma0[idx], &geo.kappa0[idx]);
            }
        }
        Ok(energy)
    }

    pub fn kinetic_energy(&self, mass: &DMatrix<f64>, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(mass * u))
    }
}

pub fn assemble_internal_forces(model: &RodModel, q: &[f64]) -> Result<DVector<f64>> {
    model.internal_forces(q)
}

pub fn assemble_external_forces(model: &RodModel, lambda: f64, q: &[f64], loads: &LoadSpec) -> Result<DVector<f64>> {
    model.external_forces(lambda, q, loads)
}

pub fn assemble_mass_matrix(model: &RodModel) -> DMatrix<f64> {
    model.mass_matrix()
}

pub fn assemble_gyroscopic_forces(model: &RodModel, u: &[f64]) -> DVector<f64> {
    model.gyroscopic_forces(u)
}

pub fn assemble_constraints(model: &RodModel, q: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    model.constraints(q)
}

pub fn kinematic_matrix_apply(model: &RodModel, q: &[f64], u: &[f64]) -> DVector<f64> {
    model.kinematic_apply(q, u)
}
