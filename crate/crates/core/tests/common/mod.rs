#![allow(dead_code)]

use cosserat::configfit::{fit_configuration, sample_helix, straight_configuration, FitOptions, HelixSpec};
use cosserat::rotations::{so3_exp, Quaternion};
use cosserat::{CrossSection, EuclideanTransform, Mesh, RodModel, Vec3};
use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn spring_helix() -> HelixSpec {
    HelixSpec {
        radius: 0.01,
        pitch: 0.005,
        coils: 10.0,
    }
}

/// d = 1 mm, E = 1e11, nu = 0.2.
pub fn spring_section(density: f64) -> CrossSection {
    let e = 1e11;
    CrossSection::circular(1e-3, density, e, e / (2.0 * 1.2)).unwrap()
}

pub fn helix_model(spec: &HelixSpec, n_el: usize, order: usize, section: CrossSection) -> (RodModel, DVector<f64>) {
    let mesh = Mesh::new(n_el, order).unwrap();
    let samples = sample_helix(spec, 4 * mesh.n_nodes()).unwrap();
    let fit = fit_configuration(&samples, &mesh, &FitOptions::default()).unwrap();
    let model = RodModel::new(mesh, section, &fit.q).unwrap();
    (model, fit.q)
}

/// Straight rod along `e_x` from the origin.
pub fn straight_model(n_el: usize, order: usize, length: f64, section: CrossSection) -> (RodModel, DVector<f64>) {
    let mesh = Mesh::new(n_el, order).unwrap();
    let q0 = straight_configuration(&mesh, &Vec3::zeros(), &Vec3::x(), length).unwrap();
    (RodModel::new(mesh, section, &q0).unwrap(), q0)
}

pub fn random_vec3(rng: &mut StdRng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ) * scale
}

pub fn random_rigid_motion(rng: &mut StdRng) -> EuclideanTransform {
    let axis = random_vec3(rng, 1.0);
    let angle = rng.random_range(0.0..3.0);
    EuclideanTransform::new(so3_exp(&(axis.normalize() * angle)), random_vec3(rng, 1.0))
}

/// Applies `x -> A x + r` to every node; quaternions are premultiplied, so
/// nodal frames become `A A_a`.
pub fn move_rigidly(model: &RodModel, q: &DVector<f64>, h: &EuclideanTransform) -> DVector<f64> {
    let ph = cosserat::rotations::quaternion_from_rotation(&h.rotation).unwrap();
    let layout = model.layout();
    let mut out = q.clone();
    for a in 0..model.n_nodes() {
        let r = h.apply(&model.node_position(q.as_slice(), a));
        out.rows_mut(layout.node_centerline(a).start, 3).copy_from(&r);
        let p = ph * model.node_quaternion(q.as_slice(), a);
        out.rows_mut(layout.node_quaternion(a).start, 4)
            .copy_from_slice(&p.to_array());
    }
    out
}

/// Perturbs positions by up to `pos` and rotations by up to `rot` radians,
/// then rescales every quaternion by a random factor in `[0.5, 2]`.
pub fn perturb(model: &RodModel, q: &DVector<f64>, rng: &mut StdRng, pos: f64, rot: f64) -> DVector<f64> {
    let layout = model.layout();
    let mut out = q.clone();
    for a in 0..model.n_nodes() {
        let r = model.node_position(q.as_slice(), a) + random_vec3(rng, pos);
        out.rows_mut(layout.node_centerline(a).start, 3).copy_from(&r);
        let dp = Quaternion::from_rotation_vector(&random_vec3(rng, rot));
        let s = rng.random_range(0.5..2.0);
        let p = (model.node_quaternion(q.as_slice(), a) * dp).scale(s);
        out.rows_mut(layout.node_quaternion(a).start, 4)
            .copy_from_slice(&p.to_array());
    }
    out
}

pub fn random_velocities(model: &RodModel, rng: &mut StdRng, v: f64, w: f64) -> DVector<f64> {
    let layout = model.layout();
    let mut u = DVector::zeros(layout.n_u());
    for a in 0..model.n_nodes() {
        u.rows_mut(layout.node_linear_velocity(a).start, 3)
            .copy_from(&random_vec3(rng, v));
        u.rows_mut(layout.node_angular_velocity(a).start, 3)
            .copy_from(&random_vec3(rng, w));
    }
    u
}

/// Offset from the tip node to the coil axis (`x = y = 0`), in the tip frame.
pub fn coil_axis_lever(model: &RodModel, q: &DVector<f64>) -> Vec3 {
    let tip = model.last_node();
    let r = model.node_position(q.as_slice(), tip);
    let a = model.node_rotation(q.as_slice(), tip).unwrap();
    a.transpose() * Vec3::new(-r.x, -r.y, 0.0)
}

/// Least-squares slope through the origin of `force` against `z`.
pub fn stiffness(force: &[f64], displacement: &[f64]) -> f64 {
    let num: f64 = force.iter().zip(displacement).map(|(f, z)| f * z).sum();
    let den: f64 = displacement.iter().map(|z| z * z).sum();
    num / den
}
