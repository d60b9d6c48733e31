//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a failure status if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use cosserat::configfit::straight_configuration;
use cosserat::dynamics::{integrate_with, DynamicProblem, ObservableTracker};
use cosserat::kinematics::evaluate_fields;
use cosserat::mesh::{element_slices, gauss_legendre, lagrange_basis};
use cosserat::rotations::{quaternion_from_rotation, se3_exp, se3_log, so3_exp, Twist};
use cosserat::statics::{solve_static_with, StaticProblem, StaticStep};
use cosserat::{EuclideanTransform, Mesh, Quaternion, RodModel, Vec3};
use cosserat_cli::runner::{build_reference, load_spec, Reference};
use cosserat_cli::scenario::{Analysis, Scenario, Setup};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

const SPRING_STIFFNESS: f64 = 65.1;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn bundled(name: &str) -> Setup {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name);
    Scenario::from_path(&path).unwrap().validate().unwrap()
}

fn with_ramp(mut setup: Setup, elements: usize, force: f64, increments: usize) -> Setup {
    setup.elements = elements;
    setup.fit_samples = 4 * (elements * setup.order + 1);
    setup.tip_force = Vec3::new(0.0, 0.0, force);
    let Analysis::Static(settings) = &mut setup.analysis else {
        panic!("spring scenario is static");
    };
    settings.increments = increments;
    setup
}

/// Runs the static ramp of a spring setup; returns the reference and all steps.
fn spring_ramp(setup: &Setup) -> (Reference, Result<Vec<StaticStep>, cosserat::Error>) {
    let reference = build_reference(setup).unwrap();
    let Analysis::Static(settings) = &setup.analysis else {
        panic!("spring scenario is static");
    };
    let loads = load_spec(setup, &reference).unwrap();
    let problem = StaticProblem::new(loads, setup.clamped_nodes.clone(), settings.increments);
    let mut steps = Vec::new();
    let outcome = solve_static_with(&reference.model, &problem, &reference.q0, |s| steps.push(s.clone()));
    (reference, outcome.map(|_| steps))
}

fn tip_dz(reference: &Reference, q: &DVector<f64>) -> f64 {
    let tip = reference.model.last_node();
    reference.model.node_position(q.as_slice(), tip).z - reference.model.node_position(reference.q0.as_slice(), tip).z
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_1(steps_out: &mut Vec<(String, Vec<StaticStep>, RodModel)>) -> Verdict {
    let setup = with_ramp(bundled("helical_spring.scenario"), 75, 1.0, 10);
    let (reference, outcome) = spring_ramp(&setup);
    let steps = match outcome {
        Ok(steps) => steps,
        Err(e) => return Verdict::new(false, format!("ramp failed: {e}")),
    };
    let force: Vec<f64> = steps.iter().map(|s| s.load_factor * 1.0).collect();
    let dz: Vec<f64> = steps.iter().map(|s| tip_dz(&reference, &s.q)).collect();
    // stiffness is force over elongation
    let k = 1.0 / least_squares_slope(&force, &dz);
    let rel = (k - SPRING_STIFFNESS).abs() / SPRING_STIFFNESS;
    steps_out.push(("criterion 1".into(), steps, reference.model));
    Verdict::new(rel <= 0.02, format!("stiffness {k:.3} N/m, deviation {:.2}% (limit 2%)", 100.0 * rel))
}

fn criterion_2(steps_out: &mut Vec<(String, Vec<StaticStep>, RodModel)>) -> Verdict {
    let setup = with_ramp(bundled("helical_spring.scenario"), 20, 100.0, 50);
    let (reference, outcome) = spring_ramp(&setup);
    let steps = match outcome {
        Ok(steps) => steps,
        Err(e) => return Verdict::new(false, format!("ramp failed: {e}")),
    };
    let dz: Vec<f64> = steps.iter().map(|s| tip_dz(&reference, &s.q)).collect();
    let monotonic = dz.windows(2).all(|w| w[1] > w[0]);
    let last = *dz.last().unwrap();
    let linear = 100.0 / SPRING_STIFFNESS;
    let converged = steps.len() == 51;
    steps_out.push(("criterion 2".into(), steps, reference.model));
    Verdict::new(
        converged && monotonic && last < linear,
        format!("{} steps converged, monotonic {monotonic}, elongation {last:.4} m (linear {linear:.4} m)", dz.len() - 1),
    )
}

fn criterion_3() -> Verdict {
    let mut worst: f64 = 0.0;
    for name in ["helical_spring.scenario", "wilberforce.scenario"] {
        let setup = bundled(name);
        let reference = build_reference(&setup).unwrap();
        let f = reference.model.internal_forces(reference.q0.as_slice()).unwrap();
        worst = worst.max(f.amax() / setup.section.axial_stiffness());
    }
    Verdict::new(worst <= 1e-10, format!("max |f_int(q0)| = {worst:.2e} EA (limit 1e-10 EA)"))
}

fn random_vec3(rng: &mut StdRng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ) * scale
}

fn random_rotation(rng: &mut StdRng) -> nalgebra::Matrix3<f64> {
    so3_exp(&(random_vec3(rng, 1.0).normalize() * rng.random_range(0.0..PI - 0.1)))
}

fn move_rigidly(model: &RodModel, q: &DVector<f64>, h: &EuclideanTransform) -> DVector<f64> {
    let ph = quaternion_from_rotation(&h.rotation).unwrap();
    let layout = model.layout();
    let mut out = q.clone();
    for a in 0..model.n_nodes() {
        out.rows_mut(layout.node_centerline(a).start, 3)
            .copy_from(&h.apply(&model.node_position(q.as_slice(), a)));
        let p = ph * model.node_quaternion(q.as_slice(), a);
        out.rows_mut(layout.node_quaternion(a).start, 4).copy_from_slice(&p.to_array());
    }
    out
}

/// Random nodal position and rotation perturbations with random quaternion
/// scaling.
fn perturb(model: &RodModel, q: &DVector<f64>, rng: &mut StdRng, pos: f64, rot: f64) -> DVector<f64> {
    let layout = model.layout();
    let mut out = q.clone();
    for a in 0..model.n_nodes() {
        let r = model.node_position(q.as_slice(), a) + random_vec3(rng, pos);
        out.rows_mut(layout.node_centerline(a).start, 3).copy_from(&r);
        let p = (model.node_quaternion(q.as_slice(), a) * Quaternion::from_rotation_vector(&random_vec3(rng, rot)))
            .scale(rng.random_range(0.5..2.0));
        out.rows_mut(layout.node_quaternion(a).start, 4).copy_from_slice(&p.to_array());
    }
    out
}

fn random_velocities(model: &RodModel, rng: &mut StdRng, v: f64, w: f64) -> DVector<f64> {
    let layout = model.layout();
    let mut u = DVector::zeros(layout.n_u());
    for a in 0..model.n_nodes() {
        u.rows_mut(layout.node_linear_velocity(a).start, 3).copy_from(&random_vec3(rng, v));
        u.rows_mut(layout.node_angular_velocity(a).start, 3).copy_from(&random_vec3(rng, w));
    }
    u
}

/// Largest relative change of strains at the reduced quadrature points and
/// of internal forces under a rigid motion.
fn objectivity_defect(model: &RodModel, q: &DVector<f64>, h: &EuclideanTransform) -> (f64, f64) {
    let moved = move_rigidly(model, q, h);
    let mesh = model.mesh();
    let rule = model.reduced_rule();
    let mut strain: f64 = 0.0;
    for e in 0..mesh.n_elements() {
        let (qs, _) = element_slices(mesh, model.layout(), e);
        for k in 0..rule.len() {
            let xi = rule.point(mesh, e, k);
            let a = evaluate_fields(&q.as_slice()[qs.clone()], mesh, e, xi, 1.0).unwrap();
            let b = evaluate_fields(&moved.as_slice()[qs.clone()], mesh, e, xi, 1.0).unwrap();
            strain = strain.max((a.gamma_bar - b.gamma_bar).norm() / a.gamma_bar.norm());
            strain = strain.max((a.kappa_bar - b.kappa_bar).norm() / a.kappa_bar.norm().max(f64::EPSILON));
        }
    }
    let f = model.internal_forces(q.as_slice()).unwrap();
    let g = model.internal_forces(moved.as_slice()).unwrap();
    let layout = model.layout();
    let mut expected = f.clone();
    for a in 0..model.n_nodes() {
        let vs = layout.node_linear_velocity(a);
        let rotated = h.rotation * Vec3::from_column_slice(&f.as_slice()[vs.clone()]);
        expected.rows_mut(vs.start, 3).copy_from(&rotated);
    }
    let force = (g - expected).amax() / f.amax().max(f64::MIN_POSITIVE);
    (strain, force)
}

fn criterion_4() -> Verdict {
    let mut rng = StdRng::seed_from_u64(4);
    let (mut strain, mut force): (f64, f64) = (0.0, 0.0);
    let mut rigid_force: f64 = 0.0;
    for name in ["helical_spring.scenario", "wilberforce.scenario"] {
        let setup = bundled(name);
        let reference = build_reference(&setup).unwrap();
        let model = &reference.model;
        // a deformed state so the forces are not trivially zero
        let mut deformed = perturb(model, &reference.q0, &mut rng, 1e-4, 0.02);
        model.normalize_quaternions(deformed.as_mut_slice()).unwrap();
        let ea = setup.section.axial_stiffness();
        for _ in 0..20 {
            let h = EuclideanTransform::new(random_rotation(&mut rng), random_vec3(&mut rng, 1.0));
            let (s, f) = objectivity_defect(model, &deformed, &h);
            strain = strain.max(s);
            force = force.max(f);
            let moved = move_rigidly(model, &reference.q0, &h);
            rigid_force = rigid_force.max(model.internal_forces(moved.as_slice()).unwrap().amax() / ea);
        }
    }
    Verdict::new(
        strain <= 1e-10 && force <= 1e-10 && rigid_force <= 1e-10,
        format!(
            "20 motions per scenario: strain change {strain:.1e}, force change {force:.1e} (relative), rigidly moved reference |f_int| {rigid_force:.1e} EA (limit 1e-10)"
        ),
    )
}

fn criterion_5() -> Verdict {
    let mut rng = StdRng::seed_from_u64(5);
    let setup = bundled("wilberforce.scenario");
    let reference = build_reference(&setup).unwrap();
    let model = &reference.model;

    let mut gyro: f64 = 0.0;
    for _ in 0..20 {
        let u = random_velocities(model, &mut rng, 1.0, 50.0);
        let f = model.gyroscopic_forces(u.as_slice());
        gyro = gyro.max(u.dot(&f).abs() / (u.norm() * f.norm()));
    }

    let mut power: f64 = 0.0;
    for _ in 0..20 {
        let q = perturb(model, &reference.q0, &mut rng, 1e-4, 0.05);
        let u = random_velocities(model, &mut rng, 1.0, 1.0);
        let work = u.dot(&model.internal_forces(q.as_slice()).unwrap());
        let qd = model.kinematic_apply(q.as_slice(), u.as_slice());
        let h = 1e-7;
        let ep = model.strain_energy((&q + &qd * h).as_slice()).unwrap();
        let em = model.strain_energy((&q - &qd * h).as_slice()).unwrap();
        let rate = (ep - em) / (2.0 * h);
        power = power.max((work + rate).abs() / work.abs().max(rate.abs()));
    }

    let m = model.mass_matrix();
    let symmetric = (&m - m.transpose()).amax() <= 1e-14 * m.amax();
    let free: Vec<usize> = (0..model.layout().n_u())
        .filter(|&i| !setup.clamped_nodes.iter().any(|&a| model.layout().node_u(a).contains(&i)))
        .collect();
    let definite = m.select_rows(&free).select_columns(&free).cholesky().is_some();

    Verdict::new(
        gyro <= 1e-12 && power <= 1e-5 && symmetric && definite,
        format!(
            "u^T f_gyr {gyro:.1e} (limit 1e-12), power balance {power:.1e} (limit 1e-5), M symmetric {symmetric}, M_ff positive definite {definite}"
        ),
    )
}

/// Magnitude of the analytic signal of the mean-free series.
fn hilbert_envelope(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let weight = if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *c *= weight;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.norm() / n as f64).collect()
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn criterion_6() -> Verdict {
    let mut setup = bundled("wilberforce.scenario");
    let Analysis::Dynamic(settings) = &mut setup.analysis else {
        panic!("pendulum scenario is dynamic");
    };
    settings.t_end = 4.0;
    let settings = settings.clone();
    let reference = build_reference(&setup).unwrap();
    let loads = load_spec(&setup, &reference).unwrap();
    let model = &reference.model;
    let problem = DynamicProblem::new(loads, setup.clamped_nodes.clone(), settings.t_end, settings.dt, settings.rho_inf);
    let mut tracker = ObservableTracker::new(model);
    let (mut z, mut alpha) = (Vec::new(), Vec::new());
    let u0 = DVector::zeros(model.layout().n_u());
    let outcome = integrate_with(model, &problem, &reference.q0, &u0, |s| {
        let o = tracker.observe(s.t, s.q, s.u).unwrap();
        z.push(o.tip_position.z);
        alpha.push(o.alpha);
    });
    if let Err(e) = outcome {
        return Verdict::new(false, format!("integration failed after {} samples: {e}", z.len()));
    }

    // drop 0.2 s at both ends, where the transform wraps around
    let trim = (0.2 / settings.dt).round() as usize;
    let (ez, ea) = (hilbert_envelope(&z), hilbert_envelope(&alpha));
    let (ez, ea) = (&ez[trim..ez.len() - trim], &ea[trim..ea.len() - trim]);
    let correlation = pearson(ez, ea);
    let quarter = ez.len() / 4;
    let (z_first, z_last) = (mean(&ez[..quarter]), mean(&ez[ez.len() - quarter..]));
    let (a_first, a_last) = (mean(&ea[..quarter]), mean(&ea[ea.len() - quarter..]));

    // torsion starts from rest: first 0.1 s against the largest excursion
    let start = (0.1 / settings.dt).round() as usize;
    let excursion = |range: &[f64]| range.iter().map(|a| (a - alpha[0]).abs()).fold(0.0, f64::max);
    let (early, overall) = (excursion(&alpha[..=start]), excursion(&alpha));

    let pass = correlation <= -0.5 && z_last < z_first && a_last > a_first && early <= 0.05 * overall;
    Verdict::new(
        pass,
        format!(
            "envelope correlation {correlation:.2} (limit -0.5); z envelope {z_first:.4} -> {z_last:.4} m; alpha envelope {a_first:.3} -> {a_last:.3} rad; |alpha - alpha0| over first 0.1 s {early:.3} rad of {overall:.3} rad"
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut rng = StdRng::seed_from_u64(7);
    let mut failures = Vec::new();

    let mut scale: f64 = 0.0;
    let mut cover: f64 = 0.0;
    for _ in 0..200 {
        let p = Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if p.norm() < 0.1 {
            continue;
        }
        let a = p.rotation().unwrap();
        let s = rng.random_range(0.1..10.0);
        scale = scale.max((p.scale(s).rotation().unwrap() - a).amax());
        cover = cover.max((p.scale(-1.0).rotation().unwrap() - a).amax());
    }
    if scale > 1e-12 || cover > 1e-12 {
        failures.push(format!("quaternion scale {scale:.1e} / sign {cover:.1e}"));
    }

    let mut roundtrip: f64 = 0.0;
    for _ in 0..200 {
        let twist = Twist::new(
            random_vec3(&mut rng, 2.0),
            random_vec3(&mut rng, 1.0).normalize() * rng.random_range(0.0..PI - 0.1),
        );
        let back = se3_log(&se3_exp(&twist)).unwrap();
        let d = back.to_array().iter().zip(twist.to_array()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        roundtrip = roundtrip.max(d);
    }
    if roundtrip > 1e-10 {
        failures.push(format!("SE(3) roundtrip {roundtrip:.1e}"));
    }

    let mut unity: f64 = 0.0;
    for p in 1..=5 {
        let nodes: Vec<f64> = (0..=p).map(|i| i as f64 / p as f64).collect();
        for k in 0..50 {
            let (n, dn) = lagrange_basis(&nodes, k as f64 / 49.0);
            unity = unity.max((n.iter().sum::<f64>() - 1.0).abs()).max(dn.iter().sum::<f64>().abs());
        }
    }
    if unity > 1e-12 {
        failures.push(format!("partition of unity {unity:.1e}"));
    }

    let mut exactness: f64 = 0.0;
    for n_pt in 1..=8 {
        let rule = gauss_legendre(n_pt, -0.3, 1.7).unwrap();
        for degree in 0..2 * n_pt {
            let exact = (1.7f64.powi(degree as i32 + 1) - (-0.3f64).powi(degree as i32 + 1)) / (degree as f64 + 1.0);
            let approx = rule.integrate(|x| x.powi(degree as i32));
            exactness = exactness.max((approx - exact).abs() / exact.abs().max(1.0));
        }
    }
    if exactness > 1e-12 {
        failures.push(format!("Gauss-Legendre exactness {exactness:.1e}"));
    }

    let mesh = Mesh::new(3, 2).unwrap();
    let q0 = straight_configuration(&mesh, &Vec3::zeros(), &Vec3::x(), 1.0).unwrap();
    let model = RodModel::new(mesh, bundled("helical_spring.scenario").section, &q0).unwrap();
    let q = perturb(&model, &q0, &mut rng, 0.1, 1.0);
    let (g, jac) = model.constraints(q.as_slice());
    let mut fd = DMatrix::zeros(g.len(), q.len());
    for j in 0..q.len() {
        let h = 1e-6 * (1.0 + q[j].abs());
        let (mut qp, mut qm) = (q.clone(), q.clone());
        qp[j] += h;
        qm[j] -= h;
        fd.set_column(j, &((model.constraints(qp.as_slice()).0 - model.constraints(qm.as_slice()).0) / (2.0 * h)));
    }
    let constraint = (&fd - &jac).amax() / jac.amax();
    if constraint > 1e-8 {
        failures.push(format!("constraint Jacobian {constraint:.1e}"));
    }

    Verdict::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "quaternion scale/sign {:.1e}, SE(3) roundtrip {roundtrip:.1e}, partition of unity {unity:.1e}, quadrature {exactness:.1e}, constraint Jacobian {constraint:.1e}",
                scale.max(cover)
            )
        } else {
            failures.join("; ")
        },
    )
}

fn criterion_8(runs: &[(String, Vec<StaticStep>, RodModel)]) -> Verdict {
    if runs.is_empty() {
        return Verdict::new(false, "no converged static runs");
    }
    let (mut residual, mut norm): (f64, f64) = (0.0, 0.0);
    let mut count = 0;
    for (_, steps, model) in runs {
        for step in steps {
            residual = residual.max(step.residual);
            for a in 0..model.n_nodes() {
                norm = norm.max((model.node_quaternion(step.q.as_slice(), a).norm_squared() - 1.0).abs());
            }
            count += 1;
        }
    }
    let names: Vec<&str> = runs.iter().map(|r| r.0.as_str()).collect();
    Verdict::new(
        residual <= 1e-8 && norm <= 1e-8,
        format!(
            "{count} converged steps ({}): max residual {residual:.1e}, max |P^2 - 1| {norm:.1e} (limit 1e-8)",
            names.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let mut static_runs = Vec::new();
    let mut failed = 0;
    let mut report = |n: usize, verdict: Verdict, started: Instant| {
        let status = if verdict.pass { "PASS" } else { "FAIL" };
        println!(
            "acceptance {n}: {status} ({:.1} s) {}",
            started.elapsed().as_secs_f64(),
            verdict.detail
        );
        failed += usize::from(!verdict.pass);
    };
    let t = Instant::now();
    report(1, criterion_1(&mut static_runs), t);
    let t = Instant::now();
    report(2, criterion_2(&mut static_runs), t);
    let t = Instant::now();
    report(3, criterion_3(), t);
    let t = Instant::now();
    report(4, criterion_4(), t);
    let t = Instant::now();
    report(5, criterion_5(), t);
    let t = Instant::now();
    report(6, criterion_6(), t);
    let t = Instant::now();
    report(7, criterion_7(), t);
    let t = Instant::now();
    report(8, criterion_8(&static_runs), t);
    if failed == 0 {
        println!("acceptance: all 8 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 8 criteria fail");
        ExitCode::FAILURE
    }
}
