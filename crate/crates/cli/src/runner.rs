//! Builds models from validated scenarios and runs the requested analysis.

use std::path::{Path, PathBuf};

use cosserat::configfit::{
    fit_configuration, max_position_error, sample_helix, sample_straight, FitOptions, FitResult,
    FramedCurveSamples,
};
use cosserat::dynamics::{integrate_with, DynamicProblem, ObservableTracker};
use cosserat::rotations::so3_exp;
use cosserat::statics::{solve_static_with, StaticProblem};
use cosserat::{LoadSpec, Mesh, RodModel, TipBody, Vec3};
use nalgebra::DVector;

use crate::output::{self, Table};
use crate::scenario::{Analysis, Curve, HelixOrientation, Setup, TipBodyData, TipLoadPoint};
use crate::CliError;

/// Fitted reference configuration and the model built on it.
pub struct Reference {
    pub model: RodModel,
    pub q0: DVector<f64>,
    pub samples: FramedCurveSamples,
    pub fit: FitResult,
}

pub fn target_samples(curve: &Curve, m: usize) -> Result<FramedCurveSamples, CliError> {
    let samples = match curve {
        Curve::Helix { spec, orientation } => {
            let mut samples = sample_helix(spec, m)?;
            if *orientation == HelixOrientation::Hanging {
                let flip = so3_exp(&Vec3::new(std::f64::consts::PI, 0.0, 0.0));
                for (r, a) in samples.positions.iter_mut().zip(samples.frames.iter_mut()) {
                    *r = flip * *r;
                    *a = flip * *a;
                }
            }
            samples
        }
        Curve::Straight {
            start,
            direction,
            length,
        } => sample_straight(start, direction, *length, m)?,
    };
    Ok(samples)
}

pub fn build_reference(setup: &Setup) -> Result<Reference, CliError> {
    let mesh = Mesh::new(setup.elements, setup.order)?;
    let samples = target_samples(&setup.curve, setup.fit_samples)?;
    let fit = fit_configuration(&samples, &mesh, &FitOptions::default())?;
    let q0 = fit.q.clone();
    let mut model = RodModel::new(mesh, setup.section.clone(), &q0)?;
    if let Some(body) = &setup.tip_body {
        let body = match body {
            TipBodyData::TipFrame { mass, inertia } => TipBody {
                mass: *mass,
                inertia: *inertia,
            },
            TipBodyData::Inertial { mass, inertia } => {
                let a = model.node_rotation(q0.as_slice(), model.last_node())?;
                TipBody {
                    mass: *mass,
                    inertia: a.transpose() * inertia * a,
                }
            }
        };
        model = model.with_tip_body(body);
    }
    Ok(Reference {
        model,
        q0,
        samples,
        fit,
    })
}

/// External loads at full load factor, including gravity in dynamic runs.
pub fn load_spec(setup: &Setup, reference: &Reference) -> Result<LoadSpec, CliError> {
    let model = &reference.model;
    let q0 = &reference.q0;
    let mut loads = LoadSpec {
        distributed_force: setup.distributed_force,
        distributed_moment: setup.distributed_moment,
        end_force: setup.tip_force,
        end_moment: setup.tip_moment,
        ..Default::default()
    };
    if let Analysis::Dynamic(d) = &setup.analysis {
        let down = Vec3::new(0.0, 0.0, -d.gravity);
        if let Some(body) = &setup.tip_body {
            loads.end_force += down * body.mass();
        }
        if d.rod_gravity {
            loads.distributed_force += down * setup.section.line_density;
        }
    }
    if setup.tip_load_point == TipLoadPoint::CoilAxis {
        let tip = model.last_node();
        let r = model.node_position(q0.as_slice(), tip);
        let a = model.node_rotation(q0.as_slice(), tip)?;
        loads.end_force_lever = Some(a.transpose() * Vec3::new(-r.x, -r.y, 0.0));
    }
    Ok(loads)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Write every `decimate`-th time step to the trajectory table.
    pub decimate: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

/// Runs the analysis and writes the result tables into `options.out_dir`.
/// Tables are flushed before a solver failure is reported.
pub fn run(setup: &Setup, options: &RunOptions) -> Result<RunSummary, CliError> {
    std::fs::create_dir_all(&options.out_dir).map_err(|e| CliError::Io {
        path: options.out_dir.clone(),
        source: e,
    })?;
    let reference = build_reference(setup)?;
    let mut summary = RunSummary::default();
    summary.notes.push(format!(
        "reference fit: K = {:e} after {} iterations",
        reference.fit.residual, reference.fit.iterations
    ));
    match &setup.analysis {
        Analysis::Static(_) => run_static(setup, &reference, options, &mut summary)?,
        Analysis::Dynamic(_) => run_dynamic(setup, &reference, options, &mut summary)?,
        Analysis::FitOnly {} => run_fit(&reference, options, &mut summary)?,
    }
    Ok(summary)
}

fn snapshot_steps(snapshots: &[f64], increments: usize) -> Vec<usize> {
    let mut steps: Vec<usize> = snapshots
        .iter()
        .map(|s| (s * increments as f64).round() as usize)
        .collect();
    steps.sort_unstable();
    steps.dedup();
    steps
}

fn run_static(
    setup: &Setup,
    reference: &Reference,
    options: &RunOptions,
    summary: &mut RunSummary,
) -> Result<(), CliError> {
    let Analysis::Static(settings) = &setup.analysis else {
        unreachable!("static settings checked by the caller");
    };
    let model = &reference.model;
    let loads = load_spec(setup, reference)?;
    let mut problem = StaticProblem::new(loads, setup.clamped_nodes.clone(), settings.increments);
    problem.tol = settings.tol;
    problem.max_iter = settings.max_iter;

    let snapshots = snapshot_steps(&settings.snapshots, settings.increments);
    let tip0 = model.node_position(reference.q0.as_slice(), model.last_node());
    let force = setup.tip_force.norm();
    let mut table = Table::create(&options.out_dir.join("force_displacement.csv"), &output::FORCE_DISPLACEMENT_HEADER)?;
    let mut step_index = 0;
    let mut write_error = None;
    let outcome = solve_static_with(model, &problem, &reference.q0, |step| {
        if write_error.is_some() {
            return;
        }
        let d = model.node_position(step.q.as_slice(), model.last_node()) - tip0;
        let mut row: Vec<String> = [step.load_factor, step.load_factor * force, d.x, d.y, d.z]
            .iter()
            .map(|&x| output::number(x))
            .collect();
        row.push(step.iterations.to_string());
        row.push(output::number(step.residual));
        let written = table.write(row).and_then(|_| {
            if snapshots.contains(&step_index) {
                let path = options.out_dir.join(format!("configuration_{step_index}.csv"));
                summary.files.push(output::write_configuration(&path, model, &step.q)?);
            }
            Ok(())
        });
        if let Err(e) = written {
            write_error = Some(e);
        }
        step_index += 1;
    });
    summary.notes.push(format!("{} load steps written", table.rows()));
    summary.files.push(table.finish()?);
    if let Some(e) = write_error {
        return Err(e);
    }
    outcome.map_err(CliError::from)?;
    Ok(())
}

fn run_dynamic(
    setup: &Setup,
    reference: &Reference,
    options: &RunOptions,
    summary: &mut RunSummary,
) -> Result<(), CliError> {
    let Analysis::Dynamic(settings) = &setup.analysis else {
        unreachable!("dynamic settings checked by the caller");
    };
    let model = &reference.model;
    let loads = load_spec(setup, reference)?;
    let mut problem = DynamicProblem::new(
        loads,
        setup.clamped_nodes.clone(),
        settings.t_end,
        settings.dt,
        settings.rho_inf,
    );
    problem.tol = settings.tol;
    problem.max_iter = settings.max_iter;
    let u0 = DVector::zeros(model.layout().n_u());

    let decimate = options.decimate.max(1);
    let mut table = Table::create(&options.out_dir.join("trajectory.csv"), &output::TRAJECTORY_HEADER)?;
    let mut tracker = ObservableTracker::new(model);
    let mut singular = 0;
    let mut failure = None;
    let outcome = integrate_with(model, &problem, &reference.q0, &u0, |s| {
        if failure.is_some() {
            return;
        }
        let written = tracker.observe(s.t, s.q, s.u).map_err(CliError::from).and_then(|o| {
            singular += usize::from(o.euler_singular);
            if s.step % decimate == 0 {
                table.numbers(&[o.t, o.tip_position.z, o.alpha, o.kinetic_energy, o.strain_energy])?;
            }
            Ok(())
        });
        if let Err(e) = written {
            failure = Some(e);
        }
    });
    summary.notes.push(format!("{} time samples written", table.rows()));
    if singular > 0 {
        summary
            .notes
            .push(format!("warning: {singular} samples near the zyx Euler singularity"));
    }
    summary.files.push(table.finish()?);
    if let Some(e) = failure {
        return Err(e);
    }
    outcome.map_err(CliError::from)?;
    Ok(())
}

fn run_fit(reference: &Reference, options: &RunOptions, summary: &mut RunSummary) -> Result<(), CliError> {
    let model = &reference.model;
    let path = options.out_dir.join("configuration.csv");
    summary
        .files
        .push(output::write_configuration(&path, model, &reference.q0)?);
    let error = max_position_error(&reference.samples, model.mesh(), reference.q0.as_slice())?;
    let mut table = Table::create(&options.out_dir.join("fit.csv"), &output::FIT_HEADER)?;
    table.write([
        output::number(reference.fit.initial_residual),
        output::number(reference.fit.residual),
        reference.fit.iterations.to_string(),
        output::number(error),
    ])?;
    summary.files.push(table.finish()?);
    Ok(())
}

/// Output directory: the command-line override, then the scenario's
/// setting (relative to the scenario file), then `<stem>_results` next to
/// the working directory.
pub fn output_directory(scenario_path: &Path, configured: Option<&Path>, cli: Option<&Path>) -> PathBuf {
    if let Some(dir) = cli {
        return dir.to_path_buf();
    }
    if let Some(dir) = configured {
        if dir.is_absolute() {
            return dir.to_path_buf();
        }
        let base = scenario_path.parent().unwrap_or(Path::new("."));
        return base.join(dir);
    }
    let stem = scenario_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    PathBuf::from(format!("{stem}_results"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_indices() {
        assert_eq!(snapshot_steps(&[0.0, 0.25, 0.5, 0.75, 1.0], 500), vec![0, 125, 250, 375, 500]);
        assert_eq!(snapshot_steps(&[0.0, 0.25, 0.5, 0.75, 1.0], 2), vec![0, 1, 2]);
        assert_eq!(snapshot_steps(&[], 7), Vec::<usize>::new());
    }

    #[test]
    fn output_directory_precedence() {
        let scenario = Path::new("/data/runs/spring.scenario");
        assert_eq!(
            output_directory(scenario, Some(Path::new("out")), Some(Path::new("/tmp/x"))),
            PathBuf::from("/tmp/x")
        );
        assert_eq!(
            output_directory(scenario, Some(Path::new("out")), None),
            PathBuf::from("/data/runs/out")
        );
        assert_eq!(output_directory(scenario, None, None), PathBuf::from("spring_results"));
    }
}
