//! CSV result tables: header row with unit suffixes, `\n` line endings,
//! numbers in scientific notation with 16 significant digits.

use std::fs::File;
use std::path::{Path, PathBuf};

use cosserat::RodModel;
use nalgebra::DVector;

use crate::CliError;

pub const FORCE_DISPLACEMENT_HEADER: [&str; 7] = [
    "load_factor",
    "force_N",
    "tip_dx_m",
    "tip_dy_m",
    "tip_dz_m",
    "newton_iters",
    "residual",
];

pub const CONFIGURATION_HEADER: [&str; 8] = ["xi", "x_m", "y_m", "z_m", "p0", "p1", "p2", "p3"];

pub const TRAJECTORY_HEADER: [&str; 5] = ["t_s", "tip_z_m", "alpha_rad", "kinetic_J", "strain_J"];

pub const FIT_HEADER: [&str; 4] = ["initial_K", "K", "iterations", "max_position_error_m"];

pub fn number(x: f64) -> String {
    format!("{x:.15e}")
}

pub struct Table {
    path: PathBuf,
    writer: csv::Writer<File>,
    rows: usize,
}

impl Table {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, CliError> {
        let writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let mut table = Self {
            path: path.to_path_buf(),
            writer,
            rows: 0,
        };
        table.write(header.iter().map(|s| s.to_string()))?;
        table.rows = 0;
        Ok(table)
    }

    pub fn write(&mut self, record: impl IntoIterator<Item = String>) -> Result<(), CliError> {
        self.writer
            .write_record(record)
            .map_err(|e| csv_error(&self.path, e))?;
        self.rows += 1;
        Ok(())
    }

    pub fn numbers(&mut self, values: &[f64]) -> Result<(), CliError> {
        self.write(values.iter().map(|&x| number(x)))
    }

    /// Data rows written so far, header excluded.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.writer.flush().map_err(|e| CliError::Io {
            path: self.path.clone(),
            source: e,
        })?;
        Ok(self.path)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

/// One row per node: parameter, position and quaternion.
pub fn write_configuration(path: &Path, model: &RodModel, q: &DVector<f64>) -> Result<PathBuf, CliError> {
    let mut table = Table::create(path, &CONFIGURATION_HEADER)?;
    for a in 0..model.n_nodes() {
        let mut row = vec![model.mesh().node_xi(a)];
        row.extend_from_slice(&q.as_slice()[model.layout().node_q(a)]);
        table.numbers(&row)?;
    }
    table.finish()
}
