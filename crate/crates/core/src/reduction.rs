use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::mesh::DofLayout;
use crate::model::RodModel;

/// Index bookkeeping for clamped nodes: their position coordinates,
/// velocity coordinates and constraint rows are removed from the unknowns.
#[derive(Debug, Clone)]
pub(crate) struct Reduction {
    pub free_nodes: Vec<usize>,
    pub free_q: Vec<usize>,
    pub free_u: Vec<usize>,
}

impl Reduction {
    pub fn new(layout: &DofLayout, fixed_nodes: &[usize]) -> Result<Self> {
        let n = layout.n_nodes();
        if let Some(&bad) = fixed_nodes.iter().find(|&&a| a >= n) {
            return Err(Error::InvalidInput(format!(
                "clamped node {bad} out of range (mesh has {n} nodes)"
            )));
        }
        let free_nodes: Vec<usize> = (0..n).filter(|a| !fixed_nodes.contains(a)).collect();
        let free_q = free_nodes.iter().flat_map(|&a| layout.node_q(a)).collect();
        let free_u = free_nodes.iter().flat_map(|&a| layout.node_u(a)).collect();
        Ok(Self {
            free_nodes,
            free_q,
            free_u,
        })
    }

    pub fn gather(indices: &[usize], full: &[f64]) -> DVector<f64> {
        DVector::from_iterator(indices.len(), indices.iter().map(|&i| full[i]))
    }

    pub fn scatter(indices: &[usize], reduced: &[f64], full: &mut [f64]) {
        for (&i, &x) in indices.iter().zip(reduced) {
            full[i] = x;
        }
    }
}

/// Start configurations must have the right size and unit quaternions.
pub(crate) fn check_start(model: &RodModel, q: &DVector<f64>, fixed: &[usize]) -> Result<()> {
    if q.len() != model.layout().n_q() {
        return Err(Error::InvalidInput(format!(
            "start configuration has {} coordinates, expected {}",
            q.len(),
            model.layout().n_q()
        )));
    }
    for a in 0..model.n_nodes() {
        let defect = (model.node_quaternion(q.as_slice(), a).norm_squared() - 1.0).abs();
        if defect > 1e-10 {
            let what = if fixed.contains(&a) { "clamped" } else { "start" };
            return Err(Error::InvalidInput(format!(
                "{what} node {a} violates the unit-quaternion constraint by {defect:e}"
            )));
        }
    }
    Ok(())
}
