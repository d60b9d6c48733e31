use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate quaternion (norm {norm:e})")]
    DegenerateQuaternion { norm: f64 },

    #[error("rotation angle {angle} is too close to pi for the logarithm")]
    AngleNearPi { angle: f64 },

    #[error("matrix is not a rotation (orthogonality defect {defect:e}, det {det})")]
    NotARotation { defect: f64, det: f64 },

    #[error("reference tangent vanishes at xi = {xi}")]
    ZeroTangent { xi: f64 },

    #[error("Serret-Frenet frame undefined at xi = {xi} (vanishing curvature)")]
    DegenerateFrame { xi: f64 },

    #[error("Newton iteration did not converge in step {step} after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("singular Jacobian in step {step}")]
    SingularJacobian { step: usize },

    #[error("Levenberg-Marquardt fit stopped after {iterations} iterations (K = {residual:e})")]
    FitDivergence { iterations: usize, residual: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
