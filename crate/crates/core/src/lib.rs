//! Geometrically exact Cosserat rod finite elements with nodal non-unit
//! quaternions.
//!
//! Centerline points and nodal rotation matrices are interpolated with
//! Lagrange polynomials, virtual displacements/rotations and velocities
//! with the same basis in a Petrov-Galerkin sense. The crate provides the
//! discrete forces and mass matrix, a load-stepped Newton solver for the
//! constrained statics, a generalized-alpha integrator for the dynamics and
//! a least-squares fit of pre-curved reference configurations.

pub mod assembly;
pub mod configfit;
pub mod constitutive;
pub mod dynamics;
pub mod error;
pub mod kinematics;
pub mod mesh;
pub mod model;
pub mod rotations;
pub mod statics;

mod reduction;

pub use assembly::LoadSpec;
pub use constitutive::{ConstitutiveLaw, CrossSection, QuadraticLaw};
pub use error::{Error, Result};
pub use mesh::{DofLayout, Mesh};
pub use model::{RodModel, TipBody};
pub use rotations::{EuclideanTransform, Mat3, Quaternion, Twist, Vec3};
