//! Cross-section data and hyperelastic strain-energy laws.

use std::fmt::Debug;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rotations::{Mat3, Vec3};

/// Elastic and inertial cross-section properties (SI units).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub youngs_modulus: f64,
    pub shear_modulus: f64,
    pub area: f64,
    pub iy: f64,
    pub iz: f64,
    /// Mass per unit reference length.
    pub line_density: f64,
    /// Cross-section inertia per unit reference length, cross-section frame.
    pub inertia: Mat3,
}

impl CrossSection {
    /// Solid circular wire of diameter `d`.
    pub fn circular(d: f64, density: f64, youngs_modulus: f64, shear_modulus: f64) -> Result<Self> {
        if !(d > 0.0) {
            return Err(Error::InvalidInput(format!("wire diameter must be positive, got {d}")));
        }
        let area = PI * d * d / 4.0;
        let i = PI * d.powi(4) / 64.0;
        let section = Self {
            youngs_modulus,
            shear_modulus,
            area,
            iy: i,
            iz: i,
            line_density: density * area,
            inertia: Mat3::from_diagonal(&Vec3::new(2.0 * i, i, i)) * density,
        };
        section.validate()?;
        Ok(section)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("youngs_modulus", self.youngs_modulus),
            ("shear_modulus", self.shear_modulus),
            ("area", self.area),
            ("iy", self.iy),
            ("iz", self.iz),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.line_density >= 0.0) {
            return Err(Error::InvalidInput("line density must be non-negative".into()));
        }
        if (self.inertia - self.inertia.transpose()).abs().max() > 1e-12 * self.inertia.abs().max() {
            return Err(Error::InvalidInput("cross-section inertia must be symmetric".into()));
        }
        Ok(())
    }

    /// `diag(EA, GA, GA)`
    pub fn k_gamma(&self) -> Vec3 {
        let (ea, ga) = (self.youngs_modulus * self.area, self.shear_modulus * self.area);
        Vec3::new(ea, ga, ga)
    }

    /// `diag(G (Iy + Iz), E Iy, E Iz)`
    pub fn k_kappa(&self) -> Vec3 {
        Vec3::new(
            self.shear_modulus * (self.iy + self.iz),
            self.youngs_modulus * self.iy,
            self.youngs_modulus * self.iz,
        )
    }

    pub fn axial_stiffness(&self) -> f64 {
        self.youngs_modulus * self.area
    }
}

/// Strain energy density `W(gamma, kappa)` per unit reference arc length
/// together with its gradients, the contact force `n` and moment `m`.
pub trait ConstitutiveLaw: Debug + Send + Sync {
    fn strain_energy_density(&self, gamma: &Vec3, kappa: &Vec3, gamma0: &Vec3, kappa0: &Vec3) -> f64;

    fn contact_force_and_moment(
        &self,
        gamma: &Vec3,
        kappa: &Vec3,
        gamma0: &Vec3,
        kappa0: &Vec3,
    ) -> (Vec3, Vec3);
}

/// `W = 1/2 (g - g0)^T K_g (g - g0) + 1/2 (k - k0)^T K_k (k - k0)` with
/// diagonal stiffness matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticLaw {
    pub k_gamma: Vec3,
    pub k_kappa: Vec3,
}

impl QuadraticLaw {
    pub fn from_section(section: &CrossSection) -> Self {
        Self {
            k_gamma: section.k_gamma(),
            k_kappa: section.k_kappa(),
        }
    }
}

impl ConstitutiveLaw for QuadraticLaw {
    fn strain_energy_density(&self, gamma: &Vec3, kappa: &Vec3, gamma0: &Vec3, kappa0: &Vec3) -> f64 {
        let dg = gamma - gamma0;
        let dk = kappa - kappa0;
        0.5 * (dg.component_mul(&self.k_gamma).dot(&dg) + dk.component_mul(&self.k_kappa).dot(&dk))
    }

    fn contact_force_and_moment(
        &self,
        gamma: &Vec3,
        kappa: &Vec3,
        gamma0: &Vec3,
        kappa0: &Vec3,
    ) -> (Vec3, Vec3) {
        (
            (gamma - gamma0).component_mul(&self.k_gamma),
            (kappa - kappa0).component_mul(&self.k_kappa),
        )
    }
}

pub fn strain_energy_density(
    gamma: &Vec3,
    kappa: &Vec3,
    gamma0: &Vec3,
    kappa0: &Vec3,
    section: &CrossSection,
) -> f64 {
    QuadraticLaw::from_section(section).strain_energy_density(gamma, kappa, gamma0, kappa0)
}

pub fn contact_force_and_moment(
    gamma: &Vec3,
    kappa: &Vec3,
    gamma0: &Vec3,
    kappa0: &Vec3,
    section: &CrossSection,
) -> (Vec3, Vec3) {
    QuadraticLaw::from_section(section).contact_force_and_moment(gamma, kappa, gamma0, kappa0)
}
