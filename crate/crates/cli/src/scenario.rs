//! Declarative scenario files (JSON, SI units).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use cosserat::configfit::HelixSpec;
use cosserat::{CrossSection, Mat3, Vec3};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub geometry: Geometry,
    pub section: SectionSpec,
    pub material: Material,
    pub mesh: MeshSpec,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub loads: Loads,
    pub analysis: Analysis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    Helix {
        radius: f64,
        pitch: f64,
        coils: f64,
        #[serde(default)]
        orientation: HelixOrientation,
    },
    Straight {
        length: f64,
        #[serde(default = "unit_x")]
        direction: [f64; 3],
        #[serde(default)]
        start: [f64; 3],
    },
}

fn unit_x() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

/// `rising` winds upwards from the clamp along `+e_z`; `hanging` is the same
/// helix turned by 180 degrees about `e_x`, so it hangs down from the clamp.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HelixOrientation {
    #[default]
    Rising,
    Hanging,
}

/// Either a solid circular wire or explicit section constants.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wire_diameter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iz: Option<f64>,
}

/// Exactly two of the three elastic constants must be given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub youngs_modulus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shear_modulus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poisson_ratio: Option<f64>,
    #[serde(default)]
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub elements: usize,
    pub order: usize,
    /// Number of fitting samples; `4 N` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boundary {
    pub clamped_nodes: Vec<usize>,
}

impl Default for Boundary {
    fn default() -> Self {
        Self { clamped_nodes: vec![0] }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Loads {
    #[serde(default)]
    pub tip_force: [f64; 3],
    #[serde(default)]
    pub tip_moment: [f64; 3],
    #[serde(default)]
    pub tip_load_point: TipLoadPoint,
    #[serde(default)]
    pub distributed_force: [f64; 3],
    #[serde(default)]
    pub distributed_moment: [f64; 3],
}

/// Where the tip force acts: on the last node, or on the coil axis of a
/// helix through a rigid end fitting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TipLoadPoint {
    #[default]
    TipNode,
    CoilAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Analysis {
    Static(StaticSettings),
    Dynamic(DynamicSettings),
    FitOnly {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticSettings {
    pub increments: usize,
    #[serde(default = "default_snapshots")]
    pub snapshots: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_static_iter")]
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicSettings {
    pub dt: f64,
    pub t_end: f64,
    pub rho_inf: f64,
    /// Gravitational acceleration acting along `-e_z` (m/s^2).
    #[serde(default)]
    pub gravity: f64,
    /// Whether gravity also acts on the rod, not only on the tip body.
    #[serde(default)]
    pub rod_gravity: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tip_body: Option<TipBodySpec>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_dynamic_iter")]
    pub max_iter: usize,
}

/// Rigid body attached at the tip node, center of mass on the node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TipBodySpec {
    /// Solid cylinder with its axis along `e_z`.
    Cylinder { radius: f64, height: f64, density: f64 },
    /// Mass and inertia about the center of mass, in the tip frame.
    Explicit { mass: f64, inertia: [[f64; 3]; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub directory: PathBuf,
}

fn default_snapshots() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

fn default_tol() -> f64 {
    1e-8
}

fn default_static_iter() -> usize {
    30
}

fn default_dynamic_iter() -> usize {
    25
}

/// Elastic constants with the missing one completed by `G = E / 2(1 + nu)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moduli {
    pub youngs_modulus: f64,
    pub shear_modulus: f64,
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn finite3(field: &str, v: &[f64; 3]) -> Result<Vec3, CliError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(Vec3::from_column_slice(v))
    } else {
        Err(invalid(field, "entries must be finite"))
    }
}

/// Completes the elastic constants from exactly two of `E`, `G`, `nu`.
pub fn derive_moduli(material: &Material) -> Result<Moduli, CliError> {
    let e = material.youngs_modulus.map(|v| positive("material.youngs_modulus", v)).transpose()?;
    let g = material.shear_modulus.map(|v| positive("material.shear_modulus", v)).transpose()?;
    let nu = material.poisson_ratio;
    if let Some(nu) = nu {
        if !(nu > -1.0 && nu < 0.5) {
            return Err(invalid("material.poisson_ratio", format!("must lie in (-1, 0.5), got {nu}")));
        }
    }
    let (youngs_modulus, shear_modulus) = match (e, g, nu) {
        (Some(e), None, Some(nu)) => (e, e / (2.0 * (1.0 + nu))),
        (None, Some(g), Some(nu)) => (2.0 * g * (1.0 + nu), g),
        (Some(e), Some(g), None) => (e, g),
        (Some(_), Some(_), Some(_)) => {
            return Err(invalid(
                "material",
                "over-specified: give exactly two of youngs_modulus, shear_modulus, poisson_ratio",
            ))
        }
        _ => {
            return Err(invalid(
                "material",
                "give exactly two of youngs_modulus, shear_modulus, poisson_ratio",
            ))
        }
    };
    Ok(Moduli {
        youngs_modulus,
        shear_modulus,
    })
}

/// Cross-section constants and inertia from the section and material data.
pub fn derive_section(section: &SectionSpec, material: &Material) -> Result<CrossSection, CliError> {
    let moduli = derive_moduli(material)?;
    if !(material.density >= 0.0 && material.density.is_finite()) {
        return Err(invalid("material.density", format!("must be non-negative, got {}", material.density)));
    }
    let rho = material.density;
    let explicit = [section.area, section.iy, section.iz];
    let (area, iy, iz) = match (section.wire_diameter, explicit) {
        (Some(d), [None, None, None]) => {
            let d = positive("section.wire_diameter", d)?;
            (PI * d * d / 4.0, PI * d.powi(4) / 64.0, PI * d.powi(4) / 64.0)
        }
        (None, [Some(a), Some(iy), Some(iz)]) => (
            positive("section.area", a)?,
            positive("section.iy", iy)?,
            positive("section.iz", iz)?,
        ),
        _ => {
            return Err(invalid(
                "section",
                "give either wire_diameter or all of area, iy, iz",
            ))
        }
    };
    let section = CrossSection {
        youngs_modulus: moduli.youngs_modulus,
        shear_modulus: moduli.shear_modulus,
        area,
        iy,
        iz,
        line_density: rho * area,
        inertia: Mat3::from_diagonal(&Vec3::new(iy + iz, iy, iz)) * rho,
    };
    section
        .validate()
        .map_err(|e| invalid("section", e.to_string()))?;
    Ok(section)
}

/// Reference curve of a validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    Helix {
        spec: HelixSpec,
        orientation: HelixOrientation,
    },
    Straight {
        start: Vec3,
        direction: Vec3,
        length: f64,
    },
}

/// Tip body with its inertia still in inertial axes for the cylinder form.
#[derive(Debug, Clone, PartialEq)]
pub enum TipBodyData {
    Inertial { mass: f64, inertia: Mat3 },
    TipFrame { mass: f64, inertia: Mat3 },
}

impl TipBodyData {
    pub fn mass(&self) -> f64 {
        match self {
            Self::Inertial { mass, .. } | Self::TipFrame { mass, .. } => *mass,
        }
    }
}

/// Everything needed to build and run the model, in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub curve: Curve,
    pub section: CrossSection,
    pub elements: usize,
    pub order: usize,
    pub fit_samples: usize,
    pub clamped_nodes: Vec<usize>,
    pub tip_force: Vec3,
    pub tip_moment: Vec3,
    pub tip_load_point: TipLoadPoint,
    pub distributed_force: Vec3,
    pub distributed_moment: Vec3,
    pub analysis: Analysis,
    pub tip_body: Option<TipBodyData>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation {
            field: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<Setup, CliError> {
        let curve = match &self.geometry {
            Geometry::Helix {
                radius,
                pitch,
                coils,
                orientation,
            } => {
                positive("geometry.helix.radius", *radius)?;
                positive("geometry.helix.coils", *coils)?;
                if !pitch.is_finite() {
                    return Err(invalid("geometry.helix.pitch", "must be finite"));
                }
                Curve::Helix {
                    spec: HelixSpec {
                        radius: *radius,
                        pitch: *pitch,
                        coils: *coils,
                    },
                    orientation: *orientation,
                }
            }
            Geometry::Straight {
                length,
                direction,
                start,
            } => {
                let direction = finite3("geometry.straight.direction", direction)?;
                if direction.norm() == 0.0 {
                    return Err(invalid("geometry.straight.direction", "must be non-zero"));
                }
                Curve::Straight {
                    start: finite3("geometry.straight.start", start)?,
                    direction,
                    length: positive("geometry.straight.length", *length)?,
                }
            }
        };
        let section = derive_section(&self.section, &self.material)?;

        let MeshSpec {
            elements,
            order,
            fit_samples,
        } = self.mesh;
        if elements == 0 {
            return Err(invalid("mesh.elements", "must be at least 1"));
        }
        if order == 0 {
            return Err(invalid("mesh.order", "must be at least 1"));
        }
        let n_nodes = elements * order + 1;
        let fit_samples = fit_samples.unwrap_or(4 * n_nodes);
        if fit_samples < n_nodes {
            return Err(invalid(
                "mesh.fit_samples",
                format!("needs at least one sample per node ({n_nodes}), got {fit_samples}"),
            ));
        }
        for &a in &self.boundary.clamped_nodes {
            if a >= n_nodes {
                return Err(invalid(
                    "boundary.clamped_nodes",
                    format!("node {a} does not exist (mesh has {n_nodes} nodes)"),
                ));
            }
        }

        let loads = &self.loads;
        if loads.tip_load_point == TipLoadPoint::CoilAxis && !matches!(curve, Curve::Helix { .. }) {
            return Err(invalid("loads.tip_load_point", "coil_axis requires a helix geometry"));
        }

        let mut tip_body = None;
        match &self.analysis {
            Analysis::Static(s) => {
                if s.increments == 0 {
                    return Err(invalid("analysis.static.increments", "must be at least 1"));
                }
                if s.snapshots.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(invalid("analysis.static.snapshots", "load factors must lie in [0, 1]"));
                }
                positive("analysis.static.tol", s.tol)?;
            }
            Analysis::Dynamic(d) => {
                positive("analysis.dynamic.dt", d.dt)?;
                positive("analysis.dynamic.t_end", d.t_end)?;
                positive("analysis.dynamic.tol", d.tol)?;
                if !(0.0..=1.0).contains(&d.rho_inf) {
                    return Err(invalid("analysis.dynamic.rho_inf", format!("must lie in [0, 1], got {}", d.rho_inf)));
                }
                if !(d.gravity >= 0.0 && d.gravity.is_finite()) {
                    return Err(invalid("analysis.dynamic.gravity", "must be non-negative"));
                }
                if !(section.line_density > 0.0) {
                    return Err(invalid("material.density", "dynamic analysis needs a positive density"));
                }
                tip_body = d.tip_body.as_ref().map(tip_body_data).transpose()?;
            }
            Analysis::FitOnly {} => {}
        }

        Ok(Setup {
            curve,
            section,
            elements,
            order,
            fit_samples,
            clamped_nodes: self.boundary.clamped_nodes.clone(),
            tip_force: finite3("loads.tip_force", &loads.tip_force)?,
            tip_moment: finite3("loads.tip_moment", &loads.tip_moment)?,
            tip_load_point: loads.tip_load_point,
            distributed_force: finite3("loads.distributed_force", &loads.distributed_force)?,
            distributed_moment: finite3("loads.distributed_moment", &loads.distributed_moment)?,
            analysis: self.analysis.clone(),
            tip_body,
        })
    }
}

fn tip_body_data(spec: &TipBodySpec) -> Result<TipBodyData, CliError> {
    match spec {
        TipBodySpec::Cylinder {
            radius,
            height,
            density,
        } => {
            let r = positive("analysis.dynamic.tip_body.cylinder.radius", *radius)?;
            let h = positive("analysis.dynamic.tip_body.cylinder.height", *height)?;
            let rho = positive("analysis.dynamic.tip_body.cylinder.density", *density)?;
            let mass = rho * PI * r * r * h;
            let transverse = mass * (3.0 * r * r + h * h) / 12.0;
            Ok(TipBodyData::Inertial {
                mass,
                inertia: Mat3::from_diagonal(&Vec3::new(transverse, transverse, 0.5 * mass * r * r)),
            })
        }
        TipBodySpec::Explicit { mass, inertia } => {
            let mass = positive("analysis.dynamic.tip_body.explicit.mass", *mass)?;
            let inertia = Mat3::from_fn(|i, j| inertia[i][j]);
            let field = "analysis.dynamic.tip_body.explicit.inertia";
            if inertia.iter().any(|x| !x.is_finite()) || (inertia - inertia.transpose()).amax() > 1e-12 * inertia.amax() {
                return Err(invalid(field, "must be finite and symmetric"));
            }
            if inertia.cholesky().is_none() {
                return Err(invalid(field, "must be positive definite"));
            }
            Ok(TipBodyData::TipFrame { mass, inertia })
        }
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn material(e: Option<f64>, g: Option<f64>, nu: Option<f64>) -> Material {
        Material {
            youngs_modulus: e,
            shear_modulus: g,
            poisson_ratio: nu,
            density: 7850.0,
        }
    }

    #[test]
    fn moduli_completion() {
        let m = derive_moduli(&material(Some(1e11), None, Some(0.2))).unwrap();
        assert_relative_eq!(m.shear_modulus, 4.1667e10, max_relative = 1e-4);
        let m = derive_moduli(&material(None, Some(81e9), Some(0.23))).unwrap();
        assert_relative_eq!(m.youngs_modulus, 199.26e9, max_relative = 1e-12);
        let m = derive_moduli(&material(Some(2e11), Some(8e10), None)).unwrap();
        assert_eq!((m.youngs_modulus, m.shear_modulus), (2e11, 8e10));
    }

    #[test]
    fn moduli_must_be_specified_exactly_twice() {
        for m in [
            material(Some(1e11), Some(4e10), Some(0.2)),
            material(Some(1e11), None, None),
            material(None, None, Some(0.3)),
            material(None, None, None),
        ] {
            assert!(matches!(derive_moduli(&m), Err(CliError::Validation { .. })));
        }
        assert!(derive_moduli(&material(Some(1e11), None, Some(0.7))).is_err());
        assert!(derive_moduli(&material(Some(-1e11), None, Some(0.2))).is_err());
    }

    #[test]
    fn wire_section_constants() {
        let section = SectionSpec {
            wire_diameter: Some(1e-3),
            ..Default::default()
        };
        let s = derive_section(&section, &material(Some(1e11), None, Some(0.2))).unwrap();
        assert_relative_eq!(s.area, 7.854e-7, max_relative = 1e-4);
        assert_relative_eq!(s.iy, 4.909e-14, max_relative = 1e-4);
        assert_eq!(s.iy, s.iz);
        assert_relative_eq!(s.line_density, 7850.0 * s.area);
        assert_relative_eq!(s.inertia[(0, 0)], 7850.0 * 2.0 * s.iy);
    }

    #[test]
    fn section_forms_are_exclusive() {
        let m = material(Some(1e11), None, Some(0.2));
        let both = SectionSpec {
            wire_diameter: Some(1e-3),
            area: Some(1e-6),
            iy: Some(1e-13),
            iz: Some(1e-13),
        };
        assert!(derive_section(&both, &m).is_err());
        let partial = SectionSpec {
            area: Some(1e-6),
            iy: Some(1e-13),
            ..Default::default()
        };
        assert!(derive_section(&partial, &m).is_err());
        let explicit = SectionSpec {
            area: Some(1e-6),
            iy: Some(1e-13),
            iz: Some(2e-13),
            ..Default::default()
        };
        let s = derive_section(&explicit, &m).unwrap();
        assert_eq!((s.area, s.iy, s.iz), (1e-6, 1e-13, 2e-13));
    }

    #[test]
    fn cylinder_body() {
        let body = tip_body_data(&TipBodySpec::Cylinder {
            radius: 0.023,
            height: 0.036,
            density: 7850.0,
        })
        .unwrap();
        let TipBodyData::Inertial { mass, inertia } = body else {
            panic!("cylinder inertia is given in inertial axes");
        };
        assert_relative_eq!(mass, 7850.0 * PI * 0.023 * 0.023 * 0.036, max_relative = 1e-14);
        assert_relative_eq!(inertia[(2, 2)], 0.5 * mass * 0.023 * 0.023);
        assert_eq!(inertia[(0, 0)], inertia[(1, 1)]);
    }

    #[test]
    fn unknown_fields_are_reported_with_position() {
        let err = Scenario::from_json("{\n  \"geometry\": {},\n  \"colour\": 1\n}").unwrap_err();
        let CliError::Validation { field, .. } = err else {
            panic!("expected a validation error");
        };
        assert!(field.starts_with("line "));
    }
}
