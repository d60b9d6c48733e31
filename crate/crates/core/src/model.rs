use std::sync::Arc;

use nalgebra::DVector;

use crate::constitutive::{ConstitutiveLaw, CrossSection, QuadraticLaw};
use crate::error::{Error, Result};
use crate::kinematics::{reference_from_configuration, ElementNodes, ElementRule, ReferenceGeometry};
use crate::mesh::{full_rule_points, reduced_rule_points, DofLayout, Mesh};
use crate::rotations::{Mat3, Quaternion, Vec3};

/// Rigid body lumped at the last node: its center of mass coincides with the
/// node and its inertia is given in the tip cross-section frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TipBody {
    pub mass: f64,
    pub inertia: Mat3,
}

/// Discretized rod: mesh, cross-section, constitutive law and the frozen
/// reference geometry.
#[derive(Debug, Clone)]
pub struct RodModel {
    mesh: Mesh,
    layout: DofLayout,
    section: CrossSection,
    law: Arc<dyn ConstitutiveLaw>,
    reduced: ElementRule,
    full: ElementRule,
    reference: ReferenceGeometry,
    q_ref: DVector<f64>,
    tip_body: Option<TipBody>,
}

impl RodModel {
    /// Builds a model whose stress-free reference is `q0`, with the
    /// quadratic strain energy of `section`.
    pub fn new(mesh: Mesh, section: CrossSection, q0: &DVector<f64>) -> Result<Self> {
        let law = Arc::new(QuadraticLaw::from_section(&section));
        Self::with_law(mesh, section, law, q0)
    }

    pub fn with_law(
        mesh: Mesh,
        section: CrossSection,
        law: Arc<dyn ConstitutiveLaw>,
        q0: &DVector<f64>,
    ) -> Result<Self> {
        section.validate()?;
        let layout = DofLayout::new(mesh.n_nodes());
        if q0.len() != layout.n_q() {
            return Err(Error::InvalidInput(format!(
                "reference configuration has {} coordinates, mesh needs {}",
                q0.len(),
                layout.n_q()
            )));
        }
        let reduced = ElementRule::new(&mesh, reduced_rule_points(mesh.order()))?;
        let full = ElementRule::new(&mesh, full_rule_points(mesh.order()))?;
        let reference = reference_from_configuration(&mesh, &reduced, &full, q0.as_slice())?;
        Ok(Self {
            mesh,
            layout,
            section,
            law,
            reduced,
            full,
            reference,
            q_ref: q0.clone(),
            tip_body: None,
        })
    }

    pub fn with_tip_body(mut self, body: TipBody) -> Self {
        self.tip_body = Some(body);
        self
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn layout(&self) -> &DofLayout {
        &self.layout
    }

    pub fn section(&self) -> &CrossSection {
        &self.section
    }

    pub fn law(&self) -> &dyn ConstitutiveLaw {
        self.law.as_ref()
    }

    pub fn reduced_rule(&self) -> &ElementRule {
        &self.reduced
    }

    pub fn full_rule(&self) -> &ElementRule {
        &self.full
    }

    pub fn reference(&self) -> &ReferenceGeometry {
        &self.reference
    }

    pub fn reference_configuration(&self) -> &DVector<f64> {
        &self.q_ref
    }

    pub fn tip_body(&self) -> Option<&TipBody> {
        self.tip_body.as_ref()
    }

    pub fn n_nodes(&self) -> usize {
        self.layout.n_nodes()
    }

    pub fn last_node(&self) -> usize {
        self.layout.n_nodes() - 1
    }

    pub(crate) fn element_nodes(&self, q: &[f64], e: usize) -> Result<ElementNodes> {
        let (qs, _) = crate::mesh::element_slices(&self.mesh, &self.layout, e);
        ElementNodes::from_coords(&q[qs])
    }

    pub fn node_position(&self, q: &[f64], a: usize) -> Vec3 {
        Vec3::from_column_slice(&q[self.layout.node_centerline(a)])
    }

    pub fn node_quaternion(&self, q: &[f64], a: usize) -> Quaternion {
        Quaternion::from_slice(&q[self.layout.node_quaternion(a)])
    }

    pub fn node_rotation(&self, q: &[f64], a: usize) -> Result<Mat3> {
        self.node_quaternion(q, a).rotation()
    }

    /// Divides every nodal quaternion by its norm.
    pub fn normalize_quaternions(&self, q: &mut [f64]) -> Result<()> {
        for a in 0..self.n_nodes() {
            let p = self.node_quaternion(q, a).normalized()?;
            q[self.layout.node_quaternion(a)].copy_from_slice(&p.to_array());
        }
        Ok(())
    }
}
