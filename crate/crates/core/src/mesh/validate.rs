use serde::Serialize;

use super::{hex, Mesh};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    IndexOutOfRange { element: usize, index: usize },
    DuplicateNode { element: usize, node: usize },
    NonPositiveJacobian { element: usize, min_jacobian: f64 },
    NonFiniteCoordinate { node: usize },
    MaterialCountMismatch { elements: usize, materials: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    /// Minimum Jacobian determinant over the 2x2x2 Gauss points, per element.
    /// NaN for elements whose connectivity could not be evaluated.
    pub min_jacobian: Vec<f64>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn global_min_jacobian(&self) -> f64 {
        self.min_jacobian.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn validate_mesh(mesh: &Mesh) -> ValidationReport {
    let mut violations = Vec::new();
    for (i, p) in mesh.nodes.iter().enumerate() {
        if p.iter().any(|c| !c.is_finite()) {
            violations.push(Violation::NonFiniteCoordinate { node: i });
        }
    }
    if mesh.element_material.len() != mesh.elements.len() {
        violations.push(Violation::MaterialCountMismatch {
            elements: mesh.elements.len(),
            materials: mesh.element_material.len(),
        });
    }
    let gauss = hex::gauss_points();
    let mut min_jacobian = Vec::with_capacity(mesh.elements.len());
    for (e, conn) in mesh.elements.iter().enumerate() {
        let mut usable = true;
        for &n in conn {
            if n >= mesh.nodes.len() {
                violations.push(Violation::IndexOutOfRange { element: e, index: n });
                usable = false;
            }
        }
        for a in 0..8 {
            if conn[..a].contains(&conn[a]) && !conn[a + 1..].contains(&conn[a]) {
                violations.push(Violation::DuplicateNode { element: e, node: conn[a] });
            }
        }
        if !usable {
            min_jacobian.push(f64::NAN);
            continue;
        }
        let coords = mesh.element_coords(e);
        let jmin = gauss
            .iter()
            .map(|&xi| hex::jacobian(&coords, xi).determinant())
            .fold(f64::INFINITY, f64::min);
        if !(jmin > 0.0) {
            violations.push(Violation::NonPositiveJacobian { element: e, min_jacobian: jmin });
        }
        min_jacobian.push(jmin);
    }
    ValidationReport { ok: violations.is_empty(), min_jacobian, violations }
}
