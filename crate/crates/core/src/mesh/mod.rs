//! Hexahedral meshes of deformable phantoms and triangulated rigid surfaces.

mod generate;
pub mod hex;
mod surface;
mod validate;
mod vtk;

use std::collections::HashMap;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate_box_mesh, generate_cylinder_mesh, generate_sphere_mesh};
pub use surface::{closest_point_on_triangle, RigidSurface};
pub use validate::{validate_mesh, ValidationReport, Violation};
pub use vtk::{read_vtk_points, vtk_string, write_vtk, FieldData, FieldMap};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("mesh json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Hexahedral mesh. Connectivity follows VTK_HEXAHEDRON node ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mesh {
    pub nodes: Vec<[f64; 3]>,
    pub elements: Vec<[usize; 8]>,
    pub element_material: Vec<usize>,
}

/// A boundary facet: element index and local face index into [`hex::FACES`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Facet {
    pub element: usize,
    pub face: usize,
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn node(&self, i: usize) -> Vector3<f64> {
        Vector3::from(self.nodes[i])
    }

    pub fn element_coords(&self, e: usize) -> [Vector3<f64>; 8] {
        self.elements[e].map(|n| self.node(n))
    }

    /// Element coordinates displaced by a flat `3 * node_count` field.
    pub fn element_coords_displaced(&self, e: usize, u: &[f64]) -> [Vector3<f64>; 8] {
        self.elements[e].map(|n| {
            Vector3::new(
                self.nodes[n][0] + u[3 * n],
                self.nodes[n][1] + u[3 * n + 1],
                self.nodes[n][2] + u[3 * n + 2],
            )
        })
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        hex::element_volume(&self.element_coords(e))
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.element_count()).map(|e| self.element_volume(e)).sum()
    }

    pub fn element_centroid(&self, e: usize) -> Vector3<f64> {
        self.element_coords(e).iter().sum::<Vector3<f64>>() / 8.0
    }

    /// Facets that belong to exactly one element, sorted.
    pub fn boundary_facets(&self) -> Vec<Facet> {
        let mut seen: HashMap<[usize; 4], (usize, Facet)> = HashMap::new();
        for (e, conn) in self.elements.iter().enumerate() {
            for (f, local) in hex::FACES.iter().enumerate() {
                let mut key = local.map(|l| conn[l]);
                key.sort_unstable();
                seen.entry(key).or_insert((0, Facet { element: e, face: f })).0 += 1;
            }
        }
        let mut out: Vec<Facet> = seen.into_values().filter(|(c, _)| *c == 1).map(|(_, f)| f).collect();
        out.sort_unstable();
        out
    }

    pub fn facet_nodes(&self, facet: Facet) -> [usize; 4] {
        hex::FACES[facet.face].map(|l| self.elements[facet.element][l])
    }

    /// Sorted node ids lying on the boundary.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> =
            self.boundary_facets().into_iter().flat_map(|f| self.facet_nodes(f)).collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    pub fn to_json(&self) -> Result<String, MeshError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, MeshError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
