//! Legacy ASCII VTK (v3.0) unstructured-grid output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Mesh, MeshError};

pub const VTK_HEXAHEDRON: u8 = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Scalar(Vec<f64>),
    Vector(Vec<[f64; 3]>),
}

impl FieldData {
    fn len(&self) -> usize {
        match self {
            FieldData::Scalar(v) => v.len(),
            FieldData::Vector(v) => v.len(),
        }
    }
}

/// Named fields, written in key order.
pub type FieldMap = BTreeMap<String, FieldData>;

fn check_lengths(fields: &FieldMap, expected: usize, kind: &str) -> Result<(), MeshError> {
    for (name, data) in fields {
        if data.len() != expected {
            return Err(MeshError::InvalidArgument(format!(
                "{kind} field `{name}` has {} entries, expected {expected}",
                data.len()
            )));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(MeshError::InvalidArgument(format!("invalid {kind} field name `{name}`")));
        }
    }
    Ok(())
}

fn write_fields(out: &mut String, fields: &FieldMap) {
    for (name, data) in fields {
        match data {
            FieldData::Scalar(v) => {
                let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for x in v {
                    let _ = writeln!(out, "{x:.16e}");
                }
            }
            FieldData::Vector(v) => {
                let _ = writeln!(out, "VECTORS {name} double");
                for x in v {
                    let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", x[0], x[1], x[2]);
                }
            }
        }
    }
}

pub fn vtk_string(mesh: &Mesh, nodal: &FieldMap, element: &FieldMap) -> Result<String, MeshError> {
    check_lengths(nodal, mesh.node_count(), "nodal")?;
    check_lengths(element, mesh.element_count(), "element")?;
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\nsoftgrasp hexahedral mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.node_count());
    for p in &mesh.nodes {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]);
    }
    let ne = mesh.element_count();
    let _ = writeln!(out, "CELLS {ne} {}", ne * 9);
    for conn in &mesh.elements {
        out.push('8');
        for n in conn {
            let _ = write!(out, " {n}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(out, "{VTK_HEXAHEDRON}");
    }
    if !nodal.is_empty() {
        let _ = writeln!(out, "POINT_DATA {}", mesh.node_count());
        write_fields(&mut out, nodal);
    }
    if !element.is_empty() {
        let _ = writeln!(out, "CELL_DATA {ne}");
        write_fields(&mut out, element);
    }
    Ok(out)
}

pub fn write_vtk(mesh: &Mesh, nodal: &FieldMap, element: &FieldMap, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let s = vtk_string(mesh, nodal, element)?;
    std::fs::write(path, s)?;
    Ok(())
}

/// Reads back the POINTS block of a legacy ASCII file.
pub fn read_vtk_points(text: &str) -> Result<Vec<[f64; 3]>, MeshError> {
    let bad = |m: &str| MeshError::InvalidArgument(format!("malformed vtk: {m}"));
    let mut lines = text.lines();
    let header = lines.by_ref().find(|l| l.starts_with("POINTS")).ok_or_else(|| bad("no POINTS"))?;
    let count: usize = header
        .split_whitespace()
        .nth(1)
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| bad("POINTS count"))?;
    let mut values = Vec::with_capacity(3 * count);
    for line in lines {
        if values.len() >= 3 * count {
            break;
        }
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|_| bad("coordinate"))?);
        }
    }
    if values.len() < 3 * count {
        return Err(bad("truncated POINTS"));
    }
    Ok(values.chunks_exact(3).take(count).map(|c| [c[0], c[1], c[2]]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_box_mesh, generate_sphere_mesh};
    use proptest::prelude::*;

    #[test]
    fn single_hex_with_cell_scalar() {
        let m = generate_box_mesh([1.0; 3], [1, 1, 1], 0).unwrap();
        let mut cells = FieldMap::new();
        cells.insert("e_max".into(), FieldData::Scalar(vec![0.2]));
        let s = vtk_string(&m, &FieldMap::new(), &cells).unwrap();
        assert!(s.contains("CELL_TYPES 1\n12\n"));
        assert!(s.contains("CELL_DATA 1\nSCALARS e_max double 1"));
        assert!(!s.contains("POINT_DATA"));
    }

    #[test]
    fn geometry_only() {
        let m = generate_box_mesh([1.0; 3], [2, 1, 1], 0).unwrap();
        let s = vtk_string(&m, &FieldMap::new(), &FieldMap::new()).unwrap();
        assert!(s.starts_with("# vtk DataFile Version 3.0"));
        assert!(s.contains("CELLS 2 18"));
        assert!(!s.contains("CELL_DATA"));
    }

    #[test]
    fn wrong_length_rejected() {
        let m = generate_box_mesh([1.0; 3], [1, 1, 1], 0).unwrap();
        let mut nodal = FieldMap::new();
        nodal.insert("u".into(), FieldData::Vector(vec![[0.0; 3]; 7]));
        assert!(matches!(vtk_string(&m, &nodal, &FieldMap::new()), Err(MeshError::InvalidArgument(_))));
    }

    #[test]
    fn writes_to_disk() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_box_mesh([1.0; 3], [1, 1, 1], 0).unwrap();
        let p = dir.path().join("a.vtk");
        write_vtk(&m, &FieldMap::new(), &FieldMap::new(), &p).unwrap();
        assert_eq!(read_vtk_points(&std::fs::read_to_string(p).unwrap()).unwrap(), m.nodes);
    }

    #[test]
    fn sphere_points_round_trip() {
        let m = generate_sphere_mesh(0.05, 3, 0).unwrap();
        let s = vtk_string(&m, &FieldMap::new(), &FieldMap::new()).unwrap();
        assert_eq!(read_vtk_points(&s).unwrap(), m.nodes);
    }

    proptest! {
        #[test]
        fn coordinates_round_trip_bit_exact(coords in proptest::collection::vec(-1e6f64..1e6, 24)) {
            let mut m = generate_box_mesh([1.0; 3], [1, 1, 1], 0).unwrap();
            for (i, p) in m.nodes.iter_mut().enumerate() {
                *p = [coords[3 * i], coords[3 * i + 1], coords[3 * i + 2]];
            }
            let s = vtk_string(&m, &FieldMap::new(), &FieldMap::new()).unwrap();
            let back = read_vtk_points(&s).unwrap();
            for (a, b) in back.iter().zip(&m.nodes) {
                for k in 0..3 {
                    prop_assert_eq!(a[k].to_bits(), b[k].to_bits());
                }
            }
        }
    }
}
