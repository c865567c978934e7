use std::collections::HashMap;

use nalgebra::Vector3;

use super::{hex, Mesh, MeshError};

/// Fraction of the radius covered by the square (or cube) core of the
/// butterfly and spherified-cube constructions.
const CYLINDER_CORE: f64 = 0.5;
const SPHERE_CORE: f64 = 0.45;

fn check_positive(name: &str, v: f64) -> Result<(), MeshError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(MeshError::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_count(name: &str, v: usize) -> Result<(), MeshError> {
    if v >= 1 {
        Ok(())
    } else {
        Err(MeshError::InvalidArgument(format!("{name} must be at least 1")))
    }
}

/// Structured box spanning `[0, extents]`.
pub fn generate_box_mesh(extents: [f64; 3], divisions: [usize; 3], material_id: usize) -> Result<Mesh, MeshError> {
    for (i, e) in extents.iter().enumerate() {
        check_positive(&format!("extents[{i}]"), *e)?;
    }
    for (i, d) in divisions.iter().enumerate() {
        check_count(&format!("divisions[{i}]"), *d)?;
    }
    let [nx, ny, nz] = divisions;
    let id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([
                    extents[0] * i as f64 / nx as f64,
                    extents[1] * j as f64 / ny as f64,
                    extents[2] * k as f64 / nz as f64,
                ]);
            }
        }
    }
    let mut elements = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                elements.push([
                    id(i, j, k),
                    id(i + 1, j, k),
                    id(i + 1, j + 1, k),
                    id(i, j + 1, k),
                    id(i, j, k + 1),
                    id(i + 1, j, k + 1),
                    id(i + 1, j + 1, k + 1),
                    id(i, j + 1, k + 1),
                ]);
            }
        }
    }
    let element_material = vec![material_id; elements.len()];
    Ok(Mesh { nodes, elements, element_material })
}

#[derive(Default)]
struct NodePool<K> {
    index: HashMap<K, usize>,
    nodes: Vec<[f64; 3]>,
}

impl<K: std::hash::Hash + Eq> NodePool<K> {
    fn get(&mut self, key: K, pos: impl FnOnce() -> [f64; 3]) -> usize {
        let nodes = &mut self.nodes;
        *self.index.entry(key).or_insert_with(|| {
            nodes.push(pos());
            nodes.len() - 1
        })
    }
}

/// Flips elements whose centre Jacobian is negative by swapping bottom and top faces.
fn orient(mesh: &mut Mesh) {
    for e in 0..mesh.elements.len() {
        let c = mesh.element_coords(e);
        if hex::jacobian(&c, [0.0; 3]).determinant() < 0.0 {
            let conn = mesh.elements[e];
            mesh.elements[e] = [conn[4], conn[5], conn[6], conn[7], conn[0], conn[1], conn[2], conn[3]];
        }
    }
}

/// Blends a core-boundary point towards the circle/sphere of `radius`.
fn blend(p: Vector3<f64>, s: f64, radius: f64) -> Vector3<f64> {
    p * ((1.0 - s) + s * radius / p.norm())
}

/// Cylinder with its axis along +x from x = 0 to x = `length`, centred on y = z = 0.
///
/// Cross-sections use the butterfly layout: a square core of
/// `radial_resolution`² cells wrapped by `ceil(radial_resolution / 2)` rings.
pub fn generate_cylinder_mesh(
    radius: f64,
    length: f64,
    radial_resolution: usize,
    axial_resolution: usize,
    material_id: usize,
) -> Result<Mesh, MeshError> {
    check_positive("radius", radius)?;
    check_positive("length", length)?;
    check_count("radial_resolution", radial_resolution)?;
    check_count("axial_resolution", axial_resolution)?;
    let n = radial_resolution;
    let rings = n.div_ceil(2);
    let a = CYLINDER_CORE * radius;
    let lattice = |i: usize| -a + 2.0 * a * i as f64 / n as f64;

    // 2D section: key (i, j, ring)
    let mut pool: NodePool<(usize, usize, usize)> = NodePool::default();
    let mut quads: Vec<[usize; 4]> = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let mut q = [0; 4];
            for (c, (di, dj)) in [(0, 0), (1, 0), (1, 1), (0, 1)].into_iter().enumerate() {
                let (ii, jj) = (i + di, j + dj);
                q[c] = pool.get((ii, jj, 0), || [0.0, lattice(ii), lattice(jj)]);
            }
            quads.push(q);
        }
    }
    let ring_path = square_boundary(n);
    for l in 0..rings {
        for k in 0..ring_path.len() {
            let p0 = ring_path[k];
            let p1 = ring_path[(k + 1) % ring_path.len()];
            let mut q = [0; 4];
            for (c, (p, ll)) in [(p0, l), (p1, l), (p1, l + 1), (p0, l + 1)].into_iter().enumerate() {
                let s = ll as f64 / rings as f64;
                q[c] = pool.get((p.0, p.1, ll), || {
                    let v = blend(Vector3::new(0.0, lattice(p.0), lattice(p.1)), s, radius);
                    [0.0, v.y, v.z]
                });
            }
            quads.push(q);
        }
    }
    let section = pool.nodes;
    let per = section.len();
    let mut nodes = Vec::with_capacity(per * (axial_resolution + 1));
    for k in 0..=axial_resolution {
        let x = length * k as f64 / axial_resolution as f64;
        nodes.extend(section.iter().map(|p| [x, p[1], p[2]]));
    }
    let mut elements = Vec::with_capacity(quads.len() * axial_resolution);
    for k in 0..axial_resolution {
        for q in &quads {
            let b = q.map(|v| v + k * per);
            let t = q.map(|v| v + (k + 1) * per);
            elements.push([b[0], b[1], b[2], b[3], t[0], t[1], t[2], t[3]]);
        }
    }
    let element_material = vec![material_id; elements.len()];
    let mut mesh = Mesh { nodes, elements, element_material };
    orient(&mut mesh);
    Ok(mesh)
}

/// Lattice points on the boundary of an n x n square, in cyclic order.
fn square_boundary(n: usize) -> Vec<(usize, usize)> {
    let mut path = Vec::with_capacity(4 * n);
    path.extend((0..n).map(|i| (i, 0)));
    path.extend((0..n).map(|j| (n, j)));
    path.extend((0..n).map(|i| (n - i, n)));
    path.extend((0..n).map(|j| (0, n - j)));
    path
}

/// Spherified-cube sphere centred at the origin: a cube core of
/// `resolution`³ cells and six shell patches of `ceil(resolution / 2)` layers.
pub fn generate_sphere_mesh(radius: f64, resolution: usize, material_id: usize) -> Result<Mesh, MeshError> {
    check_positive("radius", radius)?;
    check_count("resolution", resolution)?;
    let n = resolution;
    let layers = n.div_ceil(2);
    let a = SPHERE_CORE * radius;
    let lattice = |i: usize| -a + 2.0 * a * i as f64 / n as f64;
    let point = |i: usize, j: usize, k: usize| Vector3::new(lattice(i), lattice(j), lattice(k));

    let mut pool: NodePool<(usize, usize, usize, usize)> = NodePool::default();
    let mut elements = Vec::new();
    let corners = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let conn = corners.map(|(di, dj, dk)| {
                    let (ii, jj, kk) = (i + di, j + dj, k + dk);
                    pool.get((ii, jj, kk, 0), || point(ii, jj, kk).into())
                });
                elements.push(conn);
            }
        }
    }
    // Each face: fixed axis, fixed value, two free axes.
    for axis in 0..3 {
        for side in [0, n] {
            let (u_ax, v_ax) = ((axis + 1) % 3, (axis + 2) % 3);
            for v in 0..n {
                for u in 0..n {
                    let quad = [(u, v), (u + 1, v), (u + 1, v + 1), (u, v + 1)].map(|(uu, vv)| {
                        let mut ijk = [0usize; 3];
                        ijk[axis] = side;
                        ijk[u_ax] = uu;
                        ijk[v_ax] = vv;
                        ijk
                    });
                    for l in 0..layers {
                        let mut conn = [0usize; 8];
                        for (c, p) in quad.iter().enumerate() {
                            for (off, ll) in [(0, l), (4, l + 1)] {
                                let s = ll as f64 / layers as f64;
                                conn[c + off] = pool.get((p[0], p[1], p[2], ll), || {
                                    blend(point(p[0], p[1], p[2]), s, radius).into()
                                });
                            }
                        }
                        elements.push(conn);
                    }
                }
            }
        }
    }
    let element_material = vec![material_id; elements.len()];
    let mut mesh = Mesh { nodes: pool.nodes, elements, element_material };
    orient(&mut mesh);
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate_mesh;
    use std::f64::consts::PI;

    #[test]
    fn unit_cube_counts() {
        let m = generate_box_mesh([1.0; 3], [1, 1, 1], 0).unwrap();
        assert_eq!((m.node_count(), m.element_count()), (8, 1));
        assert!((m.total_volume() - 1.0).abs() < 1e-14);
        let m = generate_box_mesh([1.0; 3], [2, 2, 2], 0).unwrap();
        assert_eq!((m.node_count(), m.element_count()), (27, 8));
    }

    #[test]
    fn slab_volume_is_exact() {
        let m = generate_box_mesh([0.3, 0.1, 0.1], [30, 10, 10], 0).unwrap();
        assert_eq!(m.node_count(), 31 * 11 * 11);
        assert!((m.total_volume() - 3e-3).abs() < 1e-12);
    }

    #[test]
    fn box_rejects_bad_input() {
        assert!(generate_box_mesh([0.0, 1.0, 1.0], [1, 1, 1], 0).is_err());
        assert!(generate_box_mesh([1.0, -1.0, 1.0], [1, 1, 1], 0).is_err());
        assert!(generate_box_mesh([1.0; 3], [1, 0, 1], 0).is_err());
    }

    #[test]
    fn cylinder_is_valid() {
        let m = generate_cylinder_mesh(0.05, 0.30, 4, 12, 0).unwrap();
        let r = validate_mesh(&m);
        assert!(r.ok, "{:?}", r.violations);
        assert_eq!(m.element_count(), (16 + 4 * 4 * 2) * 12);
    }

    #[test]
    fn cylinder_volume_close_to_analytic() {
        let exact = PI * 0.05f64.powi(2) * 0.30;
        let v = generate_cylinder_mesh(0.05, 0.30, 8, 12, 0).unwrap().total_volume();
        assert!(((v - exact) / exact).abs() < 0.05, "{v} vs {exact}");
    }

    #[test]
    fn cylinder_volume_converges_monotonically() {
        let exact = PI * 0.05f64.powi(2) * 0.30;
        let errs: Vec<f64> = [2, 4, 8]
            .iter()
            .map(|&n| (exact - generate_cylinder_mesh(0.05, 0.30, n, 4, 0).unwrap().total_volume()).abs())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn cylinder_rejects_degenerate() {
        assert!(generate_cylinder_mesh(0.0, 0.3, 4, 4, 0).is_err());
        assert!(generate_cylinder_mesh(0.05, -0.3, 4, 4, 0).is_err());
        assert!(generate_cylinder_mesh(0.05, 0.3, 0, 4, 0).is_err());
    }

    #[test]
    fn sphere_is_valid() {
        let m = generate_sphere_mesh(0.05, 6, 0).unwrap();
        let r = validate_mesh(&m);
        assert!(r.ok, "{:?}", r.violations);
    }

    #[test]
    fn sphere_volume_close_to_analytic() {
        let exact = 4.0 / 3.0 * PI * 0.05f64.powi(3);
        let v = generate_sphere_mesh(0.05, 8, 0).unwrap().total_volume();
        assert!(((v - exact) / exact).abs() < 0.05, "{v} vs {exact}");
    }

    #[test]
    fn sphere_volume_converges_monotonically() {
        let exact = 4.0 / 3.0 * PI;
        let errs: Vec<f64> = [2, 4, 8]
            .iter()
            .map(|&n| (exact - generate_sphere_mesh(1.0, n, 0).unwrap().total_volume()).abs())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn sphere_rejects_degenerate() {
        assert!(generate_sphere_mesh(0.05, 0, 0).is_err());
        assert!(generate_sphere_mesh(-1.0, 4, 0).is_err());
    }

    #[test]
    fn generated_meshes_have_no_duplicate_nodes() {
        for m in [
            generate_cylinder_mesh(1.0, 2.0, 3, 2, 0).unwrap(),
            generate_sphere_mesh(1.0, 3, 0).unwrap(),
        ] {
            let mut keys: Vec<_> = m.nodes.iter().map(|p| p.map(|c| (c * 1e9).round() as i64)).collect();
            keys.sort_unstable();
            let before = keys.len();
            keys.dedup();
            assert_eq!(before, keys.len());
        }
    }
}
