use nalgebra::{Isometry3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::MeshError;

/// Triangulated rigid surface in a body-local frame. Normals follow the
/// counter-clockwise winding of each triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidSurface {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub normals: Vec<Vector3<f64>>,
}

const MIN_AREA: f64 = 1e-18;

impl RigidSurface {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mut normals = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(MeshError::InvalidArgument(format!("triangle {t} references a missing vertex")));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let n = (b - a).cross(&(c - a));
            if !(0.5 * n.norm() > MIN_AREA) {
                return Err(MeshError::InvalidArgument(format!("triangle {t} is degenerate")));
            }
            normals.push(n.normalize());
        }
        Ok(Self { vertices, triangles, normals })
    }

    /// Square patch of half-width `half` in the z = 0 plane with normal +z.
    pub fn plane(half: f64) -> Self {
        let v = vec![
            Point3::new(-half, -half, 0.0),
            Point3::new(half, -half, 0.0),
            Point3::new(half, half, 0.0),
            Point3::new(-half, half, 0.0),
        ];
        Self::new(v, vec![[0, 1, 2], [0, 2, 3]]).expect("plane is well formed")
    }

    /// Closed axis-aligned box centred at the origin with outward normals.
    pub fn cuboid(half: Vector3<f64>) -> Self {
        let mut v = Vec::with_capacity(8);
        for k in [-1.0, 1.0] {
            for j in [-1.0, 1.0] {
                for i in [-1.0, 1.0] {
                    v.push(Point3::new(i * half.x, j * half.y, k * half.z));
                }
            }
        }
        let quads = [
            [0, 2, 3, 1], // -z
            [4, 5, 7, 6], // +z
            [0, 1, 5, 4], // -y
            [2, 6, 7, 3], // +y
            [0, 4, 6, 2], // -x
            [1, 3, 7, 5], // +x
        ];
        let tris = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
        Self::new(v, tris).expect("cuboid is well formed")
    }

    /// Closed faceted rod (prism) of `radius` along the local y axis,
    /// spanning y in [-half_length, half_length].
    pub fn rod(radius: f64, half_length: f64, segments: usize) -> Result<Self, MeshError> {
        if !(radius > 0.0 && half_length > 0.0 && segments >= 3) {
            return Err(MeshError::InvalidArgument("rod needs radius > 0, half_length > 0, segments >= 3".into()));
        }
        let mut v = Vec::with_capacity(2 * segments + 2);
        for side in [-1.0, 1.0] {
            for s in 0..segments {
                let th = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
                v.push(Point3::new(radius * th.cos(), side * half_length, radius * th.sin()));
            }
        }
        let c_lo = v.len();
        v.push(Point3::new(0.0, -half_length, 0.0));
        let c_hi = v.len();
        v.push(Point3::new(0.0, half_length, 0.0));
        let mut tris = Vec::with_capacity(4 * segments);
        for s in 0..segments {
            let s1 = (s + 1) % segments;
            let (a, b, c, d) = (s, s1, segments + s1, segments + s);
            // Angle runs from +x towards +z, so the outward winding goes against it seen from +y.
            tris.push([a, d, c]);
            tris.push([a, c, b]);
            tris.push([c_lo, a, b]);
            tris.push([c_hi, segments + s1, segments + s]);
        }
        Self::new(v, tris)
    }

    pub fn transformed(&self, pose: &Isometry3<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|p| pose * p).collect(),
            triangles: self.triangles.clone(),
            normals: self.normals.iter().map(|n| pose * n).collect(),
        }
    }

    pub fn triangle(&self, t: usize) -> [Point3<f64>; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    /// Axis-aligned bounds (min, max).
    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::from(Vector3::repeat(f64::INFINITY));
        let mut hi = Point3::from(Vector3::repeat(f64::NEG_INFINITY));
        for p in &self.vertices {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}
