//! Trilinear 8-node hexahedron in VTK node ordering.
//!
//! Natural coordinates span [-1, 1]^3. Nodes 0-3 form the bottom face
//! (zeta = -1) counter-clockwise seen from +zeta, nodes 4-7 the top face.

use nalgebra::{Matrix3, Vector3};

pub const NODE_SIGNS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Local node indices of the six faces, ordered so the right-hand normal
/// points out of the element.
pub const FACES: [[usize; 4]; 6] = [
    [0, 3, 2, 1],
    [4, 5, 6, 7],
    [0, 1, 5, 4],
    [1, 2, 6, 5],
    [2, 3, 7, 6],
    [3, 0, 4, 7],
];

const GAUSS: f64 = 0.577_350_269_189_625_8;

/// 2x2x2 Gauss points (all weights are 1).
pub fn gauss_points() -> [[f64; 3]; 8] {
    let mut pts = [[0.0; 3]; 8];
    for (p, s) in pts.iter_mut().zip(NODE_SIGNS.iter()) {
        *p = [s[0] * GAUSS, s[1] * GAUSS, s[2] * GAUSS];
    }
    pts
}

/// 2x2 Gauss points on a quadrilateral face (weights 1).
pub fn face_gauss_points() -> [[f64; 2]; 4] {
    [[-GAUSS, -GAUSS], [GAUSS, -GAUSS], [GAUSS, GAUSS], [-GAUSS, GAUSS]]
}

pub fn shape(xi: [f64; 3]) -> [f64; 8] {
    let mut n = [0.0; 8];
    for (a, s) in NODE_SIGNS.iter().enumerate() {
        n[a] = 0.125 * (1.0 + s[0] * xi[0]) * (1.0 + s[1] * xi[1]) * (1.0 + s[2] * xi[2]);
    }
    n
}

/// Derivatives dN_a/dxi_j.
pub fn shape_derivs(xi: [f64; 3]) -> [[f64; 3]; 8] {
    let mut d = [[0.0; 3]; 8];
    for (a, s) in NODE_SIGNS.iter().enumerate() {
        let f0 = 1.0 + s[0] * xi[0];
        let f1 = 1.0 + s[1] * xi[1];
        let f2 = 1.0 + s[2] * xi[2];
        d[a] = [0.125 * s[0] * f1 * f2, 0.125 * s[1] * f0 * f2, 0.125 * s[2] * f0 * f1];
    }
    d
}

/// Jacobian dx/dxi (columns are derivatives along each natural direction).
pub fn jacobian(coords: &[Vector3<f64>; 8], xi: [f64; 3]) -> Matrix3<f64> {
    let d = shape_derivs(xi);
    let mut j = Matrix3::zeros();
    for a in 0..8 {
        for r in 0..3 {
            for c in 0..3 {
                j[(r, c)] += coords[a][r] * d[a][c];
            }
        }
    }
    j
}

/// Reference-configuration shape-function gradients and the Jacobian
/// determinant at one natural point.
pub fn spatial_gradients(coords: &[Vector3<f64>; 8], xi: [f64; 3]) -> ([Vector3<f64>; 8], f64) {
    let d = shape_derivs(xi);
    let j = jacobian(coords, xi);
    let det = j.determinant();
    let jinv_t = j.try_inverse().unwrap_or_else(Matrix3::zeros).transpose();
    let mut g = [Vector3::zeros(); 8];
    for a in 0..8 {
        g[a] = jinv_t * Vector3::new(d[a][0], d[a][1], d[a][2]);
    }
    (g, det)
}

pub fn element_volume(coords: &[Vector3<f64>; 8]) -> f64 {
    gauss_points().iter().map(|&xi| jacobian(coords, xi).determinant()).sum()
}

/// Area of a bilinear quadrilateral face.
pub fn face_area(corners: &[Vector3<f64>; 4]) -> f64 {
    face_gauss_points()
        .iter()
        .map(|&[s, t]| face_area_density(corners, s, t))
        .sum()
}

pub fn face_shape(s: f64, t: f64) -> [f64; 4] {
    [
        0.25 * (1.0 - s) * (1.0 - t),
        0.25 * (1.0 + s) * (1.0 - t),
        0.25 * (1.0 + s) * (1.0 + t),
        0.25 * (1.0 - s) * (1.0 + t),
    ]
}

/// |dx/ds x dx/dt| on a bilinear face.
pub fn face_area_density(c: &[Vector3<f64>; 4], s: f64, t: f64) -> f64 {
    let ds = 0.25 * ((c[1] - c[0]) * (1.0 - t) + (c[2] - c[3]) * (1.0 + t));
    let dt = 0.25 * ((c[3] - c[0]) * (1.0 - s) + (c[2] - c[1]) * (1.0 + s));
    ds.cross(&dt).norm()
}
