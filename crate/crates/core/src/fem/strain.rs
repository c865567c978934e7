use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::{FemError, SimState};
use crate::mesh::{hex, Mesh};

/// Green-Lagrange strain and principal measures at one evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainResult {
    pub deformation_gradient: Matrix3<f64>,
    pub green_lagrange: Matrix3<f64>,
    /// Principal stretches, descending.
    pub stretches: [f64; 3],
    /// Unit principal directions matching `stretches`.
    pub directions: [Vector3<f64>; 3],
    /// Principal strains `stretch - 1`, descending.
    pub principal: [f64; 3],
    pub e_max: f64,
    pub e_min: f64,
}

/// F = I + grad_0 u at natural coordinates `xi` of element `element`.
pub fn deformation_gradient(mesh: &Mesh, state: &SimState, element: usize, xi: [f64; 3]) -> Matrix3<f64> {
    let coords = mesh.element_coords(element);
    let (grads, _) = hex::spatial_gradients(&coords, xi);
    let mut f = Matrix3::identity();
    for (a, &node) in mesh.elements[element].iter().enumerate() {
        f += state.displacement(node) * grads[a].transpose();
    }
    f
}

/// E = (F^T F - I) / 2 and its spectral decomposition.
///
/// The eigenproblem is solved on E rather than C so small strains keep
/// full relative precision; stretches follow from lambda^2 = 1 + 2 E_i.
pub fn principal_strains(f: &Matrix3<f64>) -> Result<StrainResult, FemError> {
    let det = f.determinant();
    if !(det > 0.0) {
        return Err(FemError::ElementInversion { element: None, det });
    }
    let c = f.transpose() * f;
    let mut e = 0.5 * (c - Matrix3::identity());
    e = 0.5 * (e + e.transpose());
    let eig = SymmetricEigen::new(e);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut stretches = [0.0; 3];
    let mut principal = [0.0; 3];
    let mut directions = [Vector3::zeros(); 3];
    for (slot, &k) in order.iter().enumerate() {
        let ek = eig.eigenvalues[k];
        let lam = (1.0 + 2.0 * ek).sqrt();
        stretches[slot] = lam;
        // lambda - 1 written without cancellation
        principal[slot] = 2.0 * ek / (lam + 1.0);
        directions[slot] = eig.eigenvectors.column(k).into_owned().normalize();
    }
    Ok(StrainResult {
        deformation_gradient: *f,
        green_lagrange: e,
        stretches,
        directions,
        principal,
        e_max: principal[0],
        e_min: principal[2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_box_mesh;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    #[test]
    fn uniaxial_stretch() {
        let r = principal_strains(&Matrix3::from_diagonal(&Vector3::new(1.2, 1.0, 1.0))).unwrap();
        assert!((r.green_lagrange - Matrix3::from_diagonal(&Vector3::new(0.22, 0.0, 0.0))).norm() < 1e-15);
        assert!((r.e_max - 0.2).abs() < 1e-15);
        assert_eq!(r.e_min, 0.0);
    }

    #[test]
    fn rotation_has_no_strain() {
        let q = Rotation3::from_euler_angles(0.4, 0.2, -1.3).into_inner();
        let r = principal_strains(&q).unwrap();
        assert!(r.green_lagrange.norm() < 1e-15);
        assert!(r.e_max.abs() < 1e-15 && r.e_min.abs() < 1e-15);
    }

    #[test]
    fn simple_shear_matches_generic_eigensolver() {
        let mut f = Matrix3::identity();
        f[(0, 1)] = 0.1;
        let r = principal_strains(&f).unwrap();
        assert!((r.green_lagrange[(0, 1)] - 0.05).abs() < 1e-15);
        assert!((r.green_lagrange[(1, 1)] - 0.005).abs() < 1e-15);
        // oracle: eigenvalues of C from its characteristic polynomial (2x2 block + 1)
        let c = f.transpose() * f;
        let (tr, det) = (c[(0, 0)] + c[(1, 1)], c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)]);
        let disc = (tr * tr / 4.0 - det).sqrt();
        let lam = [(tr / 2.0 + disc).sqrt(), 1.0, (tr / 2.0 - disc).sqrt()];
        for i in 0..3 {
            assert!((r.stretches[i] - lam[i]).abs() < 1e-12, "{i}");
        }
    }

    #[test]
    fn inverted_rejected() {
        assert!(principal_strains(&Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0))).is_err());
    }

    #[test]
    fn affine_fields_are_reproduced() {
        let mesh = generate_box_mesh([1.0, 0.5, 0.7], [1, 1, 1], 0).unwrap();
        let mut s = SimState::at_rest(8);
        for (i, p) in mesh.nodes.iter().enumerate() {
            s.u[3 * i] = 0.1 * p[0];
        }
        let f = deformation_gradient(&mesh, &s, 0, [0.3, -0.2, 0.9]);
        assert!((f - Matrix3::from_diagonal(&Vector3::new(1.1, 1.0, 1.0))).norm() < 1e-14);
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2).into_inner();
        for (i, p) in mesh.nodes.iter().enumerate() {
            let x = Vector3::from(*p);
            let d = rot * x - x;
            s.u[3 * i..3 * i + 3].copy_from_slice(d.as_slice());
        }
        for xi in hex::gauss_points() {
            assert!((deformation_gradient(&mesh, &s, 0, xi) - rot).norm() < 1e-12);
        }
        assert_eq!(deformation_gradient(&mesh, &SimState::at_rest(8), 0, [0.0; 3]), Matrix3::identity());
    }

    fn gradient() -> impl Strategy<Value = Matrix3<f64>> {
        proptest::collection::vec(-0.3f64..0.3, 9).prop_map(|v| Matrix3::identity() + Matrix3::from_row_slice(&v))
    }

    proptest! {
        #[test]
        fn spectral_invariants(f in gradient()) {
            prop_assume!(f.determinant() > 0.05);
            let r = principal_strains(&f).unwrap();
            prop_assert!((r.green_lagrange - r.green_lagrange.transpose()).norm() < 1e-12);
            prop_assert!(r.e_max >= r.principal[1] && r.principal[1] >= r.e_min);
            let mut recon = Matrix3::zeros();
            for i in 0..3 {
                prop_assert!(r.stretches[i] > 0.0);
                prop_assert!((r.principal[i] - (r.stretches[i] - 1.0)).abs() < 1e-12);
                for j in 0..3 {
                    let d = r.directions[i].dot(&r.directions[j]);
                    let expected = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((d - expected).abs() < 1e-9);
                }
                recon += 0.5 * (r.stretches[i].powi(2) - 1.0) * r.directions[i] * r.directions[i].transpose();
            }
            prop_assert!((recon - r.green_lagrange).norm() < 1e-9);
        }
    }
}
