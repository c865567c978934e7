use nalgebra::Vector3;

use super::PipelineError;
use crate::fem::{deformation_gradient, principal_strains, FemError, SimState};
use crate::mesh::Mesh;

#[derive(Debug, Clone, PartialEq)]
pub struct StrainReport {
    /// Maximum principal strain at each element centroid.
    pub e_max: Vec<f64>,
    pub global_max: f64,
    pub max_element: usize,
    /// Reference centroid of `max_element`.
    pub location: Vector3<f64>,
    /// Mean over elements within two element lengths of a touching node.
    pub contact_mean: Option<f64>,
    pub far_mean: Option<f64>,
    pub contact_elements: usize,
}

pub fn element_strains(mesh: &Mesh, state: &SimState) -> Result<Vec<f64>, FemError> {
    (0..mesh.element_count())
        .map(|e| {
            let f = deformation_gradient(mesh, state, e, [0.0; 3]);
            principal_strains(&f).map(|s| s.e_max).map_err(|err| err.at_element(e))
        })
        .collect()
}

/// Centroid strain field and its split into the zone around `contact_nodes`
/// and the rest of the body.
pub fn strain_report(mesh: &Mesh, state: &SimState, contact_nodes: &[usize]) -> Result<StrainReport, PipelineError> {
    if state.u.len() != 3 * mesh.node_count() {
        return Err(PipelineError::InvalidArgument("state does not match the mesh".into()));
    }
    if mesh.element_count() == 0 {
        return Err(PipelineError::InvalidArgument("mesh has no elements".into()));
    }
    let e_max = element_strains(mesh, state)?;
    let (max_element, global_max) =
        e_max.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b });
    let h = (mesh.total_volume() / mesh.element_count() as f64).cbrt();
    let reach = 2.0 * h;
    let touch: Vec<Vector3<f64>> = contact_nodes.iter().map(|&n| mesh.node(n)).collect();
    let (mut cs, mut cn, mut fs, mut fn_) = (0.0, 0usize, 0.0, 0usize);
    for (e, &v) in e_max.iter().enumerate() {
        let c = mesh.element_centroid(e);
        if touch.iter().any(|p| (p - c).norm() <= reach) {
            cs += v;
            cn += 1;
        } else {
            fs += v;
            fn_ += 1;
        }
    }
    let mean = |s: f64, n: usize| if n > 0 { Some(s / n as f64) } else { None };
    Ok(StrainReport {
        location: mesh.element_centroid(max_element),
        e_max,
        global_max,
        max_element,
        contact_mean: mean(cs, cn),
        far_mean: mean(fs, fn_),
        contact_elements: cn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_box_mesh;

    #[test]
    fn undeformed_is_strain_free() {
        let mesh = generate_box_mesh([0.1; 3], [2, 2, 2], 0).unwrap();
        let r = strain_report(&mesh, &SimState::at_rest(mesh.node_count()), &[0]).unwrap();
        assert!(r.e_max.iter().all(|&e| e == 0.0));
        assert_eq!(r.contact_mean, Some(0.0));
    }

    #[test]
    fn uniform_stretch_reads_back() {
        let mesh = generate_box_mesh([0.1, 0.2, 0.3], [2, 3, 4], 0).unwrap();
        let mut s = SimState::at_rest(mesh.node_count());
        for (i, p) in mesh.nodes.iter().enumerate() {
            s.u[3 * i] = 0.2 * p[0];
        }
        let r = strain_report(&mesh, &s, &[]).unwrap();
        assert!(r.e_max.iter().all(|&e| (e - 0.2).abs() < 1e-9));
        assert_eq!(r.contact_mean, None);
        assert_eq!(r.contact_elements, 0);
    }

    #[test]
    fn zones_split_by_distance() {
        let mesh = generate_box_mesh([1.0, 0.1, 0.1], [10, 1, 1], 0).unwrap();
        let mut s = SimState::at_rest(mesh.node_count());
        // Stretch only the first element's right face outward.
        for (i, p) in mesh.nodes.iter().enumerate() {
            if p[0] > 0.05 {
                s.u[3 * i] = 0.01;
            }
        }
        let r = strain_report(&mesh, &s, &[0]).unwrap();
        assert_eq!(r.max_element, 0);
        assert!(r.contact_mean.unwrap() > r.far_mean.unwrap());
        assert!(r.contact_elements < 10);
    }

    #[test]
    fn inverted_element_reported() {
        let mesh = generate_box_mesh([0.1; 3], [1, 1, 1], 0).unwrap();
        let mut s = SimState::at_rest(mesh.node_count());
        for (i, p) in mesh.nodes.iter().enumerate() {
            s.u[3 * i] = -2.0 * p[0];
        }
        assert!(matches!(
            strain_report(&mesh, &s, &[]),
            Err(PipelineError::Fem(FemError::ElementInversion { element: Some(0), .. }))
        ));
    }
}
