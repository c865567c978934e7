use std::collections::HashSet;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::material::{first_piola, strain_energy_density};
use super::{FemError, Material, Parallelism};
use crate::mesh::{hex, Facet, Mesh};

type ElementForce = [[f64; 3]; 8];

/// Uniform traction (Pa, reference area) on a set of boundary facets.
#[derive(Debug, Clone, PartialEq)]
pub struct Traction {
    pub facets: Vec<Facet>,
    pub traction: Vector3<f64>,
}

/// Mesh plus everything the element loops need that does not change with
/// the deformation: reference gradients, quadrature weights, lumped mass.
#[derive(Debug, Clone)]
pub struct Discretization {
    mesh: Mesh,
    materials: Vec<Material>,
    /// Reference shape-function gradients, `[element][gauss point][node]`.
    gradients: Vec<[[Vector3<f64>; 8]; 8]>,
    /// Gauss weight times reference Jacobian determinant.
    weights: Vec<[f64; 8]>,
    mass: Vec<f64>,
    damping: Vec<f64>,
    parallelism: Parallelism,
}

fn resolve_materials(mesh: &Mesh, materials: &[Material]) -> Result<(), FemError> {
    if mesh.element_material.len() != mesh.elements.len() {
        return Err(FemError::Configuration("element_material length differs from element count".into()));
    }
    for (e, &id) in mesh.element_material.iter().enumerate() {
        let m = materials
            .get(id)
            .ok_or_else(|| FemError::Configuration(format!("element {e} uses undefined material id {id}")))?;
        m.validate()?;
    }
    Ok(())
}

impl Discretization {
    pub fn new(mesh: Mesh, materials: &[Material]) -> Result<Self, FemError> {
        resolve_materials(&mesh, materials)?;
        let gauss = hex::gauss_points();
        let ne = mesh.element_count();
        let mut gradients = Vec::with_capacity(ne);
        let mut weights = Vec::with_capacity(ne);
        let mut mass = vec![0.0; mesh.node_count()];
        let mut damping = vec![0.0; mesh.node_count()];
        for e in 0..ne {
            let coords = mesh.element_coords(e);
            let mat = &materials[mesh.element_material[e]];
            let mut g = [[Vector3::zeros(); 8]; 8];
            let mut w = [0.0; 8];
            for (q, &xi) in gauss.iter().enumerate() {
                let (grad, det) = hex::spatial_gradients(&coords, xi);
                if !(det > 0.0) {
                    return Err(FemError::ElementInversion { element: Some(e), det });
                }
                g[q] = grad;
                w[q] = det;
                // Row-sum lumping: the row of the consistent mass sums to integral(rho N_a).
                let n = hex::shape(xi);
                for (a, &node) in mesh.elements[e].iter().enumerate() {
                    let m = mat.density * n[a] * det;
                    mass[node] += m;
                    damping[node] += m * mat.rayleigh_mass_damping;
                }
            }
            gradients.push(g);
            weights.push(w);
        }
        for (c, m) in damping.iter_mut().zip(&mass) {
            *c = if *m > 0.0 { *c / m } else { 0.0 };
        }
        Ok(Self { mesh, materials: materials.to_vec(), gradients, weights, mass, damping, parallelism: Parallelism::Sequential })
    }

    pub fn with_parallelism(mut self, p: Parallelism) -> Self {
        self.parallelism = p;
        self
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn element_material(&self, e: usize) -> &Material {
        &self.materials[self.mesh.element_material[e]]
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Nodal mass-proportional damping coefficient (mass-weighted over adjacent elements).
    pub fn damping(&self) -> &[f64] {
        &self.damping
    }

    pub fn dof_count(&self) -> usize {
        3 * self.mesh.node_count()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Deformation gradient at Gauss point `q` of element `e`.
    pub fn gauss_deformation_gradient(&self, e: usize, q: usize, u: &[f64]) -> Matrix3<f64> {
        let mut f = Matrix3::identity();
        for (a, &node) in self.mesh.elements[e].iter().enumerate() {
            let ua = Vector3::new(u[3 * node], u[3 * node + 1], u[3 * node + 2]);
            f += ua * self.gradients[e][q][a].transpose();
        }
        f
    }

    fn element_force(&self, e: usize, u: &[f64], with_energy: bool) -> Result<(ElementForce, f64), FemError> {
        let mat = self.element_material(e);
        let mut fe = [[0.0; 3]; 8];
        let mut energy = 0.0;
        for q in 0..8 {
            let f = self.gauss_deformation_gradient(e, q, u);
            let p = first_piola(&f, mat).map_err(|err| err.at_element(e))?;
            let w = self.weights[e][q];
            for (a, g) in self.gradients[e][q].iter().enumerate() {
                let fa = p * g * w;
                fe[a][0] += fa.x;
                fe[a][1] += fa.y;
                fe[a][2] += fa.z;
            }
            if with_energy {
                energy += w * strain_energy_density(&f, mat).map_err(|err| err.at_element(e))?;
            }
        }
        Ok((fe, energy))
    }

    /// Assembles f_int into `out` (overwritten) and returns the total strain
    /// energy when `with_energy` is set (0 otherwise).
    pub fn internal_forces_into(&self, u: &[f64], out: &mut [f64], with_energy: bool) -> Result<f64, FemError> {
        out.iter_mut().for_each(|x| *x = 0.0);
        let mut energy = 0.0;
        let mut scatter = |e: usize, fe: &ElementForce, w: f64| {
            for (a, &node) in self.mesh.elements[e].iter().enumerate() {
                for k in 0..3 {
                    out[3 * node + k] += fe[a][k];
                }
            }
            energy += w;
        };
        match self.parallelism {
            Parallelism::Sequential => {
                for e in 0..self.mesh.element_count() {
                    let (fe, w) = self.element_force(e, u, with_energy)?;
                    scatter(e, &fe, w);
                }
            }
            Parallelism::Parallel => {
                let per_element: Vec<(ElementForce, f64)> = (0..self.mesh.element_count())
                    .into_par_iter()
                    .map(|e| self.element_force(e, u, with_energy))
                    .collect::<Result<_, _>>()?;
                for (e, (fe, w)) in per_element.iter().enumerate() {
                    scatter(e, fe, *w);
                }
            }
        }
        Ok(energy)
    }

    pub fn strain_energy(&self, u: &[f64]) -> Result<f64, FemError> {
        let mut total = 0.0;
        for e in 0..self.mesh.element_count() {
            let mat = self.element_material(e);
            for q in 0..8 {
                let f = self.gauss_deformation_gradient(e, q, u);
                total += self.weights[e][q] * strain_energy_density(&f, mat).map_err(|err| err.at_element(e))?;
            }
        }
        Ok(total)
    }

    /// Body force from lumped mass plus consistently integrated tractions.
    pub fn external_forces(&self, body_accel: Vector3<f64>, tractions: &[Traction]) -> Result<Vec<f64>, FemError> {
        let mut f = vec![0.0; self.dof_count()];
        for (i, m) in self.mass.iter().enumerate() {
            for k in 0..3 {
                f[3 * i + k] = m * body_accel[k];
            }
        }
        if tractions.is_empty() {
            return Ok(f);
        }
        let boundary: HashSet<Facet> = self.mesh.boundary_facets().into_iter().collect();
        for t in tractions {
            for facet in &t.facets {
                if facet.element >= self.mesh.element_count() || facet.face >= 6 || !boundary.contains(facet) {
                    return Err(FemError::InvalidArgument(format!("facet {facet:?} is not on the boundary")));
                }
                let nodes = self.mesh.facet_nodes(*facet);
                let corners = nodes.map(|n| self.mesh.node(n));
                for [s, r] in hex::face_gauss_points() {
                    let da = hex::face_area_density(&corners, s, r);
                    let n = hex::face_shape(s, r);
                    for (a, &node) in nodes.iter().enumerate() {
                        for k in 0..3 {
                            f[3 * node + k] += n[a] * da * t.traction[k];
                        }
                    }
                }
            }
        }
        Ok(f)
    }

    /// Smallest element transit time V / A_max / c over the mesh, times `safety`,
    /// with c from [`Material::cfl_wave_speed`].
    pub fn stable_timestep(&self, safety: f64) -> Result<f64, FemError> {
        if !(safety > 0.0 && safety <= 1.0) {
            return Err(FemError::InvalidArgument(format!("timestep safety must be in (0, 1], got {safety}")));
        }
        let mut dt = f64::INFINITY;
        for e in 0..self.mesh.element_count() {
            let volume: f64 = self.weights[e].iter().sum();
            let coords = self.mesh.element_coords(e);
            let max_face = hex::FACES
                .iter()
                .map(|f| hex::face_area(&f.map(|l| coords[l])))
                .fold(0.0, f64::max);
            dt = dt.min(volume / max_face / self.element_material(e).cfl_wave_speed());
        }
        Ok(safety * dt)
    }
}

pub fn lumped_mass(mesh: &Mesh, materials: &[Material]) -> Result<Vec<f64>, FemError> {
    Ok(Discretization::new(mesh.clone(), materials)?.mass)
}

pub fn internal_forces(mesh: &Mesh, u: &[f64], materials: &[Material]) -> Result<Vec<f64>, FemError> {
    let d = Discretization::new(mesh.clone(), materials)?;
    let mut f = vec![0.0; d.dof_count()];
    d.internal_forces_into(u, &mut f, false)?;
    Ok(f)
}

pub fn external_forces(
    mesh: &Mesh,
    materials: &[Material],
    body_accel: Vector3<f64>,
    tractions: &[Traction],
) -> Result<Vec<f64>, FemError> {
    Discretization::new(mesh.clone(), materials)?.external_forces(body_accel, tractions)
}

pub fn stable_timestep(mesh: &Mesh, materials: &[Material], safety: f64) -> Result<f64, FemError> {
    Discretization::new(mesh.clone(), materials)?.stable_timestep(safety)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_box_mesh, generate_sphere_mesh};
    use proptest::prelude::*;

    fn steel_like(rho: f64) -> Vec<Material> {
        vec![Material::neo_hookean(rho, 1e6, 0.3)]
    }

    #[test]
    fn unit_cube_mass_is_uniform() {
        let m = lumped_mass(&generate_box_mesh([1.0; 3], [1, 1, 1], 0).unwrap(), &steel_like(1000.0)).unwrap();
        for mi in m {
            assert!((mi - 125.0).abs() < 1e-10);
        }
    }

    #[test]
    fn stacked_cubes_share_face_mass() {
        let mesh = generate_box_mesh([1.0, 1.0, 2.0], [1, 1, 2], 0).unwrap();
        let m = lumped_mass(&mesh, &steel_like(1000.0)).unwrap();
        let mut shared: Vec<f64> = m.iter().copied().filter(|&x| (x - 250.0).abs() < 1e-9).collect();
        assert_eq!(shared.len(), 4);
        shared.clear();
        assert!((m.iter().sum::<f64>() - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn missing_material_is_configuration_error() {
        let mesh = generate_box_mesh([1.0; 3], [1, 1, 1], 2).unwrap();
        assert!(matches!(lumped_mass(&mesh, &steel_like(1000.0)), Err(FemError::Configuration(_))));
    }

    #[test]
    fn sphere_mass_conserved() {
        let mesh = generate_sphere_mesh(0.05, 4, 0).unwrap();
        let m: f64 = lumped_mass(&mesh, &steel_like(900.0)).unwrap().iter().sum();
        let exact = 900.0 * mesh.total_volume();
        assert!(((m - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn gravity_sums_to_weight() {
        let mesh = generate_box_mesh([1.0; 3], [1, 1, 1], 0).unwrap();
        let f = external_forces(&mesh, &steel_like(1000.0), Vector3::new(0.0, 0.0, -9.81), &[]).unwrap();
        let fz: f64 = f.iter().skip(2).step_by(3).sum();
        assert!((fz + 9810.0).abs() < 1e-9);
        let f0 = external_forces(&mesh, &steel_like(1000.0), Vector3::zeros(), &[]).unwrap();
        assert!(f0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn uniform_traction_integrates_to_area_times_pressure() {
        let mesh = generate_box_mesh([1.0; 3], [2, 2, 1], 0).unwrap();
        let top: Vec<Facet> = mesh.boundary_facets().into_iter().filter(|f| f.face == 1).collect();
        assert_eq!(top.len(), 4);
        let t = Traction { facets: top, traction: Vector3::new(0.0, 0.0, -500.0) };
        let f = external_forces(&mesh, &steel_like(1000.0), Vector3::zeros(), &[t]).unwrap();
        let fz: f64 = f.iter().skip(2).step_by(3).sum();
        assert!((fz + 500.0).abs() < 1e-10);
    }

    #[test]
    fn interior_facet_rejected() {
        let mesh = generate_box_mesh([1.0, 1.0, 2.0], [1, 1, 2], 0).unwrap();
        let t = Traction { facets: vec![Facet { element: 0, face: 1 }], traction: Vector3::x() };
        assert!(matches!(
            external_forces(&mesh, &steel_like(1.0), Vector3::zeros(), &[t]),
            Err(FemError::InvalidArgument(_))
        ));
    }

    #[test]
    fn zero_displacement_zero_force() {
        let mesh = generate_sphere_mesh(1.0, 2, 0).unwrap();
        let u = vec![0.0; 3 * mesh.node_count()];
        assert!(internal_forces(&mesh, &u, &steel_like(1.0)).unwrap().iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn cfl_closed_form() {
        let mesh = generate_box_mesh([0.1; 3], [1, 1, 1], 0).unwrap();
        let mats = vec![Material::linear_elastic(1000.0, 1e6, 0.0)];
        let dt = stable_timestep(&mesh, &mats, 0.9).unwrap();
        // c = sqrt(1e6 / 1000), dt = 0.9 * 0.1 / c
        assert!((dt - 0.9 * 0.1 / 1000f64.sqrt()).abs() < 1e-15);
        assert!((dt - 2.8460e-3).abs() < 5e-8);
        let half = generate_box_mesh([0.05; 3], [1, 1, 1], 0).unwrap();
        assert!((stable_timestep(&half, &mats, 0.9).unwrap() - dt / 2.0).abs() < 1e-15);
        let poisson = vec![Material::linear_elastic(1000.0, 1e6, 0.3)];
        let ratio = stable_timestep(&mesh, &poisson, 0.9).unwrap() / dt;
        // c^2 = 3K / rho = E / ((1 - 2 nu) rho)
        assert!((ratio - (1.0f64 - 0.6).sqrt()).abs() < 1e-12);
        assert!(stable_timestep(&mesh, &mats, 1.5).is_err());
        assert!(stable_timestep(&mesh, &mats, 0.0).is_err());
    }

    #[test]
    fn cube_step_at_bound_is_marginally_stable() {
        // The breathing mode of a cube has omega = 2 c / h exactly, so dt = h / c
        // is the stability limit: a tiny margin below stays bounded.
        let mesh = generate_box_mesh([0.1; 3], [1, 1, 1], 0).unwrap();
        let mats = vec![Material::linear_elastic(1000.0, 1e6, 0.45)];
        let d = Discretization::new(mesh, &mats).unwrap();
        let dt = d.stable_timestep(0.99).unwrap();
        let mut u: Vec<f64> = (0..24).map(|i| 1e-4 * ((i * 7 % 5) as f64 - 2.0)).collect();
        let mut v = vec![0.0; 24];
        let mut f = vec![0.0; 24];
        for _ in 0..5000 {
            d.internal_forces_into(&u, &mut f, false).unwrap();
            for i in 0..24 {
                v[i] -= dt * f[i] / d.mass()[i / 3];
                u[i] += dt * v[i];
            }
        }
        assert!(u.iter().all(|x| x.abs() < 1e-2));
    }

    proptest! {
        #[test]
        fn internal_forces_self_equilibrate(u in proptest::collection::vec(-0.05f64..0.05, 24)) {
            let mesh = generate_box_mesh([1.0; 3], [1, 1, 1], 0).unwrap();
            let f = internal_forces(&mesh, &u, &steel_like(1.0)).unwrap();
            let fmax = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for k in 0..3 {
                let s: f64 = f.iter().skip(k).step_by(3).sum();
                prop_assert!(s.abs() <= 1e-9 * fmax.max(1e-300));
            }
        }
    }
}
