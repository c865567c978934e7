use nalgebra::{Matrix3, Vector3};
use softgrasp::fem::{
    deformation_gradient, BoundaryConditions, Discretization, ExplicitSolver, Material, NoContact, PrescribedDof,
    QuasiStaticOptions, SimState,
};
use softgrasp::mesh::{generate_box_mesh, hex, Mesh};

/// Small deterministic generator so the fixtures do not depend on an RNG crate.
fn lcg(seed: &mut u64) -> f64 {
    *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    ((*seed >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
}

fn distorted_hex() -> Mesh {
    let mut m = generate_box_mesh([1.0, 0.8, 1.2], [1, 1, 1], 0).unwrap();
    let mut seed = 7;
    for p in &mut m.nodes {
        for c in p.iter_mut() {
            *c += 0.1 * lcg(&mut seed);
        }
    }
    m
}

#[test]
fn patch_test_reproduces_affine_gradient() {
    let mesh = distorted_hex();
    let a = Matrix3::new(0.05, -0.02, 0.1, 0.0, -0.07, 0.03, 0.2, 0.01, 0.04);
    let b = Vector3::new(0.3, -0.1, 0.2);
    let mut s = SimState::at_rest(8);
    for (i, p) in mesh.nodes.iter().enumerate() {
        let u = a * Vector3::from(*p) + b;
        s.u[3 * i..3 * i + 3].copy_from_slice(u.as_slice());
    }
    for xi in hex::gauss_points() {
        let f = deformation_gradient(&mesh, &s, 0, xi);
        assert!((f - (Matrix3::identity() + a)).abs().max() < 1e-12);
    }
}

#[test]
fn internal_force_is_strain_energy_gradient() {
    let mesh = generate_box_mesh([0.2, 0.1, 0.1], [2, 1, 1], 0).unwrap();
    let disc = Discretization::new(mesh, &[Material::neo_hookean(1000.0, 1e5, 0.35)]).unwrap();
    let mut seed = 11;
    let u: Vec<f64> = (0..disc.dof_count()).map(|_| 0.01 * lcg(&mut seed)).collect();
    let mut f = vec![0.0; u.len()];
    disc.internal_forces_into(&u, &mut f, false).unwrap();
    let h = 1e-6;
    let mut fd = vec![0.0; u.len()];
    for i in 0..u.len() {
        let mut up = u.clone();
        up[i] += h;
        let mut um = u.clone();
        um[i] -= h;
        fd[i] = (disc.strain_energy(&up).unwrap() - disc.strain_energy(&um).unwrap()) / (2.0 * h);
    }
    let err: f64 = f.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = f.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(err / norm < 1e-4, "relative error {}", err / norm);
}

/// Leapfrog conserves E = 1/2 v(n-1/2) M v(n+1/2) + W(u_n) for linear forces;
/// the bar's small compression keeps the Neo-Hookean response close to that.
#[test]
fn undamped_bar_conserves_energy() {
    let mesh = generate_box_mesh([1.0, 0.1, 0.1], [1, 1, 1], 0).unwrap();
    let disc = Discretization::new(mesh.clone(), &[Material::neo_hookean(1000.0, 1e6, 0.3)]).unwrap();
    let mass = disc.mass().to_vec();
    let mut solver = ExplicitSolver::new(disc, BoundaryConditions::default(), 0.9).unwrap();
    let mut s = solver.initial_state();
    for (i, p) in mesh.nodes.iter().enumerate() {
        s.u[3 * i] = -0.01 * (p[0] - 0.5);
    }
    let mut energies = Vec::new();
    for _ in 0..1000 {
        let v_prev = s.v.clone();
        let r = solver.step(&mut s, &mut NoContact).unwrap();
        let kinetic: f64 = (0..s.v.len()).map(|i| 0.5 * mass[i / 3] * v_prev[i] * s.v[i]).sum();
        energies.push(kinetic + r.strain);
    }
    let e0 = energies[0];
    let drift = energies.iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max);
    assert!(drift < 0.01, "energy drift {drift}");
}

#[test]
fn free_body_preserves_momentum() {
    let mesh = generate_box_mesh([0.1, 0.1, 0.1], [2, 2, 2], 0).unwrap();
    let disc = Discretization::new(mesh, &[Material::neo_hookean(1000.0, 1e5, 0.3)]).unwrap();
    let mass = disc.mass().to_vec();
    let mut solver = ExplicitSolver::new(disc, BoundaryConditions::default(), 0.9).unwrap();
    let mut s = solver.initial_state();
    let mut seed = 3;
    for i in 0..s.u.len() {
        s.u[i] = 0.002 * lcg(&mut seed);
        s.v[i] = 0.1 * lcg(&mut seed) + if i % 3 == 0 { 0.2 } else { 0.0 };
    }
    let momentum = |s: &SimState| -> Vector3<f64> {
        (0..mass.len()).map(|n| mass[n] * s.velocity(n)).sum()
    };
    let p0 = momentum(&s);
    for _ in 0..1000 {
        solver.step(&mut s, &mut NoContact).unwrap();
    }
    let drift = (momentum(&s) - p0).norm() / p0.norm();
    assert!(drift < 1e-9, "momentum drift {drift}");
}

#[test]
fn self_weight_settlement_matches_constrained_column() {
    let (l, rho, g) = (0.1, 1000.0, 9.81);
    let mat = Material::neo_hookean(rho, 1e5, 0.3).with_damping(300.0);
    let mesh = generate_box_mesh([l, l, l], [3, 3, 6], 0).unwrap();
    let mut prescribed = Vec::new();
    for (i, p) in mesh.nodes.iter().enumerate() {
        if p[2] == 0.0 {
            (0..3).for_each(|k| prescribed.push(PrescribedDof { dof: 3 * i + k, value: 0.0 }));
            continue;
        }
        // rollers: no lateral motion anywhere gives the uniaxial-strain column
        prescribed.push(PrescribedDof { dof: 3 * i, value: 0.0 });
        prescribed.push(PrescribedDof { dof: 3 * i + 1, value: 0.0 });
    }
    let bcs = BoundaryConditions { prescribed, body_accel: Vector3::new(0.0, 0.0, -g), tractions: vec![] };
    let disc = Discretization::new(mesh.clone(), &[mat.clone()]).unwrap();
    let mut solver = ExplicitSolver::new(disc, bcs, 0.9).unwrap();
    solver.options = QuasiStaticOptions::default();
    let mut s = solver.initial_state();
    solver.relax(&mut s, &mut NoContact, 5.0).unwrap();
    let top: Vec<usize> = (0..mesh.node_count()).filter(|&i| (mesh.nodes[i][2] - l).abs() < 1e-12).collect();
    let settlement = -top.iter().map(|&i| s.u[3 * i + 2]).sum::<f64>() / top.len() as f64;
    let oracle = rho * g * l * l / (2.0 * mat.constrained_modulus());
    assert!(((settlement - oracle) / oracle).abs() < 0.10, "{settlement} vs {oracle}");
}
