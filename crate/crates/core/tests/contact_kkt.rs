use nalgebra::{Isometry3, Vector3};
use softgrasp::contact::{contact_timestep, kkt_residuals, ContactHandler, ContactParams, KktReport, StaticPads};
use softgrasp::fem::{BoundaryConditions, Discretization, ExplicitSolver, Material, QuasiStaticOptions, SimState};
use softgrasp::mesh::{generate_box_mesh, RigidSurface};

struct Settled {
    report: KktReport,
    k_n: f64,
    state: SimState,
}

/// 10 cm block dropped onto a rigid floor from touching distance and relaxed
/// under gravity.
fn settle_block(k_scale: f64, energy_ratio: f64) -> Settled {
    let mesh = generate_box_mesh([0.1; 3], [3, 3, 3], 0).unwrap();
    let mats = vec![Material::neo_hookean(1000.0, 1e5, 0.3).with_damping(80.0)];
    let disc = Discretization::new(mesh, &mats).unwrap();
    let candidates = disc.mesh().boundary_nodes();
    let mut params = ContactParams::default_for(1e5, 0.1 / 3.0, 0.5);
    params.k_n *= k_scale;
    params.k_t *= k_scale;
    let floor = StaticPads(vec![Isometry3::translation(0.05, 0.05, 0.0)]);
    let mut hook = ContactHandler::new(vec![RigidSurface::plane(0.5)], floor, params, candidates).unwrap();
    let bcs = BoundaryConditions::default().with_body_accel(Vector3::new(0.0, 0.0, -9.81));
    let mut solver = ExplicitSolver::new(disc, bcs, 0.9).unwrap();
    let m_min = solver.discretization().mass().iter().copied().fold(f64::INFINITY, f64::min);
    solver.dt = contact_timestep(solver.discretization().stable_timestep(1.0).unwrap(), params.k_n, m_min, 0.9);
    solver.options = QuasiStaticOptions { energy_ratio, window: 200 };
    let mut state = solver.initial_state();
    solver.relax(&mut state, &mut hook, 20.0).unwrap();
    let x = state.positions(solver.discretization().mesh());
    let (contacts, _) = hook.evaluate(state.t, solver.dt, &x);
    let report = kkt_residuals(&contacts, &state.v, params.friction);
    Settled { report, k_n: params.k_n, state }
}

#[test]
fn block_on_floor_satisfies_kkt() {
    let s = settle_block(1.0, 1e-4);
    let r = s.report;
    assert!(r.max_normal_force > 0.0);
    // Penalty law: every penetration is f_n / k_n.
    assert!(r.max_penetration <= r.max_normal_force / s.k_n * (1.0 + 1e-12));
    assert!(r.min_normal_force >= 0.0);
    assert_eq!(r.cone_violations, 0);
    assert!(r.max_complementarity < 1e-6, "{r:?}");
    assert!(s.state.is_finite());
}

#[test]
fn stiffer_penalty_at_most_halves_penetration() {
    let soft = settle_block(1.0, 1e-4).report.max_penetration;
    let stiff = settle_block(2.0, 1e-4).report.max_penetration;
    assert!(stiff < soft);
    assert!(stiff >= 0.5 * soft * (1.0 - 1e-3), "soft {soft:e} stiff {stiff:e}");
}
