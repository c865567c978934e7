//! Indentation and pull runs on small phantoms.

use nalgebra::{Rotation3, Vector3};
use softgrasp::contact::ContactParams;
use softgrasp::fem::{Material, Parallelism};
use softgrasp::grasp::{close_to_touch, three_finger_gripper, Gripper, PadShape, Pose, RigidObject, ThreeFingerOptions};
use softgrasp::mesh::{generate_cylinder_mesh, generate_sphere_mesh, Mesh};
use softgrasp::pipeline::{
    closed_by, detect_slip, pull_phase, run_indentation, run_pull, FemSetup, HandTrajectory, PullOptions,
    TrajectorySample,
};

const PAD: PadShape = PadShape::Rod { radius: 0.01, half_length: 0.02 };

fn hand(x: f64) -> Gripper {
    three_finger_gripper(
        Pose { translation: [x, 0.0, 0.0], rotation: [0.0; 3] },
        ThreeFingerOptions { mount_radius: 0.09, max_travel: 0.06, pad: PAD, distal_offset: 0.04, distal_clearance: 0.02 },
    )
}

fn setup(mesh: Mesh, fixed: Vec<usize>, mu: f64) -> FemSetup {
    FemSetup {
        mesh,
        materials: vec![Material::neo_hookean(1000.0, 1e5, 0.4).with_damping(100.0)],
        fixed_nodes: fixed,
        contact: ContactParams::default_for(1e5, 0.005, mu),
        safety: 0.9,
        relax_ratio: 1e-3,
        relax_time: 3.0,
        pad_segments: 16,
        output_interval: None,
        trace_every: 0,
        parallelism: Parallelism::Sequential,
    }
}

/// Small cylinder clamped at x = 0, hand at x = 0.06.
fn cylinder(mu: f64) -> (FemSetup, Gripper, RigidObject) {
    let mesh = generate_cylinder_mesh(0.05, 0.1, 4, 10, 0).unwrap();
    let fixed = (0..mesh.node_count()).filter(|&i| mesh.nodes[i][0] == 0.0).collect();
    let object = RigidObject::Cylinder { center: [0.05, 0.0, 0.0], axis: [1.0, 0.0, 0.0], radius: 0.05, length: 0.1 };
    (setup(mesh, fixed, mu), hand(0.06), object)
}

fn closure(g: &Gripper, from: Vec<f64>, to: Vec<f64>, time: f64) -> HandTrajectory {
    let sample = |t, q| TrajectorySample {
        t,
        p_h: Vector3::from(g.base.translation),
        r_h: Rotation3::from_scaled_axis(Vector3::from(g.base.rotation)),
        q_h: q,
    };
    HandTrajectory { samples: vec![sample(0.0, from), sample(time, to)] }
}

fn close_by(g: &Gripper, object: &RigidObject, from: f64, to: f64) -> HandTrajectory {
    let touch = close_to_touch(g, object).unwrap();
    closure(g, closed_by(g, &touch, from), closed_by(g, &touch, to), 0.05)
}

#[test]
fn fingers_that_never_touch_leave_the_body_at_rest() {
    let (s, g, object) = cylinder(0.25);
    let run = run_indentation(&s, &g, &close_by(&g, &object, -0.006, -0.003)).unwrap();
    assert!(run.state.max_displacement() < 1e-9);
    assert!(run.contacts().iter().all(|c| c.force == Vector3::zeros()));
}

/// Grasp axis along the body diagonal: the cube-based sphere mesh maps onto
/// itself under the 120 degree turn that carries one finger to the next.
fn diagonal_hand() -> Gripper {
    let axis = Vector3::x().cross(&Vector3::repeat(1.0)).normalize() * (1.0 / 3f64.sqrt()).acos();
    let pad = PadShape::Box { half_extents: [0.015, 0.015, 0.005] };
    three_finger_gripper(
        Pose { translation: [0.0; 3], rotation: axis.into() },
        ThreeFingerOptions { mount_radius: 0.09, max_travel: 0.06, pad, distal_offset: 0.04, distal_clearance: 0.02 },
    )
}

#[test]
fn symmetric_sphere_squeeze_balances() {
    let mesh = generate_sphere_mesh(0.05, 6, 0).unwrap();
    // Clamp the centre node only, itself symmetric.
    let centre = (0..mesh.node_count()).filter(|&i| mesh.node(i).norm() < 1e-12).collect();
    let s = setup(mesh, centre, 0.25);
    let g = diagonal_hand();
    let object = RigidObject::Sphere { center: [0.0; 3], radius: 0.05 };
    let run = run_indentation(&s, &g, &close_by(&g, &object, -0.002, 0.004)).unwrap();
    let loads = run.pad_loads().unwrap();
    let max_pad = loads.values().map(|l| l.normal).fold(0.0, f64::max);
    assert!(max_pad > 0.5, "pads should press, got {max_pad} N");
    let net = run.handler.net_force().norm();
    assert!(net < 0.01 * max_pad, "net {net} N vs pad {max_pad} N");
}

/// Tip indentation of a body of stiffness `k_body` pressed by a penalty
/// spring `k_contact` driven `d` into it: the two springs in series.
fn spring_chain_indentation(d: f64, k_contact: f64, k_body: f64) -> f64 {
    if d <= 0.0 {
        0.0
    } else {
        d * k_contact / (k_contact + k_body)
    }
}

#[test]
fn deeper_closure_indents_further() {
    let (s, g, object) = cylinder(0.25);
    let depths = [0.002, 0.004, 0.006];
    let mut fem = Vec::new();
    for &d in &depths {
        let run = run_indentation(&s, &g, &close_by(&g, &object, -0.002, d)).unwrap();
        fem.push(run.max_indentation());
    }
    let oracle: Vec<f64> = depths.iter().map(|&d| spring_chain_indentation(d, s.contact.k_n, 2e3)).collect();
    for k in 1..depths.len() {
        assert!(oracle[k] > oracle[k - 1]);
        assert!(fem[k] > fem[k - 1], "indentation not increasing: {fem:?}");
    }
    // The body never moves further than the hand does.
    assert!(fem.iter().zip(&depths).all(|(u, d)| u <= d));
}

#[test]
fn frictionless_touch_gives_no_lateral_resistance() {
    let (s, g, object) = cylinder(0.0);
    let touch = close_by(&g, &object, -0.002, 0.0);
    let run = run_indentation(&s, &g, &touch).unwrap();
    let pull = pull_phase(&touch, &Vector3::x(), 0.005, 0.1, 0.01).unwrap();
    let pulled = run_pull(&run, &pull, &PullOptions::default()).unwrap();
    let loads = pulled.final_loads();
    let normal: f64 = loads.values().map(|l| l.normal).sum();
    let lateral: f64 = loads.values().map(|l| l.lateral.x).sum();
    assert!(lateral.abs() <= 1e-3 * normal, "lateral {lateral} N, normal {normal} N");
}

#[test]
fn frictionless_shallow_grasp_slips_under_pull() {
    let (s, g, object) = cylinder(0.0);
    let closing = close_by(&g, &object, -0.002, 0.002);
    let run = run_indentation(&s, &g, &closing).unwrap();
    let pull = pull_phase(&closing, &Vector3::x(), 0.006, 0.3, 0.01).unwrap();
    let pulled = run_pull(&run, &pull, &PullOptions::default()).unwrap();
    let slip = detect_slip(&pulled.slip, 1e-3);
    assert!(slip.slipped);
    assert!(slip.onset.unwrap() < 0.006);
    assert!(!detect_slip(&pulled.slip, f64::INFINITY).slipped);
}

#[test]
fn frozen_hand_keeps_its_lateral_force() {
    let (s, g, object) = cylinder(0.25);
    let closing = close_by(&g, &object, -0.002, 0.003);
    let run = run_indentation(&s, &g, &closing).unwrap();
    let before = run.pad_loads().unwrap();
    let hold = pull_phase(&closing, &Vector3::x(), 0.0, 0.1, 0.01).unwrap();
    let pulled = run_pull(&run, &hold, &PullOptions::default()).unwrap();
    let after = pulled.final_loads();
    let normal: f64 = before.values().map(|l| l.normal).sum();
    for (link, l) in &before {
        let drift = (after[link].lateral - l.lateral).norm();
        assert!(drift < 1e-2 * normal, "{link}: lateral moved by {drift} N");
    }
    assert!(!detect_slip(&pulled.slip, 1e-3).slipped);
}

#[test]
fn pull_reports_quasi_static_history() {
    let (s, g, object) = cylinder(0.25);
    let closing = close_by(&g, &object, -0.002, 0.003);
    let run = run_indentation(&s, &g, &closing).unwrap();
    let pull = pull_phase(&closing, &Vector3::x(), 0.004, 0.2, 0.01).unwrap();
    let opts = PullOptions::default();
    let pulled = run_pull(&run, &pull, &opts).unwrap();
    assert!(pulled.max_ratio <= opts.ratio_limit);
    assert!(pulled.duration >= 0.2 - 1e-12);
    let end = pulled.history.last().unwrap();
    assert!((end.base_displacement - 0.004).abs() < 1e-12);
    assert!(pulled.history.windows(2).all(|w| w[1].t > w[0].t));
    // Pulling along +x drags the body along, on average over the travel;
    // single samples swing with nodes passing over the pads.
    let mean: f64 = pulled.history.iter().map(|h| h.loads.values().map(|l| l.lateral.x).sum::<f64>()).sum::<f64>()
        / pulled.history.len() as f64;
    assert!(mean > 0.0, "{mean}");
}

#[test]
fn skin_stays_outside_pads_up_to_penalty_bound() {
    let (s, g, object) = cylinder(0.25);
    let run = run_indentation(&s, &g, &close_by(&g, &object, -0.002, 0.006)).unwrap();
    let x = run.state.positions(&s.mesh);
    let (contacts, _) = run.handler.evaluate(run.state.t, 0.0, &x);
    let max_fn = contacts.iter().map(|c| c.normal_force()).fold(0.0, f64::max);
    assert!(max_fn > 0.0);
    let bound = max_fn / s.contact.k_n;
    for c in &contacts {
        assert!(c.gap >= -bound * (1.0 + 1e-9), "node {} sinks {} m, bound {bound} m", c.node, -c.gap);
    }
}
