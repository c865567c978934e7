use std::io::Write;

use nalgebra::Vector3;

use super::{
    find_contact_points, pad_distance, solve_wrench, GraspError, Gripper, JointKind, Pose, RigidContact, RigidObject,
    DEEP_PENETRATION,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CloseParams {
    pub friction: f64,
    pub mass: f64,
    pub gravity: Vector3<f64>,
    /// Normal force added per newton of actuation, N/N.
    pub gain: f64,
    /// Link whose normal force measures grip tightness.
    pub tightness_link: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspState {
    /// 1-based tightness level.
    pub level: usize,
    pub q: Vec<f64>,
    pub object_pose: Pose,
    pub contacts: Vec<RigidContact>,
    pub actuation: f64,
    /// Normal force on the tightness link, N.
    pub thumb_normal: f64,
    pub total_normal: f64,
    pub feasible: bool,
    pub force_residual: f64,
    pub moment_residual: f64,
}

impl GraspState {
    pub fn normal_forces(&self) -> Vec<f64> {
        self.contacts.iter().map(|c| c.normal_force()).collect()
    }
}

fn is_descendant(g: &Gripper, link: usize, ancestor: usize) -> bool {
    let mut cur = Some(link);
    while let Some(i) = cur {
        if i == ancestor {
            return true;
        }
        cur = g.links[i].parent.as_ref().and_then(|p| g.link_index(p));
    }
    false
}

/// Smallest signed distance from any pad at or below `link` to the object.
fn subtree_distance(g: &Gripper, q: &[f64], link: usize, object: &RigidObject) -> Result<f64, GraspError> {
    let poses = g.forward_kinematics(q)?;
    let mut d = f64::INFINITY;
    for li in g.pad_links() {
        if is_descendant(g, li, link) {
            d = d.min(pad_distance(&poses[li], g.links[li].pad.as_ref().expect("pad link"), object).0);
        }
    }
    Ok(d)
}

/// Joint values with every prismatic joint advanced from its lower limit
/// until its pads first touch the object; other joints at zero (clamped).
pub fn close_to_touch(g: &Gripper, object: &RigidObject) -> Result<Vec<f64>, GraspError> {
    let mut q: Vec<f64> = g
        .links
        .iter()
        .filter_map(|l| l.joint.as_ref())
        .map(|j| if j.kind == JointKind::Prismatic { j.lower } else { 0.0f64.clamp(j.lower, j.upper) })
        .collect();
    for (li, link) in g.links.iter().enumerate() {
        let Some(j) = &link.joint else { continue };
        if j.kind != JointKind::Prismatic {
            continue;
        }
        let qi = g.joint_index(li).expect("joint link");
        let mut at = |v: f64| -> Result<f64, GraspError> {
            q[qi] = v;
            subtree_distance(g, &q, li, object)
        };
        let d_lo = at(j.lower)?;
        if d_lo.is_infinite() {
            continue;
        }
        if d_lo < -DEEP_PENETRATION {
            return Err(GraspError::InvalidConfiguration(format!("`{}` starts inside the object", link.name)));
        }
        if d_lo <= 0.0 {
            q[qi] = j.lower;
            continue;
        }
        if at(j.upper)? > 0.0 {
            return Err(GraspError::InvalidConfiguration(format!(
                "object out of reach of `{}` within its joint limit",
                link.name
            )));
        }
        let (mut lo, mut hi) = (j.lower, j.upper);
        for _ in 0..200 {
            if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if at(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        q[qi] = hi;
    }
    Ok(q)
}

/// Smallest uniform normal force for which the contacts hold the object
/// under gravity, by bisection. Infinite when no squeeze suffices.
pub fn minimal_squeeze(contacts: &[RigidContact], mu: f64, mass: f64, gravity: &Vector3<f64>) -> Result<f64, GraspError> {
    let w = gravity * mass;
    // Bisect on a residual well below the feasibility tolerance, so the
    // returned squeeze holds strictly rather than on the boundary.
    let feasible = |s: f64| -> Result<bool, GraspError> {
        let sol = solve_wrench(contacts, mu, &w, &Vector3::zeros(), Some(&vec![s; contacts.len()]))?;
        Ok(sol.feasible && sol.force_residual.max(sol.moment_residual) <= 1e-9)
    };
    if feasible(0.0)? {
        return Ok(0.0);
    }
    let mut hi = w.norm().max(1e-6);
    let mut found = false;
    for _ in 0..60 {
        if feasible(hi)? {
            found = true;
            break;
        }
        hi *= 2.0;
    }
    if !found {
        return Ok(f64::INFINITY);
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        if hi - lo <= 1e-10 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Closes the gripper on the object once per actuation level. Each contact
/// gets the same normal force, the minimal holding squeeze plus
/// `gain * actuation`, and the equilibrium solve distributes friction.
pub fn close_gripper(
    gripper: &Gripper,
    object: &RigidObject,
    actuation: &[f64],
    params: &CloseParams,
) -> Result<Vec<GraspState>, GraspError> {
    gripper.validate()?;
    object.validate()?;
    if actuation.windows(2).any(|w| w[1] < w[0]) || actuation.iter().any(|a| !(*a >= 0.0)) {
        return Err(GraspError::InvalidArgument("actuation levels must be non-negative and non-decreasing".into()));
    }
    if gripper.link_index(&params.tightness_link).is_none() {
        return Err(GraspError::InvalidArgument(format!("no link named `{}`", params.tightness_link)));
    }
    let q = close_to_touch(gripper, object)?;
    let mut contacts = find_contact_points(gripper, &q, object)?;
    if contacts.is_empty() {
        return Err(GraspError::InvalidConfiguration("no pad touches the object after closing".into()));
    }
    let f_min = minimal_squeeze(&contacts, params.friction, params.mass, &params.gravity)?;
    let base = if f_min.is_finite() { f_min } else { 0.0 };
    let w = params.gravity * params.mass;
    let mut out = Vec::with_capacity(actuation.len());
    for (level, &a) in actuation.iter().enumerate() {
        let f = base + params.gain * a;
        let sol = solve_wrench(&contacts, params.friction, &w, &Vector3::zeros(), Some(&vec![f; contacts.len()]))?;
        for (c, force) in contacts.iter_mut().zip(&sol.forces) {
            c.force = *force;
        }
        let thumb_normal =
            contacts.iter().filter(|c| c.link == params.tightness_link).map(|c| c.normal_force()).sum();
        let total_normal = contacts.iter().map(|c| c.normal_force()).sum();
        out.push(GraspState {
            level: level + 1,
            q: q.clone(),
            object_pose: Pose { translation: object.center().into(), rotation: [0.0; 3] },
            contacts: contacts.clone(),
            actuation: a,
            thumb_normal,
            total_normal,
            feasible: sol.feasible && f_min.is_finite(),
            force_residual: sol.force_residual,
            moment_residual: sol.moment_residual,
        });
    }
    Ok(out)
}

/// Largest pull along unit `direction` the grasp resists with its normal
/// forces held fixed, by bisection on the feasibility of the same
/// linearized-cone solve. Zero for an infeasible grasp.
pub fn rigid_pull_test(
    state: &GraspState,
    direction: &Vector3<f64>,
    mu: f64,
    mass: f64,
    gravity: &Vector3<f64>,
) -> Result<f64, GraspError> {
    if (direction.norm() - 1.0).abs() > 1e-9 {
        return Err(GraspError::InvalidArgument("pull direction must be a unit vector".into()));
    }
    let normals = state.normal_forces();
    let feasible = |f: f64| -> Result<bool, GraspError> {
        let w = gravity * mass + direction * f;
        Ok(solve_wrench(&state.contacts, mu, &w, &Vector3::zeros(), Some(&normals))?.feasible)
    };
    if !feasible(0.0)? {
        return Ok(0.0);
    }
    let mut hi: f64 = normals.iter().map(|f| f * (1.0 + mu * mu).sqrt()).sum::<f64>() + (gravity * mass).norm() + 1e-9;
    if feasible(hi)? {
        return Ok(hi);
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        if hi - lo <= 1e-12 * (1.0 + hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

pub const GRASP_CSV_HEADER: &str =
    "level,actuation_N,thumb_fn_N,total_fn_N,feasible,force_residual_N,moment_residual_Nm,pull_bound_N";

pub fn write_grasp_csv(w: &mut impl Write, states: &[GraspState], pull_bounds: &[f64]) -> Result<(), GraspError> {
    if pull_bounds.len() != states.len() {
        return Err(GraspError::InvalidArgument("one pull bound per state required".into()));
    }
    writeln!(w, "{GRASP_CSV_HEADER}")?;
    for (s, b) in states.iter().zip(pull_bounds) {
        writeln!(
            w,
            "{},{:.9e},{:.9e},{:.9e},{},{:.3e},{:.3e},{:.9e}",
            s.level,
            s.actuation,
            s.thumb_normal,
            s.total_normal,
            u8::from(s.feasible),
            s.force_residual,
            s.moment_residual,
            b
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp::{three_finger_gripper, PadShape, ThreeFingerOptions};

    fn hand() -> Gripper {
        let pad = PadShape::Box { half_extents: [0.01, 0.01, 0.004] };
        three_finger_gripper(
            Pose::default(),
            ThreeFingerOptions { mount_radius: 0.1, max_travel: 0.08, pad, distal_offset: 0.03, distal_clearance: 0.01 },
        )
    }

    fn params(mu: f64, g: f64) -> CloseParams {
        CloseParams {
            friction: mu,
            mass: 1.0,
            gravity: Vector3::new(0.0, 0.0, -g),
            gain: 1.0,
            tightness_link: "thumb_proximal".into(),
        }
    }

    const SPHERE: RigidObject = RigidObject::Sphere { center: [0.0; 3], radius: 0.05 };

    #[test]
    fn thirteen_levels_monotone() {
        let levels: Vec<f64> = (0..13).map(|i| 5.0 * i as f64).collect();
        let states = close_gripper(&hand(), &SPHERE, &levels, &params(0.5, 9.81)).unwrap();
        assert_eq!(states.len(), 13);
        for w in states.windows(2) {
            assert!(w[1].thumb_normal >= w[0].thumb_normal);
        }
        for s in &states {
            assert!(s.feasible);
            assert!(s.force_residual < 1e-6 && s.moment_residual < 1e-6);
            assert_eq!(s.contacts.len(), 3);
            let n = s.normal_forces();
            assert!(n.iter().all(|f| (f - n[0]).abs() < 1e-6), "{} {n:?}", s.level);
        }
        // Loose end: the minimal squeeze that still holds the weight.
        assert!(states[0].thumb_normal > 0.0);
    }

    #[test]
    fn pads_touch_after_closing() {
        let g = hand();
        let q = close_to_touch(&g, &SPHERE).unwrap();
        // Pad face at 4 mm from the proximal frame: travel = 0.1 - 0.05 - 0.004.
        assert!((q[0] - 0.046).abs() < 1e-12);
        assert_eq!(find_contact_points(&g, &q, &SPHERE).unwrap().len(), 3);
    }

    #[test]
    fn unreachable_object() {
        let small = RigidObject::Sphere { center: [0.0; 3], radius: 0.005 };
        let r = close_gripper(&hand(), &small, &[0.0], &params(0.5, 9.81));
        assert!(matches!(r, Err(GraspError::InvalidConfiguration(_))));
    }

    #[test]
    fn decreasing_levels_rejected() {
        assert!(close_gripper(&hand(), &SPHERE, &[2.0, 1.0], &params(0.5, 9.81)).is_err());
    }

    #[test]
    fn pull_bound_is_coulomb_sum() {
        let states = close_gripper(&hand(), &SPHERE, &[40.0 / 3.0], &params(0.25, 0.0)).unwrap();
        assert!((states[0].total_normal - 40.0).abs() < 1e-9);
        let b = rigid_pull_test(&states[0], &Vector3::x(), 0.25, 1.0, &Vector3::zeros()).unwrap();
        assert!((b - 10.0).abs() < 1e-5, "{b}");
        let states = close_gripper(&hand(), &SPHERE, &[80.0 / 3.0], &params(0.25, 0.0)).unwrap();
        let b2 = rigid_pull_test(&states[0], &Vector3::x(), 0.25, 1.0, &Vector3::zeros()).unwrap();
        assert!((b2 - 2.0 * b).abs() < 1e-5);
        let states = close_gripper(&hand(), &SPHERE, &[10.0], &params(0.0, 0.0)).unwrap();
        // Only the 1e-6 equilibrium tolerance remains without friction.
        assert!(rigid_pull_test(&states[0], &Vector3::x(), 0.0, 1.0, &Vector3::zeros()).unwrap() <= 1e-6);
    }

    #[test]
    fn csv_shape() {
        let states = close_gripper(&hand(), &SPHERE, &[0.0, 1.0], &params(0.5, 9.81)).unwrap();
        let mut buf = Vec::new();
        write_grasp_csv(&mut buf, &states, &[0.0, 0.0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("1,"));
        assert!(write_grasp_csv(&mut Vec::new(), &states, &[]).is_err());
    }
}
