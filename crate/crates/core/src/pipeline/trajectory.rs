use nalgebra::{Isometry3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::contact::PadMotion;
use crate::grasp::{GraspState, Gripper};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    /// Gripper base position, m.
    pub p_h: Vector3<f64>,
    /// Gripper base orientation.
    pub r_h: Rotation3<f64>,
    /// Joint values in gripper joint order.
    pub q_h: Vec<f64>,
}

/// Time-ordered hand states handed from the rigid engine to the FEM engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandTrajectory {
    pub samples: Vec<TrajectorySample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PullSpec {
    /// Unit direction of the base translation.
    pub direction: Vector3<f64>,
    pub distance: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryTiming {
    pub closure: f64,
    pub hold: f64,
    /// Sampling interval; phase boundaries are always sampled as well.
    pub interval: f64,
}

fn positive(name: &str, v: f64) -> Result<(), PipelineError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(PipelineError::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

impl HandTrajectory {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.samples.is_empty() {
            return Err(PipelineError::InvalidArgument("trajectory has no samples".into()));
        }
        if self.samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(PipelineError::InvalidArgument("sample times must increase strictly".into()));
        }
        let n = self.samples[0].q_h.len();
        for s in &self.samples {
            let r = s.r_h.matrix();
            if (r.transpose() * r - nalgebra::Matrix3::identity()).amax() > 1e-9 || (r.determinant() - 1.0).abs() > 1e-9 {
                return Err(PipelineError::InvalidArgument(format!("rotation at t = {} is not orthonormal", s.t)));
            }
            if s.q_h.len() != n {
                return Err(PipelineError::InvalidArgument("joint vector length changes along the trajectory".into()));
            }
        }
        Ok(())
    }

    pub fn start(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.t)
    }

    pub fn end(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// Base pose and joints at `t`, linear between samples (rotations by
    /// slerp) and held constant outside the sampled span.
    pub fn at(&self, t: f64) -> (Isometry3<f64>, Vec<f64>) {
        let s = &self.samples;
        let pose = |x: &TrajectorySample, r: UnitQuaternion<f64>| Isometry3::from_parts(Translation3::from(x.p_h), r);
        let k = s.partition_point(|x| x.t <= t);
        if k == 0 {
            return (pose(&s[0], UnitQuaternion::from_rotation_matrix(&s[0].r_h)), s[0].q_h.clone());
        }
        let a = &s[k - 1];
        if k == s.len() || a.t == t {
            return (pose(a, UnitQuaternion::from_rotation_matrix(&a.r_h)), a.q_h.clone());
        }
        let b = &s[k];
        let w = (t - a.t) / (b.t - a.t);
        let ra = UnitQuaternion::from_rotation_matrix(&a.r_h);
        let rb = UnitQuaternion::from_rotation_matrix(&b.r_h);
        let r = ra.try_slerp(&rb, w, 1e-12).unwrap_or(ra);
        let p = a.p_h.lerp(&b.p_h, w);
        let q = a.q_h.iter().zip(&b.q_h).map(|(x, y)| x + (y - x) * w).collect();
        (Isometry3::from_parts(Translation3::from(p), r), q)
    }

    /// Samples within `[t0, t1]`, with the end points interpolated in.
    pub fn window(&self, t0: f64, t1: f64) -> Result<Self, PipelineError> {
        if !(t1 > t0) {
            return Err(PipelineError::InvalidArgument(format!("empty window [{t0}, {t1}]")));
        }
        let sample = |t: f64| {
            let (pose, q_h) = self.at(t);
            TrajectorySample { t, p_h: pose.translation.vector, r_h: pose.rotation.to_rotation_matrix(), q_h }
        };
        let mut samples = vec![sample(t0)];
        samples.extend(self.samples.iter().filter(|s| s.t > t0 && s.t < t1).cloned());
        samples.push(sample(t1));
        let out = Self { samples };
        out.validate()?;
        Ok(out)
    }

    /// Same path played `factor` times slower, still starting at `start()`.
    pub fn stretched(&self, factor: f64) -> Self {
        let t0 = self.start();
        let mut out = self.clone();
        out.samples.iter_mut().for_each(|s| s.t = t0 + (s.t - t0) * factor);
        out
    }

    /// Copy with every sample time moved by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        let mut out = self.clone();
        out.samples.iter_mut().for_each(|s| s.t += dt);
        out
    }
}

/// Closure through the joint configurations of `states` (in order) over
/// `timing.closure`, a hold, then a straight base translation that starts
/// and ends at rest.
pub fn export_hand_trajectory(
    gripper: &Gripper,
    states: &[GraspState],
    timing: TrajectoryTiming,
    pull: &PullSpec,
) -> Result<HandTrajectory, PipelineError> {
    if states.is_empty() {
        return Err(PipelineError::InvalidArgument("no grasp states to follow".into()));
    }
    positive("closure duration", timing.closure)?;
    positive("sampling interval", timing.interval)?;
    if !(timing.hold >= 0.0) {
        return Err(PipelineError::InvalidArgument("hold duration must be non-negative".into()));
    }
    if !(pull.distance >= 0.0 && pull.distance.is_finite()) {
        return Err(PipelineError::InvalidArgument("pull distance must be non-negative".into()));
    }
    positive("pull duration", pull.duration)?;
    if pull.distance > 0.0 && (pull.direction.norm() - 1.0).abs() > 1e-9 {
        return Err(PipelineError::InvalidArgument("pull direction must be a unit vector".into()));
    }
    if states.iter().any(|s| s.q.len() != gripper.joint_count()) {
        return Err(PipelineError::InvalidArgument("grasp state joint count differs from the gripper".into()));
    }
    let base = gripper.base.to_isometry();
    let p0 = base.translation.vector;
    let r0 = base.rotation.to_rotation_matrix();

    let closure_q = |t: f64| -> Vec<f64> {
        if states.len() == 1 {
            return states[0].q.clone();
        }
        let x = (t / timing.closure).clamp(0.0, 1.0) * (states.len() - 1) as f64;
        let i = (x.floor() as usize).min(states.len() - 2);
        let w = x - i as f64;
        states[i].q.iter().zip(&states[i + 1].q).map(|(a, b)| a + (b - a) * w).collect()
    };
    let t_hold = timing.closure;
    let t_pull = t_hold + timing.hold;
    let t_end = t_pull + pull.duration;
    let sample_at = |t: f64| -> TrajectorySample {
        // Smoothstep progress: the base starts and stops at rest, so the pull
        // does not open with a velocity jump.
        let s = ((t - t_pull) / pull.duration).clamp(0.0, 1.0);
        let shift = s * s * (3.0 - 2.0 * s) * pull.distance;
        let p_h = if pull.distance > 0.0 { p0 + pull.direction * shift } else { p0 };
        TrajectorySample { t, p_h, r_h: r0, q_h: closure_q(t) }
    };

    let mut times: Vec<f64> = Vec::new();
    let n = (t_end / timing.interval).floor() as usize;
    times.extend((0..=n).map(|i| i as f64 * timing.interval));
    times.extend([t_hold, t_pull, t_end]);
    // Closure waypoints land exactly on their states.
    if states.len() > 1 {
        let m = states.len() - 1;
        times.extend((1..m).map(|i| timing.closure * i as f64 / m as f64));
    }
    times.sort_by(f64::total_cmp);
    let tol = 1e-12 * t_end.max(1.0);
    times.dedup_by(|a, b| (*a - *b).abs() <= tol);
    let samples = times.into_iter().filter(|&t| t <= t_end + tol).map(sample_at).collect();
    let traj = HandTrajectory { samples };
    traj.validate()?;
    Ok(traj)
}

/// Pad poses of a gripper driven along a trajectory, for the contact handler.
#[derive(Debug, Clone)]
pub struct HandMotion {
    pub gripper: Gripper,
    pub pad_links: Vec<usize>,
    pub trajectory: HandTrajectory,
}

impl HandMotion {
    pub fn new(gripper: Gripper, trajectory: HandTrajectory) -> Result<Self, PipelineError> {
        gripper.validate().map_err(|e| PipelineError::InvalidArgument(e.to_string()))?;
        trajectory.validate()?;
        if trajectory.samples[0].q_h.len() != gripper.joint_count() {
            return Err(PipelineError::InvalidArgument("trajectory joint count differs from the gripper".into()));
        }
        let pad_links = gripper.pad_links();
        Ok(Self { gripper, pad_links, trajectory })
    }

    pub fn link_names(&self) -> Vec<String> {
        self.pad_links.iter().map(|&l| self.gripper.links[l].name.clone()).collect()
    }

    /// Poses of every link at `t`.
    pub fn link_poses(&self, t: f64) -> Vec<Isometry3<f64>> {
        let (base, q) = self.trajectory.at(t);
        self.gripper.forward_kinematics_from(&base, &q).expect("joint count checked on construction")
    }
}

impl PadMotion for HandMotion {
    fn poses(&self, t: f64) -> Vec<Isometry3<f64>> {
        let all = self.link_poses(t);
        self.pad_links.iter().map(|&l| all[l]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp::{three_finger_gripper, PadShape, Pose, ThreeFingerOptions};

    fn hand() -> Gripper {
        let pad = PadShape::Rod { radius: 0.01, half_length: 0.02 };
        three_finger_gripper(
            Pose { translation: [0.2, 0.0, 0.0], rotation: [0.0; 3] },
            ThreeFingerOptions { mount_radius: 0.09, max_travel: 0.06, pad, distal_offset: 0.04, distal_clearance: 0.02 },
        )
    }

    fn state(q: Vec<f64>) -> GraspState {
        GraspState {
            level: 1,
            q,
            object_pose: Pose::default(),
            contacts: vec![],
            actuation: 0.0,
            thumb_normal: 0.0,
            total_normal: 0.0,
            feasible: true,
            force_residual: 0.0,
            moment_residual: 0.0,
        }
    }

    const TIMING: TrajectoryTiming = TrajectoryTiming { closure: 0.1, hold: 0.05, interval: 0.01 };

    #[test]
    fn pull_displaces_base_by_distance() {
        let g = hand();
        let states = [state(vec![0.0; 6]), state(vec![0.03, 0.0, 0.03, 0.0, 0.03, 0.0])];
        let pull = PullSpec { direction: Vector3::x(), distance: 0.02, duration: 0.2 };
        let tr = export_hand_trajectory(&g, &states, TIMING, &pull).unwrap();
        let first = &tr.samples[0];
        let last = tr.samples.last().unwrap();
        assert!(((last.p_h - first.p_h) - Vector3::new(0.02, 0.0, 0.0)).norm() < 1e-15);
        assert!((last.t - 0.35).abs() < 1e-12);
        assert_eq!(first.t, 0.0);
        assert_eq!(last.q_h, states[1].q);
        assert!(tr.samples.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn zero_pull_holds_base() {
        let g = hand();
        let pull = PullSpec { direction: Vector3::zeros(), distance: 0.0, duration: 0.1 };
        let tr = export_hand_trajectory(&g, &[state(vec![0.01; 6])], TIMING, &pull).unwrap();
        assert!(tr.samples.iter().all(|s| s.p_h == tr.samples[0].p_h));
    }

    #[test]
    fn bad_arguments() {
        let g = hand();
        let pull = PullSpec { direction: Vector3::x(), distance: 0.02, duration: 0.2 };
        assert!(export_hand_trajectory(&g, &[], TIMING, &pull).is_err());
        let zero = TrajectoryTiming { closure: 0.0, ..TIMING };
        assert!(export_hand_trajectory(&g, &[state(vec![0.0; 6])], zero, &pull).is_err());
        let still = PullSpec { duration: 0.0, ..pull };
        assert!(export_hand_trajectory(&g, &[state(vec![0.0; 6])], TIMING, &still).is_err());
        let bent = PullSpec { direction: Vector3::new(1.0, 1.0, 0.0), ..pull };
        assert!(export_hand_trajectory(&g, &[state(vec![0.0; 6])], TIMING, &bent).is_err());
    }

    #[test]
    fn pad_poses_match_kinematics_at_samples() {
        let g = hand();
        let states = [state(vec![0.0; 6]), state(vec![0.02, 0.1, 0.03, -0.1, 0.01, 0.0])];
        let pull = PullSpec { direction: Vector3::x(), distance: 0.02, duration: 0.2 };
        let tr = export_hand_trajectory(&g, &states, TIMING, &pull).unwrap();
        let motion = HandMotion::new(g.clone(), tr.clone()).unwrap();
        for s in &tr.samples {
            let base = Isometry3::from_parts(Translation3::from(s.p_h), UnitQuaternion::from_rotation_matrix(&s.r_h));
            let fk = g.forward_kinematics_from(&base, &s.q_h).unwrap();
            for (p, &l) in motion.poses(s.t).iter().zip(&motion.pad_links) {
                assert!((p.to_homogeneous() - fk[l].to_homogeneous()).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn interpolation_between_samples() {
        let g = hand();
        let states = [state(vec![0.0; 6]), state(vec![0.04, 0.0, 0.04, 0.0, 0.04, 0.0])];
        let pull = PullSpec { direction: Vector3::x(), distance: 0.0, duration: 0.1 };
        let tr = export_hand_trajectory(&g, &states, TrajectoryTiming { closure: 0.1, hold: 0.0, interval: 1.0 }, &pull)
            .unwrap();
        let (_, q) = tr.at(0.025);
        assert!((q[0] - 0.01).abs() < 1e-15);
        assert_eq!(tr.at(10.0).1, states[1].q);
        assert_eq!(tr.at(-1.0).1, states[0].q);
    }
}
