use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::GraspError;
use crate::mesh::RigidSurface;

/// Rigid transform as translation (m) plus rotation vector (axis times angle, rad).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default)]
    pub rotation: [f64; 3],
}

impl Pose {
    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::new(Vector3::from(self.translation), Vector3::from(self.rotation))
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        let t = iso.translation.vector;
        let r = iso.rotation.scaled_axis();
        Self { translation: [t.x, t.y, t.z], rotation: [r.x, r.y, r.z] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

/// Joint between a link and its parent, acting after the link's fixed origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Joint {
    pub kind: JointKind,
    pub axis: [f64; 3],
    pub lower: f64,
    pub upper: f64,
}

/// Finger pad primitive in the link frame. The contact side faces local +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PadShape {
    /// Rectangular block centred at the link origin.
    Box { half_extents: [f64; 3] },
    /// Round bar (capsule on the rigid side, faceted prism on the FEM side)
    /// along local y, centred at the link origin.
    Rod { radius: f64, half_length: f64 },
}

impl PadShape {
    fn validate(&self) -> Result<(), GraspError> {
        let ok = match self {
            PadShape::Box { half_extents } => half_extents.iter().all(|&h| h > 0.0 && h.is_finite()),
            PadShape::Rod { radius, half_length } => *radius > 0.0 && *half_length > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(GraspError::InvalidArgument("pad dimensions must be positive".into()))
        }
    }

    /// Triangulated surface in the link frame for the FEM side.
    pub fn surface(&self, segments: usize) -> RigidSurface {
        match *self {
            PadShape::Box { half_extents } => RigidSurface::cuboid(Vector3::from(half_extents)),
            PadShape::Rod { radius, half_length } => {
                RigidSurface::rod(radius, half_length, segments).expect("validated pad")
            }
        }
    }

    /// Closest point of the pad (link frame) to `p`, and the distance from
    /// `p` to it. Points inside the pad report the nearest boundary point
    /// and a negative distance.
    pub fn closest_point(&self, p: &Vector3<f64>) -> (Vector3<f64>, f64) {
        match *self {
            PadShape::Box { half_extents } => {
                let h = Vector3::from(half_extents);
                let q = p.zip_map(&h, |x, hi| x.clamp(-hi, hi));
                if q != *p {
                    return (q, (p - q).norm());
                }
                // Inside: push out through the nearest face.
                let mut best = (0, f64::INFINITY, 1.0);
                for k in 0..3 {
                    for s in [-1.0, 1.0] {
                        let d = h[k] - s * p[k];
                        if d < best.1 {
                            best = (k, d, s);
                        }
                    }
                }
                let mut q = *p;
                q[best.0] = best.2 * h[best.0];
                (q, -best.1)
            }
            PadShape::Rod { radius, half_length } => {
                let c = Vector3::new(0.0, p.y.clamp(-half_length, half_length), 0.0);
                let r = p - c;
                let len = r.norm();
                let dir = if len > 0.0 { r / len } else { Vector3::z() };
                (c + dir * radius, len - radius)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub name: String,
    /// Parent link name; `None` attaches to the gripper base.
    #[serde(default)]
    pub parent: Option<String>,
    /// Fixed transform from the parent frame to this link's joint frame.
    #[serde(default)]
    pub origin: Pose,
    #[serde(default)]
    pub joint: Option<Joint>,
    #[serde(default)]
    pub pad: Option<PadShape>,
}

/// Kinematic tree of links rooted at the base pose (p_h, R_h). Joint values
/// `q_h` follow link order, one per link that has a joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gripper {
    #[serde(default)]
    pub base: Pose,
    pub links: Vec<Link>,
}

impl Gripper {
    /// Checks names, parents (declared earlier, so no cycles), joint axes and pads.
    pub fn validate(&self) -> Result<(), GraspError> {
        for (i, link) in self.links.iter().enumerate() {
            if self.links[..i].iter().any(|l| l.name == link.name) {
                return Err(GraspError::InvalidArgument(format!("duplicate link `{}`", link.name)));
            }
            if let Some(p) = &link.parent {
                if !self.links[..i].iter().any(|l| &l.name == p) {
                    return Err(GraspError::InvalidArgument(format!(
                        "link `{}` has parent `{p}` that is not declared before it",
                        link.name
                    )));
                }
            }
            if let Some(j) = &link.joint {
                let n = Vector3::from(j.axis).norm();
                if (n - 1.0).abs() > 1e-9 {
                    return Err(GraspError::InvalidArgument(format!("joint axis of `{}` is not unit length", link.name)));
                }
                if !(j.lower <= j.upper) {
                    return Err(GraspError::InvalidArgument(format!("joint limits of `{}` are reversed", link.name)));
                }
            }
            if let Some(pad) = &link.pad {
                pad.validate()?;
            }
        }
        Ok(())
    }

    pub fn joint_count(&self) -> usize {
        self.links.iter().filter(|l| l.joint.is_some()).count()
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    /// Index into `q_h` of the joint on link `link`, if it has one.
    pub fn joint_index(&self, link: usize) -> Option<usize> {
        self.links[link].joint.as_ref()?;
        Some(self.links[..link].iter().filter(|l| l.joint.is_some()).count())
    }

    /// Links carrying pads, in link order.
    pub fn pad_links(&self) -> Vec<usize> {
        (0..self.links.len()).filter(|&i| self.links[i].pad.is_some()).collect()
    }

    /// World pose of every link for joint values `q`.
    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Vec<Isometry3<f64>>, GraspError> {
        self.forward_kinematics_from(&self.base.to_isometry(), q)
    }

    /// Same as [`Gripper::forward_kinematics`] with an explicit base pose.
    pub fn forward_kinematics_from(&self, base: &Isometry3<f64>, q: &[f64]) -> Result<Vec<Isometry3<f64>>, GraspError> {
        if q.len() != self.joint_count() {
            return Err(GraspError::InvalidArgument(format!(
                "expected {} joint values, got {}",
                self.joint_count(),
                q.len()
            )));
        }
        let mut poses: Vec<Isometry3<f64>> = Vec::with_capacity(self.links.len());
        let mut qi = 0;
        for link in &self.links {
            let parent = match &link.parent {
                Some(p) => {
                    let idx = self.links.iter().position(|l| &l.name == p).ok_or_else(|| {
                        GraspError::InvalidArgument(format!("unknown parent `{p}` of link `{}`", link.name))
                    })?;
                    *poses.get(idx).ok_or_else(|| {
                        GraspError::InvalidArgument(format!("parent `{p}` of `{}` is declared after it", link.name))
                    })?
                }
                None => *base,
            };
            let mut pose = parent * link.origin.to_isometry();
            if let Some(j) = &link.joint {
                let v = q[qi];
                qi += 1;
                if !(v >= j.lower - 1e-12 && v <= j.upper + 1e-12) {
                    return Err(GraspError::InvalidArgument(format!(
                        "joint of `{}` at {v} outside [{}, {}]",
                        link.name, j.lower, j.upper
                    )));
                }
                let axis = Vector3::from(j.axis);
                let motion = match j.kind {
                    JointKind::Revolute => Isometry3::from_parts(
                        Translation3::identity(),
                        UnitQuaternion::from_scaled_axis(axis * v),
                    ),
                    JointKind::Prismatic => Isometry3::from_parts(Translation3::from(axis * v), UnitQuaternion::identity()),
                };
                pose *= motion;
            }
            poses.push(pose);
        }
        Ok(poses)
    }
}

/// Options for [`three_finger_gripper`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeFingerOptions {
    /// Distance of each proximal joint frame from the grasp axis at q = 0, m.
    pub mount_radius: f64,
    /// Closing travel limit of the proximal prismatic joints, m.
    pub max_travel: f64,
    pub pad: PadShape,
    /// Offset of the distal pad along the grasp axis, m.
    pub distal_offset: f64,
    /// Extra radial clearance of the distal pad at zero flexion, m.
    pub distal_clearance: f64,
}

/// Three fingers at 120 degrees around the base x axis, each a proximal
/// link on a radial prismatic closing joint and a distal link on a revolute
/// joint whose axis is tangential. The first finger is the thumb.
pub fn three_finger_gripper(base: Pose, o: ThreeFingerOptions) -> Gripper {
    let mut links = Vec::new();
    for (k, name) in ["thumb", "index", "middle"].iter().enumerate() {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
        // Local +z points at the axis from a mount at angle theta about x.
        let rot = UnitQuaternion::from_scaled_axis(Vector3::x() * theta);
        let origin = Isometry3::from_parts(Translation3::from(rot * Vector3::new(0.0, 0.0, -o.mount_radius)), rot);
        links.push(Link {
            name: format!("{name}_proximal"),
            parent: None,
            origin: Pose::from_isometry(&origin),
            joint: Some(Joint { kind: JointKind::Prismatic, axis: [0.0, 0.0, 1.0], lower: 0.0, upper: o.max_travel }),
            pad: Some(o.pad),
        });
        links.push(Link {
            name: format!("{name}_distal"),
            parent: Some(format!("{name}_proximal")),
            origin: Pose { translation: [o.distal_offset, 0.0, -o.distal_clearance], rotation: [0.0; 3] },
            joint: Some(Joint { kind: JointKind::Revolute, axis: [0.0, 1.0, 0.0], lower: -0.5, upper: 0.5 }),
            pad: Some(o.pad),
        });
    }
    Gripper { base, links }
}
