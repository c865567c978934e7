use nalgebra::{Isometry3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{GraspError, Gripper, PadShape};

/// Signed distances at or below this count as touching, m.
pub const TOUCH_TOLERANCE: f64 = 1e-9;
/// Rigid pads may not sink deeper than this into the object, m.
pub const DEEP_PENETRATION: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RigidObject {
    Sphere { center: [f64; 3], radius: f64 },
    /// Solid cylinder; `center` is the mid-point of the axis segment.
    Cylinder { center: [f64; 3], axis: [f64; 3], radius: f64, length: f64 },
}

impl RigidObject {
    pub fn validate(&self) -> Result<(), GraspError> {
        let ok = match self {
            RigidObject::Sphere { radius, .. } => *radius > 0.0,
            RigidObject::Cylinder { axis, radius, length, .. } => {
                *radius > 0.0 && *length > 0.0 && (Vector3::from(*axis).norm() - 1.0).abs() < 1e-9
            }
        };
        if ok {
            Ok(())
        } else {
            Err(GraspError::InvalidArgument("degenerate object primitive".into()))
        }
    }

    pub fn center(&self) -> Vector3<f64> {
        match self {
            RigidObject::Sphere { center, .. } | RigidObject::Cylinder { center, .. } => Vector3::from(*center),
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            RigidObject::Sphere { radius, .. } | RigidObject::Cylinder { radius, .. } => *radius,
        }
    }

    pub fn volume(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            RigidObject::Sphere { radius, .. } => 4.0 / 3.0 * PI * radius.powi(3),
            RigidObject::Cylinder { radius, length, .. } => PI * radius * radius * length,
        }
    }

    /// Axis segment as (start, direction, length); a sphere is a zero-length segment.
    fn segment(&self) -> (Vector3<f64>, Vector3<f64>, f64) {
        match *self {
            RigidObject::Sphere { center, .. } => (Vector3::from(center), Vector3::x(), 0.0),
            RigidObject::Cylinder { center, axis, length, .. } => {
                let a = Vector3::from(axis);
                (Vector3::from(center) - a * (0.5 * length), a, length)
            }
        }
    }
}

/// Hard-finger point contact on the object. `position` is measured from the
/// object centre of mass; `normal` is the object's outward normal.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidContact {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
    /// Force the pad applies to the object, N.
    pub force: Vector3<f64>,
    /// Frictional moment; always zero for hard-finger contacts.
    pub moment: f64,
    pub link: String,
    pub gap: f64,
}

impl RigidContact {
    /// Magnitude of the pushing (normal) part of the force.
    pub fn normal_force(&self) -> f64 {
        -self.normal.dot(&self.force)
    }
}

/// Signed distance between a posed pad and the object, with the closest
/// point pair `(on object axis, on pad)`. Along a cylinder the smallest
/// axis parameter among equally close points is used.
pub fn pad_distance(pose: &Isometry3<f64>, pad: &PadShape, object: &RigidObject) -> (f64, Vector3<f64>, Vector3<f64>) {
    let (start, dir, len) = object.segment();
    let r = object.radius();
    let eval = |t: f64| {
        let a = start + dir * t;
        let local = pose.inverse_transform_point(&Point3::from(a)).coords;
        let (q, d) = pad.closest_point(&local);
        (d - r, a, (pose * Point3::from(q)).coords)
    };
    if len == 0.0 {
        return eval(0.0);
    }
    // Distance to a convex set is convex along a line: golden-section search.
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, len);
    for _ in 0..200 {
        if hi - lo <= 1e-15 * len {
            break;
        }
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if eval(m1).0 <= eval(m2).0 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let t_min = 0.5 * (lo + hi);
    let best = [0.0, t_min, len].into_iter().map(|t| (eval(t).0, t)).min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
    // Smallest parameter within rounding of the minimum.
    let target = best.0 + 4.0 * f64::EPSILON * (best.0.abs() + r);
    let (mut a, mut b) = (0.0, best.1);
    if eval(0.0).0 <= target {
        b = 0.0;
    } else {
        for _ in 0..200 {
            if b - a <= 1e-15 * len {
                break;
            }
            let m = 0.5 * (a + b);
            if eval(m).0 <= target {
                b = m;
            } else {
                a = m;
            }
        }
    }
    eval(b)
}

/// Point contacts between every pad of `gripper` (joint values `q`) and the
/// object. A pad touching within [`TOUCH_TOLERANCE`] yields one contact.
pub fn find_contact_points(gripper: &Gripper, q: &[f64], object: &RigidObject) -> Result<Vec<RigidContact>, GraspError> {
    object.validate()?;
    let poses = gripper.forward_kinematics(q)?;
    let mut out = Vec::new();
    for li in gripper.pad_links() {
        let link = &gripper.links[li];
        let pad = link.pad.as_ref().expect("pad link");
        let (d, a, q_pad) = pad_distance(&poses[li], pad, object);
        if d > TOUCH_TOLERANCE {
            continue;
        }
        if d < -DEEP_PENETRATION {
            return Err(GraspError::InvalidConfiguration(format!(
                "pad `{}` penetrates the object by {:.3e} m",
                link.name, -d
            )));
        }
        let v = q_pad - a;
        if v.norm() == 0.0 {
            return Err(GraspError::InvalidConfiguration(format!("pad `{}` reaches the object axis", link.name)));
        }
        let normal = v.normalize();
        let surface = a + normal * object.radius();
        out.push(RigidContact {
            position: surface - object.center(),
            normal,
            force: Vector3::zeros(),
            moment: 0.0,
            link: link.name.clone(),
            gap: d,
        });
    }
    Ok(out)
}
