//! Penalty contact between deformable-mesh nodes and rigid triangulated
//! surfaces, with stick-slip Coulomb friction and KKT residual diagnostics.

mod handler;

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{Point3, Vector3};
use thiserror::Error;

use crate::mesh::{closest_point_on_triangle, RigidSurface};
use crate::pipeline::project_contact_force;

pub use handler::{contact_timestep, ContactHandler, PadMotion, StaticPads};

#[derive(Debug, Error)]
pub enum ContactError {
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactParams {
    /// Normal penalty stiffness, N/m per node.
    pub k_n: f64,
    /// Tangential (stick) stiffness, N/m per node.
    pub k_t: f64,
    pub friction: f64,
    /// Gap at or below which a node is in contact, m.
    #[serde(default)]
    pub tolerance: f64,
}

impl ContactParams {
    pub fn validate(&self) -> Result<(), ContactError> {
        if !(self.k_n > 0.0 && self.k_n.is_finite()) {
            return Err(ContactError::InvalidArgument("k_n must be positive".into()));
        }
        if !(self.k_t > 0.0 && self.k_t.is_finite()) {
            return Err(ContactError::InvalidArgument("k_t must be positive".into()));
        }
        if !(self.friction >= 0.0 && self.friction.is_finite()) {
            return Err(ContactError::InvalidArgument("friction must be non-negative".into()));
        }
        if !self.tolerance.is_finite() {
            return Err(ContactError::InvalidArgument("tolerance must be finite".into()));
        }
        Ok(())
    }

    /// 10 x softest modulus x characteristic element length, with `k_t = k_n`.
    pub fn default_for(softest_modulus: f64, element_length: f64, friction: f64) -> Self {
        let k = 10.0 * softest_modulus * element_length;
        Self { k_n: k, k_t: k, friction, tolerance: 0.0 }
    }
}

/// One node touching one rigid surface. `force` is the force the surface
/// exerts on the node.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPoint {
    pub node: usize,
    /// Index of the surface in the slice given to [`detect_contacts`].
    pub surface: usize,
    pub triangle: usize,
    pub normal: Vector3<f64>,
    /// Signed distance along `normal`; negative is penetration.
    pub gap: f64,
    pub position: Point3<f64>,
    /// Stick anchor in world coordinates. Starts at `position`.
    pub anchor: Point3<f64>,
    /// Velocity of the surface material point under the node.
    pub surface_velocity: Vector3<f64>,
    pub force: Vector3<f64>,
    pub slip: bool,
}

impl ContactPoint {
    pub fn normal_force(&self) -> f64 {
        self.normal.dot(&self.force)
    }

    pub fn tangential_force(&self) -> Vector3<f64> {
        self.force - self.normal * self.normal_force()
    }
}

/// Contacts of `nodes` (positions taken from the flat array `x`) against
/// `surfaces` in their current poses. Each node pairs with at most one
/// surface, the one whose nearest triangle is closest.
///
/// A node counts only when it lies within the normal prism of its nearest
/// triangle, so points beyond the rim of an open patch are ignored. Nodes
/// farther than 10% of a surface's bounding diagonal outside its bounding box
/// are not tested against it.
pub fn detect_contacts(
    x: &[f64],
    nodes: impl IntoIterator<Item = usize>,
    surfaces: &[RigidSurface],
    tolerance: f64,
) -> Vec<ContactPoint> {
    let boxes: Vec<_> = surfaces
        .iter()
        .map(|s| {
            let (lo, hi) = s.bounds();
            let pad = tolerance.max(0.0) + 0.1 * (hi - lo).norm();
            (lo - Vector3::repeat(pad), hi + Vector3::repeat(pad))
        })
        .collect();
    let mut out = Vec::new();
    for node in nodes {
        let p = Point3::new(x[3 * node], x[3 * node + 1], x[3 * node + 2]);
        let mut best: Option<(f64, ContactPoint)> = None;
        for (si, surface) in surfaces.iter().enumerate() {
            let (lo, hi) = &boxes[si];
            if (0..3).any(|k| p[k] < lo[k] || p[k] > hi[k]) {
                continue;
            }
            let mut nearest: Option<(f64, usize, Point3<f64>)> = None;
            for t in 0..surface.triangles.len() {
                let [a, b, c] = surface.triangle(t);
                let cp = closest_point_on_triangle(&p, &a, &b, &c);
                let d = (p - cp).norm();
                if nearest.map_or(true, |(bd, _, _)| d < bd) {
                    nearest = Some((d, t, cp));
                }
            }
            let Some((dist, t, cp)) = nearest else { continue };
            let n = surface.normals[t];
            let gap = (p - cp).dot(&n);
            if gap > tolerance || dist - gap.abs() > 1e-9 * (1.0 + dist) {
                continue;
            }
            if best.as_ref().map_or(true, |(bd, _)| dist < *bd) {
                best = Some((
                    dist,
                    ContactPoint {
                        node,
                        surface: si,
                        triangle: t,
                        normal: n,
                        gap,
                        position: p,
                        anchor: p,
                        surface_velocity: Vector3::zeros(),
                        force: Vector3::zeros(),
                        slip: false,
                    },
                ));
            }
        }
        if let Some((_, c)) = best {
            out.push(c);
        }
    }
    out
}

/// Penalty normal force and stick-slip tangential force.
///
/// The tangential trial force is `-k_t` times the tangential offset of the
/// node from its anchor. When it exceeds `mu |f_n|` the force is capped and
/// the anchor slides along so the spring carries exactly the cap.
pub fn contact_forces(contacts: &mut [ContactPoint], params: &ContactParams) {
    for c in contacts.iter_mut() {
        let n = c.normal;
        let fn_mag = params.k_n * (-c.gap).max(0.0);
        if fn_mag == 0.0 {
            c.force = Vector3::zeros();
            c.anchor = c.position;
            c.slip = false;
            continue;
        }
        let offset = c.position - c.anchor;
        let d_t = offset - n * n.dot(&offset);
        let trial = -params.k_t * d_t;
        let cap = params.friction * fn_mag;
        let trial_mag = trial.norm();
        let (f_t, slip) = if trial_mag > cap {
            let f_t = if trial_mag > 0.0 { trial * (cap / trial_mag) } else { Vector3::zeros() };
            (f_t, true)
        } else {
            (trial, false)
        };
        // Anchor sits in the tangent plane through the node, offset so the spring carries f_t.
        c.anchor = c.position + f_t / params.k_t;
        c.force = n * fn_mag + f_t;
        c.slip = slip;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KktReport {
    /// Largest penetration depth (non-negative), m.
    pub max_penetration: f64,
    /// Smallest normal force among contacts, N. Zero with no contacts.
    pub min_normal_force: f64,
    /// Largest |lambda_n * normal gap rate|, N m/s.
    pub max_complementarity: f64,
    pub cone_violations: usize,
    /// Largest normal force magnitude, N.
    pub max_normal_force: f64,
}

/// Residuals of non-penetration, non-negative force and complementarity,
/// plus the number of contacts outside the friction cone by more than 1e-9 N.
/// `v` are nodal velocities (flat).
pub fn kkt_residuals(contacts: &[ContactPoint], v: &[f64], friction: f64) -> KktReport {
    let mut r = KktReport::default();
    if contacts.is_empty() {
        return r;
    }
    r.min_normal_force = f64::INFINITY;
    for c in contacts {
        let f_n = c.normal_force();
        r.max_penetration = r.max_penetration.max(-c.gap);
        r.min_normal_force = r.min_normal_force.min(f_n);
        r.max_normal_force = r.max_normal_force.max(f_n.abs());
        let vn = Vector3::new(v[3 * c.node], v[3 * c.node + 1], v[3 * c.node + 2]);
        let rate = c.normal.dot(&(vn - c.surface_velocity));
        r.max_complementarity = r.max_complementarity.max((f_n * rate).abs());
        if c.tangential_force().norm() > friction * f_n.abs() + 1e-9 {
            r.cone_violations += 1;
        }
    }
    r
}

/// Per-link force totals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinkForce {
    /// Sum of contact normal-force magnitudes, N.
    pub normal: f64,
    /// Sum of the tangential parts of the contact forces, N.
    pub tangential: Vector3<f64>,
    /// Sum of contact forces, N.
    pub total: Vector3<f64>,
    pub contacts: usize,
}

impl LinkForce {
    /// Splits the summed force against a single link-level normal,
    /// returning `(|f_n|, f_mu)`.
    pub fn in_frame(&self, normal: &Vector3<f64>) -> Result<(f64, Vector3<f64>), ContactError> {
        let (f_n, f_mu) =
            project_contact_force(&self.total, normal).map_err(|e| ContactError::InvalidArgument(e.to_string()))?;
        Ok((f_n.norm(), f_mu))
    }
}

/// Aggregates contact forces by link. `links[s]` names the link that owns
/// surface `s`; every link listed gets an entry, even without contacts.
pub fn gripper_reaction(
    contacts: &[ContactPoint],
    links: &[String],
) -> Result<BTreeMap<String, LinkForce>, ContactError> {
    let mut out: BTreeMap<String, LinkForce> = links.iter().map(|l| (l.clone(), LinkForce::default())).collect();
    for c in contacts {
        let link = links
            .get(c.surface)
            .ok_or_else(|| ContactError::Configuration(format!("contact on surface {} has no link", c.surface)))?;
        let (f_n, f_mu) =
            project_contact_force(&c.force, &c.normal).map_err(|e| ContactError::InvalidArgument(e.to_string()))?;
        let entry = out.get_mut(link).expect("all links inserted");
        entry.normal += f_n.norm();
        entry.tangential += f_mu;
        entry.total += c.force;
        entry.contacts += 1;
    }
    Ok(out)
}

pub const CONTACT_CSV_HEADER: &str = "time_s,contact_id,node_id,link,gap_m,fn_N,ft_N,slip";

/// Writes contact history rows for one time. Call [`write_contact_csv_header`] first.
pub fn write_contact_csv_rows(
    w: &mut impl Write,
    time: f64,
    contacts: &[ContactPoint],
    links: &[String],
) -> Result<(), ContactError> {
    for (i, c) in contacts.iter().enumerate() {
        let link = links
            .get(c.surface)
            .ok_or_else(|| ContactError::Configuration(format!("contact on surface {} has no link", c.surface)))?;
        writeln!(
            w,
            "{time:.9e},{i},{},{link},{:.9e},{:.9e},{:.9e},{}",
            c.node,
            c.gap,
            c.normal_force(),
            c.tangential_force().norm(),
            u8::from(c.slip)
        )?;
    }
    Ok(())
}

pub fn write_contact_csv_header(w: &mut impl Write) -> Result<(), ContactError> {
    writeln!(w, "{CONTACT_CSV_HEADER}")?;
    Ok(())
}
