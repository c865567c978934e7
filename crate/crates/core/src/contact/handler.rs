use std::collections::BTreeMap;

use nalgebra::{Isometry3, Point3, Vector3};

use super::{contact_forces, detect_contacts, ContactError, ContactParams, ContactPoint};
use crate::fem::{FemError, ForceHook};
use crate::mesh::RigidSurface;

/// Pose schedule for a set of rigid pads.
pub trait PadMotion {
    /// World pose of every pad at time `t`.
    fn poses(&self, t: f64) -> Vec<Isometry3<f64>>;
}

/// Pads that never move.
#[derive(Debug, Clone)]
pub struct StaticPads(pub Vec<Isometry3<f64>>);

impl PadMotion for StaticPads {
    fn poses(&self, _: f64) -> Vec<Isometry3<f64>> {
        self.0.clone()
    }
}

impl<F: Fn(f64) -> Vec<Isometry3<f64>>> PadMotion for F {
    fn poses(&self, t: f64) -> Vec<Isometry3<f64>> {
        self(t)
    }
}

/// Timestep that keeps a node stable against both its elements and a contact
/// spring `k`: `safety / sqrt(1/dt_e^2 + k / (4 m_min))`, where `dt_e` is the
/// element bound at safety 1.
pub fn contact_timestep(dt_element: f64, k: f64, m_min: f64, safety: f64) -> f64 {
    safety / (1.0 / (dt_element * dt_element) + k / (4.0 * m_min)).sqrt()
}

/// Penalty contact of mesh nodes against moving rigid pads, usable as the
/// reaction hook of the explicit solver. Stick anchors persist between steps
/// in pad-local coordinates, keyed by (node, pad).
#[derive(Debug, Clone)]
pub struct ContactHandler<M: PadMotion> {
    pads: Vec<RigidSurface>,
    motion: M,
    params: ContactParams,
    candidates: Vec<usize>,
    anchors: BTreeMap<(usize, usize), Point3<f64>>,
    contacts: Vec<ContactPoint>,
    poses: Vec<Isometry3<f64>>,
}

impl<M: PadMotion> ContactHandler<M> {
    /// `pads` are in their local frames; `candidates` are the mesh nodes
    /// allowed to touch (normally the boundary nodes).
    pub fn new(pads: Vec<RigidSurface>, motion: M, params: ContactParams, candidates: Vec<usize>) -> Result<Self, ContactError> {
        params.validate()?;
        let poses = motion.poses(0.0);
        if poses.len() != pads.len() {
            return Err(ContactError::Configuration(format!(
                "pad motion gives {} poses for {} pads",
                poses.len(),
                pads.len()
            )));
        }
        Ok(Self { pads, motion, params, candidates, anchors: BTreeMap::new(), contacts: Vec::new(), poses })
    }

    pub fn params(&self) -> &ContactParams {
        &self.params
    }

    pub fn motion(&self) -> &M {
        &self.motion
    }

    pub fn motion_mut(&mut self) -> &mut M {
        &mut self.motion
    }

    /// Contacts from the latest reaction evaluation.
    pub fn contacts(&self) -> &[ContactPoint] {
        &self.contacts
    }

    /// Pad poses used by the latest reaction evaluation.
    pub fn poses(&self) -> &[Isometry3<f64>] {
        &self.poses
    }

    pub fn pads(&self) -> &[RigidSurface] {
        &self.pads
    }

    /// Point `p` expressed in the frame of pad `pad` at its latest pose.
    pub fn pad_local(&self, pad: usize, p: &Point3<f64>) -> Point3<f64> {
        self.poses[pad].inverse_transform_point(p)
    }

    /// Contacts and forces at positions `x` and time `t` without touching the
    /// stored anchors.
    pub fn evaluate(&self, t: f64, dt: f64, x: &[f64]) -> (Vec<ContactPoint>, Vec<Isometry3<f64>>) {
        let poses = self.motion.poses(t);
        let prev = if dt > 0.0 { self.motion.poses(t - dt) } else { poses.clone() };
        let posed: Vec<RigidSurface> = self.pads.iter().zip(&poses).map(|(s, p)| s.transformed(p)).collect();
        let mut contacts = detect_contacts(x, self.candidates.iter().copied(), &posed, self.params.tolerance);
        for c in contacts.iter_mut() {
            let pose = &poses[c.surface];
            if let Some(a) = self.anchors.get(&(c.node, c.surface)) {
                c.anchor = pose * a;
            }
            if dt > 0.0 {
                let local = pose.inverse_transform_point(&c.position);
                c.surface_velocity = (pose * local - prev[c.surface] * local) / dt;
            }
        }
        contact_forces(&mut contacts, &self.params);
        (contacts, poses)
    }

    fn commit(&mut self, contacts: Vec<ContactPoint>, poses: Vec<Isometry3<f64>>) {
        self.anchors.clear();
        for c in &contacts {
            if c.gap <= 0.0 {
                self.anchors.insert((c.node, c.surface), poses[c.surface].inverse_transform_point(&c.anchor));
            }
        }
        self.contacts = contacts;
        self.poses = poses;
    }

    /// Total force the pads exert on the body at the latest evaluation.
    pub fn net_force(&self) -> Vector3<f64> {
        self.contacts.iter().map(|c| c.force).sum()
    }
}

impl<M: PadMotion> ForceHook for ContactHandler<M> {
    fn reaction(&mut self, t: f64, dt: f64, x: &[f64], _v: &[f64], out: &mut [f64]) -> Result<(), FemError> {
        let (contacts, poses) = self.evaluate(t, dt, x);
        for c in &contacts {
            if !c.force.iter().all(|f| f.is_finite()) {
                return Err(FemError::InvalidArgument(format!("non-finite contact force at node {}", c.node)));
            }
            for k in 0..3 {
                out[3 * c.node + k] -= c.force[k];
            }
        }
        self.commit(contacts, poses);
        Ok(())
    }
}
