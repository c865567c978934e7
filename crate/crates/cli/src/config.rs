//! Scene configuration: one JSON document, unknown keys rejected. Every
//! validation message starts with the path of the offending field.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector3;
use serde::Deserialize;
use softgrasp::contact::ContactParams;
use softgrasp::fem::{Material, Parallelism};
use softgrasp::grasp::{three_finger_gripper, CloseParams, Gripper, Link, PadShape, Pose, RigidObject, ThreeFingerOptions};
use softgrasp::mesh::{generate_box_mesh, generate_cylinder_mesh, generate_sphere_mesh, Mesh};
use softgrasp::pipeline::{Experiment, FemSetup, PullOptions, PullSpec, SweepOptions};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub object: ObjectConfig,
    pub materials: BTreeMap<String, Material>,
    #[serde(default)]
    pub gripper: Option<GripperConfig>,
    #[serde(default)]
    pub contact: ContactConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub grasp: GraspConfig,
    #[serde(default)]
    pub indentation: IndentationConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Box,
    Cylinder,
    Sphere,
}

/// How the body is held against rigid drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Restraint {
    /// Nodes on the x = 0 face.
    ClampBase,
    /// Nodes within a quarter radius of the centre (at least four).
    ClampCore,
    None,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfig {
    pub kind: ObjectKind,
    /// box: [lx, ly, lz]; cylinder: [radius, length]; sphere: [radius]. m.
    pub dimensions: Vec<f64>,
    /// box: [nx, ny, nz]; cylinder: [radial, axial]; sphere: [n].
    pub resolution: Vec<usize>,
    pub material: String,
    #[serde(default)]
    pub restraint: Option<Restraint>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreeFingerConfig {
    pub mount_radius: f64,
    pub max_travel: f64,
    pub pad: PadShape,
    pub distal_offset: f64,
    pub distal_clearance: f64,
}

/// Either an explicit link list or the built-in three-finger hand.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripperConfig {
    #[serde(default)]
    pub base: Pose,
    #[serde(default)]
    pub links: Option<Vec<Link>>,
    #[serde(default)]
    pub three_finger: Option<ThreeFingerConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactConfig {
    /// N/m per node; default 10 E h with h the mean element size.
    #[serde(default)]
    pub k_n: Option<f64>,
    #[serde(default)]
    pub k_t: Option<f64>,
    /// Overrides the object material's friction coefficient.
    #[serde(default)]
    pub friction: Option<f64>,
    #[serde(default)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub safety: f64,
    /// Mass-proportional damping, 1/s; overrides the material's.
    pub damping: Option<f64>,
    pub output_interval: f64,
    /// Time budget of each relaxation, s.
    pub max_time: f64,
    pub relax_ratio: f64,
    pub pad_segments: usize,
    /// Energy sample spacing in steps.
    pub trace_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            safety: 0.9,
            damping: None,
            output_interval: 0.01,
            max_time: 3.0,
            relax_ratio: 1e-3,
            pad_segments: 32,
            trace_every: 100,
        }
    }
}

/// Rigid engine settings.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraspConfig {
    /// kg; default density times volume.
    pub mass: Option<f64>,
    pub gravity: [f64; 3],
    /// Normal force per unit actuation, N/N.
    pub gain: f64,
    pub tightness_link: String,
    /// Explicit actuation levels, N; default evenly spaced from 0 to `max_actuation`.
    pub actuation: Option<Vec<f64>>,
    pub max_actuation: f64,
}

impl Default for GraspConfig {
    fn default() -> Self {
        Self {
            mass: None,
            gravity: [0.0; 3],
            gain: 1.0,
            tightness_link: "thumb_proximal".into(),
            actuation: None,
            max_actuation: 24.0,
        }
    }
}

/// Single FEM closure for `grasp-fem`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndentationConfig {
    /// Closure past first touch, m; default 10% of the object radius.
    /// Negative stops short of the object.
    pub depth: Option<f64>,
    pub closure_time: f64,
}

impl Default for IndentationConfig {
    fn default() -> Self {
        Self { depth: None, closure_time: 0.05 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PullConfig {
    pub direction: [f64; 3],
    pub distance: f64,
    /// Starting duration; slowed automatically while the pull is not quasi-static.
    pub duration: f64,
}

impl Default for PullConfig {
    fn default() -> Self {
        Self { direction: [1.0, 0.0, 0.0], distance: 0.02, duration: 0.45 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub levels: Option<usize>,
    /// Closure past first touch per level, m.
    pub depths: Option<Vec<f64>>,
    /// Deepest level when `depths` is absent; default 26% of the radius.
    pub max_depth: Option<f64>,
    pub closure_time: f64,
    pub pull: PullConfig,
    pub slip_threshold: f64,
    pub match_tolerance: f64,
    pub end_window: f64,
    pub ratio_limit: f64,
    pub ratio_window: f64,
    pub max_attempts: usize,
    pub history_interval: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let p = PullOptions::default();
        Self {
            levels: None,
            depths: None,
            max_depth: None,
            closure_time: 0.05,
            pull: PullConfig::default(),
            slip_threshold: 1e-3,
            match_tolerance: 0.1,
            end_window: 0.25,
            ratio_limit: p.ratio_limit,
            ratio_window: p.ratio_window,
            max_attempts: p.max_attempts,
            history_interval: p.interval,
        }
    }
}

pub const DEFAULT_LEVELS: usize = 13;

fn field<T>(path: &str, msg: impl std::fmt::Display) -> Result<T, CliError> {
    Err(CliError::Config(format!("{path}: {msg}")))
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        field(path, format!("must be positive and finite, got {v}"))
    }
}

fn non_negative(path: &str, v: f64) -> Result<(), CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        field(path, format!("must be non-negative and finite, got {v}"))
    }
}

fn linspace(from: f64, to: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![to],
        _ => (0..n).map(|i| from + (to - from) * i as f64 / (n - 1) as f64).collect(),
    }
}

impl SceneConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "config".to_string() } else { path };
            CliError::Config(format!("{path}: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("--config: cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks everything that does not need a mesh or a solve.
    pub fn validate(&self) -> Result<(), CliError> {
        let o = &self.object;
        let (dims, res) = match o.kind {
            ObjectKind::Box => (3, 3),
            ObjectKind::Cylinder => (2, 2),
            ObjectKind::Sphere => (1, 1),
        };
        if o.dimensions.len() != dims {
            return field("object.dimensions", format!("expected {dims} values, got {}", o.dimensions.len()));
        }
        for &d in &o.dimensions {
            positive("object.dimensions", d)?;
        }
        if o.resolution.len() != res {
            return field("object.resolution", format!("expected {res} values, got {}", o.resolution.len()));
        }
        if o.resolution.iter().any(|&r| r == 0) {
            return field("object.resolution", "entries must be at least 1");
        }
        if !self.materials.contains_key(&o.material) {
            return field("object.material", format!("no material named `{}`", o.material));
        }
        for (name, m) in &self.materials {
            m.validate().map_err(|e| CliError::Config(format!("materials.{name}: {e}")))?;
        }
        if let Some(g) = &self.gripper {
            let gripper = self.gripper_from(g)?;
            gripper.validate().map_err(|e| CliError::Config(format!("gripper: {e}")))?;
            if gripper.link_index(&self.grasp.tightness_link).is_none() {
                return field("grasp.tightness_link", format!("no link named `{}`", self.grasp.tightness_link));
            }
        }

        let c = &self.contact;
        if let Some(k) = c.k_n {
            positive("contact.k_n", k)?;
        }
        if let Some(k) = c.k_t {
            positive("contact.k_t", k)?;
        }
        if let Some(mu) = c.friction {
            non_negative("contact.friction", mu)?;
        }
        if !c.tolerance.is_finite() {
            return field("contact.tolerance", "must be finite");
        }

        let s = &self.sim;
        if !(s.safety > 0.0 && s.safety <= 1.0) {
            return field("sim.safety", format!("must lie in (0, 1], got {}", s.safety));
        }
        if let Some(d) = s.damping {
            non_negative("sim.damping", d)?;
        }
        positive("sim.output_interval", s.output_interval)?;
        positive("sim.max_time", s.max_time)?;
        positive("sim.relax_ratio", s.relax_ratio)?;
        if s.pad_segments < 3 {
            return field("sim.pad_segments", "must be at least 3");
        }

        let g = &self.grasp;
        if let Some(m) = g.mass {
            positive("grasp.mass", m)?;
        }
        if g.gravity.iter().any(|x| !x.is_finite()) {
            return field("grasp.gravity", "must be finite");
        }
        positive("grasp.gain", g.gain)?;
        non_negative("grasp.max_actuation", g.max_actuation)?;
        if let Some(a) = &g.actuation {
            if a.is_empty() || a.iter().any(|x| !(*x >= 0.0)) || a.windows(2).any(|w| w[1] < w[0]) {
                return field("grasp.actuation", "must be non-empty, non-negative and non-decreasing");
            }
        }

        let i = &self.indentation;
        if let Some(d) = i.depth {
            if !d.is_finite() {
                return field("indentation.depth", "must be finite");
            }
        }
        positive("indentation.closure_time", i.closure_time)?;

        let w = &self.sweep;
        if w.levels == Some(0) {
            return field("sweep.levels", "must be at least 1");
        }
        if let Some(d) = &w.depths {
            if d.is_empty() || d.iter().any(|x| !(*x >= 0.0 && x.is_finite())) || d.windows(2).any(|p| p[1] < p[0]) {
                return field("sweep.depths", "must be non-empty, non-negative and non-decreasing");
            }
            if let Some(n) = w.levels {
                if n != d.len() {
                    return field("sweep.depths", format!("has {} entries but sweep.levels is {n}", d.len()));
                }
            }
        }
        if let Some(d) = w.max_depth {
            positive("sweep.max_depth", d)?;
        }
        positive("sweep.closure_time", w.closure_time)?;
        let dir = Vector3::from(w.pull.direction);
        if !((dir.norm() - 1.0).abs() <= 1e-9) {
            return field("sweep.pull.direction", format!("must be a unit vector, has length {}", dir.norm()));
        }
        non_negative("sweep.pull.distance", w.pull.distance)?;
        positive("sweep.pull.duration", w.pull.duration)?;
        positive("sweep.slip_threshold", w.slip_threshold)?;
        non_negative("sweep.match_tolerance", w.match_tolerance)?;
        if !(w.end_window > 0.0 && w.end_window <= 1.0) {
            return field("sweep.end_window", "must lie in (0, 1]");
        }
        positive("sweep.ratio_limit", w.ratio_limit)?;
        non_negative("sweep.ratio_window", w.ratio_window)?;
        if w.max_attempts == 0 {
            return field("sweep.max_attempts", "must be at least 1");
        }
        positive("sweep.history_interval", w.history_interval)?;
        Ok(())
    }

    fn gripper_from(&self, g: &GripperConfig) -> Result<Gripper, CliError> {
        match (&g.links, &g.three_finger) {
            (Some(links), None) => Ok(Gripper { base: g.base, links: links.clone() }),
            (None, Some(t)) => Ok(three_finger_gripper(
                g.base,
                ThreeFingerOptions {
                    mount_radius: t.mount_radius,
                    max_travel: t.max_travel,
                    pad: t.pad,
                    distal_offset: t.distal_offset,
                    distal_clearance: t.distal_clearance,
                },
            )),
            _ => field("gripper", "give exactly one of `links` and `three_finger`"),
        }
    }

    pub fn gripper(&self) -> Result<Gripper, CliError> {
        let g = self.gripper.as_ref().ok_or_else(|| CliError::Config("gripper: section missing".into()))?;
        self.gripper_from(g)
    }

    /// Radius of the object (half the smallest extent for a box), m.
    pub fn radius(&self) -> f64 {
        let d = &self.object.dimensions;
        match self.object.kind {
            ObjectKind::Box => 0.5 * d.iter().copied().fold(f64::INFINITY, f64::min),
            _ => d[0],
        }
    }

    pub fn mesh(&self) -> Result<Mesh, CliError> {
        let d = &self.object.dimensions;
        let r = &self.object.resolution;
        let mesh = match self.object.kind {
            ObjectKind::Box => generate_box_mesh([d[0], d[1], d[2]], [r[0], r[1], r[2]], 0),
            ObjectKind::Cylinder => generate_cylinder_mesh(d[0], d[1], r[0], r[1], 0),
            ObjectKind::Sphere => generate_sphere_mesh(d[0], r[0], 0),
        };
        mesh.map_err(|e| CliError::Config(format!("object: {e}")))
    }

    /// The object material with the damping and friction overrides applied.
    pub fn material(&self) -> Material {
        let mut m = self.materials[&self.object.material].clone();
        if let Some(c) = self.sim.damping {
            m.rayleigh_mass_damping = c;
        }
        if let Some(mu) = self.contact.friction {
            m.friction = mu;
        }
        m
    }

    pub fn friction(&self) -> f64 {
        self.material().friction
    }

    pub fn rigid_object(&self) -> Result<RigidObject, CliError> {
        let d = &self.object.dimensions;
        match self.object.kind {
            ObjectKind::Sphere => Ok(RigidObject::Sphere { center: [0.0; 3], radius: d[0] }),
            ObjectKind::Cylinder => Ok(RigidObject::Cylinder {
                center: [0.5 * d[1], 0.0, 0.0],
                axis: [1.0, 0.0, 0.0],
                radius: d[0],
                length: d[1],
            }),
            ObjectKind::Box => field("object.kind", "the rigid engine has no box primitive"),
        }
    }

    pub fn mass(&self) -> Result<f64, CliError> {
        match self.grasp.mass {
            Some(m) => Ok(m),
            None => Ok(self.material().density * self.rigid_object()?.volume()),
        }
    }

    pub fn restraint(&self) -> Restraint {
        self.object.restraint.unwrap_or(match self.object.kind {
            ObjectKind::Sphere => Restraint::ClampCore,
            _ => Restraint::ClampBase,
        })
    }

    pub fn fixed_nodes(&self, mesh: &Mesh) -> Vec<usize> {
        match self.restraint() {
            Restraint::None => vec![],
            Restraint::ClampBase => (0..mesh.node_count()).filter(|&i| mesh.nodes[i][0] == 0.0).collect(),
            Restraint::ClampCore => {
                let c: Vector3<f64> = match self.object.kind {
                    ObjectKind::Sphere => Vector3::zeros(),
                    _ => Vector3::from_iterator(self.object.dimensions.iter().map(|d| 0.5 * d)),
                };
                let mut by_distance: Vec<(f64, usize)> =
                    (0..mesh.node_count()).map(|i| ((mesh.node(i) - c).norm(), i)).collect();
                by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let reach = 0.25 * self.radius();
                let mut nodes: Vec<usize> = by_distance
                    .iter()
                    .enumerate()
                    .take_while(|(k, (d, _))| *k < 4 || *d <= reach)
                    .map(|(_, &(_, i))| i)
                    .collect();
                nodes.sort_unstable();
                nodes
            }
        }
    }

    pub fn contact_params(&self, mesh: &Mesh) -> ContactParams {
        let m = self.material();
        let h = (mesh.total_volume() / mesh.element_count() as f64).cbrt();
        let k = 10.0 * m.young_modulus * h;
        ContactParams {
            k_n: self.contact.k_n.unwrap_or(k),
            k_t: self.contact.k_t.or(self.contact.k_n).unwrap_or(k),
            friction: m.friction,
            tolerance: self.contact.tolerance,
        }
    }

    pub fn fem_setup(&self, parallelism: Parallelism) -> Result<FemSetup, CliError> {
        let mesh = self.mesh()?;
        let contact = self.contact_params(&mesh);
        Ok(FemSetup {
            fixed_nodes: self.fixed_nodes(&mesh),
            materials: vec![self.material()],
            contact,
            mesh,
            safety: self.sim.safety,
            relax_ratio: self.sim.relax_ratio,
            relax_time: self.sim.max_time,
            pad_segments: self.sim.pad_segments,
            output_interval: Some(self.sim.output_interval),
            trace_every: self.sim.trace_every,
            parallelism,
        })
    }

    pub fn close_params(&self) -> Result<CloseParams, CliError> {
        Ok(CloseParams {
            friction: self.friction(),
            mass: self.mass()?,
            gravity: Vector3::from(self.grasp.gravity),
            gain: self.grasp.gain,
            tightness_link: self.grasp.tightness_link.clone(),
        })
    }

    pub fn level_count(&self) -> usize {
        match (&self.sweep.depths, self.sweep.levels) {
            (Some(d), _) => d.len(),
            (None, Some(n)) => n,
            (None, None) => DEFAULT_LEVELS,
        }
    }

    pub fn actuation_levels(&self) -> Vec<f64> {
        match &self.grasp.actuation {
            Some(a) => a.clone(),
            None => linspace(0.0, self.grasp.max_actuation, self.level_count()),
        }
    }

    pub fn indentation_depth(&self) -> f64 {
        self.indentation.depth.unwrap_or(0.1 * self.radius())
    }

    pub fn sweep_depths(&self) -> Vec<f64> {
        if let Some(d) = &self.sweep.depths {
            return d.clone();
        }
        let n = self.level_count();
        let max = self.sweep.max_depth.unwrap_or(0.26 * self.radius());
        (1..=n).map(|i| max * i as f64 / n as f64).collect()
    }

    pub fn pull_spec(&self) -> PullSpec {
        let p = &self.sweep.pull;
        PullSpec { direction: Vector3::from(p.direction), distance: p.distance, duration: p.duration }
    }

    pub fn sweep_options(&self) -> SweepOptions {
        let w = &self.sweep;
        SweepOptions {
            depths: self.sweep_depths(),
            pull: self.pull_spec(),
            closure_time: w.closure_time,
            pull_options: PullOptions {
                ratio_limit: w.ratio_limit,
                ratio_window: w.ratio_window,
                max_attempts: w.max_attempts,
                interval: w.history_interval,
            },
            slip_threshold: w.slip_threshold,
            match_tolerance: w.match_tolerance,
            end_window: w.end_window,
        }
    }

    pub fn experiment(&self, parallelism: Parallelism) -> Result<Experiment, CliError> {
        let p = self.close_params()?;
        Ok(Experiment {
            setup: self.fem_setup(parallelism)?,
            gripper: self.gripper()?,
            object: self.rigid_object()?,
            friction: p.friction,
            mass: p.mass,
            gravity: p.gravity,
            gain: p.gain,
            tightness_link: p.tightness_link,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> serde_json::Value {
        serde_json::json!({
            "object": {"kind": "cylinder", "dimensions": [0.05, 0.2], "resolution": [2, 4], "material": "tissue"},
            "materials": {"tissue": {"density": 1000.0, "model": "neo-hookean", "young_modulus": 1e5,
                                      "poisson_ratio": 0.4, "friction": 0.25}},
            "gripper": {"three_finger": {"mount_radius": 0.09, "max_travel": 0.06,
                        "pad": {"kind": "rod", "radius": 0.01, "half_length": 0.02},
                        "distal_offset": 0.04, "distal_clearance": 0.02}}
        })
    }

    fn err(v: serde_json::Value) -> String {
        match SceneConfig::from_json(&v.to_string()) {
            Err(CliError::Config(m)) => m,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = SceneConfig::from_json(&minimal().to_string()).unwrap();
        assert_eq!(c.level_count(), 13);
        assert_eq!(c.sweep_depths().len(), 13);
        assert!((c.sweep_depths()[12] - 0.013).abs() < 1e-15);
        assert_eq!(c.actuation_levels().len(), 13);
        assert_eq!(c.restraint(), Restraint::ClampBase);
        assert!((c.indentation_depth() - 0.005).abs() < 1e-15);
        assert!((c.friction() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unknown_key_is_named() {
        let mut v = minimal();
        v["sim"] = serde_json::json!({"saftey": 0.5});
        let m = err(v);
        assert!(m.starts_with("sim"), "{m}");
        assert!(m.contains("saftey"), "{m}");
    }

    #[test]
    fn negative_radius_names_dimensions() {
        let mut v = minimal();
        v["object"]["dimensions"] = serde_json::json!([-0.05, 0.2]);
        assert!(err(v).starts_with("object.dimensions"));
    }

    #[test]
    fn safety_above_one_rejected() {
        let mut v = minimal();
        v["sim"] = serde_json::json!({"safety": 1.5});
        assert!(err(v).starts_with("sim.safety"));
    }

    #[test]
    fn unresolved_material_rejected() {
        let mut v = minimal();
        v["object"]["material"] = serde_json::json!("bone");
        assert!(err(v).starts_with("object.material"));
    }

    #[test]
    fn wrong_type_names_path() {
        let mut v = minimal();
        v["materials"]["tissue"]["density"] = serde_json::json!("heavy");
        assert!(err(v).starts_with("materials.tissue.density"));
    }

    #[test]
    fn depth_count_must_match_levels() {
        let mut v = minimal();
        v["sweep"] = serde_json::json!({"levels": 2, "depths": [0.001]});
        assert!(err(v).starts_with("sweep.depths"));
        let mut v = minimal();
        v["sweep"] = serde_json::json!({"depths": [0.001, 0.002]});
        assert_eq!(SceneConfig::from_json(&v.to_string()).unwrap().level_count(), 2);
    }

    #[test]
    fn missing_gripper_only_fails_when_needed() {
        let mut v = minimal();
        v.as_object_mut().unwrap().remove("gripper");
        let c = SceneConfig::from_json(&v.to_string()).unwrap();
        assert!(matches!(c.gripper(), Err(CliError::Config(m)) if m.starts_with("gripper")));
    }

    #[test]
    fn sphere_core_clamp_is_central() {
        let mut v = minimal();
        v["object"] = serde_json::json!({"kind": "sphere", "dimensions": [0.05], "resolution": [4], "material": "tissue"});
        let c = SceneConfig::from_json(&v.to_string()).unwrap();
        let mesh = c.mesh().unwrap();
        let fixed = c.fixed_nodes(&mesh);
        assert!(fixed.len() >= 4);
        assert!(fixed.iter().all(|&n| mesh.node(n).norm() <= 0.0125 + 1e-12 || fixed.len() == 4));
    }

    #[test]
    fn pull_direction_must_be_unit() {
        let mut v = minimal();
        v["sweep"] = serde_json::json!({"pull": {"direction": [2.0, 0.0, 0.0]}});
        assert!(err(v).starts_with("sweep.pull.direction"));
    }
}
