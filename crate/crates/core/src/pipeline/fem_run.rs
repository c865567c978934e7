use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};

use super::{HandMotion, HandTrajectory, PipelineError};
use crate::contact::{contact_timestep, gripper_reaction, ContactHandler, ContactParams, ContactPoint, LinkForce};
use crate::fem::{BoundaryConditions, Discretization, ExplicitSolver, FemError, Material, Parallelism, SimState};
use crate::grasp::Gripper;
use crate::mesh::Mesh;

/// Everything the FEM side needs besides the hand motion.
#[derive(Debug, Clone)]
pub struct FemSetup {
    pub mesh: Mesh,
    pub materials: Vec<Material>,
    /// Nodes held fixed, the restraint against rigid drift.
    pub fixed_nodes: Vec<usize>,
    pub contact: ContactParams,
    /// Fraction of the stable timestep actually used.
    pub safety: f64,
    /// Dynamic relaxation stops below this kinetic/strain energy ratio.
    pub relax_ratio: f64,
    /// Time budget of one relaxation, s.
    pub relax_time: f64,
    pub pad_segments: usize,
    /// Displacement snapshot spacing, s; `None` records none.
    pub output_interval: Option<f64>,
    /// Energy sample spacing in steps, 0 for none.
    pub trace_every: usize,
    pub parallelism: Parallelism,
}

/// Nodal displacements at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
}

/// FEM run state after closing the hand; cloning it forks the simulation.
#[derive(Debug, Clone)]
pub struct IndentedRun {
    pub solver: ExplicitSolver,
    pub handler: ContactHandler<HandMotion>,
    pub state: SimState,
    /// Link name of each pad surface.
    pub links: Vec<String>,
    pub snapshots: Vec<Snapshot>,
    output_interval: Option<f64>,
    relax_time: f64,
}

/// Net contact force a pad exerts on the body, split against the link's
/// nominal normal (its local +z axis).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PadLoad {
    pub normal: f64,
    pub lateral: Vector3<f64>,
    pub contacts: usize,
}

impl IndentedRun {
    pub fn contacts(&self) -> &[ContactPoint] {
        self.handler.contacts()
    }

    pub fn link_forces(&self) -> Result<BTreeMap<String, LinkForce>, PipelineError> {
        gripper_reaction(self.handler.contacts(), &self.links).map_err(|e| PipelineError::Contact(e.to_string()))
    }

    /// Per-link loads in each link's nominal frame.
    pub fn pad_loads(&self) -> Result<BTreeMap<String, PadLoad>, PipelineError> {
        let forces = self.link_forces()?;
        let mut out = BTreeMap::new();
        for (pad, name) in self.links.iter().enumerate() {
            let f = forces[name];
            let n = self.handler.poses()[pad].rotation * Vector3::z();
            let (f_n, f_mu) = super::project_contact_force(&f.total, &n)?;
            out.insert(name.clone(), PadLoad { normal: f_n.norm(), lateral: f_mu, contacts: f.contacts });
        }
        Ok(out)
    }

    /// Deepest push of a contact node along its contact normal, m.
    pub fn max_indentation(&self) -> f64 {
        self.handler
            .contacts()
            .iter()
            .map(|c| self.state.displacement(c.node).dot(&c.normal))
            .fold(0.0, f64::max)
    }

    /// Nodes currently touching a pad.
    pub fn active_nodes(&self) -> Vec<usize> {
        let mut n: Vec<usize> = self.handler.contacts().iter().filter(|c| c.gap <= 0.0).map(|c| c.node).collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    fn record(&mut self, force: bool) {
        let Some(dt_out) = self.output_interval else { return };
        let due = match self.snapshots.last() {
            None => true,
            Some(s) => self.state.t >= s.t + dt_out - 0.5 * self.solver.dt,
        };
        if due || force {
            if self.snapshots.last().is_some_and(|s| s.t == self.state.t) {
                return;
            }
            self.snapshots.push(Snapshot { t: self.state.t, u: self.state.u.clone() });
        }
    }

    fn step(&mut self) -> Result<crate::fem::StepReport, PipelineError> {
        let r = self.solver.step(&mut self.state, &mut self.handler).map_err(|e| match e {
            FemError::Divergence { .. } | FemError::ElementInversion { .. } => {
                PipelineError::Diverged { step: self.state.step, source: e, trace: self.solver.trace.clone() }
            }
            other => other.into(),
        })?;
        self.record(false);
        Ok(r)
    }

    fn drive(&mut self, trajectory: &HandTrajectory) {
        let shifted = trajectory.shifted(self.state.t - trajectory.start());
        self.handler.motion_mut().trajectory = shifted;
    }

    fn relax(&mut self) -> Result<crate::fem::StepReport, PipelineError> {
        let t_end = self.state.t + self.relax_time;
        let window = self.solver.options.window.max(1);
        let ratio = self.solver.options.energy_ratio;
        let mut recent = std::collections::VecDeque::with_capacity(window + 1);
        loop {
            let r = self.step()?;
            if r.kinetic == 0.0 && r.strain == 0.0 {
                self.record(true);
                return Ok(r);
            }
            recent.push_back(r.kinetic);
            if recent.len() > window {
                recent.pop_front();
            }
            let ke = recent.iter().copied().fold(0.0, f64::max);
            if recent.len() == window && r.strain > 0.0 && ke < ratio * r.strain {
                self.record(true);
                return Ok(r);
            }
            if self.state.t >= t_end {
                return Err(FemError::NonConvergence { time: self.state.t, ratio: r.ratio() }.into());
            }
        }
    }

    /// Follows `trajectory` (re-timed to start now) to its end, then relaxes
    /// to the quasi-static state.
    pub fn indent(&mut self, trajectory: &HandTrajectory) -> Result<(), PipelineError> {
        self.drive(trajectory);
        let until = self.handler.motion().trajectory.end();
        while self.state.t < until - 1e-12 * self.solver.dt {
            self.step()?;
        }
        self.relax().map(|_| ())
    }
}

/// Closes the hand along `closure` on a body at rest and relaxes to the
/// indented state.
pub fn run_indentation(setup: &FemSetup, gripper: &Gripper, closure: &HandTrajectory) -> Result<IndentedRun, PipelineError> {
    if !(setup.relax_ratio > 0.0 && setup.relax_time > 0.0) {
        return Err(PipelineError::InvalidArgument("relaxation ratio and time must be positive".into()));
    }
    if setup.pad_segments < 3 {
        return Err(PipelineError::InvalidArgument("pads need at least 3 segments".into()));
    }
    if let Some(dt) = setup.output_interval {
        if !(dt > 0.0) {
            return Err(PipelineError::InvalidArgument("output interval must be positive".into()));
        }
    }
    let disc = Discretization::new(setup.mesh.clone(), &setup.materials)?.with_parallelism(setup.parallelism);
    let candidates = disc.mesh().boundary_nodes();
    let bcs = BoundaryConditions::clamp_nodes(setup.fixed_nodes.iter().copied());
    let mut solver = ExplicitSolver::new(disc, bcs, setup.safety)?;
    let m_min = candidates.iter().map(|&n| solver.discretization().mass()[n]).fold(f64::INFINITY, f64::min);
    let k = setup.contact.k_n.max(setup.contact.k_t);
    let dt_element = solver.discretization().stable_timestep(1.0)?;
    solver.dt = contact_timestep(dt_element, k, m_min, setup.safety);
    solver.options.energy_ratio = setup.relax_ratio;
    solver.trace_every = setup.trace_every;

    let motion = HandMotion::new(gripper.clone(), closure.shifted(-closure.start()))?;
    let links = motion.link_names();
    let pads = motion.pad_links.iter().map(|&l| gripper.links[l].pad.expect("pad link").surface(setup.pad_segments)).collect();
    let handler = ContactHandler::new(pads, motion, setup.contact, candidates)
        .map_err(|e| PipelineError::Contact(e.to_string()))?;
    let state = solver.initial_state();
    let mut run = IndentedRun {
        solver,
        handler,
        state,
        links,
        snapshots: Vec::new(),
        output_interval: setup.output_interval,
        relax_time: setup.relax_time,
    };
    run.record(true);
    run.indent(closure)?;
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullOptions {
    /// Kinetic energy must stay below this fraction of strain energy.
    pub ratio_limit: f64,
    /// Kinetic energy is averaged over this fraction of the pull duration
    /// before the check, so single stick-slip releases (which do not depend
    /// on pull speed) are spread out rather than failing the pull.
    pub ratio_window: f64,
    /// Retries with a slower pull before giving up.
    pub max_attempts: usize,
    /// Spacing of the force history, s.
    pub interval: f64,
}

impl Default for PullOptions {
    fn default() -> Self {
        Self { ratio_limit: 0.01, ratio_window: 0.1, max_attempts: 8, interval: 0.01 }
    }
}

/// Per-step tracking of the contact patch against the pads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipSample {
    pub t: f64,
    /// Base travel since the pull started, m.
    pub base_displacement: f64,
    /// Mean tangential displacement of the initially touching nodes relative
    /// to the pads, m.
    pub relative_slip: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullSample {
    pub t: f64,
    pub base_displacement: f64,
    pub loads: BTreeMap<String, PadLoad>,
    pub kinetic: f64,
    pub strain: f64,
}

#[derive(Debug, Clone)]
pub struct PullResult {
    pub run: IndentedRun,
    pub history: Vec<PullSample>,
    pub slip: Vec<SlipSample>,
    /// Pull duration finally used, s.
    pub duration: f64,
    /// Largest kinetic/strain energy ratio seen while pulling.
    pub max_ratio: f64,
}

impl PullResult {
    /// Loads after the pull and the closing relaxation.
    pub fn final_loads(&self) -> &BTreeMap<String, PadLoad> {
        &self.history.last().expect("history holds the end state").loads
    }

    /// Mean loads over the samples within the last `fraction` of the base
    /// travel, the relaxed end state included. On a discrete mesh the
    /// sliding resistance ripples as nodes pass over a pad; averaging over
    /// about one node spacing of travel removes most of it.
    pub fn end_loads(&self, fraction: f64) -> BTreeMap<String, PadLoad> {
        Self::end_loads_of(&self.history, fraction)
    }

    fn end_loads_of(history: &[PullSample], fraction: f64) -> BTreeMap<String, PadLoad> {
        let end = history.last().expect("history holds the end state");
        let from = (1.0 - fraction.clamp(0.0, 1.0)) * end.base_displacement;
        let picked: Vec<&PullSample> =
            history.iter().filter(|h| h.base_displacement >= from - 1e-15).collect();
        let n = picked.len() as f64;
        let mut out: BTreeMap<String, PadLoad> = BTreeMap::new();
        for h in &picked {
            for (k, l) in &h.loads {
                let e = out.entry(k.clone()).or_default();
                e.normal += l.normal / n;
                e.lateral += l.lateral / n;
                e.contacts = e.contacts.max(l.contacts);
            }
        }
        out
    }
}

struct Tracked {
    node: usize,
    pad: usize,
    local: Point3<f64>,
    normal: Vector3<f64>,
}

fn slip_of(run: &IndentedRun, tracked: &[Tracked]) -> f64 {
    if tracked.is_empty() {
        return 0.0;
    }
    let x = run.state.positions(run.solver.discretization().mesh());
    let sum: f64 = tracked
        .iter()
        .map(|tr| {
            let p = Point3::new(x[3 * tr.node], x[3 * tr.node + 1], x[3 * tr.node + 2]);
            let d = run.handler.pad_local(tr.pad, &p) - tr.local;
            (d - tr.normal * tr.normal.dot(&d)).norm()
        })
        .sum();
    sum / tracked.len() as f64
}

/// Drives the indented run along the pull phase, slowing the pull until the
/// kinetic energy stays under `ratio_limit` of the strain energy, then
/// relaxes at the end position.
pub fn run_pull(indented: &IndentedRun, pull: &HandTrajectory, options: &PullOptions) -> Result<PullResult, PipelineError> {
    if !(options.ratio_limit > 0.0 && options.interval > 0.0 && options.ratio_window >= 0.0) || options.max_attempts == 0 {
        return Err(PipelineError::InvalidArgument("pull options must be positive".into()));
    }
    pull.validate()?;
    let base0 = pull.at(pull.start()).0.translation.vector;
    let mut phase = pull.clone();
    for attempt in 0..options.max_attempts {
        let mut run = indented.clone();
        let p = run.state.positions(run.solver.discretization().mesh());
        let tracked: Vec<Tracked> = run
            .handler
            .contacts()
            .iter()
            .filter(|c| c.gap <= 0.0)
            .map(|c| {
                let pose = run.handler.poses()[c.surface];
                let at = Point3::new(p[3 * c.node], p[3 * c.node + 1], p[3 * c.node + 2]);
                Tracked {
                    node: c.node,
                    pad: c.surface,
                    local: pose.inverse_transform_point(&at),
                    normal: pose.rotation.inverse() * c.normal,
                }
            })
            .collect();
        run.drive(&phase);
        let t0 = run.state.t;
        let until = run.handler.motion().trajectory.end();
        let moved = |run: &IndentedRun| (run.handler.motion().trajectory.at(run.state.t).0.translation.vector - base0).norm();
        let mut history =
            vec![PullSample { t: t0, base_displacement: 0.0, loads: run.pad_loads()?, kinetic: 0.0, strain: 0.0 }];
        let mut slip = vec![SlipSample { t: t0, base_displacement: 0.0, relative_slip: 0.0 }];
        let mut max_ratio: f64 = 0.0;
        let mut too_fast = false;
        let window = ((options.ratio_window * (until - t0) / run.solver.dt).ceil() as usize).max(1);
        let mut recent = std::collections::VecDeque::with_capacity(window + 1);
        let mut ke_sum = 0.0;
        while run.state.t < until - 1e-12 * run.solver.dt {
            let r = run.step()?;
            recent.push_back(r.kinetic);
            ke_sum += r.kinetic;
            if recent.len() > window {
                ke_sum -= recent.pop_front().expect("non-empty");
            }
            let ke = ke_sum.max(0.0) / recent.len() as f64;
            let ratio = if r.strain > 0.0 { ke / r.strain } else if ke > 0.0 { f64::INFINITY } else { 0.0 };
            max_ratio = max_ratio.max(ratio);
            if max_ratio > options.ratio_limit && attempt + 1 < options.max_attempts {
                too_fast = true;
                break;
            }
            let d = moved(&run);
            slip.push(SlipSample { t: run.state.t, base_displacement: d, relative_slip: slip_of(&run, &tracked) });
            if run.state.t >= history.last().expect("seeded").t + options.interval - 0.5 * run.solver.dt {
                let loads = run.pad_loads()?;
                history.push(PullSample { t: run.state.t, base_displacement: d, loads, kinetic: r.kinetic, strain: r.strain });
            }
        }
        if too_fast {
            // Kinetic energy scales with the square of the pull speed.
            let factor = (max_ratio / options.ratio_limit).sqrt().clamp(1.5, 8.0) * 1.2;
            phase = phase.stretched(factor);
            continue;
        }
        if max_ratio > options.ratio_limit {
            return Err(PipelineError::PullTooFast { ratio: max_ratio, attempts: options.max_attempts });
        }
        let last = run.relax()?;
        let d = moved(&run);
        slip.push(SlipSample { t: run.state.t, base_displacement: d, relative_slip: slip_of(&run, &tracked) });
        let loads = run.pad_loads()?;
        history.push(PullSample { t: run.state.t, base_displacement: d, loads, kinetic: last.kinetic, strain: last.strain });
        let duration = phase.end() - phase.start();
        return Ok(PullResult { run, history, slip, duration, max_ratio });
    }
    unreachable!("the last attempt either returns or errors")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipReport {
    pub slipped: bool,
    /// Base travel at the first threshold crossing, m.
    pub onset: Option<f64>,
}

/// Slip is declared once the mean tangential displacement of the touching
/// nodes relative to the pads exceeds `threshold`.
pub fn detect_slip(history: &[SlipSample], threshold: f64) -> SlipReport {
    match history.iter().find(|s| s.relative_slip > threshold) {
        Some(s) => SlipReport { slipped: true, onset: Some(s.base_displacement) },
        None => SlipReport { slipped: false, onset: None },
    }
}

/// Pull phase of a hand at rest at the end of `closure`: translate the base
/// by `distance` along `direction` over `duration`, sampled at `interval`.
pub fn pull_phase(
    closure: &HandTrajectory,
    direction: &Vector3<f64>,
    distance: f64,
    duration: f64,
    interval: f64,
) -> Result<HandTrajectory, PipelineError> {
    if !(duration > 0.0 && interval > 0.0 && distance >= 0.0) {
        return Err(PipelineError::InvalidArgument("pull duration and interval must be positive".into()));
    }
    if distance > 0.0 && (direction.norm() - 1.0).abs() > 1e-9 {
        return Err(PipelineError::InvalidArgument("pull direction must be a unit vector".into()));
    }
    let last = closure.samples.last().ok_or_else(|| PipelineError::InvalidArgument("empty closure".into()))?;
    let n = ((duration / interval).ceil() as usize).max(1);
    let samples = (0..=n)
        .map(|i| {
            let s = i as f64 / n as f64;
            let mut x = last.clone();
            x.t = s * duration;
            x.p_h += direction * (s * s * (3.0 - 2.0 * s) * distance);
            x
        })
        .collect();
    let out = HandTrajectory { samples };
    out.validate()?;
    Ok(out)
}
