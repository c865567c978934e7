use std::io::Write;

use nalgebra::Vector3;

use super::{
    detect_slip, export_hand_trajectory, pull_phase, run_indentation, run_pull, FemSetup, IndentedRun, PipelineError,
    PullOptions, PullResult, PullSpec, TrajectoryTiming,
};
use crate::fem::SimState;
use crate::grasp::{
    close_gripper, close_to_touch, rigid_pull_test, CloseParams, GraspState, Gripper, JointKind, Pose, RigidObject,
};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Engine {
    Rigid,
    Fem,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Rigid => "rigid",
            Engine::Fem => "fem",
        }
    }
}

/// One grasp scene as seen by both engines.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub setup: FemSetup,
    pub gripper: Gripper,
    /// Rigid stand-in for the FEM body, same geometry.
    pub object: RigidObject,
    pub friction: f64,
    pub mass: f64,
    pub gravity: Vector3<f64>,
    /// Normal force per unit actuation in the rigid engine, N/N.
    pub gain: f64,
    /// Link whose normal force defines grip tightness.
    pub tightness_link: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    /// FEM closure depth past first touch, one per level, m.
    pub depths: Vec<f64>,
    pub pull: PullSpec,
    /// Time to close from one level to the next, s.
    pub closure_time: f64,
    pub pull_options: PullOptions,
    pub slip_threshold: f64,
    /// Relative thumb-force tolerance when pairing levels across engines.
    pub match_tolerance: f64,
    /// Final fraction of the pull travel over which end loads are averaged.
    pub end_window: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub engine: Engine,
    pub level: usize,
    pub thumb_fn: f64,
    pub total_fn: f64,
    pub lateral: f64,
    pub slipped: bool,
    pub onset: Option<f64>,
    /// Prescribed closure depth (FEM rows), m.
    pub depth: f64,
}

impl SweepRow {
    pub fn ratio(&self) -> Option<f64> {
        (self.total_fn > 0.0).then(|| self.lateral / self.total_fn)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rigid: Vec<SweepRow>,
    pub fem: Vec<SweepRow>,
    /// For each FEM level, the index of the rigid row it pairs with.
    pub pairs: Vec<Option<usize>>,
}

fn joint_state(level: usize, q: Vec<f64>) -> GraspState {
    GraspState {
        level,
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

/// Joint values `depth` past first touch on every prismatic joint, within
/// the joint limits. A negative depth stops short of touch.
pub fn closed_by(gripper: &Gripper, touch: &[f64], depth: f64) -> Vec<f64> {
    let mut q = touch.to_vec();
    let mut i = 0;
    for link in &gripper.links {
        if let Some(j) = &link.joint {
            if j.kind == JointKind::Prismatic {
                q[i] = (q[i] + depth).clamp(j.lower, j.upper);
            }
            i += 1;
        }
    }
    q
}

fn at_level(engine: Engine, level: usize) -> impl Fn(PipelineError) -> PipelineError {
    move |e| PipelineError::Level { engine: engine.as_str(), level, source: Box::new(e) }
}

/// FEM side of the sweep: closes level by level from first touch, pulling a
/// fork of the run at each level. `on_level` sees each level's indented run
/// and pull result.
pub fn fem_sweep(
    exp: &Experiment,
    opts: &SweepOptions,
    on_level: &mut dyn FnMut(usize, &IndentedRun, &PullResult) -> Result<(), PipelineError>,
) -> Result<Vec<SweepRow>, PipelineError> {
    let touch = close_to_touch(&exp.gripper, &exp.object)?;
    let timing = TrajectoryTiming { closure: opts.closure_time, hold: 0.0, interval: opts.pull_options.interval };
    let mut rows = Vec::with_capacity(opts.depths.len());
    let mut run: Option<IndentedRun> = None;
    let mut q_prev = touch.clone();
    let mut duration = opts.pull.duration;
    for (k, &depth) in opts.depths.iter().enumerate() {
        let level = k + 1;
        let wrap = at_level(Engine::Fem, level);
        let q = closed_by(&exp.gripper, &touch, depth);
        let states = [joint_state(level, q_prev.clone()), joint_state(level, q.clone())];
        let closure = export_hand_trajectory(&exp.gripper, &states, timing, &opts.pull).map_err(&wrap)?;
        let closure = closure.window(0.0, opts.closure_time).map_err(&wrap)?;
        match run.as_mut() {
            None => run = Some(run_indentation(&exp.setup, &exp.gripper, &closure).map_err(&wrap)?),
            Some(r) => r.indent(&closure).map_err(&wrap)?,
        }
        let indented = run.as_ref().expect("set above");
        let thumb_fn = indented.pad_loads().map_err(&wrap)?.get(&exp.tightness_link).map_or(0.0, |l| l.normal);
        let phase = pull_phase(&closure, &opts.pull.direction, opts.pull.distance, duration, opts.pull_options.interval)
            .map_err(&wrap)?;
        let pulled = run_pull(indented, &phase, &opts.pull_options).map_err(&wrap)?;
        // Next level starts from a somewhat faster pull than this one needed.
        duration = (pulled.duration / 1.5).max(opts.pull.duration);
        let loads = pulled.end_loads(opts.end_window);
        let total_fn = loads.values().map(|l| l.normal).sum();
        let lateral = loads.values().map(|l| l.lateral.dot(&opts.pull.direction)).sum();
        let slip = detect_slip(&pulled.slip, opts.slip_threshold);
        on_level(level, indented, &pulled).map_err(&wrap)?;
        rows.push(SweepRow {
            engine: Engine::Fem,
            level,
            thumb_fn,
            total_fn,
            lateral,
            slipped: slip.slipped,
            onset: slip.onset,
            depth,
        });
        q_prev = q;
    }
    Ok(rows)
}

/// Rigid grasp whose thumb normal force equals `thumb_fn`.
fn rigid_row(exp: &Experiment, level: usize, thumb_fn: f64, dir: &Vector3<f64>) -> Result<SweepRow, PipelineError> {
    let params = CloseParams {
        friction: exp.friction,
        mass: exp.mass,
        gravity: exp.gravity,
        gain: exp.gain,
        tightness_link: exp.tightness_link.clone(),
    };
    let base = close_gripper(&exp.gripper, &exp.object, &[0.0], &params)?;
    let thumb_contacts = base[0].contacts.iter().filter(|c| c.link == exp.tightness_link).count().max(1) as f64;
    // Each contact carries f_min + gain * actuation.
    let f_min = base[0].thumb_normal / thumb_contacts;
    let actuation = ((thumb_fn / thumb_contacts - f_min) / exp.gain).max(0.0);
    let state = close_gripper(&exp.gripper, &exp.object, &[actuation], &params)?.remove(0);
    let lateral = rigid_pull_test(&state, dir, exp.friction, exp.mass, &exp.gravity)?;
    Ok(SweepRow {
        engine: Engine::Rigid,
        level,
        thumb_fn: state.thumb_normal,
        total_fn: state.total_normal,
        lateral,
        slipped: !state.feasible,
        onset: (!state.feasible).then_some(0.0),
        depth: 0.0,
    })
}

/// Nearest rigid thumb force within `tol` (relative) of each FEM level.
pub fn pair_levels(fem: &[SweepRow], rigid: &[SweepRow], tol: f64) -> Vec<Option<usize>> {
    fem.iter()
        .map(|f| {
            rigid
                .iter()
                .enumerate()
                .map(|(i, r)| (i, (r.thumb_fn - f.thumb_fn).abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .filter(|&(_, d)| d <= tol * f.thumb_fn.abs())
                .map(|(i, _)| i)
        })
        .collect()
}

/// Grasp-and-pull at each tightness level in both engines. The rigid engine
/// is actuated to reproduce the FEM thumb force of each level.
pub fn grip_tightness_sweep(
    exp: &Experiment,
    opts: &SweepOptions,
    on_level: &mut dyn FnMut(usize, &IndentedRun, &PullResult) -> Result<(), PipelineError>,
) -> Result<SweepResult, PipelineError> {
    if opts.depths.is_empty() {
        return Err(PipelineError::InvalidArgument("at least one tightness level required".into()));
    }
    if opts.depths.windows(2).any(|w| w[1] < w[0]) || opts.depths.iter().any(|d| !(*d >= 0.0)) {
        return Err(PipelineError::InvalidArgument("closure depths must be non-negative and non-decreasing".into()));
    }
    if !(opts.closure_time > 0.0 && opts.match_tolerance >= 0.0 && opts.slip_threshold > 0.0) {
        return Err(PipelineError::InvalidArgument("closure time and slip threshold must be positive".into()));
    }
    if exp.gripper.link_index(&exp.tightness_link).is_none() {
        return Err(PipelineError::InvalidArgument(format!("no link named `{}`", exp.tightness_link)));
    }
    let fem = fem_sweep(exp, opts, on_level)?;
    let rigid = fem
        .iter()
        .map(|f| rigid_row(exp, f.level, f.thumb_fn, &opts.pull.direction).map_err(at_level(Engine::Rigid, f.level)))
        .collect::<Result<Vec<_>, _>>()?;
    let pairs = pair_levels(&fem, &rigid, opts.match_tolerance);
    Ok(SweepResult { rigid, fem, pairs })
}

pub const SWEEP_CSV_HEADER: &str = "engine,level,thumb_fn_N,total_fn_N,lateral_N,slipped,onset_m";

pub fn write_sweep_csv(w: &mut impl Write, result: &SweepResult) -> Result<(), PipelineError> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for r in result.rigid.iter().chain(&result.fem) {
        let onset = r.onset.map(|o| o.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.engine.as_str(),
            r.level,
            r.thumb_fn,
            r.total_fn,
            r.lateral,
            r.slipped,
            onset
        )?;
    }
    Ok(())
}

/// Per matched level: both lateral/normal ratios and which is larger.
pub fn write_summary(w: &mut impl Write, result: &SweepResult, radius: Option<f64>) -> Result<(), PipelineError> {
    writeln!(w, "level,depth_m,depth_over_radius,thumb_fn_N,fem_ratio,rigid_ratio,larger")?;
    for (f, pair) in result.fem.iter().zip(&result.pairs) {
        let rel = radius.map(|r| (f.depth / r).to_string()).unwrap_or_default();
        let fr = f.ratio();
        let rr = pair.and_then(|i| result.rigid[i].ratio());
        let larger = match (fr, rr) {
            (Some(a), Some(b)) if a > b => "fem",
            (Some(a), Some(b)) if b > a => "rigid",
            (Some(_), Some(_)) => "equal",
            _ => "unmatched",
        };
        let show = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{},{},{},{}", f.level, f.depth, rel, f.thumb_fn, show(fr), show(rr), larger)?;
    }
    Ok(())
}

pub const SKIN_CSV_HEADER: &str = "node_id,x0,y0,z0,x,y,z";

/// Reference and current positions of the boundary nodes.
pub fn write_skin_csv(w: &mut impl Write, mesh: &Mesh, state: &SimState) -> Result<(), PipelineError> {
    if state.u.len() != 3 * mesh.node_count() {
        return Err(PipelineError::InvalidArgument("state does not match the mesh".into()));
    }
    writeln!(w, "{SKIN_CSV_HEADER}")?;
    for n in mesh.boundary_nodes() {
        let p = mesh.node(n);
        let x = p + state.displacement(n);
        writeln!(w, "{n},{},{},{},{},{},{}", p.x, p.y, p.z, x.x, x.y, x.z)?;
    }
    Ok(())
}
