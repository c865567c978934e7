use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use softgrasp::contact::{contact_timestep, write_contact_csv_header, write_contact_csv_rows};
use softgrasp::fem::{Discretization, Parallelism, SimState, StepReport};
use softgrasp::grasp::{close_gripper, close_to_touch, rigid_pull_test, write_grasp_csv, GraspState, Pose};
use softgrasp::mesh::{validate_mesh, write_vtk, FieldData, FieldMap, Mesh};
use softgrasp::pipeline::{
    closed_by, element_strains, export_hand_trajectory, grip_tightness_sweep, run_indentation, strain_report,
    write_skin_csv, write_summary, write_sweep_csv, IndentedRun, PipelineError, PullResult, PullSpec, StrainReport,
    TrajectoryTiming,
};

use crate::config::SceneConfig;
use crate::error::CliError;

/// Fingers start this far short of first touch in `grasp-fem`, m.
const START_CLEARANCE: f64 = 0.002;

pub struct Context {
    pub config: SceneConfig,
    pub out: Option<PathBuf>,
    pub force: bool,
    pub parallelism: Parallelism,
}

impl Context {
    fn out(&self) -> Result<&Path, CliError> {
        self.out.as_deref().ok_or_else(|| CliError::Config("--out: required for this command".into()))
    }

    /// Output directory with every listed entry checked before any work
    /// starts, so a long run is never thrown away at the end.
    fn out_dir(&self, entries: &[&str]) -> Result<PathBuf, CliError> {
        let dir = self.out()?.to_path_buf();
        if dir.exists() && !dir.is_dir() {
            return Err(CliError::Filesystem(format!("{}: exists and is not a directory", dir.display())));
        }
        if !self.force {
            for e in entries {
                let p = dir.join(e);
                let taken = if p.is_dir() {
                    std::fs::read_dir(&p).map_err(|err| CliError::io(&p, err))?.next().is_some()
                } else {
                    p.exists()
                };
                if taken {
                    return Err(CliError::Filesystem(format!("{}: already exists (use --force)", p.display())));
                }
            }
        }
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(dir)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Filesystem(format!("{}: {e}", path.display())))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn write_trace(path: &Path, trace: &[StepReport]) -> Result<(), CliError> {
    let mut w = create(path)?;
    writeln!(w, "time_s,kinetic_J,strain_J").map_err(|e| CliError::io(path, e))?;
    for r in trace {
        writeln!(w, "{:.9e},{:.9e},{:.9e}", r.time, r.kinetic, r.strain).map_err(|e| CliError::io(path, e))?;
    }
    finish(path, w)
}

/// Saves the energy trace of a diverged run and names it in the error.
fn numerical(stage: &str, e: PipelineError, dir: &Path) -> CliError {
    let inner = match &e {
        PipelineError::Level { source, .. } => source.as_ref(),
        other => other,
    };
    if let PipelineError::Diverged { step, trace, .. } = inner {
        let path = dir.join("energy_trace.csv");
        let saved = match write_trace(&path, trace) {
            Ok(()) => format!("energy trace in {}", path.display()),
            Err(err) => format!("energy trace not saved: {err}"),
        };
        return CliError::Numerical(format!("{stage}: {e}; step {step}; {saved}"));
    }
    CliError::from_pipeline(stage, e)
}

pub fn meshgen(ctx: &Context) -> Result<String, CliError> {
    let path = ctx.out()?;
    if path.exists() && !ctx.force {
        return Err(CliError::Filesystem(format!("{}: already exists (use --force)", path.display())));
    }
    let mesh = ctx.config.mesh()?;
    let report = validate_mesh(&mesh);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    mesh.write_json(path).map_err(|e| CliError::from_mesh("meshgen", e))?;
    if !report.ok {
        return Err(CliError::Numerical(format!("meshgen: mesh failed validation: {:?}", report.violations)));
    }
    Ok(format!(
        "ok: {} nodes, {} elements, min jacobian {:e}, written to {}",
        mesh.node_count(),
        mesh.element_count(),
        report.global_min_jacobian(),
        path.display()
    ))
}

const GRASP_RIGID_CSV: &str = "grasp_rigid.csv";

pub fn grasp_rigid(ctx: &Context) -> Result<String, CliError> {
    let cfg = &ctx.config;
    let gripper = cfg.gripper()?;
    let object = cfg.rigid_object()?;
    let params = cfg.close_params()?;
    let dir = ctx.out_dir(&[GRASP_RIGID_CSV])?;
    let states = close_gripper(&gripper, &object, &cfg.actuation_levels(), &params)
        .map_err(|e| CliError::from_grasp("grasp-rigid", e))?;
    let pull = cfg.pull_spec();
    let bounds = states
        .iter()
        .map(|s| rigid_pull_test(s, &pull.direction, params.friction, params.mass, &params.gravity))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::from_grasp("grasp-rigid pull test", e))?;
    let path = dir.join(GRASP_RIGID_CSV);
    let mut w = create(&path)?;
    write_grasp_csv(&mut w, &states, &bounds).map_err(|e| CliError::from_grasp("grasp-rigid", e))?;
    finish(&path, w)?;
    let infeasible = states.iter().filter(|s| !s.feasible).count();
    Ok(format!("{} levels ({} infeasible) written to {}", states.len(), infeasible, path.display()))
}

fn joint_state(q: Vec<f64>) -> GraspState {
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

/// Final FEM state, enough to rebuild the strain report later.
#[derive(Debug, Serialize, Deserialize)]
pub struct SavedState {
    pub t: f64,
    pub u: Vec<f64>,
    pub contact_nodes: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct StrainSummary {
    global_max: f64,
    max_element: usize,
    location: [f64; 3],
    contact_mean: Option<f64>,
    far_mean: Option<f64>,
    contact_elements: usize,
    elements: usize,
}

impl From<&StrainReport> for StrainSummary {
    fn from(r: &StrainReport) -> Self {
        Self {
            global_max: r.global_max,
            max_element: r.max_element,
            location: [r.location.x, r.location.y, r.location.z],
            contact_mean: r.contact_mean,
            far_mean: r.far_mean,
            contact_elements: r.contact_elements,
            elements: r.e_max.len(),
        }
    }
}

const VTK_DIR: &str = "vtk";
const CONTACTS_CSV: &str = "contacts.csv";
const LINK_FORCES_CSV: &str = "link_forces.csv";
const STRAIN_JSON: &str = "strain_report.json";
const SKIN_CSV: &str = "skin.csv";
const STATE_JSON: &str = "final_state.json";
const TRACE_CSV: &str = "energy_trace.csv";

fn state_of(mesh: &Mesh, t: f64, u: &[f64]) -> SimState {
    let mut s = SimState::at_rest(mesh.node_count());
    s.t = t;
    s.u.copy_from_slice(u);
    s
}

fn write_series(dir: &Path, mesh: &Mesh, run: &IndentedRun) -> Result<usize, CliError> {
    let vtk = dir.join(VTK_DIR);
    std::fs::create_dir_all(&vtk).map_err(|e| CliError::io(&vtk, e))?;
    for entry in std::fs::read_dir(&vtk).map_err(|e| CliError::io(&vtk, e))? {
        let p = entry.map_err(|e| CliError::io(&vtk, e))?.path();
        if p.extension().is_some_and(|x| x == "vtk") {
            std::fs::remove_file(&p).map_err(|e| CliError::io(&p, e))?;
        }
    }
    for (i, snap) in run.snapshots.iter().enumerate() {
        let state = state_of(mesh, snap.t, &snap.u);
        let e_max = element_strains(mesh, &state)
            .map_err(|e| CliError::Numerical(format!("grasp-fem: strain at t = {} s: {e}", snap.t)))?;
        let disp: Vec<[f64; 3]> = snap.u.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let nodal = FieldMap::from([("displacement".to_string(), FieldData::Vector(disp))]);
        let cells = FieldMap::from([("e_max".to_string(), FieldData::Scalar(e_max))]);
        let path = vtk.join(format!("indent_{i:04}.vtk"));
        write_vtk(mesh, &nodal, &cells, &path).map_err(|e| CliError::from_mesh("grasp-fem vtk", e))?;
    }
    Ok(run.snapshots.len())
}

pub fn grasp_fem(ctx: &Context) -> Result<String, CliError> {
    let cfg = &ctx.config;
    let setup = cfg.fem_setup(ctx.parallelism)?;
    let gripper = cfg.gripper()?;
    let object = cfg.rigid_object()?;
    let dir = ctx.out_dir(&[VTK_DIR, CONTACTS_CSV, LINK_FORCES_CSV, STRAIN_JSON, SKIN_CSV, STATE_JSON, TRACE_CSV])?;

    let touch = close_to_touch(&gripper, &object).map_err(|e| CliError::from_grasp("grasp-fem closure", e))?;
    let depth = cfg.indentation_depth();
    let start = closed_by(&gripper, &touch, depth.min(0.0) - START_CLEARANCE);
    let end = closed_by(&gripper, &touch, depth);
    let closure_time = cfg.indentation.closure_time;
    let timing = TrajectoryTiming { closure: closure_time, hold: 0.0, interval: cfg.sim.output_interval };
    let still = PullSpec { distance: 0.0, ..cfg.pull_spec() };
    let trajectory = export_hand_trajectory(&gripper, &[joint_state(start), joint_state(end)], timing, &still)
        .and_then(|t| t.window(0.0, closure_time))
        .map_err(|e| CliError::from_pipeline("grasp-fem closure", e))?;
    let run = run_indentation(&setup, &gripper, &trajectory).map_err(|e| numerical("grasp-fem indentation", e, &dir))?;

    let mesh = &setup.mesh;
    let frames = write_series(&dir, mesh, &run)?;

    let path = dir.join(CONTACTS_CSV);
    let mut w = create(&path)?;
    write_contact_csv_header(&mut w)
        .and_then(|_| write_contact_csv_rows(&mut w, run.state.t, run.contacts(), &run.links))
        .map_err(|e| CliError::Filesystem(format!("{}: {e}", path.display())))?;
    finish(&path, w)?;

    let loads = run.pad_loads().map_err(|e| CliError::from_pipeline("grasp-fem forces", e))?;
    let path = dir.join(LINK_FORCES_CSV);
    let mut w = create(&path)?;
    let rows = (|| -> std::io::Result<()> {
        writeln!(w, "link,normal_N,lateral_x_N,lateral_y_N,lateral_z_N,contacts")?;
        for (link, l) in &loads {
            writeln!(w, "{link},{},{},{},{},{}", l.normal, l.lateral.x, l.lateral.y, l.lateral.z, l.contacts)?;
        }
        Ok(())
    })();
    rows.map_err(|e| CliError::io(&path, e))?;
    finish(&path, w)?;

    let contact_nodes = run.active_nodes();
    let report = strain_report(mesh, &run.state, &contact_nodes).map_err(|e| numerical("grasp-fem strain", e, &dir))?;
    write_json(&dir.join(STRAIN_JSON), &StrainSummary::from(&report))?;

    let path = dir.join(SKIN_CSV);
    let mut w = create(&path)?;
    write_skin_csv(&mut w, mesh, &run.state).map_err(|e| CliError::from_pipeline("grasp-fem skin", e))?;
    finish(&path, w)?;

    write_json(&dir.join(STATE_JSON), &SavedState { t: run.state.t, u: run.state.u.clone(), contact_nodes: contact_nodes.clone() })?;
    write_trace(&dir.join(TRACE_CSV), &run.solver.trace)?;

    Ok(format!(
        "indented to depth {depth} m past touch: {} contact nodes, max indentation {:.4e} m, max e_max {:.4e}, \
         {frames} VTK frames in {}",
        contact_nodes.len(),
        run.max_indentation(),
        report.global_max,
        dir.join(VTK_DIR).display()
    ))
}

pub fn strain_report_cmd(ctx: &Context) -> Result<String, CliError> {
    let dir = ctx.out()?;
    let path = dir.join(STATE_JSON);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let saved: SavedState =
        serde_json::from_str(&text).map_err(|e| CliError::Filesystem(format!("{}: {e}", path.display())))?;
    let mesh = ctx.config.mesh()?;
    if saved.u.len() != 3 * mesh.node_count() {
        return Err(CliError::Config(format!(
            "object: mesh has {} nodes but {} holds {}",
            mesh.node_count(),
            path.display(),
            saved.u.len() / 3
        )));
    }
    let state = state_of(&mesh, saved.t, &saved.u);
    let report = strain_report(&mesh, &state, &saved.contact_nodes)
        .map_err(|e| CliError::from_pipeline("strain-report", e))?;
    serde_json::to_string_pretty(&StrainSummary::from(&report)).map_err(|e| CliError::Numerical(e.to_string()))
}

const SWEEP_CSV: &str = "sweep.csv";
const SUMMARY_CSV: &str = "summary.csv";
const LEVELS_CSV: &str = "levels.csv";

pub fn pull_sweep(ctx: &Context) -> Result<String, CliError> {
    let cfg = &ctx.config;
    let exp = cfg.experiment(ctx.parallelism)?;
    let opts = cfg.sweep_options();
    let dir = ctx.out_dir(&[SWEEP_CSV, SUMMARY_CSV, LEVELS_CSV, TRACE_CSV])?;
    let mut diag = vec!["level,depth_m,max_indentation_m,contact_nodes,pull_duration_s,max_energy_ratio".to_string()];
    let mut on_level = |level: usize, run: &IndentedRun, pulled: &PullResult| -> Result<(), PipelineError> {
        let line = format!(
            "{level},{},{},{},{},{}",
            opts.depths[level - 1],
            run.max_indentation(),
            run.active_nodes().len(),
            pulled.duration,
            pulled.max_ratio
        );
        eprintln!("level {level}/{}: {line}", opts.depths.len());
        diag.push(line);
        Ok(())
    };
    let result = grip_tightness_sweep(&exp, &opts, &mut on_level).map_err(|e| numerical("pull-sweep", e, &dir))?;

    let path = dir.join(SWEEP_CSV);
    let mut w = create(&path)?;
    write_sweep_csv(&mut w, &result).map_err(|e| CliError::from_pipeline("pull-sweep csv", e))?;
    finish(&path, w)?;
    let path = dir.join(SUMMARY_CSV);
    let mut w = create(&path)?;
    write_summary(&mut w, &result, Some(cfg.radius())).map_err(|e| CliError::from_pipeline("pull-sweep summary", e))?;
    finish(&path, w)?;
    let path = dir.join(LEVELS_CSV);
    std::fs::write(&path, diag.join("\n") + "\n").map_err(|e| CliError::io(&path, e))?;

    let fem_larger = result
        .fem
        .iter()
        .zip(&result.pairs)
        .filter(|(f, p)| matches!((f.ratio(), p.and_then(|i| result.rigid[i].ratio())), (Some(a), Some(b)) if a > b))
        .count();
    Ok(format!(
        "{} levels per engine; fem lateral/normal ratio larger at {fem_larger} of {} levels; results in {}",
        result.fem.len(),
        result.fem.len(),
        dir.display()
    ))
}

pub fn validate(ctx: &Context) -> Result<String, CliError> {
    let cfg = &ctx.config;
    let mesh = cfg.mesh()?;
    let report = validate_mesh(&mesh);
    if !report.ok {
        return Err(CliError::Numerical(format!("object: mesh failed validation: {:?}", report.violations)));
    }
    let mut lines = vec![
        "config ok".to_string(),
        format!(
            "mesh: {} nodes, {} elements, min jacobian {:e}",
            mesh.node_count(),
            mesh.element_count(),
            report.global_min_jacobian()
        ),
    ];
    let fixed = cfg.fixed_nodes(&mesh);
    lines.push(format!("restraint: {:?}, {} fixed nodes", cfg.restraint(), fixed.len()));
    let contact = cfg.contact_params(&mesh);
    let disc = Discretization::new(mesh.clone(), &[cfg.material()]).map_err(|e| CliError::Config(format!("materials: {e}")))?;
    let dt_e = disc.stable_timestep(1.0).map_err(|e| CliError::Config(format!("materials: {e}")))?;
    let m_min = mesh.boundary_nodes().iter().map(|&n| disc.mass()[n]).fold(f64::INFINITY, f64::min);
    let dt = contact_timestep(dt_e, contact.k_n.max(contact.k_t), m_min, cfg.sim.safety);
    lines.push(format!(
        "contact: k_n {} N/m, k_t {} N/m, friction {}; timestep {dt:e} s (element limit {dt_e:e} s)",
        contact.k_n, contact.k_t, contact.friction
    ));
    if cfg.gripper.is_some() {
        let gripper = cfg.gripper()?;
        lines.push(format!("gripper: {} links, {} joints", gripper.links.len(), gripper.joint_count()));
        if let Ok(object) = cfg.rigid_object() {
            let touch = close_to_touch(&gripper, &object).map_err(|e| CliError::from_grasp("gripper", e))?;
            lines.push(format!("first touch at q = {touch:?}"));
        }
    }
    lines.push(format!("levels: {}, closure depths {:?} m", cfg.level_count(), cfg.sweep_depths()));
    Ok(lines.join("\n"))
}
