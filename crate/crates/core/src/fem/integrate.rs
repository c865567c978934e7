use std::collections::VecDeque;

use nalgebra::Vector3;

use super::{Discretization, FemError, Material, Traction};
use crate::mesh::Mesh;

/// Explicit state. After a step, `u` and `t` are at the new full step and
/// `v` is the mid-step velocity that produced it (central difference).
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub t: f64,
    pub step: usize,
}

impl SimState {
    pub fn at_rest(node_count: usize) -> Self {
        Self { u: vec![0.0; 3 * node_count], v: vec![0.0; 3 * node_count], a: vec![0.0; 3 * node_count], t: 0.0, step: 0 }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).chain(&self.a).all(|x| x.is_finite())
    }

    pub fn displacement(&self, node: usize) -> Vector3<f64> {
        Vector3::new(self.u[3 * node], self.u[3 * node + 1], self.u[3 * node + 2])
    }

    pub fn velocity(&self, node: usize) -> Vector3<f64> {
        Vector3::new(self.v[3 * node], self.v[3 * node + 1], self.v[3 * node + 2])
    }

    /// Current nodal positions, flat.
    pub fn positions(&self, mesh: &Mesh) -> Vec<f64> {
        let mut x = self.u.clone();
        for (i, p) in mesh.nodes.iter().enumerate() {
            for k in 0..3 {
                x[3 * i + k] += p[k];
            }
        }
        x
    }

    pub fn max_displacement(&self) -> f64 {
        self.u.chunks_exact(3).map(|c| (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrescribedDof {
    /// `3 * node + component`
    pub dof: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryConditions {
    pub prescribed: Vec<PrescribedDof>,
    pub body_accel: Vector3<f64>,
    pub tractions: Vec<Traction>,
}

impl BoundaryConditions {
    /// Fixes all three components of each node at zero displacement.
    pub fn clamp_nodes(nodes: impl IntoIterator<Item = usize>) -> Self {
        let prescribed =
            nodes.into_iter().flat_map(|n| (0..3).map(move |k| PrescribedDof { dof: 3 * n + k, value: 0.0 })).collect();
        Self { prescribed, ..Default::default() }
    }

    pub fn with_body_accel(mut self, g: Vector3<f64>) -> Self {
        self.body_accel = g;
        self
    }
}

/// Supplies constraint reactions (the G^T lambda term) each step. The force
/// acting on the body is the negative of what is written to `out`.
pub trait ForceHook {
    /// `x` are current positions, `v` the lagging mid-step velocities, `t`
    /// the time of the positions. `out` arrives zeroed.
    fn reaction(&mut self, t: f64, dt: f64, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<(), FemError>;
}

/// Hook for runs without contact.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoContact;

impl ForceHook for NoContact {
    fn reaction(&mut self, _: f64, _: f64, _: &[f64], _: &[f64], _: &mut [f64]) -> Result<(), FemError> {
        Ok(())
    }
}

pub fn kinetic_energy(mass: &[f64], v: &[f64]) -> f64 {
    mass.iter()
        .zip(v.chunks_exact(3))
        .map(|(m, c)| 0.5 * m * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]))
        .sum()
}

/// One central-difference update with mass-proportional damping `c = damping * M`:
///
/// `v+ = ((1 - c dt/2) v- + dt M^-1 (f_ext - f_int - f_contact)) / (1 + c dt/2)`, `u += dt v+`.
///
/// Prescribed dofs are overwritten afterwards.
#[allow(clippy::too_many_arguments)]
pub fn step_explicit(
    state: &mut SimState,
    mass: &[f64],
    damping: &[f64],
    f_ext: &[f64],
    f_int: &[f64],
    f_contact: &[f64],
    dt: f64,
    constraints: &[PrescribedDof],
) -> Result<(), FemError> {
    let n = state.u.len();
    if [mass.len() * 3, damping.len() * 3, f_ext.len(), f_int.len(), f_contact.len(), state.v.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(FemError::InvalidArgument("state and force vector lengths differ".into()));
    }
    for i in 0..n {
        let node = i / 3;
        let m = mass[node];
        if m <= 0.0 {
            state.a[i] = 0.0;
            continue;
        }
        let c = 0.5 * damping[node] * dt;
        let accel = (f_ext[i] - f_int[i] - f_contact[i]) / m;
        let v_old = state.v[i];
        let v_new = ((1.0 - c) * v_old + dt * accel) / (1.0 + c);
        state.a[i] = (v_new - v_old) / dt;
        state.v[i] = v_new;
        state.u[i] += dt * v_new;
    }
    for p in constraints {
        let u_prev = state.u[p.dof] - dt * state.v[p.dof];
        state.u[p.dof] = p.value;
        state.v[p.dof] = (p.value - u_prev) / dt;
        state.a[p.dof] = 0.0;
    }
    state.t += dt;
    state.step += 1;
    if state.u.iter().chain(&state.v).any(|x| !x.is_finite()) {
        return Err(FemError::Divergence { step: state.step });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiStaticOptions {
    /// Converged when kinetic energy < ratio * strain energy.
    pub energy_ratio: f64,
    /// The kinetic energy tested is the maximum over this many trailing
    /// steps, so an oscillation passing through a turning point does not count.
    pub window: usize,
}

impl Default for QuasiStaticOptions {
    fn default() -> Self {
        Self { energy_ratio: 1e-4, window: 100 }
    }
}

/// Energies after a step: kinetic from the new mid-step velocity, strain at the
/// displacement the forces were evaluated on.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    pub time: f64,
    pub kinetic: f64,
    pub strain: f64,
}

impl StepReport {
    pub fn ratio(&self) -> f64 {
        if self.strain > 0.0 {
            self.kinetic / self.strain
        } else if self.kinetic > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// Stepping driver bound to one discretization and load case. Not reentrant.
#[derive(Debug, Clone)]
pub struct ExplicitSolver {
    disc: Discretization,
    bcs: BoundaryConditions,
    f_ext: Vec<f64>,
    f_int: Vec<f64>,
    f_contact: Vec<f64>,
    x: Vec<f64>,
    pub dt: f64,
    pub options: QuasiStaticOptions,
    /// Energy samples, one every `trace_every` steps.
    pub trace: Vec<StepReport>,
    pub trace_every: usize,
}

impl ExplicitSolver {
    pub fn new(disc: Discretization, bcs: BoundaryConditions, safety: f64) -> Result<Self, FemError> {
        let dt = disc.stable_timestep(safety)?;
        let f_ext = disc.external_forces(bcs.body_accel, &bcs.tractions)?;
        let n = disc.dof_count();
        if let Some(p) = bcs.prescribed.iter().find(|p| p.dof >= n) {
            return Err(FemError::InvalidArgument(format!("prescribed dof {} out of range", p.dof)));
        }
        Ok(Self {
            disc,
            bcs,
            f_ext,
            f_int: vec![0.0; n],
            f_contact: vec![0.0; n],
            x: vec![0.0; n],
            dt,
            options: QuasiStaticOptions::default(),
            trace: Vec::new(),
            trace_every: 10,
        })
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn boundary_conditions(&self) -> &BoundaryConditions {
        &self.bcs
    }

    pub fn initial_state(&self) -> SimState {
        let mut s = SimState::at_rest(self.disc.mesh().node_count());
        for p in &self.bcs.prescribed {
            s.u[p.dof] = p.value;
        }
        s
    }

    /// Contact reaction from the most recent step.
    pub fn last_reaction(&self) -> &[f64] {
        &self.f_contact
    }

    pub fn step(&mut self, state: &mut SimState, hook: &mut dyn ForceHook) -> Result<StepReport, FemError> {
        let strain = self.disc.internal_forces_into(&state.u, &mut self.f_int, true)?;
        let mesh = self.disc.mesh();
        for (i, p) in mesh.nodes.iter().enumerate() {
            for k in 0..3 {
                self.x[3 * i + k] = p[k] + state.u[3 * i + k];
            }
        }
        self.f_contact.iter_mut().for_each(|f| *f = 0.0);
        hook.reaction(state.t, self.dt, &self.x, &state.v, &mut self.f_contact)?;
        step_explicit(
            state,
            self.disc.mass(),
            self.disc.damping(),
            &self.f_ext,
            &self.f_int,
            &self.f_contact,
            self.dt,
            &self.bcs.prescribed,
        )?;
        let report = StepReport { time: state.t, kinetic: kinetic_energy(self.disc.mass(), &state.v), strain };
        if self.trace_every > 0 && state.step % self.trace_every == 0 {
            self.trace.push(report);
        }
        Ok(report)
    }

    /// Steps until `state.t` reaches `until`.
    pub fn advance(&mut self, state: &mut SimState, hook: &mut dyn ForceHook, until: f64) -> Result<StepReport, FemError> {
        let mut last = StepReport { time: state.t, ..Default::default() };
        while state.t < until - 1e-12 * self.dt {
            last = self.step(state, hook)?;
        }
        Ok(last)
    }

    /// Dynamic relaxation: steps until the trailing-window kinetic energy
    /// drops below `energy_ratio` times the strain energy, or nothing moves
    /// and nothing is strained.
    pub fn relax(&mut self, state: &mut SimState, hook: &mut dyn ForceHook, max_time: f64) -> Result<StepReport, FemError> {
        let t_end = state.t + max_time;
        let window = self.options.window.max(1);
        let mut recent: VecDeque<f64> = VecDeque::with_capacity(window + 1);
        loop {
            let report = self.step(state, hook)?;
            if report.kinetic == 0.0 && report.strain == 0.0 {
                return Ok(report);
            }
            recent.push_back(report.kinetic);
            if recent.len() > window {
                recent.pop_front();
            }
            let ke_max = recent.iter().copied().fold(0.0, f64::max);
            if recent.len() == window && report.strain > 0.0 && ke_max < self.options.energy_ratio * report.strain {
                return Ok(report);
            }
            if state.t >= t_end {
                return Err(FemError::NonConvergence { time: state.t, ratio: report.ratio() });
            }
        }
    }
}

/// Dynamic relaxation of an unloaded-at-rest body under `bcs`, default
/// safety 0.9 and no contact.
pub fn run_to_quasistatic(
    mesh: &Mesh,
    materials: &[Material],
    bcs: &BoundaryConditions,
    max_time: f64,
) -> Result<SimState, FemError> {
    let disc = Discretization::new(mesh.clone(), materials)?;
    let mut solver = ExplicitSolver::new(disc, bcs.clone(), 0.9)?;
    let mut state = solver.initial_state();
    solver.relax(&mut state, &mut NoContact, max_time)?;
    Ok(state)
}
