//! Explicit dynamic finite elements on trilinear hexahedra.
//!
//! Total Lagrangian: internal forces are integrated over the reference
//! configuration with the first Piola-Kirchhoff stress and full 2x2x2 Gauss
//! quadrature. Mass is row-sum lumped, time integration is central difference
//! with mass-proportional damping.

mod discretization;
mod integrate;
mod material;
mod strain;

use thiserror::Error;

pub use discretization::{
    external_forces, internal_forces, lumped_mass, stable_timestep, Discretization, Traction,
};
pub use integrate::{
    kinetic_energy, run_to_quasistatic, step_explicit, BoundaryConditions, ExplicitSolver, ForceHook,
    NoContact, PrescribedDof, QuasiStaticOptions, SimState, StepReport,
};
pub use material::{first_piola, strain_energy_density, stress, ConstitutiveModel, Material};
pub use strain::{deformation_gradient, principal_strains, StrainResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("element inversion (element {element:?}, det F = {det:e})")]
    ElementInversion { element: Option<usize>, det: f64 },
    #[error("divergence at step {step}: non-finite state")]
    Divergence { step: usize },
    #[error("no quasi-static state by t = {time} s (kinetic/internal energy ratio {ratio:e})")]
    NonConvergence { time: f64, ratio: f64 },
}

impl FemError {
    pub(crate) fn at_element(self, e: usize) -> Self {
        match self {
            FemError::ElementInversion { det, .. } => FemError::ElementInversion { element: Some(e), det },
            other => other,
        }
    }
}

/// Element-loop execution mode. Nodal assembly always runs in element order,
/// so both modes give bit-identical results; `Sequential` also keeps the
/// element kernels on the calling thread.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Parallelism {
    #[default]
    Sequential,
    Parallel,
}
