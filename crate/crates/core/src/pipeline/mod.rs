//! Grasp-and-pull experiments coupling the rigid grasp engine to the
//! explicit FEM engine through hand trajectories.

mod fem_run;
mod strain;
mod sweep;
mod trajectory;

pub use fem_run::{
    detect_slip, pull_phase, run_indentation, run_pull, FemSetup, IndentedRun, PadLoad, PullOptions, PullResult,
    PullSample, SlipReport, SlipSample, Snapshot,
};
pub use strain::{element_strains, strain_report, StrainReport};
pub use sweep::{
    closed_by, fem_sweep, grip_tightness_sweep, pair_levels, write_skin_csv, write_summary, write_sweep_csv, Engine,
    Experiment, SweepOptions, SweepResult, SweepRow, SKIN_CSV_HEADER, SWEEP_CSV_HEADER,
};
pub use trajectory::{export_hand_trajectory, HandMotion, HandTrajectory, PullSpec, TrajectorySample, TrajectoryTiming};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::fem::{FemError, StepReport};
use crate::grasp::GraspError;
use crate::mesh::MeshError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Grasp(#[from] GraspError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    /// Numerical blow-up mid-run, with the energy samples taken so far.
    #[error("{source} (run stopped at step {step})")]
    Diverged {
        step: usize,
        #[source]
        source: FemError,
        trace: Vec<StepReport>,
    },
    #[error("contact: {0}")]
    Contact(String),
    #[error("pull still too fast after {attempts} attempts (kinetic/strain energy ratio {ratio:e})")]
    PullTooFast { ratio: f64, attempts: usize },
    #[error("{engine} engine failed at level {level}: {source}")]
    Level {
        engine: &'static str,
        level: usize,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Splits `lambda` into its component along the unit normal `n` and the
/// remainder: `(n n^T lambda, (I - n n^T) lambda)`.
pub fn project_contact_force(
    lambda: &Vector3<f64>,
    n: &Vector3<f64>,
) -> Result<(Vector3<f64>, Vector3<f64>), PipelineError> {
    if !((n.norm() - 1.0).abs() <= 1e-9) {
        return Err(PipelineError::InvalidArgument(format!("normal has length {}", n.norm())));
    }
    let nn: Matrix3<f64> = n * n.transpose();
    let f_n = nn * lambda;
    Ok((f_n, lambda - f_n))
}
