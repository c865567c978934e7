use std::fmt;

use softgrasp::fem::FemError;
use softgrasp::grasp::GraspError;
use softgrasp::mesh::MeshError;
use softgrasp::pipeline::PipelineError;

/// Failure of one command, grouped by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent configuration (exit 2).
    Config(String),
    /// Refused or failed filesystem access (exit 3).
    Filesystem(String),
    /// A simulation or solve failed (exit 4).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Filesystem(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    /// Classifies a library error raised during `stage`.
    pub fn from_pipeline(stage: &str, e: PipelineError) -> Self {
        let msg = format!("{stage}: {e}");
        match e {
            PipelineError::InvalidArgument(_) | PipelineError::Contact(_) => CliError::Config(msg),
            PipelineError::Grasp(g) => Self::from_grasp(stage, g),
            PipelineError::Mesh(m) => Self::from_mesh(stage, m),
            PipelineError::Io(_) => CliError::Filesystem(msg),
            PipelineError::Fem(FemError::Configuration(_) | FemError::InvalidArgument(_)) => CliError::Config(msg),
            PipelineError::Level { ref source, .. }
                if matches!(**source, PipelineError::InvalidArgument(_) | PipelineError::Contact(_)) =>
            {
                CliError::Config(msg)
            }
            _ => CliError::Numerical(msg),
        }
    }

    pub fn from_grasp(stage: &str, e: GraspError) -> Self {
        let msg = format!("{stage}: {e}");
        match e {
            GraspError::Io(_) => CliError::Filesystem(msg),
            _ => CliError::Config(msg),
        }
    }

    pub fn from_mesh(stage: &str, e: MeshError) -> Self {
        let msg = format!("{stage}: {e}");
        match e {
            MeshError::Io(_) => CliError::Filesystem(msg),
            _ => CliError::Config(msg),
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Filesystem(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Filesystem(m) => write!(f, "filesystem: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
