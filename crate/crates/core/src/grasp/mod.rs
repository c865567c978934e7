//! Rigid grasp engine: gripper kinematics, point contacts against rigid
//! object primitives, friction-cone grasp equilibrium and pull resistance.

mod closing;
mod equilibrium;
mod kinematics;
mod nnls;
mod objects;

use thiserror::Error;

pub use closing::{close_gripper, close_to_touch, minimal_squeeze, rigid_pull_test, write_grasp_csv, CloseParams, GraspState, GRASP_CSV_HEADER};
pub use equilibrium::{
    friction_angle, grasp_equilibrium, in_friction_cone, solve_wrench, EquilibriumSolution, PYRAMID_SIDES,
};
pub use kinematics::{three_finger_gripper, Gripper, Joint, JointKind, Link, PadShape, Pose, ThreeFingerOptions};
pub use nnls::nnls;
pub use objects::{find_contact_points, pad_distance, RigidContact, RigidObject, DEEP_PENETRATION, TOUCH_TOLERANCE};

#[derive(Debug, Error)]
pub enum GraspError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
