pub mod contact;
pub mod fem;
pub mod grasp;
pub mod mesh;
pub mod pipeline;
