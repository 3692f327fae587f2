pub mod error;
pub mod harness;
mod linalg;
pub mod movement_primitives;
pub mod optimizer;
pub mod reward;
pub mod simulator;
pub mod skill_library;
