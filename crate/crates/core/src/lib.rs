//! Scene-interaction planning and kinematic execution for human-object interaction,
//! with the matching evaluation metrics and motion-curation filters.

pub mod cli;
pub mod collide;
pub mod error;
pub mod executor;
pub mod fixtures;
pub mod metrics;
pub mod motionproc;
pub mod pathfind;
pub mod planner;
pub mod scene;
pub mod traj;

pub use error::{Error, Result};
