//! Scenario files, critical-scenario generation, batch evaluation, trajectory
//! export and runtime profiling.

pub mod batch;
pub mod export;
pub mod generator;
pub mod profile;
pub mod scenario_file;
