//! Experiment driver for the `ucfem` library, exposed as a thin library so
//! the argument, config and command layers are testable without spawning the
//! binary.

pub mod cli;
pub mod commands;
pub mod config;
