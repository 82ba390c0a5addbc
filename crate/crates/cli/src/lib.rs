//! Orchestration for the `u1qec` binary: config files, resumable sweeps,
//! fits, collapses and plot tables.

pub mod commands;
pub mod config;
pub mod store;
pub mod verify;
