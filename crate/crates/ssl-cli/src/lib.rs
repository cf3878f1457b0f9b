//! Experiment plumbing around `ssl-core`: config files, the experiment
//! registry, CSV/manifest reports, and the verification suites.

pub mod config;
pub mod experiments;
pub mod report;
pub mod verify;
