//! Operational shell around `mimicguard-core`: the watermark registry, run
//! reports and the `mimicguard` command line.

pub mod cli;
pub mod registry;
pub mod report;
