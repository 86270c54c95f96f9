//! Oracles, instance generators, reports and the drivers behind the CLI.

pub mod generators;
pub mod oracle;
pub mod report;
pub mod runner;
pub mod selftest;
