//! Library side of the `lmx` command: input discovery, corpus evaluation,
//! round-trip audits and report formats.

pub mod audit;
pub mod eval;
pub mod inputs;
pub mod report;
