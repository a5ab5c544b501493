//! Experiment harness for the trace-distance estimation simulator:
//! acceptance criteria, seed sweeps, and scaling studies behind the
//! `tdsim` command-line interface.

pub mod accept;
pub mod sweep;
