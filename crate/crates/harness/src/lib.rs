//! Experiment orchestration for the lossy-market toolkit: JSON specs in,
//! CSV and JSON results out, plus the two-level mobility case study.

pub mod case_study;
pub mod cli;
pub mod output;
pub mod schema;
