//! Experiment harness for `rkhs-invlab-core`: study configs, the Monte-Carlo
//! runner, report files and the command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod export;
pub mod report;
pub mod verify;

pub use config::{StudyConfig, StudyKind};
pub use error::{Error, Result};
pub use experiments::run_study;
pub use report::{read_report, write_report, ReportFormat, StudyReport};
