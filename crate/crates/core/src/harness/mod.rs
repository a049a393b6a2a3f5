//! Experiment orchestration: configs, runs, reports, and figures.

pub mod config;
pub mod report;
pub mod run;
pub mod svg;

use thiserror::Error;

use crate::bounds::{BoundError, RegimeFlag};
use crate::diffeo::DiffeoError;
use crate::geom::GeomError;
use crate::medial::MedialError;
use crate::projection::ProjectionError;

pub use config::{ExperimentConfig, Mode, Preset};
pub use run::{
    run_demo_unbounded, run_oracle_compare, run_scaling, run_sweep, run_verify, RunRecord, Verdict,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("input error: {0}")]
    Input(String),
    #[error("out of regime: {0} violated")]
    Regime(RegimeFlag),
    #[error("medial cloud is empty")]
    NoAxis,
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Diffeo(#[from] DiffeoError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl From<BoundError> for HarnessError {
    fn from(e: BoundError) -> Self {
        match e {
            BoundError::OutOfRegime(flag) => HarnessError::Regime(flag),
            BoundError::NegativeRadicand(_) => HarnessError::Regime(RegimeFlag::Eps2BelowOne),
        }
    }
}

impl From<MedialError> for HarnessError {
    fn from(e: MedialError) -> Self {
        match e {
            MedialError::NoAxis => HarnessError::NoAxis,
            MedialError::Projection(p) => HarnessError::Projection(p),
        }
    }
}

/// Process exit codes of the command line tool.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const FAIL: i32 = 1;
    pub const REGIME: i32 = 2;
    pub const INPUT: i32 = 3;
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Regime(_)
            | HarnessError::Diffeo(DiffeoError::OutOfRegime { .. })
            | HarnessError::Diffeo(DiffeoError::NotContraction { .. }) => exit::REGIME,
            HarnessError::Diffeo(DiffeoError::ConstantBreach { .. }) => exit::FAIL,
            _ => exit::INPUT,
        }
    }
}
