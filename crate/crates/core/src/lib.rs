//! Kinetic Monte Carlo with operator splitting over lattice decompositions,
//! with exact small-lattice references and leading-order estimators for the
//! entropy production the splitting introduces.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod kmc;
pub mod lattice;
pub mod models;
pub mod oracle;
pub mod splitting;

pub use config::{ExperimentConfig, Mode};
pub use error::{Error, Result};
pub use estimators::{CoefficientEstimator, EprReport, Estimate};
pub use exec::Execution;
pub use kmc::KmcEngine;
pub use lattice::{Decomposition, DecompositionKind, GroupId, Lattice, Site, SpinConfiguration};
pub use models::{AdsorptionDesorptionParams, DiffusionParams, Move, RateModel};
pub use splitting::{SchemeKind, SchemeSpec, SkeletonSample};
