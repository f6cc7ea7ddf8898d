//! Core of the privacy-utility trade-off workbench.
//!
//! A dataset is evaluated over many attribute subsets ("partitions") of a
//! chosen size. Each partition is classified under k-fold cross-validation
//! and scored, so a practitioner can see how much utility survives when
//! fewer attributes are kept.
//!
//! The modules follow the pipeline order: [`dataset`] ingestion and cleaning,
//! [`putmodel`] parameters, [`genset`] partition generation, [`learners`] and
//! [`metrics`] per partition, and [`engine`] orchestration with checkpoints.
//! [`tools`] holds the verifier, recovery and autopilot helpers.

pub mod dataset;
pub mod digest;
pub mod engine;
pub mod genset;
pub mod learners;
pub mod metrics;
pub mod putmodel;
pub mod seed;
pub mod tools;

mod decimal;
mod error;

pub use dataset::{AttributeKind, AttributeMeta, Cell, Dataset, Row};
pub use error::{Error, Result};
pub use putmodel::{AttributeSet, GenerationMethod, PutConfig, SizeSpec};
