//! Robust tail-index estimation with the optimal trimmed Hill estimator.
//!
//! The crate covers samplers for heavy-tailed models and contamination
//! schemes ([`models`]), the trimmed Hill family ([`estimators`]), sequential
//! selection of the number of outliers ([`ewst`]), joint selection of the
//! tail size ([`kselect`]) and a Monte Carlo lab ([`simlab`]).

pub mod error;
pub mod estimators;
pub mod ewst;
pub mod cli;
pub mod gof;
pub mod io;
pub mod kselect;
pub mod manifest;
pub mod models;
pub mod numeric;
pub mod sample;
pub mod seed;
pub mod simlab;

pub use error::{Result, TailError};
pub use estimators::{hill, trim_path, trimmed_hill, TailEstimate, TrimPath};
pub use ewst::{select_k0, EwstConfig, EwstOutcome};
pub use kselect::{joint_select, KSelectConfig, KSelectResult};
pub use models::{ContaminationSpec, ModelSpec};
pub use sample::OrderedSample;
pub use seed::SeedSpec;
