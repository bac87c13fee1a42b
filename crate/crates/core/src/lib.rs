//! Trajectory-based WiFi RSSI indoor localization.
//!
//! The crate covers the whole offline/online pipeline: fingerprint databases
//! (synthetic or UJIIndoorLoc), a recursive weighted-average RSSI filter,
//! random-walk training trajectories, from-scratch recurrent networks with
//! backpropagation through time, five input/output wirings over those
//! networks, classical baselines, and the evaluation sweeps used to compare
//! them.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod filter;
pub mod location;
pub mod nncore;
pub mod rng;
pub mod seqmodels;
pub mod trajgen;

pub use error::{Error, Result};
pub use location::Location;

pub use baselines::TrackLocalizer;
pub use config::ExperimentConfig;
pub use dataset::{
    Fingerprint, FingerprintDatabase, ReferencePoint, SyntheticEnvironment, TestTrack, TrackPoint,
};
pub use eval::ErrorReport;
pub use filter::FilterConfig;
pub use seqmodels::{CellType, ModelConfig, SequenceModel, Wiring};
pub use trajgen::{MotionModel, TransitionTable};
