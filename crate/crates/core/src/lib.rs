//! Parametric CSI feedback for mmWave massive MIMO downlinks.
//!
//! The crate models the full feedback loop of a frequency-division duplex
//! massive MIMO system in which the user equipment feeds back a handful of
//! geometric channel parameters (angle of departure, path delay, path loss,
//! path phase) instead of the raw channel matrix:
//!
//! - [`channel`]: geometric multipath channel synthesis and UE mobility
//! - [`quantizer`]: uniform per-parameter codebooks and payload packing
//! - [`allocation`]: distortion-driven bit allocation across the four
//!   parameter families
//! - [`perturbation`]: analytic channel Jacobians and Monte Carlo
//!   distortion estimates backing the allocation formulas
//! - [`estimator`]: attention-based parameter estimator/decoder with plain
//!   SGD training, plus oracle and persistence baselines
//! - [`metrics`], [`link`], [`scenario`]: reconstruction metrics, QPSK link
//!   simulation, and end-to-end scenario runs with CSV/JSON output
//!
//! Everything is deterministic under a fixed `rng_seed`.

pub mod allocation;
pub mod channel;
pub mod config;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod link;
pub mod metrics;
pub mod perturbation;
pub mod quantizer;
pub mod scenario;

pub use channel::{ChannelMatrix, ParametricCsi, PathParams, UeState};
pub use config::ScenarioConfig;
pub use error::{Error, Result};
pub use quantizer::{BitAllocation, Codebooks, FeedbackPayload};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
