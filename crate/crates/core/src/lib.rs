//! Bit-error probability engine for binary thermal-noise communication.
//!
//! A transmitter toggles between two resistors so that each bit is carried by
//! the variance of complex Gaussian noise; the receiver thresholds the sample
//! variance of `N` samples. This crate provides
//!
//! * special functions and quadrature rules ([`kernels`]),
//! * the system model and detection thresholds ([`system`]),
//! * exact, quadrature-averaged, asymptotic and approximate error
//!   probabilities ([`bep`]),
//! * a reproducible, parallel Monte Carlo simulator ([`mc`]),
//! * parameter sweeps, CSV output and a self-test ([`sweep`], [`selftest`]).

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bep;
pub mod config;
pub mod error;
pub mod exec;
pub mod kernels;
pub mod mc;
pub mod selftest;
pub mod sweep;
pub mod system;

pub use bep::{
    bep_approx_qfunction, bep_asymptotic, bep_conditional, bep_rician_adaptive, bep_rician_gl,
    BepEstimate, BepMethod,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use mc::{estimate_bep, McResult, SamplePath, TrialConfig};
pub use system::{
    optimal_threshold, received_variances, resolve_threshold, suboptimal_threshold, ChannelModel,
    SystemParams, ThresholdRule,
};
