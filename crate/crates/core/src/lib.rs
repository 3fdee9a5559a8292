//! Power-consumption-aware downlink precoding for massive MIMO.
//!
//! The crate covers the whole chain needed to compare the conventional
//! zero-forcing precoder against precoders that minimize the power drawn by
//! the power amplifiers (PAs) and by the base station (BS):
//!
//! * [`model`]: PA and BS consumption models and power accounting.
//! * [`channel`]: user drops, path loss, SINR targets and channel draws.
//! * [`precoding`]: ZF, the fixed-point consumption-minimizing precoder and
//!   the closed-form single-user and line-of-sight special cases.
//! * [`asymptotic`]: large-subcarrier-count power predictions and the
//!   optimal number of active antennas.
//! * [`oracle`]: slow, independent solvers and statistical checks used as
//!   ground truth.
//! * [`config`] and [`experiment`]: the seeded Monte-Carlo harness behind the
//!   `energymimo` binary.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
mod linalg;
pub mod model;
pub mod oracle;
pub mod precoding;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex matrix type used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;

/// Watts from dBm.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Linear ratio from dB.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// dB from a linear ratio.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
