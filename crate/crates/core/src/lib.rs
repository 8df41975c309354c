//! Backtrack retransmission (BRQ): incremental redundancy driven by delayed
//! channel state feedback over an i.i.d. block-fading link.
//!
//! The crate is split into the pieces a link study needs:
//!
//! * [`channel`]: SNR distributions, sampling and the capacity arithmetic.
//! * [`analytics`]: closed-form average rates, delay and baselines,
//!   evaluated by adaptive quadrature.
//! * [`quantizer`]: finite-feedback encoding of the per-block success mask
//!   and quantized SNRs.
//! * [`protocol`]: the transmitter/receiver state machines with backtrack
//!   chain decoding, for full and quantized feedback.
//! * [`engine`]: seeded replications, statistics and parameter sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod channel;
pub mod engine;
mod error;
pub mod protocol;
pub mod quantizer;

pub use error::{BrqError, Result};
