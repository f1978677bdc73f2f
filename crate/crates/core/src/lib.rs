//! Performance model for a quantum key distribution link that shares a single
//! fibre with classical DWDM channels.
//!
//! The crate covers the whole chain from classical channel powers to secret
//! key rate:
//!
//! - [`raman`]: forward and backward spontaneous Raman scatter into the
//!   quantum passband and the resulting click probabilities per gate.
//! - [`interference`]: DWDM crosstalk budgeting and four-wave-mixing checks
//!   for channel plans.
//! - [`keyrate`]: QBER, sifted rate and secret key rate for BB84 and SARG.
//! - [`montecarlo`]: gate-by-gate detection simulator used as an independent
//!   check of the closed-form QBER and sifted-rate expressions.
//! - [`scenario`]: length sweeps, 1310/1550 nm band comparison, presets and
//!   single-point calibration of the Raman cross-section.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod interference;
pub mod keyrate;
pub mod montecarlo;
pub mod profile;
pub mod raman;
pub mod scenario;
pub mod units;

pub use config::{
    BandScaling, ChannelPlan, ClassicalChannel, DetectorSpec, Direction, FibreSpec, FilterSpec,
    LinkConfig, LinkSetup, Protocol, ProtocolConfig, SCHEMA_VERSION,
};
pub use error::{Error, Result};
pub use keyrate::{link_budget, GateProbabilities, LinkBudget};
pub use profile::RamanProfile;
