//! Disruption indices over citation networks and multiverse regression
//! analysis of team-size effects.
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`]: loading, validation, sample filters and the author–paper panel.
//! - [`disruption`]: coupling profiles and the `DI_b` family under citation windows.
//! - [`regress`]: design matrices, least squares, within estimator, sandwich errors.
//! - [`multiverse`]: factorial universes, model SD, sign stability, influence.
//! - [`synth`]: synthetic growing citation networks with a planted team effect.
//! - [`oracle`]: slow independent re-derivations used by tests and `selftest`.
//! - [`selftest`]: seeded randomized comparisons against the oracles.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod disruption;
pub mod error;
pub mod multiverse;
pub mod oracle;
pub mod regress;
pub mod selftest;
pub mod synth;

pub use error::{Error, Result};

/// Version of the on-disk file schemas written by this crate.
pub const SCHEMA_VERSION: u32 = 1;
