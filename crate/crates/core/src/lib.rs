//! Desk-scale simulations of quantum-foundations thought experiments.
//!
//! - [`qstate`]: exact finite-dimensional states, GHZ parities, hidden-value search.
//! - [`wavepacket`]: grid wave functions, free propagation, packet beam splitters.
//! - [`bohm`]: guidance velocities, conditional wave functions, trajectory ensembles.
//! - [`grw`]: spontaneous-localization hits and tail factors.
//! - [`mwi`]: world branches, measures of existence, equal-measure refinement.
//! - [`scenarios`]: end-to-end experiment reproductions.
//! - [`cli`]: config-driven scenario runner behind the `qfound` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bohm;
pub mod cli;
pub mod error;
pub mod grw;
pub mod mwi;
pub mod qstate;
pub mod rng;
pub mod scenarios;
pub mod wavepacket;

pub use error::{Error, ErrorKind, Result};
