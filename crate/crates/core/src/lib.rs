//! Adaptive FIR filters from the affine-projection family and a
//! system-identification benchmark built on them.
//!
//! The crate provides three update rules behind one configuration type:
//!
//! * LMS, the stochastic-gradient update `w += mu * e * x`;
//! * BNDR-LMS, the binormalized data-reusing update, which is the order-2
//!   member of the affine-projection family with no regularization;
//! * R-AP, the regularized affine projection of order `N`.
//!
//! [`sysid`] drives them against an unknown FIR plant, [`metrics`] turns the
//! resulting learning curves into comparable numbers and [`cli`] wires the
//! whole thing to JSON experiment files and CSV output.

pub mod algorithms;
pub mod cli;
pub mod config;
mod error;
pub mod linalg;
pub mod metrics;
pub mod selftest;
pub mod signal;
pub mod sysid;

pub use error::{Error, Result};
