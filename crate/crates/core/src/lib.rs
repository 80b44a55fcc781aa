//! Bell-CHSH tests with photon-subtracted two-mode squeezed vacuum and
//! balanced homodyne detection.
//!
//! The Gaussian route ([`gaussian`], [`conditioning`], [`bell`]) computes the
//! heralded state and its sign-binned correlators in closed form. The
//! [`fock`] module recomputes the same quantities in a truncated photon-number
//! basis and [`mc`] simulates the pulsed event-ready protocol; both serve as
//! independent checks of the closed form.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bell;
pub mod conditioning;
pub mod config;
pub mod error;
pub mod figures;
pub mod fock;
pub mod gaussian;
pub mod mc;
pub mod output;
pub mod quadrature;
pub mod search;
pub mod validate;

pub use bell::{chsh, optimize_lambda, sweep, Angles, BellResult, ExperimentParams, SweepAxis};
pub use error::{Error, Result};
