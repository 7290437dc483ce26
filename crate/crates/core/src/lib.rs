//! Law-of-iterated-logarithm (LIL) analysis for the linear stochastic
//! Hamiltonian system
//!
//! ```text
//! d(X, Y) = [[0, B], [-B, 0]] (X, Y) dt + (α₁, α₂) dW
//! ```
//!
//! driven by a trace-class Q-Wiener process, together with its spectral
//! Galerkin / one-step full discretizations.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectrum`] – model definition (operator and noise spectra, presets).
//! * [`schemes`] – one-step methods `z ← A(h) z + √η b(h) δβ`, classification.
//! * [`compact`] – rotation angle θ, the α̂ coefficients and the closed-form
//!   solution of the one-step recursion.
//! * [`constants`] – closed-form LIL constants (ξ's, sup of φ), quadratic
//!   variations and the τ→0 preservation sweep.
//! * [`noise`] – counter-addressed Gaussian streams.
//! * [`sampler`] – exact and numerical trajectory engines.
//! * [`lilstat`] – ratio statistics, variance-growth classification and
//!   martingale checks.
//! * [`cli`] – the `shs-lil` command line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod compact;
pub mod constants;
pub mod error;
pub mod lilstat;
pub mod noise;
pub mod output;
pub mod sampler;
pub mod schemes;
pub mod spectrum;
pub mod stats;

pub use error::{Error, Result};
