//! Differentially private Wasserstein barycenters.
//!
//! The crate is `no_std` with `alloc`. All randomness flows through caller
//! supplied seeds or RNGs, and floating point math goes through `libm`, so a
//! given seed produces bit-identical output on every target.
//!
//! Layout:
//! - [`measure`]: discrete measures and collections of them.
//! - [`ot`]: exact and entropic optimal transport.
//! - [`barycenter`]: free-support barycenters and barycenter solutions.
//! - [`dp`]: privacy budgets, noise mechanisms and the composition ledger.
//! - [`coreset`]: private hierarchical-histogram coresets.
//! - [`jl`]: Johnson-Lindenstrauss projections.
//! - [`pipelines`]: the end-to-end private barycenter algorithms.
//! - [`region`], [`synth`], [`metrics`]: data generation and evaluation.

#![no_std]

extern crate alloc;

pub mod barycenter;
pub mod coreset;
pub mod dp;
mod error;
pub mod jl;
pub(crate) mod math;
pub mod measure;
pub mod metrics;
pub mod ot;
pub mod pipelines;
pub mod region;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use measure::{Dataset, DiscreteMeasure};
