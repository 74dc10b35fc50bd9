//! Fair bipartite matching: distributions over group-fair matchings that
//! meet probabilistic per-item fairness windows.
//!
//! The pipeline is: build an [`instance::Instance`], solve an LP relaxation
//! ([`lp`]), then turn the fractional point into a distribution over
//! integral matchings ([`decomp`], [`greedy`], [`gapprox`]). [`verify`]
//! audits the result independently.

pub mod bench;
pub mod datagen;
pub mod decomp;
pub mod ext;
pub mod gapprox;
pub mod greedy;
pub mod error;
pub mod flow;
pub mod instance;
pub mod lp;
pub mod numeric;
pub mod verify;

pub use error::{Error, Result};
