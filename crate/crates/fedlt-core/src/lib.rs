//! Simulation core for federated learning on long-tailed data.
//!
//! The pipeline has three stages: construct a frozen sparse equiangular-tight-frame
//! classifier ([`ssec`]), train a shared backbone against it across heterogeneous
//! clients while auxiliary global and personal heads track class statistics
//! ([`federation`], [`model`]), then realign the trained heads by their column
//! norms ([`realign`]). [`datagen`] builds the synthetic long-tailed benchmark and
//! [`evalkit`] holds the metrics and diagnostic probes.
//!
//! Everything here is pure computation over `f64` matrices: no IO, no clocks, and
//! all randomness flows through [`numerics::RngStream`] so that a (seed, label)
//! pair fully determines every result. The crate is `no_std` (alloc required);
//! file formats and the CLI live in the companion `fedlt` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod datagen;
pub mod error;
pub mod evalkit;
pub mod federation;
pub mod model;
pub mod numerics;
pub mod realign;
pub mod ssec;

pub use error::{Error, Result};
