//! Microstate entropy for finite metric structures.
//!
//! This crate represents finite structures with function and state
//! symbols, enumerates or counts spaces of approximate morphisms
//! (microstates) into families of finite models, measures those spaces
//! with packing numbers, and assembles normalized entropy and entropy
//! dimension estimates. The built-in model families — measure algebras of
//! uniform finite probability spaces and symmetric groups with the
//! normalized Hamming metric — recover the Shannon/Boltzmann count, the
//! sofic-approximation counts of group theory, and their dynamical
//! extensions at desk scale.
//!
//! Everything before the logarithm is exact rational arithmetic; counts
//! are exact big integers.

#![forbid(unsafe_code)]

pub mod counting;
pub mod dsl;
pub mod entropy;
pub mod microstate;
pub mod packing;
pub mod perm;
pub mod rat;
pub mod sig;
pub mod structure;

pub use entropy::{EntropyEstimate, EntropyTable, Estimator, EstimatorConfig, Grids, ModelFamily};
pub use microstate::{Microstate, MicrostateMode, MicrostateSpec};
pub use rat::Rat;
pub use sig::{Signature, Term};
pub use structure::{FiniteStructure, SoficMap};
