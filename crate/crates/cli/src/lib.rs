//! Scenario pipeline and output emitters over the microstate-entropy
//! engine, shared by the `msentropy` binary and the acceptance suite.

#![forbid(unsafe_code)]

pub mod output;
pub mod scenarios;
