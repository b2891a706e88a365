//! Text formats: structure documents and experiment configurations.

mod experiment;
mod lex;
mod structure_doc;

pub use experiment::{
    engine_is_count, mode_note, parse_experiment, serialize_experiment, EGridSpec, ExperimentConfig,
};
pub use lex::{ParseError, Span};
pub use structure_doc::{parse_structure, serialize_structure, StructureDoc};
