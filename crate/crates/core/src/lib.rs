//! Blackbird language matrices: generation of structured multiple-choice puzzles over
//! sentences, embedding of their sentences, and neural solvers that pick the answer.

pub mod checkpoint;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod lexicon;
pub mod model;
pub mod nn;
pub(crate) mod par;
pub mod pattern;
pub mod probe;
pub mod seed;
pub mod solver;
pub mod svg;
pub mod template;

pub use error::{Error, Result};
pub use model::{
    Answer, BlmInstance, Chunk, ChunkRole, ChunkSpec, ErrorLabel, PatternKey, Sentence, TaskId, Variation,
};
