//! Neural machine translation with word, character and radical inputs.
//!
//! Chinese source words are embedded at three granularities: the word
//! itself, the sum of its characters, and the sum of the radicals of those
//! characters. The concatenation feeds a bidirectional GRU encoder and an
//! attention decoder. The crate also provides beam search, the BLEU, NIST,
//! CharacTER and hLEPOR metrics, and a harness that trains and compares the
//! five input settings.

pub mod composition;
pub mod data;
pub mod decode;
pub mod decomposition;
pub mod error;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod model;
pub mod real;

pub use decode::{beam_search, greedy, translate_corpus, Hypothesis, Translation};
pub use composition::{compose_batch, compose_token, input_dim, CompositionSetting, EmbeddingTables};
pub use decomposition::{DecompositionTable, WordDecomposition};
pub use error::{Error, Result};
pub use model::{ModelDims, ModelParams};
pub use real::Real;
