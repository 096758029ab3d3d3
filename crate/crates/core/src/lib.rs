//! Evaluation and reward engine for video captioning.
//!
//! The crate scores generated captions with CIDEr-D, BLEU-4, ROUGE-L and
//! METEOR-lite, turns those scores into self-critical (greedy baseline)
//! advantages for policy-gradient training, and implements the frame-token
//! fusion arithmetic used to feed multi-frame video into an image encoder.
//!
//! ```
//! use std::collections::BTreeMap;
//! use capforge::metrics::evaluate;
//!
//! let mut candidates = BTreeMap::new();
//! candidates.insert("v1".to_string(), "a man is playing a guitar".to_string());
//! candidates.insert("v2".to_string(), "a dog runs on the beach".to_string());
//! let mut refs = BTreeMap::new();
//! refs.insert("v1".to_string(), vec!["a man is playing a guitar".to_string()]);
//! refs.insert("v2".to_string(), vec!["a dog runs on the beach".to_string()]);
//!
//! let report = evaluate(&candidates, &refs, 1).unwrap();
//! assert!((report.corpus_cider - 10.0).abs() < 1e-12);
//! ```

pub mod cli;
pub mod dataio;
mod error;
pub mod fusion;
pub mod metrics;
pub mod ngram;
pub mod scst;
pub mod text_norm;

pub use error::{Error, Result};
pub use ngram::{CorpusStats, NgramCounts};
pub use text_norm::{detokenize, tokenize, TokenSequence};
