//! Genre-driven, instance-level training-data selection for zero-shot
//! cross-lingual dependency parsing over Universal Dependencies treebanks.
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`]: CoNLL-U ingestion, the genre registry, subsampling and splits.
//! - [`embed`]: sentence embedding matrices, cosine geometry, a hashed fallback featurizer.
//! - [`ngrams`]: character n-gram vocabularies with document-frequency filters.
//! - [`cluster`]: per-treebank Gaussian mixtures and LDA.
//! - [`bootstrap`]: the weakly supervised sentence-level genre classifier.
//! - [`select`]: the selection strategies and manifests.
//! - [`analysis`]: genre bounds, attachment scores and significance tests.

pub mod analysis;
pub mod bootstrap;
pub mod cluster;
pub mod corpus;
pub mod embed;
mod error;
pub mod genre;
pub mod ngrams;
pub mod rng;
pub mod select;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use genre::{Genre, GenreSet};

pub use corpus::{Corpus, Sentence, Token, Treebank, TreebankMeta};
pub use embed::EmbeddingMatrix;
pub use select::{SelectionManifest, Strategy, TargetSpec};
