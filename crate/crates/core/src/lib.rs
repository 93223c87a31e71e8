//! Vulnerability-report tracking: a positional keyword index over imported
//! reports, GloVe-tuned keyword embeddings, topic expansion by embedding
//! similarity, tf-idf retrieval and trend/spike analysis.

pub mod corpus;
pub mod embeddings;
pub mod engine;
pub mod error;
pub mod index;
pub mod store;
pub mod text;
pub mod topics;
pub mod trend;

pub use corpus::{CorpusStats, CorpusStore, Document};
pub use embeddings::{EmbeddingTable, EmbeddingVector, GloveConfig, SimilarityMeasure, DIMENSION};
pub use engine::{Engine, EngineConfig};
pub use error::{Error, Result};
pub use index::{CooccurrenceTable, InvertedIndex};
pub use text::{CorrectionMap, KeywordDictionary, KeywordKind, Token};
pub use topics::{ExpansionCandidate, RankedResult, ResultOrder, Topic};
pub use trend::{Granularity, SpikeConfig, TrendSeries};
