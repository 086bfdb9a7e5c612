//! Literature triage for drug-induced liver injury: text preparation,
//! vectorization, linear and forest classifiers, stacking, evaluation,
//! interpretation and hyperparameter search.
//!
//! Everything numeric is generic over [`Float`] (`f32` or `f64`); the
//! aliases below fix the usual double-precision instantiations.

pub mod corpus;
pub mod embeddings;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod featurize;
pub mod fingerprint;
pub mod float;
pub mod forest;
pub mod interpret;
pub mod linear;
pub mod metrics;
pub mod synthetic;
pub mod textprep;
pub mod tuning;
pub mod vectorize;

pub use corpus::{CorpusSplit, DocumentRecord, SplitFractions};
pub use error::{Error, Result};
pub use featurize::{FeatureContext, Resources, VectorizerKind};
pub use float::Float;
pub use linear::{ClassWeight, LrConfig};
pub use textprep::PrepConfig;

pub type SparseVector64 = features::SparseVector<f64>;
pub type DenseVector64 = features::DenseVector<f64>;
pub type FeatureVec64 = features::FeatureVec<f64>;
pub type LinearModel64 = linear::FittedLinearModel<f64>;
pub type LinearModel32 = linear::FittedLinearModel<f32>;
pub type Forest64 = forest::FittedForest<f64>;
pub type Ensemble64 = ensemble::EnsembleModel<f64>;
pub type EmbeddingTable64 = embeddings::EmbeddingTable<f64>;
pub type EmbeddingTable32 = embeddings::EmbeddingTable<f32>;
pub type EvalReport64 = metrics::EvalReport<f64>;
