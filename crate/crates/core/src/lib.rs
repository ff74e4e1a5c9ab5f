//! Occupational gender bias in machine translation: measurement on
//! WinoMT-style corpora, word-attribution diagnostics, and few-shot
//! mitigation by attribution-guided exemplar selection.

pub mod attribution;
pub mod client;
pub mod corpus;
pub mod debias;
pub mod error;
pub mod gnt;
pub mod lexicon;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

pub use attribution::{AttributionTensor, AttributionTriple, WordAttributionMatrix};
pub use corpus::{Corpus, Gender, Stereotype, WinoMtInstance};
pub use debias::{ExemplarSet, NtPolicy};
pub use lexicon::{GenderLexicon, PredictedGender, ProfessionMatch};
pub use metrics::{BiasReport, EvaluationRecord};
pub use stats::{BootstrapConfig, BootstrapMetric};
