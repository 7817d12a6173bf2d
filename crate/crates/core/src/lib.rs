//! Streaming vandalism detection for knowledge-base revision dumps.
//!
//! The pipeline: parse revision XML dumps together with meta/label CSV files
//! ([`corpus`]), turn each revision into family-tagged feature tokens
//! ([`features`]), map those to fixed-dimension sparse vectors via the hashing
//! trick ([`vectorize`]), train L1-regularized linear classifiers ([`learn`]),
//! evaluate with ranking metrics over time-based splits ([`eval`]), and score
//! revisions in real time over a socket ([`serve`]). Desk-scale corpora with
//! planted signal come from [`synth`]; [`pipeline`] wires the stages together.

pub mod corpus;
pub mod eval;
pub mod features;
pub mod learn;
pub mod pipeline;
pub mod serve;
pub mod synth;
pub mod vectorize;

pub use corpus::{Contributor, GeoMeta, RevisionRecord};
pub use eval::{EvalReport, SplitSpec};
pub use features::{Family, FeatureBag, ParsedComment};
pub use learn::{Dataset, LinearModel, LossKind, TrainConfig};
pub use vectorize::{SparseVector, Vocabulary};
