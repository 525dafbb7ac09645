//! Joint cross-domain embedding projection for sentiment transfer.
//!
//! Two mono-domain embedding spaces are mapped into a shared space by a pair
//! of linear projections while a softmax classifier is trained on the
//! projected source sentences. At inference time, target-domain sentences go
//! through the target projection and the same classifier, so no target labels
//! are ever needed.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`corpus`]: tokenization, corpus files, n-grams, term distributions.
//! - [`embeddings`]: plain-text vector files, OOV vectors, sentence averaging.
//! - [`lexicon`]: projection lexicon builders (frequency, sentiment subset,
//!   mutual-information pivots).
//! - [`blse`]: the joint model, its losses and gradients, training and
//!   target-domain classification.
//! - [`eval`]: classification metrics and corpus divergence.
//! - [`baseline`]: the non-adaptive bag-of-words linear classifier.
//! - [`synth`]: a seeded synthetic two-domain benchmark.

pub mod baseline;
pub mod blse;
pub mod corpus;
pub mod embeddings;
mod error;
pub mod eval;
pub mod lexicon;
pub mod synth;

pub use error::{Error, Result};
