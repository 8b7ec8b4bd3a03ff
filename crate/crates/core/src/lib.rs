//! Energy-based models for co-occurrence data.
//!
//! Records are sets of items that occur together (a basket, a friend list,
//! a user's liked movies). Every model here predicts a held-out item from
//! the rest of its record through a conditional probability
//! `p(t | context) = sigmoid(score(t, context))`, and is trained by
//! maximizing the pseudo-likelihood of the training records with negative
//! sampling. Four model families are provided:
//!
//! - L1: per-item bias, items independent;
//! - FVBM: bias plus pairwise weights;
//! - LBL: log-bilinear item embeddings;
//! - DEM: deep embedding model, the FVBM terms plus linear readouts of a
//!   stack of sigmoid layers fed by the context.
//!
//! [`eval`] implements the Top@K missing-item protocol and [`baselines`] the
//! co-occurrence heuristics it is compared against.

pub mod baselines;
mod codec;
pub mod corpus;
pub mod corpus_file;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod rng;
pub mod scorers;
pub mod synthetic;
pub mod training;

pub use corpus::{Corpus, Dataset, ItemId, ItemSet, MaskedRecord, Vocabulary};
pub use error::{Error, Result};
pub use scorers::{DemParams, Model, Scorer};
pub use training::{Hyperparams, ModelKind};
