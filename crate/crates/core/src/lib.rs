//! Factorization machines over token sequences for binary sentiment
//! classification.
//!
//! Five model kinds share one parameter layout and training loop:
//! bag-of-words logistic regression, a hashed explicit pairwise model
//! (Poly2), the classic factorization machine (FM), a contextual FM that only
//! scores word pairs inside a forward window of `t` tokens (CFM), and a
//! position-aware FM whose word vectors are additionally indexed by the
//! pair's token distance (PFM).

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod inspect;
pub mod model;
pub mod model_file;
pub mod rng;
pub mod synthetic;
pub mod trainer;

pub use corpus::{Label, LabeledDoc, SplitSpec, Vocabulary};
pub use error::{Error, Result};
pub use model::{Logit, ModelKind, SwiModel};
pub use trainer::TrainConfig;
