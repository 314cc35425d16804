//! Knowledge-graph embeddings whose parameters are constrained so that the
//! learned scores respect logical rules.
//!
//! The crate is organised around the training pipeline:
//!
//! - [`kg`]: graph data model, rule language, forward-chaining closure,
//!   synthetic tree datasets and negative sampling.
//! - [`scoring`]: composition and score functions for the supported models
//!   and the parameter store.
//! - [`constraints`]: Euclidean projections and the rule-to-constraint
//!   dispatch used after every gradient step.
//! - [`training`]: BPR loss and gradients, projected SGD, and the squared-loss
//!   bilinear trainer used by the transitivity simulation.
//! - [`theory`]: numerical checks showing that asymmetric bilinear forms
//!   cannot be transitive.
//! - [`evaluation`]: edge accuracy, fact ranking metrics, link prediction and
//!   the deduction-puzzle protocol.

pub mod constraints;
pub mod error;
pub mod evaluation;
pub mod kg;
pub mod rng;
pub mod scoring;
pub mod theory;
pub mod training;

pub use error::{Error, Result};
pub use kg::{Fact, KnowledgeGraph, Rule};
pub use scoring::{ModelKind, ModelParams, ModelSpec};
pub use training::TrainConfig;
