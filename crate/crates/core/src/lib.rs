//! Evaluation harness for attribution sensitivity and authorship bias of
//! retrieval-augmented answer generators.
//!
//! The same query/context pairs run under factual, counterfactual, and mixed
//! authorship labelings; parsed citations feed counterfactual metrics (CAS,
//! CAB, AC) with paired significance tests. A seeded bias oracle stands in
//! for remote models so the metric pipeline can be validated against planted
//! ground truth.

pub mod context;
pub mod corpus;
pub mod error;
pub mod gateway;
pub mod metrics;
pub mod retrieval;
pub mod scoring;
pub mod seeding;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
