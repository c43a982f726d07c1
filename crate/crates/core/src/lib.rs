//! Demand-weighted completeness of a knowledge base.
//!
//! Usage logs attribute query clauses to (entity, relation) pairs. Grouping
//! entities by their exact class set (the class signature) yields a demand
//! distribution over relations per signature; predictors learn to map any
//! signature to such a distribution, and entities or KB subsets are then
//! scored by how much of their predicted demand the KB can already answer.

pub mod aggregation;
pub mod cli;
pub mod completeness;
pub mod distribution;
pub mod error;
pub mod ids;
pub mod ingestion;
pub mod evaluation;
pub mod models;
pub mod synth;

pub use error::{Error, Result};
