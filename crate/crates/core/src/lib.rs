//! Two-person DNA mixture analysis from quantitative peak areas.
//!
//! A case (peaks, optional suspect and victim profiles, allele frequencies)
//! is compiled into a discrete model over the contributor hypotheses, the
//! mixture proportion and one genotype-pair variable per marker. On that
//! model the crate computes exact evidence probabilities and marginals,
//! likelihood ratios between hypotheses, and a certified ranked list of the
//! most probable genotype configurations.

pub mod casework;
pub mod cli;
pub mod error;
pub mod genetics;
pub mod inference;
pub mod logspace;
pub mod map_search;
pub mod network;
pub mod weights;

pub use error::{Error, Result};
