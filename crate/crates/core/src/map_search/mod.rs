//! MAP search over the per-marker genotype-pair variables.
//!
//! Candidates come from the product of the posterior marginals, best first.
//! Each is rescored exactly in the full model, and a rank is certified once
//! its exact posterior exceeds the probability mass not yet examined.

mod kbest;
mod search;

pub use kbest::{kbest_product, log_product, Candidate, KBestList, KBestProduct};
pub use search::{map_search_batch, map_search_sequential, MapQuery, MapResult, RankedConfig, CERTIFICATE_SLACK, DEFAULT_BATCH_SIZE};
