use crate::error::{Error, Result};
use crate::inference::{clamp_and_score, propagate};
use crate::logspace::{CompensatedSum, LOG_ZERO};
use crate::network::{CompiledNetwork, JointGenotype};

use super::kbest::{Candidate, KBestProduct};

/// Candidate budget for the batch variant.
pub const DEFAULT_BATCH_SIZE: usize = 5000;

/// Posterior-scale slack a score must clear above the unexplored mass to be certified.
pub const CERTIFICATE_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MapQuery {
    /// Number of ranks wanted.
    pub k: usize,
    /// Candidates generated up front by the batch variant.
    pub budget: usize,
    /// Ceiling on candidates for the sequential variant; `None` runs to certification.
    pub limit: Option<usize>,
}

impl MapQuery {
    pub fn new(k: usize) -> MapQuery {
        MapQuery { k, budget: DEFAULT_BATCH_SIZE.max(k), limit: None }
    }

    pub fn with_budget(mut self, budget: usize) -> MapQuery {
        self.budget = budget;
        self
    }

    pub fn with_limit(mut self, limit: usize) -> MapQuery {
        self.limit = Some(limit);
        self
    }

    fn validate(&self, net: &CompiledNetwork) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        if self.budget < self.k {
            return Err(Error::InvalidParams(format!("batch size {} is smaller than k = {}", self.budget, self.k)));
        }
        let space = net.state_space_size();
        if (self.k as f64) > space {
            return Err(Error::StateSpaceTooSmall { requested: self.k, available: space });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedConfig {
    /// State index per marker.
    pub states: Vec<usize>,
    /// `log P(config, E)`.
    pub log_joint: f64,
    /// `P(config | E)`.
    pub posterior: f64,
    /// Product of the per-marker posterior marginals of this configuration.
    pub product_of_marginals: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapResult {
    /// Best configurations found, by decreasing exact posterior.
    pub ranked: Vec<RankedConfig>,
    /// Leading ranks proven correct.
    pub certified: usize,
    pub examined: usize,
    /// Fewer than `k` ranks certified within the candidate budget.
    pub budget_exhausted: bool,
    /// Every configuration of nonzero probability was examined.
    pub space_exhausted: bool,
    /// Posterior mass of unexamined configurations, `1 − Σ examined posteriors`.
    pub remainder: f64,
    pub log_evidence: f64,
    /// Per-marker posterior marginals used for candidate generation.
    pub marginals: Vec<Vec<f64>>,
}

impl MapResult {
    pub fn best(&self) -> Option<&RankedConfig> {
        self.ranked.first()
    }

    pub fn genotypes(&self, net: &CompiledNetwork, rank: usize) -> Vec<JointGenotype> {
        net.describe(&self.ranked[rank].states)
    }
}

/// Running bookkeeping: scored candidates, best-so-far and remainder mass.
struct Certifier<'a> {
    net: &'a CompiledNetwork,
    log_evidence: f64,
    scored: Vec<RankedConfig>,
    explained: CompensatedSum,
    best: f64,
}

impl<'a> Certifier<'a> {
    fn new(net: &'a CompiledNetwork, log_evidence: f64) -> Self {
        Certifier { net, log_evidence, scored: Vec::new(), explained: CompensatedSum::new(), best: 0.0 }
    }

    fn score(&mut self, candidate: Candidate) {
        let log_joint = clamp_and_score(self.net, &candidate.states);
        let posterior = if log_joint == LOG_ZERO { 0.0 } else { (log_joint - self.log_evidence).exp() };
        self.explained.add(posterior);
        if posterior > self.best {
            self.best = posterior;
        }
        let entry = RankedConfig {
            states: candidate.states,
            log_joint,
            posterior,
            product_of_marginals: candidate.log_product.exp(),
        };
        let at = self
            .scored
            .partition_point(|c| c.posterior > entry.posterior || (c.posterior == entry.posterior && c.states < entry.states));
        self.scored.insert(at, entry);
    }

    fn remainder(&self) -> f64 {
        1.0 - self.explained.value()
    }

    /// Number of leading ranks whose posterior exceeds everything unexamined.
    fn certified(&self, k: usize) -> usize {
        let bound = self.remainder() + CERTIFICATE_SLACK;
        self.scored.iter().take(k).take_while(|c| c.posterior > bound).count()
    }

    fn finish(self, k: usize, space_exhausted: bool, marginals: Vec<Vec<f64>>) -> MapResult {
        let certified = if space_exhausted { k.min(self.scored.len()) } else { self.certified(k) };
        let remainder = self.remainder();
        let examined = self.scored.len();
        let mut ranked = self.scored;
        ranked.truncate(k);
        debug_assert!(ranked.first().is_none_or(|c| c.posterior == self.best));
        MapResult {
            ranked,
            certified,
            examined,
            budget_exhausted: certified < k && !space_exhausted,
            space_exhausted,
            remainder,
            log_evidence: self.log_evidence,
            marginals,
        }
    }
}

/// Generates candidates one at a time until `k` ranks are certified.
pub fn map_search_sequential(net: &CompiledNetwork, query: MapQuery) -> Result<MapResult> {
    query.validate(net)?;
    let evidence = propagate(net)?;
    let mut stream = KBestProduct::new(&evidence.joint);
    let mut certifier = Certifier::new(net, evidence.log_evidence);
    loop {
        if certifier.certified(query.k) >= query.k {
            break;
        }
        if query.limit.is_some_and(|l| certifier.scored.len() >= l) {
            break;
        }
        match stream.next() {
            Some(c) => certifier.score(c),
            None => break,
        }
    }
    let exhausted = stream.is_exhausted();
    Ok(certifier.finish(query.k, exhausted, evidence.joint))
}

/// Scores the top `query.budget` product-of-marginals candidates, then certifies.
pub fn map_search_batch(net: &CompiledNetwork, query: MapQuery) -> Result<MapResult> {
    query.validate(net)?;
    let evidence = propagate(net)?;
    let mut stream = KBestProduct::new(&evidence.joint);
    let mut certifier = Certifier::new(net, evidence.log_evidence);
    for c in stream.by_ref().take(query.budget) {
        certifier.score(c);
    }
    let exhausted = stream.is_exhausted();
    Ok(certifier.finish(query.k, exhausted, evidence.joint))
}
