//! The analyst-facing workflows: evidential likelihood ratios, mixture
//! separation, and the posterior of the mixture proportion.

use crate::error::{Error, Result};
use crate::genetics::CaseData;
use crate::inference::propagate;
use crate::map_search::{map_search_batch, map_search_sequential, MapQuery, MapResult};
use crate::network::{compile, CompiledNetwork, JointGenotype, Scenario, TargetState};

/// `P(numerator | E) / P(denominator | E)`; with uniform selector priors this is
/// the likelihood ratio of the two hypotheses.
#[derive(Clone, Debug, PartialEq)]
pub struct LikelihoodRatio {
    pub numerator: TargetState,
    pub denominator: TargetState,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvidentialReport {
    pub scenario: Scenario,
    /// Posterior of each hypothesis, in [`TargetState::ALL`] order.
    pub target: [f64; 4],
    pub ratios: Vec<LikelihoodRatio>,
    pub log_evidence: f64,
    pub sigma2: f64,
    pub omega2: f64,
    pub theta_points: usize,
}

impl EvidentialReport {
    pub fn posterior(&self, state: TargetState) -> f64 {
        self.target[state.index()]
    }

    pub fn ratio(&self, numerator: TargetState, denominator: TargetState) -> Option<f64> {
        self.ratios
            .iter()
            .find(|r| r.numerator == numerator && r.denominator == denominator)
            .map(|r| r.value)
    }
}

/// Hypothesis pairs reported for an evidential scenario.
pub fn reported_ratios(scenario: Scenario) -> &'static [(TargetState, TargetState)] {
    match scenario {
        Scenario::SuspectAndVictim => &[(TargetState::SV, TargetState::SU), (TargetState::SV, TargetState::VU)],
        Scenario::SuspectOnly => &[(TargetState::SU, TargetState::U1U2)],
        _ => &[],
    }
}

pub fn evidential(case: &CaseData, scenario: Scenario) -> Result<EvidentialReport> {
    if !matches!(scenario, Scenario::SuspectAndVictim | Scenario::SuspectOnly) {
        return Err(Error::InvalidParams(format!("{scenario} is not an evidential scenario")));
    }
    let net = compile(case, scenario)?;
    let result = propagate(&net)?;
    let target = result.target;
    let ratios = reported_ratios(scenario)
        .iter()
        .map(|&(numerator, denominator)| LikelihoodRatio {
            numerator,
            denominator,
            value: target[numerator.index()] / target[denominator.index()],
        })
        .collect();
    Ok(EvidentialReport {
        scenario,
        target,
        ratios,
        log_evidence: result.log_evidence,
        sigma2: case.params.sigma2,
        omega2: case.params.omega2,
        theta_points: case.params.theta_grid.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeparationMode {
    VictimKnown,
    BothUnknown,
}

impl SeparationMode {
    pub fn scenario(self) -> Scenario {
        match self {
            SeparationMode::VictimKnown => Scenario::VictimKnownSeparation,
            SeparationMode::BothUnknown => Scenario::BothUnknownSeparation,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchVariant {
    Batch { budget: usize },
    Sequential,
}

impl Default for SearchVariant {
    fn default() -> Self {
        SearchVariant::Batch { budget: crate::map_search::DEFAULT_BATCH_SIZE }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparatedConfig {
    pub genotypes: Vec<JointGenotype>,
    pub posterior: f64,
    /// Posterior marginal of each marker's genotype pair.
    pub marker_marginals: Vec<f64>,
    pub product_of_marginals: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationReport {
    pub mode: SeparationMode,
    pub ranked: Vec<SeparatedConfig>,
    pub certified: usize,
    pub examined: usize,
    pub budget_exhausted: bool,
    /// `1 − Σ` returned posteriors, when nonnegative.
    pub residual: Option<f64>,
}

fn separation_report(net: &CompiledNetwork, mode: SeparationMode, result: &MapResult) -> SeparationReport {
    let ranked: Vec<SeparatedConfig> = result
        .ranked
        .iter()
        .enumerate()
        .map(|(rank, c)| SeparatedConfig {
            genotypes: net.describe(&c.states),
            posterior: c.posterior,
            marker_marginals: c.states.iter().zip(&result.marginals).map(|(&s, m)| m[s]).collect(),
            product_of_marginals: c.product_of_marginals,
            certified: rank < result.certified,
        })
        .collect();
    let residual = 1.0 - ranked.iter().map(|c| c.posterior).sum::<f64>();
    SeparationReport {
        mode,
        ranked,
        certified: result.certified,
        examined: result.examined,
        budget_exhausted: result.budget_exhausted,
        residual: (residual >= 0.0).then_some(residual),
    }
}

pub fn separate(case: &CaseData, mode: SeparationMode, k: usize) -> Result<SeparationReport> {
    separate_with(case, mode, k, SearchVariant::default())
}

pub fn separate_with(case: &CaseData, mode: SeparationMode, k: usize, variant: SearchVariant) -> Result<SeparationReport> {
    let net = compile(case, mode.scenario())?;
    let result = match variant {
        SearchVariant::Batch { budget } => map_search_batch(&net, MapQuery::new(k).with_budget(budget.max(k)))?,
        SearchVariant::Sequential => map_search_sequential(&net, MapQuery::new(k))?,
    };
    Ok(separation_report(&net, mode, &result))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProportionPosterior {
    pub scenario: Scenario,
    pub theta: Vec<f64>,
    pub posterior: Vec<f64>,
}

impl ProportionPosterior {
    /// Grid point of highest posterior (first on ties).
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for (i, &p) in self.posterior.iter().enumerate() {
            if p > self.posterior[best] {
                best = i;
            }
        }
        self.theta[best]
    }

    pub fn mean(&self) -> f64 {
        self.theta.iter().zip(&self.posterior).map(|(t, p)| t * p).sum()
    }
}

pub fn proportion_posterior(case: &CaseData, scenario: Scenario) -> Result<ProportionPosterior> {
    let net = compile(case, scenario)?;
    let result = propagate(&net)?;
    Ok(ProportionPosterior { scenario, theta: net.theta.clone(), posterior: result.theta })
}
