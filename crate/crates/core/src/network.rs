//! Compilation of a case into a discrete model over the hypothesis selectors,
//! the mixture proportion, and one genotype-pair variable per marker.
//!
//! Founder genes, count nodes and in-mixture nodes are deterministic or
//! independent and are summed out at compile time. The continuous weight
//! nodes are observed leaves, so each marker's Gaussian evidence collapses
//! into one log factor per (genotype pair, theta) cell.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::genetics::{pooled_frequency, Allele, CaseData, Genotype, MarkerPeaks, ModelParams, Profile, Role};
use crate::logspace::LOG_ZERO;
use crate::weights::{marker_log_likelihood, relative_weights, RelativeWeights};

/// Which profiles are entered and which hypothesis nodes are clamped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Both profiles entered, selectors free.
    SuspectAndVictim,
    /// Suspect profile entered, victim untyped, selectors free.
    SuspectOnly,
    /// Victim profile entered and `p2 = v` clamped to yes.
    VictimKnownSeparation,
    /// No profiles; theta restricted to `>= 0.5`.
    BothUnknownSeparation,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::SuspectAndVictim,
        Scenario::SuspectOnly,
        Scenario::VictimKnownSeparation,
        Scenario::BothUnknownSeparation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SuspectAndVictim => "suspect-and-victim",
            Scenario::SuspectOnly => "suspect-only",
            Scenario::VictimKnownSeparation => "victim-known",
            Scenario::BothUnknownSeparation => "both-unknown",
        }
    }

    fn enters(self, role: Role) -> bool {
        matches!(
            (self, role),
            (Scenario::SuspectAndVictim, _)
                | (Scenario::SuspectOnly, Role::Suspect)
                | (Scenario::VictimKnownSeparation, Role::Victim)
        )
    }

    fn symmetry_constraint(self) -> bool {
        self == Scenario::BothUnknownSeparation
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SelectorState {
    pub p1_is_s: bool,
    pub p2_is_v: bool,
}

impl SelectorState {
    /// In [`TargetState::ALL`] order.
    pub const ALL: [SelectorState; 4] = [
        SelectorState { p1_is_s: false, p2_is_v: false },
        SelectorState { p1_is_s: false, p2_is_v: true },
        SelectorState { p1_is_s: true, p2_is_v: false },
        SelectorState { p1_is_s: true, p2_is_v: true },
    ];

    pub fn index(self) -> usize {
        (self.p1_is_s as usize) * 2 + self.p2_is_v as usize
    }

    pub fn target(self) -> TargetState {
        TargetState::ALL[self.index()]
    }
}

/// The four contributor hypotheses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TargetState {
    U1U2,
    VU,
    SU,
    SV,
}

impl TargetState {
    pub const ALL: [TargetState; 4] = [TargetState::U1U2, TargetState::VU, TargetState::SU, TargetState::SV];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn selector(self) -> SelectorState {
        SelectorState::ALL[self.index()]
    }

    pub fn label(self) -> &'static str {
        match self {
            TargetState::U1U2 => "u1 & u2",
            TargetState::VU => "v and u",
            TargetState::SU => "s and u",
            TargetState::SV => "s and v",
        }
    }
}

impl fmt::Display for TargetState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Genotypes of contributors p1 and p2 at one marker.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct JointGenotype {
    pub marker: String,
    pub gt1: Genotype,
    pub gt2: Genotype,
}

impl fmt::Display for JointGenotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} | {}", self.marker, self.gt1, self.gt2)
    }
}

/// Toggles for the two kinds of trace evidence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvidenceOptions {
    pub peak_weights: bool,
    pub in_mixture: bool,
}

impl Default for EvidenceOptions {
    fn default() -> Self {
        EvidenceOptions { peak_weights: true, in_mixture: true }
    }
}

impl EvidenceOptions {
    pub fn none() -> Self {
        EvidenceOptions { peak_weights: false, in_mixture: false }
    }
}

/// Per-allele copy counts of a genotype.
pub fn allele_counts(gt: &Genotype) -> BTreeMap<Allele, u8> {
    let mut counts = BTreeMap::new();
    for a in gt.alleles() {
        *counts.entry(a.clone()).or_insert(0) += 1;
    }
    counts
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixtureConsistency {
    Consistent,
    Inconsistent,
}

/// Every observed allele carried by someone, and no one carrying an unobserved allele.
pub fn in_mixture_indicator(gt1: &Genotype, gt2: &Genotype, observed: &[Allele]) -> MixtureConsistency {
    let covered = observed.iter().all(|a| gt1.contains(a) || gt2.contains(a));
    let only_observed = gt1.alleles().into_iter().chain(gt2.alleles()).all(|a| observed.contains(a));
    if covered && only_observed {
        MixtureConsistency::Consistent
    } else {
        MixtureConsistency::Inconsistent
    }
}

/// Hardy-Weinberg genotype probabilities over `alleles`, in `(i <= j)` order.
pub fn hardy_weinberg(alleles: &[Allele], freqs: &[f64]) -> Vec<(Genotype, f64)> {
    let mut out = Vec::with_capacity(alleles.len() * (alleles.len() + 1) / 2);
    for i in 0..alleles.len() {
        for j in i..alleles.len() {
            let p = if i == j { freqs[i] * freqs[i] } else { 2.0 * freqs[i] * freqs[j] };
            out.push((Genotype::new(alleles[i].clone(), alleles[j].clone()), p));
        }
    }
    out
}

/// Prior over an untyped person's genotype at a marker.
///
/// STR markers use Hardy-Weinberg proportions over the observed alleles plus
/// the pooled allele. The sex marker uses the configured XX/XY prior.
pub fn genotype_prior(
    peaks: &MarkerPeaks,
    freqs: &crate::genetics::FrequencyTable,
    params: &ModelParams,
) -> Result<Vec<(Genotype, f64)>> {
    if peaks.is_amelogenin() {
        let x = Allele::parse("X").expect("X");
        let y = Allele::parse("Y").expect("Y");
        let total = params.amelogenin_prior.xx + params.amelogenin_prior.xy;
        return Ok(vec![
            (Genotype::new(x.clone(), x.clone()), params.amelogenin_prior.xx / total),
            (Genotype::new(x, y), params.amelogenin_prior.xy / total),
        ]);
    }
    let mut alleles: Vec<Allele> = Vec::new();
    let mut f = Vec::new();
    for a in peaks.observed() {
        f.push(freqs.get(&peaks.marker, a).ok_or_else(|| Error::MissingFrequency {
            marker: peaks.marker.clone(),
            allele: a.to_string(),
        })?);
        alleles.push(a.clone());
    }
    f.push(pooled_frequency(&peaks.marker, peaks.observed(), freqs)?);
    alleles.push(Allele::pooled());
    // Observed frequencies may not sum to one when the table is partial; renormalise.
    let total: f64 = f.iter().sum();
    let f: Vec<f64> = f.iter().map(|v| v / total).collect();
    Ok(hardy_weinberg(&alleles, &f))
}

/// Maps a typed genotype into the marker's allele universe: unobserved alleles
/// of an STR marker become the pooled allele.
fn project_genotype(gt: &Genotype, weights: &RelativeWeights) -> Genotype {
    let map = |a: &Allele| {
        if weights.alleles.contains(a) {
            a.clone()
        } else {
            Allele::pooled()
        }
    };
    Genotype::new(map(gt.first()), map(gt.second()))
}

/// Compiled factors of one marker.
///
/// The genotype-pair variable ranges over `gt1_space × gt2_space`, indexed
/// `i1 * gt2_space.len() + i2`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkerFactor {
    pub name: String,
    pub weights: RelativeWeights,
    pub gt1_space: Vec<Genotype>,
    pub gt2_space: Vec<Genotype>,
    /// `log P(gt1 | p1 = s?)`, indexed by the selector value then genotype.
    pub gt1_log_prior: [Vec<f64>; 2],
    pub gt2_log_prior: [Vec<f64>; 2],
    /// Log evidence factor per `(pair, theta)` cell, `pair * n_theta + t`.
    pub evidence: Vec<f64>,
    n_theta: usize,
}

impl MarkerFactor {
    pub fn n_pairs(&self) -> usize {
        self.gt1_space.len() * self.gt2_space.len()
    }

    pub fn split(&self, pair: usize) -> (usize, usize) {
        (pair / self.gt2_space.len(), pair % self.gt2_space.len())
    }

    pub fn pair_index(&self, gt1: &Genotype, gt2: &Genotype) -> Option<usize> {
        let i1 = self.gt1_space.iter().position(|g| g == gt1)?;
        let i2 = self.gt2_space.iter().position(|g| g == gt2)?;
        Some(i1 * self.gt2_space.len() + i2)
    }

    pub fn joint_genotype(&self, pair: usize) -> JointGenotype {
        let (i1, i2) = self.split(pair);
        JointGenotype {
            marker: self.name.clone(),
            gt1: self.gt1_space[i1].clone(),
            gt2: self.gt2_space[i2].clone(),
        }
    }

    /// Log of prior(gt1) · prior(gt2) · indicator · likelihood for one cell.
    #[inline]
    pub fn log_factor(&self, selector: SelectorState, theta_index: usize, pair: usize) -> f64 {
        let (i1, i2) = self.split(pair);
        let p1 = self.gt1_log_prior[selector.p1_is_s as usize][i1];
        let p2 = self.gt2_log_prior[selector.p2_is_v as usize][i2];
        if p1 == LOG_ZERO || p2 == LOG_ZERO {
            return LOG_ZERO;
        }
        p1 + p2 + self.evidence[pair * self.n_theta + theta_index]
    }
}

/// Discrete model ready for exact inference.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledNetwork {
    pub scenario: Scenario,
    pub theta: Vec<f64>,
    pub theta_log_prior: Vec<f64>,
    /// Indexed by [`SelectorState::index`].
    pub selector_log_prior: [f64; 4],
    pub markers: Vec<MarkerFactor>,
}

impl CompiledNetwork {
    /// Number of joint configurations of all genotype-pair variables.
    pub fn state_space_size(&self) -> f64 {
        self.markers.iter().map(|m| m.n_pairs() as f64).product()
    }

    pub fn marker_index(&self, name: &str) -> Option<usize> {
        self.markers.iter().position(|m| m.name == name)
    }

    pub fn describe(&self, config: &[usize]) -> Vec<JointGenotype> {
        self.markers.iter().zip(config).map(|(m, &s)| m.joint_genotype(s)).collect()
    }

    /// Resolves labelled genotype pairs (one per marker, any order) to state indices.
    pub fn resolve(&self, config: &[JointGenotype]) -> Option<Vec<usize>> {
        self.markers
            .iter()
            .map(|m| {
                let jg = config.iter().find(|j| j.marker == m.name)?;
                m.pair_index(&jg.gt1, &jg.gt2)
            })
            .collect()
    }

    pub fn selectors(&self) -> impl Iterator<Item = SelectorState> + '_ {
        SelectorState::ALL.into_iter().filter(|s| self.selector_log_prior[s.index()] != LOG_ZERO)
    }

    pub fn thetas(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.theta.len()).filter(|&t| self.theta_log_prior[t] != LOG_ZERO)
    }
}

fn ln_or_zero(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        LOG_ZERO
    }
}

fn required_profile(case: &CaseData, scenario: Scenario, role: Role) -> Result<Option<&Profile>> {
    if !scenario.enters(role) {
        return Ok(None);
    }
    case.profile(role).map(Some).ok_or(Error::MissingProfile {
        scenario: scenario.name(),
        role: match role {
            Role::Suspect => "suspect",
            Role::Victim => "victim",
        },
    })
}

pub fn compile(case: &CaseData, scenario: Scenario) -> Result<CompiledNetwork> {
    compile_with(case, scenario, EvidenceOptions::default())
}

pub fn compile_with(case: &CaseData, scenario: Scenario, options: EvidenceOptions) -> Result<CompiledNetwork> {
    let params = &case.params;
    params.validate()?;
    let suspect = required_profile(case, scenario, Role::Suspect)?;
    let victim = required_profile(case, scenario, Role::Victim)?;

    let grid = &params.theta_grid;
    let mut theta_prior: Vec<f64> = grid.weights().to_vec();
    if scenario.symmetry_constraint() {
        for (w, &t) in theta_prior.iter_mut().zip(grid.points()) {
            if t < 0.5 {
                *w = 0.0;
            }
        }
    }
    let mass: f64 = theta_prior.iter().sum();
    if mass.is_nan() || mass <= 0.0 {
        return Err(Error::EmptyThetaGrid);
    }
    let theta_log_prior: Vec<f64> = theta_prior.iter().map(|w| ln_or_zero(w / mass)).collect();
    let theta: Vec<f64> = grid.points().to_vec();

    let mut selector_log_prior = [(0.25f64).ln(); 4];
    if scenario == Scenario::VictimKnownSeparation {
        for s in SelectorState::ALL {
            selector_log_prior[s.index()] = if s.p2_is_v { (0.5f64).ln() } else { LOG_ZERO };
        }
    }

    let mut markers = Vec::with_capacity(case.markers.len());
    for peaks in &case.markers {
        let weights = relative_weights(peaks)?;
        let unknown: Vec<(Genotype, f64)> =
            genotype_prior(peaks, &case.frequencies, params)?.into_iter().filter(|(_, p)| *p > 0.0).collect();
        let typed = |profile: Option<&Profile>| profile.and_then(|p| p.genotype(&peaks.marker)).map(|g| project_genotype(g, &weights));

        let build = |known: Option<Genotype>| {
            let mut space: Vec<Genotype> = unknown.iter().map(|(g, _)| g.clone()).collect();
            if let Some(k) = &known {
                if !space.contains(k) {
                    space.push(k.clone());
                }
            }
            let untyped: Vec<f64> = space
                .iter()
                .map(|g| unknown.iter().find(|(u, _)| u == g).map_or(LOG_ZERO, |(_, p)| p.ln()))
                .collect();
            let selected = match &known {
                Some(k) => space.iter().map(|g| if g == k { 0.0 } else { LOG_ZERO }).collect(),
                // Untyped person: the selector has no effect on this marker.
                None => untyped.clone(),
            };
            (space, [untyped, selected])
        };
        let (gt1_space, gt1_log_prior) = build(typed(suspect));
        let (gt2_space, gt2_log_prior) = build(typed(victim));

        let observed = weights.observed_alleles();
        let n_theta = theta.len();
        let mut evidence = Vec::with_capacity(gt1_space.len() * gt2_space.len() * n_theta);
        for g1 in &gt1_space {
            for g2 in &gt2_space {
                let consistent = !options.in_mixture
                    || in_mixture_indicator(g1, g2, observed) == MixtureConsistency::Consistent;
                for &t in &theta {
                    let v = if !consistent {
                        LOG_ZERO
                    } else if options.peak_weights {
                        marker_log_likelihood(&weights, g1, g2, t, params)
                    } else {
                        0.0
                    };
                    evidence.push(v);
                }
            }
        }
        markers.push(MarkerFactor {
            name: peaks.marker.clone(),
            weights,
            gt1_space,
            gt2_space,
            gt1_log_prior,
            gt2_log_prior,
            evidence,
            n_theta,
        });
    }

    Ok(CompiledNetwork { scenario, theta, theta_log_prior, selector_log_prior, markers })
}
