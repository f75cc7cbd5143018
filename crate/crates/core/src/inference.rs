//! Exact evidence probability and posterior marginals.
//!
//! Markers share only the selector and theta variables, so the junction tree
//! has one small root clique over (selectors, theta) with one branch per
//! marker. Each branch sends the message `Σ_pair f_m(sel, θ, pair)` and the
//! root combines them. Everything is accumulated in log space.

use crate::error::{Error, Result};
use crate::logspace::{LogAccumulator, LOG_ZERO};
use crate::network::{CompiledNetwork, JointGenotype, SelectorState};

/// Marginal that can be read off the propagated model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Query {
    /// The four-state hypothesis variable, in [`crate::network::TargetState::ALL`] order.
    Target,
    /// Mixture proportion over the grid.
    Theta,
    /// Genotype pair of the marker with this index.
    JointGenotype(usize),
}

/// Outcome of propagating the evidence.
#[derive(Clone, Debug, PartialEq)]
pub struct EvidenceResult {
    pub log_evidence: f64,
    pub target: [f64; 4],
    pub theta: Vec<f64>,
    /// Per marker, over that marker's genotype-pair states.
    pub joint: Vec<Vec<f64>>,
}

impl EvidenceResult {
    pub fn marginal(&self, query: Query) -> &[f64] {
        match query {
            Query::Target => &self.target,
            Query::Theta => &self.theta,
            Query::JointGenotype(m) => &self.joint[m],
        }
    }
}

/// Branch messages `log Σ_pair f_m(sel, θ, pair)`, laid out `[marker][sel * n_theta + t]`.
struct Messages {
    n_theta: usize,
    per_marker: Vec<Vec<f64>>,
}

impl Messages {
    fn compute(net: &CompiledNetwork) -> Messages {
        let n_theta = net.theta.len();
        let per_marker = net
            .markers
            .iter()
            .map(|m| {
                let mut out = vec![LOG_ZERO; 4 * n_theta];
                for s in net.selectors() {
                    for t in net.thetas() {
                        let mut acc = LogAccumulator::new();
                        for pair in 0..m.n_pairs() {
                            acc.add(m.log_factor(s, t, pair));
                        }
                        out[s.index() * n_theta + t] = acc.value();
                    }
                }
                out
            })
            .collect();
        Messages { n_theta, per_marker }
    }

    fn get(&self, marker: usize, s: SelectorState, t: usize) -> f64 {
        self.per_marker[marker][s.index() * self.n_theta + t]
    }

    /// Log prior of the root cell times every branch message except `skip`.
    fn root(&self, net: &CompiledNetwork, s: SelectorState, t: usize, skip: Option<usize>) -> f64 {
        let mut v = net.selector_log_prior[s.index()] + net.theta_log_prior[t];
        for m in 0..self.per_marker.len() {
            if Some(m) == skip {
                continue;
            }
            let msg = self.get(m, s, t);
            if msg == LOG_ZERO {
                return LOG_ZERO;
            }
            v += msg;
        }
        v
    }
}

/// `log P(E)`, or [`LOG_ZERO`] when the evidence is impossible.
pub fn evidence_probability(net: &CompiledNetwork) -> f64 {
    let messages = Messages::compute(net);
    let mut acc = LogAccumulator::new();
    for s in net.selectors() {
        for t in net.thetas() {
            acc.add(messages.root(net, s, t, None));
        }
    }
    acc.value()
}

fn zero_evidence(net: &CompiledNetwork, messages: &Messages) -> Error {
    let marker = (0..net.markers.len())
        .find(|&m| net.selectors().all(|s| net.thetas().all(|t| messages.get(m, s, t) == LOG_ZERO)))
        .map(|m| net.markers[m].name.clone());
    Error::ZeroEvidence { marker }
}

/// Propagates the evidence and returns `P(E)` with every marginal.
pub fn propagate(net: &CompiledNetwork) -> Result<EvidenceResult> {
    let messages = Messages::compute(net);
    let n_theta = net.theta.len();

    let mut cells = vec![LOG_ZERO; 4 * n_theta];
    let mut total = LogAccumulator::new();
    for s in net.selectors() {
        for t in net.thetas() {
            let v = messages.root(net, s, t, None);
            cells[s.index() * n_theta + t] = v;
            total.add(v);
        }
    }
    let log_evidence = total.value();
    if log_evidence == LOG_ZERO {
        return Err(zero_evidence(net, &messages));
    }

    let mut target = [0.0; 4];
    let mut theta = vec![0.0; n_theta];
    for s in SelectorState::ALL {
        let mut acc = LogAccumulator::new();
        for t in 0..n_theta {
            acc.add(cells[s.index() * n_theta + t]);
        }
        target[s.index()] = (acc.value() - log_evidence).exp();
    }
    for (t, slot) in theta.iter_mut().enumerate() {
        let mut acc = LogAccumulator::new();
        for s in SelectorState::ALL {
            acc.add(cells[s.index() * n_theta + t]);
        }
        *slot = (acc.value() - log_evidence).exp();
    }

    let mut joint = Vec::with_capacity(net.markers.len());
    for (mi, m) in net.markers.iter().enumerate() {
        let mut accs = vec![LogAccumulator::new(); m.n_pairs()];
        for s in net.selectors() {
            for t in net.thetas() {
                let rest = messages.root(net, s, t, Some(mi));
                if rest == LOG_ZERO {
                    continue;
                }
                for (pair, acc) in accs.iter_mut().enumerate() {
                    let f = m.log_factor(s, t, pair);
                    if f != LOG_ZERO {
                        acc.add(rest + f);
                    }
                }
            }
        }
        joint.push(accs.iter().map(|a| (a.value() - log_evidence).exp()).collect());
    }

    Ok(EvidenceResult { log_evidence, target, theta, joint })
}

pub fn posterior_marginal(net: &CompiledNetwork, query: Query) -> Result<Vec<f64>> {
    let result = propagate(net)?;
    Ok(result.marginal(query).to_vec())
}

/// `log P(config, E)` with every marker's genotype pair clamped to `config[m]`.
pub fn clamp_and_score(net: &CompiledNetwork, config: &[usize]) -> f64 {
    debug_assert_eq!(config.len(), net.markers.len());
    let mut acc = LogAccumulator::new();
    for s in net.selectors() {
        'theta: for t in net.thetas() {
            let mut v = net.selector_log_prior[s.index()] + net.theta_log_prior[t];
            for (m, &pair) in net.markers.iter().zip(config) {
                let f = m.log_factor(s, t, pair);
                if f == LOG_ZERO {
                    continue 'theta;
                }
                v += f;
            }
            acc.add(v);
        }
    }
    acc.value()
}

/// [`clamp_and_score`] for labelled genotypes. Pairs outside the model's state
/// space score as impossible.
pub fn clamp_and_score_genotypes(net: &CompiledNetwork, config: &[JointGenotype]) -> f64 {
    match net.resolve(config) {
        Some(states) => clamp_and_score(net, &states),
        None => LOG_ZERO,
    }
}
