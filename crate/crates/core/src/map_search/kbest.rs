use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use crate::logspace::LOG_ZERO;

/// One configuration of independent discrete variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub states: Vec<usize>,
    /// `Σ_v ln marginal[v][state_v]`, summed in variable order.
    pub log_product: f64,
}

/// Log of the product of marginals, summed in variable order.
pub fn log_product(marginals: &[Vec<f64>], states: &[usize]) -> f64 {
    marginals.iter().zip(states).map(|(m, &s)| m[s].ln()).sum()
}

struct Entry {
    log_product: f64,
    states: Vec<usize>,
    ranks: Vec<usize>,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

// Max-heap order: larger product first, then lexicographically smaller states.
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.log_product
            .total_cmp(&other.log_product)
            .then_with(|| other.states.cmp(&self.states))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lazy best-first enumeration of the Cartesian product of independent
/// marginals, in nonincreasing product order.
///
/// States with zero marginal probability are never emitted. Ties are broken
/// by the lexicographic order of the state index vectors.
pub struct KBestProduct {
    /// Per variable, `(state, ln p)` sorted by decreasing `p` then increasing state.
    sorted: Vec<Vec<(usize, f64)>>,
    heap: BinaryHeap<Entry>,
    visited: HashSet<Vec<usize>>,
    emitted: usize,
}

impl KBestProduct {
    pub fn new(marginals: &[Vec<f64>]) -> KBestProduct {
        let sorted: Vec<Vec<(usize, f64)>> = marginals
            .iter()
            .map(|m| {
                let mut states: Vec<(usize, f64)> =
                    m.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(s, &p)| (s, p.ln())).collect();
                states.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                states
            })
            .collect();
        let mut stream = KBestProduct { sorted, heap: BinaryHeap::new(), visited: HashSet::new(), emitted: 0 };
        if stream.sorted.iter().all(|v| !v.is_empty()) {
            stream.push(vec![0; stream.sorted.len()]);
        }
        stream
    }

    fn push(&mut self, ranks: Vec<usize>) {
        if !self.visited.insert(ranks.clone()) {
            return;
        }
        let states: Vec<usize> = ranks.iter().zip(&self.sorted).map(|(&r, v)| v[r].0).collect();
        let log_product = ranks.iter().zip(&self.sorted).map(|(&r, v)| v[r].1).sum::<f64>();
        self.heap.push(Entry { log_product, states, ranks });
    }

    /// True when every configuration of nonzero product has been emitted.
    pub fn is_exhausted(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn emitted(&self) -> usize {
        self.emitted
    }

    /// Number of configurations with nonzero product.
    pub fn support_size(&self) -> f64 {
        self.sorted.iter().map(|v| v.len() as f64).product()
    }
}

impl Iterator for KBestProduct {
    type Item = Candidate;

    fn next(&mut self) -> Option<Candidate> {
        let Entry { log_product, states, ranks } = self.heap.pop()?;
        for v in 0..ranks.len() {
            if ranks[v] + 1 < self.sorted[v].len() {
                let mut next = ranks.clone();
                next[v] += 1;
                self.push(next);
            }
        }
        self.emitted += 1;
        debug_assert!(log_product > LOG_ZERO);
        Some(Candidate { states, log_product })
    }
}

/// The first `n` configurations of the product stream.
#[derive(Clone, Debug, PartialEq)]
pub struct KBestList {
    pub candidates: Vec<Candidate>,
    /// The stream ended before `n` configurations were produced.
    pub exhausted: bool,
}

pub fn kbest_product(marginals: &[Vec<f64>], n: usize) -> KBestList {
    let mut stream = KBestProduct::new(marginals);
    let candidates: Vec<Candidate> = stream.by_ref().take(n).collect();
    KBestList { exhausted: candidates.len() < n, candidates }
}
