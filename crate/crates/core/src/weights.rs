//! Peak weights, relative weights, and the Gaussian peak-weight likelihood.

use crate::error::{Error, Result};
use crate::genetics::{Allele, Genotype, MarkerPeaks, ModelParams};

/// Scaled peak weight: area times repeat number. Sex alleles use unit scaling.
pub fn peak_weight(allele: &Allele, area: f64) -> f64 {
    allele.repeat_value().unwrap_or(1.0) * area
}

/// Normalised peak weights for one marker.
///
/// `alleles` lists the observed alleles in input order followed by the
/// unobserved complement (the pooled allele for STR markers, the missing
/// sex allele for amelogenin), whose weights are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct RelativeWeights {
    pub marker: String,
    pub alleles: Vec<Allele>,
    pub weights: Vec<f64>,
    pub observed: usize,
}

impl RelativeWeights {
    pub fn observed_alleles(&self) -> &[Allele] {
        &self.alleles[..self.observed]
    }

    pub fn unobserved_alleles(&self) -> &[Allele] {
        &self.alleles[self.observed..]
    }

    pub fn get(&self, allele: &Allele) -> Option<f64> {
        self.alleles.iter().position(|a| a == allele).map(|i| self.weights[i])
    }
}

/// Alleles of the marker that were not seen in the trace.
pub fn unobserved_complement(peaks: &MarkerPeaks) -> Vec<Allele> {
    if peaks.is_amelogenin() {
        ["X", "Y"]
            .into_iter()
            .filter_map(Allele::parse)
            .filter(|sex| !peaks.observed().any(|a| a == sex))
            .collect()
    } else {
        vec![Allele::pooled()]
    }
}

pub fn relative_weights(peaks: &MarkerPeaks) -> Result<RelativeWeights> {
    let raw: Vec<f64> = peaks.peaks.iter().map(|(a, area)| peak_weight(a, *area)).collect();
    let total: f64 = raw.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateMarker { marker: peaks.marker.clone() });
    }
    let mut alleles: Vec<Allele> = peaks.observed().cloned().collect();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let observed = alleles.len();
    for a in unobserved_complement(peaks) {
        alleles.push(a);
        weights.push(0.0);
    }
    Ok(RelativeWeights { marker: peaks.marker.clone(), alleles, weights, observed })
}

/// Pre-amplification share of an allele given each contributor's copy count.
pub fn mean_weight(n1: u8, n2: u8, theta: f64) -> f64 {
    (theta * n1 as f64 + (1.0 - theta) * n2 as f64) / 2.0
}

/// Variance of an observed relative weight with mean `mu`.
pub fn weight_variance(mu: f64, params: &ModelParams) -> f64 {
    params.sigma2 * mu + params.omega2
}

/// Variance form `σ²μ(1−μ) + ω²`. Only used for diagnostics.
pub fn binomial_weight_variance(mu: f64, params: &ModelParams) -> f64 {
    params.sigma2 * mu * (1.0 - mu) + params.omega2
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum VarianceModel {
    /// `σ²μ + ω²`, the form used for inference.
    #[default]
    Additive,
    /// `σ²μ(1−μ) + ω²`, diagnostic only.
    Binomial,
}

pub fn gaussian_log_density(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var)
}

/// Log density of a marker's relative weights under a genotype pair and
/// mixture proportion, summed over every allele including the unobserved ones.
pub fn marker_log_likelihood(
    weights: &RelativeWeights,
    gt1: &Genotype,
    gt2: &Genotype,
    theta: f64,
    params: &ModelParams,
) -> f64 {
    marker_log_likelihood_with(weights, gt1, gt2, theta, params, VarianceModel::Additive)
}

pub fn marker_log_likelihood_with(
    weights: &RelativeWeights,
    gt1: &Genotype,
    gt2: &Genotype,
    theta: f64,
    params: &ModelParams,
    model: VarianceModel,
) -> f64 {
    weights
        .alleles
        .iter()
        .zip(&weights.weights)
        .map(|(a, &r)| {
            let mu = mean_weight(gt1.count(a), gt2.count(a), theta);
            let var = match model {
                VarianceModel::Additive => weight_variance(mu, params),
                VarianceModel::Binomial => binomial_weight_variance(mu, params),
            };
            gaussian_log_density(r, mu, var)
        })
        .sum()
}
