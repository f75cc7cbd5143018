#![allow(dead_code)]

//! Shared fixtures and a brute-force oracle that enumerates the complete
//! joint space (selectors × theta × every genotype of both contributors at
//! every marker) straight from the model definitions.

use std::collections::HashMap;
use std::path::PathBuf;

use dnamix::genetics::{parse_case, Allele, CaseData, Genotype, ModelParams, ThetaGrid};
use dnamix::inference::propagate;
use dnamix::map_search::{map_search_batch, map_search_sequential, MapQuery, MapResult};
use dnamix::network::{compile, CompiledNetwork, Scenario};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn read_data(name: &str) -> String {
    std::fs::read_to_string(data_path(name)).unwrap()
}

pub fn clayton_case() -> CaseData {
    parse_case(
        &read_data("clayton_peaks.csv"),
        Some(&read_data("clayton_suspect.csv")),
        Some(&read_data("clayton_victim.csv")),
        &read_data("butler_caucasian.csv"),
        ModelParams::default(),
    )
    .unwrap()
}

pub fn allele(label: &str) -> Allele {
    if label == "x" {
        Allele::pooled()
    } else {
        Allele::parse(label).unwrap()
    }
}

pub fn gt(a: &str, b: &str) -> Genotype {
    Genotype::new(allele(a), allele(b))
}

fn lse(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Exhaustive posterior quantities.
pub struct Oracle {
    pub log_evidence: f64,
    pub target: [f64; 4],
    pub theta: Vec<f64>,
    /// Per marker: (gt1, gt2) → posterior.
    pub joint: Vec<HashMap<(Genotype, Genotype), f64>>,
    /// Every joint configuration with its posterior, best first (ties by label order).
    pub ranked: Vec<(Vec<(Genotype, Genotype)>, f64)>,
}

struct MarkerTable {
    pairs: Vec<(Genotype, Genotype)>,
    /// `[pair][sel * n_theta + t]`
    log_factor: Vec<Vec<f64>>,
}

pub fn brute_force(case: &CaseData, scenario: Scenario) -> Oracle {
    let params = &case.params;
    let points = params.theta_grid.points().to_vec();
    let n_theta = points.len();
    let mut theta_w: Vec<f64> = params.theta_grid.weights().to_vec();
    if scenario == Scenario::BothUnknownSeparation {
        for (w, t) in theta_w.iter_mut().zip(&points) {
            if *t < 0.5 {
                *w = 0.0;
            }
        }
    }
    let tw: f64 = theta_w.iter().sum();
    let theta_w: Vec<f64> = theta_w.iter().map(|w| w / tw).collect();

    // Selector states in (p1=s?, p2=v?) order: (n,n), (n,y), (y,n), (y,y).
    let sel_w: [f64; 4] = match scenario {
        Scenario::VictimKnownSeparation => [0.0, 0.5, 0.0, 0.5],
        _ => [0.25; 4],
    };
    let enter_suspect = matches!(scenario, Scenario::SuspectAndVictim | Scenario::SuspectOnly);
    let enter_victim = matches!(scenario, Scenario::SuspectAndVictim | Scenario::VictimKnownSeparation);

    let mut tables = Vec::new();
    for m in &case.markers {
        let amel = m.marker.to_ascii_lowercase().starts_with("amel");
        let observed: Vec<Allele> = m.peaks.iter().map(|(a, _)| a.clone()).collect();
        let mut universe = observed.clone();
        if amel {
            for s in ["X", "Y"] {
                let a = allele(s);
                if !universe.contains(&a) {
                    universe.push(a);
                }
            }
        } else {
            universe.push(Allele::pooled());
        }
        // Relative weights, by hand.
        let w: Vec<f64> = m
            .peaks
            .iter()
            .map(|(a, area)| match a.label() {
                "X" | "Y" => *area,
                l => l.parse::<f64>().unwrap() * area,
            })
            .collect();
        let total: f64 = w.iter().sum();
        let r: Vec<f64> = universe.iter().map(|a| observed.iter().position(|o| o == a).map_or(0.0, |i| w[i] / total)).collect();

        // Untyped genotype prior.
        let mut genotypes = Vec::new();
        let mut prior = HashMap::new();
        if amel {
            let t = params.amelogenin_prior.xx + params.amelogenin_prior.xy;
            for (g, p) in [(gt("X", "X"), params.amelogenin_prior.xx / t), (gt("X", "Y"), params.amelogenin_prior.xy / t), (gt("Y", "Y"), 0.0)] {
                genotypes.push(g.clone());
                prior.insert(g, p);
            }
        } else {
            let mut f: Vec<f64> = observed.iter().map(|a| case.frequencies.get(&m.marker, a).unwrap()).collect();
            let fx = (1.0 - f.iter().sum::<f64>()).max(0.0);
            f.push(fx);
            let ft: f64 = f.iter().sum();
            for i in 0..universe.len() {
                for j in i..universe.len() {
                    let g = Genotype::new(universe[i].clone(), universe[j].clone());
                    let p = if i == j { f[i] * f[i] } else { 2.0 * f[i] * f[j] } / (ft * ft);
                    genotypes.push(g.clone());
                    prior.insert(g, p);
                }
            }
        }
        let project = |g: &Genotype| {
            let map = |a: &Allele| if universe.contains(a) { a.clone() } else { Allele::pooled() };
            Genotype::new(map(g.first()), map(g.second()))
        };
        let suspect = if enter_suspect { case.suspect.as_ref().and_then(|p| p.genotype(&m.marker)).map(project) } else { None };
        let victim = if enter_victim { case.victim.as_ref().and_then(|p| p.genotype(&m.marker)).map(project) } else { None };
        let mut space = genotypes.clone();
        for k in [&suspect, &victim].into_iter().flatten() {
            if !space.contains(k) {
                space.push(k.clone());
            }
        }
        let person = |g: &Genotype, typed: &Option<Genotype>, selected: bool| -> f64 {
            match (typed, selected) {
                (Some(k), true) => (k == g) as u8 as f64,
                _ => prior.get(g).copied().unwrap_or(0.0),
            }
        };

        let mut pairs = Vec::new();
        let mut log_factor = Vec::new();
        for g1 in &space {
            for g2 in &space {
                let covered = observed.iter().all(|a| g1.contains(a) || g2.contains(a));
                let clean = g1.alleles().iter().chain(g2.alleles().iter()).all(|a| observed.contains(a));
                let mut row = vec![f64::NEG_INFINITY; 4 * n_theta];
                for s in 0..4 {
                    let p1 = person(g1, &suspect, s >= 2);
                    let p2 = person(g2, &victim, s % 2 == 1);
                    for (t, &theta) in points.iter().enumerate() {
                        if !(covered && clean) || p1 == 0.0 || p2 == 0.0 {
                            continue;
                        }
                        let mut ll = 0.0;
                        for (a, &ra) in universe.iter().zip(&r) {
                            let n1 = g1.alleles().iter().filter(|x| **x == a).count() as f64;
                            let n2 = g2.alleles().iter().filter(|x| **x == a).count() as f64;
                            let mu = (theta * n1 + (1.0 - theta) * n2) / 2.0;
                            let var = params.sigma2 * mu + params.omega2;
                            ll += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (ra - mu).powi(2) / (2.0 * var);
                        }
                        row[s * n_theta + t] = p1.ln() + p2.ln() + ll;
                    }
                }
                pairs.push((g1.clone(), g2.clone()));
                log_factor.push(row);
            }
        }
        tables.push(MarkerTable { pairs, log_factor });
    }

    // Full enumeration of marker configurations.
    let cell_prior: Vec<f64> = (0..4 * n_theta).map(|c| ln(sel_w[c / n_theta]) + ln(theta_w[c % n_theta])).collect();
    let mut configs: Vec<(Vec<usize>, Vec<f64>)> = vec![(Vec::new(), cell_prior)];
    for table in &tables {
        let mut next = Vec::with_capacity(configs.len() * table.pairs.len());
        for (idx, cells) in &configs {
            for (p, row) in table.log_factor.iter().enumerate() {
                let mut i = idx.clone();
                i.push(p);
                next.push((i, cells.iter().zip(row).map(|(a, b)| a + b).collect::<Vec<f64>>()));
            }
        }
        configs = next;
    }

    let all_cells: Vec<f64> = configs.iter().flat_map(|(_, c)| c.iter().copied()).collect();
    let log_evidence = lse(&all_cells);

    let mut target = [0.0; 4];
    let mut theta = vec![0.0; n_theta];
    let mut joint: Vec<HashMap<(Genotype, Genotype), f64>> = tables.iter().map(|_| HashMap::new()).collect();
    let mut ranked = Vec::with_capacity(configs.len());
    for (idx, cells) in &configs {
        for (c, &v) in cells.iter().enumerate() {
            if v > f64::NEG_INFINITY {
                let p = (v - log_evidence).exp();
                target[c / n_theta] += p;
                theta[c % n_theta] += p;
            }
        }
        let post = (lse(cells) - log_evidence).exp();
        let labels: Vec<(Genotype, Genotype)> = idx.iter().zip(&tables).map(|(&p, t)| t.pairs[p].clone()).collect();
        for (m, l) in labels.iter().enumerate() {
            *joint[m].entry(l.clone()).or_insert(0.0) += if post.is_nan() { 0.0 } else { post };
        }
        ranked.push((labels, post));
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    Oracle { log_evidence, target, theta, joint, ranked }
}

/// A random two-marker case with at most four observed alleles per marker
/// and at most nine theta points. Returns the case and a scenario it supports.
pub fn random_case(rng: &mut StdRng) -> (CaseData, Scenario) {
    let labels = ["6", "7", "8", "9", "9.3", "10", "11", "12"];
    let mut peaks = String::from("marker,allele,area\n");
    let mut freqs = String::from("marker,allele,frequency\n");
    let mut observed: Vec<(String, Vec<String>)> = Vec::new();
    let with_amel = rng.gen_bool(0.25);
    for m in 0..2 {
        if m == 0 && with_amel {
            let obs: Vec<&str> = if rng.gen_bool(0.7) { vec!["X", "Y"] } else { vec!["X"] };
            for a in &obs {
                peaks.push_str(&format!("AMEL,{a},{}\n", rng.gen_range(50.0..3000.0)));
            }
            observed.push(("AMEL".into(), obs.iter().map(|s| s.to_string()).collect()));
            continue;
        }
        let name = format!("M{m}");
        let n = rng.gen_range(1..=4);
        let mut chosen: Vec<&str> = labels.choose_multiple(rng, n).copied().collect();
        chosen.sort();
        let mut left = 1.0;
        for a in &chosen {
            let f = rng.gen_range(0.02..(left / 1.5_f64).max(0.03)).min(left * 0.9);
            left -= f;
            freqs.push_str(&format!("{name},{a},{f}\n"));
            peaks.push_str(&format!("{name},{a},{}\n", rng.gen_range(20.0..4000.0)));
        }
        observed.push((name, chosen.iter().map(|s| s.to_string()).collect()));
    }

    let profile = |rng: &mut StdRng| {
        let mut s = String::from("marker,allele1,allele2\n");
        for (name, obs) in &observed {
            let pick = |rng: &mut StdRng| -> String {
                if name == "AMEL" {
                    return if rng.gen_bool(0.5) { "X".into() } else { "Y".into() };
                }
                if rng.gen_bool(0.08) {
                    "13".into()
                } else {
                    obs.choose(rng).unwrap().clone()
                }
            };
            let (a, mut b) = (pick(rng), pick(rng));
            if name == "AMEL" && a == "Y" && b == "Y" {
                b = "X".into();
            }
            s.push_str(&format!("{name},{a},{b}\n"));
        }
        s
    };
    let suspect = profile(rng);
    let victim = profile(rng);

    let steps = rng.gen_range(1..=9);
    let grid = if rng.gen_bool(0.5) {
        ThetaGrid::uniform(steps).unwrap()
    } else {
        let mut pts: Vec<f64> = (0..steps).map(|_| rng.gen_range(0.02..0.98)).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let w: Vec<f64> = pts.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
        ThetaGrid::new(pts, w).unwrap()
    };
    let params = ModelParams {
        sigma2: rng.gen_range(0.005..0.05),
        omega2: rng.gen_range(0.0005..0.005),
        theta_grid: grid,
        ..ModelParams::default()
    };
    let mut scenario = *Scenario::ALL.choose(rng).unwrap();
    if scenario == Scenario::BothUnknownSeparation && params.theta_grid.points().iter().all(|&t| t < 0.5) {
        scenario = Scenario::SuspectOnly;
    }
    let case = parse_case(&peaks, Some(&suspect), Some(&victim), &freqs, params).unwrap();
    (case, scenario)
}

fn in_tie_group(oracle: &Oracle, rank: usize, config: &[(Genotype, Genotype)], tol: f64) -> bool {
    let p = oracle.ranked[rank].1;
    oracle.ranked.iter().any(|(c, q)| (q - p).abs() <= tol && c.as_slice() == config)
}

fn check_map(net: &CompiledNetwork, oracle: &Oracle, result: &MapResult, k: usize, what: &str) -> Result<(), String> {
    for (r, cfg) in result.ranked.iter().enumerate().take(result.certified) {
        let labels: Vec<(Genotype, Genotype)> = net.describe(&cfg.states).into_iter().map(|j| (j.gt1, j.gt2)).collect();
        let expected = oracle.ranked[r].1;
        if (cfg.posterior - expected).abs() > 1e-9 {
            return Err(format!("{what}: rank {} posterior {} vs oracle {}", r + 1, cfg.posterior, expected));
        }
        if !in_tie_group(oracle, r, &labels, 1e-12) {
            return Err(format!("{what}: false certificate at rank {}: {:?}", r + 1, labels));
        }
    }
    if result.space_exhausted && result.ranked.len() < k && oracle.ranked[result.ranked.len()].1 > 1e-12 {
        return Err(format!("{what}: returned {} ranks but oracle has more positive configurations", result.ranked.len()));
    }
    Ok(())
}

/// Adds the point one half (mapped to itself by reflection) so that a
/// both-unknown network can be compiled from any grid.
pub fn with_midpoint(case: &CaseData) -> CaseData {
    let mut case = case.clone();
    let grid = &case.params.theta_grid;
    if !grid.points().contains(&0.5) {
        let mut pairs: Vec<(f64, f64)> = grid.points().iter().copied().zip(grid.weights().iter().copied()).collect();
        pairs.push((0.5, 1.0 / grid.len() as f64));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        case.params.theta_grid = ThetaGrid::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect()).unwrap();
    }
    case
}

/// Both-unknown network with the proportion prior left untruncated.
pub fn unconstrained(case: &CaseData) -> CompiledNetwork {
    let mut net = compile(case, Scenario::BothUnknownSeparation).unwrap();
    net.theta_log_prior = case.params.theta_grid.weights().iter().map(|w| w.ln()).collect();
    net
}

pub fn reflected(case: &CaseData) -> CaseData {
    let mut case = case.clone();
    let grid = &case.params.theta_grid;
    let points = grid.points().iter().rev().map(|t| 1.0 - t).collect();
    let weights = grid.weights().iter().rev().copied().collect();
    case.params.theta_grid = ThetaGrid::new(points, weights).unwrap();
    case
}

/// Compares library inference and MAP search against the oracle.
/// Returns `Ok(false)` for a case whose evidence is impossible under both.
pub fn check_against_oracle(case: &CaseData, scenario: Scenario, k: usize) -> Result<bool, String> {
    let net = compile(case, scenario).map_err(|e| e.to_string())?;
    let oracle = brute_force(case, scenario);
    let lib = match propagate(&net) {
        Ok(r) => r,
        Err(dnamix::Error::ZeroEvidence { .. }) => {
            return if oracle.log_evidence == f64::NEG_INFINITY { Ok(false) } else { Err("library reports zero evidence, oracle does not".into()) };
        }
        Err(e) => return Err(e.to_string()),
    };
    let rel = ((lib.log_evidence - oracle.log_evidence).exp() - 1.0).abs();
    if rel > 1e-9 {
        return Err(format!("P(E) relative error {rel:e}"));
    }
    for (a, b) in lib.target.iter().zip(&oracle.target) {
        if (a - b).abs() > 1e-9 {
            return Err(format!("target marginal {a} vs {b}"));
        }
    }
    for (a, b) in lib.theta.iter().zip(&oracle.theta) {
        if (a - b).abs() > 1e-9 {
            return Err(format!("theta marginal {a} vs {b}"));
        }
    }
    for (m, factor) in net.markers.iter().enumerate() {
        let mut covered = 0.0;
        for p in 0..factor.n_pairs() {
            let j = factor.joint_genotype(p);
            let expected = oracle.joint[m].get(&(j.gt1.clone(), j.gt2.clone())).copied().unwrap_or(0.0);
            covered += expected;
            if (lib.joint[m][p] - expected).abs() > 1e-9 {
                return Err(format!("joint marginal {}: {} vs {}", j, lib.joint[m][p], expected));
            }
        }
        if (covered - 1.0).abs() > 1e-9 {
            return Err(format!("marker {} oracle mass outside library state space: {}", factor.name, 1.0 - covered));
        }
    }
    let k = k.min(net.state_space_size() as usize);
    let seq = map_search_sequential(&net, MapQuery::new(k)).map_err(|e| e.to_string())?;
    if seq.certified < k.min(seq.ranked.len()) {
        return Err(format!("sequential search certified only {} of {}", seq.certified, k));
    }
    check_map(&net, &oracle, &seq, k, "sequential")?;
    let batch = map_search_batch(&net, MapQuery::new(k).with_budget(50)).map_err(|e| e.to_string())?;
    check_map(&net, &oracle, &batch, k, "batch")?;
    for (a, b) in seq.ranked.iter().zip(&batch.ranked).take(seq.certified.min(batch.certified)) {
        if (a.posterior - b.posterior).abs() > 1e-12 {
            return Err("batch and sequential disagree on a certified rank".into());
        }
    }
    Ok(true)
}
