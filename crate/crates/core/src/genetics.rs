//! Alleles, genotypes, profiles, peak records and frequency tables, plus
//! parsing of the CSV inputs into a validated [`CaseData`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, InputKind, Result};

/// Label of the synthetic allele that pools every allele not seen in the trace.
pub const POOLED_LABEL: &str = "x";

/// Slack allowed when checking that a marker's listed frequencies sum to at most one.
pub const FREQUENCY_SUM_SLACK: f64 = 1e-9;

/// A marker allele, identified by its verbatim label.
///
/// Numeric labels ("15", "32.2") carry a repeat number. The sex alleles "X" and
/// "Y" and the pooled allele "x" do not.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Allele {
    label: String,
}

impl Allele {
    /// Parses an input label. Accepts positive decimals and the sex alleles `X`/`Y`.
    /// The pooled label is reserved and rejected here.
    pub fn parse(label: &str) -> Option<Allele> {
        let label = label.trim();
        if label.is_empty() || label == POOLED_LABEL {
            return None;
        }
        if label == "X" || label == "Y" {
            return Some(Allele { label: label.to_string() });
        }
        match label.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 && label.chars().all(|c| c.is_ascii_digit() || c == '.') => {
                Some(Allele { label: label.to_string() })
            }
            _ => None,
        }
    }

    pub fn pooled() -> Allele {
        Allele { label: POOLED_LABEL.to_string() }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_pooled(&self) -> bool {
        self.label == POOLED_LABEL
    }

    pub fn is_sex(&self) -> bool {
        self.label == "X" || self.label == "Y"
    }

    /// Repeat number, present for numeric labels only.
    pub fn repeat_value(&self) -> Option<f64> {
        if self.is_pooled() || self.is_sex() {
            None
        } else {
            self.label.parse().ok()
        }
    }
}

impl fmt::Display for Allele {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

// Numeric alleles sort by repeat number, then sex alleles, then the pooled allele.
impl Ord for Allele {
    fn cmp(&self, other: &Self) -> Ordering {
        fn rank(a: &Allele) -> u8 {
            if a.is_pooled() {
                2
            } else if a.repeat_value().is_some() {
                0
            } else {
                1
            }
        }
        rank(self).cmp(&rank(other)).then_with(|| match (self.repeat_value(), other.repeat_value()) {
            (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| self.label.cmp(&other.label)),
            _ => self.label.cmp(&other.label),
        })
    }
}

impl PartialOrd for Allele {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Unordered allele pair, stored with the smaller allele first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genotype {
    first: Allele,
    second: Allele,
}

impl Genotype {
    pub fn new(a: Allele, b: Allele) -> Genotype {
        if a <= b {
            Genotype { first: a, second: b }
        } else {
            Genotype { first: b, second: a }
        }
    }

    pub fn first(&self) -> &Allele {
        &self.first
    }

    pub fn second(&self) -> &Allele {
        &self.second
    }

    pub fn is_homozygous(&self) -> bool {
        self.first == self.second
    }

    pub fn contains(&self, allele: &Allele) -> bool {
        &self.first == allele || &self.second == allele
    }

    /// Number of copies of `allele` (0, 1 or 2).
    pub fn count(&self, allele: &Allele) -> u8 {
        (&self.first == allele) as u8 + (&self.second == allele) as u8
    }

    pub fn alleles(&self) -> [&Allele; 2] {
        [&self.first, &self.second]
    }
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.first, self.second)
    }
}

/// True for the sex-typing marker, recognised by name ("Amelogenin", "AMEL", ...).
pub fn is_amelogenin(marker: &str) -> bool {
    marker.trim().to_ascii_lowercase().starts_with("amel")
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeakRecord {
    pub marker: String,
    pub allele: Allele,
    pub area: f64,
}

/// All peaks called at one marker, in input order.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkerPeaks {
    pub marker: String,
    pub peaks: Vec<(Allele, f64)>,
}

impl MarkerPeaks {
    pub fn observed(&self) -> impl Iterator<Item = &Allele> {
        self.peaks.iter().map(|(a, _)| a)
    }

    pub fn is_amelogenin(&self) -> bool {
        is_amelogenin(&self.marker)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Suspect,
    Victim,
}

impl Role {
    fn input(self) -> InputKind {
        match self {
            Role::Suspect => InputKind::Suspect,
            Role::Victim => InputKind::Victim,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub role: Role,
    pub genotypes: BTreeMap<String, Genotype>,
}

impl Profile {
    pub fn genotype(&self, marker: &str) -> Option<&Genotype> {
        self.genotypes.get(marker)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("marker,allele1,allele2\n");
        for (marker, gt) in &self.genotypes {
            out.push_str(&format!("{},{},{}\n", marker, gt.first(), gt.second()));
        }
        out
    }
}

/// Population allele frequencies keyed by marker then allele.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrequencyTable {
    entries: BTreeMap<String, BTreeMap<Allele, f64>>,
}

impl FrequencyTable {
    pub fn new() -> FrequencyTable {
        FrequencyTable::default()
    }

    /// Inserts an entry, rejecting frequencies outside (0, 1].
    pub fn insert(&mut self, marker: &str, allele: Allele, frequency: f64) -> Result<()> {
        if !(frequency > 0.0 && frequency <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "frequency {frequency} for {marker}/{allele} is outside (0, 1]"
            )));
        }
        self.entries.entry(marker.to_string()).or_default().insert(allele, frequency);
        Ok(())
    }

    pub fn get(&self, marker: &str, allele: &Allele) -> Option<f64> {
        self.entries.get(marker).and_then(|m| m.get(allele)).copied()
    }

    pub fn markers(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn parse(text: &str) -> Result<FrequencyTable> {
        let input = InputKind::Frequencies;
        let mut table = FrequencyTable::new();
        for row in read_rows(text, input, &["marker", "allele", "frequency"])? {
            let [marker, label, value] = row.fields;
            let allele = Allele::parse(&label).ok_or_else(|| Error::UnknownAllele {
                input,
                line: row.line,
                label: label.clone(),
            })?;
            let frequency = parse_number(&value, input, row.line, "frequency")?;
            if !(frequency > 0.0 && frequency <= 1.0) {
                return Err(Error::Malformed {
                    input,
                    line: row.line,
                    message: format!("frequency {frequency} is outside (0, 1]"),
                });
            }
            if table.get(&marker, &allele).is_some() {
                return Err(Error::Duplicate { input, line: row.line, marker, allele: label });
            }
            table.insert(&marker, allele, frequency)?;
        }
        for (marker, alleles) in &table.entries {
            let total: f64 = alleles.values().sum();
            if total > 1.0 + FREQUENCY_SUM_SLACK {
                return Err(Error::FrequencyOverflow { marker: marker.clone(), total });
            }
        }
        Ok(table)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("marker,allele,frequency\n");
        for (marker, alleles) in &self.entries {
            for (allele, f) in alleles {
                out.push_str(&format!("{marker},{allele},{f}\n"));
            }
        }
        out
    }
}

/// Frequency of the pooled allele: one minus the observed alleles' frequencies, floored at zero.
pub fn pooled_frequency<'a>(
    marker: &str,
    observed: impl IntoIterator<Item = &'a Allele>,
    freqs: &FrequencyTable,
) -> Result<f64> {
    let mut total = 0.0;
    for allele in observed {
        total += freqs.get(marker, allele).ok_or_else(|| Error::MissingFrequency {
            marker: marker.to_string(),
            allele: allele.to_string(),
        })?;
    }
    Ok((1.0 - total).max(0.0))
}

/// Discrete grid for the mixture proportion with a prior weight per point.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl ThetaGrid {
    /// `steps` equally spaced interior points `i / (steps + 1)`, uniform prior.
    pub fn uniform(steps: usize) -> Result<ThetaGrid> {
        if steps == 0 {
            return Err(Error::InvalidParams("theta grid needs at least one point".into()));
        }
        let points = (1..=steps).map(|i| i as f64 / (steps + 1) as f64).collect();
        ThetaGrid::new(points, vec![1.0; steps])
    }

    /// Builds a grid from strictly increasing points in (0, 1) and positive weights.
    /// Weights are normalised to sum to one.
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<ThetaGrid> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidParams("theta grid points and weights must be non-empty and of equal length".into()));
        }
        if points.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::InvalidParams("theta grid points must lie in (0, 1)".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams("theta grid points must be strictly increasing".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParams("theta prior weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(ThetaGrid { points, weights })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Prior over the sex-marker genotypes of an untyped person. YY is impossible.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SexPrior {
    pub xx: f64,
    pub xy: f64,
}

impl Default for SexPrior {
    fn default() -> Self {
        SexPrior { xx: 0.5, xy: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Amplification variance factor.
    pub sigma2: f64,
    /// Measurement variance.
    pub omega2: f64,
    pub theta_grid: ThetaGrid,
    pub amelogenin_prior: SexPrior,
}

pub const DEFAULT_SIGMA2: f64 = 0.01;
pub const DEFAULT_OMEGA2: f64 = 0.001;
pub const DEFAULT_THETA_STEPS: usize = 99;

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            sigma2: DEFAULT_SIGMA2,
            omega2: DEFAULT_OMEGA2,
            theta_grid: ThetaGrid::uniform(DEFAULT_THETA_STEPS).expect("default grid"),
            amelogenin_prior: SexPrior::default(),
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParams(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.omega2 > 0.0 && self.omega2.is_finite()) {
            return Err(Error::InvalidParams(format!("omega2 must be positive, got {}", self.omega2)));
        }
        let SexPrior { xx, xy } = self.amelogenin_prior;
        if !(xx >= 0.0 && xy >= 0.0 && xx + xy > 0.0) {
            return Err(Error::InvalidParams("amelogenin prior must be nonnegative with positive mass".into()));
        }
        Ok(())
    }
}

/// A validated two-person mixture case.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseData {
    pub markers: Vec<MarkerPeaks>,
    pub suspect: Option<Profile>,
    pub victim: Option<Profile>,
    pub params: ModelParams,
    pub frequencies: FrequencyTable,
}

impl CaseData {
    pub fn marker(&self, name: &str) -> Option<&MarkerPeaks> {
        self.markers.iter().find(|m| m.marker == name)
    }

    pub fn profile(&self, role: Role) -> Option<&Profile> {
        match role {
            Role::Suspect => self.suspect.as_ref(),
            Role::Victim => self.victim.as_ref(),
        }
    }

    pub fn peak_records(&self) -> impl Iterator<Item = PeakRecord> + '_ {
        self.markers.iter().flat_map(|m| {
            m.peaks.iter().map(move |(a, area)| PeakRecord {
                marker: m.marker.clone(),
                allele: a.clone(),
                area: *area,
            })
        })
    }

    pub fn peaks_to_csv(&self) -> String {
        let mut out = String::from("marker,allele,area\n");
        for rec in self.peak_records() {
            out.push_str(&format!("{},{},{}\n", rec.marker, rec.allele, rec.area));
        }
        out
    }

    /// Returns a copy with every peak area multiplied by `factor`.
    pub fn scaled_areas(&self, factor: f64) -> CaseData {
        let mut case = self.clone();
        for m in &mut case.markers {
            for (_, area) in &mut m.peaks {
                *area *= factor;
            }
        }
        case
    }
}

struct Row<const N: usize> {
    line: u64,
    fields: [String; N],
}

fn read_rows<const N: usize>(text: &str, input: InputKind, header: &[&str; N]) -> Result<Vec<Row<N>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found = reader.headers().map_err(|e| Error::Malformed {
        input,
        line: 1,
        message: e.to_string(),
    })?;
    let found: Vec<&str> = found.iter().collect();
    if found.as_slice() != header.as_slice() {
        return Err(Error::Malformed {
            input,
            line: 1,
            message: format!("expected header {:?}, found {:?}", header.join(","), found.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Malformed {
            input,
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != N {
            return Err(Error::Malformed {
                input,
                line,
                message: format!("expected {N} fields, found {}", record.len()),
            });
        }
        if let Some(pos) = record.iter().position(str::is_empty) {
            return Err(Error::Malformed {
                input,
                line,
                message: format!("empty field {:?}", header[pos]),
            });
        }
        let fields = std::array::from_fn(|i| record[i].to_string());
        rows.push(Row { line, fields });
    }
    Ok(rows)
}

fn parse_number(value: &str, input: InputKind, line: u64, what: &str) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Malformed {
            input,
            line,
            message: format!("{what} {value:?} is not a number"),
        }),
    }
}

fn parse_peaks(text: &str) -> Result<Vec<MarkerPeaks>> {
    let input = InputKind::Peaks;
    let mut markers: Vec<MarkerPeaks> = Vec::new();
    let mut seen = BTreeSet::new();
    for row in read_rows(text, input, &["marker", "allele", "area"])? {
        let [marker, label, area] = row.fields;
        let allele = Allele::parse(&label)
            .filter(|a| !is_amelogenin(&marker) || a.is_sex())
            .ok_or_else(|| Error::UnknownAllele { input, line: row.line, label: label.clone() })?;
        let area = parse_number(&area, input, row.line, "area")?;
        if area < 0.0 {
            return Err(Error::NegativeArea { input, line: row.line, marker, allele: label, area });
        }
        if !seen.insert((marker.clone(), allele.clone())) {
            return Err(Error::Duplicate { input, line: row.line, marker, allele: label });
        }
        match markers.iter_mut().find(|m| m.marker == marker) {
            Some(m) => m.peaks.push((allele, area)),
            None => markers.push(MarkerPeaks { marker, peaks: vec![(allele, area)] }),
        }
    }
    if markers.is_empty() {
        return Err(Error::Malformed { input, line: 1, message: "no peaks".into() });
    }
    Ok(markers)
}

fn parse_profile(text: &str, role: Role, markers: &[MarkerPeaks]) -> Result<Option<Profile>> {
    let input = role.input();
    if text.trim().is_empty() {
        return Ok(None);
    }
    let rows = read_rows(text, input, &["marker", "allele1", "allele2"])?;
    if rows.is_empty() {
        return Ok(None);
    }
    let mut genotypes = BTreeMap::new();
    for row in rows {
        let [marker, l1, l2] = row.fields;
        if !markers.iter().any(|m| m.marker == marker) {
            return Err(Error::UnknownMarker { input, marker });
        }
        let parse = |label: &str| {
            Allele::parse(label)
                .filter(|a| !is_amelogenin(&marker) || a.is_sex())
                .ok_or_else(|| Error::UnknownAllele { input, line: row.line, label: label.to_string() })
        };
        let gt = Genotype::new(parse(&l1)?, parse(&l2)?);
        if is_amelogenin(&marker) && gt.first().label() == "Y" {
            return Err(Error::Malformed { input, line: row.line, message: "YY is not a valid sex genotype".into() });
        }
        if genotypes.insert(marker.clone(), gt).is_some() {
            return Err(Error::Duplicate { input, line: row.line, marker, allele: format!("{l1}/{l2}") });
        }
    }
    Ok(Some(Profile { role, genotypes }))
}

/// Parses and validates the CSV inputs of a case.
///
/// Profile texts that are absent, empty or header-only leave that profile out.
pub fn parse_case(
    peaks_text: &str,
    suspect_text: Option<&str>,
    victim_text: Option<&str>,
    freq_text: &str,
    params: ModelParams,
) -> Result<CaseData> {
    params.validate()?;
    let markers = parse_peaks(peaks_text)?;
    let suspect = match suspect_text {
        Some(t) => parse_profile(t, Role::Suspect, &markers)?,
        None => None,
    };
    let victim = match victim_text {
        Some(t) => parse_profile(t, Role::Victim, &markers)?,
        None => None,
    };
    let frequencies = FrequencyTable::parse(freq_text)?;
    for m in markers.iter().filter(|m| !m.is_amelogenin()) {
        for allele in m.observed() {
            if frequencies.get(&m.marker, allele).is_none() {
                return Err(Error::MissingFrequency {
                    marker: m.marker.clone(),
                    allele: allele.to_string(),
                });
            }
        }
    }
    Ok(CaseData { markers, suspect, victim, params, frequencies })
}
