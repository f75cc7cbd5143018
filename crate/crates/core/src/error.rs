use thiserror::Error;

/// Which input a parse error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Peaks,
    Suspect,
    Victim,
    Frequencies,
}

impl std::fmt::Display for InputKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            InputKind::Peaks => "peaks",
            InputKind::Suspect => "suspect profile",
            InputKind::Victim => "victim profile",
            InputKind::Frequencies => "frequencies",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{input} line {line}: {message}")]
    Malformed {
        input: InputKind,
        line: u64,
        message: String,
    },

    #[error("{input} line {line}: negative area {area} for {marker}/{allele}")]
    NegativeArea {
        input: InputKind,
        line: u64,
        marker: String,
        allele: String,
        area: f64,
    },

    #[error("{input} line {line}: duplicate entry for {marker}/{allele}")]
    Duplicate {
        input: InputKind,
        line: u64,
        marker: String,
        allele: String,
    },

    #[error("{input} line {line}: allele label {label:?} is not a known allele")]
    UnknownAllele {
        input: InputKind,
        line: u64,
        label: String,
    },

    #[error("{input}: marker {marker} does not appear in the peak data")]
    UnknownMarker { input: InputKind, marker: String },

    #[error("no frequency for observed allele {marker}/{allele}")]
    MissingFrequency { marker: String, allele: String },

    #[error("frequencies for marker {marker} sum to {total}, above 1")]
    FrequencyOverflow { marker: String, total: f64 },

    #[error("degenerate marker {marker}: total peak weight is zero")]
    DegenerateMarker { marker: String },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("scenario {scenario} requires a {role} profile")]
    MissingProfile {
        scenario: &'static str,
        role: &'static str,
    },

    #[error("theta grid is empty after applying the symmetry constraint")]
    EmptyThetaGrid,

    #[error("{}", zero_evidence_message(.marker))]
    ZeroEvidence { marker: Option<String> },

    #[error("requested {requested} configurations but the state space has only {available}")]
    StateSpaceTooSmall { requested: usize, available: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn zero_evidence_message(marker: &Option<String>) -> String {
    match marker {
        Some(m) => format!("evidence has probability zero: marker {m} is inconsistent with every hypothesis"),
        None => "evidence has probability zero: markers are jointly inconsistent".to_string(),
    }
}

impl Error {
    /// True for input validation failures (as opposed to inference outcomes).
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::ZeroEvidence { .. } | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
