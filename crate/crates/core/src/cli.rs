//! Command-line front end.
//!
//! Exit status: 0 on success, 2 for usage or input validation errors, 3 when
//! the evidence has probability zero, 1 for output failures.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::casework::{
    evidential, proportion_posterior, separate_with, EvidentialReport, ProportionPosterior, SearchVariant,
    SeparationMode, SeparationReport,
};
use crate::error::Error;
use crate::genetics::{parse_case, CaseData, ModelParams, SexPrior, ThetaGrid, DEFAULT_OMEGA2, DEFAULT_SIGMA2};
use crate::map_search::DEFAULT_BATCH_SIZE;
use crate::network::{Scenario, TargetState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OUTPUT: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ZERO_EVIDENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dnamix", version, about = "Two-person DNA mixture analysis from peak areas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Likelihood ratios for contributor hypotheses.
    Evidential(EvidentialArgs),
    /// Ranked genotype configurations of the two contributors.
    Separate(SeparateArgs),
    /// Posterior of the mixture proportion.
    Proportion(ProportionArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Peak table: marker,allele,area
    #[arg(long)]
    peaks: PathBuf,
    /// Allele frequencies: marker,allele,frequency
    #[arg(long)]
    freq: PathBuf,
    /// Suspect profile: marker,allele1,allele2
    #[arg(long)]
    suspect: Option<PathBuf>,
    /// Victim profile: marker,allele1,allele2
    #[arg(long)]
    victim: Option<PathBuf>,
    /// Directory for report files; reports always go to stdout.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Amplification variance factor.
    #[arg(long, default_value_t = DEFAULT_SIGMA2, value_parser = positive_f64)]
    sigma2: f64,
    /// Measurement variance.
    #[arg(long, default_value_t = DEFAULT_OMEGA2, value_parser = positive_f64)]
    omega2: f64,
    /// Number of interior grid points for the mixture proportion.
    #[arg(long, default_value_t = crate::genetics::DEFAULT_THETA_STEPS, value_parser = positive_usize)]
    theta_steps: usize,
    /// Prior probability that an untyped person is female (amelogenin XX).
    #[arg(long, default_value_t = 0.5)]
    female_prior: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
struct EvidentialArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct SeparateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::BothUnknown)]
    mode: ModeArg,
    #[arg(long, default_value_t = 5, value_parser = positive_usize)]
    top_k: usize,
    /// Candidates scored by the batch search.
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE, value_parser = positive_usize)]
    batch_n: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Batch)]
    variant: VariantArg,
}

#[derive(Debug, Args)]
struct ProportionArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value_t = ScenarioArg::BothUnknown)]
    scenario: ScenarioArg,
    /// Also print a text histogram.
    #[arg(long)]
    histogram: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    VictimKnown,
    BothUnknown,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Batch,
    Sequential,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioArg {
    SuspectAndVictim,
    SuspectOnly,
    VictimKnown,
    BothUnknown,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Scenario {
        match s {
            ScenarioArg::SuspectAndVictim => Scenario::SuspectAndVictim,
            ScenarioArg::SuspectOnly => Scenario::SuspectOnly,
            ScenarioArg::VictimKnown => Scenario::VictimKnownSeparation,
            ScenarioArg::BothUnknown => Scenario::BothUnknownSeparation,
        }
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("{s:?} is not a positive number")),
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("{s:?} is not a positive integer")),
    }
}

enum Failure {
    Input(String),
    Zero(String),
    Output(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::ZeroEvidence { .. } => Failure::Zero(e.to_string()),
            Error::Io(_) => Failure::Output(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn load_case(args: &CommonArgs) -> Result<CaseData, Failure> {
    if !(0.0..=1.0).contains(&args.female_prior) {
        return Err(Failure::Input("--female-prior must lie in [0, 1]".into()));
    }
    let params = ModelParams {
        sigma2: args.sigma2,
        omega2: args.omega2,
        theta_grid: ThetaGrid::uniform(args.theta_steps)?,
        amelogenin_prior: SexPrior { xx: args.female_prior, xy: 1.0 - args.female_prior },
    };
    let peaks = read(&args.peaks)?;
    let freqs = read(&args.freq)?;
    let suspect = args.suspect.as_deref().map(read).transpose()?;
    let victim = args.victim.as_deref().map(read).transpose()?;
    Ok(parse_case(&peaks, suspect.as_deref(), victim.as_deref(), &freqs, params)?)
}

/// Parses `argv` (program name first), runs the subcommand, and returns the exit status.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                EXIT_INPUT
            } else {
                let _ = write!(stdout, "{}", e.render());
                EXIT_OK
            };
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            let (code, msg) = match failure {
                Failure::Input(m) => (EXIT_INPUT, m),
                Failure::Zero(m) => (EXIT_ZERO_EVIDENCE, m),
                Failure::Output(m) => (EXIT_OUTPUT, m),
            };
            let _ = writeln!(stderr, "error: {msg}");
            code
        }
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), Failure> {
    let mut outputs: Vec<(String, String)> = Vec::new();
    let common = match &cli.command {
        Command::Evidential(a) => &a.common,
        Command::Separate(a) => &a.common,
        Command::Proportion(a) => &a.common,
    };
    let case = load_case(common)?;
    let format = common.format;
    match &cli.command {
        Command::Evidential(_) => {
            let scenario = if case.victim.is_some() { Scenario::SuspectAndVictim } else { Scenario::SuspectOnly };
            let report = evidential(&case, scenario)?;
            let (name, body) = match format {
                Format::Text => ("evidential.txt", evidential_text(&report)),
                Format::Csv => ("evidential.csv", evidential_csv(&report)),
            };
            outputs.push((name.into(), body));
        }
        Command::Separate(a) => {
            let mode = match a.mode {
                ModeArg::VictimKnown => SeparationMode::VictimKnown,
                ModeArg::BothUnknown => SeparationMode::BothUnknown,
            };
            let variant = match a.variant {
                VariantArg::Batch => SearchVariant::Batch { budget: a.batch_n },
                VariantArg::Sequential => SearchVariant::Sequential,
            };
            let report = separate_with(&case, mode, a.top_k, variant)?;
            let (name, body) = match format {
                Format::Text => ("separation.txt", separation_text(&report)),
                Format::Csv => ("separation.csv", separation_csv(&report)),
            };
            outputs.push((name.into(), body));
        }
        Command::Proportion(a) => {
            let post = proportion_posterior(&case, a.scenario.into())?;
            outputs.push(("proportion.csv".into(), proportion_csv(&post)));
            if a.histogram {
                outputs.push(("proportion_histogram.txt".into(), proportion_histogram(&post, 50)));
            }
        }
    }

    for (_, body) in &outputs {
        stdout.write_all(body.as_bytes()).map_err(|e| Failure::Output(e.to_string()))?;
    }
    if let Some(dir) = &common.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Output(format!("cannot create {}: {e}", dir.display())))?;
        for (name, body) in &outputs {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Failure::Output(format!("cannot write {}: {e}", path.display())))?;
        }
    }
    Ok(())
}

/// Scientific notation with three significant digits, e.g. `2.73e10`.
pub fn sci3(v: f64) -> String {
    format!("{v:.2e}")
}

pub fn evidential_text(r: &EvidentialReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {}", r.scenario);
    let _ = writeln!(s, "sigma2: {}  omega2: {}  theta points: {}", r.sigma2, r.omega2, r.theta_points);
    let _ = writeln!(s, "log P(E): {:.6}", r.log_evidence);
    let _ = writeln!(s, "target posterior:");
    for t in TargetState::ALL {
        let _ = writeln!(s, "  {:<8} {:.13e}", t.label(), r.posterior(t));
    }
    let _ = writeln!(s, "likelihood ratios:");
    for lr in &r.ratios {
        let _ = writeln!(s, "  P({} | E) / P({} | E) = {}", lr.numerator, lr.denominator, sci3(lr.value));
    }
    s
}

pub fn evidential_csv(r: &EvidentialReport) -> String {
    let mut s = String::from("kind,label,value\n");
    for t in TargetState::ALL {
        let _ = writeln!(s, "posterior,{},{:e}", t.label(), r.posterior(t));
    }
    for lr in &r.ratios {
        let _ = writeln!(s, "ratio,{} / {},{:e}", lr.numerator, lr.denominator, lr.value);
    }
    s
}

pub fn separation_text(r: &SeparationReport) -> String {
    let mut s = String::new();
    let mode = match r.mode {
        SeparationMode::VictimKnown => "victim-known",
        SeparationMode::BothUnknown => "both-unknown",
    };
    let _ = writeln!(s, "mode: {mode}");
    let _ = writeln!(s, "candidates examined: {}  certified ranks: {}", r.examined, r.certified);
    if r.budget_exhausted {
        let _ = writeln!(s, "warning: candidate budget exhausted before all ranks were certified");
    }
    for (i, c) in r.ranked.iter().enumerate() {
        let _ = writeln!(
            s,
            "\nrank {}  posterior {:.6}  product of marginals {:.6}  {}",
            i + 1,
            c.posterior,
            c.product_of_marginals,
            if c.certified { "certified" } else { "uncertified" }
        );
        let _ = writeln!(s, "  {:<12} {:<10} {:<10} marginal", "marker", "p1", "p2");
        for (g, m) in c.genotypes.iter().zip(&c.marker_marginals) {
            let _ = writeln!(s, "  {:<12} {:<10} {:<10} {:.6}", g.marker, g.gt1.to_string(), g.gt2.to_string(), m);
        }
    }
    if let Some(res) = r.residual {
        let _ = writeln!(s, "\nresidual mass: {}", sci3(res));
    }
    s
}

pub fn separation_csv(r: &SeparationReport) -> String {
    let mut s = String::from("rank,marker,p1,p2,marker_marginal,posterior,product_of_marginals,certified\n");
    for (i, c) in r.ranked.iter().enumerate() {
        for (g, m) in c.genotypes.iter().zip(&c.marker_marginals) {
            let _ = writeln!(
                s,
                "{},{},{},{},{:e},{:e},{:e},{}",
                i + 1,
                g.marker,
                g.gt1,
                g.gt2,
                m,
                c.posterior,
                c.product_of_marginals,
                c.certified
            );
        }
    }
    s
}

pub fn proportion_csv(p: &ProportionPosterior) -> String {
    let mut s = String::from("theta,posterior\n");
    for (t, w) in p.theta.iter().zip(&p.posterior) {
        let _ = writeln!(s, "{t},{w}");
    }
    s
}

/// Reads a `theta,posterior` CSV back into pairs.
pub fn read_proportion_csv(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let t = rec[0].parse::<f64>().map_err(|e| e.to_string())?;
        let p = rec[1].parse::<f64>().map_err(|e| e.to_string())?;
        out.push((t, p));
    }
    Ok(out)
}

pub fn proportion_histogram(p: &ProportionPosterior, width: usize) -> String {
    let max = p.posterior.iter().copied().fold(0.0, f64::max);
    let mut s = String::new();
    for (t, w) in p.theta.iter().zip(&p.posterior) {
        let n = if max > 0.0 { (w / max * width as f64).round() as usize } else { 0 };
        let _ = writeln!(s, "{t:>6.3} {w:>10.6} {}", "#".repeat(n));
    }
    s
}
