use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dmtlab::OutageMode;

use crate::config::CommonArgs;

/// Outage, diversity and code-criterion experiments for MIMO channels under
/// selective fading. CSV goes to stdout (or --output); summaries go to stderr.
///
/// Exit codes: 0 success, 2 validation error, 3 insufficient data.
#[derive(Debug, Parser)]
#[command(name = "dmtlab", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Write CSV here instead of stdout
    #[arg(long, short, global = true, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Theoretical tradeoff curve d(r): CSV r,d
    Curve(CurveArgs),
    /// Monte Carlo outage table: CSV snr_db,r,mode,trials,outages,p_hat,ci_lo,ci_hi
    Outage(OutageArgs),
    /// Jensen outage table (same columns as `outage`)
    Jensen(JensenArgs),
    /// Fit diversity exponents from a sweep or from a table of counts
    Exponent(ExponentArgs),
    /// Rank-criterion report for a codebook: per-pair CSV, verdict on stderr
    Criterion(CriterionArgs),
    /// Pairwise error probability bounds: CSV snr_db,i,j,pep_bound
    Pep(PepArgs),
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Covariance rank rho [default: rank of the configured channel]
    #[arg(long)]
    pub rank: Option<usize>,
    /// Also sample the curve every STEP in r (vertices are always listed)
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OutageArgs {
    /// Comma-separated events: outage, level, exact, reduced, lambda-min, whitened, lambda-max
    #[arg(long, value_delimiter = ',', default_value = "outage")]
    pub modes: Vec<OutageMode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum JensenModeArg {
    /// Jensen channel of the correlated draws
    Exact,
    /// i.i.d. m_min x (rho m_max) channel
    Reduced,
}

impl From<JensenModeArg> for OutageMode {
    fn from(m: JensenModeArg) -> Self {
        match m {
            JensenModeArg::Exact => OutageMode::JensenExact,
            JensenModeArg::Reduced => OutageMode::JensenReduced,
        }
    }
}

#[derive(Debug, Args)]
pub struct JensenArgs {
    #[arg(long, value_enum, default_value_t = JensenModeArg::Exact)]
    pub mode: JensenModeArg,
}

#[derive(Debug, Args)]
pub struct ExponentArgs {
    /// Fit counts from a CSV with columns snr_db,trials,outages and optional r
    /// instead of running a sweep
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Event to sweep
    #[arg(long, default_value = "outage")]
    pub mode: OutageMode,
}

#[derive(Debug, Args)]
pub struct CodebookSource {
    /// Codebook file; repeat once per --snr-db entry to describe a code family
    #[arg(long, value_name = "FILE", required_unless_present = "delay_diversity")]
    pub codebook: Vec<PathBuf>,
    /// Use the built-in delay-diversity code over an M-PSK alphabet instead of a file
    #[arg(long, value_name = "M", conflicts_with = "codebook")]
    pub delay_diversity: Option<usize>,
    /// Save the (first) codebook in file format
    #[arg(long, value_name = "FILE")]
    pub save_codebook: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CriterionArgs {
    #[command(flatten)]
    pub source: CodebookSource,
    /// Margin epsilon of the decay check, run when a family spans two or more SNRs
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
}

#[derive(Debug, Args)]
pub struct PepArgs {
    #[command(flatten)]
    pub source: CodebookSource,
}
