//! Experiment configuration: a TOML manifest overridden by command-line flags.
//!
//! ```toml
//! seed = 7
//! trials = 1000000
//! workers = 4
//! snr_db = [10, 20, 30, 40]
//! rates = [0.1]
//! min_events = 50
//!
//! [channel]
//! pdp = [0.5, 0.5]             # or: correlation = [[1.0, 0.0], [0.4, -0.2]]
//! slots = 4
//!
//! [antennas]
//! m_t = 1
//! m_r = 1
//! ```

use std::path::{Path, PathBuf};

use clap::Args;
use dmtlab::montecarlo::DEFAULT_MIN_EVENTS;
use dmtlab::{AntennaConfig, CovarianceSpec, Execution, PowerDelayProfile, SnrPoint};
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "DMTLAB_SEED";
pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_SNR_DB: [f64; 3] = [10.0, 20.0, 30.0];
pub const DEFAULT_RATE: f64 = 0.5;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub workers: Option<usize>,
    pub snr_db: Option<Vec<f64>>,
    pub rates: Option<Vec<f64>>,
    pub min_events: Option<u64>,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub antennas: AntennaSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub pdp: Option<Vec<f64>>,
    /// `[re, im]` pairs `r(0), r(1), ..., r(N-1)`.
    pub correlation: Option<Vec<[f64; 2]>>,
    pub slots: Option<usize>,
    pub rank_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaSection {
    pub m_t: Option<usize>,
    pub m_r: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading config {}", path.display()), e))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }
}

/// Flags shared by every subcommand; each overrides the matching config key.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML experiment manifest
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed [default: $DMTLAB_SEED, else 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo trials per grid point [default: 100000]
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Worker threads; 1 runs sequentially [default: available cores]
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Comma-separated SNR grid in dB [default: 10,20,30]
    #[arg(
        long = "snr-db",
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    pub snr_db: Option<Vec<f64>>,
    /// Comma-separated multiplexing rates [default: 0.5]
    #[arg(long, global = true, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    /// Power delay profile (tap variances, comma-separated) [default: 1]
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        conflicts_with = "correlation"
    )]
    pub pdp: Option<Vec<f64>>,
    /// Correlation r(0..N-1) as semicolon-separated `re,im` pairs, e.g. "1,0;0.5,0"
    #[arg(long, global = true)]
    pub correlation: Option<String>,
    /// Block length N [default: number of taps, or correlation length]
    #[arg(long, global = true)]
    pub slots: Option<usize>,
    /// Relative tolerance for numerical rank [default: 64 N machine-epsilon]
    #[arg(long = "rank-tol", global = true)]
    pub rank_tol: Option<f64>,
    /// Transmit antennas [default: 1]
    #[arg(long = "mt", global = true)]
    pub m_t: Option<usize>,
    /// Receive antennas [default: 1]
    #[arg(long = "mr", global = true)]
    pub m_r: Option<usize>,
    /// Minimum outage events for a point to enter an exponent fit [default: 50]
    #[arg(long = "min-events", global = true)]
    pub min_events: Option<u64>,
}

/// How the channel covariance was specified, kept for summaries.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSource {
    Pdp(Vec<f64>),
    Correlation(Vec<Complex64>),
}

/// Fully validated experiment parameters.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: ChannelSource,
    pub cov: CovarianceSpec,
    pub ant: AntennaConfig,
    pub snrs: Vec<SnrPoint>,
    pub rates: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
    pub min_events: u64,
    /// Whether `m_t` / `N` were given rather than defaulted; codebook commands
    /// take unset values from the codebook.
    pub m_t_explicit: bool,
    pub slots_explicit: bool,
    pub rank_tol: Option<f64>,
}

impl ExperimentConfig {
    pub fn execution(&self) -> Execution {
        Execution::with_workers(self.workers)
    }

    /// The configured covariance, rebuilt for `slots` when the block length was
    /// left to default and the channel is a power delay profile.
    pub fn covariance_for(&self, slots: usize) -> CliResult<CovarianceSpec> {
        match &self.source {
            ChannelSource::Pdp(v) if !self.slots_explicit && slots != self.cov.slots() => {
                let pdp = PowerDelayProfile::new(v.clone())?;
                Ok(match self.rank_tol {
                    Some(tol) => CovarianceSpec::from_pdp_with_tol(&pdp, slots, tol)?,
                    None => CovarianceSpec::from_pdp(&pdp, slots)?,
                })
            }
            _ => Ok(self.cov.clone()),
        }
    }
}

pub fn parse_correlation(text: &str) -> CliResult<Vec<Complex64>> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(k, pair)| {
            let (re, im) = pair.split_once(',').ok_or_else(|| {
                CliError::Validation(format!(
                    "correlation entry {k}: expected 're,im', got '{pair}'"
                ))
            })?;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| {
                    CliError::Validation(format!("correlation entry {k}: '{s}' is not a number"))
                })
            };
            Ok(Complex64::new(parse(re)?, parse(im)?))
        })
        .collect()
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            CliError::Validation(format!("{SEED_ENV}='{v}' is not an unsigned integer"))
        }),
        Err(_) => Ok(None),
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl CommonArgs {
    /// Merges flags over the config file over defaults and validates the result.
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        resolve(self, file)
    }
}

fn resolve(args: &CommonArgs, file: FileConfig) -> CliResult<ExperimentConfig> {
    let seed = match args.seed.or(file.seed) {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let trials = args.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(CliError::Validation("trials must be at least 1".into()));
    }
    let workers = args
        .workers
        .or(file.workers)
        .unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(CliError::Validation("workers must be at least 1".into()));
    }
    let min_events = args
        .min_events
        .or(file.min_events)
        .unwrap_or(DEFAULT_MIN_EVENTS);

    let snr_db = args
        .snr_db
        .clone()
        .or(file.snr_db)
        .unwrap_or_else(|| DEFAULT_SNR_DB.to_vec());
    if snr_db.is_empty() {
        return Err(CliError::Validation("SNR grid is empty".into()));
    }
    let snrs = snr_db
        .iter()
        .map(|&db| SnrPoint::from_db(db))
        .collect::<Result<Vec<_>, _>>()?;
    let rates = args
        .rates
        .clone()
        .or(file.rates)
        .unwrap_or_else(|| vec![DEFAULT_RATE]);
    if rates.is_empty() {
        return Err(CliError::Validation("rate list is empty".into()));
    }

    let m_t = args.m_t.or(file.antennas.m_t);
    let ant = AntennaConfig::new(
        m_t.unwrap_or(1),
        args.m_r.or(file.antennas.m_r).unwrap_or(1),
    )?;

    let flag_source = match (&args.pdp, &args.correlation) {
        (Some(p), _) => Some(ChannelSource::Pdp(p.clone())),
        (None, Some(c)) => Some(ChannelSource::Correlation(parse_correlation(c)?)),
        (None, None) => None,
    };
    let file_source = match (file.channel.pdp, file.channel.correlation) {
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "[channel] sets both pdp and correlation; choose one".into(),
            ))
        }
        (Some(p), None) => Some(ChannelSource::Pdp(p)),
        (None, Some(c)) => Some(ChannelSource::Correlation(
            c.into_iter()
                .map(|[re, im]| Complex64::new(re, im))
                .collect(),
        )),
        (None, None) => None,
    };
    let source = flag_source
        .or(file_source)
        .unwrap_or(ChannelSource::Pdp(vec![1.0]));
    let slots = args.slots.or(file.channel.slots);
    let rank_tol = args.rank_tol.or(file.channel.rank_tol);

    let cov = match &source {
        ChannelSource::Pdp(v) => {
            let pdp = PowerDelayProfile::new(v.clone())?;
            let n = slots.unwrap_or(pdp.taps());
            match rank_tol {
                Some(tol) => CovarianceSpec::from_pdp_with_tol(&pdp, n, tol)?,
                None => CovarianceSpec::from_pdp(&pdp, n)?,
            }
        }
        ChannelSource::Correlation(r) => {
            if let Some(n) = slots {
                if n != r.len() {
                    return Err(CliError::Validation(format!(
                        "slots = {n} but the correlation has {} entries",
                        r.len()
                    )));
                }
            }
            match rank_tol {
                Some(tol) => CovarianceSpec::from_correlation_with_tol(r, tol)?,
                None => CovarianceSpec::from_correlation(r)?,
            }
        }
    };

    Ok(ExperimentConfig {
        source,
        cov,
        ant,
        snrs,
        rates,
        trials,
        seed,
        workers,
        min_events,
        m_t_explicit: m_t.is_some(),
        slots_explicit: slots.is_some(),
        rank_tol,
    })
}
