//! Monte Carlo outage estimation over SNR and rate grids.
//!
//! Trial `i` always draws from the substream `(seed, i)` and the per-cell counts
//! are integers, so a table is a pure function of its inputs: it does not
//! depend on the worker count or on the `parallel` feature.
//!
//! A trial draws its channel once and evaluates every requested event at
//! every grid point, so counts across rates, SNRs and modes share realizations.

use std::fmt;
use std::str::FromStr;

use crate::channel::{self, AntennaConfig, CovarianceSpec};
use crate::error::{Error, Result};
use crate::info::{self, SandwichWeights, SnrPoint};
use crate::linalg::{self, CMatrix};
use crate::stats::{self, Z95};

/// Trials per work item. Fixed so chunk boundaries never depend on the pool size.
const CHUNK: u64 = 4096;

/// How trials are scheduled. `Parallel` falls back to sequential execution when
/// the crate is built without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// `None` uses the global rayon pool.
    Parallel {
        workers: Option<usize>,
    },
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Parallel { workers: None }
    }
}

impl Execution {
    pub fn with_workers(workers: usize) -> Self {
        if workers <= 1 {
            Execution::Sequential
        } else {
            Execution::Parallel {
                workers: Some(workers),
            }
        }
    }
}

/// Which rate-versus-log-det event a row counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutageMode {
    /// `I(snr) < r ln snr` on correlated draws.
    Outage,
    /// Singularity-level event `(1/N) sum_n sum_k [1 - mu_k(n)]^+ < r` on the
    /// same draws, i.e. [`info::outage_indicator`].
    Level,
    /// `I_J(snr) < r ln snr`, Jensen channel of the same correlated draws.
    JensenExact,
    /// `ln det(I + snr Hbar Hbar^H) < r ln snr`, i.i.d. `m_min x rho m_max` channel.
    JensenReduced,
    /// Sandwich event with every nonzero eigenvalue replaced by the smallest one.
    SandwichLambdaMin,
    /// Whitened Jensen event using the true eigenvalues of `R`.
    SandwichWhitened,
    /// Sandwich event with every nonzero eigenvalue replaced by the largest one.
    SandwichLambdaMax,
}

impl OutageMode {
    pub const ALL: [OutageMode; 7] = [
        OutageMode::Outage,
        OutageMode::Level,
        OutageMode::JensenExact,
        OutageMode::JensenReduced,
        OutageMode::SandwichLambdaMin,
        OutageMode::SandwichWhitened,
        OutageMode::SandwichLambdaMax,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            OutageMode::Outage => "outage",
            OutageMode::Level => "level",
            OutageMode::JensenExact => "exact",
            OutageMode::JensenReduced => "reduced",
            OutageMode::SandwichLambdaMin => "lambda-min",
            OutageMode::SandwichWhitened => "whitened",
            OutageMode::SandwichLambdaMax => "lambda-max",
        }
    }

    fn uses_channel(&self) -> bool {
        matches!(
            self,
            OutageMode::Outage | OutageMode::Level | OutageMode::JensenExact
        )
    }

    fn uses_whitened(&self) -> bool {
        matches!(
            self,
            OutageMode::SandwichLambdaMin
                | OutageMode::SandwichWhitened
                | OutageMode::SandwichLambdaMax
        )
    }
}

impl fmt::Display for OutageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for OutageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OutageMode::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown outage mode '{s}'")))
    }
}

/// Estimated outage probability at one `(snr, r, mode)` grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageEstimate {
    pub snr: SnrPoint,
    pub rate: f64,
    pub mode: OutageMode,
    pub trials: u64,
    pub outages: u64,
    pub p_hat: f64,
    /// 95% Wilson score interval.
    pub ci95: (f64, f64),
}

impl OutageEstimate {
    pub fn new(snr: SnrPoint, rate: f64, mode: OutageMode, trials: u64, outages: u64) -> Self {
        let p_hat = if trials == 0 {
            0.0
        } else {
            outages as f64 / trials as f64
        };
        Self {
            snr,
            rate,
            mode,
            trials,
            outages,
            p_hat,
            ci95: stats::wilson_interval(outages, trials, Z95),
        }
    }
}

/// A full outage experiment: the cross product of SNRs, rates and modes.
#[derive(Debug, Clone)]
pub struct OutageExperiment<'a> {
    pub cov: &'a CovarianceSpec,
    pub ant: AntennaConfig,
    pub modes: Vec<OutageMode>,
    pub rates: Vec<f64>,
    pub snrs: Vec<SnrPoint>,
    pub trials: u64,
    pub seed: u64,
    pub execution: Execution,
}

impl OutageExperiment<'_> {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.modes.is_empty() || self.rates.is_empty() || self.snrs.is_empty() {
            return Err(Error::InvalidParameter(
                "mode, rate and SNR grids must be nonempty".into(),
            ));
        }
        let m_min = self.ant.m_min() as f64;
        if let Some(r) = self.rates.iter().find(|r| !(0.0..=m_min).contains(*r)) {
            return Err(Error::InvalidParameter(format!(
                "rate {r} outside [0, m_min = {m_min}]"
            )));
        }
        if let Some(s) = self.snrs.iter().find(|s| s.linear() <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "SNR {} dB must exceed 0 dB",
                s.db()
            )));
        }
        Ok(())
    }

    /// Rows ordered by SNR, then rate, then mode (in the order given).
    pub fn run(&self) -> Result<Vec<OutageEstimate>> {
        self.validate()?;
        let kernel = TrialKernel::new(self);
        let counts = run_counts(self.trials, kernel.cells(), self.execution, |t, acc| {
            kernel.evaluate(t, acc)
        });
        let mut rows = Vec::with_capacity(counts.len());
        for (si, &snr) in self.snrs.iter().enumerate() {
            for (ri, &rate) in self.rates.iter().enumerate() {
                for (mi, &mode) in self.modes.iter().enumerate() {
                    let outages = counts[kernel.cell(si, ri, mi)];
                    rows.push(OutageEstimate::new(snr, rate, mode, self.trials, outages));
                }
            }
        }
        Ok(rows)
    }
}

struct TrialKernel<'a> {
    cov: &'a CovarianceSpec,
    ant: AntennaConfig,
    modes: &'a [OutageMode],
    rates: &'a [f64],
    snrs: &'a [SnrPoint],
    seed: u64,
    sandwich: Option<SandwichWeights>,
}

impl<'a> TrialKernel<'a> {
    fn new(exp: &'a OutageExperiment<'a>) -> Self {
        let sandwich = exp
            .modes
            .iter()
            .any(OutageMode::uses_whitened)
            .then(|| SandwichWeights::new(exp.cov, exp.ant));
        Self {
            cov: exp.cov,
            ant: exp.ant,
            modes: &exp.modes,
            rates: &exp.rates,
            snrs: &exp.snrs,
            seed: exp.seed,
            sandwich,
        }
    }

    fn cells(&self) -> usize {
        self.snrs.len() * self.rates.len() * self.modes.len()
    }

    fn cell(&self, snr: usize, rate: usize, mode: usize) -> usize {
        (snr * self.rates.len() + rate) * self.modes.len() + mode
    }

    fn evaluate(&self, trial: u64, acc: &mut [u64]) {
        let slots = self.cov.slots();
        let m_t = self.ant.m_t() as f64;

        // Per-slot min-dimension Grams; their sum is the Jensen Gram H_J H_J^H.
        let grams: Option<Vec<CMatrix>> =
            self.modes.iter().any(OutageMode::uses_channel).then(|| {
                let re = channel::sample_channel(self.cov, self.ant, self.seed, trial);
                re.slots().iter().map(linalg::min_gram).collect()
            });
        let slot_eigenvalues: Option<Vec<Vec<f64>>> = grams.as_ref().and_then(|g| {
            self.modes
                .contains(&OutageMode::Level)
                .then(|| g.iter().map(linalg::hermitian_eigenvalues).collect())
        });
        let jensen_gram = grams.as_ref().and_then(|g| {
            self.modes
                .contains(&OutageMode::JensenExact)
                .then(|| g.iter().skip(1).fold(g[0].clone(), |acc, x| acc + x))
        });
        let reduced_gram = self.modes.contains(&OutageMode::JensenReduced).then(|| {
            let h = channel::sample_reduced_iid(self.cov.rank(), self.ant, self.seed, trial);
            &h * h.adjoint()
        });
        let sandwich_grams = self.sandwich.as_ref().map(|w| {
            let hw = channel::sample_whitened(slots, self.ant, self.seed, trial);
            [
                info::weighted_gram(&hw, &w.lower),
                info::weighted_gram(&hw, &w.middle),
                info::weighted_gram(&hw, &w.upper),
            ]
        });

        for (si, snr) in self.snrs.iter().enumerate() {
            let lin = snr.linear();
            let jensen_scale = lin / (m_t * slots as f64);
            for (mi, mode) in self.modes.iter().enumerate() {
                let value = match mode {
                    OutageMode::Outage => info::mutual_information_from_grams(
                        grams.as_deref().expect("channel drawn"),
                        self.ant,
                        *snr,
                    ),
                    // [1 - mu]^+ ln snr = [ln(snr lambda)]^+, so the level event
                    // compares against r ln snr like the others.
                    OutageMode::Level => {
                        let eig = slot_eigenvalues.as_ref().expect("slot eigenvalues");
                        let total: f64 = eig
                            .iter()
                            .flatten()
                            .filter(|&&v| v > 0.0)
                            .map(|&v| (lin * v).ln().max(0.0))
                            .sum();
                        total / slots as f64
                    }
                    OutageMode::JensenExact => linalg::log_det_identity_plus(
                        jensen_gram.as_ref().expect("jensen gram"),
                        jensen_scale,
                    ),
                    OutageMode::JensenReduced => linalg::log_det_identity_plus(
                        reduced_gram.as_ref().expect("reduced gram"),
                        lin,
                    ),
                    OutageMode::SandwichLambdaMin => linalg::log_det_identity_plus(
                        &sandwich_grams.as_ref().expect("whitened")[0],
                        jensen_scale,
                    ),
                    OutageMode::SandwichWhitened => linalg::log_det_identity_plus(
                        &sandwich_grams.as_ref().expect("whitened")[1],
                        jensen_scale,
                    ),
                    OutageMode::SandwichLambdaMax => linalg::log_det_identity_plus(
                        &sandwich_grams.as_ref().expect("whitened")[2],
                        jensen_scale,
                    ),
                };
                let ln_snr = snr.ln();
                for (ri, &r) in self.rates.iter().enumerate() {
                    if value < r * ln_snr {
                        acc[self.cell(si, ri, mi)] += 1;
                    }
                }
            }
        }
    }
}

/// Sums per-trial integer counts over `0..trials` in fixed-size chunks.
pub fn run_counts<F>(trials: u64, cells: usize, execution: Execution, per_trial: F) -> Vec<u64>
where
    F: Fn(u64, &mut [u64]) + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    let chunk = |c: u64| {
        let mut local = vec![0u64; cells];
        let end = ((c + 1) * CHUNK).min(trials);
        for t in c * CHUNK..end {
            per_trial(t, &mut local);
        }
        local
    };
    let add = |mut a: Vec<u64>, b: Vec<u64>| {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        a
    };
    match execution {
        Execution::Sequential => (0..chunks).map(chunk).fold(vec![0u64; cells], add),
        Execution::Parallel { workers } => parallel_counts(chunks, cells, workers, chunk, add),
    }
}

#[cfg(feature = "parallel")]
fn parallel_counts<C, A>(
    chunks: u64,
    cells: usize,
    workers: Option<usize>,
    chunk: C,
    add: A,
) -> Vec<u64>
where
    C: Fn(u64) -> Vec<u64> + Sync,
    A: Fn(Vec<u64>, Vec<u64>) -> Vec<u64> + Sync,
{
    use rayon::prelude::*;
    let run = || {
        (0..chunks)
            .into_par_iter()
            .map(&chunk)
            .reduce(|| vec![0u64; cells], &add)
    };
    match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                log::warn!("could not build a {n}-thread pool ({e}); using the global pool");
                run()
            }
        },
        None => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_counts<C, A>(
    chunks: u64,
    cells: usize,
    _workers: Option<usize>,
    chunk: C,
    add: A,
) -> Vec<u64>
where
    C: Fn(u64) -> Vec<u64> + Sync,
    A: Fn(Vec<u64>, Vec<u64>) -> Vec<u64> + Sync,
{
    (0..chunks).map(chunk).fold(vec![0u64; cells], add)
}

/// Outage probability `P(I(snr) < r ln snr)` on correlated draws.
pub fn estimate_outage(
    cov: &CovarianceSpec,
    ant: AntennaConfig,
    r: f64,
    snr: SnrPoint,
    trials: u64,
    seed: u64,
) -> Result<OutageEstimate> {
    single(cov, ant, OutageMode::Outage, r, snr, trials, seed)
}

/// Jensen outage mode for [`estimate_jensen_outage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JensenMode {
    Exact,
    Reduced,
}

impl From<JensenMode> for OutageMode {
    fn from(m: JensenMode) -> Self {
        match m {
            JensenMode::Exact => OutageMode::JensenExact,
            JensenMode::Reduced => OutageMode::JensenReduced,
        }
    }
}

pub fn estimate_jensen_outage(
    cov: &CovarianceSpec,
    ant: AntennaConfig,
    r: f64,
    snr: SnrPoint,
    trials: u64,
    seed: u64,
    mode: JensenMode,
) -> Result<OutageEstimate> {
    single(cov, ant, mode.into(), r, snr, trials, seed)
}

fn single(
    cov: &CovarianceSpec,
    ant: AntennaConfig,
    mode: OutageMode,
    r: f64,
    snr: SnrPoint,
    trials: u64,
    seed: u64,
) -> Result<OutageEstimate> {
    let mut rows = OutageExperiment {
        cov,
        ant,
        modes: vec![mode],
        rates: vec![r],
        snrs: vec![snr],
        trials,
        seed,
        execution: Execution::default(),
    }
    .run()?;
    Ok(rows.remove(0))
}

/// Outage table over the cross product of `snr_grid` and `r_list`.
pub fn sweep(
    cov: &CovarianceSpec,
    ant: AntennaConfig,
    r_list: &[f64],
    snr_grid: &[SnrPoint],
    trials: u64,
    seed: u64,
    execution: Execution,
) -> Result<Vec<OutageEstimate>> {
    OutageExperiment {
        cov,
        ant,
        modes: vec![OutageMode::Outage],
        rates: r_list.to_vec(),
        snrs: snr_grid.to_vec(),
        trials,
        seed,
        execution,
    }
    .run()
}

/// Default minimum number of outage events for a grid point to enter a fit.
pub const DEFAULT_MIN_EVENTS: u64 = 50;

/// A grid point left out of an exponent fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcludedPoint {
    pub snr_db: f64,
    pub outages: u64,
}

/// High-SNR slope of `log10 p_hat` against `log10 snr`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    /// `(log10 snr, log10 p_hat)` of the points used.
    pub points: Vec<(f64, f64)>,
    pub excluded: Vec<ExcludedPoint>,
    /// Diversity estimate: the negated regression slope.
    pub d_hat: f64,
    /// Slope standard error; NaN when exactly two points are used.
    pub stderr: f64,
    pub intercept: f64,
    pub used_points: usize,
}

pub fn fit_exponent(estimates: &[OutageEstimate], min_events: u64) -> Result<ExponentFit> {
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for e in estimates {
        if e.outages >= min_events.max(1) && e.p_hat > 0.0 {
            points.push((e.snr.linear().log10(), e.p_hat.log10()));
        } else {
            excluded.push(ExcludedPoint {
                snr_db: e.snr.db(),
                outages: e.outages,
            });
        }
    }
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} grid point(s) with at least {min_events} outage events; need 2",
            points.len()
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let fit = stats::ols(&x, &y)
        .ok_or_else(|| Error::InsufficientData("qualifying points share a single SNR".into()))?;
    Ok(ExponentFit {
        used_points: points.len(),
        points,
        excluded,
        d_hat: -fit.slope,
        stderr: fit.slope_stderr,
        intercept: fit.intercept,
    })
}
