//! Space-time code checks against the rank criterion for selective fading.
//!
//! For a codeword difference `E = X - X'` (`m_t x N`, columns `e_n`) the
//! criterion matrix is
//!
//! ```text
//! Upsilon = (R^{1/2} kron I_mt) blockdiag(e_n e_n^H) (R^{1/2} kron I_mt)
//! ```
//!
//! With `A = blockdiag(e_n^H) (R^{1/2} kron I_mt)` we have `Upsilon = A^H A`
//! and `A A^H = R (.) E^H E`, so both matrices share rank and nonzero
//! eigenvalues for every `m_t`. A code meets the criterion when every pair
//! reaches rank `rho * m_t`, which needs `N >= rho * m_t`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{AntennaConfig, CovarianceSpec};
use crate::error::{Error, Result};
use crate::info::SnrPoint;
use crate::linalg::{self, CMatrix};
use crate::stats;

/// Codewords (`m_t x N`) of one member of a code family.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    snr: SnrPoint,
    codewords: Vec<CMatrix>,
    rate: f64,
}

impl Codebook {
    pub fn new(snr: SnrPoint, codewords: Vec<CMatrix>, rate: f64) -> Result<Self> {
        let first = codewords
            .first()
            .ok_or_else(|| Error::InvalidParameter("codebook is empty".into()))?;
        let shape = first.shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::Dimension(
                "codewords must be nonempty matrices".into(),
            ));
        }
        if let Some(k) = codewords.iter().position(|x| x.shape() != shape) {
            return Err(Error::Dimension(format!(
                "codeword {k} is {}x{}, expected {}x{}",
                codewords[k].nrows(),
                codewords[k].ncols(),
                shape.0,
                shape.1
            )));
        }
        Ok(Self {
            snr,
            codewords,
            rate,
        })
    }

    pub fn snr(&self) -> SnrPoint {
        self.snr
    }

    pub fn codewords(&self) -> &[CMatrix] {
        &self.codewords
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn m_t(&self) -> usize {
        self.codewords[0].nrows()
    }

    pub fn block_length(&self) -> usize {
        self.codewords[0].ncols()
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Unordered index pairs `(i, j)`, `i < j`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect()
    }

    pub fn difference(&self, i: usize, j: usize) -> CMatrix {
        &self.codewords[i] - &self.codewords[j]
    }
}

/// `E^H E` for `E = X - X'`.
pub fn difference_gram(x: &CMatrix, x_prime: &CMatrix) -> Result<CMatrix> {
    if x.shape() != x_prime.shape() {
        return Err(Error::Dimension(format!(
            "codewords are {}x{} and {}x{}",
            x.nrows(),
            x.ncols(),
            x_prime.nrows(),
            x_prime.ncols()
        )));
    }
    let e = x - x_prime;
    Ok(e.adjoint() * e)
}

fn check_slots(cov: &CovarianceSpec, e: &CMatrix) -> Result<()> {
    if e.ncols() != cov.slots() {
        return Err(Error::Dimension(format!(
            "difference has {} slots, covariance has {}",
            e.ncols(),
            cov.slots()
        )));
    }
    Ok(())
}

/// `R (.) E^H E`, the `N x N` Hadamard form.
pub fn hadamard_matrix(cov: &CovarianceSpec, e: &CMatrix) -> Result<CMatrix> {
    check_slots(cov, e)?;
    let gram = e.adjoint() * e;
    Ok(cov.matrix().component_mul(&gram))
}

/// The `N m_t x N m_t` matrix `Upsilon`.
pub fn upsilon(cov: &CovarianceSpec, e: &CMatrix) -> Result<CMatrix> {
    check_slots(cov, e)?;
    let (m_t, n) = e.shape();
    let dim = n * m_t;
    let s = cov.sqrt();
    let kron = CMatrix::from_fn(dim, dim, |a, b| {
        if a % m_t == b % m_t {
            s[(a / m_t, b / m_t)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let mut blocks = CMatrix::zeros(dim, dim);
    for slot in 0..n {
        let col = e.column(slot);
        let outer = col * col.adjoint();
        blocks
            .view_mut((slot * m_t, slot * m_t), (m_t, m_t))
            .copy_from(&outer);
    }
    Ok(&kron * blocks * &kron)
}

/// Rank of one difference matrix against the `rho * m_t` requirement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionRank {
    pub rank: usize,
    pub required: usize,
    pub pass: bool,
    /// Smallest eigenvalue counted as nonzero.
    pub min_nonzero: Option<f64>,
    /// `min_nonzero / threshold`; how far the weakest retained eigenvalue
    /// clears the rank threshold.
    pub margin: Option<f64>,
}

fn rank_from_spectrum(values: &[f64], tol: f64, required: usize) -> CriterionRank {
    let rank = linalg::numerical_rank(values, tol);
    let threshold = linalg::rank_threshold(values, tol);
    let min_nonzero = values.iter().copied().find(|&v| v > threshold && rank > 0);
    CriterionRank {
        rank,
        required,
        pass: rank == required,
        min_nonzero,
        margin: min_nonzero.map(|v| v / threshold),
    }
}

/// Numerical rank of `Upsilon`; passes iff it equals `rho * m_t`.
pub fn criterion_rank(cov: &CovarianceSpec, e: &CMatrix) -> Result<CriterionRank> {
    let ups = upsilon(cov, e)?;
    let values = linalg::hermitian_eigenvalues(&ups);
    Ok(rank_from_spectrum(
        &values,
        cov.rank_tol(),
        cov.rank() * e.nrows(),
    ))
}

/// Numerical rank of the Hadamard form `R (.) E^H E`.
pub fn hadamard_rank(cov: &CovarianceSpec, e: &CMatrix) -> Result<CriterionRank> {
    let h = hadamard_matrix(cov, e)?;
    let values = linalg::hermitian_eigenvalues(&h);
    Ok(rank_from_spectrum(
        &values,
        cov.rank_tol(),
        cov.rank() * e.nrows(),
    ))
}

#[cfg(feature = "parallel")]
fn map_pairs<T: Send>(pairs: &[(usize, usize)], f: impl Fn(usize, usize) -> T + Sync) -> Vec<T> {
    use rayon::prelude::*;
    pairs.par_iter().map(|&(i, j)| f(i, j)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_pairs<T: Send>(pairs: &[(usize, usize)], f: impl Fn(usize, usize) -> T + Sync) -> Vec<T> {
    pairs.iter().map(|&(i, j)| f(i, j)).collect()
}

fn check_codebook(cov: &CovarianceSpec, codebook: &Codebook) -> Result<()> {
    if codebook.len() < 2 {
        return Err(Error::InvalidParameter(
            "criterion checks need at least two codewords".into(),
        ));
    }
    if codebook.block_length() != cov.slots() {
        return Err(Error::Dimension(format!(
            "codebook block length {} does not match {} covariance slots",
            codebook.block_length(),
            cov.slots()
        )));
    }
    Ok(())
}

/// Criterion result for one codeword pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCriterion {
    pub i: usize,
    pub j: usize,
    pub rank: CriterionRank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub pairs: Vec<PairCriterion>,
    pub required_rank: usize,
    /// Codebook-wide minimum nonzero eigenvalue; `None` if every difference is zero.
    pub lambda_min_nz: Option<f64>,
    pub block_length: usize,
    /// `N >= rho * m_t`.
    pub block_length_ok: bool,
    pub pass: bool,
}

pub fn criterion_report(cov: &CovarianceSpec, codebook: &Codebook) -> Result<CriterionReport> {
    check_codebook(cov, codebook)?;
    let pairs = codebook.pairs();
    let ranks = map_pairs(&pairs, |i, j| {
        criterion_rank(cov, &codebook.difference(i, j))
    });
    let pairs = pairs
        .iter()
        .zip(ranks)
        .map(|(&(i, j), rank)| rank.map(|rank| PairCriterion { i, j, rank }))
        .collect::<Result<Vec<_>>>()?;
    let required_rank = cov.rank() * codebook.m_t();
    let block_length_ok = codebook.block_length() >= required_rank;
    let lambda_min_nz = pairs
        .iter()
        .filter_map(|p| p.rank.min_nonzero)
        .min_by(f64::total_cmp);
    let pass = block_length_ok && pairs.iter().all(|p| p.rank.pass);
    Ok(CriterionReport {
        pairs,
        required_rank,
        lambda_min_nz,
        block_length: codebook.block_length(),
        block_length_ok,
        pass,
    })
}

/// Minimum nonzero criterion eigenvalue over all codeword pairs.
pub fn codebook_lambda(cov: &CovarianceSpec, codebook: &Codebook) -> Result<f64> {
    criterion_report(cov, codebook)?
        .lambda_min_nz
        .ok_or_else(|| Error::DegenerateCodebook("every codeword difference is zero".into()))
}

/// Fitted decay of `lambda(SNR) ~ SNR^{-b}` and the resulting verdicts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayVerdict {
    /// Decay exponent `b`.
    pub exponent: f64,
    /// Standard error of `b`; NaN for two points.
    pub stderr: f64,
    pub m_min: usize,
    pub rate: f64,
    pub epsilon: f64,
    /// `m_min * b <= r - epsilon`, allowing one standard error of `m_min * b`.
    pub pass: bool,
    /// `b <= 0` within one standard error.
    pub non_vanishing: bool,
}

const DECAY_SLACK: f64 = 1e-9;

/// Decay check on precomputed `(snr, lambda)` points.
pub fn check_decay_values(
    points: &[(SnrPoint, f64)],
    m_min: usize,
    r: f64,
    epsilon: f64,
) -> Result<DecayVerdict> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(
            "decay check needs at least two SNR points".into(),
        ));
    }
    if let Some((_, l)) = points.iter().find(|(_, l)| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "lambda {l} must be positive"
        )));
    }
    let x: Vec<f64> = points.iter().map(|(s, _)| s.linear().log10()).collect();
    let y: Vec<f64> = points.iter().map(|(_, l)| l.log10()).collect();
    let fit = stats::ols(&x, &y)
        .ok_or_else(|| Error::InsufficientData("SNR points must be distinct".into()))?;
    let exponent = -fit.slope;
    let se = if fit.slope_stderr.is_finite() {
        fit.slope_stderr
    } else {
        0.0
    };
    let m = m_min as f64;
    Ok(DecayVerdict {
        exponent,
        stderr: fit.slope_stderr,
        m_min,
        rate: r,
        epsilon,
        pass: m * exponent <= r - epsilon + m * se + DECAY_SLACK,
        non_vanishing: exponent <= se + DECAY_SLACK,
    })
}

/// Decay check of `lambda(SNR)` across a code family, one codebook per SNR.
pub fn check_decay(
    cov: &CovarianceSpec,
    family: &[Codebook],
    ant: AntennaConfig,
    r: f64,
    epsilon: f64,
) -> Result<DecayVerdict> {
    let points = family
        .iter()
        .map(|cb| codebook_lambda(cov, cb).map(|l| (cb.snr(), l)))
        .collect::<Result<Vec<_>>>()?;
    check_decay_values(&points, ant.m_min(), r, epsilon)
}

/// Closed-form Chernoff bound on the pairwise error probability,
/// `prod_k (1 + snr/(4 m_t) lambda_k(Upsilon))^{-m_r}`.
pub fn pep_upper_bound(
    cov: &CovarianceSpec,
    e: &CMatrix,
    ant: AntennaConfig,
    snr: SnrPoint,
) -> Result<f64> {
    if e.nrows() != ant.m_t() {
        return Err(Error::Dimension(format!(
            "difference has {} rows, expected m_t = {}",
            e.nrows(),
            ant.m_t()
        )));
    }
    let values = linalg::hermitian_eigenvalues(&upsilon(cov, e)?);
    let c = snr.linear() / (4.0 * ant.m_t() as f64);
    let log_sum: f64 = values.iter().map(|&v| (c * v.max(0.0)).ln_1p()).sum();
    Ok((-(ant.m_r() as f64) * log_sum).exp())
}

/// Union bound on the conditional error probability outside the Jensen outage
/// region, alongside the all-pairs sum of [`pep_upper_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnionBound {
    pub lambda: f64,
    /// `SNR^{N r} exp(-(lambda / 4 m_t) SNR^{r / m_min})`.
    pub asymptotic: f64,
    /// Mean over transmitted codewords of the summed pairwise bounds.
    pub pairwise: f64,
}

pub fn union_bound_value(
    lambda: f64,
    ant: AntennaConfig,
    block_length: usize,
    snr: SnrPoint,
    r: f64,
) -> f64 {
    let exponent = block_length as f64 * r * snr.ln()
        - lambda / (4.0 * ant.m_t() as f64) * snr.linear().powf(r / ant.m_min() as f64);
    exponent.exp()
}

pub fn union_bound(
    cov: &CovarianceSpec,
    codebook: &Codebook,
    ant: AntennaConfig,
    snr: SnrPoint,
    r: f64,
) -> Result<UnionBound> {
    if r <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "union bound needs r > 0, got {r}"
        )));
    }
    let lambda = codebook_lambda(cov, codebook)?;
    let pairs = codebook.pairs();
    let peps = map_pairs(&pairs, |i, j| {
        pep_upper_bound(cov, &codebook.difference(i, j), ant, snr)
    });
    let total = peps
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<f64>();
    Ok(UnionBound {
        lambda,
        asymptotic: union_bound_value(lambda, ant, codebook.block_length(), snr, r),
        // Each unordered pair appears once per transmitted codeword of the two.
        pairwise: 2.0 * total / codebook.len() as f64,
    })
}

/// Repetition code over an `alphabet_size`-PSK alphabet: slot `n` carries the
/// symbol on antenna `n mod m_t`, so distinct codewords differ in every slot.
pub fn make_delay_diversity_codebook(
    ant: AntennaConfig,
    slots: usize,
    alphabet_size: usize,
    snr: SnrPoint,
) -> Result<Codebook> {
    if alphabet_size < 2 {
        return Err(Error::InvalidParameter(
            "alphabet needs at least two symbols".into(),
        ));
    }
    if slots < ant.m_t() {
        return Err(Error::InvalidParameter(format!(
            "block length {slots} leaves some of the {} transmit antennas unused",
            ant.m_t()
        )));
    }
    if snr.linear() <= 1.0 {
        return Err(Error::InvalidParameter(
            "nominal rate needs snr > 0 dB".into(),
        ));
    }
    let snap = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
    let codewords = (0..alphabet_size)
        .map(|k| {
            let phase = 2.0 * PI * k as f64 / alphabet_size as f64;
            let symbol = Complex64::new(snap(phase.cos()), snap(phase.sin()));
            DMatrix::from_fn(ant.m_t(), slots, |t, n| {
                if n % ant.m_t() == t {
                    symbol
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
        })
        .collect();
    let rate = (alphabet_size as f64).ln() / (slots as f64 * snr.ln());
    Codebook::new(snr, codewords, rate)
}
