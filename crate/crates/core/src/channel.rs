//! Selective-fading channel model.
//!
//! Every scalar subchannel `(i, j)` of the `m_r x m_t` slot matrices
//! `H_0, ..., H_{N-1}` carries the same slot-to-slot correlation
//! `E[H_n(i,j) H_{n-m}(i,j)^*] = r(m)`; distinct subchannels are independent.
//! The covariance `R(i,j) = r(i-j)` is built either from a correlation vector or
//! from a power delay profile of a cyclic (OFDM) channel.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, HermitianEigen};
use crate::rng;

/// Transmit/receive antenna counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AntennaConfig {
    m_t: usize,
    m_r: usize,
}

impl AntennaConfig {
    pub fn new(m_t: usize, m_r: usize) -> Result<Self> {
        if m_t == 0 || m_r == 0 {
            return Err(Error::InvalidParameter(format!(
                "antenna counts must be positive (m_t={m_t}, m_r={m_r})"
            )));
        }
        Ok(Self { m_t, m_r })
    }

    pub fn siso() -> Self {
        Self { m_t: 1, m_r: 1 }
    }

    pub fn m_t(&self) -> usize {
        self.m_t
    }

    pub fn m_r(&self) -> usize {
        self.m_r
    }

    pub fn m_min(&self) -> usize {
        self.m_t.min(self.m_r)
    }

    pub fn m_max(&self) -> usize {
        self.m_t.max(self.m_r)
    }
}

/// Per-tap powers of a frequency-selective channel, normalized to unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    variances: Vec<f64>,
}

impl PowerDelayProfile {
    /// Validates and normalizes the tap powers. A profile that does not sum to one
    /// is rescaled with a warning so every scalar subchannel keeps unit power.
    pub fn new(variances: Vec<f64>) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::InvalidProfile("profile has no taps".into()));
        }
        if variances.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidProfile(
                "tap powers must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = variances.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidProfile("all tap powers are zero".into()));
        }
        let variances = if (total - 1.0).abs() > 1e-12 {
            warn!("power delay profile sums to {total}; normalizing to unit power");
            variances.into_iter().map(|v| v / total).collect()
        } else {
            variances
        };
        Ok(Self { variances })
    }

    /// `L` equal taps of power `1/L`.
    pub fn uniform(taps: usize) -> Result<Self> {
        if taps == 0 {
            return Err(Error::InvalidProfile("profile has no taps".into()));
        }
        Self::new(vec![1.0 / taps as f64; taps])
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn taps(&self) -> usize {
        self.variances.len()
    }

    /// Correlation `r(m) = sum_l sigma_l^2 exp(-j 2 pi l m / N)` for `m = 0..N`.
    pub fn correlation(&self, slots: usize) -> Vec<Complex64> {
        (0..slots)
            .map(|m| {
                self.variances
                    .iter()
                    .enumerate()
                    .map(|(l, &s)| {
                        Complex64::from_polar(s, -2.0 * PI * (l * m) as f64 / slots as f64)
                    })
                    .sum()
            })
            .collect()
    }
}

/// Slot covariance `R` with its spectrum and numerical rank.
#[derive(Debug, Clone)]
pub struct CovarianceSpec {
    matrix: CMatrix,
    eigen: HermitianEigen,
    rank: usize,
    rank_tol: f64,
    lambda_min_nz: f64,
    lambda_max: f64,
    scale: f64,
    sqrt: CMatrix,
}

impl CovarianceSpec {
    /// Hermitian Toeplitz covariance from `r(0..N)`, with `r(-m) = r(m)^*`.
    /// Rescales by `1/r(0)` when `r(0) != 1`.
    pub fn from_correlation(r: &[Complex64]) -> Result<Self> {
        Self::from_correlation_with_tol(r, linalg::default_rank_tol(r.len()))
    }

    pub fn from_correlation_with_tol(r: &[Complex64], rank_tol: f64) -> Result<Self> {
        let n = r.len();
        if n == 0 {
            return Err(Error::InvalidCorrelation("empty correlation vector".into()));
        }
        let r0 = r[0];
        if !(r0.re > 0.0 && r0.re.is_finite()) || r0.im.abs() > 1e-12 * r0.re {
            return Err(Error::InvalidCorrelation(format!(
                "r(0) must be real and positive, got {r0}"
            )));
        }
        if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidCorrelation(
                "non-finite correlation value".into(),
            ));
        }
        let scale = r0.re;
        let matrix = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else if i > j {
                r[i - j] / scale
            } else {
                r[j - i].conj() / scale
            }
        });
        Self::finalize(matrix, scale, rank_tol)
    }

    /// `R = F diag(sigma^2, 0...) F^H` with `F(n, l) = exp(-j 2 pi n l / N)`, which
    /// has unit diagonal for a normalized profile.
    pub fn from_pdp(pdp: &PowerDelayProfile, slots: usize) -> Result<Self> {
        Self::from_pdp_with_tol(pdp, slots, linalg::default_rank_tol(slots))
    }

    pub fn from_pdp_with_tol(pdp: &PowerDelayProfile, slots: usize, rank_tol: f64) -> Result<Self> {
        let taps = pdp.taps();
        if slots == 0 || taps > slots {
            return Err(Error::Dimension(format!(
                "profile has {taps} taps but only {slots} slots"
            )));
        }
        let dft = CMatrix::from_fn(slots, taps, |n, l| {
            Complex64::from_polar(1.0, -2.0 * PI * (n * l) as f64 / slots as f64)
        });
        let mut weighted = dft.clone();
        for (l, &s) in pdp.variances().iter().enumerate() {
            weighted.column_mut(l).scale_mut(s);
        }
        let matrix = weighted * dft.adjoint();
        Self::finalize(matrix, 1.0, rank_tol)
    }

    fn finalize(mut matrix: CMatrix, scale: f64, rank_tol: f64) -> Result<Self> {
        let n = matrix.nrows();
        for i in 0..n {
            matrix[(i, i)].im = 0.0;
            for j in (i + 1)..n {
                matrix[(j, i)] = matrix[(i, j)].conj();
            }
        }
        let mut eigen = linalg::hermitian_eigen(&matrix);
        let lambda_max = eigen.values.last().copied().unwrap_or(0.0);
        if lambda_max <= 0.0 {
            return Err(Error::InvalidCorrelation(
                "covariance has no positive eigenvalue".into(),
            ));
        }
        let threshold = rank_tol * lambda_max;
        if let Some(&min) = eigen.values.first() {
            if min < -threshold {
                return Err(Error::InvalidCorrelation(format!(
                    "covariance is not positive semidefinite (eigenvalue {min:e})"
                )));
            }
        }
        for v in &mut eigen.values {
            *v = v.max(0.0);
        }
        let rank = linalg::numerical_rank(&eigen.values, rank_tol);
        let lambda_min_nz = eigen
            .values
            .iter()
            .copied()
            .find(|&v| v > threshold)
            .unwrap_or(lambda_max);
        let sqrt = linalg::psd_sqrt(&eigen, threshold);
        Ok(Self {
            matrix,
            eigen,
            rank,
            rank_tol,
            lambda_min_nz,
            lambda_max,
            scale,
            sqrt,
        })
    }

    pub fn slots(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Eigenvalues ascending, negative roundoff clipped to zero.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigen.vectors
    }

    /// Eigenvalues above the rank threshold, largest first.
    pub fn nonzero_eigenvalues(&self) -> Vec<f64> {
        self.eigen
            .values
            .iter()
            .rev()
            .take(self.rank)
            .copied()
            .collect()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn lambda_min_nz(&self) -> f64 {
        self.lambda_min_nz
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// The factor `r(0)` divided out of a correlation vector (1 for profiles).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `R^{1/2}`, with eigenvalues under the rank threshold set to zero.
    pub fn sqrt(&self) -> &CMatrix {
        &self.sqrt
    }
}

/// Numerical rank of a Hermitian PSD matrix: eigenvalues above `tol * lambda_max`.
pub fn covariance_rank(r: &CMatrix, tol: f64) -> usize {
    linalg::numerical_rank(&linalg::hermitian_eigenvalues(r), tol)
}

/// One draw of the slot matrices `H_0, ..., H_{N-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    slots: Vec<CMatrix>,
}

impl ChannelRealization {
    pub fn new(slots: Vec<CMatrix>) -> Result<Self> {
        let first = slots
            .first()
            .ok_or_else(|| Error::Dimension("realization has no slots".into()))?;
        let shape = first.shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::Dimension("empty slot matrix".into()));
        }
        if slots.iter().any(|h| h.shape() != shape) {
            return Err(Error::Dimension("slot matrices differ in shape".into()));
        }
        Ok(Self { slots })
    }

    pub fn slots(&self) -> &[CMatrix] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// `(m_r, m_t)` of every slot.
    pub fn shape(&self) -> (usize, usize) {
        self.slots[0].shape()
    }
}

/// Draws a correlated Rayleigh realization. For each subchannel `(i, j)` (row-major
/// over `i < m_r`, `j < m_t`) the slot vector is `R^{1/2} w` with `w` i.i.d. CN(0,1).
pub fn sample_channel(
    cov: &CovarianceSpec,
    ant: AntennaConfig,
    seed: u64,
    trial_index: u64,
) -> ChannelRealization {
    let n = cov.slots();
    let mut rng = rng::trial_rng(seed, trial_index);
    let mut slots = vec![CMatrix::zeros(ant.m_r(), ant.m_t()); n];
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let s = cov.sqrt();
    for i in 0..ant.m_r() {
        for j in 0..ant.m_t() {
            for x in w.iter_mut() {
                *x = rng::complex_normal(&mut rng);
            }
            for (row, slot) in slots.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (col, x) in w.iter().enumerate() {
                    acc += s[(row, col)] * x;
                }
                slot[(i, j)] = acc;
            }
        }
    }
    ChannelRealization { slots }
}

/// i.i.d. CN(0,1) `rows x cols` matrix filled column by column, so a narrower draw
/// with the same `(seed, trial_index)` is a column prefix of a wider one.
pub fn sample_iid(rows: usize, cols: usize, seed: u64, trial_index: u64) -> CMatrix {
    let mut rng = rng::trial_rng(seed, trial_index);
    let mut m = CMatrix::zeros(rows, cols);
    for x in m.iter_mut() {
        *x = rng::complex_normal(&mut rng);
    }
    m
}

/// The i.i.d. `m_min x (rank * m_max)` matrix of the reduced Jensen channel.
pub fn sample_reduced_iid(rank: usize, ant: AntennaConfig, seed: u64, trial_index: u64) -> CMatrix {
    sample_iid(ant.m_min(), rank * ant.m_max(), seed, trial_index)
}

/// The full whitened `m_min x (N * m_max)` matrix; its first `rank * m_max`
/// columns coincide with [`sample_reduced_iid`] for the same stream.
pub fn sample_whitened(slots: usize, ant: AntennaConfig, seed: u64, trial_index: u64) -> CMatrix {
    sample_iid(ant.m_min(), slots * ant.m_max(), seed, trial_index)
}

/// Horizontal stack of the slot matrices (`m_r <= m_t`) or of their adjoints.
#[derive(Debug, Clone, PartialEq)]
pub struct JensenChannel {
    matrix: CMatrix,
}

impl JensenChannel {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }
}

pub fn jensen_channel(re: &ChannelRealization, ant: AntennaConfig) -> JensenChannel {
    assert_eq!(
        re.shape(),
        (ant.m_r(), ant.m_t()),
        "realization does not match antennas"
    );
    let (rows, block) = (ant.m_min(), ant.m_max());
    let mut matrix = CMatrix::zeros(rows, re.len() * block);
    for (n, h) in re.slots().iter().enumerate() {
        let mut view = matrix.columns_mut(n * block, block);
        if ant.m_r() <= ant.m_t() {
            view.copy_from(h);
        } else {
            view.copy_from(&h.adjoint());
        }
    }
    JensenChannel { matrix }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn real(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&x| c(x, 0.0)).collect()
    }

    #[test]
    fn uncorrelated_slots_give_identity() {
        let cov = CovarianceSpec::from_correlation(&real(&[1.0, 0.0])).unwrap();
        assert!((cov.matrix() - CMatrix::identity(2, 2)).norm() < 1e-15);
        assert_eq!(cov.rank(), 2);
    }

    #[test]
    fn fully_correlated_slots() {
        let cov = CovarianceSpec::from_correlation(&real(&[1.0; 4])).unwrap();
        assert_eq!(cov.rank(), 1);
        let ev = cov.eigenvalues();
        for v in &ev[..3] {
            assert!(v.abs() < 1e-12);
        }
        assert_relative_eq!(ev[3], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn correlation_scale_is_recorded() {
        let cov = CovarianceSpec::from_correlation(&real(&[2.0, 1.0])).unwrap();
        assert_eq!(cov.scale(), 2.0);
        assert_relative_eq!(cov.matrix()[(1, 0)].re, 0.5);
    }

    #[test]
    fn non_psd_correlation_rejected() {
        let err = CovarianceSpec::from_correlation(&real(&[1.0, 2.0])).unwrap_err();
        assert!(matches!(err, Error::InvalidCorrelation(_)));
        assert!(CovarianceSpec::from_correlation(&[c(1.0, 0.5)]).is_err());
        assert!(CovarianceSpec::from_correlation(&real(&[-1.0])).is_err());
    }

    #[test]
    fn two_tap_profile_four_slots() {
        // Oracle: evaluate r(m) term by term and the eigenvalues as N * sigma^2.
        let pdp = PowerDelayProfile::new(vec![0.5, 0.5]).unwrap();
        let r = pdp.correlation(4);
        assert!((r[1] - c(0.5, -0.5)).norm() < 1e-15);
        let direct: Vec<Complex64> = (0..4)
            .map(|m| {
                let theta = -2.0 * PI * m as f64 / 4.0;
                c(0.5, 0.0) + c(0.5 * theta.cos(), 0.5 * theta.sin())
            })
            .collect();
        let cov = CovarianceSpec::from_correlation(&direct).unwrap();
        assert_eq!(cov.rank(), 2);
        let ev = cov.eigenvalues();
        assert_relative_eq!(ev[2], 2.0, epsilon = 1e-12);
        assert_relative_eq!(ev[3], 2.0, epsilon = 1e-12);
        let from_pdp = CovarianceSpec::from_pdp(&pdp, 4).unwrap();
        assert!((from_pdp.matrix() - cov.matrix()).norm() < 1e-12);
    }

    #[test]
    fn flat_profile_is_all_ones() {
        let cov = CovarianceSpec::from_pdp(&PowerDelayProfile::new(vec![1.0]).unwrap(), 4).unwrap();
        assert!((cov.matrix() - CMatrix::from_element(4, 4, c(1.0, 0.0))).norm() < 1e-12);
        assert_eq!(cov.rank(), 1);
    }

    #[test]
    fn half_half_profile_two_slots_is_identity() {
        let cov =
            CovarianceSpec::from_pdp(&PowerDelayProfile::new(vec![0.5, 0.5]).unwrap(), 2).unwrap();
        assert!((cov.matrix() - CMatrix::identity(2, 2)).norm() < 1e-15);
        assert_eq!(cov.rank(), 2);
    }

    #[test]
    fn rank_equals_tap_count() {
        let cov = CovarianceSpec::from_pdp(&PowerDelayProfile::uniform(4).unwrap(), 8).unwrap();
        assert_eq!(cov.rank(), 4);
    }

    #[test]
    fn profile_errors() {
        assert!(matches!(
            CovarianceSpec::from_pdp(&PowerDelayProfile::uniform(3).unwrap(), 2),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            PowerDelayProfile::new(vec![0.0, 0.0]),
            Err(Error::InvalidProfile(_))
        ));
        assert!(PowerDelayProfile::new(vec![]).is_err());
        assert!(PowerDelayProfile::new(vec![1.0, -0.1]).is_err());
    }

    #[test]
    fn profile_is_normalized() {
        let pdp = PowerDelayProfile::new(vec![2.0, 2.0]).unwrap();
        assert_eq!(pdp.variances(), &[0.5, 0.5]);
    }

    #[test]
    fn covariance_rank_examples() {
        let tol = linalg::default_rank_tol(3);
        assert_eq!(covariance_rank(&CMatrix::identity(3, 3), tol), 3);
        assert_eq!(
            covariance_rank(&CMatrix::from_element(3, 3, c(1.0, 0.0)), tol),
            1
        );
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(real(&[1.0, 1e-20, 0.0])));
        assert_eq!(covariance_rank(&d, tol), 1);
        assert_eq!(covariance_rank(&CMatrix::zeros(3, 3), tol), 0);
    }

    #[test]
    fn fully_correlated_draws_repeat_across_slots() {
        let cov = CovarianceSpec::from_correlation(&real(&[1.0; 3])).unwrap();
        let ant = AntennaConfig::new(2, 2).unwrap();
        let re = sample_channel(&cov, ant, 11, 5);
        // R^{1/2} of the all-ones matrix is all-ones / sqrt(N): every row is
        // identical up to rounding in the eigendecomposition.
        for h in &re.slots()[1..] {
            assert!((h - &re.slots()[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let cov = CovarianceSpec::from_pdp(&PowerDelayProfile::uniform(2).unwrap(), 4).unwrap();
        let ant = AntennaConfig::new(2, 3).unwrap();
        assert_eq!(
            sample_channel(&cov, ant, 1, 9),
            sample_channel(&cov, ant, 1, 9)
        );
        assert_ne!(
            sample_channel(&cov, ant, 1, 9),
            sample_channel(&cov, ant, 1, 10)
        );
        assert_eq!(
            sample_reduced_iid(2, ant, 4, 4),
            sample_reduced_iid(2, ant, 4, 4)
        );
    }

    #[test]
    fn empirical_covariance_of_identity() {
        let cov = CovarianceSpec::from_correlation(&real(&[1.0, 0.0])).unwrap();
        let trials = 100_000u64;
        let mut acc = [[c(0.0, 0.0); 2]; 2];
        for t in 0..trials {
            let re = sample_channel(&cov, AntennaConfig::siso(), 3, t);
            let h = [re.slots()[0][(0, 0)], re.slots()[1][(0, 0)]];
            for (row, &ha) in acc.iter_mut().zip(&h) {
                for (cell, &hb) in row.iter_mut().zip(&h) {
                    *cell += ha * hb.conj();
                }
            }
        }
        for (a, row) in acc.iter().enumerate() {
            for (b, &cell) in row.iter().enumerate() {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((cell / trials as f64 - c(want, 0.0)).norm() < 0.05);
            }
        }
    }

    #[test]
    fn reduced_scalar_has_unit_power() {
        let trials = 100_000u64;
        let p: f64 = (0..trials)
            .map(|t| sample_reduced_iid(1, AntennaConfig::siso(), 21, t)[(0, 0)].norm_sqr())
            .sum::<f64>()
            / trials as f64;
        assert!((p - 1.0).abs() < 0.02, "mean power {p}");
    }

    #[test]
    fn reduced_is_prefix_of_whitened() {
        let ant = AntennaConfig::new(2, 1).unwrap();
        let reduced = sample_reduced_iid(2, ant, 5, 8);
        assert_eq!(reduced.shape(), (1, 4));
        let full = sample_whitened(4, ant, 5, 8);
        assert_eq!(full.columns(0, 4), reduced.columns(0, 4));
    }

    #[test]
    fn jensen_stacking_wide() {
        let ant = AntennaConfig::new(2, 1).unwrap();
        let h0 = CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(2.0, 0.0)]);
        let h1 = CMatrix::from_row_slice(1, 2, &[c(3.0, 0.0), c(4.0, 1.0)]);
        let re = ChannelRealization::new(vec![h0, h1]).unwrap();
        let jc = jensen_channel(&re, ant);
        let want =
            CMatrix::from_row_slice(1, 4, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 1.0)]);
        assert_eq!(jc.matrix(), &want);
    }

    #[test]
    fn jensen_stacking_tall_uses_adjoints() {
        let ant = AntennaConfig::new(1, 2).unwrap();
        let h0 = CMatrix::from_row_slice(2, 1, &[c(1.0, 1.0), c(2.0, 0.0)]);
        let h1 = CMatrix::from_row_slice(2, 1, &[c(0.0, 3.0), c(4.0, -1.0)]);
        let re = ChannelRealization::new(vec![h0, h1]).unwrap();
        let jc = jensen_channel(&re, ant);
        let want = CMatrix::from_row_slice(
            1,
            4,
            &[c(1.0, -1.0), c(2.0, 0.0), c(0.0, -3.0), c(4.0, 1.0)],
        );
        assert_eq!(jc.matrix(), &want);
    }

    #[test]
    fn jensen_single_slot_square() {
        let ant = AntennaConfig::new(2, 2).unwrap();
        let cov = CovarianceSpec::from_correlation(&real(&[1.0])).unwrap();
        let re = sample_channel(&cov, ant, 0, 0);
        assert_eq!(jensen_channel(&re, ant).matrix(), &re.slots()[0]);
    }

    #[test]
    fn realization_validation() {
        assert!(ChannelRealization::new(vec![]).is_err());
        assert!(ChannelRealization::new(vec![CMatrix::zeros(1, 2), CMatrix::zeros(2, 1)]).is_err());
    }
}
