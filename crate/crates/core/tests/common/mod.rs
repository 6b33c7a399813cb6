#![allow(dead_code)]

use dmtlab::rng::{complex_normal, trial_rng};
use dmtlab::{CMatrix, CovarianceSpec};
use num_complex::Complex64;
use proptest::prelude::*;

/// Hermitian Toeplitz PSD covariance `r(m) = sum_l p_l exp(-j w_l m)`.
pub fn spectral_correlation(powers: &[f64], freqs: &[f64], slots: usize) -> Vec<Complex64> {
    (0..slots)
        .map(|m| {
            powers
                .iter()
                .zip(freqs)
                .map(|(&p, &w)| Complex64::from_polar(p, -w * m as f64))
                .sum()
        })
        .collect()
}

/// Random covariance with `taps <= slots` spectral lines, plus its slot count.
pub fn arb_covariance() -> impl Strategy<Value = CovarianceSpec> {
    (1usize..=5)
        .prop_flat_map(|slots| {
            (
                Just(slots),
                prop::collection::vec((0.05f64..1.0, 0.0f64..std::f64::consts::TAU), 1..=slots),
            )
        })
        .prop_map(|(slots, lines)| {
            let (p, w): (Vec<f64>, Vec<f64>) = lines.into_iter().unzip();
            CovarianceSpec::from_correlation(&spectral_correlation(&p, &w, slots)).unwrap()
        })
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut rng = trial_rng(seed, u64::MAX);
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(&mut rng))
}
