//! Small complex linear-algebra helpers shared by the channel and criterion code.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Default relative rank threshold `64 * dim * eps`.
pub fn default_rank_tol(dim: usize) -> f64 {
    64.0 * dim as f64 * f64::EPSILON
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(m: &CMatrix) -> HermitianEigen {
    let n = m.nrows();
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermitianEigen { values, vectors }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    match m.nrows() {
        0 => Vec::new(),
        1 => vec![m[(0, 0)].re],
        _ => {
            let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
            v.sort_by(f64::total_cmp);
            v
        }
    }
}

/// Threshold below which an eigenvalue counts as zero: `tol * max(lambda_max, 0)`.
pub fn rank_threshold(values: &[f64], tol: f64) -> f64 {
    let max = values.iter().copied().fold(0.0_f64, f64::max);
    tol * max
}

/// Number of eigenvalues strictly above `tol * lambda_max`. A zero matrix has rank 0.
pub fn numerical_rank(values: &[f64], tol: f64) -> usize {
    let max = values.iter().copied().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return 0;
    }
    let thr = tol * max;
    values.iter().filter(|&&v| v > thr).count()
}

/// Gram matrix in the smaller dimension: `H H^H` when `rows <= cols`, else `H^H H`.
pub fn min_gram(h: &CMatrix) -> CMatrix {
    if h.nrows() <= h.ncols() {
        h * h.adjoint()
    } else {
        h.adjoint() * h
    }
}

/// `ln det(I + scale * G)` for Hermitian PSD `G` and `scale >= 0`.
pub fn log_det_identity_plus(gram: &CMatrix, scale: f64) -> f64 {
    let n = gram.nrows();
    if n == 1 {
        return (scale * gram[(0, 0)].re).ln_1p();
    }
    let mut a = gram * Complex64::new(scale, 0.0);
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    match Cholesky::new(a) {
        Some(ch) => {
            let l = ch.l_dirty();
            2.0 * (0..n).map(|i| l[(i, i)].re.ln()).sum::<f64>()
        }
        // Roundoff on a nearly singular gram; fall back to the spectrum.
        None => hermitian_eigenvalues(gram)
            .into_iter()
            .map(|v| (scale * v.max(0.0)).ln_1p())
            .sum(),
    }
}

/// Hermitian PSD square root `U diag(sqrt(lambda)) U^H`; eigenvalues at or below
/// `threshold` are treated as zero.
pub fn psd_sqrt(eig: &HermitianEigen, threshold: f64) -> CMatrix {
    let n = eig.values.len();
    let mut scaled = eig.vectors.clone();
    for (k, &v) in eig.values.iter().enumerate() {
        let s = if v > threshold { v.sqrt() } else { 0.0 };
        scaled.column_mut(k).scale_mut(s);
    }
    let mut out = &scaled * eig.vectors.adjoint();
    // Symmetrize away roundoff.
    for i in 0..n {
        out[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let avg = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
            out[(i, j)] = avg;
            out[(j, i)] = avg.conj();
        }
    }
    out
}

/// Frobenius-norm Hermitian defect `||M - M^H||`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm()
}
