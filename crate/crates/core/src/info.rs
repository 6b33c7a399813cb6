//! Per-realization information measures: mutual information, its Jensen upper
//! bound, singularity levels and the asymptotic outage events built on them.
//!
//! All logarithms are natural; a rate `r` corresponds to `r * ln(snr)` nats.

use crate::channel::{AntennaConfig, ChannelRealization, CovarianceSpec, JensenChannel};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// An SNR value kept in both linear and dB form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrPoint {
    linear: f64,
    db: f64,
}

impl SnrPoint {
    pub fn from_db(db: f64) -> Result<Self> {
        if !db.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "SNR {db} dB is not finite"
            )));
        }
        Ok(Self {
            linear: 10f64.powf(db / 10.0),
            db,
        })
    }

    pub fn from_linear(linear: f64) -> Result<Self> {
        if !(linear > 0.0 && linear.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "SNR {linear} must be positive"
            )));
        }
        Ok(Self {
            linear,
            db: 10.0 * linear.log10(),
        })
    }

    pub fn linear(&self) -> f64 {
        self.linear
    }

    pub fn db(&self) -> f64 {
        self.db
    }

    /// `ln(snr)`, the nats-per-unit-multiplexing-rate conversion.
    pub fn ln(&self) -> f64 {
        self.linear.ln()
    }
}

/// Singularity levels of the slot Grams and of the reduced Jensen channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularityLevels {
    /// `mu(n)`, one vector of length `m_min` per slot, sorted descending.
    pub per_slot: Vec<Vec<f64>>,
    /// `alpha`, sorted descending.
    pub jensen: Vec<f64>,
}

/// `(1/N) sum_n ln det(I + (snr/m_t) H_n H_n^H)` in nats.
pub fn mutual_information(re: &ChannelRealization, ant: AntennaConfig, snr: SnrPoint) -> f64 {
    let grams: Vec<CMatrix> = re.slots().iter().map(linalg::min_gram).collect();
    mutual_information_from_grams(&grams, ant, snr)
}

/// Same as [`mutual_information`] with the per-slot min-dimension Grams precomputed.
pub fn mutual_information_from_grams(grams: &[CMatrix], ant: AntennaConfig, snr: SnrPoint) -> f64 {
    let scale = snr.linear() / ant.m_t() as f64;
    let total: f64 = grams
        .iter()
        .map(|g| linalg::log_det_identity_plus(g, scale))
        .sum();
    total / grams.len() as f64
}

/// `ln det(I_{m_min} + snr/(m_t N) H_J H_J^H)` in nats.
pub fn jensen_mutual_information(
    jc: &JensenChannel,
    ant: AntennaConfig,
    slots: usize,
    snr: SnrPoint,
) -> f64 {
    let gram = jc.matrix() * jc.matrix().adjoint();
    jensen_mutual_information_from_gram(&gram, ant, slots, snr)
}

pub fn jensen_mutual_information_from_gram(
    gram: &CMatrix,
    ant: AntennaConfig,
    slots: usize,
    snr: SnrPoint,
) -> f64 {
    linalg::log_det_identity_plus(gram, snr.linear() / (ant.m_t() * slots) as f64)
}

/// `-ln(lambda) / ln(snr)`; a nonpositive eigenvalue maps to `+inf`.
pub fn singularity_level(eigenvalue: f64, snr: SnrPoint) -> f64 {
    if eigenvalue <= 0.0 {
        f64::INFINITY
    } else {
        -eigenvalue.ln() / snr.ln()
    }
}

fn levels_descending(gram: &CMatrix, snr: SnrPoint) -> Vec<f64> {
    // Ascending eigenvalues give descending levels.
    linalg::hermitian_eigenvalues(gram)
        .into_iter()
        .map(|v| singularity_level(v, snr))
        .collect()
}

/// Levels `mu_k(n)` of each `H_n H_n^H` and `alpha_k` of the reduced i.i.d. matrix.
pub fn singularity_levels(
    re: &ChannelRealization,
    reduced: &CMatrix,
    ant: AntennaConfig,
    snr: SnrPoint,
) -> Result<SingularityLevels> {
    if snr.linear() <= 1.0 {
        return Err(Error::InvalidParameter(
            "singularity levels need snr > 1 (0 dB)".into(),
        ));
    }
    if re.shape() != (ant.m_r(), ant.m_t()) || reduced.nrows() != ant.m_min() {
        return Err(Error::Dimension(
            "channel does not match antenna configuration".into(),
        ));
    }
    let per_slot = re
        .slots()
        .iter()
        .map(|h| levels_descending(&linalg::min_gram(h), snr))
        .collect();
    let jensen = levels_descending(&(reduced * reduced.adjoint()), snr);
    Ok(SingularityLevels { per_slot, jensen })
}

#[inline]
fn positive_part_deficit(level: f64) -> f64 {
    // An infinite level contributes nothing.
    (1.0 - level).max(0.0)
}

/// Event `O(r)`: `(1/N) sum_n sum_k [1 - mu_k(n)]^+ < r`.
pub fn outage_indicator(levels: &SingularityLevels, r: f64) -> bool {
    let n = levels.per_slot.len() as f64;
    let sum: f64 = levels
        .per_slot
        .iter()
        .flat_map(|mu| mu.iter())
        .map(|&m| positive_part_deficit(m))
        .sum();
    sum / n < r
}

/// Event `J(r)`: `sum_k [1 - alpha_k]^+ < r`.
pub fn jensen_outage_indicator(levels: &SingularityLevels, r: f64) -> bool {
    levels
        .jensen
        .iter()
        .map(|&a| positive_part_deficit(a))
        .sum::<f64>()
        < r
}

/// Lower, whitened-Jensen and upper mutual informations of the PSD sandwich.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichValues {
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
}

/// Column weights for the three sandwich Grams. Block `b < rank` of `m_max`
/// columns carries the `b`-th nonzero eigenvalue of `R` (largest first).
pub(crate) struct SandwichWeights {
    pub lower: Vec<f64>,
    pub middle: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SandwichWeights {
    pub(crate) fn new(cov: &CovarianceSpec, ant: AntennaConfig) -> Self {
        let block = ant.m_max();
        let cols = cov.slots() * block;
        let nonzero = cov.nonzero_eigenvalues();
        let mut lower = vec![0.0; cols];
        let mut middle = vec![0.0; cols];
        let mut upper = vec![0.0; cols];
        for (b, &lambda) in nonzero.iter().enumerate() {
            for c in b * block..(b + 1) * block {
                lower[c] = cov.lambda_min_nz();
                middle[c] = lambda;
                upper[c] = cov.lambda_max();
            }
        }
        Self {
            lower,
            middle,
            upper,
        }
    }
}

/// `sum_c w_c h_c h_c^H` over the columns of `h`.
pub(crate) fn weighted_gram(h: &CMatrix, weights: &[f64]) -> CMatrix {
    let mut scaled = h.clone();
    for (c, &w) in weights.iter().enumerate() {
        scaled.column_mut(c).scale_mut(w);
    }
    scaled * h.adjoint()
}

/// The three log-dets of the eigenvalue sandwich on a shared whitened matrix
/// `hw` (`m_min x N m_max`). Ordered `lower <= middle <= upper` per draw.
pub fn sandwich_values(
    hw: &CMatrix,
    cov: &CovarianceSpec,
    ant: AntennaConfig,
    snr: SnrPoint,
) -> Result<SandwichValues> {
    if hw.shape() != (ant.m_min(), cov.slots() * ant.m_max()) {
        return Err(Error::Dimension(format!(
            "whitened matrix is {}x{}, expected {}x{}",
            hw.nrows(),
            hw.ncols(),
            ant.m_min(),
            cov.slots() * ant.m_max()
        )));
    }
    let weights = SandwichWeights::new(cov, ant);
    let scale = snr.linear() / (ant.m_t() * cov.slots()) as f64;
    let value = |w: &[f64]| linalg::log_det_identity_plus(&weighted_gram(hw, w), scale);
    Ok(SandwichValues {
        lower: value(&weights.lower),
        middle: value(&weights.middle),
        upper: value(&weights.upper),
    })
}
