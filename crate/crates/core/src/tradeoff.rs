//! Closed-form diversity-multiplexing tradeoff curves.

use crate::channel::AntennaConfig;
use crate::error::{Error, Result};

/// Piecewise-linear `d(r)` on `[0, m_min]` through integer vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradeoffCurve {
    vertices: Vec<(u64, u64)>,
}

impl TradeoffCurve {
    /// `(r, d(r))` at `r = 0, 1, ..., m_min`.
    pub fn vertices(&self) -> &[(u64, u64)] {
        &self.vertices
    }

    pub fn m_min(&self) -> u64 {
        self.vertices.len() as u64 - 1
    }

    /// Linear interpolation between adjacent integer vertices.
    pub fn evaluate(&self, r: f64) -> Result<f64> {
        let m_min = self.m_min() as f64;
        if !(0.0..=m_min).contains(&r) {
            return Err(Error::InvalidParameter(format!(
                "rate {r} outside [0, {m_min}]"
            )));
        }
        // m_min >= 1, so there are always at least two vertices.
        let k = (r.floor() as usize).min(self.vertices.len() - 2);
        let (d0, d1) = (self.vertices[k].1 as f64, self.vertices[k + 1].1 as f64);
        let t = r - k as f64;
        Ok(d0 + t * (d1 - d0))
    }
}

/// Jensen-channel curve `d(r) = (rho m_max - r)(m_min - r)` at integer `r`.
pub fn jensen_curve(rank: usize, ant: AntennaConfig) -> Result<TradeoffCurve> {
    if rank == 0 {
        return Err(Error::InvalidParameter(
            "covariance rank must be at least 1".into(),
        ));
    }
    let (m_min, m_max) = (ant.m_min() as u64, ant.m_max() as u64);
    let rho = rank as u64;
    let vertices = (0..=m_min)
        .map(|r| (r, (rho * m_max - r) * (m_min - r)))
        .collect();
    Ok(TradeoffCurve { vertices })
}

/// Optimal curve of a cyclic frequency-selective channel with `taps` taps.
pub fn frequency_selective_curve(taps: usize, ant: AntennaConfig) -> Result<TradeoffCurve> {
    jensen_curve(taps, ant)
}
