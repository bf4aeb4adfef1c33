//! Closed-form multi-bit Rao test and the unquantized GLRT baseline.
//!
//! Only one indicator fires per element, so the inner bin sums of the Rao
//! statistic reduce to one table lookup per quadrature:
//!
//! ```text
//! s_R = Σ_n g_n r(Re y_n) + h_n r(Im y_n)
//! s_I = Σ_n g_n r(Im y_n) − h_n r(Re y_n)
//! Λ_R = (s_R² + s_I²) / (zᴴz · Σ_i ((F'_i)² − F''_i F_i)/F_i)
//! ```
//!
//! with r(i) = F'_i/F_i at u = 0. Equivalently s_R + j·s_I = Σ conj(z_n)·r_n,
//! which is why the statistic ignores a global phase on z.

use num_complex::Complex64;

use crate::quantizer::{BinStatsTable, QuantizedObservation, ThresholdSet};
use crate::scene::EffectiveSignal;
use crate::special::CompensatedSum;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    H0,
    H1,
}

/// H1 iff `statistic > eta`; ties go to H0.
#[inline]
pub fn decide(statistic: f64, eta: f64) -> Decision {
    if statistic > eta {
        Decision::H1
    } else {
        Decision::H0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub decision: Decision,
}

impl DetectorOutcome {
    pub fn new(statistic: f64, threshold: f64) -> Self {
        Self {
            statistic,
            threshold,
            decision: decide(statistic, threshold),
        }
    }
}

/// Rao detector with the bin table and normalizer precomputed.
#[derive(Debug, Clone)]
pub struct RaoDetector {
    z: EffectiveSignal,
    table: BinStatsTable,
    fisher_diagonal: f64,
}

impl RaoDetector {
    pub fn new(z: EffectiveSignal, thresholds: &ThresholdSet, noise_power: f64) -> Result<Self> {
        let table = BinStatsTable::new(thresholds, noise_power)?;
        Self::with_table(z, table)
    }

    pub fn with_table(z: EffectiveSignal, table: BinStatsTable) -> Result<Self> {
        let energy = z.energy();
        if !(energy > 0.0) {
            return Err(Error::ZeroSignal);
        }
        let fisher_diagonal = energy * table.information_per_sample();
        Ok(Self {
            z,
            table,
            fisher_diagonal,
        })
    }

    pub fn table(&self) -> &BinStatsTable {
        &self.table
    }

    pub fn signal(&self) -> &EffectiveSignal {
        &self.z
    }

    /// Denominator of Λ_R, i.e. the Fisher information diagonal.
    pub fn fisher_diagonal(&self) -> f64 {
        self.fisher_diagonal
    }

    /// Score (∂ℓ/∂β_R, ∂ℓ/∂β_I) at β = 0.
    pub fn score(&self, y: &QuantizedObservation) -> Result<(f64, f64)> {
        let n = self.z.len();
        if y.re_bins.len() != n || y.im_bins.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: y.re_bins.len().min(y.im_bins.len()),
            });
        }
        let mut s_re = CompensatedSum::new();
        let mut s_im = CompensatedSum::new();
        for k in 0..n {
            let (g, h) = (self.z.g[k], self.z.h[k]);
            let r1 = self.table.ratio(y.re_bins[k]);
            let r2 = self.table.ratio(y.im_bins[k]);
            s_re.add(g * r1 + h * r2);
            s_im.add(g * r2 - h * r1);
        }
        Ok((s_re.value(), s_im.value()))
    }

    /// Λ_R for one quantized observation.
    pub fn statistic(&self, y: &QuantizedObservation) -> Result<f64> {
        let (a, b) = self.score(y)?;
        Ok((a * a + b * b) / self.fisher_diagonal)
    }
}

/// Λ_R from scratch; prefer [`RaoDetector`] when evaluating many observations.
pub fn rao_statistic(
    y: &QuantizedObservation,
    z: &EffectiveSignal,
    thresholds: &ThresholdSet,
    noise_power: f64,
) -> Result<f64> {
    RaoDetector::new(z.clone(), thresholds, noise_power)?.statistic(y)
}

/// Unquantized GLRT: |zᴴx|² / (zᴴz · σ²/2).
pub fn glrt_unquantized(x: &[Complex64], z: &EffectiveSignal, noise_power: f64) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::LengthMismatch {
            expected: z.len(),
            actual: x.len(),
        });
    }
    let energy = z.energy();
    if !(energy > 0.0) {
        return Err(Error::ZeroSignal);
    }
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for (k, xn) in x.iter().enumerate() {
        let p = z.z(k).conj() * xn;
        re.add(p.re);
        im.add(p.im);
    }
    let proj = Complex64::new(re.value(), im.value());
    Ok(proj.norm_sqr() / (energy * noise_power / 2.0))
}
