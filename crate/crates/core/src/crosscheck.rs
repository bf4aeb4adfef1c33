//! Brute-force Rao statistic built directly from the quantized-data
//! log-likelihood, used to cross-check the closed form.
//!
//! The score comes from central differences of ℓ(Y; β) at β = 0 and the
//! Fisher matrix from the expected outer product of per-quadrature scores,
//! enumerated over all bins. No closed-form derivative or diagonal
//! structure is assumed; the 2×2 matrix is inverted in full.

use crate::quantizer::{bin_probability, QuantizedObservation, ThresholdSet};
use crate::scene::EffectiveSignal;
use crate::{Error, Result};

/// Step for the central differences in β.
pub const DEFAULT_STEP: f64 = 1e-4;

/// ℓ(Y; β) = Σ_n ln F_{Re y_n}(β_R g_n − β_I h_n) + ln F_{Im y_n}(β_R h_n + β_I g_n).
pub fn log_likelihood(
    y: &QuantizedObservation,
    z: &EffectiveSignal,
    thresholds: &ThresholdSet,
    noise_power: f64,
    beta: (f64, f64),
) -> f64 {
    let (br, bi) = beta;
    (0..z.len())
        .map(|n| {
            let (g, h) = (z.g[n], z.h[n]);
            bin_probability(br * g - bi * h, y.re_bins[n], thresholds, noise_power).ln()
                + bin_probability(br * h + bi * g, y.im_bins[n], thresholds, noise_power).ln()
        })
        .sum()
}

/// Numerical score at β = 0.
pub fn numerical_score(
    y: &QuantizedObservation,
    z: &EffectiveSignal,
    thresholds: &ThresholdSet,
    noise_power: f64,
    step: f64,
) -> (f64, f64) {
    let ll = |b| log_likelihood(y, z, thresholds, noise_power, b);
    let d_re = (ll((step, 0.0)) - ll((-step, 0.0))) / (2.0 * step);
    let d_im = (ll((0.0, step)) - ll((0.0, -step))) / (2.0 * step);
    (d_re, d_im)
}

/// E[score scoreᵀ] at β = 0, with per-bin log-derivatives from central differences.
pub fn numerical_fisher(
    z: &EffectiveSignal,
    thresholds: &ThresholdSet,
    noise_power: f64,
    step: f64,
) -> [[f64; 2]; 2] {
    let bins = thresholds.num_bins() as u32;
    let mut fi = [[0.0; 2]; 2];
    let log_slope = |i: u32, du: f64| {
        (bin_probability(du, i, thresholds, noise_power).ln()
            - bin_probability(-du, i, thresholds, noise_power).ln())
            / (2.0 * step)
    };
    for n in 0..z.len() {
        let (g, h) = (z.g[n], z.h[n]);
        for i in 1..=bins {
            let p = bin_probability(0.0, i, thresholds, noise_power);
            // real quadrature: u = β_R g − β_I h
            let re = [log_slope(i, step * g), log_slope(i, -step * h)];
            // imaginary quadrature: u = β_R h + β_I g
            let im = [log_slope(i, step * h), log_slope(i, step * g)];
            for a in 0..2 {
                for b in 0..2 {
                    fi[a][b] += p * (re[a] * re[b] + im[a] * im[b]);
                }
            }
        }
    }
    fi
}

/// sᵀ·FI⁻¹·s with numerical score and Fisher matrix.
pub fn rao_by_score(
    y: &QuantizedObservation,
    z: &EffectiveSignal,
    thresholds: &ThresholdSet,
    noise_power: f64,
) -> Result<f64> {
    if y.len() != z.len() {
        return Err(Error::LengthMismatch {
            expected: z.len(),
            actual: y.len(),
        });
    }
    let s = numerical_score(y, z, thresholds, noise_power, DEFAULT_STEP);
    let fi = numerical_fisher(z, thresholds, noise_power, DEFAULT_STEP);
    let det = fi[0][0] * fi[1][1] - fi[0][1] * fi[1][0];
    if !(det > 0.0) {
        return Err(Error::ZeroSignal);
    }
    let inv = [
        [fi[1][1] / det, -fi[0][1] / det],
        [-fi[1][0] / det, fi[0][0] / det],
    ];
    let v = [s.0, s.1];
    let mut q = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            q += v[a] * inv[a][b] * v[b];
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fisher_matrix_has_no_cross_term() {
        let t = ThresholdSet::new(2, vec![-0.9, 0.1, 1.1]).unwrap();
        let z = EffectiveSignal {
            g: vec![0.5, -1.0, 0.3],
            h: vec![0.7, 0.2, -0.4],
        };
        let fi = numerical_fisher(&z, &t, 2.0, DEFAULT_STEP);
        assert!((fi[0][0] - fi[1][1]).abs() < 1e-8 * fi[0][0]);
        assert!(fi[0][1].abs() < 1e-8 * fi[0][0]);
    }
}
