//! Fisher information, non-centrality parameters and asymptotic χ² curves.
//!
//! Under H0 the Rao statistic tends to χ²₂ and under H1 to χ′²₂(λ_F), so
//! for a false-alarm rate P_FA the threshold is η = −2 ln P_FA and
//! P_D = Q₁(√λ_F, √η).
//!
//! The χ′²₂ right tail uses the Poisson mixture
//!
//! ```text
//! P(χ′²₂(λ) > x) = Σ_j Pois(j; λ/2) · e^{−x/2} Σ_{k≤j} (x/2)^k / k!
//! ```
//!
//! evaluated in log space, which is the standard series for the Marcum Q₁
//! function. Every term is positive, so there is no cancellation. Each inner
//! factor is at most one, so the remaining Poisson mass bounds the truncation
//! error; the series stops once that bound drops below 1e-17 of the running
//! sum, which keeps the relative error near machine precision even deep in
//! the tail (and the absolute error far below 1e-10).

use std::io::{self, Write};

use crate::quantizer::{BinStatsTable, ThresholdSet};
use crate::scene::EffectiveSignal;
use crate::{Error, Result};

/// 2×2 Fisher information over (β_R, β_I) at β = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherInfo {
    pub m: [[f64; 2]; 2],
}

impl FisherInfo {
    pub fn diagonal(&self) -> f64 {
        self.m[0][0]
    }

    fn isotropic(d: f64) -> Self {
        Self {
            m: [[d, 0.0], [0.0, d]],
        }
    }
}

/// FI(0) = zᴴz · Σ_i ((F'_i)² − F''_i F_i)/F_i on the diagonal, zero elsewhere.
pub fn fisher_information(
    z: &EffectiveSignal,
    thresholds: &ThresholdSet,
    noise_power: f64,
) -> Result<FisherInfo> {
    let table = BinStatsTable::new(thresholds, noise_power)?;
    fisher_from_table(z, &table)
}

pub fn fisher_from_table(z: &EffectiveSignal, table: &BinStatsTable) -> Result<FisherInfo> {
    let energy = z.energy();
    if !(energy > 0.0) {
        return Err(Error::ZeroSignal);
    }
    Ok(FisherInfo::isotropic(energy * table.information_per_sample()))
}

/// λ_F = ‖β‖² · FI diagonal.
pub fn noncentrality(
    beta: (f64, f64),
    z: &EffectiveSignal,
    thresholds: &ThresholdSet,
    noise_power: f64,
) -> Result<f64> {
    let fi = fisher_information(z, thresholds, noise_power)?;
    Ok((beta.0 * beta.0 + beta.1 * beta.1) * fi.diagonal())
}

/// λ_{F−∞} = ‖β‖² · zᴴz / (σ²/2).
pub fn noncentrality_unquantized(beta: (f64, f64), z: &EffectiveSignal, noise_power: f64) -> f64 {
    (beta.0 * beta.0 + beta.1 * beta.1) * z.energy() / (noise_power / 2.0)
}

/// η with P(χ²₂ > η) = p_fa, i.e. −2 ln p_fa.
pub fn chi2_quantile(p_fa: f64) -> Result<f64> {
    if !(p_fa > 0.0 && p_fa < 1.0) {
        return Err(Error::Domain(format!("false-alarm probability {p_fa} not in (0,1)")));
    }
    Ok(-2.0 * p_fa.ln())
}

/// P(χ²₂ > x).
pub fn chi2_sf(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        (-0.5 * x).exp()
    }
}

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// P(χ′²₂(λ) > x).
pub fn ncx2_sf(x: f64, lambda: f64) -> f64 {
    assert!(lambda >= 0.0 && !lambda.is_nan(), "non-centrality must be >= 0");
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    let mu = 0.5 * lambda;
    let y = 0.5 * x;
    if mu == 0.0 {
        return chi2_sf(x);
    }
    let (ln_mu, ln_y) = (mu.ln(), y.ln());
    // log of the inner Erlang tail e^{-y} Σ_{k≤j} y^k/k!
    let mut log_tail = -y;
    let mut total = 0.0;
    let mut j = 0u64;
    loop {
        let jf = j as f64;
        let log_w = -mu + jf * ln_mu - libm::lgamma(jf + 1.0);
        total += (log_w + log_tail).exp();
        // Σ_{k>j} w_k ≤ w_{j+1} / (1 − μ/(j+2)) once j+2 > μ
        if jf + 2.0 > mu {
            let log_next = log_w + ln_mu - (jf + 1.0).ln();
            let bound = log_next.exp() / (1.0 - mu / (jf + 2.0));
            if bound <= 1e-17 * total || bound < f64::MIN_POSITIVE {
                break;
            }
        }
        j += 1;
        let jf = j as f64;
        log_tail = log_add_exp(log_tail, -y + jf * ln_y - libm::lgamma(jf + 1.0));
    }
    total.min(1.0)
}

/// P(χ′²₂(λ) ≤ x).
pub fn ncx2_cdf(x: f64, lambda: f64) -> f64 {
    1.0 - ncx2_sf(x, lambda)
}

/// Marcum Q₁(a, b) = P(χ′²₂(a²) > b²).
pub fn marcum_q1(a: f64, b: f64) -> f64 {
    ncx2_sf(b * b, a * a)
}

/// Asymptotic detection probability for non-centrality `lambda_f` at `p_fa`.
pub fn theoretical_pd(lambda_f: f64, p_fa: f64) -> Result<f64> {
    if !(lambda_f >= 0.0) || lambda_f.is_infinite() {
        return Err(Error::Domain(format!("non-centrality {lambda_f} must be finite and >= 0")));
    }
    let eta = chi2_quantile(p_fa)?;
    Ok(ncx2_sf(eta, lambda_f))
}

/// One row of a theoretical detection curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryPoint {
    pub p_fa: f64,
    pub eta: f64,
    pub lambda_f: f64,
    pub p_d: f64,
}

pub fn theory_curve(lambda_f: f64, p_fa_grid: &[f64]) -> Result<Vec<TheoryPoint>> {
    p_fa_grid
        .iter()
        .map(|&p_fa| {
            Ok(TheoryPoint {
                p_fa,
                eta: chi2_quantile(p_fa)?,
                lambda_f,
                p_d: theoretical_pd(lambda_f, p_fa)?,
            })
        })
        .collect()
}

pub const THEORY_CSV_HEADER: &str = "p_fa,eta,lambda_f,p_d_theory";

pub fn write_theory_csv<W: Write>(mut out: W, points: &[TheoryPoint]) -> io::Result<()> {
    writeln!(out, "{THEORY_CSV_HEADER}")?;
    for p in points {
        writeln!(out, "{:?},{:?},{:?},{:?}", p.p_fa, p.eta, p.lambda_f, p.p_d)?;
    }
    Ok(())
}
