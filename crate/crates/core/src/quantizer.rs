//! Multi-bit element-wise quantizer and the bin-probability functions.
//!
//! Bins are numbered 1..=2^q. Bin `i` covers `(τ_{i-1}, τ_i]` with
//! τ₀ = −∞ and τ_{2^q} = +∞ implicit, so a value sitting exactly on a
//! threshold goes to the lower bin.
//!
//! For a bin and a shift `u` (the noise-free part of an element), with
//! s² = σ²/2 the per-quadrature noise variance:
//!
//! ```text
//! F(u)   = Q((τ_{i-1} − u)/s) − Q((τ_i − u)/s)
//! F'(u)  = φ(τ_{i-1} − u) − φ(τ_i − u)
//! F''(u) = (τ_{i-1} − u)/s² · φ(τ_{i-1} − u) − (τ_i − u)/s² · φ(τ_i − u)
//! ```
//!
//! where φ is the N(0, s²) density and every term evaluated at an infinite
//! threshold is zero.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::special::{compensated_sum, gaussian_pdf, normal_cdf, q_function};
use crate::{Error, Result};

/// Largest supported bit depth.
pub const MAX_BITS: u32 = 16;

/// Default probability floor below which a bin counts as degenerate.
pub const DEFAULT_BIN_FLOOR: f64 = 1e-300;

/// Bit depth plus the strictly increasing interior thresholds τ₁..τ_{2^q−1}.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSet {
    bits: u32,
    interior: Vec<f64>,
}

impl ThresholdSet {
    pub fn new(bits: u32, interior: Vec<f64>) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::InvalidThresholds(format!(
                "bit depth {bits} outside 1..={MAX_BITS}"
            )));
        }
        let expected = (1usize << bits) - 1;
        if interior.len() != expected {
            return Err(Error::InvalidThresholds(format!(
                "{bits}-bit quantizer needs {expected} thresholds, got {}",
                interior.len()
            )));
        }
        if interior.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidThresholds("thresholds must be finite".into()));
        }
        if interior.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidThresholds(
                "thresholds must be strictly increasing".into(),
            ));
        }
        Ok(Self { bits, interior })
    }

    /// Uniform grid splitting [−half_width, half_width] into 2^q equal cells.
    pub fn uniform(bits: u32, half_width: f64) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::InvalidThresholds(format!(
                "bit depth {bits} outside 1..={MAX_BITS}"
            )));
        }
        let bins = 1usize << bits;
        let step = 2.0 * half_width / bins as f64;
        let interior = (1..bins).map(|k| -half_width + step * k as f64).collect();
        Self::new(bits, interior)
    }

    /// Sign quantizer (q = 1, τ₁ = 0).
    pub fn sign() -> Self {
        Self {
            bits: 1,
            interior: vec![0.0],
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn num_bins(&self) -> usize {
        1 << self.bits
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    /// τ_k for k in 0..=2^q, including the implicit infinities.
    pub fn tau(&self, k: usize) -> f64 {
        if k == 0 {
            f64::NEG_INFINITY
        } else if k >= self.num_bins() {
            f64::INFINITY
        } else {
            self.interior[k - 1]
        }
    }

    /// Bin index in 1..=2^q for a real value (NaN maps to bin 1).
    #[inline]
    pub fn bin_index(&self, x: f64) -> u32 {
        self.interior.partition_point(|&t| t < x) as u32 + 1
    }

    /// A point strictly inside bin `i`.
    pub fn representative(&self, i: u32) -> f64 {
        let i = i as usize;
        let (lo, hi) = (self.tau(i - 1), self.tau(i));
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (false, true) => hi - 1.0,
            (true, false) => lo + 1.0,
            (false, false) => 0.0,
        }
    }

    /// Binary codeword of bin `i` (bin 1 ↦ "00…0"), for display only.
    pub fn codeword(&self, i: u32) -> String {
        format!("{:0width$b}", i - 1, width = self.bits as usize)
    }
}

impl fmt::Display for ThresholdSet {
    /// `q; τ₁,…,τ_{2^q−1}` with round-trip precision.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};", self.bits)?;
        for (k, t) in self.interior.iter().enumerate() {
            let sep = if k == 0 { " " } else { "," };
            write!(f, "{sep}{t:?}")?;
        }
        Ok(())
    }
}

impl FromStr for ThresholdSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (bits, rest) = s
            .trim()
            .split_once(';')
            .ok_or_else(|| Error::Parse(format!("expected 'q; t1,...', got {s:?}")))?;
        let bits: u32 = bits
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad bit depth {bits:?}")))?;
        let interior = rest
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad threshold {v:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        ThresholdSet::new(bits, interior)
    }
}

/// Bin indices of the real and imaginary parts of each element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedObservation {
    pub re_bins: Vec<u32>,
    pub im_bins: Vec<u32>,
}

impl QuantizedObservation {
    pub fn len(&self) -> usize {
        self.re_bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re_bins.is_empty()
    }
}

pub fn quantize(x: &[Complex64], thresholds: &ThresholdSet) -> QuantizedObservation {
    let mut out = QuantizedObservation {
        re_bins: Vec::with_capacity(x.len()),
        im_bins: Vec::with_capacity(x.len()),
    };
    quantize_into(x, thresholds, &mut out);
    out
}

/// Buffer-reusing variant of [`quantize`].
pub fn quantize_into(x: &[Complex64], thresholds: &ThresholdSet, out: &mut QuantizedObservation) {
    out.re_bins.clear();
    out.im_bins.clear();
    for v in x {
        out.re_bins.push(thresholds.bin_index(v.re));
        out.im_bins.push(thresholds.bin_index(v.im));
    }
}

fn check_bin(i: u32, thresholds: &ThresholdSet) {
    assert!(
        i >= 1 && (i as usize) <= thresholds.num_bins(),
        "bin index {i} outside 1..={}",
        thresholds.num_bins()
    );
}

/// F_i(u): probability that a N(u, σ²/2) draw lands in bin `i`.
///
/// Panics if `i` is not in 1..=2^q.
pub fn bin_probability(u: f64, i: u32, thresholds: &ThresholdSet, noise_power: f64) -> f64 {
    check_bin(i, thresholds);
    let s = (noise_power / 2.0).sqrt();
    let a = (thresholds.tau(i as usize - 1) - u) / s;
    let b = (thresholds.tau(i as usize) - u) / s;
    // Pick the tail that avoids subtracting numbers close to one.
    if a >= 0.0 {
        q_function(a) - q_function(b)
    } else if b <= 0.0 {
        normal_cdf(b) - normal_cdf(a)
    } else {
        1.0 - normal_cdf(a) - q_function(b)
    }
}

/// (F_i'(u), F_i''(u)).
///
/// Panics if `i` is not in 1..=2^q.
pub fn bin_derivatives(u: f64, i: u32, thresholds: &ThresholdSet, noise_power: f64) -> (f64, f64) {
    check_bin(i, thresholds);
    let var = noise_power / 2.0;
    let lo = thresholds.tau(i as usize - 1) - u;
    let hi = thresholds.tau(i as usize) - u;
    let (pdf_lo, pdf_hi) = (gaussian_pdf(lo, var), gaussian_pdf(hi, var));
    let weighted = |d: f64, p: f64| if d.is_finite() { d / var * p } else { 0.0 };
    let f1 = pdf_lo - pdf_hi;
    let f2 = weighted(lo, pdf_lo) - weighted(hi, pdf_hi);
    (f1, f2)
}

/// F, F' and F'' of one bin at u = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinStats {
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
}

impl BinStats {
    /// ((F')² − F''·F)/F, the bin's share of the per-sample Fisher information.
    pub fn information(&self) -> f64 {
        (self.f1 * self.f1 - self.f2 * self.f) / self.f
    }
}

/// [`BinStats`] for every bin of a threshold set, shared by all elements.
#[derive(Debug, Clone, PartialEq)]
pub struct BinStatsTable {
    thresholds: ThresholdSet,
    noise_power: f64,
    bins: Vec<BinStats>,
    ratios: Vec<f64>,
}

impl BinStatsTable {
    pub fn new(thresholds: &ThresholdSet, noise_power: f64) -> Result<Self> {
        Self::with_floor(thresholds, noise_power, DEFAULT_BIN_FLOOR)
    }

    pub fn with_floor(thresholds: &ThresholdSet, noise_power: f64, floor: f64) -> Result<Self> {
        if !(noise_power > 0.0 && noise_power.is_finite()) {
            return Err(Error::InvalidConfig("noise power must be positive".into()));
        }
        let mut bins = Vec::with_capacity(thresholds.num_bins());
        for i in 1..=thresholds.num_bins() as u32 {
            let f = bin_probability(0.0, i, thresholds, noise_power);
            if !(f >= floor) {
                return Err(Error::DegenerateBin {
                    bin: i as usize,
                    probability: f,
                    floor,
                });
            }
            let (f1, f2) = bin_derivatives(0.0, i, thresholds, noise_power);
            bins.push(BinStats { f, f1, f2 });
        }
        Ok(Self::from_bins(thresholds.clone(), noise_power, bins))
    }

    /// Builds a table from explicit per-bin values (no validation). Used for
    /// mutation checks of the verification harness.
    pub fn from_bins(thresholds: ThresholdSet, noise_power: f64, bins: Vec<BinStats>) -> Self {
        let ratios = bins.iter().map(|b| b.f1 / b.f).collect();
        Self {
            thresholds,
            noise_power,
            bins,
            ratios,
        }
    }

    pub fn thresholds(&self) -> &ThresholdSet {
        &self.thresholds
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn bins(&self) -> &[BinStats] {
        &self.bins
    }

    /// Stats of bin `i` (1-based).
    pub fn bin(&self, i: u32) -> BinStats {
        self.bins[i as usize - 1]
    }

    /// F'_i/F_i for bin `i` (1-based).
    #[inline]
    pub fn ratio(&self, i: u32) -> f64 {
        self.ratios[i as usize - 1]
    }

    /// Σ_i ((F'_i)² − F''_i F_i)/F_i.
    pub fn information_per_sample(&self) -> f64 {
        compensated_sum(self.bins.iter().map(BinStats::information))
    }
}

/// Convenience wrapper for [`BinStatsTable::new`].
pub fn bin_stats_table(thresholds: &ThresholdSet, noise_power: f64) -> Result<BinStatsTable> {
    BinStatsTable::new(thresholds, noise_power)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

    fn table_q2() -> ThresholdSet {
        ThresholdSet::new(2, vec![-0.978, -0.008, 0.967]).unwrap()
    }

    fn table_q3() -> ThresholdSet {
        ThresholdSet::new(3, vec![-1.630, -1.012, -0.460, 0.067, 0.542, 1.067, 1.803]).unwrap()
    }

    #[test]
    fn rejects_malformed_sets() {
        assert!(ThresholdSet::new(2, vec![0.0, 1.0]).is_err());
        assert!(ThresholdSet::new(2, vec![0.0, 1.0, 1.0]).is_err());
        assert!(ThresholdSet::new(2, vec![0.0, -1.0, 2.0]).is_err());
        assert!(ThresholdSet::new(1, vec![f64::NAN]).is_err());
        assert!(ThresholdSet::new(0, vec![]).is_err());
    }

    #[test]
    fn quantize_examples() {
        let y = quantize(&[Complex64::new(0.5, 0.5)], &ThresholdSet::sign());
        assert_eq!((y.re_bins[0], y.im_bins[0]), (2, 2));
        assert_eq!(table_q2().bin_index(0.5), 3);
        assert_eq!(table_q3().bin_index(-2.0), 1);
        // right-closed bins
        assert_eq!(table_q2().bin_index(-0.008), 2);
        assert_eq!(table_q2().bin_index(f64::INFINITY), 4);
    }

    #[test]
    fn codewords() {
        let t = table_q2();
        let words: Vec<_> = (1..=4).map(|i| t.codeword(i)).collect();
        assert_eq!(words, ["00", "01", "10", "11"]);
    }

    #[test]
    fn line_format_round_trip() {
        let t = table_q3();
        let line = t.to_string();
        assert_eq!(line, "3; -1.63,-1.012,-0.46,0.067,0.542,1.067,1.803");
        assert_eq!(line.parse::<ThresholdSet>().unwrap(), t);
        let odd = ThresholdSet::new(1, vec![0.1 + 0.2]).unwrap();
        assert_eq!(odd.to_string().parse::<ThresholdSet>().unwrap(), odd);
        assert!("2; 1,2".parse::<ThresholdSet>().is_err());
        assert!("x; 1".parse::<ThresholdSet>().is_err());
    }

    #[test]
    fn sign_quantizer_probabilities() {
        let t = ThresholdSet::sign();
        assert_eq!(bin_probability(0.0, 1, &t, 2.0), 0.5);
        let (f1, f2) = bin_derivatives(0.0, 1, &t, 2.0);
        assert!((f1 + INV_SQRT_2PI).abs() < 1e-15);
        assert_eq!(f2, 0.0);
        let (f1, f2) = bin_derivatives(0.0, 2, &t, 2.0);
        assert!((f1 - INV_SQRT_2PI).abs() < 1e-15);
        assert_eq!(f2, 0.0);
    }

    #[test]
    fn table_two_bit_middle_bin() {
        // Φ(−0.008) − Φ(−0.978) at 40 digits
        let p = bin_probability(0.0, 2, &table_q2(), 2.0);
        assert!((p - 0.33277133375746892421).abs() < 1e-15, "{p}");
    }

    #[test]
    fn stats_table_sign() {
        let st = bin_stats_table(&ThresholdSet::sign(), 2.0).unwrap();
        let b = st.bins();
        assert_eq!((b[0].f, b[1].f), (0.5, 0.5));
        assert!((b[0].f1 + INV_SQRT_2PI).abs() < 1e-15);
        assert!((b[1].f1 - INV_SQRT_2PI).abs() < 1e-15);
        assert_eq!((b[0].f2, b[1].f2), (0.0, 0.0));
        assert!((st.information_per_sample() - 2.0 / std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn stats_tables_partition_and_positive_information() {
        for t in [ThresholdSet::new(1, vec![-0.003]).unwrap(), table_q2(), table_q3()] {
            let st = bin_stats_table(&t, 2.0).unwrap();
            let b = st.bins();
            assert!((compensated_sum(b.iter().map(|s| s.f)) - 1.0).abs() < 1e-15);
            assert!(compensated_sum(b.iter().map(|s| s.f1)).abs() < 1e-14);
            assert!(compensated_sum(b.iter().map(|s| s.f2)).abs() < 1e-14);
            for s in b {
                assert!(s.f > 0.0 && s.f < 1.0);
                assert!(s.information() > 0.0);
            }
        }
    }

    #[test]
    fn degenerate_bins_are_reported() {
        let t = ThresholdSet::new(2, vec![-1.0, 60.0, 61.0]).unwrap();
        match bin_stats_table(&t, 2.0) {
            Err(Error::DegenerateBin { bin, .. }) => assert_eq!(bin, 3),
            other => panic!("expected degenerate bin, got {other:?}"),
        }
        // a high floor flags moderately small bins too
        let err = BinStatsTable::with_floor(&table_q3(), 2.0, 0.1).unwrap_err();
        assert!(matches!(err, Error::DegenerateBin { bin: 1, .. }));
        assert!(bin_stats_table(&table_q2(), 0.0).is_err());
    }

    #[test]
    fn derivatives_match_central_differences() {
        let eps = 1e-5;
        for t in [table_q2(), table_q3()] {
            for i in 1..=t.num_bins() as u32 {
                for &u in &[-0.7, 0.0, 0.31] {
                    let (f1, f2) = bin_derivatives(u, i, &t, 2.0);
                    let fd1 = (bin_probability(u + eps, i, &t, 2.0)
                        - bin_probability(u - eps, i, &t, 2.0))
                        / (2.0 * eps);
                    assert!((fd1 - f1).abs() < 1e-9, "bin {i} u {u}: {fd1} vs {f1}");
                    let fd2 = (bin_derivatives(u + eps, i, &t, 2.0).0
                        - bin_derivatives(u - eps, i, &t, 2.0).0)
                        / (2.0 * eps);
                    assert!((fd2 - f2).abs() < 1e-9, "bin {i} u {u}: {fd2} vs {f2}");
                }
            }
        }
    }

    #[test]
    fn probabilities_match_monte_carlo_frequencies() {
        let t = table_q3();
        let (u, noise_power) = (0.4, 2.0);
        let normal = Normal::new(u, (noise_power / 2.0f64).sqrt()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let mut counts = vec![0usize; t.num_bins()];
        for _ in 0..draws {
            counts[t.bin_index(normal.sample(&mut rng)) as usize - 1] += 1;
        }
        for (k, &c) in counts.iter().enumerate() {
            let p = bin_probability(u, k as u32 + 1, &t, noise_power);
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            let freq = c as f64 / draws as f64;
            assert!((freq - p).abs() < 3.0 * se, "bin {}: {freq} vs {p}", k + 1);
        }
    }

    proptest! {
        #[test]
        fn probabilities_telescope(u in -4.0f64..4.0, spread in 0.2f64..3.0, bits in 1u32..5) {
            let t = ThresholdSet::uniform(bits, spread).unwrap();
            let total = compensated_sum(
                (1..=t.num_bins() as u32).map(|i| bin_probability(u, i, &t, 1.3)),
            );
            prop_assert!((total - 1.0).abs() < 1e-14);
        }

        #[test]
        fn quantize_is_monotone(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let t = table_q3();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(t.bin_index(lo) <= t.bin_index(hi));
        }

        #[test]
        fn representatives_are_fixed_points(bits in 1u32..6, spread in 0.1f64..4.0) {
            let t = ThresholdSet::uniform(bits, spread).unwrap();
            for i in 1..=t.num_bins() as u32 {
                prop_assert_eq!(t.bin_index(t.representative(i)), i);
            }
        }
    }
}
