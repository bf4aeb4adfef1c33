//! Array geometry, LFM waveform, effective signal and noisy observations.
//!
//! Matrices are vectorized receiver-major, snapshot-minor: element
//! `(i_r, l)` of `Z = A(φ)S` lands at index `n = i_r * L + l`. Every
//! downstream sum is order-invariant, so the choice only matters for
//! reproducibility.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::special::compensated_sum;
use crate::{Error, Result};

/// Scene parameters: array sizes, geometry, noise and target amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub snapshots: usize,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// Element spacing in meters.
    pub spacing: f64,
    /// Target angle in radians.
    pub angle: f64,
    /// Total complex noise variance σ²; each quadrature gets σ²/2.
    pub noise_power: f64,
    /// Reflection coefficient (β_R, β_I).
    pub beta: (f64, f64),
}

impl SceneConfig {
    /// Scene used for the threshold table and the ROC figures: 16 receivers,
    /// 8 snapshots, σ² = 2, SNR = −14 dB, broadside target, half-wavelength
    /// spacing. A single transmitter gives |z_n| = 1 and zᴴz = 128.
    pub fn reference() -> Self {
        let mut cfg = SceneConfig {
            n_tx: 1,
            n_rx: 16,
            snapshots: 8,
            wavelength: 1.0,
            spacing: 0.5,
            angle: 0.0,
            noise_power: 2.0,
            beta: (0.0, 0.0),
        };
        cfg.set_snr_db(-14.0);
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_tx == 0 || self.n_rx == 0 || self.snapshots == 0 {
            return bad("antenna counts and snapshots must be at least 1");
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return bad("wavelength must be positive");
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return bad("spacing must be positive");
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return bad("noise power must be positive");
        }
        if !self.angle.is_finite() || !self.beta.0.is_finite() || !self.beta.1.is_finite() {
            return bad("angle and beta must be finite");
        }
        Ok(())
    }

    /// Number of vectorized elements N_r·L.
    pub fn len(&self) -> usize {
        self.n_rx * self.snapshots
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn beta_norm_sq(&self) -> f64 {
        self.beta.0 * self.beta.0 + self.beta.1 * self.beta.1
    }

    /// 10·log10(‖β‖²/σ²); −∞ when β = 0.
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.beta_norm_sq() / self.noise_power).log10()
    }

    /// Rescales β to the requested SNR, keeping its phase (real axis if β = 0).
    pub fn set_snr_db(&mut self, snr_db: f64) {
        let magnitude = (self.noise_power * 10f64.powf(snr_db / 10.0)).sqrt();
        let norm = self.beta_norm_sq().sqrt();
        self.beta = if norm > 0.0 {
            (self.beta.0 / norm * magnitude, self.beta.1 / norm * magnitude)
        } else {
            (magnitude, 0.0)
        };
    }

    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.set_snr_db(snr_db);
        self
    }

    pub fn beta_complex(&self) -> Complex64 {
        Complex64::new(self.beta.0, self.beta.1)
    }
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Matrix product; panics on inner-dimension mismatch.
    pub fn matmul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        ComplexMatrix::from_fn(self.rows, rhs.cols, |r, c| {
            (0..self.cols).map(|k| self.get(r, k) * rhs.get(k, c)).sum()
        })
    }

    /// Row-major flattening, i.e. `n = r * cols + c`.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }
}

/// Transmit-receive channel matrix A(φ) = a_r a_tᵀ (N_r × N_t).
pub fn steering_matrix(cfg: &SceneConfig) -> Result<ComplexMatrix> {
    cfg.validate()?;
    let phase_step = -2.0 * PI * cfg.spacing * cfg.angle.sin() / cfg.wavelength;
    Ok(ComplexMatrix::from_fn(cfg.n_rx, cfg.n_tx, |ir, it| {
        if ir + it == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, phase_step * (ir + it) as f64)
        }
    }))
}

/// Orthogonal LFM waveform S (N_t × L), each element of modulus 1/N_t.
pub fn lfm_waveform(n_tx: usize, snapshots: usize) -> Result<ComplexMatrix> {
    if n_tx == 0 || snapshots == 0 {
        return Err(Error::InvalidConfig(
            "waveform needs at least one transmitter and one snapshot".into(),
        ));
    }
    let len = snapshots as f64;
    let scale = 1.0 / n_tx as f64;
    Ok(ComplexMatrix::from_fn(n_tx, snapshots, |row, col| {
        // one-based p and l
        let p = (row + 1) as f64;
        let l0 = col as f64;
        let phase = 2.0 * PI * p * l0 / len + PI * l0 * l0 / len;
        Complex64::from_polar(scale, phase)
    }))
}

/// Noise-free signal z = vec(A(φ)S) split into real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveSignal {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl EffectiveSignal {
    pub fn from_complex(z: &[Complex64]) -> Self {
        Self {
            g: z.iter().map(|v| v.re).collect(),
            h: z.iter().map(|v| v.im).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    #[inline]
    pub fn z(&self, n: usize) -> Complex64 {
        Complex64::new(self.g[n], self.h[n])
    }

    /// zᴴz = Σ (g_n² + h_n²).
    pub fn energy(&self) -> f64 {
        compensated_sum(self.g.iter().zip(&self.h).map(|(g, h)| g * g + h * h))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let z: Vec<Complex64> = (0..self.len()).map(|n| self.z(n) * factor).collect();
        Self::from_complex(&z)
    }
}

/// z for the scene's LFM waveform.
pub fn effective_signal(cfg: &SceneConfig) -> Result<EffectiveSignal> {
    let waveform = lfm_waveform(cfg.n_tx, cfg.snapshots)?;
    effective_signal_with_waveform(cfg, &waveform)
}

/// z = vec(A(φ)S) for an arbitrary N_t × L waveform.
pub fn effective_signal_with_waveform(
    cfg: &SceneConfig,
    waveform: &ComplexMatrix,
) -> Result<EffectiveSignal> {
    let steering = steering_matrix(cfg)?;
    if waveform.rows() != cfg.n_tx || waveform.cols() != cfg.snapshots {
        return Err(Error::InvalidConfig(format!(
            "waveform is {}x{}, scene expects {}x{}",
            waveform.rows(),
            waveform.cols(),
            cfg.n_tx,
            cfg.snapshots
        )));
    }
    let z = steering.matmul(waveform);
    Ok(EffectiveSignal::from_complex(z.as_slice()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    H0,
    H1,
}

/// Whether noise is injected. `NoiseFree` keeps σ² only for detector math.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Gaussian,
    NoiseFree,
}

/// Per-trial generator. Each (trial, hypothesis) pair owns ChaCha stream
/// `2 * trial + (0 for H0, 1 for H1)` under the master seed, so results do
/// not depend on how trials are scheduled across threads.
pub fn trial_rng(master_seed: u64, trial: u64, hypothesis: Hypothesis) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    let offset = match hypothesis {
        Hypothesis::H0 => 0,
        Hypothesis::H1 => 1,
    };
    rng.set_stream(trial.wrapping_mul(2).wrapping_add(offset));
    rng
}

/// Writes x_n = β·z_n·[H1] + w_n into `out`, drawing noise from `rng`.
pub fn synthesize_into<R: rand::Rng + ?Sized>(
    cfg: &SceneConfig,
    z: &EffectiveSignal,
    hypothesis: Hypothesis,
    mode: NoiseMode,
    rng: &mut R,
    out: &mut Vec<Complex64>,
) -> Result<()> {
    if !(cfg.noise_power > 0.0 && cfg.noise_power.is_finite()) {
        return Err(Error::InvalidConfig("noise power must be positive".into()));
    }
    if z.len() != cfg.len() {
        return Err(Error::LengthMismatch {
            expected: cfg.len(),
            actual: z.len(),
        });
    }
    let beta = match hypothesis {
        Hypothesis::H0 => Complex64::new(0.0, 0.0),
        Hypothesis::H1 => cfg.beta_complex(),
    };
    let sd = (cfg.noise_power / 2.0).sqrt();
    out.clear();
    out.reserve(z.len());
    for n in 0..z.len() {
        let signal = beta * z.z(n);
        let x = match mode {
            NoiseMode::Gaussian => {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                signal + Complex64::new(sd * re, sd * im)
            }
            NoiseMode::NoiseFree => signal,
        };
        out.push(x);
    }
    Ok(())
}

/// Seeded observation for a single trial (trial index 0 of `seed`).
pub fn synthesize_observation(
    cfg: &SceneConfig,
    z: &EffectiveSignal,
    hypothesis: Hypothesis,
    mode: NoiseMode,
    seed: u64,
) -> Result<Vec<Complex64>> {
    let mut rng = trial_rng(seed, 0, hypothesis);
    let mut out = Vec::new();
    synthesize_into(cfg, z, hypothesis, mode, &mut rng, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scene(n_tx: usize, n_rx: usize, snapshots: usize, angle: f64) -> SceneConfig {
        SceneConfig {
            n_tx,
            n_rx,
            snapshots,
            wavelength: 1.0,
            spacing: 0.5,
            angle,
            noise_power: 2.0,
            beta: (0.1, -0.05),
        }
    }

    #[test]
    fn broadside_steering_is_all_ones() {
        let a = steering_matrix(&scene(3, 5, 4, 0.0)).unwrap();
        for r in 0..5 {
            for c in 0..3 {
                assert_eq!(a.get(r, c), Complex64::new(1.0, 0.0));
            }
        }
        let single = steering_matrix(&scene(1, 1, 1, 0.7)).unwrap();
        assert_eq!(single.get(0, 0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn endfire_half_wavelength_entry() {
        let a = steering_matrix(&scene(2, 2, 1, PI / 2.0)).unwrap();
        let v = a.get(1, 0);
        assert!((v - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn lfm_values() {
        let s = lfm_waveform(2, 8).unwrap();
        for p in 0..2 {
            assert_eq!(s.get(p, 0), Complex64::new(0.5, 0.0));
        }
        // exp{j2π/8 + jπ/8}/2, evaluated at 40 digits
        let v = s.get(0, 1);
        assert!((v.re - 0.19134171618254488586).abs() < 1e-15);
        assert!((v.im - 0.46193976625564337806).abs() < 1e-15);
        let s = lfm_waveform(3, 11).unwrap();
        for p in 0..3 {
            for l in 0..11 {
                assert!((s.get(p, l).norm() - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        assert!(lfm_waveform(0, 4).is_err());
    }

    #[test]
    fn trivial_effective_signal() {
        let z = effective_signal(&scene(1, 1, 1, 0.0)).unwrap();
        assert_eq!(z.g, vec![1.0]);
        assert_eq!(z.h, vec![0.0]);
    }

    #[test]
    fn broadside_signal_is_replicated_row_sums() {
        let cfg = scene(3, 4, 6, 0.0);
        let s = lfm_waveform(3, 6).unwrap();
        let z = effective_signal(&cfg).unwrap();
        for ir in 0..4 {
            for l in 0..6 {
                let col_sum: Complex64 = (0..3).map(|p| s.get(p, l)).sum();
                assert!((z.z(ir * 6 + l) - col_sum).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn reference_scene_matches_independent_product() {
        let cfg = SceneConfig {
            angle: 0.3,
            n_tx: 4,
            ..SceneConfig::reference()
        };
        let z = effective_signal(&cfg).unwrap();
        assert_eq!(z.len(), 128);
        assert_eq!(z.h.len(), 128);
        // explicit triple loop with the textbook formulas
        let step = -2.0 * PI * cfg.spacing * cfg.angle.sin() / cfg.wavelength;
        for ir in 0..16 {
            for l in 0..8 {
                let mut acc = Complex64::new(0.0, 0.0);
                for it in 0..4 {
                    let a = Complex64::new(0.0, step * (ir + it) as f64).exp();
                    let p = (it + 1) as f64;
                    let lm1 = l as f64;
                    let s = Complex64::new(0.0, 2.0 * PI * p * lm1 / 8.0 + PI * lm1 * lm1 / 8.0)
                        .exp()
                        / 4.0;
                    acc += a * s;
                }
                assert!((z.z(ir * 8 + l) - acc).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn reference_scene_energy_and_snr() {
        let cfg = SceneConfig::reference();
        let z = effective_signal(&cfg).unwrap();
        assert!((z.energy() - 128.0).abs() < 1e-10);
        assert!((cfg.snr_db() + 14.0).abs() < 1e-12);
    }

    #[test]
    fn snr_round_trip_keeps_phase() {
        let mut cfg = scene(1, 2, 2, 0.0);
        let phase = cfg.beta.1.atan2(cfg.beta.0);
        cfg.set_snr_db(-7.5);
        assert!((cfg.snr_db() + 7.5).abs() < 1e-12);
        assert!((cfg.beta.1.atan2(cfg.beta.0) - phase).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_scenes() {
        assert!(scene(0, 1, 1, 0.0).validate().is_err());
        let mut cfg = scene(1, 1, 1, 0.0);
        cfg.noise_power = 0.0;
        assert!(cfg.validate().is_err());
        let z = EffectiveSignal::from_complex(&[Complex64::new(1.0, 0.0)]);
        assert!(synthesize_observation(&cfg, &z, Hypothesis::H1, NoiseMode::Gaussian, 1).is_err());
        cfg.noise_power = -1.0;
        assert!(steering_matrix(&cfg).is_err());
    }

    #[test]
    fn noise_free_h1_is_exact() {
        let cfg = scene(2, 3, 4, 0.2);
        let z = effective_signal(&cfg).unwrap();
        let x = synthesize_observation(&cfg, &z, Hypothesis::H1, NoiseMode::NoiseFree, 9).unwrap();
        for (n, xn) in x.iter().enumerate() {
            assert_eq!(*xn, cfg.beta_complex() * z.z(n));
        }
        let x0 = synthesize_observation(&cfg, &z, Hypothesis::H0, NoiseMode::NoiseFree, 9).unwrap();
        assert!(x0.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn same_seed_same_observation() {
        let cfg = SceneConfig::reference();
        let z = effective_signal(&cfg).unwrap();
        let a = synthesize_observation(&cfg, &z, Hypothesis::H1, NoiseMode::Gaussian, 77).unwrap();
        let b = synthesize_observation(&cfg, &z, Hypothesis::H1, NoiseMode::Gaussian, 77).unwrap();
        assert_eq!(a, b);
        let c = synthesize_observation(&cfg, &z, Hypothesis::H1, NoiseMode::Gaussian, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_moments() {
        // one element, 10^5 independent trial streams
        let cfg = SceneConfig {
            noise_power: 3.0,
            ..scene(1, 1, 1, 0.0)
        };
        let z = effective_signal(&cfg).unwrap();
        let trials = 100_000u64;
        let mut buf = Vec::new();
        let mut re = Vec::with_capacity(trials as usize);
        let mut im = Vec::with_capacity(trials as usize);
        for t in 0..trials {
            let mut rng = trial_rng(5, t, Hypothesis::H0);
            synthesize_into(&cfg, &z, Hypothesis::H0, NoiseMode::Gaussian, &mut rng, &mut buf)
                .unwrap();
            re.push(buf[0].re);
            im.push(buf[0].im);
        }
        let n = trials as f64;
        let var_re = re.iter().map(|v| v * v).sum::<f64>() / n;
        let half = cfg.noise_power / 2.0;
        // Var(w²) = 2·(σ²/2)² for a Gaussian
        let se_var = (2.0 * half * half / n).sqrt();
        assert!((var_re - half).abs() < 3.0 * se_var, "var {var_re}");
        let cov = re.iter().zip(&im).map(|(a, b)| a * b).sum::<f64>() / n;
        let se_cov = (half * half / n).sqrt();
        assert!(cov.abs() < 3.0 * se_cov, "cov {cov}");
    }

    proptest! {
        #[test]
        fn steering_is_rank_one_with_unit_modulus(
            n_tx in 1usize..5, n_rx in 1usize..6, angle in -1.5f64..1.5, spacing in 0.1f64..2.0
        ) {
            let cfg = SceneConfig { spacing, ..scene(n_tx, n_rx, 1, angle) };
            let a = steering_matrix(&cfg).unwrap();
            for r in 0..n_rx {
                for c in 0..n_tx {
                    prop_assert!((a.get(r, c).norm() - 1.0).abs() < 1e-12);
                }
            }
            for r0 in 0..n_rx {
                for r1 in r0 + 1..n_rx {
                    for c0 in 0..n_tx {
                        for c1 in c0 + 1..n_tx {
                            let minor = a.get(r0, c0) * a.get(r1, c1) - a.get(r0, c1) * a.get(r1, c0);
                            prop_assert!(minor.norm() < 1e-12);
                        }
                    }
                }
            }
        }

        #[test]
        fn effective_signal_is_linear_in_waveform(
            re in -3.0f64..3.0, im in -3.0f64..3.0, angle in -1.0f64..1.0
        ) {
            let cfg = scene(3, 4, 5, angle);
            let s = lfm_waveform(3, 5).unwrap();
            let c = Complex64::new(re, im);
            let base = effective_signal_with_waveform(&cfg, &s).unwrap();
            let scaled = effective_signal_with_waveform(&cfg, &s.scale(c)).unwrap();
            for n in 0..base.len() {
                prop_assert!((scaled.z(n) - base.z(n) * c).norm() < 1e-12);
            }
        }
    }
}
