//! Seeded Monte Carlo trials, empirical ROC curves and P_D-vs-SNR sweeps.
//!
//! Trial `t` under hypothesis `H` always draws its noise from
//! [`trial_rng`]`(seed, t, H)`, and results are gathered by trial index, so a
//! run gives bit-identical statistics whatever the thread count. Detectors
//! evaluated together see the same noise realisations, and sweeps reuse the
//! same noise across SNR points.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::detectors::{glrt_unquantized, RaoDetector};
use crate::quantizer::{quantize_into, QuantizedObservation, ThresholdSet};
use crate::scene::{
    effective_signal, synthesize_into, trial_rng, EffectiveSignal, Hypothesis, NoiseMode,
    SceneConfig,
};
use crate::theory::{chi2_quantile, chi2_sf, ncx2_sf, noncentrality, noncentrality_unquantized};
use crate::{Error, Result};

/// Which statistic a trial computes.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectorKind {
    /// Multi-bit Rao test with the given quantizer.
    RaoQbit(ThresholdSet),
    /// GLRT on unquantized data.
    GlrtInf,
}

impl DetectorKind {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::RaoQbit(_) => "rao",
            DetectorKind::GlrtInf => "glrt",
        }
    }

    /// Bit depth as printed in CSV files ("inf" for unquantized).
    pub fn bits_label(&self) -> String {
        match self {
            DetectorKind::RaoQbit(t) => t.bits().to_string(),
            DetectorKind::GlrtInf => "inf".to_string(),
        }
    }

    /// Non-centrality of the asymptotic H1 distribution for `scene`.
    pub fn noncentrality(&self, scene: &SceneConfig, z: &EffectiveSignal) -> Result<f64> {
        match self {
            DetectorKind::RaoQbit(t) => noncentrality(scene.beta, z, t, scene.noise_power),
            DetectorKind::GlrtInf => Ok(noncentrality_unquantized(scene.beta, z, scene.noise_power)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub n_trials_h0: usize,
    pub n_trials_h1: usize,
    pub seed: u64,
    pub detector: DetectorKind,
    pub scene: SceneConfig,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials_h0 == 0 || self.n_trials_h1 == 0 {
            return Err(Error::InvalidConfig("trial counts must be at least 1".into()));
        }
        self.scene.validate()
    }
}

/// Statistics under each hypothesis, in trial order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialSamples {
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
}

enum Prepared {
    Rao(RaoDetector, ThresholdSet),
    Glrt(EffectiveSignal, f64),
}

impl Prepared {
    fn new(kind: &DetectorKind, z: &EffectiveSignal, noise_power: f64) -> Result<Self> {
        Ok(match kind {
            DetectorKind::RaoQbit(t) => {
                Prepared::Rao(RaoDetector::new(z.clone(), t, noise_power)?, t.clone())
            }
            DetectorKind::GlrtInf => {
                if !(z.energy() > 0.0) {
                    return Err(Error::ZeroSignal);
                }
                Prepared::Glrt(z.clone(), noise_power)
            }
        })
    }

    fn statistic(&self, x: &[Complex64], scratch: &mut QuantizedObservation) -> Result<f64> {
        match self {
            Prepared::Rao(det, t) => {
                quantize_into(x, t, scratch);
                det.statistic(scratch)
            }
            Prepared::Glrt(z, noise_power) => glrt_unquantized(x, z, *noise_power),
        }
    }
}

#[derive(Default)]
struct Scratch {
    x: Vec<Complex64>,
    y: QuantizedObservation,
}

fn empty_observation() -> QuantizedObservation {
    QuantizedObservation {
        re_bins: Vec::new(),
        im_bins: Vec::new(),
    }
}

impl Default for QuantizedObservation {
    fn default() -> Self {
        empty_observation()
    }
}

/// Statistics of every detector for `n` trials of one hypothesis, indexed
/// `[detector][trial]`.
fn simulate(
    scene: &SceneConfig,
    z: &EffectiveSignal,
    detectors: &[Prepared],
    hypothesis: Hypothesis,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map_init(Scratch::default, |s, t| {
            let mut rng = trial_rng(seed, t, hypothesis);
            synthesize_into(scene, z, hypothesis, NoiseMode::Gaussian, &mut rng, &mut s.x)?;
            detectors
                .iter()
                .map(|d| d.statistic(&s.x, &mut s.y))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::with_capacity(n); detectors.len()];
    for row in rows {
        for (col, v) in out.iter_mut().zip(row) {
            col.push(v);
        }
    }
    Ok(out)
}

fn prepare(scene: &SceneConfig, detectors: &[DetectorKind]) -> Result<(EffectiveSignal, Vec<Prepared>)> {
    scene.validate()?;
    let z = effective_signal(scene)?;
    let prepared = detectors
        .iter()
        .map(|d| Prepared::new(d, &z, scene.noise_power))
        .collect::<Result<Vec<_>>>()?;
    Ok((z, prepared))
}

/// Runs several detectors on the same simulated observations.
pub fn run_trials_multi(
    scene: &SceneConfig,
    detectors: &[DetectorKind],
    n_trials_h0: usize,
    n_trials_h1: usize,
    seed: u64,
) -> Result<Vec<TrialSamples>> {
    if n_trials_h0 == 0 || n_trials_h1 == 0 {
        return Err(Error::InvalidConfig("trial counts must be at least 1".into()));
    }
    let (z, prepared) = prepare(scene, detectors)?;
    let h0 = simulate(scene, &z, &prepared, Hypothesis::H0, n_trials_h0, seed)?;
    let h1 = simulate(scene, &z, &prepared, Hypothesis::H1, n_trials_h1, seed)?;
    Ok(h0
        .into_iter()
        .zip(h1)
        .map(|(h0, h1)| TrialSamples { h0, h1 })
        .collect())
}

pub fn run_trials(cfg: &TrialConfig) -> Result<TrialSamples> {
    cfg.validate()?;
    let mut all = run_trials_multi(
        &cfg.scene,
        std::slice::from_ref(&cfg.detector),
        cfg.n_trials_h0,
        cfg.n_trials_h1,
        cfg.seed,
    )?;
    Ok(all.remove(0))
}

/// [`run_trials`] on a dedicated pool with `workers` threads.
pub fn run_trials_with_workers(cfg: &TrialConfig, workers: usize) -> Result<TrialSamples> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_trials(cfg))
}

/// Score vectors (∂ℓ/∂β_R, ∂ℓ/∂β_I) at β = 0 for `n` trials of `hypothesis`.
pub fn score_samples(
    scene: &SceneConfig,
    thresholds: &ThresholdSet,
    hypothesis: Hypothesis,
    n: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    scene.validate()?;
    let z = effective_signal(scene)?;
    let det = RaoDetector::new(z.clone(), thresholds, scene.noise_power)?;
    (0..n as u64)
        .into_par_iter()
        .map_init(Scratch::default, |s, t| {
            let mut rng = trial_rng(seed, t, hypothesis);
            synthesize_into(scene, &z, hypothesis, NoiseMode::Gaussian, &mut rng, &mut s.x)?;
            quantize_into(&s.x, thresholds, &mut s.y);
            det.score(&s.y)
        })
        .collect()
}

/// Fraction of `sorted` strictly above `eta`.
fn exceedance(sorted: &[f64], eta: f64) -> (f64, usize) {
    let above = sorted.len() - sorted.partition_point(|&v| v <= eta);
    (above as f64 / sorted.len() as f64, above)
}

/// Smallest sample value η with at most ⌊n·p⌋ samples strictly above it.
pub fn empirical_threshold(sorted: &[f64], p_fa: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptySample("H0 statistics"));
    }
    if !(p_fa > 0.0 && p_fa < 1.0) {
        return Err(Error::Domain(format!("false-alarm probability {p_fa} not in (0,1)")));
    }
    let n = sorted.len();
    let allowed = (n as f64 * p_fa).floor() as usize;
    let idx = n.saturating_sub(allowed + 1);
    Ok(sorted[idx])
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Threshold grid for [`estimate_roc`].
#[derive(Debug, Clone, PartialEq)]
pub enum RocGrid {
    /// Explicit global thresholds η.
    Eta(Vec<f64>),
    /// Target false-alarm rates; η is the empirical H0 quantile.
    FalseAlarm(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub eta: f64,
    pub p_fa_hat: f64,
    pub p_d_hat: f64,
    /// H0 trials behind `p_fa_hat`.
    pub n0: usize,
    /// H1 trials behind `p_d_hat`.
    pub n1: usize,
}

/// Empirical ROC points (sorted by increasing η) plus the asymptotic
/// (P_FA, P_D) at the same thresholds once [`RocCurve::with_theory`] is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub theory: Vec<(f64, f64)>,
}

impl RocCurve {
    /// Fills `theory` with (P(χ²₂ > η), P(χ′²₂(λ) > η)) for each point.
    pub fn with_theory(mut self, lambda: f64) -> Self {
        self.theory = self
            .points
            .iter()
            .map(|p| (chi2_sf(p.eta), ncx2_sf(p.eta, lambda)))
            .collect();
        self
    }
}

pub fn estimate_roc(h0: &[f64], h1: &[f64], grid: &RocGrid) -> Result<RocCurve> {
    if h0.is_empty() {
        return Err(Error::EmptySample("H0 statistics"));
    }
    if h1.is_empty() {
        return Err(Error::EmptySample("H1 statistics"));
    }
    let s0 = sorted_copy(h0);
    let s1 = sorted_copy(h1);
    let mut etas = match grid {
        RocGrid::Eta(etas) => etas.clone(),
        RocGrid::FalseAlarm(pfas) => pfas
            .iter()
            .map(|&p| empirical_threshold(&s0, p))
            .collect::<Result<Vec<_>>>()?,
    };
    etas.sort_by(f64::total_cmp);
    let points = etas
        .into_iter()
        .map(|eta| RocPoint {
            eta,
            p_fa_hat: exceedance(&s0, eta).0,
            p_d_hat: exceedance(&s1, eta).0,
            n0: s0.len(),
            n1: s1.len(),
        })
        .collect();
    Ok(RocCurve {
        points,
        theory: Vec::new(),
    })
}

pub const ROC_CSV_HEADER: &str =
    "detector,q,eta,p_fa_hat,p_d_hat,p_fa_theory,p_d_theory,n0,n1";

/// Appends the rows of one detector's ROC curve (no header).
pub fn write_roc_rows<W: Write>(mut out: W, detector: &DetectorKind, roc: &RocCurve) -> io::Result<()> {
    for (k, p) in roc.points.iter().enumerate() {
        let (pfa_t, pd_t) = roc.theory.get(k).copied().unwrap_or((f64::NAN, f64::NAN));
        writeln!(
            out,
            "{},{},{:?},{:?},{:?},{:?},{:?},{},{}",
            detector.name(),
            detector.bits_label(),
            p.eta,
            p.p_fa_hat,
            p.p_d_hat,
            pfa_t,
            pd_t,
            p.n0,
            p.n1
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub detector: DetectorKind,
    pub snr_db: f64,
    pub p_fa_target: f64,
    pub eta_asymptotic: f64,
    pub eta_empirical: f64,
    pub p_d_at_asymptotic_eta: f64,
    pub p_d_at_empirical_eta: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Non-fatal issues, e.g. too few trials for the requested P_FA.
    pub warnings: Vec<String>,
}

/// Smallest trial count times P_FA below which sweeps emit a warning.
pub const MIN_EXPECTED_FALSE_ALARMS: f64 = 100.0;

/// Empirical P_D versus SNR for each detector at a fixed P_FA.
///
/// The H0 sample (independent of β) is simulated once per detector; every SNR
/// point reuses the same H1 noise.
pub fn pd_vs_snr(
    scene: &SceneConfig,
    snr_grid_db: &[f64],
    p_fa: f64,
    detectors: &[DetectorKind],
    trials: usize,
    seed: u64,
) -> Result<SweepTable> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trial count must be at least 1".into()));
    }
    if snr_grid_db.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidConfig("SNR grid must be finite".into()));
    }
    let eta_asymptotic = chi2_quantile(p_fa)?;
    let mut table = SweepTable::default();
    if p_fa * (trials as f64) < MIN_EXPECTED_FALSE_ALARMS {
        table.warnings.push(format!(
            "only {:.1} expected false alarms (p_fa {p_fa:e} x {trials} trials); empirical thresholds are unreliable",
            p_fa * trials as f64
        ));
    }
    let (z, prepared) = prepare(scene, detectors)?;
    let h0 = simulate(scene, &z, &prepared, Hypothesis::H0, trials, seed)?;
    let eta_empirical = h0
        .iter()
        .map(|s| empirical_threshold(&sorted_copy(s), p_fa))
        .collect::<Result<Vec<_>>>()?;
    for &snr in snr_grid_db {
        let at_snr = scene.with_snr_db(snr);
        let h1 = simulate(&at_snr, &z, &prepared, Hypothesis::H1, trials, seed)?;
        for (k, det) in detectors.iter().enumerate() {
            let sorted = sorted_copy(&h1[k]);
            table.rows.push(SweepRow {
                detector: det.clone(),
                snr_db: snr,
                p_fa_target: p_fa,
                eta_asymptotic,
                eta_empirical: eta_empirical[k],
                p_d_at_asymptotic_eta: exceedance(&sorted, eta_asymptotic).0,
                p_d_at_empirical_eta: exceedance(&sorted, eta_empirical[k]).0,
                trials,
            });
        }
    }
    Ok(table)
}

pub const SWEEP_CSV_HEADER: &str = "detector,q,snr_db,p_fa_target,eta_asymptotic,p_d_at_asymptotic_eta,p_d_at_empirical_eta,trials";

pub fn write_sweep_csv<W: Write>(mut out: W, table: &SweepTable) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{:?},{:?},{:?},{:?},{:?},{}",
            r.detector.name(),
            r.detector.bits_label(),
            r.snr_db,
            r.p_fa_target,
            r.eta_asymptotic,
            r.p_d_at_asymptotic_eta,
            r.p_d_at_empirical_eta,
            r.trials
        )?;
    }
    Ok(())
}

/// SNR (dB) where P_D first reaches `target`, by linear interpolation along
/// an increasing SNR grid. `None` if the curve never crosses the target.
pub fn snr_at_pd(snr_db: &[f64], p_d: &[f64], target: f64) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = snr_db.iter().copied().zip(p_d.iter().copied()).collect();
    for w in pairs.windows(2) {
        let ((s0, p0), (s1, p1)) = (w[0], w[1]);
        if p0 <= target && p1 >= target {
            if p1 == p0 {
                return Some(s0);
            }
            return Some(s0 + (target - p0) / (p1 - p0) * (s1 - s0));
        }
    }
    None
}
