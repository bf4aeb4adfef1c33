//! Invariant checks bundled with the binary.
//!
//! Each check prints one `check=<name> status=<pass|fail> value=<v> limit=<l>`
//! line; the last line is `selftest passed=<n> failed=<m>`.

use std::f64::consts::FRAC_2_PI;

use mbrao::crosscheck::{numerical_fisher, rao_by_score, DEFAULT_STEP};
use mbrao::detectors::RaoDetector;
use mbrao::montecarlo::{run_trials, DetectorKind, TrialConfig};
use mbrao::quantizer::{quantize, BinStatsTable, ThresholdSet};
use mbrao::scene::{
    effective_signal, synthesize_observation, Hypothesis, NoiseMode, SceneConfig,
};
use mbrao::theory::{fisher_information, noncentrality, noncentrality_unquantized};

use crate::commands::Outcome;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, limit: f64) -> Self {
        Check {
            name,
            value,
            limit,
            passed: value <= limit,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "check={} status={} value={:e} limit={:e}",
            self.name,
            if self.passed { "pass" } else { "fail" },
            self.value,
            self.limit
        )
    }
}

const SELFTEST_SEED: u64 = 0x5e1f_7e57;
const NULL_TRIALS: usize = 20_000;

fn table_two_bit() -> ThresholdSet {
    ThresholdSet::new(2, vec![-0.978, -0.008, 0.967]).expect("valid thresholds")
}

/// Sample mean and variance of Λ_R under H0 against 2 and 4.
fn chi2_moments() -> CliResult<[Check; 2]> {
    let cfg = TrialConfig {
        n_trials_h0: NULL_TRIALS,
        n_trials_h1: 1,
        seed: SELFTEST_SEED,
        detector: DetectorKind::RaoQbit(table_two_bit()),
        scene: SceneConfig::reference(),
    };
    let h0 = run_trials(&cfg)?.h0;
    let n = h0.len() as f64;
    let mean = h0.iter().sum::<f64>() / n;
    let var = h0.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // Five standard errors of the χ²₂ sample mean and variance.
    Ok([
        Check::at_most("chi2_mean", (mean - 2.0).abs(), 5.0 * 2.0 / n.sqrt()),
        Check::at_most("chi2_variance", (var - 4.0).abs(), 5.0 * (128.0 / n).sqrt()),
    ])
}

fn small_scenes() -> Vec<SceneConfig> {
    [(1, 3, 2, 0.0), (2, 2, 2, 0.4), (1, 5, 1, -0.9), (3, 4, 2, 1.2)]
        .into_iter()
        .map(|(n_tx, n_rx, snapshots, angle)| {
            SceneConfig {
                n_tx,
                n_rx,
                snapshots,
                angle,
                ..SceneConfig::reference()
            }
            .with_snr_db(3.0)
        })
        .collect()
}

fn two_over_pi() -> CliResult<Check> {
    let mut worst = 0.0f64;
    for scene in small_scenes() {
        let z = effective_signal(&scene)?;
        let ratio = noncentrality(scene.beta, &z, &ThresholdSet::sign(), scene.noise_power)?
            / noncentrality_unquantized(scene.beta, &z, scene.noise_power);
        worst = worst.max((ratio - FRAC_2_PI).abs());
    }
    Ok(Check::at_most("two_over_pi_ratio", worst, 1e-12))
}

/// Numerical Fisher matrix: off-diagonal relative to the diagonal, and the
/// diagonal relative to the closed form.
fn fisher_structure() -> CliResult<[Check; 2]> {
    let mut off = 0.0f64;
    let mut diag = 0.0f64;
    for (k, scene) in small_scenes().into_iter().enumerate() {
        let z = effective_signal(&scene)?;
        let t = ThresholdSet::uniform(1 + (k % 3) as u32, 1.1 + 0.3 * k as f64)?;
        let num = numerical_fisher(&z, &t, scene.noise_power, DEFAULT_STEP);
        let exact = fisher_information(&z, &t, scene.noise_power)?.diagonal();
        off = off.max(num[0][1].abs().max(num[1][0].abs()) / exact);
        diag = diag.max(((num[0][0] - exact) / exact).abs());
        diag = diag.max(((num[1][1] - exact) / exact).abs());
    }
    Ok([
        Check::at_most("fisher_off_diagonal", off, 1e-6),
        Check::at_most("fisher_diagonal", diag, 1e-6),
    ])
}

/// Largest relative gap between the closed-form statistic (optionally with a
/// perturbed bin table) and the score/Fisher construction.
pub fn oracle_discrepancy(perturb: Option<f64>) -> CliResult<f64> {
    let mut worst = 0.0f64;
    for (k, scene) in small_scenes().into_iter().enumerate() {
        let z = effective_signal(&scene)?;
        for bits in 1..=3u32 {
            let shift = 0.1 * (k as f64 - 1.5);
            let base = ThresholdSet::uniform(bits, 1.4)?;
            let t = ThresholdSet::new(bits, base.interior().iter().map(|v| v + shift).collect())?;
            let mut table = BinStatsTable::new(&t, scene.noise_power)?;
            if let Some(factor) = perturb {
                let mut bins = table.bins().to_vec();
                bins[1].f1 *= factor;
                table = BinStatsTable::from_bins(t.clone(), scene.noise_power, bins);
            }
            let det = RaoDetector::with_table(z.clone(), table)?;
            for trial in 0..4u64 {
                let seed = SELFTEST_SEED ^ ((k as u64) << 16 | (bits as u64) << 8 | trial);
                let x = synthesize_observation(&scene, &z, Hypothesis::H1, NoiseMode::Gaussian, seed)?;
                let y = quantize(&x, &t);
                let closed = det.statistic(&y)?;
                let oracle = rao_by_score(&y, &z, &t, scene.noise_power)?;
                worst = worst.max((closed - oracle).abs() / oracle.abs().max(1e-300));
            }
        }
    }
    Ok(worst)
}

pub fn run_checks() -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    checks.extend(chi2_moments()?);
    checks.push(two_over_pi()?);
    checks.extend(fisher_structure()?);
    checks.push(Check::at_most("oracle_rao", oracle_discrepancy(None)?, 1e-6));
    let mutated = oracle_discrepancy(Some(1.01))?;
    checks.push(Check {
        name: "mutation_detected",
        value: mutated,
        limit: 1e-6,
        passed: mutated > 1e-6,
    });
    Ok(checks)
}

pub fn cmd_selftest() -> CliResult<Outcome> {
    let checks = run_checks()?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    let mut artifact: String = checks.iter().map(|c| c.line() + "\n").collect();
    artifact.push_str(&format!(
        "selftest passed={} failed={failed}\n",
        checks.len() - failed
    ));
    Ok(Outcome {
        artifact,
        deferred: (failed > 0).then_some(CliError::SelftestFailed {
            failed,
            total: checks.len(),
        }),
        ..Outcome::default()
    })
}
