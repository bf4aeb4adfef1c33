use std::fmt::Write as _;

use mbrao::montecarlo::{
    estimate_roc, pd_vs_snr, run_trials_multi, write_roc_rows, write_sweep_csv, DetectorKind,
    RocGrid, ROC_CSV_HEADER,
};
use mbrao::optimizer::{optimize_thresholds, ThresholdFile};
use mbrao::quantizer::ThresholdSet;
use mbrao::scene::effective_signal;
use mbrao::theory::theory_curve;

use crate::error::{CliError, CliResult};
use crate::spec::{BitDepth, Command, ExperimentSpec};

/// Result of one command: the artifact to write plus human-readable notes.
#[derive(Debug, Default)]
pub struct Outcome {
    pub artifact: String,
    pub summary: Vec<String>,
    pub warnings: Vec<String>,
    /// Error to report after the artifact has been written.
    pub deferred: Option<CliError>,
}

pub const DEFAULT_PFA_GRID: [f64; 9] = [1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5];

pub fn default_eta_grid() -> Vec<f64> {
    (0..=40).map(|k| 0.5 * k as f64).collect()
}

pub fn dispatch(command: Command, spec: &ExperimentSpec) -> CliResult<Outcome> {
    if command == Command::Selftest {
        return crate::selftest::cmd_selftest();
    }
    spec.validate()?;
    match command {
        Command::Thresholds => cmd_thresholds(spec),
        Command::Roc => cmd_roc(spec),
        Command::PdEta => cmd_pd_eta(spec),
        Command::PdSnr => cmd_pd_snr(spec),
        Command::Theory => cmd_theory(spec),
        Command::Selftest => unreachable!(),
    }
}

fn describe_bins(t: &ThresholdSet) -> Vec<String> {
    (1..=t.num_bins() as u32)
        .map(|i| {
            format!(
                "  bin {i} [{}]: ({}, {}]  representative {:.4}",
                t.codeword(i),
                t.tau(i as usize - 1),
                t.tau(i as usize),
                t.representative(i)
            )
        })
        .collect()
}

pub fn cmd_thresholds(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let finite: Vec<u32> = spec
        .q
        .iter()
        .filter_map(|d| match d {
            BitDepth::Bits(q) => Some(*q),
            BitDepth::Infinite => None,
        })
        .collect();
    let [bits] = finite[..] else {
        return Err(CliError::Validation(
            "thresholds needs exactly one finite bit depth (use --q N)".into(),
        ));
    };
    let scene = spec.scene();
    let z = effective_signal(&scene)?;
    let result = optimize_thresholds(bits, &z, scene.noise_power, &spec.pso_config()?)?;
    let file = ThresholdFile::from_result(&result, Some(spec.snr_db));
    let mut summary = vec![
        format!("q = {bits}"),
        format!("interior thresholds = {:?}", result.thresholds.interior()),
        format!("achieved objective = {:?}", result.objective),
        format!("iterations = {} (converged: {})", result.iterations, result.converged),
    ];
    summary.extend(describe_bins(&result.thresholds));
    let deferred = (!result.converged).then_some(CliError::NotConverged {
        iterations: result.iterations,
    });
    Ok(Outcome {
        artifact: file.to_string(),
        summary,
        warnings: Vec::new(),
        deferred,
    })
}

/// Detector list for `spec.q`, optimizing any finite bit depth without
/// explicit thresholds.
pub fn resolve_detectors(spec: &ExperimentSpec, summary: &mut Vec<String>) -> CliResult<Vec<DetectorKind>> {
    let scene = spec.scene();
    let z = effective_signal(&scene)?;
    let pso = spec.pso_config()?;
    spec.q
        .iter()
        .map(|depth| match *depth {
            BitDepth::Infinite => Ok(DetectorKind::GlrtInf),
            BitDepth::Bits(q) => {
                let t = match spec.thresholds.get(&q) {
                    Some(t) => t.clone(),
                    None => {
                        let r = optimize_thresholds(q, &z, scene.noise_power, &pso)?;
                        summary.push(format!(
                            "optimized q = {q}: {:?} (objective {:?})",
                            r.thresholds.interior(),
                            r.objective
                        ));
                        r.thresholds
                    }
                };
                Ok(DetectorKind::RaoQbit(t))
            }
        })
        .collect()
}

fn roc_like(spec: &ExperimentSpec, grid: RocGrid) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    let detectors = resolve_detectors(spec, &mut out.summary)?;
    let scene = spec.scene();
    let z = effective_signal(&scene)?;
    let samples = run_trials_multi(
        &scene,
        &detectors,
        spec.trials_h0,
        spec.trials_h1,
        spec.require_seed()?,
    )?;
    let mut csv = Vec::new();
    csv.extend_from_slice(ROC_CSV_HEADER.as_bytes());
    csv.push(b'\n');
    for (det, s) in detectors.iter().zip(&samples) {
        let lambda = det.noncentrality(&scene, &z)?;
        let roc = estimate_roc(&s.h0, &s.h1, &grid)?.with_theory(lambda);
        write_roc_rows(&mut csv, det, &roc).expect("writing to memory");
        out.summary.push(format!(
            "{} q={}: lambda = {lambda:?}",
            det.name(),
            det.bits_label()
        ));
    }
    out.artifact = String::from_utf8(csv).expect("CSV is ASCII");
    Ok(out)
}

pub fn cmd_roc(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let pfa = spec.pfa.clone().unwrap_or_else(|| DEFAULT_PFA_GRID.to_vec());
    roc_like(spec, RocGrid::FalseAlarm(pfa))
}

pub fn cmd_pd_eta(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let eta = spec.eta.clone().unwrap_or_else(default_eta_grid);
    roc_like(spec, RocGrid::Eta(eta))
}

pub fn cmd_pd_snr(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let p_fa = match spec.pfa.as_deref() {
        Some([p]) => *p,
        _ => {
            return Err(CliError::Validation(
                "pd-snr needs exactly one target false-alarm rate (--pfa X)".into(),
            ))
        }
    };
    let grid = spec.snr_grid_db.as_ref().ok_or_else(|| {
        CliError::Validation("pd-snr needs an SNR grid (snr_grid_db or --snr-grid)".into())
    })?;
    if spec.trials_h0 != spec.trials_h1 {
        return Err(CliError::Validation(
            "pd-snr uses one trial count for both hypotheses".into(),
        ));
    }
    let mut out = Outcome::default();
    let detectors = resolve_detectors(spec, &mut out.summary)?;
    let table = pd_vs_snr(
        &spec.scene(),
        grid,
        p_fa,
        &detectors,
        spec.trials_h0,
        spec.require_seed()?,
    )?;
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &table).expect("writing to memory");
    out.artifact = String::from_utf8(csv).expect("CSV is ASCII");
    out.warnings = table.warnings;
    Ok(out)
}

pub const THEORY_CLI_HEADER: &str = "detector,q,p_fa,eta,lambda_f,p_d_theory";

pub fn cmd_theory(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let pfa = spec.pfa.clone().unwrap_or_else(|| DEFAULT_PFA_GRID.to_vec());
    let mut out = Outcome::default();
    let detectors = resolve_detectors(spec, &mut out.summary)?;
    let scene = spec.scene();
    let z = effective_signal(&scene)?;
    let mut csv = String::new();
    writeln!(csv, "{THEORY_CLI_HEADER}").unwrap();
    for det in &detectors {
        let lambda = det.noncentrality(&scene, &z)?;
        for p in theory_curve(lambda, &pfa)? {
            writeln!(
                csv,
                "{},{},{:?},{:?},{:?},{:?}",
                det.name(),
                det.bits_label(),
                p.p_fa,
                p.eta,
                p.lambda_f,
                p.p_d
            )
            .unwrap();
        }
    }
    out.artifact = csv;
    Ok(out)
}
