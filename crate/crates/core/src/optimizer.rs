//! Particle swarm design of the quantizer thresholds.
//!
//! The objective is the Fisher diagonal zᴴz · Σ_i ((F'_i)² − F''_i F_i)/F_i,
//! i.e. λ_F/‖β‖². It does not depend on β, so neither does the optimum.
//!
//! Particles live in the box [−R, R]^(2^q−1). After every move a particle is
//! clamped to the box, sorted ascending and nudged apart by 1e-9 wherever
//! two coordinates collide, which keeps every evaluated position strictly
//! increasing.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::quantizer::{BinStatsTable, ThresholdSet, MAX_BITS};
use crate::scene::EffectiveSignal;
use crate::{Error, Result};

/// Minimum gap enforced between neighbouring thresholds by the repair step.
pub const MIN_GAP: f64 = 1e-9;

/// Window (in iterations) over which the stall criterion is measured.
pub const STALL_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_iters: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
    /// Relative improvement of the best objective over [`STALL_WINDOW`]
    /// iterations below which the swarm counts as converged.
    pub stall_tol: f64,
    /// Half-width of the search box; `None` means 5·σ/√2.
    pub search_radius: Option<f64>,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 50,
            max_iters: 500,
            inertia: 0.72,
            cognitive: 1.49,
            social: 1.49,
            seed: 0,
            stall_tol: 1e-9,
            search_radius: None,
        }
    }
}

impl PsoConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn radius(&self, noise_power: f64) -> f64 {
        self.search_radius
            .unwrap_or_else(|| 5.0 * (noise_power / 2.0).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.swarm_size < 2 {
            return bad("swarm needs at least two particles");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if ![self.inertia, self.cognitive, self.social, self.stall_tol]
            .iter()
            .all(|v| v.is_finite())
        {
            return bad("PSO coefficients must be finite");
        }
        if let Some(r) = self.search_radius {
            if !(r > 0.0 && r.is_finite()) {
                return bad("search radius must be positive");
            }
        }
        Ok(())
    }
}

/// Fisher diagonal for a threshold set; −∞ when a bin is degenerate.
pub fn objective(thresholds: &ThresholdSet, z: &EffectiveSignal, noise_power: f64) -> f64 {
    match BinStatsTable::new(thresholds, noise_power) {
        Ok(table) => z.energy() * table.information_per_sample(),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Symmetric uniform grid the swarm always starts from: 2^q equal cells
/// over [−R/2, R/2].
pub fn canonical_initialization(bits: u32, radius: f64) -> Result<ThresholdSet> {
    ThresholdSet::uniform(bits, 0.5 * radius)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub thresholds: ThresholdSet,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
    /// Best objective after each iteration (index 0 is the initial swarm).
    pub history: Vec<f64>,
}

fn repair(position: &mut [f64], radius: f64) {
    for v in position.iter_mut() {
        *v = v.clamp(-radius, radius);
    }
    position.sort_by(f64::total_cmp);
    for k in 1..position.len() {
        if position[k] <= position[k - 1] {
            position[k] = position[k - 1] + MIN_GAP;
        }
    }
}

fn score(bits: u32, position: &[f64], energy: f64, noise_power: f64) -> f64 {
    match ThresholdSet::new(bits, position.to_vec()) {
        Ok(t) => match BinStatsTable::new(&t, noise_power) {
            Ok(table) => energy * table.information_per_sample(),
            Err(_) => f64::NEG_INFINITY,
        },
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Maximizes [`objective`] over strictly increasing interior thresholds.
pub fn optimize_thresholds(
    bits: u32,
    z: &EffectiveSignal,
    noise_power: f64,
    cfg: &PsoConfig,
) -> Result<OptimizeResult> {
    cfg.validate()?;
    if bits == 0 || bits > MAX_BITS {
        return Err(Error::InvalidConfig(format!("bit depth {bits} outside 1..={MAX_BITS}")));
    }
    if !(noise_power > 0.0 && noise_power.is_finite()) {
        return Err(Error::InvalidConfig("noise power must be positive".into()));
    }
    let energy = z.energy();
    if !(energy > 0.0) {
        return Err(Error::ZeroSignal);
    }
    let dim = (1usize << bits) - 1;
    let radius = cfg.radius(noise_power);
    let vmax = 0.2 * radius;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // half symmetric grids of growing spread (the first is canonical), half random
    let n_grid = cfg.swarm_size.div_ceil(2);
    let mut positions: Vec<Vec<f64>> = Vec::with_capacity(cfg.swarm_size);
    positions.push(canonical_initialization(bits, radius)?.interior().to_vec());
    for k in 1..n_grid {
        let spread = radius * k as f64 / n_grid as f64;
        positions.push(ThresholdSet::uniform(bits, spread)?.interior().to_vec());
    }
    while positions.len() < cfg.swarm_size {
        let mut p: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..=radius)).collect();
        repair(&mut p, radius);
        positions.push(p);
    }
    let mut velocities: Vec<Vec<f64>> = (0..cfg.swarm_size)
        .map(|_| (0..dim).map(|_| rng.random_range(-vmax..=vmax) * 0.5).collect())
        .collect();

    let evaluate = |pos: &[Vec<f64>]| -> Vec<f64> {
        pos.par_iter()
            .map(|p| score(bits, p, energy, noise_power))
            .collect()
    };

    let mut fitness = evaluate(&positions);
    let mut personal_best = positions.clone();
    let mut personal_fit = fitness.clone();
    let (mut best_idx, mut best_fit) = (0, f64::NEG_INFINITY);
    for (k, &f) in fitness.iter().enumerate() {
        if f > best_fit {
            best_fit = f;
            best_idx = k;
        }
    }
    let mut global_best = positions[best_idx].clone();
    let mut history = vec![best_fit];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        for (k, (pos, vel)) in positions.iter_mut().zip(velocities.iter_mut()).enumerate() {
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = cfg.inertia * vel[d]
                    + cfg.cognitive * r1 * (personal_best[k][d] - pos[d])
                    + cfg.social * r2 * (global_best[d] - pos[d]);
                vel[d] = v.clamp(-vmax, vmax);
                pos[d] += vel[d];
            }
            repair(pos, radius);
        }
        fitness = evaluate(&positions);
        for k in 0..cfg.swarm_size {
            if fitness[k] > personal_fit[k] {
                personal_fit[k] = fitness[k];
                personal_best[k].clone_from(&positions[k]);
            }
            if fitness[k] > best_fit {
                best_fit = fitness[k];
                global_best.clone_from(&positions[k]);
            }
        }
        history.push(best_fit);
        if iterations >= STALL_WINDOW {
            let before = history[iterations - STALL_WINDOW];
            if before.is_finite() && best_fit - before <= cfg.stall_tol * before.abs() {
                converged = true;
                break;
            }
        }
    }

    if !best_fit.is_finite() {
        return Err(Error::DegenerateBin {
            bin: 0,
            probability: 0.0,
            floor: crate::quantizer::DEFAULT_BIN_FLOOR,
        });
    }
    Ok(OptimizeResult {
        thresholds: ThresholdSet::new(bits, global_best)?,
        objective: best_fit,
        iterations,
        converged,
        seed: cfg.seed,
        history,
    })
}

/// Optimizer result file: the threshold line followed by `key = value`
/// metadata lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdFile {
    pub thresholds: ThresholdSet,
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub achieved_objective: Option<f64>,
    pub converged: Option<bool>,
    pub snr_db: Option<f64>,
}

impl ThresholdFile {
    pub fn from_result(result: &OptimizeResult, snr_db: Option<f64>) -> Self {
        Self {
            thresholds: result.thresholds.clone(),
            seed: Some(result.seed),
            iterations: Some(result.iterations),
            achieved_objective: Some(result.objective),
            converged: Some(result.converged),
            snr_db,
        }
    }

    /// Parses either a bare threshold line or a full result file.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let first = lines
            .next()
            .ok_or_else(|| Error::Parse("threshold file is empty".into()))?;
        let mut file = ThresholdFile {
            thresholds: first.parse()?,
            seed: None,
            iterations: None,
            achieved_objective: None,
            converged: None,
            snr_db: None,
        };
        for line in lines {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key = value, got {line:?}")))?;
            let value = value.trim();
            let bad = || Error::Parse(format!("bad value for {}: {value:?}", key.trim()));
            match key.trim() {
                "seed" => file.seed = Some(value.parse().map_err(|_| bad())?),
                "iterations" => file.iterations = Some(value.parse().map_err(|_| bad())?),
                "achieved_objective" => {
                    file.achieved_objective = Some(value.parse().map_err(|_| bad())?)
                }
                "converged" => file.converged = Some(value.parse().map_err(|_| bad())?),
                "snr_db" => file.snr_db = Some(value.parse().map_err(|_| bad())?),
                other => return Err(Error::Parse(format!("unknown key {other:?}"))),
            }
        }
        Ok(file)
    }
}

impl fmt::Display for ThresholdFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.thresholds)?;
        if let Some(v) = self.seed {
            writeln!(f, "seed = {v}")?;
        }
        if let Some(v) = self.iterations {
            writeln!(f, "iterations = {v}")?;
        }
        if let Some(v) = self.achieved_objective {
            writeln!(f, "achieved_objective = {v:?}")?;
        }
        if let Some(v) = self.converged {
            writeln!(f, "converged = {v}")?;
        }
        if let Some(v) = self.snr_db {
            writeln!(f, "snr_db = {v:?}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{effective_signal, SceneConfig};
    use crate::theory::noncentrality_unquantized;
    use std::f64::consts::PI;

    fn reference_z() -> EffectiveSignal {
        effective_signal(&SceneConfig::reference()).unwrap()
    }

    fn quick(seed: u64) -> PsoConfig {
        PsoConfig {
            swarm_size: 30,
            max_iters: 300,
            ..PsoConfig::with_seed(seed)
        }
    }

    #[test]
    fn objective_examples() {
        let unit = EffectiveSignal { g: vec![1.0], h: vec![0.0] };
        assert!((objective(&ThresholdSet::sign(), &unit, 2.0) - 2.0 / PI).abs() < 1e-15);
        let z = reference_z();
        for tau in [0.2, 0.7, 1.5] {
            let a = objective(&ThresholdSet::new(1, vec![tau]).unwrap(), &z, 2.0);
            let b = objective(&ThresholdSet::new(1, vec![-tau]).unwrap(), &z, 2.0);
            assert!((a - b).abs() < 1e-12 * a);
            assert!(a < objective(&ThresholdSet::sign(), &z, 2.0));
        }
        let table = ThresholdSet::new(2, vec![-0.978, -0.008, 0.967]).unwrap();
        let shifted = ThresholdSet::new(2, vec![-0.478, 0.492, 1.467]).unwrap();
        assert!(objective(&table, &z, 2.0) > objective(&shifted, &z, 2.0));
        let degenerate = ThresholdSet::new(1, vec![80.0]).unwrap();
        assert_eq!(objective(&degenerate, &z, 2.0), f64::NEG_INFINITY);
    }

    #[test]
    fn repair_keeps_strict_order() {
        let mut p = vec![0.3, 0.3, -9.0, 0.3, 7.0];
        repair(&mut p, 5.0);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(p[0], -5.0);
        assert!(p[4] >= 5.0);
    }

    #[test]
    fn deterministic_and_monotone_history() {
        let z = reference_z();
        let a = optimize_thresholds(2, &z, 2.0, &quick(9)).unwrap();
        let b = optimize_thresholds(2, &z, 2.0, &quick(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.history.windows(2).all(|w| w[1] >= w[0]));
        let canonical = canonical_initialization(2, PsoConfig::default().radius(2.0)).unwrap();
        assert!(a.objective >= objective(&canonical, &z, 2.0));
        assert!(a.thresholds.interior().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn one_and_two_bit_optima() {
        let z = reference_z();
        let one = optimize_thresholds(1, &z, 2.0, &quick(1)).unwrap();
        assert!(one.thresholds.interior()[0].abs() <= 0.05);
        let two = optimize_thresholds(2, &z, 2.0, &quick(2)).unwrap();
        for (got, want) in two.thresholds.interior().iter().zip([-0.978, -0.008, 0.967]) {
            assert!((got - want).abs() <= 0.05, "{got} vs {want}");
        }
        let t = two.thresholds.interior();
        assert!((t[0] + t[2]).abs() < 0.02, "not antisymmetric: {t:?}");
    }

    #[test]
    fn objective_increases_with_bits_below_unquantized() {
        let z = reference_z();
        let bound = noncentrality_unquantized((1.0, 0.0), &z, 2.0);
        let objs: Vec<f64> = (1..=4)
            .map(|q| optimize_thresholds(q, &z, 2.0, &quick(q as u64)).unwrap().objective)
            .collect();
        assert!(objs.windows(2).all(|w| w[0] < w[1]), "{objs:?}");
        assert!(objs[3] < bound);
    }

    #[test]
    fn rejects_bad_configs() {
        let z = reference_z();
        let cfg = PsoConfig { swarm_size: 1, ..PsoConfig::default() };
        assert!(optimize_thresholds(1, &z, 2.0, &cfg).is_err());
        assert!(optimize_thresholds(0, &z, 2.0, &PsoConfig::default()).is_err());
        let zero = EffectiveSignal { g: vec![0.0], h: vec![0.0] };
        assert_eq!(
            optimize_thresholds(1, &zero, 2.0, &PsoConfig::default()),
            Err(Error::ZeroSignal)
        );
    }

    #[test]
    fn result_file_round_trip() {
        let z = reference_z();
        let res = optimize_thresholds(1, &z, 2.0, &quick(4)).unwrap();
        let file = ThresholdFile::from_result(&res, Some(-14.0));
        let text = file.to_string();
        assert!(text.starts_with("1; "));
        let back = ThresholdFile::parse(&text).unwrap();
        assert_eq!(back, file);
        let bare = ThresholdFile::parse("# comment\n2; -1,0,1\n").unwrap();
        assert_eq!(bare.thresholds.bits(), 2);
        assert!(bare.seed.is_none());
        assert!(ThresholdFile::parse("2; -1,0,1\nbogus = 3").is_err());
        assert!(ThresholdFile::parse("").is_err());
    }
}
