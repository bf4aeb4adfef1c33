//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # Comments and blank lines are ignored.
//! command = roc
//! seed = 42                    # required
//! n_tx = 1
//! n_rx = 16
//! snapshots = 8
//! wavelength = 1.0
//! spacing = 0.5
//! angle_rad = 0.0
//! noise_power = 2.0
//! snr_db = -14.0
//! beta_phase = 0.0
//! q = 1,2,3,inf
//! thresholds.2 = 2; -0.978,-0.008,0.967
//! swarm_size = 50
//! max_iters = 500
//! inertia = 0.72
//! cognitive = 1.49
//! social = 1.49
//! stall_tol = 1e-9
//! search_radius = 2.5          # optional
//! trials_h0 = 100000
//! trials_h1 = 100000
//! pfa = 0.01,0.1               # optional, command-specific default
//! eta = 0,5,10                 # optional
//! snr_grid_db = -20,-18,-16    # pd-snr only
//! out = roc.csv                # optional, stdout otherwise
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use mbrao::optimizer::PsoConfig;
use mbrao::quantizer::ThresholdSet;
use mbrao::scene::SceneConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Thresholds,
    Roc,
    PdEta,
    PdSnr,
    Theory,
    Selftest,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Thresholds => "thresholds",
            Command::Roc => "roc",
            Command::PdEta => "pd-eta",
            Command::PdSnr => "pd-snr",
            Command::Theory => "theory",
            Command::Selftest => "selftest",
        }
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "thresholds" => Command::Thresholds,
            "roc" => Command::Roc,
            "pd-eta" => Command::PdEta,
            "pd-snr" => Command::PdSnr,
            "theory" => Command::Theory,
            "selftest" => Command::Selftest,
            other => return Err(CliError::Validation(format!("unknown command {other:?}"))),
        })
    }
}

/// A detector bit depth; `Infinite` is the unquantized GLRT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BitDepth {
    Bits(u32),
    Infinite,
}

impl fmt::Display for BitDepth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BitDepth::Bits(q) => write!(f, "{q}"),
            BitDepth::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for BitDepth {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(BitDepth::Infinite);
        }
        match s.parse::<u32>() {
            Ok(q) if (1..=8).contains(&q) => Ok(BitDepth::Bits(q)),
            _ => Err(CliError::Validation(format!(
                "bit depth must be 1..=8 or inf, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub n_tx: usize,
    pub n_rx: usize,
    pub snapshots: usize,
    pub wavelength: f64,
    pub spacing: f64,
    pub angle_rad: f64,
    pub noise_power: f64,
    pub snr_db: f64,
    pub beta_phase: f64,
    pub q: Vec<BitDepth>,
    pub thresholds: BTreeMap<u32, ThresholdSet>,
    /// PSO settings; the seed is taken from [`ExperimentSpec::seed`].
    pub pso: PsoConfig,
    pub trials_h0: usize,
    pub trials_h1: usize,
    pub pfa: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
    pub snr_grid_db: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let scene = SceneConfig::reference();
        Self {
            command: None,
            seed: None,
            n_tx: scene.n_tx,
            n_rx: scene.n_rx,
            snapshots: scene.snapshots,
            wavelength: scene.wavelength,
            spacing: scene.spacing,
            angle_rad: scene.angle,
            noise_power: scene.noise_power,
            snr_db: -14.0,
            beta_phase: 0.0,
            q: vec![
                BitDepth::Bits(1),
                BitDepth::Bits(2),
                BitDepth::Bits(3),
                BitDepth::Infinite,
            ],
            thresholds: BTreeMap::new(),
            pso: PsoConfig::default(),
            trials_h0: 100_000,
            trials_h1: 100_000,
            pfa: None,
            eta: None,
            snr_grid_db: None,
            out: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("bad value for {key}: {value:?}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> CliResult<Vec<T>> {
    value
        .split(',')
        .map(|v| parse_num(key, v))
        .collect()
}

fn join<T: fmt::Debug>(values: &[T]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn parse_bit_depths(value: &str) -> CliResult<Vec<BitDepth>> {
    value.split(',').map(str::parse).collect()
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut spec = ExperimentSpec::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Validation(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(CliError::Validation(format!("duplicate key {key:?}")));
            }
            spec.set(key, value)?;
        }
        Ok(spec)
    }

    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        match key {
            "command" => self.command = Some(value.parse()?),
            "seed" => self.seed = Some(parse_num(key, value)?),
            "n_tx" => self.n_tx = parse_num(key, value)?,
            "n_rx" => self.n_rx = parse_num(key, value)?,
            "snapshots" => self.snapshots = parse_num(key, value)?,
            "wavelength" => self.wavelength = parse_num(key, value)?,
            "spacing" => self.spacing = parse_num(key, value)?,
            "angle_rad" => self.angle_rad = parse_num(key, value)?,
            "noise_power" => self.noise_power = parse_num(key, value)?,
            "snr_db" => self.snr_db = parse_num(key, value)?,
            "beta_phase" => self.beta_phase = parse_num(key, value)?,
            "q" => self.q = parse_bit_depths(value)?,
            "swarm_size" => self.pso.swarm_size = parse_num(key, value)?,
            "max_iters" => self.pso.max_iters = parse_num(key, value)?,
            "inertia" => self.pso.inertia = parse_num(key, value)?,
            "cognitive" => self.pso.cognitive = parse_num(key, value)?,
            "social" => self.pso.social = parse_num(key, value)?,
            "stall_tol" => self.pso.stall_tol = parse_num(key, value)?,
            "search_radius" => self.pso.search_radius = Some(parse_num(key, value)?),
            "trials_h0" => self.trials_h0 = parse_num(key, value)?,
            "trials_h1" => self.trials_h1 = parse_num(key, value)?,
            "pfa" => self.pfa = Some(parse_list(key, value)?),
            "eta" => self.eta = Some(parse_list(key, value)?),
            "snr_grid_db" => self.snr_grid_db = Some(parse_list(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            _ => match key.strip_prefix("thresholds.") {
                Some(bits) => {
                    let bits: u32 = parse_num(key, bits)?;
                    let set: ThresholdSet = value.parse()?;
                    if set.bits() != bits {
                        return Err(CliError::Validation(format!(
                            "{key} holds a {}-bit threshold set",
                            set.bits()
                        )));
                    }
                    self.thresholds.insert(bits, set);
                }
                None => return Err(CliError::Validation(format!("unknown key {key:?}"))),
            },
        }
        Ok(())
    }

    /// Scene with β set from `snr_db` and `beta_phase`.
    pub fn scene(&self) -> SceneConfig {
        let mut scene = SceneConfig {
            n_tx: self.n_tx,
            n_rx: self.n_rx,
            snapshots: self.snapshots,
            wavelength: self.wavelength,
            spacing: self.spacing,
            angle: self.angle_rad,
            noise_power: self.noise_power,
            beta: (self.beta_phase.cos(), self.beta_phase.sin()),
        };
        scene.set_snr_db(self.snr_db);
        scene
    }

    pub fn require_seed(&self) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::Validation("the `seed` key is required".into()))
    }

    pub fn pso_config(&self) -> CliResult<PsoConfig> {
        Ok(PsoConfig {
            seed: self.require_seed()?,
            ..self.pso
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        self.require_seed()?;
        self.scene().validate()?;
        self.pso_config()?.validate()?;
        if !self.snr_db.is_finite() || !self.beta_phase.is_finite() {
            return Err(CliError::Validation("snr_db and beta_phase must be finite".into()));
        }
        if self.q.is_empty() {
            return Err(CliError::Validation("q must list at least one bit depth".into()));
        }
        if self.trials_h0 == 0 || self.trials_h1 == 0 {
            return Err(CliError::Validation("trial counts must be at least 1".into()));
        }
        for &bits in self.thresholds.keys() {
            if !self.q.contains(&BitDepth::Bits(bits)) {
                return Err(CliError::Validation(format!(
                    "thresholds given for q = {bits}, which is not among the requested bit depths"
                )));
            }
        }
        if let Some(pfa) = &self.pfa {
            if pfa.is_empty() || pfa.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
                return Err(CliError::Validation("pfa values must lie in (0,1)".into()));
            }
        }
        for (name, list) in [("eta", &self.eta), ("snr_grid_db", &self.snr_grid_db)] {
            if let Some(values) = list {
                if values.is_empty() || values.iter().any(|v| v.is_nan()) {
                    return Err(CliError::Validation(format!("{name} must be a non-empty list")));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for ExperimentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(c) = self.command {
            writeln!(f, "command = {}", c.as_str())?;
        }
        if let Some(s) = self.seed {
            writeln!(f, "seed = {s}")?;
        }
        writeln!(f, "n_tx = {}", self.n_tx)?;
        writeln!(f, "n_rx = {}", self.n_rx)?;
        writeln!(f, "snapshots = {}", self.snapshots)?;
        writeln!(f, "wavelength = {:?}", self.wavelength)?;
        writeln!(f, "spacing = {:?}", self.spacing)?;
        writeln!(f, "angle_rad = {:?}", self.angle_rad)?;
        writeln!(f, "noise_power = {:?}", self.noise_power)?;
        writeln!(f, "snr_db = {:?}", self.snr_db)?;
        writeln!(f, "beta_phase = {:?}", self.beta_phase)?;
        let q: Vec<String> = self.q.iter().map(ToString::to_string).collect();
        writeln!(f, "q = {}", q.join(","))?;
        for (bits, set) in &self.thresholds {
            writeln!(f, "thresholds.{bits} = {set}")?;
        }
        writeln!(f, "swarm_size = {}", self.pso.swarm_size)?;
        writeln!(f, "max_iters = {}", self.pso.max_iters)?;
        writeln!(f, "inertia = {:?}", self.pso.inertia)?;
        writeln!(f, "cognitive = {:?}", self.pso.cognitive)?;
        writeln!(f, "social = {:?}", self.pso.social)?;
        writeln!(f, "stall_tol = {:?}", self.pso.stall_tol)?;
        if let Some(r) = self.pso.search_radius {
            writeln!(f, "search_radius = {r:?}")?;
        }
        writeln!(f, "trials_h0 = {}", self.trials_h0)?;
        writeln!(f, "trials_h1 = {}", self.trials_h1)?;
        if let Some(v) = &self.pfa {
            writeln!(f, "pfa = {}", join(v))?;
        }
        if let Some(v) = &self.eta {
            writeln!(f, "eta = {}", join(v))?;
        }
        if let Some(v) = &self.snr_grid_db {
            writeln!(f, "snr_grid_db = {}", join(v))?;
        }
        if let Some(p) = &self.out {
            writeln!(f, "out = {}", p.display())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let mut spec = ExperimentSpec {
            command: Some(Command::PdSnr),
            seed: Some(99),
            snr_db: -13.7,
            beta_phase: 0.3,
            q: vec![BitDepth::Bits(2), BitDepth::Infinite],
            pfa: Some(vec![1e-4]),
            snr_grid_db: Some(vec![-20.0, -17.5, 0.1]),
            out: Some("sweep.csv".into()),
            ..ExperimentSpec::default()
        };
        spec.pso.search_radius = Some(2.25);
        spec.thresholds
            .insert(2, ThresholdSet::new(2, vec![-0.978, -0.008, 0.967]).unwrap());
        let text = spec.to_string();
        let back = ExperimentSpec::parse(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.to_string(), text);
    }

    #[test]
    fn comments_and_defaults() {
        let spec = ExperimentSpec::parse("# scene\nseed = 1  # fixed\n\nq = 1, inf\n").unwrap();
        assert_eq!(spec.seed, Some(1));
        assert_eq!(spec.q, [BitDepth::Bits(1), BitDepth::Infinite]);
        assert_eq!(spec.n_rx, 16);
        spec.validate().unwrap();
    }

    #[test]
    fn missing_seed_is_rejected() {
        let spec = ExperimentSpec::parse("q = 2").unwrap();
        assert!(matches!(spec.validate(), Err(CliError::Validation(_))));
    }

    #[test]
    fn malformed_input_is_rejected() {
        for text in [
            "seed = x",
            "colour = red",
            "seed = 1\nseed = 2",
            "q = 9",
            "thresholds.3 = 2; -1,0,1",
            "just words",
        ] {
            assert!(ExperimentSpec::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn thresholds_must_match_requested_bits() {
        let spec = ExperimentSpec::parse("seed = 1\nq = 1\nthresholds.2 = 2; -1,0,1").unwrap();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn scene_carries_snr() {
        let spec = ExperimentSpec {
            seed: Some(0),
            snr_db: -14.0,
            ..ExperimentSpec::default()
        };
        let scene = spec.scene();
        assert!((scene.snr_db() + 14.0).abs() < 1e-12);
        assert_eq!(scene.n_rx * scene.snapshots, 128);
    }
}
