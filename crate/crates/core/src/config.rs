//! Experiment configuration: `key = value` lines with `#` comments.
//!
//! Every key is optional. The same text is echoed as the `#` header of each
//! CSV file written by the runner, so an output file re-parses to the config
//! that produced it.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::automata::{LearningParams, SimConfig};
use crate::dynamics::{IntegrationSpec, LearningModel, OscillationThresholds, ONSET_OFFSET};
use crate::error::{Error, Result};
use crate::game::{builtin_game, MultiLevelGame, StateVector};

/// Which game to play: one of the built-in games or a game file.
#[derive(Debug, Clone, PartialEq)]
pub enum GameSelector {
    Builtin(u32),
    File(PathBuf),
}

impl GameSelector {
    pub fn load(&self) -> Result<MultiLevelGame> {
        match self {
            GameSelector::Builtin(id) => builtin_game(*id),
            GameSelector::File(path) => MultiLevelGame::load(path),
        }
    }
}

impl fmt::Display for GameSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GameSelector::Builtin(id) => write!(f, "{id}"),
            GameSelector::File(path) => write!(f, "{}", path.display()),
        }
    }
}

/// Where onset probes start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnsetStart {
    /// The equilibrium reached from `initial`, nudged by `onset_offset`.
    Equilibrium,
    /// `initial` itself.
    Initial,
}

impl OnsetStart {
    fn name(self) -> &'static str {
        match self {
            OnsetStart::Equilibrium => "equilibrium",
            OnsetStart::Initial => "initial",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub game: GameSelector,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    /// Lifts the `α < β` ordering on the learning rates.
    pub exploratory: bool,
    /// Information delay, in stages (time units of the mean dynamics).
    pub tau: f64,
    pub initial: StateVector,
    /// End time of deterministic integrations.
    pub t_max: f64,
    /// Number of stages of stochastic runs.
    pub horizon: usize,
    /// Integration step; `None` picks one from `tau`.
    pub step: Option<f64>,
    pub seed: u64,
    pub ensemble_size: usize,
    /// Keep every n-th sample in written trajectories.
    pub decimation: usize,
    pub output: Option<PathBuf>,
    pub onset_start: OnsetStart,
    pub onset_offset: f64,
    pub thresholds: OscillationThresholds,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            game: GameSelector::Builtin(2),
            alpha: 0.02,
            beta: 0.4,
            theta: 0.1,
            exploratory: false,
            tau: 0.0,
            initial: StateVector::uniform(),
            t_max: 20_000.0,
            horizon: 1000,
            step: None,
            seed: 1,
            ensemble_size: 1,
            decimation: 1,
            output: None,
            onset_start: OnsetStart::Equilibrium,
            onset_offset: ONSET_OFFSET,
            thresholds: OscillationThresholds::default(),
        }
    }
}

const KEYS: &[&str] = &[
    "game",
    "alpha",
    "beta",
    "theta",
    "exploratory",
    "tau",
    "initial",
    "t_max",
    "horizon",
    "step",
    "seed",
    "ensemble_size",
    "decimation",
    "output",
    "onset_start",
    "onset_offset",
    "converged_amplitude",
    "converged_speed",
    "persistent_amplitude",
    "decay_ratio",
    "peak_spread",
];

fn number<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value {value:?} for {key}"))
}

fn finite(key: &str, value: &str) -> std::result::Result<f64, String> {
    let x: f64 = number(key, value)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{key} must be finite, got {value}"))
    }
}

/// File paths are echoed into `#`-commented headers, so they may not carry
/// comment markers or line breaks.
fn path_value(key: &str, value: &str) -> std::result::Result<PathBuf, String> {
    if value.contains(['#', '\n', '\r']) {
        Err(format!("{key} may not contain '#' or line breaks"))
    } else {
        Ok(PathBuf::from(value))
    }
}

fn positive_count(key: &str, value: &str) -> std::result::Result<usize, String> {
    match number::<usize>(key, value)? {
        0 => Err(format!("{key} must be at least 1")),
        n => Ok(n),
    }
}

/// Splits `key = value`, trimming both sides.
pub fn split_assignment(text: &str) -> Option<(&str, &str)> {
    let (k, v) = text.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    (!k.is_empty()).then_some((k, v))
}

impl ExperimentConfig {
    /// Sets one key. Values are checked individually here; cross-field
    /// constraints are checked by [`ExperimentConfig::validate`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_inner(key, value).map_err(Error::Config)
    }

    fn set_inner(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "game" => {
                self.game = match value.parse::<u32>() {
                    Ok(id) => GameSelector::Builtin(id),
                    Err(_) if !value.is_empty() => GameSelector::File(path_value(key, value)?),
                    Err(_) => return Err("game must be a builtin id or a file path".into()),
                }
            }
            "alpha" => self.alpha = finite(key, value)?,
            "beta" => self.beta = finite(key, value)?,
            "theta" => self.theta = finite(key, value)?,
            "exploratory" => self.exploratory = number(key, value)?,
            "tau" => {
                let tau = finite(key, value)?;
                if tau < 0.0 {
                    return Err(format!("tau must be nonnegative, got {value}"));
                }
                self.tau = tau;
            }
            "initial" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 4 {
                    return Err(format!("initial needs 4 comma-separated values, got {value:?}"));
                }
                let mut p = [0.0; 4];
                for (slot, part) in p.iter_mut().zip(&parts) {
                    *slot = finite(key, part)?;
                }
                self.initial = StateVector::from_array(p).map_err(|e| e.to_string())?;
            }
            "t_max" => {
                let t = finite(key, value)?;
                if t < 0.0 {
                    return Err(format!("t_max must be nonnegative, got {value}"));
                }
                self.t_max = t;
            }
            "horizon" => self.horizon = number(key, value)?,
            "step" => {
                self.step = if value == "auto" {
                    None
                } else {
                    let h = finite(key, value)?;
                    if h <= 0.0 {
                        return Err(format!("step must be positive, got {value}"));
                    }
                    Some(h)
                }
            }
            "seed" => self.seed = number(key, value)?,
            "ensemble_size" => self.ensemble_size = positive_count(key, value)?,
            "decimation" => self.decimation = positive_count(key, value)?,
            "output" => {
                self.output = if value.is_empty() {
                    None
                } else {
                    Some(path_value(key, value)?)
                }
            }
            "onset_start" => {
                self.onset_start = match value {
                    "equilibrium" => OnsetStart::Equilibrium,
                    "initial" => OnsetStart::Initial,
                    _ => return Err(format!("onset_start must be equilibrium or initial, got {value:?}")),
                }
            }
            "onset_offset" => self.onset_offset = finite(key, value)?,
            "converged_amplitude" => self.thresholds.converged_amplitude = finite(key, value)?,
            "converged_speed" => self.thresholds.converged_speed = finite(key, value)?,
            "persistent_amplitude" => self.thresholds.persistent_amplitude = finite(key, value)?,
            "decay_ratio" => self.thresholds.decay_ratio = finite(key, value)?,
            "peak_spread" => self.thresholds.peak_spread = finite(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Parses config text on top of the defaults. Unknown and repeated keys
    /// are errors carrying their line number.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = split_assignment(line) else {
                return Err(Error::parse(n + 1, format!("expected `key = value`, got {line:?}")));
            };
            if seen.contains(&key) {
                return Err(Error::parse(n + 1, format!("duplicate key {key:?}")));
            }
            seen.push(key);
            cfg.set_inner(key, value).map_err(|msg| Error::parse(n + 1, msg))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Recovers the config from the leading `#` lines of a CSV file written
    /// by the runner.
    pub fn from_csv_header(text: &str) -> Result<Self> {
        let header: Vec<&str> = text
            .lines()
            .map_while(|l| l.strip_prefix('#'))
            .collect();
        Self::parse(&header.join("\n"))
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (key, value) = split_assignment(o)
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Cross-field checks: the learning parameters and the game must be
    /// usable.
    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if let GameSelector::Builtin(id) = self.game {
            builtin_game(id)?;
        }
        if !(self.onset_offset.abs() < 0.5) {
            return Err(Error::Config(format!(
                "onset_offset {} must be below 0.5 in magnitude",
                self.onset_offset
            )));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<LearningParams> {
        let made = if self.exploratory {
            LearningParams::exploratory(self.alpha, self.beta, self.theta)
        } else {
            LearningParams::new(self.alpha, self.beta, self.theta)
        };
        made.map_err(|e| Error::Config(e.to_string()))
    }

    pub fn model(&self) -> Result<LearningModel> {
        Ok(LearningModel::new(self.game.load()?, self.params()?))
    }

    pub fn integration(&self) -> IntegrationSpec {
        let spec = IntegrationSpec::new(self.tau, self.t_max).recording_every(self.decimation);
        match self.step {
            Some(h) => spec.with_step(h),
            None => spec,
        }
    }

    /// Settings for the stochastic process; the delay must be a whole number
    /// of stages.
    pub fn simulation(&self) -> Result<SimConfig> {
        if self.tau.fract() != 0.0 {
            return Err(Error::Config(format!(
                "stochastic runs need a whole-stage delay, got tau = {}",
                self.tau
            )));
        }
        let mut sim = SimConfig::new(self.game.load()?, self.params()?);
        sim.initial = self.initial;
        sim.tau = self.tau as usize;
        sim.horizon = self.horizon;
        sim.seed = self.seed;
        sim.ensemble_size = self.ensemble_size;
        sim.decimation = self.decimation;
        sim.validate()?;
        Ok(sim)
    }

    /// Canonical text with every key, in a fixed order. Floats print in
    /// shortest round-trip form.
    pub fn to_text(&self) -> String {
        let p = self.initial.as_array();
        let th = &self.thresholds;
        let values: Vec<String> = vec![
            self.game.to_string(),
            self.alpha.to_string(),
            self.beta.to_string(),
            self.theta.to_string(),
            self.exploratory.to_string(),
            self.tau.to_string(),
            format!("{},{},{},{}", p[0], p[1], p[2], p[3]),
            self.t_max.to_string(),
            self.horizon.to_string(),
            self.step.map_or_else(|| "auto".to_string(), |h| h.to_string()),
            self.seed.to_string(),
            self.ensemble_size.to_string(),
            self.decimation.to_string(),
            self.output
                .as_ref()
                .map_or_else(String::new, |p| p.display().to_string()),
            self.onset_start.name().to_string(),
            self.onset_offset.to_string(),
            th.converged_amplitude.to_string(),
            th.converged_speed.to_string(),
            th.persistent_amplitude.to_string(),
            th.decay_ratio.to_string(),
            th.peak_spread.to_string(),
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.game, GameSelector::Builtin(2));
        assert_eq!((cfg.alpha, cfg.beta, cfg.theta, cfg.tau, cfg.seed), (0.02, 0.4, 0.1, 0.0, 1));
        assert_eq!(cfg.initial, StateVector::uniform());
        cfg.validate().unwrap();
    }

    #[test]
    fn parse_keys_and_comments() {
        let text = "# game 3 near the boundary\ngame = 3\nalpha=0.01  # slow penalty\n\n beta = 0.05\ntheta = 1\ninitial = 0.1, 0.2,0.3 ,0.4\nstep = 0.25\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.game, GameSelector::Builtin(3));
        assert_eq!((cfg.alpha, cfg.beta, cfg.theta), (0.01, 0.05, 1.0));
        assert_eq!(cfg.initial.as_array(), [0.1, 0.2, 0.3, 0.4]);
        assert_eq!(cfg.step, Some(0.25));
        let file = ExperimentConfig::parse("game = games/custom.txt").unwrap();
        assert_eq!(file.game, GameSelector::File("games/custom.txt".into()));
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = |t: &str| ExperimentConfig::parse(t).unwrap_err();
        assert!(matches!(err("alpha = 0.1\nbogus = 1"), Error::Parse { line: 2, .. }));
        assert!(matches!(err("seed = 1\n\nseed = 2"), Error::Parse { line: 3, .. }));
        assert!(matches!(err("alpha 0.1"), Error::Parse { line: 1, .. }));
        assert!(matches!(err("initial = 0.5,0.5,0.5"), Error::Parse { .. }));
        assert!(matches!(err("initial = 0.5,0.5,0.5,1.5"), Error::Parse { .. }));
        assert!(matches!(err("tau = -1"), Error::Parse { .. }));
        assert!(matches!(err("alpha = nan"), Error::Parse { .. }));
        assert!(matches!(err("ensemble_size = 0"), Error::Parse { .. }));
        assert!(matches!(err("step = 0"), Error::Parse { .. }));
        assert!(matches!(err("onset_start = middle"), Error::Parse { .. }));
    }

    #[test]
    fn validation_is_a_config_error() {
        let cfg = ExperimentConfig::parse("alpha = 0.5\nbeta = 0.4").unwrap();
        let e = cfg.validate().unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert_eq!(e.exit_code(), 2);
        let ok = ExperimentConfig::parse("alpha = 0.5\nbeta = 0.4\nexploratory = true").unwrap();
        ok.validate().unwrap();
        let unknown = ExperimentConfig::parse("game = 7").unwrap();
        assert!(matches!(unknown.validate(), Err(Error::UnknownGame(7))));
    }

    #[test]
    fn overrides_apply_in_order() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_overrides(&["tau=10", "tau = 12.5", "seed=9"]).unwrap();
        assert_eq!((cfg.tau, cfg.seed), (12.5, 9));
        assert!(cfg.apply_overrides(&["tau"]).is_err());
        assert!(cfg.apply_overrides(&["nope=1"]).is_err());
        assert!(cfg.apply_overrides(&["output=#x"]).is_err());
        assert!(cfg.apply_overrides(&["game=a\nb"]).is_err());
    }

    #[test]
    fn round_trip_through_csv_header() {
        let mut cfg = ExperimentConfig::parse(
            "game = 3\nalpha = 0.01\nbeta = 0.1\ntheta = 1\ntau = 17.25\ninitial = 0.3,0.7,0.1,0.9\nstep = 0.125\noutput = out.csv\nonset_start = initial",
        )
        .unwrap();
        cfg.thresholds.decay_ratio = 0.975;
        let text = cfg.to_text();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
        let csv: String = text.lines().map(|l| format!("#{l}\n")).collect::<String>() + "t,p1\n0,0.5\n";
        assert_eq!(ExperimentConfig::from_csv_header(&csv).unwrap(), cfg);
    }

    #[test]
    fn simulation_needs_whole_delay() {
        let cfg = ExperimentConfig::parse("tau = 2.5").unwrap();
        assert!(matches!(cfg.simulation(), Err(Error::Config(_))));
        let cfg = ExperimentConfig::parse("tau = 3\nhorizon = 50\nensemble_size = 4").unwrap();
        let sim = cfg.simulation().unwrap();
        assert_eq!((sim.tau, sim.horizon, sim.ensemble_size), (3, 50, 4));
    }
}
