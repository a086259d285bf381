//! Run configuration: a flat `key = value` text file with `#` comments.
//! Command-line overrides go through [`RunConfig::set`] as well, so the same
//! validation applies to both.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::defaults;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::FeatureOptions;
use crate::regressors::{DnneHyper, ModelKind};
use crate::rng::derive_seed;
use crate::segments::ThresholdSettings;
use crate::synthetic::{ChargeProtocol, NoiseLevels};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    /// Defaults to `<data_dir>/manifest.csv`.
    pub manifest: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub model: ModelKind,
    pub seed: u64,
    pub thresholds: ThresholdSettings,
    pub include_cc_capacity: bool,
    pub ransac: bool,
    pub feature_selection: bool,
    pub gamma: f64,
    pub selection_trees: usize,
    pub model_trees: usize,
    pub ensemble_members: usize,
    pub ensemble_epochs: usize,
    pub learning_rate: f64,
    pub search_trials: usize,
    pub alpha: f64,
    pub reliability_levels: usize,
    pub execution: Execution,
    pub synth_cells: usize,
    pub synth_cycles: u32,
    pub synth_train: usize,
    pub synth_calibration: usize,
    pub synth_protocol: ChargeProtocol,
    pub synth_noise: NoiseLevels,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_dir: None,
            manifest: None,
            out_dir: PathBuf::from("out"),
            model: ModelKind::Dnne,
            seed: 0,
            thresholds: ThresholdSettings::default(),
            include_cc_capacity: false,
            ransac: true,
            feature_selection: true,
            gamma: defaults::FGSM_GAMMA,
            selection_trees: defaults::SELECTION_FOREST_TREES,
            model_trees: defaults::MODEL_FOREST_TREES,
            ensemble_members: defaults::ENSEMBLE_MEMBERS,
            ensemble_epochs: defaults::ENSEMBLE_EPOCHS,
            learning_rate: defaults::ADAM_LEARNING_RATE,
            search_trials: defaults::SEARCH_TRIALS,
            alpha: defaults::ALPHA_ZONE,
            reliability_levels: defaults::RELIABILITY_LEVELS,
            execution: Execution::default(),
            synth_cells: 12,
            synth_cycles: 100,
            synth_train: 7,
            synth_calibration: 2,
            synth_protocol: ChargeProtocol::CcCv,
            synth_noise: NoiseLevels::MODERATE,
        }
    }
}

fn bad(key: &str, value: &str, expected: &str) -> Error {
    Error::Config(format!("`{key}`: invalid value `{value}` (expected {expected})"))
}

fn parse<T: std::str::FromStr>(key: &str, value: &str, expected: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, expected))
}

fn positive(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse(key, value, "a number")?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, value, "a positive number"))
    }
}

fn count(key: &str, value: &str) -> Result<usize> {
    let v: usize = parse(key, value, "a positive integer")?;
    if v == 0 {
        return Err(bad(key, value, "a positive integer"));
    }
    Ok(v)
}

fn optional_positive(key: &str, value: &str) -> Result<Option<f64>> {
    if value.is_empty() || value == "auto" {
        Ok(None)
    } else {
        positive(key, value).map(Some)
    }
}

fn show_opt(v: Option<f64>) -> String {
    v.map_or("auto".into(), |x| x.to_string())
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or(String::new(), |p| p.display().to_string())
}

impl RunConfig {
    pub const KEYS: [&'static str; 31] = [
        "data_dir",
        "manifest",
        "out_dir",
        "model",
        "seed",
        "delta_v",
        "i_low_fraction",
        "v_high",
        "i_high",
        "include_cc_capacity",
        "ransac",
        "feature_selection",
        "gamma",
        "selection_trees",
        "model_trees",
        "ensemble_members",
        "ensemble_epochs",
        "learning_rate",
        "search_trials",
        "alpha",
        "reliability_levels",
        "execution",
        "synth_cells",
        "synth_cycles",
        "synth_train",
        "synth_calibration",
        "synth_protocol",
        "synth_noise_voltage_v",
        "synth_noise_current_a",
        "synth_noise_capacity_ah",
        "config_version",
    ];

    /// Parses a config file on top of the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(k.trim(), v.trim()).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.thresholds;
        match key {
            "data_dir" => self.data_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            "manifest" => self.manifest = (!value.is_empty()).then(|| PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "model" => self.model = value.parse()?,
            "seed" => self.seed = parse(key, value, "an unsigned integer")?,
            "delta_v" => t.delta_v = positive(key, value)?,
            "i_low_fraction" => {
                let f = positive(key, value)?;
                if f >= 1.0 {
                    return Err(bad(key, value, "a fraction in (0, 1)"));
                }
                t.i_low_fraction = f;
            }
            "v_high" => t.v_high = optional_positive(key, value)?,
            "i_high" => t.i_high = optional_positive(key, value)?,
            "include_cc_capacity" => self.include_cc_capacity = parse(key, value, "true or false")?,
            "ransac" => self.ransac = parse(key, value, "true or false")?,
            "feature_selection" => self.feature_selection = parse(key, value, "true or false")?,
            "gamma" => {
                let g: f64 = parse(key, value, "a number")?;
                if !(g >= 0.0 && g.is_finite()) {
                    return Err(bad(key, value, "a non-negative number"));
                }
                self.gamma = g;
            }
            "selection_trees" => self.selection_trees = count(key, value)?,
            "model_trees" => {
                self.model_trees = count(key, value)?;
                if self.model_trees < 2 {
                    return Err(bad(key, value, "at least 2"));
                }
            }
            "ensemble_members" => self.ensemble_members = count(key, value)?,
            "ensemble_epochs" => self.ensemble_epochs = count(key, value)?,
            "learning_rate" => self.learning_rate = positive(key, value)?,
            "search_trials" => self.search_trials = count(key, value)?,
            "alpha" => {
                self.alpha = positive(key, value)?;
                if self.alpha >= 1.0 {
                    return Err(bad(key, value, "a fraction in (0, 1)"));
                }
            }
            "reliability_levels" => {
                self.reliability_levels = count(key, value)?;
                if self.reliability_levels < 2 {
                    return Err(bad(key, value, "at least 2"));
                }
            }
            "execution" => {
                self.execution = match value {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    _ => return Err(bad(key, value, "parallel or sequential")),
                }
            }
            "synth_cells" => self.synth_cells = count(key, value)?,
            "synth_cycles" => {
                self.synth_cycles = parse(key, value, "an integer >= 2")?;
                if self.synth_cycles < 2 {
                    return Err(bad(key, value, "an integer >= 2"));
                }
            }
            "synth_train" => self.synth_train = count(key, value)?,
            "synth_calibration" => self.synth_calibration = count(key, value)?,
            "synth_protocol" => {
                self.synth_protocol = match value {
                    "cc_cv" => ChargeProtocol::CcCv,
                    "cc" => ChargeProtocol::Cc,
                    "fast_charge_cc_cv" => ChargeProtocol::FastChargeCcCv,
                    _ => return Err(bad(key, value, "cc_cv, cc or fast_charge_cc_cv")),
                }
            }
            "synth_noise_voltage_v" => self.synth_noise.voltage_v = non_negative(key, value)?,
            "synth_noise_current_a" => self.synth_noise.current_a = non_negative(key, value)?,
            "synth_noise_capacity_ah" => self.synth_noise.capacity_ah = non_negative(key, value)?,
            "config_version" => {
                if value != "1" {
                    return Err(bad(key, value, "1"));
                }
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Canonical `key = value` text with every key, in [`RunConfig::KEYS`] order.
    pub fn to_text(&self) -> String {
        let t = &self.thresholds;
        let protocol = match self.synth_protocol {
            ChargeProtocol::CcCv => "cc_cv",
            ChargeProtocol::Cc => "cc",
            ChargeProtocol::FastChargeCcCv => "fast_charge_cc_cv",
        };
        let execution = match self.execution {
            Execution::Parallel => "parallel",
            Execution::Sequential => "sequential",
        };
        let values: [String; 31] = [
            show_path(&self.data_dir),
            show_path(&self.manifest),
            self.out_dir.display().to_string(),
            self.model.to_string(),
            self.seed.to_string(),
            t.delta_v.to_string(),
            t.i_low_fraction.to_string(),
            show_opt(t.v_high),
            show_opt(t.i_high),
            self.include_cc_capacity.to_string(),
            self.ransac.to_string(),
            self.feature_selection.to_string(),
            self.gamma.to_string(),
            self.selection_trees.to_string(),
            self.model_trees.to_string(),
            self.ensemble_members.to_string(),
            self.ensemble_epochs.to_string(),
            self.learning_rate.to_string(),
            self.search_trials.to_string(),
            self.alpha.to_string(),
            self.reliability_levels.to_string(),
            execution.to_string(),
            self.synth_cells.to_string(),
            self.synth_cycles.to_string(),
            self.synth_train.to_string(),
            self.synth_calibration.to_string(),
            protocol.to_string(),
            self.synth_noise.voltage_v.to_string(),
            self.synth_noise.current_a.to_string(),
            self.synth_noise.capacity_ah.to_string(),
            "1".to_string(),
        ];
        let mut out = String::new();
        for (k, v) in Self::KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Hex SHA-256 of [`RunConfig::to_text`].
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn manifest_path(&self) -> Result<PathBuf> {
        match (&self.manifest, &self.data_dir) {
            (Some(m), _) => Ok(m.clone()),
            (None, Some(d)) => Ok(d.join("manifest.csv")),
            (None, None) => Err(Error::Config("no manifest or data_dir configured".into())),
        }
    }

    pub fn data_dir(&self) -> Result<&Path> {
        let d = self.data_dir.as_deref().ok_or_else(|| Error::Config("data_dir is not set".into()))?;
        if !d.is_dir() {
            return Err(Error::Config(format!("data_dir {} does not exist", d.display())));
        }
        Ok(d)
    }

    pub fn feature_options(&self) -> FeatureOptions {
        FeatureOptions { thresholds: self.thresholds, include_cc_capacity: self.include_cc_capacity }
    }

    pub fn dnne(&self) -> DnneHyper {
        DnneHyper { members: self.ensemble_members, epochs: self.ensemble_epochs, learning_rate: self.learning_rate }
    }

    /// Seed of a named randomness substream (`selection`, `augment`, `model`, `search`, …).
    pub fn stream_seed(&self, name: &str) -> u64 {
        derive_seed(self.seed, name, 0)
    }
}

fn non_negative(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse(key, value, "a number")?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, value, "a non-negative number"))
    }
}
