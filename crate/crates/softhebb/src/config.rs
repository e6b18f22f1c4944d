//! Run configuration: a TOML file of dotted keys, overridden by command-line
//! `key=value` pairs, over built-in defaults.
//!
//! Every key and its default is listed in [`KEYS`]; `docs/config.md` mirrors
//! that table.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use softhebb_core::adversarial::PgdConfig;
use softhebb_core::eval::SoftHebbConfig;
use softhebb_core::layer::{BiasMode, InferenceMode, LearningRateSchedule, TrainConfig, WeightInit};
use softhebb_core::math::ActivationKind;
use softhebb_core::readout::{OptimizerConfig, OptimizerKind};
use toml::Value;

use crate::error::{Error, Result};

pub const DATA_DIR_ENV: &str = "SOFTHEBB_DATA_DIR";

/// `(key, default as a TOML literal, description)`.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("run.seeds", "[0, 1, 2, 3, 4]", "one run per seed"),
    ("run.out", "\"runs\"", "output directory"),
    ("data.dir", "\"\"", "dataset root; empty means $SOFTHEBB_DATA_DIR, else ./data"),
    ("data.dataset", "\"mnist\"", "mnist or fashion; names the subdirectory of data.dir"),
    ("data.train_images", "\"\"", "explicit path, overrides the dataset default"),
    ("data.train_labels", "\"\"", "explicit path"),
    ("data.test_images", "\"\"", "explicit path"),
    ("data.test_labels", "\"\"", "explicit path"),
    ("data.train_limit", "0", "use only the first N training samples (0 = all)"),
    ("data.test_limit", "0", "use only the first N test samples (0 = all)"),
    ("model.k", "200", "WTA neurons"),
    ("model.activation", "\"base-exp\"", "natural-exp, base-exp, temperature-exp, relu, rectified-poly"),
    ("model.base", "1000.0", "softmax base for base-exp"),
    ("model.temperature", "1.0", "temperature for temperature-exp"),
    ("model.power", "2", "degree for rectified-poly"),
    ("model.bias_mode", "\"additive-log\"", "additive-log, multiplicative, disabled"),
    ("model.init", "\"uniform-sphere\"", "uniform-sphere, random-samples, farthest-point"),
    ("model.mode", "\"soft\"", "soft or hard inference during training"),
    ("train.eta_start", "0.03", "learning rate at the first step"),
    ("train.eta_end", "0.0", "learning rate after the last step (linear decay)"),
    ("train.epochs", "1", "passes over the training set"),
    ("train.bias_rate_scale", "1.0", "bias learning rate as a multiple of eta"),
    ("hardwta.eta_start", "0.05", "initial rate of the hard-WTA baseline"),
    ("readout.optimizer", "\"adam\"", "adam or sgd"),
    ("readout.lr", "0.001", "readout learning rate"),
    ("readout.minibatch", "32", "readout minibatch size"),
    ("readout.epochs", "60", "readout epochs"),
    ("mlp.hidden", "2000", "MLP hidden units"),
    ("mlp.optimizer", "\"sgd\"", "adam or sgd"),
    ("mlp.lr", "0.2", "MLP learning rate"),
    ("mlp.minibatch", "4", "MLP minibatch size"),
    ("mlp.epochs", "1", "MLP epochs"),
    ("input.layer", "\"\"", "existing layer checkpoint (.shwl); empty means train one"),
    ("input.readout", "\"\"", "existing readout checkpoint (.shrc)"),
    ("input.mlp", "\"\"", "existing MLP checkpoint (.shml)"),
    ("posthoc.test_interval", "1000", "steps between test-loss measurements"),
    ("posthoc.compare_mlp", "true", "also trace an MLP trained with mlp.* settings"),
    ("attack.target", "\"softhebb-2layer\"", "softhebb-2layer, softhebb-1layer, mlp"),
    ("attack.epsilons", "[0, 4, 8, 16, 32, 64]", "L-infinity radii in units of 1/attack.epsilon_unit"),
    ("attack.epsilon_unit", "255.0", "divisor applied to attack.epsilons and interpolate.epsilons"),
    ("attack.steps", "40", "PGD iterations"),
    ("attack.step_ratio", "2.5", "total step budget as a multiple of epsilon"),
    ("attack.random_start", "true", "uniform start inside the ball"),
    ("attack.restarts", "1", "PGD restarts"),
    ("attack.samples", "1000", "test samples attacked (0 = all)"),
    ("attack.images", "4", "perturbed examples exported per epsilon"),
    ("noise.target", "\"softhebb-2layer\"", "softhebb-2layer, softhebb-1layer, mlp"),
    ("noise.sigmas", "[0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0]", "Gaussian pixel-noise standard deviations"),
    ("noise.samples", "0", "test samples evaluated (0 = all)"),
    ("interpolate.target", "\"softhebb-2layer\"", "softhebb-2layer, softhebb-1layer, mlp"),
    ("interpolate.sample", "0", "test-set index of the image to perturb"),
    ("interpolate.epsilons", "[0, 8, 16, 24, 32, 48, 64]", "radii, same unit as attack.epsilons"),
    ("theory.spec", "\"\"", "mixture spec JSON; empty means draw one from the keys below"),
    ("theory.n", "10", "input dimension"),
    ("theory.priors", "[0.4, 0.3, 0.2, 0.1]", "component priors"),
    ("theory.concentration", "123.0", "inverse noise variance (123 gives ~15 degrees spread at n = 10)"),
    ("theory.min_angle_deg", "30.0", "minimum centroid separation"),
    ("theory.spec_seed", "17", "seed for drawing centroids"),
    ("theory.samples", "50000", "training samples"),
    ("theory.eta_start", "0.05", "initial learning rate"),
    ("theory.activations", "[\"base-exp\", \"natural-exp\", \"relu\"]", "kinds to train; relu uses a multiplicative prior"),
    ("theory.init", "\"farthest-point\"", "weight init for the theory run"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Default,
    /// Filled in from an environment variable at resolve time.
    Env,
    File,
    Cli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    TrainSofthebb,
    TrainHardwta,
    TrainMlp,
    TrainReadout,
    LabelNeurons,
    Eval,
    PosthocXent,
    Attack,
    NoiseEval,
    Interpolate,
    VerifyTheory,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::TrainSofthebb,
        Experiment::TrainHardwta,
        Experiment::TrainMlp,
        Experiment::TrainReadout,
        Experiment::LabelNeurons,
        Experiment::Eval,
        Experiment::PosthocXent,
        Experiment::Attack,
        Experiment::NoiseEval,
        Experiment::Interpolate,
        Experiment::VerifyTheory,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::TrainSofthebb => "train-softhebb",
            Experiment::TrainHardwta => "train-hardwta",
            Experiment::TrainMlp => "train-mlp",
            Experiment::TrainReadout => "train-readout",
            Experiment::LabelNeurons => "label-neurons",
            Experiment::Eval => "eval",
            Experiment::PosthocXent => "posthoc-xent",
            Experiment::Attack => "attack",
            Experiment::NoiseEval => "noise-eval",
            Experiment::Interpolate => "interpolate",
            Experiment::VerifyTheory => "verify-theory",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
            Error::config("experiment", format!("unknown experiment `{s}`; expected one of {}", names.join(", ")))
        })
    }
}

/// Flat dotted-key configuration with the origin of every value.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigMap {
    values: BTreeMap<String, (Value, Source)>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            _ => out.push((key, v.clone())),
        }
    }
}

fn parse_literal(text: &str) -> Option<Value> {
    let t: toml::Table = toml::from_str(&format!("v = {text}")).ok()?;
    t.get("v").cloned()
}

impl Default for ConfigMap {
    fn default() -> Self {
        let values = KEYS
            .iter()
            .map(|(k, lit, _)| (k.to_string(), (parse_literal(lit).expect("default literal"), Source::Default)))
            .collect();
        Self { values }
    }
}

impl ConfigMap {
    fn set(&mut self, key: &str, value: Value, source: Source) -> Result<()> {
        let slot = self
            .values
            .get_mut(key)
            .ok_or_else(|| Error::config(key, "unknown key"))?;
        let compatible = match (&slot.0, &value) {
            (Value::Float(_), Value::Integer(_)) => true,
            (Value::Array(_), Value::Array(_)) => true,
            (a, b) => std::mem::discriminant(a) == std::mem::discriminant(b),
        };
        if !compatible {
            return Err(Error::config(key, format!("expected a {}, got `{value}`", slot.0.type_str())));
        }
        *slot = (value, source);
        Ok(())
    }

    pub fn merge_toml(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::config("file", e.to_string()))?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat);
        for (k, v) in flat {
            self.set(&k, v, Source::File)?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        self.merge_toml(&text)
    }

    /// `key=value` with `value` a TOML literal; bare words are taken as
    /// strings.
    pub fn merge_override(&mut self, assignment: &str) -> Result<()> {
        let (key, text) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, "override must look like key=value"))?;
        let key = key.trim();
        let text = text.trim();
        let value = parse_literal(text).unwrap_or_else(|| Value::String(text.to_string()));
        self.set(key, value, Source::Cli)
    }

    /// Records a value resolved from the environment, so the snapshot does
    /// not depend on it. Keys already set from a file or the CLI are kept.
    pub fn set_from_env(&mut self, key: &str, value: &str) -> Result<()> {
        if self.source(key) == Source::Default {
            self.set(key, Value::String(value.to_string()), Source::Env)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> &Value {
        &self.values.get(key).unwrap_or_else(|| panic!("unregistered key {key}")).0
    }

    pub fn source(&self, key: &str) -> Source {
        self.values[key].1
    }

    /// `key → (value as TOML text, source)`, for manifests.
    pub fn snapshot(&self) -> BTreeMap<String, (String, Source)> {
        self.values.iter().map(|(k, (v, s))| (k.clone(), (v.to_string(), *s))).collect()
    }

    /// The resolved configuration as a TOML document that reproduces it.
    pub fn to_toml(&self) -> String {
        let mut root = toml::Table::new();
        for (key, (v, _)) in &self.values {
            let mut parts: Vec<&str> = key.split('.').collect();
            let leaf = parts.pop().expect("non-empty key");
            let mut t = &mut root;
            for p in parts {
                t = t
                    .entry(p.to_string())
                    .or_insert_with(|| Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .expect("namespace table");
            }
            t.insert(leaf.to_string(), v.clone());
        }
        toml::to_string(&root).expect("serializable config")
    }

    fn string(&self, key: &str) -> Result<String> {
        self.get(key).as_str().map(str::to_string).ok_or_else(|| Error::config(key, "expected a string"))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        match self.get(key) {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(Error::config(key, "expected a number")),
        }
    }

    fn usize(&self, key: &str) -> Result<usize> {
        match self.get(key) {
            Value::Integer(i) if *i >= 0 => Ok(*i as usize),
            _ => Err(Error::config(key, "expected a non-negative integer")),
        }
    }

    fn bool(&self, key: &str) -> Result<bool> {
        self.get(key).as_bool().ok_or_else(|| Error::config(key, "expected true or false"))
    }

    fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let arr = self.get(key).as_array().ok_or_else(|| Error::config(key, "expected an array"))?;
        arr.iter()
            .map(|v| match v {
                Value::Float(f) => Ok(*f),
                Value::Integer(i) => Ok(*i as f64),
                _ => Err(Error::config(key, format!("non-numeric entry `{v}`"))),
            })
            .collect()
    }

    fn string_list(&self, key: &str) -> Result<Vec<String>> {
        let arr = self.get(key).as_array().ok_or_else(|| Error::config(key, "expected an array"))?;
        arr.iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(|| Error::config(key, format!("non-string entry `{v}`"))))
            .collect()
    }

    fn path(&self, key: &str) -> Result<Option<PathBuf>> {
        let s = self.string(key)?;
        Ok((!s.is_empty()).then(|| PathBuf::from(s)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Softhebb2Layer,
    Softhebb1Layer,
    Mlp,
}

fn target(map: &ConfigMap, key: &str) -> Result<Target> {
    match map.string(key)?.as_str() {
        "softhebb-2layer" => Ok(Target::Softhebb2Layer),
        "softhebb-1layer" => Ok(Target::Softhebb1Layer),
        "mlp" => Ok(Target::Mlp),
        other => Err(Error::config(key, format!("unknown target `{other}`"))),
    }
}

pub fn parse_activation(name: &str, base: f64, temperature: f64, power: usize, key: &str) -> Result<ActivationKind> {
    let a = match name {
        "natural-exp" => ActivationKind::NaturalExp,
        "base-exp" => ActivationKind::BaseExp(base),
        "temperature-exp" => ActivationKind::TemperatureExp(temperature),
        "relu" => ActivationKind::Relu,
        "rectified-poly" => ActivationKind::RectifiedPoly(power as u32),
        other => return Err(Error::config(key, format!("unknown activation `{other}`"))),
    };
    a.validate().map_err(|e| Error::config(key, e.to_string()))?;
    Ok(a)
}

fn parse_bias_mode(name: &str, key: &str) -> Result<BiasMode> {
    match name {
        "additive-log" => Ok(BiasMode::AdditiveLog),
        "multiplicative" => Ok(BiasMode::MultiplicativePrior),
        "disabled" => Ok(BiasMode::Disabled),
        other => Err(Error::config(key, format!("unknown bias mode `{other}`"))),
    }
}

pub fn parse_init(name: &str, key: &str) -> Result<WeightInit> {
    match name {
        "uniform-sphere" => Ok(WeightInit::UniformSphere),
        "random-samples" => Ok(WeightInit::RandomSamples),
        "farthest-point" => Ok(WeightInit::FarthestPointSamples),
        other => Err(Error::config(key, format!("unknown init `{other}`"))),
    }
}

fn optimizer(map: &ConfigMap, ns: &str) -> Result<OptimizerConfig> {
    let key = |k: &str| format!("{ns}.{k}");
    let kind = match map.string(&key("optimizer"))?.as_str() {
        "adam" => OptimizerConfig::ADAM_DEFAULT,
        "sgd" => OptimizerKind::Sgd,
        other => return Err(Error::config(key("optimizer"), format!("unknown optimizer `{other}`"))),
    };
    let cfg = OptimizerConfig {
        kind,
        learning_rate: map.f64(&key("lr"))?,
        minibatch: map.usize(&key("minibatch"))?,
        epochs: map.usize(&key("epochs"))?,
    };
    cfg.validate().map_err(|e| Error::config(ns, e.to_string()))?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    pub train_limit: usize,
    pub test_limit: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSettings {
    pub k: usize,
    pub activation: ActivationKind,
    pub bias_mode: BiasMode,
    pub init: WeightInit,
    pub mode: InferenceMode,
    pub eta_start: f64,
    pub eta_end: f64,
    pub epochs: usize,
    pub bias_rate_scale: f64,
    pub hard_eta_start: f64,
}

impl ModelSettings {
    /// The layer config for `samples_per_epoch` training samples.
    pub fn softhebb(&self, samples_per_epoch: usize) -> SoftHebbConfig {
        let mut train = TrainConfig::new(
            LearningRateSchedule::Linear {
                start: self.eta_start,
                end: self.eta_end,
                total_steps: (self.epochs * samples_per_epoch) as u64,
            },
            self.mode,
        );
        train.bias_rate_scale = self.bias_rate_scale;
        SoftHebbConfig {
            neurons: self.k,
            activation: self.activation,
            bias_mode: self.bias_mode,
            init: self.init,
            train,
            epochs: self.epochs,
        }
    }

    /// Same, as the hard-WTA baseline: hard inference, no biases.
    pub fn hard_wta(&self, samples_per_epoch: usize) -> SoftHebbConfig {
        let mut cfg = Self {
            bias_mode: BiasMode::Disabled,
            mode: InferenceMode::Hard,
            eta_start: self.hard_eta_start,
            ..self.clone()
        }
        .softhebb(samples_per_epoch);
        cfg.train.bias_rate_scale = 0.0;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSettings {
    pub target: Target,
    pub epsilons: Vec<f64>,
    pub pgd: PgdConfig,
    pub samples: usize,
    pub images: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheorySettings {
    pub spec: Option<PathBuf>,
    pub n: usize,
    pub priors: Vec<f64>,
    pub concentration: f64,
    pub min_angle_deg: f64,
    pub spec_seed: u64,
    pub samples: usize,
    pub eta_start: f64,
    pub activations: Vec<(ActivationKind, BiasMode)>,
    pub init: WeightInit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub data: DataPaths,
    pub model: ModelSettings,
    pub readout: OptimizerConfig,
    pub mlp_hidden: usize,
    pub mlp: OptimizerConfig,
    pub input_layer: Option<PathBuf>,
    pub input_readout: Option<PathBuf>,
    pub input_mlp: Option<PathBuf>,
    pub test_interval: u64,
    pub compare_mlp: bool,
    pub attack: AttackSettings,
    pub noise_target: Target,
    pub noise_sigmas: Vec<f64>,
    pub noise_samples: usize,
    pub interpolate_target: Target,
    pub interpolate_sample: usize,
    pub interpolate_epsilons: Vec<f64>,
    pub theory: TheorySettings,
    pub map: ConfigMap,
}

fn dataset_files(dir: &Path, dataset: &str, key: &str) -> Result<[PathBuf; 4]> {
    let sub = match dataset {
        "mnist" | "fashion" => dir.join(dataset),
        other => return Err(Error::config(key, format!("unknown dataset `{other}`"))),
    };
    let pick = |stem: &str| {
        let gz = sub.join(format!("{stem}.gz"));
        if gz.exists() {
            gz
        } else {
            sub.join(stem)
        }
    };
    Ok([
        pick("train-images-idx3-ubyte"),
        pick("train-labels-idx1-ubyte"),
        pick("t10k-images-idx3-ubyte"),
        pick("t10k-labels-idx1-ubyte"),
    ])
}

fn positive(v: usize, key: &str) -> Result<usize> {
    if v == 0 {
        return Err(Error::config(key, "must be at least 1"));
    }
    Ok(v)
}

impl RunConfig {
    /// Resolves the typed configuration. `data_dir_env` is the value of
    /// `SOFTHEBB_DATA_DIR`, if set.
    pub fn resolve(experiment: Experiment, mut map: ConfigMap, data_dir_env: Option<&str>) -> Result<Self> {
        let seeds = map
            .f64_list("run.seeds")?
            .into_iter()
            .map(|s| if s >= 0.0 && s.fract() == 0.0 { Ok(s as u64) } else { Err(Error::config("run.seeds", format!("seed {s} is not a non-negative integer"))) })
            .collect::<Result<Vec<u64>>>()?;
        if seeds.is_empty() {
            return Err(Error::config("run.seeds", "at least one seed is required"));
        }
        if map.string("data.dir")?.is_empty() {
            map.set_from_env("data.dir", data_dir_env.filter(|d| !d.is_empty()).unwrap_or("data"))?;
        }
        let dir = PathBuf::from(map.string("data.dir")?);
        let defaults = dataset_files(&dir, &map.string("data.dataset")?, "data.dataset")?;
        let [ti, tl, vi, vl] = defaults;
        let or = |key: &str, d: PathBuf| -> Result<PathBuf> { Ok(map.path(key)?.unwrap_or(d)) };
        let data = DataPaths {
            train_images: or("data.train_images", ti)?,
            train_labels: or("data.train_labels", tl)?,
            test_images: or("data.test_images", vi)?,
            test_labels: or("data.test_labels", vl)?,
            train_limit: map.usize("data.train_limit")?,
            test_limit: map.usize("data.test_limit")?,
        };
        let activation = parse_activation(
            &map.string("model.activation")?,
            map.f64("model.base")?,
            map.f64("model.temperature")?,
            map.usize("model.power")?,
            "model.activation",
        )?;
        let mode = match map.string("model.mode")?.as_str() {
            "soft" => InferenceMode::Soft,
            "hard" => InferenceMode::Hard,
            other => return Err(Error::config("model.mode", format!("unknown mode `{other}`"))),
        };
        let model = ModelSettings {
            k: positive(map.usize("model.k")?, "model.k")?,
            activation,
            bias_mode: parse_bias_mode(&map.string("model.bias_mode")?, "model.bias_mode")?,
            init: parse_init(&map.string("model.init")?, "model.init")?,
            mode,
            eta_start: map.f64("train.eta_start")?,
            eta_end: map.f64("train.eta_end")?,
            epochs: positive(map.usize("train.epochs")?, "train.epochs")?,
            bias_rate_scale: map.f64("train.bias_rate_scale")?,
            hard_eta_start: map.f64("hardwta.eta_start")?,
        };
        if !(model.eta_start >= 0.0 && model.eta_end >= 0.0) {
            return Err(Error::config("train.eta_start", "learning rates must be non-negative"));
        }
        let unit = map.f64("attack.epsilon_unit")?;
        if !(unit > 0.0) {
            return Err(Error::config("attack.epsilon_unit", "must be positive"));
        }
        let scaled = |key: &str| -> Result<Vec<f64>> {
            let v: Vec<f64> = map.f64_list(key)?.into_iter().map(|e| e / unit).collect();
            if v.iter().any(|e| !(*e >= 0.0)) || v.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::config(key, "radii must be non-negative and ascending"));
            }
            Ok(v)
        };
        let steps = positive(map.usize("attack.steps")?, "attack.steps")?;
        let attack = AttackSettings {
            target: target(&map, "attack.target")?,
            epsilons: scaled("attack.epsilons")?,
            pgd: PgdConfig {
                epsilon: 0.0,
                steps,
                step_size: 0.0,
                random_start: map.bool("attack.random_start")?,
                restarts: positive(map.usize("attack.restarts")?, "attack.restarts")?,
                keep_best: true,
            },
            samples: map.usize("attack.samples")?,
            images: map.usize("attack.images")?,
        };
        let ratio = map.f64("attack.step_ratio")?;
        if !(ratio > 0.0) {
            return Err(Error::config("attack.step_ratio", "must be positive"));
        }
        let mut attack = attack;
        // a unit radius template; with_epsilon rescales the step
        attack.pgd.epsilon = 1.0;
        attack.pgd.step_size = ratio / steps as f64;

        let sigmas = map.f64_list("noise.sigmas")?;
        if sigmas.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::config("noise.sigmas", "must be non-negative"));
        }
        let theory_activations = map
            .string_list("theory.activations")?
            .iter()
            .map(|name| {
                let a = parse_activation(name, map.f64("model.base")?, map.f64("model.temperature")?, map.usize("model.power")?, "theory.activations")?;
                let bias = if a.is_exponential() { BiasMode::AdditiveLog } else { BiasMode::MultiplicativePrior };
                Ok((a, bias))
            })
            .collect::<Result<Vec<_>>>()?;
        let theory = TheorySettings {
            spec: map.path("theory.spec")?,
            n: positive(map.usize("theory.n")?, "theory.n")?,
            priors: map.f64_list("theory.priors")?,
            concentration: map.f64("theory.concentration")?,
            min_angle_deg: map.f64("theory.min_angle_deg")?,
            spec_seed: map.usize("theory.spec_seed")? as u64,
            samples: positive(map.usize("theory.samples")?, "theory.samples")?,
            eta_start: map.f64("theory.eta_start")?,
            activations: theory_activations,
            init: parse_init(&map.string("theory.init")?, "theory.init")?,
        };
        let interval = map.usize("posthoc.test_interval")?;
        Ok(Self {
            experiment,
            seeds,
            out: PathBuf::from(map.string("run.out")?),
            data,
            model,
            readout: optimizer(&map, "readout")?,
            mlp_hidden: positive(map.usize("mlp.hidden")?, "mlp.hidden")?,
            mlp: optimizer(&map, "mlp")?,
            input_layer: map.path("input.layer")?,
            input_readout: map.path("input.readout")?,
            input_mlp: map.path("input.mlp")?,
            test_interval: positive(interval, "posthoc.test_interval")? as u64,
            compare_mlp: map.bool("posthoc.compare_mlp")?,
            attack,
            noise_target: target(&map, "noise.target")?,
            noise_sigmas: sigmas,
            noise_samples: map.usize("noise.samples")?,
            interpolate_target: target(&map, "interpolate.target")?,
            interpolate_sample: map.usize("interpolate.sample")?,
            interpolate_epsilons: scaled("interpolate.epsilons")?,
            theory,
            map,
        })
    }

    /// Input files this run reads, which must exist at launch.
    pub fn required_inputs(&self) -> Vec<(&'static str, PathBuf)> {
        let mut v = Vec::new();
        let data = || {
            vec![
                ("data.train_images", self.data.train_images.clone()),
                ("data.train_labels", self.data.train_labels.clone()),
                ("data.test_images", self.data.test_images.clone()),
                ("data.test_labels", self.data.test_labels.clone()),
            ]
        };
        if self.experiment != Experiment::VerifyTheory {
            v.extend(data());
        } else if let Some(p) = &self.theory.spec {
            v.push(("theory.spec", p.clone()));
        }
        for (key, p) in [("input.layer", &self.input_layer), ("input.readout", &self.input_readout), ("input.mlp", &self.input_mlp)] {
            if let Some(p) = p {
                v.push((key, p.clone()));
            }
        }
        v
    }

    pub fn check_inputs_exist(&self) -> Result<()> {
        for (key, p) in self.required_inputs() {
            if !p.exists() {
                return Err(Error::config(key, format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_default_parses_and_resolves() {
        let map = ConfigMap::default();
        assert_eq!(map.snapshot().len(), KEYS.len());
        let cfg = RunConfig::resolve(Experiment::TrainSofthebb, map, None).unwrap();
        assert_eq!(cfg.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(cfg.model.activation, ActivationKind::BaseExp(1000.0));
        assert_eq!(cfg.data.train_images, PathBuf::from("data/mnist/train-images-idx3-ubyte"));
        assert!((cfg.attack.epsilons[3] - 16.0 / 255.0).abs() < 1e-15);
        let pgd = cfg.attack.pgd.with_epsilon(0.1);
        assert!((pgd.step_size - 2.5 * 0.1 / 40.0).abs() < 1e-15);
    }

    #[test]
    fn precedence_is_cli_over_file_over_default() {
        let mut map = ConfigMap::default();
        map.merge_toml("[model]\nk = 50\nbase = 10\n[train]\nepochs = 3\n").unwrap();
        map.merge_override("model.k=70").unwrap();
        map.merge_override("data.dataset=fashion").unwrap();
        assert_eq!(map.source("model.k"), Source::Cli);
        assert_eq!(map.source("train.epochs"), Source::File);
        assert_eq!(map.source("readout.lr"), Source::Default);
        let cfg = RunConfig::resolve(Experiment::Eval, map.clone(), Some("/d")).unwrap();
        assert_eq!(cfg.model.k, 70);
        assert_eq!(cfg.model.activation, ActivationKind::BaseExp(10.0));
        assert_eq!(cfg.data.test_labels, PathBuf::from("/d/fashion/t10k-labels-idx1-ubyte"));

        // the written snapshot reproduces the resolved values
        let mut again = ConfigMap::default();
        again.merge_toml(&map.to_toml()).unwrap();
        assert_eq!(RunConfig::resolve(Experiment::Eval, again, Some("/d")).unwrap().model, cfg.model);
    }

    #[test]
    fn errors_name_the_field() {
        let field = |r: Result<()>| match r {
            Err(Error::Config { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        let mut map = ConfigMap::default();
        assert_eq!(field(map.merge_override("model.kk=3")), "model.kk");
        assert_eq!(field(map.merge_override("model.k=\"many\"")), "model.k");
        assert_eq!(field(map.merge_toml("[train]\nepochs = 1.5\n")), "train.epochs");
        let mut bad = ConfigMap::default();
        bad.merge_override("model.k=0").unwrap();
        assert_eq!(field(RunConfig::resolve(Experiment::Eval, bad, None).map(|_| ())), "model.k");
        let mut bad = ConfigMap::default();
        bad.merge_override("model.activation=sigmoid").unwrap();
        assert_eq!(field(RunConfig::resolve(Experiment::Eval, bad, None).map(|_| ())), "model.activation");
        assert_eq!(field("train-everything".parse::<Experiment>().map(|_| ())), "experiment");
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
    }
}
