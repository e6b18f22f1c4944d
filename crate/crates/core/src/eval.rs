//! Neuron labeling, accuracy, the post-hoc cross-entropy protocol with
//! deterministic replay, and noise sweeps.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::adversarial::Pipeline;
use crate::dataset::{LabeledDataset, NormalizedView};
use crate::layer::{
    train_epoch, BiasMode, InferenceMode, LearningRateSchedule, Progress, StepEvent, TrainConfig,
    WeightInit, WtaLayer,
};
use crate::math::ActivationKind;
use crate::readout::{cross_entropy_loss, train_mlp_with, train_readout, LinearClassifier, Mlp2, MlpTrainable, OptimizerConfig};
use crate::{fmath, rng};
use crate::{Error, Result};

/// Label of a neuron that never won.
pub const INVALID_LABEL: usize = usize::MAX;

/// Layer states are checksummed every this many steps during training and
/// compared during replay.
pub const CHECKPOINT_INTERVAL: u64 = 5000;

pub const DEFAULT_TEST_INTERVAL: u64 = 1000;

/// Smoothing factor of the running-loss moving average.
pub const RUNNING_LOSS_SMOOTHING: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NeuronLabelMap {
    pub label_of: Vec<usize>,
    /// Row-major `K × C`.
    pub win_counts: Vec<u64>,
    classes: usize,
}

impl NeuronLabelMap {
    /// Builds the map from `K × C` win counts.
    pub fn from_counts(win_counts: Vec<u64>, classes: usize) -> Result<Self> {
        if classes == 0 || win_counts.len() % classes != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} win counts do not split into {classes} classes",
                win_counts.len()
            )));
        }
        let label_of = win_counts
            .chunks(classes)
            .map(|row| {
                let mut best = INVALID_LABEL;
                let mut most = 0;
                for (c, &n) in row.iter().enumerate() {
                    if n > most {
                        most = n;
                        best = c;
                    }
                }
                best
            })
            .collect();
        Ok(Self {
            label_of,
            win_counts,
            classes,
        })
    }

    /// A map with one synthetic win per labeled neuron.
    pub fn from_labels(label_of: Vec<usize>, classes: usize) -> Self {
        let mut win_counts = vec![0; label_of.len() * classes];
        for (k, &l) in label_of.iter().enumerate() {
            if l != INVALID_LABEL {
                win_counts[k * classes + l] = 1;
            }
        }
        Self {
            label_of,
            win_counts,
            classes,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn neurons(&self) -> usize {
        self.label_of.len()
    }

    pub fn valid_neurons(&self) -> usize {
        self.label_of.iter().filter(|&&l| l != INVALID_LABEL).count()
    }

    pub fn wins(&self, k: usize, c: usize) -> u64 {
        self.win_counts[k * self.classes + c]
    }
}

fn winner(wta: &WtaLayer, x_star: &[f64]) -> Result<usize> {
    let u = wta.forward_linear(x_star)?;
    // hard inference has the same argmax as the posterior without the softmax
    Ok(wta.posterior_from_linear(u, InferenceMode::Hard)?.winner)
}

pub fn assign_neuron_labels(wta: &WtaLayer, data: &NormalizedView, classes: usize) -> Result<NeuronLabelMap> {
    let mut counts = vec![0u64; wta.neurons() * classes];
    for r in 0..data.len() {
        let label = data.label(r);
        if label >= classes {
            return Err(Error::InvalidParameter(format!("label {label} outside 0..{classes}")));
        }
        counts[winner(wta, data.row(r))? * classes + label] += 1;
    }
    NeuronLabelMap::from_counts(counts, classes)
}

/// Label of the highest-scoring validly labeled neuron.
pub fn predict_1layer(wta: &WtaLayer, labels: &NeuronLabelMap, x_star: &[f64]) -> Result<usize> {
    let u = wta.forward_linear(x_star)?;
    let scores = wta.scores(&u);
    let mut best: Option<(usize, f64)> = None;
    for (k, &s) in scores.iter().enumerate() {
        if labels.label_of[k] != INVALID_LABEL && best.map_or(true, |(_, b)| s > b) {
            best = Some((k, s));
        }
    }
    best.map(|(k, _)| labels.label_of[k]).ok_or(Error::NoValidNeurons)
}

pub fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}

pub fn evaluate_1layer(wta: &WtaLayer, labels: &NeuronLabelMap, data: &NormalizedView) -> Result<f64> {
    let mut predicted = Vec::with_capacity(data.len());
    for r in 0..data.len() {
        predicted.push(predict_1layer(wta, labels, data.row(r))?);
    }
    let truth: Vec<usize> = (0..data.len()).map(|r| data.label(r)).collect();
    Ok(accuracy(&predicted, &truth))
}

pub fn evaluate_readout(wta: &WtaLayer, readout: &LinearClassifier, data: &NormalizedView) -> Result<f64> {
    let mut hits = 0;
    for r in 0..data.len() {
        let y = wta.forward_posterior(data.row(r), InferenceMode::Soft)?.posteriors;
        if readout.predict(&y) == data.label(r) {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len().max(1) as f64)
}

/// Accuracy of a pipeline on raw samples. A sample the pipeline cannot
/// process counts as a miss.
pub fn pipeline_accuracy(pipeline: &dyn Pipeline, data: &LabeledDataset) -> f64 {
    let hits = (0..data.len())
        .filter(|&i| pipeline.predict(data.sample(i)).ok() == Some(data.label(i)))
        .count();
    hits as f64 / data.len().max(1) as f64
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, fmath::sqrt(var))
}

/// Everything needed to train one SoftHebb layer.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SoftHebbConfig {
    pub neurons: usize,
    pub activation: ActivationKind,
    pub bias_mode: BiasMode,
    pub init: WeightInit,
    pub train: TrainConfig,
    pub epochs: usize,
}

impl SoftHebbConfig {
    /// Base-1000 soft WTA with learned log-prior biases and η decaying
    /// linearly from 0.03 to 0 over the whole run.
    pub fn soft_default(neurons: usize, epochs: usize, samples_per_epoch: usize) -> Self {
        Self {
            neurons,
            activation: ActivationKind::BaseExp(1000.0),
            bias_mode: BiasMode::AdditiveLog,
            init: WeightInit::UniformSphere,
            train: TrainConfig::new(
                LearningRateSchedule::Linear {
                    start: 0.03,
                    end: 0.0,
                    total_steps: (epochs * samples_per_epoch) as u64,
                },
                InferenceMode::Soft,
            ),
            epochs,
        }
    }

    /// The hard-WTA baseline: no biases, η decaying linearly from 0.05.
    pub fn hard_default(neurons: usize, epochs: usize, samples_per_epoch: usize) -> Self {
        let mut cfg = Self::soft_default(neurons, epochs, samples_per_epoch);
        cfg.bias_mode = BiasMode::Disabled;
        cfg.train.mode = InferenceMode::Hard;
        cfg.train.schedule = LearningRateSchedule::Linear {
            start: 0.05,
            end: 0.0,
            total_steps: (epochs * samples_per_epoch) as u64,
        };
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplayRecord {
    pub init_seed: u64,
    /// Per-epoch presentation orders over dataset indices.
    pub data_permutations: Vec<Vec<usize>>,
    pub schedule: LearningRateSchedule,
    pub config: SoftHebbConfig,
    /// `(steps completed, layer checksum)`.
    pub checkpoints: Vec<(u64, u64)>,
}

fn init_layer(cfg: &SoftHebbConfig, init_seed: u64, data: &NormalizedView) -> Result<WtaLayer> {
    WtaLayer::initialize(
        cfg.neurons,
        cfg.activation,
        cfg.bias_mode,
        cfg.init,
        Some(data),
        &mut rng::seeded(init_seed),
    )
}

/// Trains a layer from scratch. The init draws from `derive_seed(seed, 0)`
/// and epoch `e` presents samples in the order drawn from
/// `derive_seed(seed, e + 1)`.
pub fn train_softhebb(
    cfg: &SoftHebbConfig,
    data: &NormalizedView,
    seed: u64,
    mut observer: Option<&mut crate::layer::Observer<'_>>,
) -> Result<(WtaLayer, ReplayRecord)> {
    let init_seed = rng::derive_seed(seed, 0);
    let mut layer = init_layer(cfg, init_seed, data)?;
    let mut record = ReplayRecord {
        init_seed,
        data_permutations: Vec::with_capacity(cfg.epochs),
        schedule: cfg.train.schedule.clone(),
        config: cfg.clone(),
        checkpoints: vec![(0, layer.checksum())],
    };
    let mut progress = Progress::default();
    for e in 0..cfg.epochs {
        let order = rng::permutation(data.source_len(), &mut rng::seeded(rng::derive_seed(seed, e as u64 + 1)));
        let checkpoints = &mut record.checkpoints;
        let mut obs = |ev: &StepEvent<'_>| -> Result<()> {
            if (ev.step + 1) % CHECKPOINT_INTERVAL == 0 {
                checkpoints.push((ev.step + 1, ev.layer.checksum()));
            }
            match observer.as_deref_mut() {
                Some(o) => o(ev),
                None => Ok(()),
            }
        };
        train_epoch(&mut layer, data, &order, &cfg.train, &mut progress, Some(&mut obs))?;
        record.data_permutations.push(order);
    }
    if record.checkpoints.last().map(|c| c.0) != Some(progress.step) {
        record.checkpoints.push((progress.step, layer.checksum()));
    }
    Ok((layer, record))
}

/// The layer exactly as it was before the first recorded step.
pub fn replay_initial_layer(record: &ReplayRecord, data: &NormalizedView) -> Result<WtaLayer> {
    let layer = init_layer(&record.config, record.init_seed, data)?;
    verify_checkpoint(record, 0, &layer)?;
    Ok(layer)
}

fn verify_checkpoint(record: &ReplayRecord, step: u64, layer: &WtaLayer) -> Result<()> {
    match record.checkpoints.iter().find(|c| c.0 == step) {
        Some(&(_, sum)) if sum != layer.checksum() => Err(Error::ReplayMismatch { step }),
        _ => Ok(()),
    }
}

/// Re-runs the recorded training on `layer` (fresh from
/// [`replay_initial_layer`]), checking every recorded checkpoint.
pub fn replay_from(
    layer: &mut WtaLayer,
    record: &ReplayRecord,
    data: &NormalizedView,
    mut observer: Option<&mut crate::layer::Observer<'_>>,
) -> Result<()> {
    let mut cfg = record.config.train.clone();
    cfg.schedule = record.schedule.clone();
    let mut progress = Progress::default();
    for order in &record.data_permutations {
        let mut obs = |ev: &StepEvent<'_>| -> Result<()> {
            if (ev.step + 1) % CHECKPOINT_INTERVAL == 0 {
                verify_checkpoint(record, ev.step + 1, ev.layer)?;
            }
            match observer.as_deref_mut() {
                Some(o) => o(ev),
                None => Ok(()),
            }
        };
        train_epoch(layer, data, order, &cfg, &mut progress, Some(&mut obs))?;
    }
    verify_checkpoint(record, progress.step, layer)
}

pub fn replay(record: &ReplayRecord, data: &NormalizedView) -> Result<WtaLayer> {
    let mut layer = replay_initial_layer(record, data)?;
    replay_from(&mut layer, record, data, None)?;
    Ok(layer)
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossTrace {
    pub step: Vec<u64>,
    pub running_loss: Vec<f64>,
    pub running_smoothed: Vec<f64>,
    /// Steps completed when each test loss was measured.
    pub test_step: Vec<u64>,
    pub test_loss: Vec<f64>,
}

impl LossTrace {
    fn push_running(&mut self, step: u64, loss: f64) {
        let smoothed = match self.running_smoothed.last() {
            Some(&s) => RUNNING_LOSS_SMOOTHING * s + (1.0 - RUNNING_LOSS_SMOOTHING) * loss,
            None => loss,
        };
        self.step.push(step);
        self.running_loss.push(loss);
        self.running_smoothed.push(smoothed);
    }

    pub fn is_consistent(&self) -> bool {
        self.step.len() == self.running_loss.len()
            && self.step.len() == self.running_smoothed.len()
            && self.test_step.len() == self.test_loss.len()
            && self.running_loss.iter().chain(&self.test_loss).all(|v| v.is_finite())
    }
}

/// Means of `windows` contiguous, near-equal chunks of `values`.
pub fn window_means(values: &[f64], windows: usize) -> Vec<f64> {
    let n = values.len();
    (0..windows)
        .map(|w| (w * n / windows, (w + 1) * n / windows))
        .filter(|(a, b)| b > a)
        .map(|(a, b)| values[a..b].iter().sum::<f64>() / (b - a) as f64)
        .collect()
}

pub fn non_increasing(values: &[f64], tolerance: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + tolerance)
}

fn mean_test_loss(wta: &WtaLayer, readout: &LinearClassifier, test: &NormalizedView) -> Result<f64> {
    let mut total = 0.0;
    for r in 0..test.len() {
        let y = wta.forward_posterior(test.row(r), InferenceMode::Soft)?.posteriors;
        total += cross_entropy_loss(&readout.predict_proba(&y), test.label(r))?;
    }
    Ok(total / test.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosthocConfig {
    pub softhebb: SoftHebbConfig,
    pub readout: OptimizerConfig,
    pub test_interval: u64,
}

#[derive(Debug, Clone)]
pub struct PosthocRun {
    pub trace: LossTrace,
    pub layer: WtaLayer,
    pub readout: LinearClassifier,
    pub record: ReplayRecord,
}

/// Phase (c) alone: replays `record` while scoring the frozen `readout` on
/// each training sample as it arrives and on `test` every `test_interval`
/// steps (and before the first).
pub fn replay_with_loss(
    record: &ReplayRecord,
    readout: &LinearClassifier,
    train: &NormalizedView,
    test: &NormalizedView,
    test_interval: u64,
) -> Result<(WtaLayer, LossTrace)> {
    if test_interval == 0 {
        return Err(Error::InvalidParameter("test interval must be positive".into()));
    }
    let mut layer = replay_initial_layer(record, train)?;
    let mut trace = LossTrace::default();
    trace.test_step.push(0);
    trace.test_loss.push(mean_test_loss(&layer, readout, test)?);
    let mut obs = |ev: &StepEvent<'_>| -> Result<()> {
        let p = readout.predict_proba(&ev.output.posteriors);
        trace.push_running(ev.step, cross_entropy_loss(&p, train.label(ev.row))?);
        if (ev.step + 1) % test_interval == 0 {
            trace.test_step.push(ev.step + 1);
            trace.test_loss.push(mean_test_loss(ev.layer, readout, test)?);
        }
        Ok(())
    };
    replay_from(&mut layer, record, train, Some(&mut obs))?;
    Ok((layer, trace))
}

/// The three-phase protocol: unsupervised training, a readout fitted to the
/// frozen result, then a verified replay of the training that logs the
/// readout's cross-entropy along the way.
pub fn posthoc_cross_entropy(
    cfg: &PosthocConfig,
    train: &NormalizedView,
    test: &NormalizedView,
    classes: usize,
    seed: u64,
) -> Result<PosthocRun> {
    let (trained, record) = train_softhebb(&cfg.softhebb, train, seed, None)?;
    let readout = train_readout(&trained, train, classes, &cfg.readout, rng::derive_seed(seed, u64::MAX))?;
    let (layer, trace) = replay_with_loss(&record, &readout, train, test, cfg.test_interval)?;
    if layer.checksum() != trained.checksum() {
        return Err(Error::ReplayMismatch {
            step: record.checkpoints.last().map_or(0, |c| c.0),
        });
    }
    Ok(PosthocRun {
        trace,
        layer,
        readout,
        record,
    })
}

/// Trains an MLP on raw samples while logging its running loss and its
/// test loss every `test_interval` samples (and before the first).
pub fn mlp_loss_trace(
    model: &mut Mlp2,
    train: &LabeledDataset,
    test: &LabeledDataset,
    opt: &OptimizerConfig,
    seed: u64,
    test_interval: u64,
) -> Result<LossTrace> {
    if test_interval == 0 {
        return Err(Error::InvalidParameter("test interval must be positive".into()));
    }
    let mut trace = LossTrace::default();
    let test_loss = |m: &Mlp2| -> Result<f64> {
        let mut total = 0.0;
        for i in 0..test.len() {
            total += cross_entropy_loss(&m.predict_proba(test.sample(i)), test.label(i))?;
        }
        Ok(total / test.len().max(1) as f64)
    };
    let mut obs = |step: u64, _i: usize, loss: f64, m: &Mlp2| -> Result<()> {
        // the model only changes between minibatches, so a test point taken
        // here reflects all `step` samples seen so far when step is a
        // multiple of the minibatch
        if step % test_interval == 0 {
            trace.test_step.push(step);
            trace.test_loss.push(test_loss(m)?);
        }
        trace.push_running(step, loss);
        Ok(())
    };
    train_mlp_with(model, train, opt, MlpTrainable::All, seed, Some(&mut obs))?;
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePoint {
    pub sigma: f64,
    pub accuracy: f64,
    pub samples: usize,
}

/// Accuracy under i.i.d. Gaussian pixel noise, clipped to `[0, 1]` before the
/// pipeline sees it. Sample `i` uses the noise stream `derive_seed(seed, i)`
/// at every sigma.
pub fn noise_robustness(pipeline: &dyn Pipeline, data: &LabeledDataset, sigmas: &[f64], seed: u64) -> Result<Vec<NoisePoint>> {
    if let Some(s) = sigmas.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::InvalidParameter(format!("noise std {s} must be non-negative")));
    }
    let mut hits = vec![0usize; sigmas.len()];
    let mut noisy = vec![0.0; data.dim()];
    for i in 0..data.len() {
        let x = data.sample(i);
        for (j, &sigma) in sigmas.iter().enumerate() {
            let mut r = rng::seeded(rng::derive_seed(seed, i as u64));
            for (o, &p) in noisy.iter_mut().zip(x) {
                *o = (p + sigma * rng::normal(&mut r)).clamp(0.0, 1.0);
            }
            if pipeline.predict(&noisy).ok() == Some(data.label(i)) {
                hits[j] += 1;
            }
        }
    }
    Ok(sigmas
        .iter()
        .zip(hits)
        .map(|(&sigma, h)| NoisePoint {
            sigma,
            accuracy: h as f64 / data.len().max(1) as f64,
            samples: data.len(),
        })
        .collect())
}
