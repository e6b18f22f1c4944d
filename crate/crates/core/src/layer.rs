//! The soft winner-take-all layer: cosine pre-activations, posterior
//! inference, and the two local plasticity rules.
//!
//! Posterior logits are `z_k = s·u_k + ln π_k` where `s` is the activation's
//! log-scale and `π_k` the neuron's prior (`e^{w_0k}` for additive-log biases,
//! `w_0k` itself for multiplicative priors, `1/K` when disabled). Rectified
//! activations use `y_k ∝ h(u_k)·π_k` directly.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::NormalizedView;
use crate::fmath;
use crate::math::{self, ActivationKind};
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Below this normalizer a rectified posterior is considered undefined.
pub const POSTERIOR_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BiasMode {
    /// `w_0k` is a log prior, trained by the exponential bias rule.
    AdditiveLog,
    /// `w_0k` is the prior itself, trained as a running average of `y_k`.
    MultiplicativePrior,
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum InferenceMode {
    #[default]
    Soft,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum WeightInit {
    /// Isotropic Gaussian rows, normalized.
    #[default]
    UniformSphere,
    /// Rows copied from distinct randomly chosen training samples.
    RandomSamples,
    /// First row a random sample, each next row the sample least similar to
    /// all rows chosen so far (over a random candidate pool).
    FarthestPointSamples,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerOutput {
    pub pre_activations: Vec<f64>,
    pub posteriors: Vec<f64>,
    /// Natural log of `posteriors`; `-inf` where the posterior is exactly 0.
    pub log_posteriors: Vec<f64>,
    pub winner: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WtaLayer {
    k: usize,
    n: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    pub activation: ActivationKind,
    pub bias_mode: BiasMode,
}

fn initial_bias(mode: BiasMode, k: usize) -> f64 {
    match mode {
        BiasMode::MultiplicativePrior => 1.0 / k as f64,
        BiasMode::AdditiveLog | BiasMode::Disabled => fmath::ln(1.0 / k as f64),
    }
}

impl WtaLayer {
    pub fn from_parts(
        k: usize,
        n: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: ActivationKind,
        bias_mode: BiasMode,
    ) -> Result<Self> {
        activation.validate()?;
        if k == 0 || n == 0 {
            return Err(Error::InvalidParameter(format!("layer shape {k}x{n}")));
        }
        if weights.len() != k * n {
            return Err(Error::DimensionMismatch {
                expected: k * n,
                found: weights.len(),
            });
        }
        if biases.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: biases.len(),
            });
        }
        Ok(Self {
            k,
            n,
            weights,
            biases,
            activation,
            bias_mode,
        })
    }

    /// Rows uniform on the unit sphere, biases at the uniform prior.
    pub fn random(
        k: usize,
        n: usize,
        activation: ActivationKind,
        bias_mode: BiasMode,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut weights = Vec::with_capacity(k * n);
        for _ in 0..k {
            let mut row: Vec<f64> = (0..n).map(|_| rng::normal(rng)).collect();
            math::l2_normalize_in_place(&mut row)?;
            weights.extend_from_slice(&row);
        }
        Self::from_parts(k, n, weights, vec![initial_bias(bias_mode, k); k], activation, bias_mode)
    }

    /// Initializes the weights per `init`. The sample-based schemes need
    /// `data` with at least `k` rows.
    pub fn initialize(
        k: usize,
        activation: ActivationKind,
        bias_mode: BiasMode,
        init: WeightInit,
        data: Option<&NormalizedView>,
        rng: &mut Rng,
    ) -> Result<Self> {
        let need_data = || {
            data.filter(|d| d.len() >= k).ok_or_else(|| {
                Error::InvalidParameter(format!("sample-based init needs at least {k} samples"))
            })
        };
        match init {
            WeightInit::UniformSphere => {
                let n = data
                    .map(|d| d.dim())
                    .ok_or_else(|| Error::InvalidParameter("input dimension unknown".into()))?;
                Self::random(k, n, activation, bias_mode, rng)
            }
            WeightInit::RandomSamples => {
                let d = need_data()?;
                let picks = rng::permutation(d.len(), rng);
                let mut weights = Vec::with_capacity(k * d.dim());
                for &r in &picks[..k] {
                    weights.extend_from_slice(d.row(r));
                }
                Self::from_parts(k, d.dim(), weights, vec![initial_bias(bias_mode, k); k], activation, bias_mode)
            }
            WeightInit::FarthestPointSamples => {
                let d = need_data()?;
                let pool_size = d.len().min(k.saturating_mul(50).max(1000));
                let pool: Vec<usize> = rng::permutation(d.len(), rng)[..pool_size].to_vec();
                let mut closest = vec![f64::NEG_INFINITY; pool_size];
                let mut chosen = pool[0];
                let mut weights = Vec::with_capacity(k * d.dim());
                for _ in 0..k {
                    let c = d.row(chosen);
                    weights.extend_from_slice(c);
                    for (j, &r) in pool.iter().enumerate() {
                        closest[j] = closest[j].max(math::dot(c, d.row(r)));
                    }
                    chosen = pool[math::argmax(&closest.iter().map(|s| -s).collect::<Vec<_>>())];
                }
                Self::from_parts(k, d.dim(), weights, vec![initial_bias(bias_mode, k); k], activation, bias_mode)
            }
        }
    }

    pub fn neurons(&self) -> usize {
        self.k
    }

    pub fn inputs(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.n..(k + 1) * self.n]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.weights[k * self.n..(k + 1) * self.n]
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn row_norm(&self, k: usize) -> f64 {
        math::norm(self.row(k))
    }

    /// Prior `π_k` implied by the bias (not renormalized).
    pub fn prior(&self, k: usize) -> f64 {
        match self.bias_mode {
            BiasMode::AdditiveLog => fmath::exp(self.biases[k]),
            BiasMode::MultiplicativePrior => self.biases[k],
            BiasMode::Disabled => 1.0 / self.k as f64,
        }
    }

    fn log_prior(&self, k: usize) -> f64 {
        match self.bias_mode {
            BiasMode::AdditiveLog => self.biases[k],
            BiasMode::MultiplicativePrior => fmath::ln(self.biases[k]),
            BiasMode::Disabled => 0.0,
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `u_k = cos(w_k, x*)`.
    pub fn forward_linear(&self, x_star: &[f64]) -> Result<Vec<f64>> {
        let mut u = vec![0.0; self.k];
        self.forward_linear_into(x_star, &mut u)?;
        Ok(u)
    }

    pub fn forward_linear_into(&self, x_star: &[f64], u: &mut [f64]) -> Result<()> {
        self.check_input(x_star)?;
        let xn = math::norm(x_star);
        for (k, uk) in u.iter_mut().enumerate() {
            let w = self.row(k);
            let (mut d, mut ww) = (0.0, 0.0);
            for (wi, xi) in w.iter().zip(x_star) {
                d += wi * xi;
                ww += wi * wi;
            }
            let denom = fmath::sqrt(ww) * xn;
            if !(denom >= math::NORM_FLOOR) {
                return Err(Error::ZeroVector {
                    norm: fmath::sqrt(ww),
                    floor: math::NORM_FLOOR,
                });
            }
            *uk = (d / denom).clamp(-1.0, 1.0);
        }
        Ok(())
    }

    /// Scores whose argmax is the winner: `s·u_k + ln π_k` for exponential
    /// kinds, `h(u_k)·π_k` otherwise.
    pub fn scores(&self, u: &[f64]) -> Vec<f64> {
        match self.activation.log_scale() {
            Some(s) => u
                .iter()
                .enumerate()
                .map(|(k, &uk)| s * uk + self.log_prior(k))
                .collect(),
            None => u
                .iter()
                .enumerate()
                .map(|(k, &uk)| math::activation(uk, self.activation) * self.prior(k))
                .collect(),
        }
    }

    pub fn forward_posterior(&self, x_star: &[f64], mode: InferenceMode) -> Result<LayerOutput> {
        let u = self.forward_linear(x_star)?;
        self.posterior_from_linear(u, mode)
    }

    pub fn posterior_from_linear(&self, u: Vec<f64>, mode: InferenceMode) -> Result<LayerOutput> {
        let scores = self.scores(&u);
        let k = self.k;
        let (posteriors, log_posteriors, winner) = match (mode, self.activation.is_exponential()) {
            (InferenceMode::Hard, exponential) => {
                // A rectified layer with every h(u) = 0 falls back to argmax u.
                let winner = if !exponential && scores.iter().all(|&s| s <= 0.0) {
                    math::argmax(&u)
                } else {
                    math::argmax(&scores)
                };
                let mut y = vec![0.0; k];
                let mut ly = vec![f64::NEG_INFINITY; k];
                y[winner] = 1.0;
                ly[winner] = 0.0;
                (y, ly, winner)
            }
            (InferenceMode::Soft, true) => {
                let mut y = vec![0.0; k];
                let mut ly = vec![0.0; k];
                math::softmax_into(&scores, ActivationKind::NaturalExp, &mut y)?;
                math::log_softmax_into(&scores, &mut ly);
                let winner = math::argmax(&scores);
                (y, ly, winner)
            }
            (InferenceMode::Soft, false) => {
                let total: f64 = scores.iter().sum();
                if !(total >= POSTERIOR_FLOOR) {
                    return Err(Error::DegeneratePosterior(total));
                }
                let y: Vec<f64> = scores.iter().map(|s| s / total).collect();
                let ly = y.iter().map(|&p| fmath::ln(p)).collect();
                (y, ly, math::argmax(&scores))
            }
        };
        Ok(LayerOutput {
            pre_activations: u,
            posteriors,
            log_posteriors,
            winner,
        })
    }

    /// `Δw_ik = η·y_k·(x_i − u_k·w_ik)`, applied in place. Returns the
    /// Frobenius norm of the applied delta.
    pub fn hebbian_weight_update(&mut self, x: &[f64], out: &LayerOutput, eta: f64) -> Result<f64> {
        self.check_input(x)?;
        if out.posteriors.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                found: out.posteriors.len(),
            });
        }
        let mut sq = 0.0;
        for k in 0..self.k {
            let y = out.posteriors[k];
            if y == 0.0 {
                continue;
            }
            let (ey, u) = (eta * y, out.pre_activations[k]);
            for (w, &xi) in self.row_mut(k).iter_mut().zip(x) {
                let d = ey * (xi - u * *w);
                *w += d;
                sq += d * d;
            }
        }
        Ok(fmath::sqrt(sq))
    }

    /// Additive-log: `Δw_0k = η·e^{−w_0k}·(y_k − e^{w_0k})`, evaluated as
    /// `η·(e^{ln y_k − w_0k} − 1)` so a strongly negative bias cannot overflow.
    /// Multiplicative: `w_0k ← (1−η)·w_0k + η·y_k`. Disabled: no-op.
    pub fn bias_update(&mut self, out: &LayerOutput, eta: f64) {
        match self.bias_mode {
            BiasMode::AdditiveLog => {
                for (b, &ly) in self.biases.iter_mut().zip(&out.log_posteriors) {
                    *b += eta * (fmath::exp(ly - *b) - 1.0);
                }
            }
            BiasMode::MultiplicativePrior => {
                for (b, &y) in self.biases.iter_mut().zip(&out.posteriors) {
                    *b = (1.0 - eta) * *b + eta * y;
                }
            }
            BiasMode::Disabled => {}
        }
    }

    /// FNV-1a over the bit patterns of every parameter.
    pub fn checksum(&self) -> u64 {
        checksum_f64(self.weights.iter().chain(&self.biases).copied())
    }
}

pub fn checksum_f64(values: impl IntoIterator<Item = f64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LearningRateSchedule {
    Constant(f64),
    /// Linear in the global step from `start` (step 0) to `end` (step
    /// `total_steps`), held at `end` afterwards.
    Linear { start: f64, end: f64, total_steps: u64 },
    /// One constant rate per epoch; the last entry repeats.
    PerEpoch(Vec<f64>),
}

impl LearningRateSchedule {
    pub fn eta(&self, step: u64, epoch: usize) -> f64 {
        match self {
            LearningRateSchedule::Constant(e) => *e,
            LearningRateSchedule::Linear {
                start,
                end,
                total_steps,
            } => {
                if *total_steps == 0 {
                    return *end;
                }
                let f = (step as f64 / *total_steps as f64).min(1.0);
                start + (end - start) * f
            }
            LearningRateSchedule::PerEpoch(rates) => rates
                .get(epoch)
                .or(rates.last())
                .copied()
                .unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub schedule: LearningRateSchedule,
    pub mode: InferenceMode,
    /// Bias rate as a multiple of the weight rate.
    pub bias_rate_scale: f64,
}

impl TrainConfig {
    pub fn new(schedule: LearningRateSchedule, mode: InferenceMode) -> Self {
        Self {
            schedule,
            mode,
            bias_rate_scale: 1.0,
        }
    }
}

/// Global position in a multi-epoch run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Progress {
    pub step: u64,
    pub epoch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub steps: u64,
    pub mean_delta_norm: f64,
    pub final_eta: f64,
}

/// Handed to the observer after each update. `output` is the forward pass
/// that drove the update, i.e. the layer's response before it changed.
pub struct StepEvent<'a> {
    pub step: u64,
    pub row: usize,
    pub eta: f64,
    pub output: &'a LayerOutput,
    pub layer: &'a WtaLayer,
}

pub type Observer<'o> = dyn FnMut(&StepEvent<'_>) -> Result<()> + 'o;

/// One pass over `order` (dataset indices; skipped blank frames are passed
/// over). Weights and biases are both updated from the same forward pass.
pub fn train_epoch(
    layer: &mut WtaLayer,
    data: &NormalizedView,
    order: &[usize],
    cfg: &TrainConfig,
    progress: &mut Progress,
    mut observer: Option<&mut Observer<'_>>,
) -> Result<EpochStats> {
    let mut stats = EpochStats {
        steps: 0,
        mean_delta_norm: 0.0,
        final_eta: cfg.schedule.eta(progress.step, progress.epoch),
    };
    let mut delta_sum = 0.0;
    for row in data.rows_in_order(order) {
        let eta = cfg.schedule.eta(progress.step, progress.epoch);
        let x = data.row(row);
        let out = layer.forward_posterior(x, cfg.mode)?;
        delta_sum += layer.hebbian_weight_update(x, &out, eta)?;
        layer.bias_update(&out, eta * cfg.bias_rate_scale);
        if let Some(obs) = observer.as_deref_mut() {
            obs(&StepEvent {
                step: progress.step,
                row,
                eta,
                output: &out,
                layer,
            })?;
        }
        progress.step += 1;
        stats.steps += 1;
        stats.final_eta = eta;
    }
    if stats.steps > 0 {
        stats.mean_delta_norm = delta_sum / stats.steps as f64;
    }
    progress.epoch += 1;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{preprocess, BlankFramePolicy, LabeledDataset};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn layer2(weights: [f64; 4], biases: [f64; 2], kind: ActivationKind) -> WtaLayer {
        WtaLayer::from_parts(2, 2, weights.to_vec(), biases.to_vec(), kind, BiasMode::AdditiveLog)
            .unwrap()
    }

    #[test]
    fn forward_linear_examples() {
        let l = layer2([1.0, 0.0, 0.0, 1.0], [0.0; 2], ActivationKind::NaturalExp);
        let x = math::l2_normalize(&[1.0, 1.0]).unwrap();
        let u = l.forward_linear(&x).unwrap();
        let via_core = math::cosine_similarity(&[1.0, 0.0], &x).unwrap();
        assert!(close(u[0], via_core, 1e-15) && close(u[1], via_core, 1e-15));
        assert!(close(u[0], core::f64::consts::FRAC_1_SQRT_2, 1e-15));
        assert_eq!(l.forward_linear(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(
            l.forward_linear(&[1.0, 0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn posterior_examples() {
        let half = fmath::ln(0.5);
        let l = layer2([1.0, 0.0, 0.0, 1.0], [half, half], ActivationKind::NaturalExp);
        let soft = l.forward_posterior(&[1.0, 0.0], InferenceMode::Soft).unwrap();
        let logistic = 1.0 / (1.0 + fmath::exp(-1.0));
        assert!(close(soft.posteriors[0], logistic, 1e-15));
        assert!(close(soft.posteriors[0], 0.7310586, 1e-7));
        assert!(close(soft.posteriors[1], 0.2689414, 1e-7));
        let hard = l.forward_posterior(&[1.0, 0.0], InferenceMode::Hard).unwrap();
        assert_eq!(hard.posteriors, vec![1.0, 0.0]);

        let l = layer2([1.0, 0.0, 1.0, 0.0], [fmath::ln(0.7), fmath::ln(0.3)], ActivationKind::NaturalExp);
        let y = l.forward_posterior(&[0.6, 0.8], InferenceMode::Soft).unwrap().posteriors;
        assert!(close(y[0], 0.7, 1e-12) && close(y[1], 0.3, 1e-12));
    }

    #[test]
    fn multiplicative_prior_posterior() {
        let l = WtaLayer::from_parts(
            2,
            2,
            vec![1.0, 0.0, 0.6, 0.8],
            vec![0.25, 0.75],
            ActivationKind::Relu,
            BiasMode::MultiplicativePrior,
        )
        .unwrap();
        let y = l.forward_posterior(&[1.0, 0.0], InferenceMode::Soft).unwrap().posteriors;
        // h(u) = (1, 0.6), priors (0.25, 0.75)
        let expected0 = 0.25 / (0.25 + 0.6 * 0.75);
        assert!(close(y[0], expected0, 1e-15));
        assert!(matches!(
            l.forward_posterior(&[-1.0, 0.0], InferenceMode::Soft),
            Err(Error::DegeneratePosterior(_))
        ));
    }

    #[test]
    fn hebbian_examples() {
        let mut l = layer2([1.0, 0.0, 0.6, 0.8], [0.0; 2], ActivationKind::NaturalExp);
        let out = LayerOutput {
            pre_activations: vec![0.0, 0.8],
            posteriors: vec![0.5, 0.0],
            log_posteriors: vec![fmath::ln(0.5), f64::NEG_INFINITY],
            winner: 0,
        };
        l.hebbian_weight_update(&[0.0, 1.0], &out, 0.1).unwrap();
        assert_eq!(l.row(0), &[1.0, 0.05]);
        assert_eq!(l.row(1), &[0.6, 0.8]);

        let x = [0.6, 0.8];
        let mut fixed = layer2([0.6, 0.8, 1.0, 0.0], [0.0; 2], ActivationKind::NaturalExp);
        let out = fixed.forward_posterior(&x, InferenceMode::Soft).unwrap();
        assert_eq!(out.pre_activations[0], 1.0);
        fixed.hebbian_weight_update(&x, &out, 0.3).unwrap();
        assert_eq!(fixed.row(0), &[0.6, 0.8]);
    }

    #[test]
    fn bias_examples() {
        let half = fmath::ln(0.5);
        let mk = |y: f64| LayerOutput {
            pre_activations: vec![0.0],
            posteriors: vec![y],
            log_posteriors: vec![fmath::ln(y)],
            winner: 0,
        };
        let mut l = WtaLayer::from_parts(1, 1, vec![1.0], vec![half], ActivationKind::NaturalExp, BiasMode::AdditiveLog).unwrap();
        l.bias_update(&mk(1.0), 0.1);
        assert!(close(l.biases()[0] - half, 0.1, 1e-15));
        l.biases_mut()[0] = half;
        l.bias_update(&mk(0.0), 0.1);
        assert!(close(l.biases()[0] - half, -0.1, 1e-15));
        l.biases_mut()[0] = half;
        l.bias_update(&mk(0.5), 0.1);
        assert!(close(l.biases()[0], half, 1e-15));
        // far below the representable prior range, still finite
        l.biases_mut()[0] = -800.0;
        l.bias_update(&mk(0.0), 0.1);
        assert!(l.biases()[0].is_finite());
    }

    #[test]
    fn multiplicative_prior_tracks_running_mean() {
        let mut l = WtaLayer::from_parts(1, 1, vec![1.0], vec![0.5], ActivationKind::Relu, BiasMode::MultiplicativePrior).unwrap();
        let out = LayerOutput {
            pre_activations: vec![1.0],
            posteriors: vec![1.0],
            log_posteriors: vec![0.0],
            winner: 0,
        };
        l.bias_update(&out, 0.25);
        assert_eq!(l.biases()[0], 0.625);
    }

    #[test]
    fn schedule_is_linear_in_global_step() {
        let s = LearningRateSchedule::Linear {
            start: 0.03,
            end: 0.0,
            total_steps: 100,
        };
        assert_eq!(s.eta(0, 0), 0.03);
        assert!(close(s.eta(50, 0), 0.015, 1e-15));
        assert_eq!(s.eta(100, 0), 0.0);
        assert_eq!(s.eta(500, 3), 0.0);
        let p = LearningRateSchedule::PerEpoch(vec![0.1, 0.05]);
        assert_eq!((p.eta(9, 0), p.eta(9, 1), p.eta(9, 7)), (0.1, 0.05, 0.05));
    }

    fn view_of(rows: &[&[f64]]) -> NormalizedView {
        let n = rows[0].len();
        let px: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let ds = LabeledDataset::new(1, n, 1, px, vec![0; rows.len()]).unwrap();
        preprocess(&ds, BlankFramePolicy::Skip).unwrap()
    }

    #[test]
    fn empty_epoch_leaves_layer_unchanged() {
        let view = view_of(&[&[0.0, 0.0]]);
        let mut l = WtaLayer::random(3, 2, ActivationKind::NaturalExp, BiasMode::AdditiveLog, &mut rng::seeded(1)).unwrap();
        let before = l.clone();
        let mut p = Progress::default();
        let cfg = TrainConfig::new(LearningRateSchedule::Constant(0.1), InferenceMode::Soft);
        let stats = train_epoch(&mut l, &view, &[0], &cfg, &mut p, None).unwrap();
        assert_eq!(stats.steps, 0);
        assert_eq!(l, before);
    }

    #[test]
    fn single_neuron_converges_to_repeated_sample() {
        let sample = [0.2, 0.9, 0.4];
        let view = view_of(&[&sample]);
        let target = math::l2_normalize(&sample).unwrap();
        let mut l = WtaLayer::from_parts(1, 3, vec![0.3, -0.1, 0.2], vec![0.0], ActivationKind::NaturalExp, BiasMode::AdditiveLog).unwrap();
        let cfg = TrainConfig::new(LearningRateSchedule::Constant(0.05), InferenceMode::Soft);
        let mut p = Progress::default();
        let order = vec![0; 1000];
        train_epoch(&mut l, &view, &order, &cfg, &mut p, None).unwrap();
        assert!((l.row_norm(0) - 1.0).abs() < 1e-3);
        assert!(math::cosine_similarity(l.row(0), &target).unwrap() > 1.0 - 1e-9);
        assert_eq!(p.step, 1000);
    }

    #[test]
    fn observer_sees_every_step_with_pre_update_output() {
        let view = view_of(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let mut l = WtaLayer::random(2, 2, ActivationKind::NaturalExp, BiasMode::AdditiveLog, &mut rng::seeded(4)).unwrap();
        let first = l.forward_posterior(view.row(1), InferenceMode::Soft).unwrap();
        let mut seen = Vec::new();
        let mut obs = |e: &StepEvent<'_>| {
            seen.push((e.step, e.row, e.output.clone()));
            Ok(())
        };
        let cfg = TrainConfig::new(LearningRateSchedule::Constant(0.1), InferenceMode::Soft);
        let mut p = Progress { step: 10, epoch: 0 };
        train_epoch(&mut l, &view, &[1, 0], &cfg, &mut p, Some(&mut obs)).unwrap();
        assert_eq!(seen.len(), 2);
        assert_eq!((seen[0].0, seen[0].1), (10, 1));
        assert_eq!(seen[0].2, first);
        assert_eq!(p, Progress { step: 12, epoch: 1 });
    }

    #[test]
    fn norm_attractor_from_small_and_large_rows() {
        // unit inputs clustered around e_0; K=1 so y = 1
        let mut r = rng::seeded(9);
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| {
                let mut v: Vec<f64> = (0..5).map(|_| (0.1 * rng::normal(&mut r).abs()).min(1.0)).collect();
                v[0] = 1.0;
                v
            })
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|v| v.as_slice()).collect();
        let view = view_of(&refs);
        for scale in [0.2, 5.0] {
            let w: Vec<f64> = [1.0, 0.2, -0.1, 0.0, 0.3].iter().map(|v| v * scale).collect();
            let mut l = WtaLayer::from_parts(1, 5, w, vec![0.0], ActivationKind::NaturalExp, BiasMode::Disabled).unwrap();
            let cfg = TrainConfig::new(LearningRateSchedule::Constant(0.02), InferenceMode::Soft);
            let mut p = Progress::default();
            let mut last_gap = (l.row_norm(0) - 1.0).abs();
            for _ in 0..5 {
                let order: Vec<usize> = (0..400).collect();
                train_epoch(&mut l, &view, &order, &cfg, &mut p, None).unwrap();
                let gap = (l.row_norm(0) - 1.0).abs();
                assert!(gap <= last_gap + 1e-3);
                last_gap = gap;
            }
            assert!(last_gap <= 0.01, "scale {scale}: norm {}", l.row_norm(0));
        }
    }

    #[test]
    fn bias_converges_to_log_win_frequency() {
        let freqs = [0.5, 0.3, 0.15, 0.05];
        let mut l = WtaLayer::from_parts(4, 1, vec![1.0; 4], vec![fmath::ln(0.25); 4], ActivationKind::NaturalExp, BiasMode::AdditiveLog).unwrap();
        let mut r = rng::seeded(3);
        let steps = 1_000_000u64;
        for t in 0..steps {
            let draw = rng::uniform(&mut r, 0.0, 1.0);
            let mut acc = 0.0;
            let mut k = 3;
            for (i, f) in freqs.iter().enumerate() {
                acc += f;
                if draw < acc {
                    k = i;
                    break;
                }
            }
            let mut y = vec![0.0; 4];
            y[k] = 1.0;
            let out = LayerOutput {
                pre_activations: vec![1.0; 4],
                log_posteriors: y.iter().map(|&p| fmath::ln(p)).collect(),
                posteriors: y,
                winner: k,
            };
            // Robbins-Monro gain; the rule's local slope at equilibrium is -1
            let eta = 1.0 / (t as f64 + 100.0);
            l.bias_update(&out, eta);
        }
        for (b, f) in l.biases().iter().zip(freqs) {
            assert!((b - fmath::ln(f)).abs() <= 0.02, "{b} vs ln {f}");
        }
    }

    #[test]
    fn checksum_sees_single_bit_changes() {
        let l = WtaLayer::random(3, 4, ActivationKind::NaturalExp, BiasMode::AdditiveLog, &mut rng::seeded(2)).unwrap();
        let mut m = l.clone();
        let w = m.row_mut(2);
        w[3] = f64::from_bits(w[3].to_bits() ^ 1);
        assert_ne!(l.checksum(), m.checksum());
        assert_eq!(l.checksum(), l.clone().checksum());
    }

    #[test]
    fn sample_inits_copy_data_rows() {
        let view = view_of(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.1]]);
        for init in [WeightInit::RandomSamples, WeightInit::FarthestPointSamples] {
            let l = WtaLayer::initialize(2, ActivationKind::NaturalExp, BiasMode::AdditiveLog, init, Some(&view), &mut rng::seeded(5)).unwrap();
            for k in 0..2 {
                assert!((0..view.len()).any(|r| view.row(r) == l.row(k)));
            }
        }
        let l = WtaLayer::initialize(2, ActivationKind::NaturalExp, BiasMode::AdditiveLog, WeightInit::FarthestPointSamples, Some(&view), &mut rng::seeded(5)).unwrap();
        assert!(math::dot(l.row(0), l.row(1)) < 0.2);
        assert!(WtaLayer::initialize(9, ActivationKind::NaturalExp, BiasMode::AdditiveLog, WeightInit::RandomSamples, Some(&view), &mut rng::seeded(5)).is_err());
    }

    fn unit(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1f64..1.0, n).prop_filter_map("nonzero", |v| math::l2_normalize(&v).ok())
    }

    proptest! {
        #[test]
        fn soft_limit_matches_hard(w in proptest::collection::vec(-1f64..1.0, 12), x in unit(3)) {
            let base = WtaLayer::from_parts(4, 3, w, vec![fmath::ln(0.25); 4], ActivationKind::BaseExp(1e6), BiasMode::AdditiveLog);
            prop_assume!(base.is_ok());
            let l = base.unwrap();
            let u = l.forward_linear(&x);
            prop_assume!(u.is_ok());
            let mut u = u.unwrap();
            let top = math::argmax(&u);
            let u_top = u[top];
            u.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let margin = u_top - u[1];
            prop_assume!(margin > 0.05);
            let soft = l.forward_posterior(&x, InferenceMode::Soft).unwrap();
            let hard = l.forward_posterior(&x, InferenceMode::Hard).unwrap();
            prop_assert_eq!(hard.winner, top);
            prop_assert_eq!(soft.winner, top);
            // every loser sits at least `margin` below the winner in cosine
            let bound = 1.0 / (1.0 + 3.0 * fmath::exp(-margin * fmath::ln(1e6)));
            prop_assert!(soft.posteriors[top] >= bound - 1e-12);
            if margin * fmath::ln(1e6) >= fmath::ln(3.0 * 999.0) {
                prop_assert!(soft.posteriors[top] >= 1.0 - 1e-3);
            }
        }

        #[test]
        fn posteriors_permute_with_neurons(w in proptest::collection::vec(0.1f64..1.0, 9), b in proptest::collection::vec(-3f64..0.0, 3), x in unit(3)) {
            let l = WtaLayer::from_parts(3, 3, w.clone(), b.clone(), ActivationKind::BaseExp(1000.0), BiasMode::AdditiveLog).unwrap();
            let perm = [2usize, 0, 1];
            let pw: Vec<f64> = perm.iter().flat_map(|&k| w[k * 3..k * 3 + 3].to_vec()).collect();
            let pb: Vec<f64> = perm.iter().map(|&k| b[k]).collect();
            let m = WtaLayer::from_parts(3, 3, pw, pb, ActivationKind::BaseExp(1000.0), BiasMode::AdditiveLog).unwrap();
            let y = l.forward_posterior(&x, InferenceMode::Soft).unwrap().posteriors;
            let z = m.forward_posterior(&x, InferenceMode::Soft).unwrap().posteriors;
            for (j, &k) in perm.iter().enumerate() {
                prop_assert!((z[j] - y[k]).abs() <= 1e-15);
            }
        }

        #[test]
        fn layer_output_invariants(w in proptest::collection::vec(-1f64..1.0, 20), x in unit(4)) {
            let l = WtaLayer::from_parts(5, 4, w, vec![fmath::ln(0.2); 5], ActivationKind::BaseExp(1000.0), BiasMode::AdditiveLog);
            prop_assume!(l.is_ok());
            if let Ok(out) = l.unwrap().forward_posterior(&x, InferenceMode::Soft) {
                prop_assert!(out.pre_activations.iter().all(|u| (-1.0..=1.0).contains(u)));
                prop_assert!(out.posteriors.iter().all(|&y| y >= 0.0));
                prop_assert!((out.posteriors.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }
    }
}
