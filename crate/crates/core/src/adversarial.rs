//! L∞ projected-gradient attacks on end-to-end classifiers that take raw
//! pixels in `[0, 1]`.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::LabeledDataset;
use crate::eval::{NeuronLabelMap, INVALID_LABEL};
use crate::layer::{InferenceMode, WtaLayer};
use crate::math::{self, ActivationKind};
use crate::readout::{cross_entropy_loss, LinearClassifier, Mlp2};
use crate::rng;
use crate::{Error, Result};

/// A frozen classifier from raw pixels to class probabilities, including
/// whatever preprocessing it applies.
pub trait Pipeline {
    fn classes(&self) -> usize;

    fn predict_proba(&self, x_raw: &[f64]) -> Result<Vec<f64>>;

    fn predict(&self, x_raw: &[f64]) -> Result<usize> {
        Ok(math::argmax(&self.predict_proba(x_raw)?))
    }

    fn loss(&self, x_raw: &[f64], label: usize) -> Result<f64> {
        cross_entropy_loss(&self.predict_proba(x_raw)?, label)
    }

    /// Cross-entropy at `label` and its gradient with respect to the raw
    /// pixels.
    fn loss_and_input_gradient(&self, _x_raw: &[f64], _label: usize) -> Result<(f64, Vec<f64>)> {
        Err(Error::GradientUnavailable)
    }
}

/// Back-propagates `∂L/∂u` (cosine pre-activations) to the raw input through
/// `u_k = ŵ_k·x̂` and `x̂ = x/‖x‖`.
fn cosine_backward(wta: &WtaLayer, x_raw: &[f64], du: &[f64]) -> Result<Vec<f64>> {
    let n = wta.inputs();
    let norm = math::norm(x_raw);
    if norm < math::NORM_FLOOR {
        return Err(Error::ZeroVector {
            norm,
            floor: math::NORM_FLOOR,
        });
    }
    let mut dxhat = vec![0.0; n];
    for (k, &g) in du.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let w = wta.row(k);
        let scale = g / math::norm(w);
        for (d, &wi) in dxhat.iter_mut().zip(w) {
            *d += scale * wi;
        }
    }
    // (I − x̂x̂ᵀ)/‖x‖
    let radial: f64 = dxhat.iter().zip(x_raw).map(|(d, x)| d * x).sum::<f64>() / norm;
    Ok(dxhat
        .iter()
        .zip(x_raw)
        .map(|(d, x)| (d - radial * x / norm) / norm)
        .collect())
}

fn log_scale(wta: &WtaLayer) -> Result<f64> {
    wta.activation.log_scale().ok_or(Error::GradientUnavailable)
}

/// Layer posteriors fed to a linear softmax readout.
#[derive(Debug, Clone)]
pub struct SoftHebbTwoLayer {
    pub wta: WtaLayer,
    pub readout: LinearClassifier,
}

impl Pipeline for SoftHebbTwoLayer {
    fn classes(&self) -> usize {
        self.readout.classes()
    }

    fn predict_proba(&self, x_raw: &[f64]) -> Result<Vec<f64>> {
        let x = math::l2_normalize(x_raw)?;
        let y = self.wta.forward_posterior(&x, InferenceMode::Soft)?.posteriors;
        Ok(self.readout.predict_proba(&y))
    }

    fn loss_and_input_gradient(&self, x_raw: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        let s = log_scale(&self.wta)?;
        let x = math::l2_normalize(x_raw)?;
        let y = self.wta.forward_posterior(&x, InferenceMode::Soft)?.posteriors;
        let (loss, dy) = self.readout.input_gradient(&y, label);
        // softmax Jacobian: dz = y ⊙ (dy − ⟨y, dy⟩)
        let inner = math::dot(&y, &dy);
        let du: Vec<f64> = y.iter().zip(&dy).map(|(yk, gk)| s * yk * (gk - inner)).collect();
        Ok((loss, cosine_backward(&self.wta, x_raw, &du)?))
    }
}

/// The label-map classifier made differentiable: each class scores the
/// largest posterior logit among the neurons labeled with it.
#[derive(Debug, Clone)]
pub struct SoftHebbOneLayer {
    pub wta: WtaLayer,
    pub labels: NeuronLabelMap,
}

impl SoftHebbOneLayer {
    /// Class logits and, per class, the neuron that supplied it.
    fn class_logits(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Option<usize>>)> {
        let u = self.wta.forward_linear(x)?;
        let scores = self.wta.scores(&u);
        let c = self.labels.classes();
        let mut logits = vec![f64::NEG_INFINITY; c];
        let mut source = vec![None; c];
        for (k, &s) in scores.iter().enumerate() {
            let l = self.labels.label_of[k];
            if l != INVALID_LABEL && s > logits[l] {
                logits[l] = s;
                source[l] = Some(k);
            }
        }
        if source.iter().all(Option::is_none) {
            return Err(Error::NoValidNeurons);
        }
        Ok((logits, source))
    }
}

impl Pipeline for SoftHebbOneLayer {
    fn classes(&self) -> usize {
        self.labels.classes()
    }

    fn predict_proba(&self, x_raw: &[f64]) -> Result<Vec<f64>> {
        if !self.wta.activation.is_exponential() {
            return Err(Error::GradientUnavailable);
        }
        let x = math::l2_normalize(x_raw)?;
        let (logits, _) = self.class_logits(&x)?;
        math::softmax(&logits, ActivationKind::NaturalExp)
    }

    fn loss_and_input_gradient(&self, x_raw: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        let s = log_scale(&self.wta)?;
        let x = math::l2_normalize(x_raw)?;
        let (logits, source) = self.class_logits(&x)?;
        let p = math::softmax(&logits, ActivationKind::NaturalExp)?;
        let loss = cross_entropy_loss(&p, label)?;
        let mut du = vec![0.0; self.wta.neurons()];
        for (c, k) in source.iter().enumerate() {
            if let Some(k) = *k {
                let onehot = if c == label { 1.0 } else { 0.0 };
                du[k] += s * (p[c] - onehot);
            }
        }
        Ok((loss, cosine_backward(&self.wta, x_raw, &du)?))
    }
}

/// The MLP sees raw pixels directly.
#[derive(Debug, Clone)]
pub struct MlpPipeline {
    pub mlp: Mlp2,
}

impl Pipeline for MlpPipeline {
    fn classes(&self) -> usize {
        self.mlp.classes()
    }

    fn predict_proba(&self, x_raw: &[f64]) -> Result<Vec<f64>> {
        Ok(self.mlp.predict_proba(x_raw))
    }

    fn loss_and_input_gradient(&self, x_raw: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        Ok(self.mlp.input_gradient(x_raw, label))
    }
}

/// Ignores its input. Useful as a control.
#[derive(Debug, Clone)]
pub struct ConstantPipeline {
    pub probabilities: Vec<f64>,
}

impl Pipeline for ConstantPipeline {
    fn classes(&self) -> usize {
        self.probabilities.len()
    }

    fn predict_proba(&self, _x_raw: &[f64]) -> Result<Vec<f64>> {
        Ok(self.probabilities.clone())
    }

    fn loss_and_input_gradient(&self, x_raw: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        Ok((cross_entropy_loss(&self.probabilities, label)?, vec![0.0; x_raw.len()]))
    }
}

impl<P: Pipeline + ?Sized> Pipeline for Box<P> {
    fn classes(&self) -> usize {
        (**self).classes()
    }
    fn predict_proba(&self, x_raw: &[f64]) -> Result<Vec<f64>> {
        (**self).predict_proba(x_raw)
    }
    fn loss_and_input_gradient(&self, x_raw: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        (**self).loss_and_input_gradient(x_raw, label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PgdConfig {
    /// L∞ radius on the `[0, 1]` pixel scale.
    pub epsilon: f64,
    pub steps: usize,
    pub step_size: f64,
    pub random_start: bool,
    pub restarts: usize,
    /// Return the highest-loss iterate seen instead of the last one.
    pub keep_best: bool,
}

impl PgdConfig {
    /// 40 steps of `2.5·ε/40`, random start, one restart.
    pub fn standard(epsilon: f64) -> Self {
        let steps = 40;
        Self {
            epsilon,
            steps,
            step_size: 2.5 * epsilon / steps as f64,
            random_start: true,
            restarts: 1,
            keep_best: true,
        }
    }

    /// Same step count and relative step size at a different radius.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let ratio = if self.epsilon > 0.0 {
            self.step_size / self.epsilon
        } else {
            2.5 / self.steps.max(1) as f64
        };
        Self {
            epsilon,
            step_size: ratio * epsilon,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon >= 0.0
            && self.epsilon.is_finite()
            && self.steps >= 1
            && self.restarts >= 1
            && (self.epsilon == 0.0 || self.step_size > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("attack config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub perturbed: Vec<f64>,
    pub original_label: usize,
    pub predicted_label: usize,
    pub loss_before: f64,
    pub loss_after: f64,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn project(x: &mut [f64], origin: &[f64], epsilon: f64) {
    for (xi, &oi) in x.iter_mut().zip(origin) {
        *xi = xi.clamp(oi - epsilon, oi + epsilon).clamp(0.0, 1.0);
    }
}

fn within_budget(x: &[f64], origin: &[f64], epsilon: f64) -> bool {
    x.iter()
        .zip(origin)
        .all(|(&a, &o)| (a - o).abs() <= epsilon + 1e-9 && (0.0..=1.0).contains(&a))
}

pub fn pgd_attack(
    pipeline: &dyn Pipeline,
    x_raw: &[f64],
    label: usize,
    cfg: &PgdConfig,
    seed: u64,
) -> Result<AttackResult> {
    cfg.validate()?;
    let loss_before = pipeline.loss(x_raw, label)?;
    if cfg.epsilon == 0.0 {
        return Ok(AttackResult {
            perturbed: x_raw.to_vec(),
            original_label: label,
            predicted_label: pipeline.predict(x_raw)?,
            loss_before,
            loss_after: loss_before,
        });
    }
    let mut r = rng::seeded(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..cfg.restarts {
        let mut x = x_raw.to_vec();
        if cfg.random_start {
            for xi in x.iter_mut() {
                *xi += rng::uniform(&mut r, -cfg.epsilon, cfg.epsilon);
            }
            project(&mut x, x_raw, cfg.epsilon);
        }
        let mut run_best = (pipeline.loss(&x, label)?, x.clone());
        for _ in 0..cfg.steps {
            let (_, g) = pipeline.loss_and_input_gradient(&x, label)?;
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi += cfg.step_size * sign(*gi);
            }
            project(&mut x, x_raw, cfg.epsilon);
            debug_assert!(within_budget(&x, x_raw, cfg.epsilon));
            if cfg.keep_best {
                let l = pipeline.loss(&x, label)?;
                if l > run_best.0 {
                    run_best = (l, x.clone());
                }
            }
        }
        if !cfg.keep_best {
            run_best = (pipeline.loss(&x, label)?, x);
        }
        if best.as_ref().map_or(true, |b| run_best.0 > b.0) {
            best = Some(run_best);
        }
    }
    let (loss_after, perturbed) = best.expect("at least one restart");
    if !within_budget(&perturbed, x_raw, cfg.epsilon) {
        return Err(Error::InvalidParameter("attack left the L-infinity ball".into()));
    }
    Ok(AttackResult {
        predicted_label: pipeline.predict(&perturbed)?,
        perturbed,
        original_label: label,
        loss_before,
        loss_after,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub accuracy: f64,
    pub samples: usize,
}

/// Accuracy under attack at each radius. Sample `i` draws its random start
/// from `derive_seed(seed, i)`, the same stream at every radius.
pub fn robustness_curve(
    pipeline: &dyn Pipeline,
    data: &LabeledDataset,
    epsilons: &[f64],
    template: &PgdConfig,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    if epsilons.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("epsilons must be ascending".into()));
    }
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let cfg = template.with_epsilon(eps);
        let mut correct = 0;
        for i in 0..data.len() {
            let res = pgd_attack(pipeline, data.sample(i), data.label(i), &cfg, rng::derive_seed(seed, i as u64))?;
            if res.predicted_label == data.label(i) {
                correct += 1;
            }
        }
        out.push(CurvePoint {
            epsilon: eps,
            accuracy: correct as f64 / data.len().max(1) as f64,
            samples: data.len(),
        });
    }
    Ok(out)
}

/// One attack per radius on the same image, in grid order.
pub fn generate_interpolations(
    pipeline: &dyn Pipeline,
    x_raw: &[f64],
    label: usize,
    epsilon_grid: &[f64],
    cfg: &PgdConfig,
    seed: u64,
) -> Result<Vec<AttackResult>> {
    epsilon_grid
        .iter()
        .map(|&eps| pgd_attack(pipeline, x_raw, label, &cfg.with_epsilon(eps), seed))
        .collect()
}
