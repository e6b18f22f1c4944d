//! Supervised pieces: the linear softmax readout that sits on a frozen layer,
//! the two-layer ReLU MLP baseline, and the optimizers that train them.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{LabeledDataset, NormalizedView};
use crate::fmath;
use crate::layer::{InferenceMode, WtaLayer};
use crate::math::{self, ActivationKind};
use crate::rng::{self, Rng};
use crate::{Error, Result};

pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// `−ln max(p[label], 1e-12)`.
pub fn cross_entropy_loss(predicted: &[f64], label: usize) -> Result<f64> {
    let sum: f64 = predicted.iter().sum();
    if label >= predicted.len()
        || (sum - 1.0).abs() > 1e-6
        || predicted.iter().any(|&p| !(p >= 0.0))
    {
        return Err(Error::InvalidDistribution(format!(
            "label {label} over {} classes, mass {sum}",
            predicted.len()
        )));
    }
    Ok(-fmath::ln(predicted[label].max(PROBABILITY_FLOOR)))
}

/// Loss and `∂loss/∂logits = softmax − onehot`, from raw logits.
fn softmax_xent(logits: &[f64], label: usize, grad: &mut [f64]) -> f64 {
    let lse = fmath::log_sum_exp(logits);
    for (g, &z) in grad.iter_mut().zip(logits) {
        *g = fmath::exp(z - lse);
    }
    grad[label] -= 1.0;
    lse - logits[label]
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub minibatch: usize,
    pub epochs: usize,
}

impl OptimizerConfig {
    pub const ADAM_DEFAULT: OptimizerKind = OptimizerKind::Adam {
        beta1: 0.9,
        beta2: 0.999,
        epsilon: 1e-8,
    };

    /// Adam at `1e-3`, the readout default.
    pub fn adam(epochs: usize, minibatch: usize) -> Self {
        Self {
            kind: Self::ADAM_DEFAULT,
            learning_rate: 1e-3,
            minibatch,
            epochs,
        }
    }

    pub fn sgd(learning_rate: f64, minibatch: usize, epochs: usize) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            minibatch,
            epochs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && self.minibatch >= 1
            && match self.kind {
                OptimizerKind::Sgd => true,
                OptimizerKind::Adam {
                    beta1,
                    beta2,
                    epsilon,
                } => (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && epsilon > 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("optimizer config {self:?}")))
        }
    }
}

/// Optimizer state for a fixed list of parameter groups.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, group_sizes: &[usize]) -> Self {
        let zeros = || group_sizes.iter().map(|&s| vec![0.0; s]).collect();
        let adam = matches!(cfg.kind, OptimizerKind::Adam { .. });
        Self {
            cfg,
            t: 0,
            m: if adam { zeros() } else { Vec::new() },
            v: if adam { zeros() } else { Vec::new() },
        }
    }

    /// One update of every group; `groups[i]` is `(params, grads)`.
    pub fn step(&mut self, groups: &mut [(&mut [f64], &[f64])]) {
        self.t += 1;
        let lr = self.cfg.learning_rate;
        match self.cfg.kind {
            OptimizerKind::Sgd => {
                for (p, g) in groups.iter_mut() {
                    for (pi, gi) in p.iter_mut().zip(g.iter()) {
                        *pi -= lr * gi;
                    }
                }
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                let c1 = 1.0 - fmath::powi(beta1, self.t.min(u32::MAX as u64) as u32);
                let c2 = 1.0 - fmath::powi(beta2, self.t.min(u32::MAX as u64) as u32);
                for (gi, (p, g)) in groups.iter_mut().enumerate() {
                    let (m, v) = (&mut self.m[gi], &mut self.v[gi]);
                    for j in 0..p.len() {
                        m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                        v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                        let mhat = m[j] / c1;
                        let vhat = v[j] / c2;
                        p[j] -= lr * mhat / (fmath::sqrt(vhat) + epsilon);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearClassifier {
    classes: usize,
    inputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LinearClassifier {
    pub fn zeros(classes: usize, inputs: usize) -> Self {
        Self {
            classes,
            inputs,
            weights: vec![0.0; classes * inputs],
            biases: vec![0.0; classes],
        }
    }

    pub fn from_parts(classes: usize, inputs: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if weights.len() != classes * inputs || biases.len() != classes {
            return Err(Error::DimensionMismatch {
                expected: classes * inputs,
                found: weights.len(),
            });
        }
        Ok(Self {
            classes,
            inputs,
            weights,
            biases,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn logits(&self, features: &[f64]) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                self.biases[c] + math::dot(&self.weights[c * self.inputs..(c + 1) * self.inputs], features)
            })
            .collect()
    }

    pub fn predict_proba(&self, features: &[f64]) -> Vec<f64> {
        math::softmax(&self.logits(features), ActivationKind::NaturalExp)
            .expect("classifier has at least one class")
    }

    pub fn predict(&self, features: &[f64]) -> usize {
        math::argmax(&self.logits(features))
    }

    /// Loss plus `∂loss/∂logits`.
    pub fn loss_and_logit_grad(&self, features: &[f64], label: usize) -> (f64, Vec<f64>) {
        let logits = self.logits(features);
        let mut g = vec![0.0; self.classes];
        let loss = softmax_xent(&logits, label, &mut g);
        (loss, g)
    }

    /// `∂loss/∂features`.
    pub fn input_gradient(&self, features: &[f64], label: usize) -> (f64, Vec<f64>) {
        let (loss, g) = self.loss_and_logit_grad(features, label);
        let mut dx = vec![0.0; self.inputs];
        for (c, &gc) in g.iter().enumerate() {
            for (d, &w) in dx.iter_mut().zip(&self.weights[c * self.inputs..(c + 1) * self.inputs]) {
                *d += gc * w;
            }
        }
        (loss, dx)
    }

    pub fn checksum(&self) -> u64 {
        crate::layer::checksum_f64(self.weights.iter().chain(&self.biases).copied())
    }
}

/// Rows of `dim` features with labels, trained in a seeded shuffled order.
pub fn train_linear(
    features: &[f64],
    dim: usize,
    labels: &[usize],
    classes: usize,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<LinearClassifier> {
    opt.validate()?;
    if features.len() != labels.len() * dim {
        return Err(Error::DimensionMismatch {
            expected: labels.len() * dim,
            found: features.len(),
        });
    }
    let mut model = LinearClassifier::zeros(classes, dim);
    let mut optimizer = Optimizer::new(*opt, &[classes * dim, classes]);
    let mut gw = vec![0.0; classes * dim];
    let mut gb = vec![0.0; classes];
    let mut r = rng::seeded(seed);
    let mut step = 0usize;
    for _ in 0..opt.epochs {
        let order = rng::permutation(labels.len(), &mut r);
        for batch in order.chunks(opt.minibatch) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            gb.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                let x = &features[i * dim..(i + 1) * dim];
                let (loss, g) = model.loss_and_logit_grad(x, labels[i]);
                batch_loss += loss;
                for (c, &gc) in g.iter().enumerate() {
                    gb[c] += scale * gc;
                    let sg = scale * gc;
                    for (w, &xi) in gw[c * dim..(c + 1) * dim].iter_mut().zip(x) {
                        *w += sg * xi;
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::DivergenceDetected {
                    step,
                    loss: batch_loss,
                });
            }
            optimizer.step(&mut [(&mut model.weights, &gw), (&mut model.biases, &gb)]);
            step += 1;
        }
    }
    Ok(model)
}

/// Soft posteriors of every row of `data`, row-major.
pub fn posterior_features(wta: &WtaLayer, data: &NormalizedView) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(data.len() * wta.neurons());
    for r in 0..data.len() {
        out.extend(wta.forward_posterior(data.row(r), InferenceMode::Soft)?.posteriors);
    }
    Ok(out)
}

/// Trains a linear readout on the frozen layer's soft posteriors.
pub fn train_readout(
    wta: &WtaLayer,
    data: &NormalizedView,
    classes: usize,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<LinearClassifier> {
    let before = wta.checksum();
    let features = posterior_features(wta, data)?;
    let labels: Vec<usize> = (0..data.len()).map(|r| data.label(r)).collect();
    let model = train_linear(&features, wta.neurons(), &labels, classes, opt, seed)?;
    debug_assert_eq!(before, wta.checksum());
    Ok(model)
}

/// Two-layer perceptron: ReLU hidden layer, softmax output.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mlp2 {
    inputs: usize,
    hidden: usize,
    classes: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpGradients {
    fn zeros_like(m: &Mlp2) -> Self {
        Self {
            w1: vec![0.0; m.w1.len()],
            b1: vec![0.0; m.b1.len()],
            w2: vec![0.0; m.w2.len()],
            b2: vec![0.0; m.b2.len()],
        }
    }

    fn clear(&mut self) {
        for v in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            v.iter_mut().for_each(|g| *g = 0.0);
        }
    }
}

struct MlpPass {
    pre: Vec<f64>,
    act: Vec<f64>,
    logits: Vec<f64>,
}

impl Mlp2 {
    /// He-style uniform init, `U(±√(6/fan_in))`, zero biases.
    pub fn new(inputs: usize, hidden: usize, classes: usize, rng: &mut Rng) -> Self {
        let mut uniform = |fan_in: usize, count: usize| -> Vec<f64> {
            let a = fmath::sqrt(6.0 / fan_in as f64);
            (0..count).map(|_| rng::uniform(rng, -a, a)).collect()
        };
        let w1 = uniform(inputs, hidden * inputs);
        let w2 = uniform(hidden, classes * hidden);
        Self {
            inputs,
            hidden,
            classes,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; classes],
        }
    }

    pub fn from_parts(
        inputs: usize,
        hidden: usize,
        classes: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> Result<Self> {
        if w1.len() != hidden * inputs || b1.len() != hidden || w2.len() != classes * hidden || b2.len() != classes {
            return Err(Error::DimensionMismatch {
                expected: hidden * inputs,
                found: w1.len(),
            });
        }
        Ok(Self {
            inputs,
            hidden,
            classes,
            w1,
            b1,
            w2,
            b2,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    fn pass(&self, x: &[f64]) -> MlpPass {
        let n = self.inputs;
        let pre: Vec<f64> = (0..self.hidden)
            .map(|j| self.b1[j] + math::dot(&self.w1[j * n..(j + 1) * n], x))
            .collect();
        let act: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
        let h = self.hidden;
        let logits = (0..self.classes)
            .map(|c| self.b2[c] + math::dot(&self.w2[c * h..(c + 1) * h], &act))
            .collect();
        MlpPass { pre, act, logits }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.pass(x).logits
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        math::softmax(&self.pass(x).logits, ActivationKind::NaturalExp).expect("at least one class")
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        math::argmax(&self.pass(x).logits)
    }

    /// Adds `scale·∂loss/∂θ` into `grads`, returns the loss, and optionally
    /// writes `∂loss/∂x`.
    fn accumulate(&self, x: &[f64], label: usize, scale: f64, grads: &mut MlpGradients, dx: Option<&mut [f64]>) -> f64 {
        let (n, h) = (self.inputs, self.hidden);
        let p = self.pass(x);
        let mut dlogits = vec![0.0; self.classes];
        let loss = softmax_xent(&p.logits, label, &mut dlogits);
        let mut dact = vec![0.0; h];
        for (c, &g) in dlogits.iter().enumerate() {
            grads.b2[c] += scale * g;
            let row = &self.w2[c * h..(c + 1) * h];
            for j in 0..h {
                grads.w2[c * h + j] += scale * g * p.act[j];
                dact[j] += g * row[j];
            }
        }
        let mut dx = dx;
        for j in 0..h {
            if p.pre[j] <= 0.0 {
                continue;
            }
            let g = dact[j];
            grads.b1[j] += scale * g;
            let sg = scale * g;
            for (w, &xi) in grads.w1[j * n..(j + 1) * n].iter_mut().zip(x) {
                *w += sg * xi;
            }
            if let Some(d) = dx.as_deref_mut() {
                for (di, &w) in d.iter_mut().zip(&self.w1[j * n..(j + 1) * n]) {
                    *di += g * w;
                }
            }
        }
        loss
    }

    /// `∂/∂x` of the cross-entropy at `label`, with the loss.
    pub fn input_gradient(&self, x: &[f64], label: usize) -> (f64, Vec<f64>) {
        let mut scratch = MlpGradients::zeros_like(self);
        let mut dx = vec![0.0; self.inputs];
        let loss = self.accumulate(x, label, 1.0, &mut scratch, Some(&mut dx));
        (loss, dx)
    }

    pub fn checksum(&self) -> u64 {
        crate::layer::checksum_f64(
            self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).copied(),
        )
    }

    pub fn output_checksum(&self) -> u64 {
        crate::layer::checksum_f64(self.w2.iter().chain(&self.b2).copied())
    }
}

/// Exact gradients of `cross_entropy(softmax(model(x)), label)`.
pub fn mlp_backward(model: &Mlp2, x: &[f64], label: usize) -> (MlpGradients, f64) {
    let mut g = MlpGradients::zeros_like(model);
    let loss = model.accumulate(x, label, 1.0, &mut g, None);
    (g, loss)
}

/// Which parameters an MLP training run may change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlpTrainable {
    All,
    HiddenOnly,
}

/// Per-step hook: `(step, sample index, loss before the update, model)`.
pub type MlpObserver<'o> = dyn FnMut(u64, usize, f64, &Mlp2) -> Result<()> + 'o;

/// Trains on raw samples. The first epoch follows the dataset's recorded
/// permutation; later epochs reshuffle from `seed`.
pub fn train_mlp_with(
    model: &mut Mlp2,
    data: &LabeledDataset,
    opt: &OptimizerConfig,
    trainable: MlpTrainable,
    seed: u64,
    mut observer: Option<&mut MlpObserver<'_>>,
) -> Result<()> {
    opt.validate()?;
    if data.dim() != model.inputs {
        return Err(Error::DimensionMismatch {
            expected: model.inputs,
            found: data.dim(),
        });
    }
    let mut grads = MlpGradients::zeros_like(model);
    let mut optimizer = Optimizer::new(*opt, &[model.w1.len(), model.b1.len(), model.w2.len(), model.b2.len()]);
    let mut step: u64 = 0;
    for epoch in 0..opt.epochs {
        let order = if epoch == 0 {
            data.permutation().to_vec()
        } else {
            rng::permutation(data.len(), &mut rng::seeded(rng::derive_seed(seed, epoch as u64)))
        };
        for batch in order.chunks(opt.minibatch) {
            grads.clear();
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                let loss = model.accumulate(data.sample(i), data.label(i), scale, &mut grads, None);
                if let Some(obs) = observer.as_deref_mut() {
                    obs(step, i, loss, model)?;
                }
                batch_loss += loss;
            }
            if !batch_loss.is_finite() {
                return Err(Error::DivergenceDetected {
                    step: step as usize,
                    loss: batch_loss,
                });
            }
            match trainable {
                MlpTrainable::All => optimizer.step(&mut [
                    (&mut model.w1, &grads.w1),
                    (&mut model.b1, &grads.b1),
                    (&mut model.w2, &grads.w2),
                    (&mut model.b2, &grads.b2),
                ]),
                MlpTrainable::HiddenOnly => {
                    optimizer.step(&mut [(&mut model.w1, &grads.w1), (&mut model.b1, &grads.b1)])
                }
            }
            step += batch.len() as u64;
        }
    }
    Ok(())
}

pub fn train_mlp(data: &LabeledDataset, hidden: usize, opt: &OptimizerConfig, init_seed: u64) -> Result<Mlp2> {
    let mut model = Mlp2::new(data.dim(), hidden, data.classes(), &mut rng::seeded(init_seed));
    train_mlp_with(&mut model, data, opt, MlpTrainable::All, init_seed, None)?;
    Ok(model)
}

/// Trains only the hidden layer; the output layer stays bit-identical.
pub fn train_mlp_first_layer_only(model: &mut Mlp2, data: &LabeledDataset, opt: &OptimizerConfig, seed: u64) -> Result<()> {
    train_mlp_with(model, data, opt, MlpTrainable::HiddenOnly, seed, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cross_entropy_examples() {
        assert!(cross_entropy_loss(&[0.0, 1.0, 0.0], 1).unwrap().abs() < 1e-15);
        let uniform = vec![0.1; 10];
        assert!((cross_entropy_loss(&uniform, 3).unwrap() - 2.302585092994046).abs() < 1e-12);
        assert!((cross_entropy_loss(&[1.0, 0.0], 1).unwrap() - 27.631021115928547).abs() < 1e-9);
        assert!(matches!(cross_entropy_loss(&[0.5, 0.4], 0), Err(Error::InvalidDistribution(_))));
        assert!(matches!(cross_entropy_loss(&[0.5, 0.5], 2), Err(Error::InvalidDistribution(_))));
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        if d < 1e-9 {
            0.0
        } else {
            d / a.abs().max(b.abs())
        }
    }

    fn loss_of(m: &Mlp2, x: &[f64], label: usize) -> f64 {
        let mut g = vec![0.0; m.classes()];
        softmax_xent(&m.logits(x), label, &mut g)
    }

    /// Largest relative error between analytic and central-difference
    /// gradients over every parameter and input coordinate.
    pub(crate) fn mlp_fd_error(m: &Mlp2, x: &[f64], label: usize) -> f64 {
        let (g, _) = mlp_backward(m, x, label);
        let (_, dx) = m.input_gradient(x, label);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut check = |analytic: f64, plus: f64, minus: f64| {
            worst = worst.max(rel_err(analytic, (plus - minus) / (2.0 * h)));
        };
        macro_rules! sweep {
            ($field:ident) => {
                for i in 0..m.$field.len() {
                    let mut p = m.clone();
                    p.$field[i] += h;
                    let mut q = m.clone();
                    q.$field[i] -= h;
                    check(g.$field[i], loss_of(&p, x, label), loss_of(&q, x, label));
                }
            };
        }
        sweep!(w1);
        sweep!(b1);
        sweep!(w2);
        sweep!(b2);
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            xp[i] += h;
            let mut xm = x.to_vec();
            xm[i] -= h;
            check(dx[i], loss_of(m, &xp, label), loss_of(m, &xm, label));
        }
        worst
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let mut r = rng::seeded(12);
        for _ in 0..100 {
            let m = Mlp2::new(6, 8, 3, &mut r);
            let mut m = m;
            m.b1.iter_mut().for_each(|b| *b = rng::uniform(&mut r, -0.5, 0.5));
            m.b2.iter_mut().for_each(|b| *b = rng::uniform(&mut r, -0.5, 0.5));
            let x: Vec<f64> = (0..6).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect();
            let label = rng::below(&mut r, 3);
            let e = mlp_fd_error(&m, &x, label);
            assert!(e < 1e-5, "relative error {e}");
        }
    }

    #[test]
    fn output_bias_gradient_closed_form() {
        let m = Mlp2::from_parts(3, 4, 3, vec![0.0; 12], vec![0.0; 4], vec![0.3; 12], vec![0.2, -0.1, 0.5], ).unwrap();
        let (g, _) = mlp_backward(&m, &[0.0; 3], 2);
        let mut expected = math::softmax(&[0.2, -0.1, 0.5], ActivationKind::NaturalExp).unwrap();
        expected[2] -= 1.0;
        for (a, b) in g.b2.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn duplicated_hidden_units_get_identical_gradients() {
        let mut m = Mlp2::new(4, 2, 3, &mut rng::seeded(1));
        let (r0, r1) = m.w1.split_at_mut(4);
        r1.copy_from_slice(r0);
        for c in 0..3 {
            m.w2[c * 2 + 1] = m.w2[c * 2];
        }
        let (g, _) = mlp_backward(&m, &[0.2, 0.4, 0.1, 0.9], 0);
        assert_eq!(g.w1[..4], g.w1[4..]);
        assert_eq!(g.b1[0], g.b1[1]);
    }

    #[test]
    fn xor_is_learned() {
        let px = vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0];
        let ds = LabeledDataset::new(1, 2, 2, px, vec![0, 1, 1, 0]).unwrap();
        let mut best = f64::INFINITY;
        // a ReLU net this small can start with dead units; try a few seeds
        for seed in 0..5 {
            let mut m = Mlp2::new(2, 4, 2, &mut rng::seeded(seed));
            let opt = OptimizerConfig::sgd(0.5, 4, 5000);
            train_mlp_with(&mut m, &ds, &opt, MlpTrainable::All, seed, None).unwrap();
            let loss: f64 = (0..4).map(|i| loss_of(&m, ds.sample(i), ds.label(i))).sum::<f64>() / 4.0;
            best = best.min(loss);
        }
        assert!(best < 0.01, "loss {best}");
    }

    #[test]
    fn zero_learning_rate_is_bit_identical() {
        let ds = LabeledDataset::new(1, 3, 2, vec![0.1, 0.5, 0.9, 1.0, 0.0, 0.3], vec![0, 1]).unwrap();
        for opt in [OptimizerConfig::sgd(0.0, 1, 3), OptimizerConfig { learning_rate: 0.0, ..OptimizerConfig::adam(3, 1) }] {
            let mut m = Mlp2::new(3, 5, 2, &mut rng::seeded(2));
            let before = m.clone();
            train_mlp_with(&mut m, &ds, &opt, MlpTrainable::All, 0, None).unwrap();
            assert_eq!(m, before);
            let lin = train_linear(&[0.1, 0.2, 0.3, 0.4], 2, &[0, 1], 2, &opt, 0).unwrap();
            assert_eq!(lin, LinearClassifier::zeros(2, 2));
        }
    }

    #[test]
    fn first_layer_only_keeps_output_layer() {
        let ds = LabeledDataset::new(1, 3, 2, vec![0.1, 0.5, 0.9, 1.0, 0.0, 0.3], vec![0, 1]).unwrap();
        let mut m = Mlp2::new(3, 5, 2, &mut rng::seeded(3));
        let (w2, b2, w1) = (m.w2.clone(), m.b2.clone(), m.w1.clone());
        train_mlp_first_layer_only(&mut m, &ds, &OptimizerConfig::sgd(0.1, 1, 5), 0).unwrap();
        assert_eq!((m.w2.clone(), m.b2.clone()), (w2, b2));
        assert_ne!(m.w1, w1);
    }

    #[test]
    fn separable_readout_reaches_full_accuracy() {
        let mut r = rng::seeded(5);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let c = i % 2;
            let base = if c == 0 { [0.8, 0.2] } else { [0.2, 0.8] };
            features.extend(base.iter().map(|b| b + rng::uniform(&mut r, -0.1, 0.1)));
            labels.push(c);
        }
        let m = train_linear(&features, 2, &labels, 2, &OptimizerConfig::adam(50, 8), 1).unwrap();
        let correct = (0..200).filter(|&i| m.predict(&features[i * 2..i * 2 + 2]) == labels[i]).count();
        assert_eq!(correct, 200);
    }

    #[test]
    fn divergence_is_reported() {
        let ds = LabeledDataset::new(1, 2, 2, vec![1.0, 1.0, 0.0, 1.0], vec![0, 1]).unwrap();
        let mut m = Mlp2::new(2, 3, 2, &mut rng::seeded(0));
        m.w2[0] = f64::INFINITY;
        m.w1.iter_mut().for_each(|w| *w = w.abs() + 0.1);
        assert!(matches!(
            train_mlp_with(&mut m, &ds, &OptimizerConfig::sgd(0.1, 1, 1), MlpTrainable::All, 0, None),
            Err(Error::DivergenceDetected { .. })
        ));
    }

    #[test]
    fn readout_leaves_layer_untouched() {
        let ds = LabeledDataset::new(1, 3, 2, vec![0.1, 0.5, 0.9, 1.0, 0.0, 0.3, 0.2, 0.2, 0.9], vec![0, 1, 0]).unwrap();
        let view = crate::dataset::preprocess(&ds, Default::default()).unwrap();
        let wta = WtaLayer::random(4, 3, ActivationKind::BaseExp(1000.0), crate::BiasMode::AdditiveLog, &mut rng::seeded(3)).unwrap();
        let sum = wta.checksum();
        train_readout(&wta, &view, 2, &OptimizerConfig::adam(5, 2), 0).unwrap();
        assert_eq!(sum, wta.checksum());
    }

    proptest! {
        #[test]
        fn output_gradient_is_probabilities_minus_onehot(logits in proptest::collection::vec(-20f64..20.0, 2..12), pick in 0usize..100) {
            let label = pick % logits.len();
            let mut g = vec![0.0; logits.len()];
            softmax_xent(&logits, label, &mut g);
            let p = math::softmax(&logits, ActivationKind::NaturalExp).unwrap();
            for (c, (gc, pc)) in g.iter().zip(&p).enumerate() {
                let expected = pc - if c == label { 1.0 } else { 0.0 };
                prop_assert!((gc - expected).abs() <= 1e-12);
            }
        }
    }
}
