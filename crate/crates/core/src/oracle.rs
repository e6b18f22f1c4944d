//! Synthetic directional mixtures with known centroids and priors, and
//! brute-force checks of what the plasticity rules should converge to.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{preprocess, BlankFramePolicy, LabeledDataset};
use crate::eval::{train_softhebb, SoftHebbConfig};
use crate::fmath;
use crate::layer::{BiasMode, InferenceMode, LearningRateSchedule, TrainConfig, WeightInit, WtaLayer};
use crate::math::{self, ActivationKind};
use crate::rng::{self, Rng};
use crate::{Error, Result};

pub const DEFAULT_MIN_ANGLE_DEG: f64 = 30.0;

/// Monte-Carlo draws used to estimate each component's mean length.
const NORM_CONSTANT_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MixtureSpec {
    n: usize,
    centroids: Vec<f64>,
    priors: Vec<f64>,
    concentration: f64,
    /// `c_k = 1/‖E[x | C_k]‖`, estimated once at construction.
    norm_constants: Vec<f64>,
    /// Seed of the generator that produced the centroids, if any.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub x: Vec<f64>,
    pub cause: usize,
}

impl MixtureSpec {
    /// Centroids are normalized on the way in. `concentration` is the inverse
    /// variance of the isotropic noise added to a centroid before
    /// renormalizing.
    pub fn new(
        n: usize,
        centroids: Vec<f64>,
        priors: Vec<f64>,
        concentration: f64,
        min_angle_deg: f64,
    ) -> Result<Self> {
        let k = priors.len();
        if k == 0 || n == 0 || centroids.len() != k * n {
            return Err(Error::DimensionMismatch {
                expected: k * n,
                found: centroids.len(),
            });
        }
        if priors.iter().any(|&p| !(p > 0.0)) || (priors.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "priors must be positive and sum to 1".into(),
            ));
        }
        if !(concentration > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "concentration must be positive, got {concentration}"
            )));
        }
        let mut unit = Vec::with_capacity(centroids.len());
        for c in centroids.chunks(n) {
            unit.extend(math::l2_normalize(c)?);
        }
        let min_angle = min_angle_deg.to_radians();
        for a in 0..k {
            for b in a + 1..k {
                let angle = fmath::acos(math::dot(&unit[a * n..(a + 1) * n], &unit[b * n..(b + 1) * n]).clamp(-1.0, 1.0));
                if angle < min_angle {
                    return Err(Error::InvalidParameter(format!(
                        "centroids {a} and {b} are {:.1} degrees apart, below {min_angle_deg}",
                        angle.to_degrees()
                    )));
                }
            }
        }
        let mut spec = Self {
            n,
            centroids: unit,
            priors,
            concentration,
            norm_constants: vec![1.0; k],
            seed: None,
        };
        spec.norm_constants = spec.estimate_norm_constants();
        Ok(spec)
    }

    /// Random unit centroids drawn until every pair is at least
    /// `min_angle_deg` apart.
    pub fn random(
        n: usize,
        priors: Vec<f64>,
        concentration: f64,
        min_angle_deg: f64,
        seed: u64,
    ) -> Result<Self> {
        let k = priors.len();
        let mut r = rng::seeded(seed);
        let min_cos = fmath::cos_deg(min_angle_deg);
        let mut centroids: Vec<f64> = Vec::with_capacity(k * n);
        let mut attempts = 0;
        while centroids.len() < k * n {
            attempts += 1;
            if attempts > 100_000 {
                return Err(Error::InvalidParameter(format!(
                    "cannot place {k} centroids {min_angle_deg} degrees apart in {n} dimensions"
                )));
            }
            let mut c: Vec<f64> = (0..n).map(|_| rng::normal(&mut r)).collect();
            if math::l2_normalize_in_place(&mut c).is_err() {
                continue;
            }
            if centroids.chunks(n).all(|o| math::dot(o, &c) <= min_cos) {
                centroids.extend(c);
            }
        }
        let mut spec = Self::new(n, centroids, priors, concentration, min_angle_deg)?;
        spec.seed = Some(seed);
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> usize {
        self.priors.len()
    }

    pub fn centroid(&self, k: usize) -> &[f64] {
        &self.centroids[k * self.n..(k + 1) * self.n]
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn concentration(&self) -> f64 {
        self.concentration
    }

    pub fn norm_constants(&self) -> &[f64] {
        &self.norm_constants
    }

    /// Noise standard deviation per coordinate.
    pub fn noise_std(&self) -> f64 {
        1.0 / fmath::sqrt(self.concentration)
    }

    fn draw_from(&self, k: usize, r: &mut Rng) -> Vec<f64> {
        let s = self.noise_std();
        loop {
            let mut x: Vec<f64> = self
                .centroid(k)
                .iter()
                .map(|&m| m + s * rng::normal(r))
                .collect();
            if math::l2_normalize_in_place(&mut x).is_ok() {
                return x;
            }
        }
    }

    fn draw_cause(&self, r: &mut Rng) -> usize {
        let u = rng::uniform(r, 0.0, 1.0);
        let mut acc = 0.0;
        for (k, p) in self.priors.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.priors.len() - 1
    }

    fn estimate_norm_constants(&self) -> Vec<f64> {
        let mut r = rng::seeded(0x6e6f_726d);
        (0..self.components())
            .map(|k| {
                let mut mean = vec![0.0; self.n];
                for _ in 0..NORM_CONSTANT_SAMPLES {
                    for (m, x) in mean.iter_mut().zip(self.draw_from(k, &mut r)) {
                        *m += x;
                    }
                }
                let len = math::norm(&mean) / NORM_CONSTANT_SAMPLES as f64;
                1.0 / len
            })
            .collect()
    }

    /// A layer sitting at the optimum: rows on the centroids, biases at the
    /// log priors (or the priors themselves for a multiplicative layer).
    pub fn optimal_layer(&self, activation: ActivationKind, bias_mode: BiasMode) -> Result<WtaLayer> {
        let biases = match bias_mode {
            BiasMode::MultiplicativePrior => self.priors.clone(),
            _ => self.priors.iter().map(|&p| fmath::ln(p)).collect(),
        };
        WtaLayer::from_parts(self.components(), self.n, self.centroids.clone(), biases, activation, bias_mode)
    }
}

pub fn sample(spec: &MixtureSpec, count: usize, seed: u64) -> Vec<SyntheticSample> {
    let mut r = rng::seeded(seed);
    (0..count)
        .map(|_| {
            let cause = spec.draw_cause(&mut r);
            SyntheticSample {
                x: spec.draw_from(cause, &mut r),
                cause,
            }
        })
        .collect()
}

/// Packs samples into a dataset whose labels are the true causes.
pub fn to_dataset(spec: &MixtureSpec, samples: &[SyntheticSample]) -> Result<LabeledDataset> {
    let flat = samples.iter().flat_map(|s| s.x.iter().copied()).collect();
    let labels = samples.iter().map(|s| s.cause).collect();
    LabeledDataset::new_signed(1, spec.dim(), spec.components(), flat, labels)
}

/// `softmax_k(cos(μ_k, x) + ln P(C_k))`.
pub fn true_posterior(spec: &MixtureSpec, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: x.len(),
        });
    }
    let logits: Vec<f64> = (0..spec.components())
        .map(|k| math::dot(spec.centroid(k), x) + fmath::ln(spec.priors[k]))
        .collect();
    math::softmax(&logits, ActivationKind::NaturalExp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedUpdate {
    /// Monte-Carlo mean of `Δw_k`.
    pub mean: Vec<f64>,
    /// Per-coordinate standard error of `mean`.
    pub standard_error: Vec<f64>,
    /// Mean and standard error of the additive-log bias delta.
    pub bias_mean: f64,
    pub bias_standard_error: f64,
}

impl ExpectedUpdate {
    pub fn norm(&self) -> f64 {
        math::norm(&self.mean)
    }

    /// Length of the standard-error vector: the typical `‖mean‖` when the
    /// true expectation is zero.
    pub fn standard_error_norm(&self) -> f64 {
        math::norm(&self.standard_error)
    }
}

pub const MIN_MC_SAMPLES: usize = 10_000;

/// Monte-Carlo `E[Δw_k]` under the mixture, with `η = 1`.
pub fn expected_update_oracle(
    spec: &MixtureSpec,
    layer: &WtaLayer,
    neuron: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<ExpectedUpdate> {
    expected_update_oracle_with_eta(spec, layer, neuron, mc_samples, seed, 1.0)
}

pub fn expected_update_oracle_with_eta(
    spec: &MixtureSpec,
    layer: &WtaLayer,
    neuron: usize,
    mc_samples: usize,
    seed: u64,
    eta: f64,
) -> Result<ExpectedUpdate> {
    if mc_samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "at least {MIN_MC_SAMPLES} Monte-Carlo samples required, got {mc_samples}"
        )));
    }
    if neuron >= layer.neurons() || layer.inputs() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: layer.inputs(),
        });
    }
    let n = spec.dim();
    let w = layer.row(neuron);
    let b = layer.biases()[neuron];
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    let (mut bsum, mut bsum_sq) = (0.0, 0.0);
    let mut r = rng::seeded(seed);
    let mut delta = vec![0.0; n];
    for _ in 0..mc_samples {
        let cause = spec.draw_cause(&mut r);
        let x = spec.draw_from(cause, &mut r);
        let out = layer.forward_posterior(&x, InferenceMode::Soft)?;
        let (y, u) = (out.posteriors[neuron], out.pre_activations[neuron]);
        for i in 0..n {
            delta[i] = eta * y * (x[i] - u * w[i]);
            sum[i] += delta[i];
            sum_sq[i] += delta[i] * delta[i];
        }
        let db = eta * (fmath::exp(out.log_posteriors[neuron] - b) - 1.0);
        bsum += db;
        bsum_sq += db * db;
    }
    let m = mc_samples as f64;
    let se = |s: f64, s2: f64| {
        let mean = s / m;
        fmath::sqrt(((s2 / m - mean * mean).max(0.0)) / (m - 1.0))
    };
    Ok(ExpectedUpdate {
        mean: sum.iter().map(|s| s / m).collect(),
        standard_error: sum.iter().zip(&sum_sq).map(|(&s, &s2)| se(s, s2)).collect(),
        bias_mean: bsum / m,
        bias_standard_error: se(bsum, bsum_sq),
    })
}

/// Neuron-to-component map by maximum cosine. Two neurons landing on the
/// same component is an error, so a success is always a bijection when the
/// layer has as many neurons as the spec has components.
pub fn greedy_assignment(spec: &MixtureSpec, layer: &WtaLayer) -> Result<Vec<usize>> {
    if layer.inputs() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: layer.inputs(),
        });
    }
    let mut owner: Vec<Option<usize>> = vec![None; spec.components()];
    let mut assignment = Vec::with_capacity(layer.neurons());
    for k in 0..layer.neurons() {
        let cos: Vec<f64> = (0..spec.components())
            .map(|c| math::cosine_similarity(layer.row(k), spec.centroid(c)))
            .collect::<Result<_>>()?;
        let c = math::argmax(&cos);
        if let Some(first) = owner[c] {
            return Err(Error::UnmatchedNeuron {
                first,
                second: k,
                component: c,
            });
        }
        owner[c] = Some(k);
        assignment.push(c);
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub max_centroid_angle_error: f64,
    pub max_prior_abs_error: f64,
    pub max_norm_error: f64,
    pub angle_errors: Vec<f64>,
    pub prior_errors: Vec<f64>,
    pub norm_errors: Vec<f64>,
}

/// Compares a trained layer with the spec it was trained on.
/// `assignment[k]` is the component matched to neuron `k`.
pub fn verify_equilibrium(
    spec: &MixtureSpec,
    trained: &WtaLayer,
    assignment: &[usize],
) -> Result<EquilibriumReport> {
    if assignment.len() != trained.neurons() {
        return Err(Error::DimensionMismatch {
            expected: trained.neurons(),
            found: assignment.len(),
        });
    }
    let mut angle_errors = Vec::with_capacity(assignment.len());
    let mut prior_errors = Vec::with_capacity(assignment.len());
    let mut norm_errors = Vec::with_capacity(assignment.len());
    for (k, &c) in assignment.iter().enumerate() {
        let cos = math::cosine_similarity(trained.row(k), spec.centroid(c))?;
        angle_errors.push(fmath::acos(cos));
        prior_errors.push((trained.prior(k) - spec.priors[c]).abs());
        norm_errors.push((trained.row_norm(k) - 1.0).abs());
    }
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    Ok(EquilibriumReport {
        max_centroid_angle_error: max(&angle_errors),
        max_prior_abs_error: max(&prior_errors),
        max_norm_error: max(&norm_errors),
        angle_errors,
        prior_errors,
        norm_errors,
    })
}

/// One neuron per component, η decaying linearly from 0.05 to 0 over
/// `samples` steps, soft inference, sample-based farthest-point init.
pub fn theory_config(spec: &MixtureSpec, activation: ActivationKind, bias_mode: BiasMode, samples: usize) -> SoftHebbConfig {
    SoftHebbConfig {
        neurons: spec.components(),
        activation,
        bias_mode,
        init: WeightInit::FarthestPointSamples,
        train: TrainConfig::new(
            LearningRateSchedule::Linear {
                start: 0.05,
                end: 0.0,
                total_steps: samples as u64,
            },
            InferenceMode::Soft,
        ),
        epochs: 1,
    }
}

/// Trains `cfg` for one pass over `samples` fresh draws from `spec`, matches
/// neurons to components and reports the errors against the ground truth.
pub fn train_on_mixture(
    spec: &MixtureSpec,
    cfg: &SoftHebbConfig,
    samples: usize,
    seed: u64,
) -> Result<(WtaLayer, EquilibriumReport)> {
    let data = to_dataset(spec, &sample(spec, samples, rng::derive_seed(seed, 0x7468)))?;
    let view = preprocess(&data, BlankFramePolicy::Error)?;
    let (layer, _) = train_softhebb(cfg, &view, seed, None)?;
    let assignment = greedy_assignment(spec, &layer)?;
    let report = verify_equilibrium(spec, &layer, &assignment)?;
    Ok((layer, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymmetricDensity {
    Gaussian { sigma: f64 },
    Laplace { scale: f64 },
}

impl SymmetricDensity {
    fn at(&self, x: f64, mean: f64) -> f64 {
        match *self {
            SymmetricDensity::Gaussian { sigma } => {
                let z = (x - mean) / sigma;
                fmath::exp(-0.5 * z * z) / (sigma * fmath::sqrt(2.0 * core::f64::consts::PI))
            }
            SymmetricDensity::Laplace { scale } => {
                fmath::exp(-fmath::abs(x - mean) / scale) / (2.0 * scale)
            }
        }
    }
}

/// Trapezoid rule on `points` evenly spaced nodes over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// Mean of the normalized product of two densities that share the centre
/// `mean`. Symmetry says the answer is `mean` itself.
pub fn symmetric_product_mean_check(
    mean: f64,
    grid: Quadrature,
    dist_a: SymmetricDensity,
    dist_b: SymmetricDensity,
) -> Result<f64> {
    if grid.points < 2 || !(grid.hi > grid.lo) {
        return Err(Error::InvalidParameter("quadrature needs at least two nodes on a non-empty interval".into()));
    }
    let h = (grid.hi - grid.lo) / (grid.points - 1) as f64;
    let (mut z, mut first) = (0.0, 0.0);
    for i in 0..grid.points {
        let x = grid.lo + h * i as f64;
        let w = if i == 0 || i == grid.points - 1 { 0.5 } else { 1.0 };
        let f = dist_a.at(x, mean) * dist_b.at(x, mean);
        z += w * f;
        first += w * f * x;
    }
    z *= h;
    first *= h;
    if z < 1e-12 {
        return Err(Error::QuadratureFailure(z));
    }
    Ok(first / z)
}
