//! Numeric kernels shared by the rest of the crate: normalization, cosine
//! similarity, the soft-WTA normalization for every activation kind, and the
//! activations themselves.

use alloc::format;
use alloc::vec::Vec;

use crate::fmath;
use crate::{Error, Result};

/// Norms below this are treated as zero vectors.
pub const NORM_FLOOR: f64 = 1e-12;

/// Shape of the per-neuron likelihood `h(u)`.
///
/// The exponential kinds are all `exp(s·u)` for some scale `s`: 1 for the
/// natural base, `ln b` for base `b`, `1/T` for temperature `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ActivationKind {
    NaturalExp,
    BaseExp(f64),
    TemperatureExp(f64),
    Relu,
    RectifiedPoly(u32),
}

impl ActivationKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ActivationKind::BaseExp(b) if !(b > 0.0 && b != 1.0 && b.is_finite()) => Err(
                Error::InvalidParameter(format!("exponential base must be positive and not 1, got {b}")),
            ),
            ActivationKind::TemperatureExp(t) if !(t > 0.0 && t.is_finite()) => Err(
                Error::InvalidParameter(format!("temperature must be positive, got {t}")),
            ),
            ActivationKind::RectifiedPoly(0) => Err(Error::InvalidParameter(
                "rectified polynomial degree must be at least 1".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn is_exponential(&self) -> bool {
        self.log_scale().is_some()
    }

    /// `s` such that `h(u) = exp(s·u)`, or `None` for the rectified kinds.
    pub fn log_scale(&self) -> Option<f64> {
        match *self {
            ActivationKind::NaturalExp => Some(1.0),
            ActivationKind::BaseExp(b) => Some(fmath::ln(b)),
            ActivationKind::TemperatureExp(t) => Some(1.0 / t),
            ActivationKind::Relu | ActivationKind::RectifiedPoly(_) => None,
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    fmath::sqrt(dot(v, v))
}

fn checked_norm(v: &[f64], floor: f64) -> Result<f64> {
    let n = norm(v);
    if n < floor || !n.is_finite() {
        return Err(Error::ZeroVector { norm: n, floor });
    }
    Ok(n)
}

/// Returns `v / ‖v‖`.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    l2_normalize_with_floor(v, NORM_FLOOR)
}

pub fn l2_normalize_with_floor(v: &[f64], floor: f64) -> Result<Vec<f64>> {
    let n = checked_norm(v, floor)?;
    Ok(v.iter().map(|x| x / n).collect())
}

/// Normalizes in place and returns the original norm.
pub fn l2_normalize_in_place(v: &mut [f64]) -> Result<f64> {
    let n = checked_norm(v, NORM_FLOOR)?;
    v.iter_mut().for_each(|x| *x /= n);
    Ok(n)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let na = checked_norm(a, NORM_FLOOR)?;
    let nb = checked_norm(b, NORM_FLOOR)?;
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// `h(u)` for the given kind. Always non-negative and non-decreasing in `u`.
pub fn activation(u: f64, kind: ActivationKind) -> f64 {
    match kind {
        ActivationKind::Relu => u.max(0.0),
        ActivationKind::RectifiedPoly(d) => fmath::powi(u.max(0.0), d),
        _ => fmath::exp(kind.log_scale().unwrap_or(1.0) * u),
    }
}

/// Normalizes `h(logits)` into a distribution.
///
/// Exponential kinds subtract the largest scaled logit before exponentiating,
/// and base-`b` is evaluated as `exp(x·ln b)`.
pub fn softmax(logits: &[f64], kind: ActivationKind) -> Result<Vec<f64>> {
    let mut out = alloc::vec![0.0; logits.len()];
    softmax_into(logits, kind, &mut out)?;
    Ok(out)
}

pub fn softmax_into(logits: &[f64], kind: ActivationKind, out: &mut [f64]) -> Result<()> {
    if logits.is_empty() {
        return Err(Error::InvalidParameter("softmax of an empty vector".into()));
    }
    if out.len() != logits.len() {
        return Err(Error::DimensionMismatch {
            expected: logits.len(),
            found: out.len(),
        });
    }
    match kind.log_scale() {
        Some(s) => {
            let max = logits
                .iter()
                .map(|&l| s * l)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (o, &l) in out.iter_mut().zip(logits) {
                *o = fmath::exp(s * l - max);
                sum += *o;
            }
            out.iter_mut().for_each(|o| *o /= sum);
        }
        None => {
            let mut sum = 0.0;
            for (o, &l) in out.iter_mut().zip(logits) {
                *o = activation(l, kind);
                sum += *o;
            }
            if !(sum > 0.0) {
                return Err(Error::DegeneratePosterior(sum));
            }
            out.iter_mut().for_each(|o| *o /= sum);
        }
    }
    Ok(())
}

/// Natural-base log-softmax, written into `out`.
pub fn log_softmax_into(logits: &[f64], out: &mut [f64]) {
    let lse = fmath::log_sum_exp(logits);
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = l - lse;
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn normalize_three_four_five() {
        assert_eq!(l2_normalize(&[3.0, 4.0]).unwrap(), vec![0.6, 0.8]);
        assert_eq!(l2_normalize(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn normalize_zero_is_an_error() {
        assert!(matches!(l2_normalize(&[0.0, 0.0]), Err(Error::ZeroVector { .. })));
        assert!(matches!(
            l2_normalize(&[1e-13, 0.0]),
            Err(Error::ZeroVector { .. })
        ));
    }

    #[test]
    fn cosine_examples() {
        assert!(close(cosine_similarity(&[2.0, -1.0], &[2.0, -1.0]).unwrap(), 1.0, 1e-15));
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        // direct dot/norm evaluation
        let direct = (1.0 * 1.0 + 1.0 * 0.0) / ((1.0f64 + 1.0).sqrt() * 1.0);
        let c = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!(close(c, direct, 1e-15));
        assert!(close(c, core::f64::consts::FRAC_1_SQRT_2, 1e-15));
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn softmax_examples() {
        for kind in [
            ActivationKind::NaturalExp,
            ActivationKind::BaseExp(1000.0),
            ActivationKind::TemperatureExp(0.3),
        ] {
            let y = softmax(&[0.7; 4], kind).unwrap();
            assert!(y.iter().all(|&p| close(p, 0.25, 1e-15)));
        }
        // logistic closed form 1/(1+e^-1)
        let logistic = 1.0 / (1.0 + (-1.0f64).exp());
        let y = softmax(&[1.0, 0.0], ActivationKind::NaturalExp).unwrap();
        assert!(close(y[0], logistic, 1e-15));
        assert!(close(y[0], 0.73105858, 1e-8));
        assert!(close(y[1], 0.26894142, 1e-8));

        let base = softmax(&[1.0, 0.0], ActivationKind::BaseExp(1000.0)).unwrap();
        let temp = softmax(
            &[1.0, 0.0],
            ActivationKind::TemperatureExp(1.0 / 1000f64.ln()),
        )
        .unwrap();
        for (a, b) in base.iter().zip(&temp) {
            assert!(close(*a, *b, 1e-12));
        }
    }

    #[test]
    fn softmax_survives_large_logits() {
        let logits: Vec<f64> = (0..2000).map(|i| 1e3 - i as f64 * 0.5).collect();
        let y = softmax(&logits, ActivationKind::BaseExp(1000.0)).unwrap();
        assert!(y.iter().all(|p| p.is_finite()));
        assert!(close(y.iter().sum::<f64>(), 1.0, 1e-9));
    }

    #[test]
    fn rectified_softmax_of_negative_logits_is_degenerate() {
        assert!(matches!(
            softmax(&[-1.0, -0.5], ActivationKind::Relu),
            Err(Error::DegeneratePosterior(_))
        ));
        let y = softmax(&[0.5, 0.25, -1.0], ActivationKind::RectifiedPoly(2)).unwrap();
        assert!(close(y[0], 0.8, 1e-15) && close(y[1], 0.2, 1e-15) && y[2] == 0.0);
    }

    #[test]
    fn activation_examples() {
        assert_eq!(activation(0.0, ActivationKind::Relu), 0.0);
        assert_eq!(activation(0.0, ActivationKind::NaturalExp), 1.0);
        assert_eq!(activation(0.5, ActivationKind::RectifiedPoly(2)), 0.25);
        assert_eq!(activation(-0.5, ActivationKind::RectifiedPoly(3)), 0.0);
        assert!(close(activation(1.0, ActivationKind::BaseExp(1000.0)), 1000.0, 1e-9));
    }

    #[test]
    fn validate_rejects_bad_parameters() {
        assert!(ActivationKind::BaseExp(1.0).validate().is_err());
        assert!(ActivationKind::BaseExp(-2.0).validate().is_err());
        assert!(ActivationKind::TemperatureExp(0.0).validate().is_err());
        assert!(ActivationKind::RectifiedPoly(0).validate().is_err());
        assert!(ActivationKind::BaseExp(1000.0).validate().is_ok());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    fn exp_kind() -> impl Strategy<Value = ActivationKind> {
        prop_oneof![
            Just(ActivationKind::NaturalExp),
            (1.01f64..1e4).prop_map(ActivationKind::BaseExp),
            (0.01f64..10.0).prop_map(ActivationKind::TemperatureExp),
        ]
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(logits in proptest::collection::vec(-1e3f64..1e3, 1..4096), kind in exp_kind()) {
            let y = softmax(&logits, kind).unwrap();
            prop_assert!(y.iter().all(|&p| p >= 0.0));
            prop_assert!((y.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn softmax_shift_invariant(logits in proptest::collection::vec(-50f64..50.0, 1..64), c in -100f64..100.0, kind in exp_kind()) {
            let shifted: Vec<f64> = logits.iter().map(|l| l + c).collect();
            let a = softmax(&logits, kind).unwrap();
            let b = softmax(&shifted, kind).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }

        #[test]
        fn cosine_is_scale_invariant(v in proptest::collection::vec(-10f64..10.0, 1..32), lambda in 1e-3f64..1e3) {
            prop_assume!(norm(&v) > 1e-6);
            let scaled: Vec<f64> = v.iter().map(|x| x * lambda).collect();
            prop_assert!((cosine_similarity(&v, &scaled).unwrap() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn normalized_vectors_have_unit_norm(v in proptest::collection::vec(-1e3f64..1e3, 1..64)) {
            prop_assume!(norm(&v) > 1e-6);
            let u = l2_normalize(&v).unwrap();
            prop_assert!((norm(&u) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn activation_is_monotone(a in -5f64..5.0, b in -5f64..5.0, d in 1u32..5) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for kind in [ActivationKind::Relu, ActivationKind::RectifiedPoly(d), ActivationKind::NaturalExp, ActivationKind::BaseExp(1000.0)] {
                prop_assert!(activation(lo, kind) <= activation(hi, kind));
                prop_assert!(activation(lo, kind) >= 0.0);
            }
        }
    }
}
