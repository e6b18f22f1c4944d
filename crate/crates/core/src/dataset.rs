//! Labeled samples held as raw pixels in `[0, 1]`, plus the unit-norm view
//! the layer trains on.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    rows: usize,
    cols: usize,
    classes: usize,
    samples: Vec<f64>,
    labels: Vec<usize>,
    permutation: Vec<usize>,
    /// Free-form source records, e.g. `"train-images-idx3-ubyte sha256:ab12…"`.
    pub provenance: Vec<String>,
}

impl LabeledDataset {
    /// `samples` is row-major, `labels.len()` rows of `rows * cols` values.
    pub fn new(
        rows: usize,
        cols: usize,
        classes: usize,
        samples: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        let n = rows * cols;
        if n == 0 {
            return Err(Error::InvalidParameter("sample dimension must be positive".into()));
        }
        if samples.len() != labels.len() * n {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * n,
                found: samples.len(),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidParameter(format!(
                "label {l} outside 0..{classes}"
            )));
        }
        if samples.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter("pixel outside [0, 1]".into()));
        }
        Self::new_signed(rows, cols, classes, samples, labels)
    }

    /// Like [`new`](Self::new) but only requires finite values. For synthetic
    /// data that is not an image.
    pub fn new_signed(
        rows: usize,
        cols: usize,
        classes: usize,
        samples: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        let n = rows * cols;
        if n == 0 || samples.len() != labels.len() * n {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * n,
                found: samples.len(),
            });
        }
        if labels.iter().any(|&l| l >= classes) || samples.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("label out of range or non-finite value".into()));
        }
        let permutation = (0..labels.len()).collect();
        Ok(Self {
            rows,
            cols,
            classes,
            samples,
            labels,
            permutation,
            provenance: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.samples[i * n..(i + 1) * n]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn set_permutation(&mut self, p: Vec<usize>) -> Result<()> {
        if !is_permutation(&p, self.len()) {
            return Err(Error::InvalidParameter(
                "presentation order is not a permutation of the samples".into(),
            ));
        }
        self.permutation = p;
        Ok(())
    }

    /// Replaces the presentation order with a seeded shuffle and returns it.
    pub fn shuffle(&mut self, seed: u64) -> &[usize] {
        self.permutation = rng::permutation(self.len(), &mut rng::seeded(seed));
        &self.permutation
    }

    /// The first `count` samples (by index, not presentation order).
    pub fn head(&self, count: usize) -> Self {
        let count = count.min(self.len());
        let n = self.dim();
        let mut out = Self {
            rows: self.rows,
            cols: self.cols,
            classes: self.classes,
            samples: self.samples[..count * n].to_vec(),
            labels: self.labels[..count].to_vec(),
            permutation: (0..count).collect(),
            provenance: self.provenance.clone(),
        };
        out.provenance.push(format!("head {count}"));
        out
    }
}

pub fn is_permutation(p: &[usize], n: usize) -> bool {
    if p.len() != n {
        return false;
    }
    let mut seen = alloc::vec![false; n];
    for &i in p {
        if i >= n || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BlankFramePolicy {
    #[default]
    Skip,
    Error,
}

/// Unit-norm copy of a dataset. Rows follow dataset order, minus skipped
/// blank frames.
#[derive(Debug, Clone)]
pub struct NormalizedView {
    dim: usize,
    samples: Vec<f64>,
    labels: Vec<usize>,
    row_of: Vec<Option<usize>>,
    pub skipped: usize,
}

impl NormalizedView {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.samples[r * self.dim..(r + 1) * self.dim]
    }

    pub fn label(&self, r: usize) -> usize {
        self.labels[r]
    }

    /// Number of samples in the source dataset, skipped ones included.
    pub fn source_len(&self) -> usize {
        self.row_of.len()
    }

    /// View row holding dataset sample `i`, or `None` if it was skipped.
    pub fn row_of(&self, i: usize) -> Option<usize> {
        self.row_of[i]
    }

    /// Maps a presentation order over dataset indices to view rows.
    pub fn rows_in_order<'a>(&'a self, order: &'a [usize]) -> impl Iterator<Item = usize> + 'a {
        order.iter().filter_map(|&i| self.row_of[i])
    }
}

pub fn preprocess(ds: &LabeledDataset, policy: BlankFramePolicy) -> Result<NormalizedView> {
    let n = ds.dim();
    let mut samples = Vec::with_capacity(ds.len() * n);
    let mut labels = Vec::with_capacity(ds.len());
    let mut row_of = Vec::with_capacity(ds.len());
    let mut skipped = 0;
    for i in 0..ds.len() {
        match math::l2_normalize(ds.sample(i)) {
            Ok(v) => {
                row_of.push(Some(labels.len()));
                samples.extend_from_slice(&v);
                labels.push(ds.label(i));
            }
            Err(e @ Error::ZeroVector { .. }) => match policy {
                BlankFramePolicy::Skip => {
                    row_of.push(None);
                    skipped += 1;
                }
                BlankFramePolicy::Error => return Err(e),
            },
            Err(e) => return Err(e),
        }
    }
    Ok(NormalizedView {
        dim: n,
        samples,
        labels,
        row_of,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn fixture() -> LabeledDataset {
        let mut px = vec![0.5; 784];
        px.extend(vec![0.0; 784]);
        px.extend((0..784).map(|i| (i % 2) as f64));
        LabeledDataset::new(28, 28, 10, px, vec![3, 1, 7]).unwrap()
    }

    #[test]
    fn constant_frame_normalizes_to_one_over_28() {
        let view = preprocess(&fixture(), BlankFramePolicy::Skip).unwrap();
        let expected = 1.0 / (784f64).sqrt();
        assert!((expected - 0.035714).abs() < 1e-6);
        assert!(view.row(0).iter().all(|&p| (p - expected).abs() < 1e-15));
    }

    #[test]
    fn blank_frames_follow_policy() {
        let ds = fixture();
        let view = preprocess(&ds, BlankFramePolicy::Skip).unwrap();
        assert_eq!(view.len(), 2);
        assert_eq!(view.skipped, 1);
        assert_eq!(view.row_of(1), None);
        assert_eq!(view.label(1), 7);
        assert_eq!(view.rows_in_order(&[2, 1, 0]).collect::<Vec<_>>(), vec![1, 0]);
        for r in 0..view.len() {
            assert!((math::norm(view.row(r)) - 1.0).abs() < 1e-9);
        }
        assert!(matches!(
            preprocess(&ds, BlankFramePolicy::Error),
            Err(Error::ZeroVector { .. })
        ));
    }

    #[test]
    fn rejects_inconsistent_construction() {
        assert!(LabeledDataset::new(2, 2, 2, vec![0.0; 7], vec![0, 1]).is_err());
        assert!(LabeledDataset::new(1, 1, 2, vec![0.0], vec![2]).is_err());
        assert!(LabeledDataset::new(1, 1, 2, vec![1.5], vec![0]).is_err());
    }

    #[test]
    fn shuffle_is_a_reproducible_permutation() {
        let mut a = fixture();
        let mut b = fixture();
        assert_eq!(a.shuffle(11), b.shuffle(11));
        assert!(is_permutation(a.permutation(), 3));
        assert!(a.set_permutation(vec![0, 0, 1]).is_err());
        assert!(a.set_permutation(vec![2, 0, 1]).is_ok());
    }
}
