//! Preprocessing: label encoding, one-hot targets, z-score standardization
//! with a trailing channel axis, and stratified train/validation splits.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::taxonomy::Task;
use crate::tensor::Tensor;

/// Standard deviations below this are treated as zero-variance.
pub const DEGENERATE_STD: f64 = 1e-12;

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Always `> 0`; zero-variance features store `1.0`.
    pub stds: Vec<f64>,
    /// Features whose fitted std fell below [`DEGENERATE_STD`].
    pub degenerate: Vec<bool>,
}

impl Standardizer {
    pub fn feature_count(&self) -> usize {
        self.means.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.means.len();
        if n == 0 || self.stds.len() != n || self.degenerate.len() != n {
            return Err(Error::Validation(format!(
                "standardizer has {} means, {} stds, {} degenerate flags",
                n,
                self.stds.len(),
                self.degenerate.len()
            )));
        }
        if let Some(j) = (0..n).find(|&j| !(self.stds[j] > 0.0 && self.stds[j].is_finite())) {
            return Err(Error::Validation(format!(
                "standardizer std for feature {j} is {}",
                self.stds[j]
            )));
        }
        if let Some(j) = (0..n).find(|&j| !self.means[j].is_finite()) {
            return Err(Error::Validation(format!(
                "standardizer mean for feature {j} is not finite"
            )));
        }
        Ok(())
    }
}

/// Everything needed to replay preprocessing at prediction time.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PreprocState {
    pub standardizer: Standardizer,
    /// Distinct task labels in class-index order.
    pub label_map: Vec<String>,
    pub task: Task,
}

impl PreprocState {
    pub fn new(standardizer: Standardizer, label_map: Vec<String>, task: Task) -> Result<Self> {
        let s = PreprocState {
            standardizer,
            label_map,
            task,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn feature_count(&self) -> usize {
        self.standardizer.feature_count()
    }

    pub fn class_count(&self) -> usize {
        self.label_map.len()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.label_map.iter().position(|l| l == label)
    }

    pub fn validate(&self) -> Result<()> {
        self.standardizer.validate()?;
        if self.label_map.is_empty() {
            return Err(Error::Validation("label map is empty".into()));
        }
        let mut seen = self.label_map.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.label_map.len() {
            return Err(Error::Validation("label map contains duplicates".into()));
        }
        Ok(())
    }
}

/// Sorted distinct labels plus each input's position in that list.
pub fn encode_labels<S: AsRef<str>>(raw_labels: &[S]) -> Result<(Vec<String>, Vec<usize>)> {
    if raw_labels.is_empty() {
        return Err(Error::Validation(
            "cannot encode an empty label list".into(),
        ));
    }
    let mut map: Vec<String> = raw_labels
        .iter()
        .map(|s| String::from(s.as_ref()))
        .collect();
    map.sort();
    map.dedup();
    let index: BTreeMap<&str, usize> = map
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let idx = raw_labels.iter().map(|s| index[s.as_ref()]).collect();
    Ok((map, idx))
}

pub fn one_hot(class_index: usize, num_classes: usize) -> Result<Tensor> {
    if class_index >= num_classes {
        return Err(Error::Validation(format!(
            "class index {class_index} out of range for {num_classes} classes"
        )));
    }
    let mut v = vec![0.0; num_classes];
    v[class_index] = 1.0;
    Ok(Tensor::vector(v))
}

/// `(samples, classes)` matrix of one-hot rows.
pub fn one_hot_rows(class_indices: &[usize], num_classes: usize) -> Result<Tensor> {
    let mut data = Vec::with_capacity(class_indices.len() * num_classes);
    for &c in class_indices {
        data.extend_from_slice(one_hot(c, num_classes)?.data());
    }
    Tensor::new(vec![class_indices.len(), num_classes], data)
}

fn sample_dims(features: &Tensor) -> Result<(usize, usize)> {
    match features.shape() {
        &[n, f] => Ok((n, f)),
        s => Err(Error::Dimension(format!(
            "expected a (samples, features) matrix, got {s:?}"
        ))),
    }
}

/// Column means and population (divide-by-N) standard deviations.
pub fn fit_standardizer(features: &Tensor) -> Result<Standardizer> {
    let (n, f) = sample_dims(features)?;
    if n == 0 {
        return Err(Error::Validation(
            "cannot fit a standardizer on zero samples".into(),
        ));
    }
    if f == 0 {
        return Err(Error::Validation(
            "cannot fit a standardizer on zero features".into(),
        ));
    }
    let nf = n as f64;
    let mut means = vec![0.0; f];
    for i in 0..n {
        for (m, &x) in means.iter_mut().zip(features.row(i)) {
            *m += x;
        }
    }
    for m in &mut means {
        *m /= nf;
    }
    let mut vars = vec![0.0; f];
    for i in 0..n {
        for ((v, &x), &m) in vars.iter_mut().zip(features.row(i)).zip(&means) {
            *v += (x - m) * (x - m);
        }
    }
    let mut stds = Vec::with_capacity(f);
    let mut degenerate = Vec::with_capacity(f);
    for v in vars {
        let s = libm::sqrt(v / nf);
        let flat = s < DEGENERATE_STD;
        stds.push(if flat { 1.0 } else { s });
        degenerate.push(flat);
    }
    Ok(Standardizer {
        means,
        stds,
        degenerate,
    })
}

/// `(x - mean) / std` per feature, returned as `(samples, features, 1)`.
///
/// Only features and the fitted state go in, so labels cannot leak into the
/// transform.
pub fn apply_standardizer(state: &Standardizer, features: &Tensor) -> Result<Tensor> {
    let (n, f) = sample_dims(features)?;
    if f != state.feature_count() {
        return Err(Error::Validation(format!(
            "feature count mismatch: expected {}, got {f}",
            state.feature_count()
        )));
    }
    let mut out = Vec::with_capacity(n * f);
    for i in 0..n {
        out.extend(
            features
                .row(i)
                .iter()
                .zip(&state.means)
                .zip(&state.stds)
                .map(|((&x, &m), &s)| (x - m) / s),
        );
    }
    Tensor::new(vec![n, f, 1], out)
}

/// Disjoint train/validation index sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub seed: u64,
}

/// Per class, `round(val_fraction * n_c)` samples (half rounds up) go to
/// validation, capped at `n_c - 1` so no class leaves the training set.
pub fn stratified_split(
    class_indices: &[usize],
    val_fraction: f64,
    seed: u64,
) -> Result<SplitIndices> {
    if class_indices.is_empty() {
        return Err(Error::Validation("cannot split an empty sample set".into()));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Validation(format!(
            "validation fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in class_indices.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut rng = crate::seeded_rng_stream(seed, crate::STREAM_SPLIT);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for members in by_class.values_mut() {
        let n_c = members.len();
        let n_val = (libm::floor(val_fraction * n_c as f64 + 0.5) as usize).min(n_c - 1);
        members.shuffle(&mut rng);
        val.extend_from_slice(&members[..n_val]);
        train.extend_from_slice(&members[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok(SplitIndices {
        train_indices: train,
        val_indices: val,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(v: &[f64]) -> Tensor {
        Tensor::new(vec![v.len(), 1], v.to_vec()).unwrap()
    }

    #[test]
    fn encode_examples() {
        let (map, idx) = encode_labels(&["Benign", "DDoS", "Benign"]).unwrap();
        assert_eq!(map, ["Benign", "DDoS"]);
        assert_eq!(idx, [0, 1, 0]);

        let (map, idx) = encode_labels(&["x", "x"]).unwrap();
        assert_eq!(map, ["x"]);
        assert_eq!(idx, [0, 0]);

        let (map, idx) = encode_labels(&["b", "a", "c"]).unwrap();
        assert_eq!(map, ["a", "b", "c"]);
        assert_eq!(idx, [1, 0, 2]);

        assert!(encode_labels::<&str>(&[]).is_err());
    }

    #[test]
    fn one_hot_examples() {
        assert_eq!(one_hot(1, 3).unwrap().data(), &[0.0, 1.0, 0.0]);
        assert_eq!(one_hot(0, 1).unwrap().data(), &[1.0]);
        assert!(matches!(one_hot(3, 3), Err(Error::Validation(_))));
    }

    #[test]
    fn fit_examples() {
        let s = fit_standardizer(&column(&[1.0, 3.0])).unwrap();
        assert_eq!((s.means[0], s.stds[0], s.degenerate[0]), (2.0, 1.0, false));

        let s = fit_standardizer(&column(&[5.0, 5.0, 5.0])).unwrap();
        assert_eq!((s.means[0], s.stds[0], s.degenerate[0]), (5.0, 1.0, true));

        let s = fit_standardizer(&column(&[0.0, 0.0, 4.0, 4.0])).unwrap();
        assert_eq!((s.means[0], s.stds[0]), (2.0, 2.0));

        assert!(matches!(
            fit_standardizer(&Tensor::zeros(&[0, 3]).unwrap()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn apply_examples() {
        let s = fit_standardizer(&column(&[1.0, 3.0])).unwrap();
        let z = apply_standardizer(&s, &column(&[1.0, 3.0])).unwrap();
        assert_eq!(z.shape(), &[2, 1, 1]);
        assert_eq!(z.data(), &[-1.0, 1.0]);

        let flat = fit_standardizer(&column(&[5.0, 5.0])).unwrap();
        assert_eq!(
            apply_standardizer(&flat, &column(&[5.0])).unwrap().data(),
            &[0.0]
        );

        let wide = Tensor::zeros(&[1, 2]).unwrap();
        let err = apply_standardizer(&s, &wide).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("expected 1, got 2")));
    }

    #[test]
    fn split_examples() {
        let labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let s = stratified_split(&labels, 0.2, 9).unwrap();
        assert_eq!(s.val_indices.len(), 2);
        assert_eq!(s.val_indices.iter().filter(|&&i| labels[i] == 0).count(), 1);
        assert_eq!(s, stratified_split(&labels, 0.2, 9).unwrap());

        let s = stratified_split(&[0, 1, 1], 0.5, 1).unwrap();
        assert!(s.train_indices.contains(&0));
        assert!(!s.val_indices.contains(&0));

        assert!(stratified_split(&[], 0.2, 1).is_err());
        assert!(stratified_split(&[0], 1.0, 1).is_err());
        assert!(stratified_split(&[0], 0.0, 1).is_err());
    }

    #[test]
    fn preproc_rejects_duplicate_labels() {
        let s = fit_standardizer(&column(&[1.0, 3.0])).unwrap();
        let labels = vec![String::from("a"), String::from("a")];
        assert!(PreprocState::new(s, labels, Task::Multiclass).is_err());
    }
}
