use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Flow-feature matrix with one raw label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `(samples, features)`
    pub features: Tensor,
    pub raw_labels: Vec<String>,
    pub source: String,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Tensor,
        raw_labels: Vec<String>,
        source: String,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let &[n, f] = features.shape() else {
            return Err(Error::Dimension(format!(
                "dataset features must be (samples, features), got {:?}",
                features.shape()
            )));
        };
        if n != raw_labels.len() {
            return Err(Error::Validation(format!(
                "{n} feature rows but {} labels",
                raw_labels.len()
            )));
        }
        if f != feature_names.len() {
            return Err(Error::Validation(format!(
                "{f} feature columns but {} feature names",
                feature_names.len()
            )));
        }
        if !features.is_finite() {
            return Err(Error::Validation(
                "dataset contains non-finite feature values".into(),
            ));
        }
        Ok(Dataset {
            features,
            raw_labels,
            source,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.raw_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw_labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let f = self.feature_count();
        let mut data = Vec::with_capacity(indices.len() * f);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Validation(format!(
                    "row {i} out of range for {} samples",
                    self.len()
                )));
            }
            data.extend_from_slice(self.features.row(i));
            labels.push(self.raw_labels[i].clone());
        }
        Ok(Dataset {
            features: Tensor::new(vec![indices.len(), f], data)?,
            raw_labels: labels,
            source: self.source.clone(),
            feature_names: self.feature_names.clone(),
        })
    }

    /// Keeps at most `per_class_cap` rows of each raw label. Classes over the
    /// cap are thinned by a seeded shuffle; surviving rows keep file order.
    pub fn subsample_stratified(&self, per_class_cap: usize, seed: u64) -> Result<Dataset> {
        if per_class_cap == 0 {
            return Err(Error::Validation("per-class cap must be at least 1".into()));
        }
        let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, l) in self.raw_labels.iter().enumerate() {
            by_label.entry(l.as_str()).or_default().push(i);
        }
        let mut rng = crate::seeded_rng_stream(seed, crate::STREAM_SUBSAMPLE);
        let mut keep = Vec::new();
        for rows in by_label.values_mut() {
            if rows.len() > per_class_cap {
                rows.shuffle(&mut rng);
                rows.truncate(per_class_cap);
            }
            keep.extend_from_slice(rows);
        }
        keep.sort_unstable();
        self.select(&keep)
    }

    /// Row count per distinct raw label.
    pub fn class_counts(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for l in &self.raw_labels {
            *m.entry(l.clone()).or_insert(0) += 1;
        }
        m
    }
}
