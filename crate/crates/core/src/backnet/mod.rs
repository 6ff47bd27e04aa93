//! Decision heads: the dense softmax layer used to train the network, and
//! the RBF-kernel SVM trained on the network's dropout-layer outputs.

mod dense;
mod svm;

pub use dense::{cross_entropy, dense_softmax, softmax, DenseHead, PROB_FLOOR};
pub use svm::{rbf_kernel, smo_train, svm_decision, SmoOutcome, SmoParams, SvmModel};

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_json_lines, write_json_lines, EncodedInstance, Label};
use crate::error::{Error, Result};
use crate::optim::NetworkModel;

/// Fixed-length vectors with binary labels (TRUE ↦ +1, FALSE ↦ −1 for the
/// SVM).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub x: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureRow {
    label: Label,
    x: Vec<f64>,
}

impl FeatureDataset {
    pub fn new(x: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        if x.len() != labels.len() {
            return Err(Error::LengthMismatch { left: x.len(), right: labels.len() });
        }
        if let Some(first) = x.first() {
            if let Some(bad) = x.iter().find(|r| r.len() != first.len()) {
                return Err(Error::Dimension(format!("feature rows of width {} and {}", first.len(), bad.len())));
            }
        }
        Ok(Self { x, labels })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub(crate) fn check_trainable(&self) -> Result<()> {
        let has = |l| self.labels.contains(&l);
        if self.len() < 2 || !has(Label::True) || !has(Label::False) {
            return Err(Error::SingleClass);
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let rows: Vec<FeatureRow> =
            self.x.iter().zip(&self.labels).map(|(x, &label)| FeatureRow { label, x: x.clone() }).collect();
        write_json_lines(path, &rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let rows: Vec<FeatureRow> = read_json_lines(path)?;
        let (x, labels) = rows.into_iter().map(|r| (r.x, r.label)).unzip();
        Self::new(x, labels)
    }
}

/// Runs every instance through the feature extractor and encoder with
/// dropout disabled, returning the vectors that feed the dropout layer's
/// consumer.
pub fn extract_feature_vectors(model: &NetworkModel, instances: &[EncodedInstance]) -> Result<FeatureDataset> {
    let x = instances.par_iter().map(|inst| model.encode(inst)).collect::<Result<Vec<_>>>()?;
    let labels = instances.iter().map(|i| i.label).collect();
    FeatureDataset::new(x, labels)
}

/// Labels predicted by an SVM for each row of `data`.
pub fn svm_predict(model: &SvmModel, data: &FeatureDataset) -> Result<Vec<Label>> {
    data.x.par_iter().map(|x| svm_decision(model, x).map(|(_, l)| l)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_rows_rejected() {
        assert!(FeatureDataset::new(vec![vec![1.0], vec![1.0, 2.0]], vec![Label::True, Label::False]).is_err());
        assert!(FeatureDataset::new(vec![vec![1.0]], vec![]).is_err());
    }

    #[test]
    fn features_round_trip_exactly() {
        let d = FeatureDataset::new(vec![vec![0.1, -1.0 / 3.0], vec![1e-300, 7.0]], vec![Label::True, Label::False])
            .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        d.save(f.path()).unwrap();
        assert_eq!(FeatureDataset::load(f.path()).unwrap(), d);
    }
}
