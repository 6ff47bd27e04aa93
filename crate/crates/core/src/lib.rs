//! Relation detection between entity pairs with neural encoders and an
//! RBF SVM back end.

pub mod backnet;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod frontnet;
pub mod harness;
mod matrix;
pub mod optim;
pub mod seed;
pub mod synthetic;

pub use backnet::{extract_feature_vectors, smo_train, svm_predict, FeatureDataset, SmoParams, SvmModel};
pub use corpus::{EncodeConfig, EncodedInstance, Label, Sentence, Vocabulary};
pub use error::{Error, Result};
pub use evaluation::EvaluationReport;
pub use features::FeatureConfig;
pub use matrix::Matrix;
pub use optim::{ModelSpec, NetworkModel, Topology, TrainConfig};
