use serde::{Deserialize, Serialize};

use crate::backnet::{cross_entropy, softmax, DenseHead};
use crate::corpus::{EncodeConfig, EncodedInstance, Label, Vocabulary};
use crate::error::{Error, Result};
use crate::features::{embed_backward, embed_sequence, EmbeddingTable, FeatureConfig, FeatureGrads, FeatureTables};
use crate::frontnet::{front_backward, ConvFront, Direction, DropoutSpec, Front, FrontGrads, LstmFront};
use crate::matrix::axpy;
use crate::seed::{rng_for, Purpose};

/// Encoder family and its size parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Topology {
    Cnn { filters: usize, windows: Vec<usize> },
    Lstm { hidden: usize },
    Bilstm { hidden: usize },
}

impl Topology {
    pub fn kind(&self) -> TopologyKind {
        match self {
            Topology::Cnn { .. } => TopologyKind::Cnn,
            Topology::Lstm { .. } => TopologyKind::Lstm,
            Topology::Bilstm { .. } => TopologyKind::Bilstm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Cnn,
    Lstm,
    Bilstm,
}

impl TopologyKind {
    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Cnn => "CNN",
            TopologyKind::Lstm => "LSTM",
            TopologyKind::Bilstm => "Bi-LSTM",
        }
    }
}

impl std::fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "cnn" => Ok(TopologyKind::Cnn),
            "lstm" => Ok(TopologyKind::Lstm),
            "bilstm" => Ok(TopologyKind::Bilstm),
            other => Err(Error::InvalidParameter(format!("unknown topology `{other}`"))),
        }
    }
}

/// Everything needed to rebuild a network's shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub features: FeatureConfig,
    pub topology: Topology,
    pub encode: EncodeConfig,
    pub dropout: f64,
}

/// Embedding tables, encoder and dense head, plus the vocabulary the ids
/// refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub spec: ModelSpec,
    pub vocab: Vocabulary,
    pub tables: FeatureTables,
    pub front: Front,
    pub head: DenseHead,
}

/// Gradients for every trainable part of a [`NetworkModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrads {
    pub features: FeatureGrads,
    pub front: FrontGrads,
    pub head: DenseHead,
}

impl NetworkGrads {
    pub fn zeros(model: &NetworkModel) -> Self {
        Self {
            features: FeatureGrads::zeros(&model.tables),
            front: FrontGrads::zeros(&model.front),
            head: DenseHead::zeros(model.head.input_dim),
        }
    }

    pub fn merge(&mut self, other: &NetworkGrads) {
        self.features.merge(&other.features);
        self.front.merge(&other.front);
        axpy(1.0, &other.head.weights, &mut self.head.weights);
        axpy(1.0, &other.head.bias, &mut self.head.bias);
    }

    pub fn scale(&mut self, s: f64) {
        self.features.scale(s);
        self.front.scale(s);
        self.head.weights.iter_mut().chain(self.head.bias.iter_mut()).for_each(|x| *x *= s);
    }
}

impl NetworkModel {
    /// Builds a freshly initialised network. `word_table` is a pretrained
    /// table (see `load_word_embeddings`); without one, word vectors are
    /// random. All initialisation randomness derives from `seed`.
    pub fn new(spec: ModelSpec, vocab: Vocabulary, word_table: Option<EmbeddingTable>, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&spec.dropout) {
            return Err(Error::InvalidParameter(format!("dropout rate {} must lie in [0, 1)", spec.dropout)));
        }
        let mut rng = rng_for(seed, Purpose::Init);
        let tables =
            FeatureTables::new(&spec.features, &vocab, spec.encode.position_vocab_size(), word_table, &mut rng)?;
        let d = spec.features.total_dim();
        let front = match &spec.topology {
            Topology::Cnn { filters, windows } => Front::Cnn(ConvFront::new(windows, *filters, d, &mut rng)?),
            Topology::Lstm { hidden } => Front::Lstm(LstmFront::new(Direction::Forward, d, *hidden, &mut rng)?),
            Topology::Bilstm { hidden } => Front::Lstm(LstmFront::new(Direction::Bidirectional, d, *hidden, &mut rng)?),
        };
        let head = DenseHead::new(front.output_dim(), &mut rng);
        Ok(Self { spec, vocab, tables, front, head })
    }

    /// Width of the encoder output, i.e. of the vectors an SVM consumes.
    pub fn feature_dim(&self) -> usize {
        self.front.output_dim()
    }

    /// Encoder output with dropout disabled.
    pub fn encode(&self, inst: &EncodedInstance) -> Result<Vec<f64>> {
        let fm = embed_sequence(inst, &self.tables, &self.spec.features)?;
        Ok(self.front.forward(&fm, &DropoutSpec::infer(self.spec.dropout))?.0)
    }

    pub fn predict_proba(&self, inst: &EncodedInstance) -> Result<[f64; 2]> {
        let v = self.encode(inst)?;
        Ok(softmax(self.head.logits(&v)?))
    }

    /// TRUE only when its probability strictly exceeds FALSE's.
    pub fn predict(&self, inst: &EncodedInstance) -> Result<Label> {
        let p = self.predict_proba(inst)?;
        Ok(Label::from(p[1] > p[0]))
    }

    pub fn loss(&self, inst: &EncodedInstance, drop: &DropoutSpec) -> Result<f64> {
        let fm = embed_sequence(inst, &self.tables, &self.spec.features)?;
        let (v, _) = self.front.forward(&fm, drop)?;
        Ok(cross_entropy(softmax(self.head.logits(&v)?), inst.label).0)
    }

    /// Cross-entropy of one instance and its gradient w.r.t. every
    /// trainable parameter.
    pub fn loss_and_grad(&self, inst: &EncodedInstance, drop: &DropoutSpec) -> Result<(f64, NetworkGrads)> {
        let fm = embed_sequence(inst, &self.tables, &self.spec.features)?;
        let (v, cache) = self.front.forward(&fm, drop)?;
        let probs = softmax(self.head.logits(&v)?);
        let (loss, dlogits) = cross_entropy(probs, inst.label);
        let (head, dv) = self.head.backward(&v, dlogits);
        let (front, dx) = front_backward(&self.front, &cache, &dv)?;
        let features = embed_backward(&fm, &dx, &self.tables, &self.spec.features)?;
        Ok((loss, NetworkGrads { features, front, head }))
    }

    /// Names of all parameter tensors, trainable or not, in storage order.
    pub fn tensor_names(&self) -> Vec<String> {
        self.tensors().into_iter().map(|(n, _, _)| n).collect()
    }

    fn tensors(&self) -> Vec<(String, bool, &[f64])> {
        let t = &self.tables;
        let mut out: Vec<(String, bool, &[f64])> = vec![
            ("embed.word".into(), t.word.trainable, t.word.weights()),
            ("embed.position".into(), t.position.trainable, t.position.weights()),
        ];
        if let Some(p) = &t.postag {
            out.push(("embed.postag".into(), p.trainable, p.weights()));
        }
        if let Some(c) = &t.chars {
            out.push(("embed.char.table".into(), c.table.trainable, c.table.weights()));
            out.push(("embed.char.kernel".into(), true, &c.weights));
            out.push(("embed.char.bias".into(), true, &c.bias));
        }
        for (name, tensor) in self.front.tensor_names().into_iter().zip(self.front.tensors()) {
            out.push((name, true, tensor));
        }
        out.push(("head.weights".into(), true, &self.head.weights));
        out.push(("head.bias".into(), true, &self.head.bias));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(bool, &mut [f64])> {
        let t = &mut self.tables;
        let mut out: Vec<(bool, &mut [f64])> = Vec::new();
        let wt = t.word.trainable;
        out.push((wt, t.word.weights_mut()));
        let pt = t.position.trainable;
        out.push((pt, t.position.weights_mut()));
        if let Some(p) = &mut t.postag {
            let tr = p.trainable;
            out.push((tr, p.weights_mut()));
        }
        if let Some(c) = &mut t.chars {
            let tr = c.table.trainable;
            out.push((tr, c.table.weights_mut()));
            out.push((true, &mut c.weights));
            out.push((true, &mut c.bias));
        }
        for tensor in self.front.tensors_mut() {
            out.push((true, tensor));
        }
        out.push((true, &mut self.head.weights));
        out.push((true, &mut self.head.bias));
        out
    }

    /// Every tensor with its name, for serialisation.
    pub fn named_tensors(&self) -> Vec<(String, &[f64])> {
        self.tensors().into_iter().map(|(n, _, t)| (n, t)).collect()
    }

    pub fn all_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.tensors_mut().into_iter().map(|(_, t)| t).collect()
    }

    pub fn trainable_tensors(&self) -> Vec<&[f64]> {
        self.tensors().into_iter().filter(|(_, tr, _)| *tr).map(|(_, _, t)| t).collect()
    }

    pub fn trainable_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.tensors_mut().into_iter().filter(|(tr, _)| *tr).map(|(_, t)| t).collect()
    }

    /// Dense gradient tensors aligned with [`Self::trainable_tensors`].
    pub fn dense_gradients(&self, grads: &NetworkGrads) -> Vec<Vec<f64>> {
        let t = &self.tables;
        let g = &grads.features;
        let mut out = Vec::new();
        let mut sparse = |table: &EmbeddingTable, rows: &Option<crate::features::RowGrads>| {
            if table.trainable {
                let dense = rows
                    .as_ref()
                    .map_or_else(|| vec![0.0; table.weights().len()], |r| r.to_dense(table.rows(), table.dim()));
                out.push(dense);
            }
        };
        sparse(&t.word, &g.word);
        sparse(&t.position, &g.position);
        if let Some(p) = &t.postag {
            sparse(p, &g.postag);
        }
        if let (Some(c), Some(cg)) = (&t.chars, &g.chars) {
            sparse(&c.table, &cg.table);
            out.push(cg.weights.clone());
            out.push(cg.bias.clone());
        }
        out.extend(grads.front.tensors().into_iter().map(<[f64]>::to_vec));
        out.push(grads.head.weights.clone());
        out.push(grads.head.bias.to_vec());
        out
    }

    pub fn flatten_trainable(&self) -> Vec<f64> {
        self.trainable_tensors().concat()
    }

    pub fn assign_trainable(&mut self, flat: &[f64]) -> Result<()> {
        let total: usize = self.trainable_tensors().iter().map(|t| t.len()).sum();
        if flat.len() != total {
            return Err(Error::LengthMismatch { left: flat.len(), right: total });
        }
        let mut offset = 0;
        for t in self.trainable_tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    pub fn flatten_gradients(&self, grads: &NetworkGrads) -> Vec<f64> {
        self.dense_gradients(grads).concat()
    }
}
