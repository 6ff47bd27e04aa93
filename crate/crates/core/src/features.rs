//! Embedding tables and the per-token feature matrix fed to the encoders.
//!
//! Each row of a [`FeatureMatrix`] is the concatenation, in this order, of
//! the word embedding, the position embedding relative to entity 1, the
//! position embedding relative to entity 2, the POS-tag embedding (when
//! enabled) and the character-convolution features (when enabled). Both
//! position channels read from one shared table.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedInstance, EntitySpan, Vocabulary, PAD_ID};
use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, Matrix};

/// Signed distance of a token to a span: zero inside it, otherwise the
/// offset to the nearest span edge.
pub fn signed_distance(token_idx: usize, span: &EntitySpan) -> i64 {
    let t = token_idx as i64;
    if span.contains(token_idx) {
        0
    } else if token_idx < span.start {
        t - span.start as i64
    } else {
        t - (span.end as i64 - 1)
    }
}

/// Clamps the signed distance to `[-clip, clip]` and shifts it into
/// `[0, 2 * clip]`.
pub fn relative_position_index(token_idx: usize, span: &EntitySpan, clip: usize) -> usize {
    let l = clip as i64;
    (signed_distance(token_idx, span).clamp(-l, l) + l) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// A lookup table of `rows × dim` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    rows: usize,
    dim: usize,
    weights: Vec<f64>,
    pub trainable: bool,
}

impl EmbeddingTable {
    pub fn zeros(rows: usize, dim: usize, trainable: bool) -> Self {
        Self { rows, dim, weights: vec![0.0; rows * dim], trainable }
    }

    /// Uniform `(-half_width, half_width)` init. With `zero_pad`, row 0 is
    /// left all-zero.
    pub fn uniform<R: Rng + ?Sized>(
        rows: usize,
        dim: usize,
        half_width: f64,
        zero_pad: bool,
        trainable: bool,
        rng: &mut R,
    ) -> Self {
        let mut table = Self::zeros(rows, dim, trainable);
        let skip = if zero_pad { dim.min(table.weights.len()) } else { 0 };
        for w in &mut table.weights[skip..] {
            *w = rng.random_range(-half_width..half_width);
        }
        table
    }

    pub fn from_weights(rows: usize, dim: usize, weights: Vec<f64>, trainable: bool) -> Result<Self> {
        if weights.len() != rows * dim {
            return Err(Error::Dimension(format!("table {rows}x{dim} given {} weights", weights.len())));
        }
        Ok(Self { rows, dim, weights, trainable })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, idx: usize) -> Result<&[f64]> {
        if idx >= self.rows {
            return Err(Error::IndexOutOfRange { index: idx, rows: self.rows });
        }
        Ok(&self.weights[idx * self.dim..(idx + 1) * self.dim])
    }

    pub fn row_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.weights[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }
}

/// Result of reading a word2vec file against a vocabulary.
#[derive(Debug, Clone)]
pub struct PretrainedEmbeddings {
    pub table: EmbeddingTable,
    /// Vocabulary ids that had no vector in the file and were randomly
    /// initialised.
    pub oov: Vec<u32>,
}

/// Half-width of the uniform init for words missing from the pretrained file.
pub const OOV_INIT_HALF_WIDTH: f64 = 0.25;

/// Reads word2vec text format (`V D` header, then `token v1 .. vD` lines).
/// Words of `vocab` not in the file get seeded `uniform(-0.25, 0.25)` rows;
/// PAD stays zero. The returned table is frozen.
pub fn load_word_embeddings<R: Rng + ?Sized>(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<PretrainedEmbeddings> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let parse_err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };

    let header = match lines.next() {
        Some(l) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(parse_err(1, "missing `V D` header".into())),
    };
    let mut it = header.split_whitespace();
    let (declared_rows, dim) = match (
        it.next().and_then(|s| s.parse::<usize>().ok()),
        it.next().and_then(|s| s.parse::<usize>().ok()),
        it.next(),
    ) {
        (Some(v), Some(d), None) if d > 0 => (v, d),
        _ => return Err(parse_err(1, format!("malformed header `{header}`"))),
    };

    let mut found: Vec<Option<Vec<f64>>> = vec![None; vocab.words.len()];
    let mut rows_read = 0;
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 2;
        let mut parts = line.split_whitespace();
        let token = parts.next().unwrap_or_default();
        let values = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| parse_err(line_no, format!("token `{token}`: non-numeric component `{p}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(parse_err(
                line_no,
                format!("token `{token}` has {} components, header says {dim}", values.len()),
            ));
        }
        rows_read += 1;
        if let Some(id) = vocab.words.get(token) {
            if id != PAD_ID {
                found[id as usize] = Some(values);
            }
        }
    }
    if rows_read != declared_rows {
        return Err(parse_err(1, format!("header declares {declared_rows} rows, file has {rows_read}")));
    }

    let mut table = EmbeddingTable::zeros(vocab.words.len(), dim, false);
    let mut oov = Vec::new();
    for (id, values) in found.into_iter().enumerate().skip(1) {
        let row = table.row_mut(id);
        match values {
            Some(v) => row.copy_from_slice(&v),
            None => {
                for w in row.iter_mut() {
                    *w = rng.random_range(-OOV_INIT_HALF_WIDTH..OOV_INIT_HALF_WIDTH);
                }
                oov.push(id as u32);
            }
        }
    }
    Ok(PretrainedEmbeddings { table, oov })
}

/// Character-level convolution settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CharSpec {
    pub dim: usize,
    pub filters: usize,
    pub window: usize,
    pub activation: Activation,
}

impl Default for CharSpec {
    fn default() -> Self {
        Self { dim: 30, filters: 50, window: 3, activation: Activation::Tanh }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub word_dim: usize,
    /// Width of one position channel; two channels are concatenated.
    pub position_dim: usize,
    /// 0 disables POS-tag embeddings.
    pub postag_dim: usize,
    pub chars: Option<CharSpec>,
    /// Update the word table during training.
    pub fine_tune_words: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { word_dim: 100, position_dim: 50, postag_dim: 0, chars: None, fine_tune_words: false }
    }
}

impl FeatureConfig {
    /// Row width D of the feature matrix.
    pub fn total_dim(&self) -> usize {
        self.word_dim + 2 * self.position_dim + self.postag_dim + self.chars.map_or(0, |c| c.filters)
    }

    fn offsets(&self) -> Offsets {
        let p1 = self.word_dim;
        let p2 = p1 + self.position_dim;
        let postag = p2 + self.position_dim;
        let chars = postag + self.postag_dim;
        Offsets { p1, p2, postag, chars }
    }
}

struct Offsets {
    p1: usize,
    p2: usize,
    postag: usize,
    chars: usize,
}

/// Character embedding table plus one bank of 1-D filters, max-pooled over
/// character positions.
#[derive(Debug, Clone, PartialEq)]
pub struct CharConv {
    pub table: EmbeddingTable,
    pub filters: usize,
    pub window: usize,
    /// `filters × (window · dim)`, filter-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

pub const TRAINABLE_INIT_HALF_WIDTH: f64 = 0.05;

impl CharConv {
    pub fn new<R: Rng + ?Sized>(n_chars: usize, spec: &CharSpec, rng: &mut R) -> Self {
        let h = TRAINABLE_INIT_HALF_WIDTH;
        let table = EmbeddingTable::uniform(n_chars, spec.dim, h, true, true, rng);
        let weights = (0..spec.filters * spec.window * spec.dim).map(|_| rng.random_range(-h..h)).collect();
        Self {
            table,
            filters: spec.filters,
            window: spec.window,
            weights,
            bias: vec![0.0; spec.filters],
            activation: spec.activation,
        }
    }

    fn span(&self) -> usize {
        self.window * self.table.dim()
    }

    fn embed_chars(&self, ids: &[u32]) -> Result<Matrix> {
        let dim = self.table.dim();
        let mut m = Matrix::zeros(ids.len(), dim);
        for (i, &c) in ids.iter().enumerate() {
            m.row_mut(i).copy_from_slice(self.table.row(c as usize)?);
        }
        Ok(m)
    }
}

/// Pooling bookkeeping for one word's character convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct CharCache {
    pub output: Vec<f64>,
    pub argmax: Vec<usize>,
}

fn char_forward(ids: &[u32], conv: &CharConv) -> Result<Option<CharCache>> {
    if ids.len() < conv.window {
        return Err(Error::SequenceTooShort { len: ids.len(), window: conv.window });
    }
    if ids.iter().all(|&c| c == PAD_ID) {
        return Ok(None);
    }
    let emb = conv.embed_chars(ids)?;
    let positions = ids.len() - conv.window + 1;
    let span = conv.span();
    let mut output = vec![f64::NEG_INFINITY; conv.filters];
    let mut argmax = vec![0; conv.filters];
    for p in 0..positions {
        let block = emb.row_block(p, conv.window);
        for f in 0..conv.filters {
            let pre = dot(&conv.weights[f * span..(f + 1) * span], block) + conv.bias[f];
            let y = conv.activation.apply(pre);
            if y > output[f] {
                output[f] = y;
                argmax[f] = p;
            }
        }
    }
    Ok(Some(CharCache { output, argmax }))
}

/// Character features of one word: embed, convolve each filter over the
/// character positions, max-pool per filter. An all-PAD word yields zeros.
pub fn char_features(char_ids: &[u32], conv: &CharConv) -> Result<Vec<f64>> {
    Ok(char_forward(char_ids, conv)?.map_or_else(|| vec![0.0; conv.filters], |c| c.output))
}

/// Every lookup table the feature extractor owns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTables {
    pub word: EmbeddingTable,
    pub position: EmbeddingTable,
    pub postag: Option<EmbeddingTable>,
    pub chars: Option<CharConv>,
}

impl FeatureTables {
    /// Fresh tables. `word` is a loaded table, or `None` for random word
    /// vectors. The word table's trainability follows `cfg.fine_tune_words`.
    pub fn new<R: Rng + ?Sized>(
        cfg: &FeatureConfig,
        vocab: &Vocabulary,
        position_rows: usize,
        word: Option<EmbeddingTable>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut word = match word {
            Some(t) => {
                if t.rows() != vocab.words.len() || t.dim() != cfg.word_dim {
                    return Err(Error::Dimension(format!(
                        "word table is {}x{}, expected {}x{}",
                        t.rows(),
                        t.dim(),
                        vocab.words.len(),
                        cfg.word_dim
                    )));
                }
                t
            }
            None => EmbeddingTable::uniform(vocab.words.len(), cfg.word_dim, OOV_INIT_HALF_WIDTH, true, false, rng),
        };
        word.trainable = cfg.fine_tune_words;
        let h = TRAINABLE_INIT_HALF_WIDTH;
        let position = EmbeddingTable::uniform(position_rows, cfg.position_dim, h, false, true, rng);
        let postag = (cfg.postag_dim > 0)
            .then(|| EmbeddingTable::uniform(vocab.pos_tags.len(), cfg.postag_dim, h, true, true, rng));
        let chars = cfg.chars.map(|spec| CharConv::new(vocab.chars.len(), &spec, rng));
        Ok(Self { word, position, postag, chars })
    }

    fn check(&self, cfg: &FeatureConfig) -> Result<()> {
        let mismatch = |what: &str, got: usize, want: usize| {
            Err(Error::Dimension(format!("{what} dim {got}, config expects {want}")))
        };
        if self.word.dim() != cfg.word_dim {
            return mismatch("word", self.word.dim(), cfg.word_dim);
        }
        if self.position.dim() != cfg.position_dim {
            return mismatch("position", self.position.dim(), cfg.position_dim);
        }
        let postag = self.postag.as_ref().map_or(0, EmbeddingTable::dim);
        if postag != cfg.postag_dim {
            return mismatch("POS-tag", postag, cfg.postag_dim);
        }
        let chars = self.chars.as_ref().map_or(0, |c| c.filters);
        if chars != cfg.chars.map_or(0, |c| c.filters) {
            return mismatch("char filters", chars, cfg.chars.map_or(0, |c| c.filters));
        }
        Ok(())
    }
}

/// `T × D` features of one instance plus what the backward pass needs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Matrix,
    /// Number of leading non-PAD tokens.
    pub len: usize,
    instance: EncodedInstance,
    char_caches: Vec<Option<CharCache>>,
}

impl FeatureMatrix {
    pub fn seq_len(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    /// Wraps raw values with no lookup provenance; backward into tables is
    /// a no-op for such matrices. Used to drive encoders directly.
    pub fn from_values(values: Matrix) -> Self {
        let t = values.rows();
        Self {
            len: t,
            instance: EncodedInstance {
                word_ids: Vec::new(),
                pos_ids: Vec::new(),
                char_ids: Vec::new(),
                p1_idx: Vec::new(),
                p2_idx: Vec::new(),
                label: crate::corpus::Label::False,
            },
            char_caches: Vec::new(),
            values,
        }
    }
}

pub fn embed_sequence(inst: &EncodedInstance, tables: &FeatureTables, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    tables.check(cfg)?;
    let t_len = inst.seq_len();
    let lengths = [inst.pos_ids.len(), inst.p1_idx.len(), inst.p2_idx.len(), inst.char_ids.len()];
    if let Some(&bad) = lengths.iter().find(|&&l| l != t_len) {
        return Err(Error::LengthMismatch { left: t_len, right: bad });
    }
    let off = cfg.offsets();
    let pd = cfg.position_dim;
    let mut values = Matrix::zeros(t_len, cfg.total_dim());
    let mut char_caches = Vec::new();
    for t in 0..t_len {
        let row = values.row_mut(t);
        row[..off.p1].copy_from_slice(tables.word.row(inst.word_ids[t] as usize)?);
        row[off.p1..off.p2].copy_from_slice(tables.position.row(inst.p1_idx[t] as usize)?);
        row[off.p2..off.p2 + pd].copy_from_slice(tables.position.row(inst.p2_idx[t] as usize)?);
        if let Some(postag) = &tables.postag {
            row[off.postag..off.chars].copy_from_slice(postag.row(inst.pos_ids[t] as usize)?);
        }
        if let Some(conv) = &tables.chars {
            let cache = char_forward(&inst.char_ids[t], conv)?;
            if let Some(c) = &cache {
                row[off.chars..].copy_from_slice(&c.output);
            }
            char_caches.push(cache);
        }
    }
    Ok(FeatureMatrix { values, len: inst.token_count(), instance: inst.clone(), char_caches })
}

/// Sparse per-row gradient of an embedding table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RowGrads {
    pub rows: BTreeMap<u32, Vec<f64>>,
}

impl RowGrads {
    pub fn add(&mut self, row: u32, grad: &[f64]) {
        let slot = self.rows.entry(row).or_insert_with(|| vec![0.0; grad.len()]);
        axpy(1.0, grad, slot);
    }

    pub fn merge(&mut self, other: &RowGrads) {
        for (&r, g) in &other.rows {
            self.add(r, g);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.rows.values_mut() {
            g.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn to_dense(&self, rows: usize, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; rows * dim];
        for (&r, g) in &self.rows {
            out[r as usize * dim..(r as usize + 1) * dim].copy_from_slice(g);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharConvGrads {
    pub table: Option<RowGrads>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients for the trainable parts of [`FeatureTables`]; frozen tables
/// have `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrads {
    pub word: Option<RowGrads>,
    pub position: Option<RowGrads>,
    pub postag: Option<RowGrads>,
    pub chars: Option<CharConvGrads>,
}

impl FeatureGrads {
    pub fn zeros(tables: &FeatureTables) -> Self {
        let sparse = |t: &EmbeddingTable| t.trainable.then(RowGrads::default);
        Self {
            word: sparse(&tables.word),
            position: sparse(&tables.position),
            postag: tables.postag.as_ref().and_then(sparse),
            chars: tables.chars.as_ref().map(|c| CharConvGrads {
                table: sparse(&c.table),
                weights: vec![0.0; c.weights.len()],
                bias: vec![0.0; c.bias.len()],
            }),
        }
    }

    pub fn merge(&mut self, other: &FeatureGrads) {
        fn merge_opt(a: &mut Option<RowGrads>, b: &Option<RowGrads>) {
            if let (Some(a), Some(b)) = (a, b) {
                a.merge(b);
            }
        }
        merge_opt(&mut self.word, &other.word);
        merge_opt(&mut self.position, &other.position);
        merge_opt(&mut self.postag, &other.postag);
        if let (Some(a), Some(b)) = (&mut self.chars, &other.chars) {
            merge_opt(&mut a.table, &b.table);
            axpy(1.0, &b.weights, &mut a.weights);
            axpy(1.0, &b.bias, &mut a.bias);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in [&mut self.word, &mut self.position, &mut self.postag].into_iter().flatten() {
            g.scale(s);
        }
        if let Some(c) = &mut self.chars {
            if let Some(t) = &mut c.table {
                t.scale(s);
            }
            c.weights.iter_mut().chain(c.bias.iter_mut()).for_each(|x| *x *= s);
        }
    }
}

/// Routes `grad` (one row per token, width D) back into the tables that
/// produced `fm`.
pub fn embed_backward(
    fm: &FeatureMatrix,
    grad: &Matrix,
    tables: &FeatureTables,
    cfg: &FeatureConfig,
) -> Result<FeatureGrads> {
    if grad.rows() != fm.seq_len() || grad.cols() != fm.dim() {
        return Err(Error::Dimension(format!(
            "feature gradient is {}x{}, features are {}x{}",
            grad.rows(),
            grad.cols(),
            fm.seq_len(),
            fm.dim()
        )));
    }
    let mut out = FeatureGrads::zeros(tables);
    let inst = &fm.instance;
    if inst.word_ids.is_empty() {
        return Ok(out);
    }
    let off = cfg.offsets();
    let pd = cfg.position_dim;
    for t in 0..fm.seq_len() {
        let g = grad.row(t);
        if let Some(w) = &mut out.word {
            w.add(inst.word_ids[t], &g[..off.p1]);
        }
        if let Some(p) = &mut out.position {
            p.add(inst.p1_idx[t], &g[off.p1..off.p2]);
            p.add(inst.p2_idx[t], &g[off.p2..off.p2 + pd]);
        }
        if let Some(pt) = &mut out.postag {
            pt.add(inst.pos_ids[t], &g[off.postag..off.chars]);
        }
        if let (Some(conv), Some(cg)) = (&tables.chars, &mut out.chars) {
            if let Some(cache) = &fm.char_caches[t] {
                char_backward(&inst.char_ids[t], conv, cache, &g[off.chars..], cg)?;
            }
        }
    }
    Ok(out)
}

fn char_backward(
    ids: &[u32],
    conv: &CharConv,
    cache: &CharCache,
    grad_out: &[f64],
    out: &mut CharConvGrads,
) -> Result<()> {
    let emb = conv.embed_chars(ids)?;
    let dim = conv.table.dim();
    let span = conv.span();
    let mut d_emb = vec![0.0; span];
    for f in 0..conv.filters {
        let p = cache.argmax[f];
        let dpre = grad_out[f] * conv.activation.derivative_from_output(cache.output[f]);
        if dpre == 0.0 {
            continue;
        }
        let block = emb.row_block(p, conv.window);
        axpy(dpre, block, &mut out.weights[f * span..(f + 1) * span]);
        out.bias[f] += dpre;
        if let Some(tg) = &mut out.table {
            d_emb.iter_mut().for_each(|x| *x = 0.0);
            axpy(dpre, &conv.weights[f * span..(f + 1) * span], &mut d_emb);
            for k in 0..conv.window {
                tg.add(ids[p + k], &d_emb[k * dim..(k + 1) * dim]);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, Label, Sentence, UNK_ID};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn vocab_ab() -> Vocabulary {
        let s = Sentence {
            tokens: vec!["a".into(), "b".into(), "c".into()],
            pos_tags: vec!["NN".into(); 3],
            entities: vec![],
            relations: vec![],
        };
        build_vocabulary(&[s], 1).unwrap()
    }

    fn tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn position_index_examples() {
        let span = EntitySpan::new(10, 12);
        assert_eq!(relative_position_index(11, &span, 50), 50);
        assert_eq!(relative_position_index(7, &span, 50), 47);
        assert_eq!(relative_position_index(11 + 120, &span, 50), 100);
        assert_eq!(relative_position_index(13, &span, 50), 52);
    }

    #[test]
    fn loads_word2vec_rows() {
        let f = tmp("2 3\na 1 0 0\nb 0 1 0\n");
        let v = vocab_ab();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let emb = load_word_embeddings(f.path(), &v, &mut rng).unwrap();
        assert_eq!(emb.table.row(v.words.id("a") as usize).unwrap(), &[1.0, 0.0, 0.0]);
        assert_eq!(emb.table.row(v.words.id("b") as usize).unwrap(), &[0.0, 1.0, 0.0]);
        assert_eq!(emb.table.row(0).unwrap(), &[0.0; 3]);
        let c = v.words.id("c");
        assert!(emb.oov.contains(&c));
        assert!(emb.oov.contains(&UNK_ID));
        let row = emb.table.row(c as usize).unwrap();
        assert!(row.iter().all(|x| x.abs() < OOV_INIT_HALF_WIDTH) && row.iter().any(|&x| x != 0.0));
        assert!(!emb.table.trainable);
    }

    #[test]
    fn oov_rows_are_seeded() {
        let f = tmp("1 2\na 1 1\n");
        let v = vocab_ab();
        let a = load_word_embeddings(f.path(), &v, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = load_word_embeddings(f.path(), &v, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a.table, b.table);
    }

    #[test]
    fn short_row_names_the_token() {
        let f = tmp("2 3\na 1 0 0\nb 0 1\n");
        let err = load_word_embeddings(f.path(), &vocab_ab(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(err.to_string().contains("`b`"), "{err}");
    }

    #[test]
    fn non_numeric_component_rejected() {
        let f = tmp("1 2\na 1 x\n");
        let err = load_word_embeddings(f.path(), &vocab_ab(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(err.to_string().contains("non-numeric"), "{err}");
    }

    fn scalar_conv(embeddings: &[f64], activation: Activation) -> CharConv {
        let rows = embeddings.len() + 1;
        let mut w = vec![0.0];
        w.extend_from_slice(embeddings);
        CharConv {
            table: EmbeddingTable::from_weights(rows, 1, w, true).unwrap(),
            filters: 1,
            window: 2,
            weights: vec![1.0, 1.0],
            bias: vec![0.0],
            activation,
        }
    }

    #[test]
    fn char_conv_hand_computed() {
        // chars with scalar embeddings 0.1, 0.2, 0.3; adjacent sums 0.3, 0.5
        let conv = scalar_conv(&[0.1, 0.2, 0.3], Activation::Identity);
        let out = char_features(&[1, 2, 3], &conv).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn all_pad_word_gives_zero_vector() {
        let conv = scalar_conv(&[0.1, 0.2], Activation::Tanh);
        assert_eq!(char_features(&[0, 0, 0], &conv).unwrap(), vec![0.0]);
    }

    #[test]
    fn char_output_width_equals_filters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = CharSpec { filters: 20, ..CharSpec::default() };
        let conv = CharConv::new(10, &spec, &mut rng);
        assert_eq!(char_features(&[3; 25], &conv).unwrap().len(), 20);
        assert!(char_features(&[3; 2], &conv).is_err());
    }

    fn instance(t: usize) -> EncodedInstance {
        EncodedInstance {
            word_ids: (0..t).map(|i| if i < 3 { 2 } else { 0 }).collect(),
            pos_ids: (0..t).map(|i| if i < 3 { 2 } else { 0 }).collect(),
            char_ids: vec![vec![2, 3, 0, 0]; t],
            p1_idx: vec![5; t],
            p2_idx: vec![6; t],
            label: Label::True,
        }
    }

    fn tables(cfg: &FeatureConfig) -> FeatureTables {
        let v = vocab_ab();
        FeatureTables::new(cfg, &v, 101, None, &mut ChaCha8Rng::seed_from_u64(5)).unwrap()
    }

    #[test]
    fn feature_dimensions() {
        let with_tags = FeatureConfig { postag_dim: 50, ..FeatureConfig::default() };
        assert_eq!(with_tags.total_dim(), 250);
        let plain = FeatureConfig::default();
        assert_eq!(plain.total_dim(), 200);
        let fm = embed_sequence(&instance(10), &tables(&with_tags), &with_tags).unwrap();
        assert_eq!((fm.seq_len(), fm.dim()), (10, 250));
        assert_eq!(fm.len, 3);
    }

    #[test]
    fn concatenation_order_is_fixed() {
        let cfg = FeatureConfig {
            word_dim: 2,
            position_dim: 3,
            postag_dim: 1,
            chars: Some(CharSpec { dim: 2, filters: 2, window: 2, activation: Activation::Tanh }),
            fine_tune_words: false,
        };
        let tb = tables(&cfg);
        let inst = instance(4);
        let fm = embed_sequence(&inst, &tb, &cfg).unwrap();
        let row = fm.values.row(0);
        assert_eq!(&row[0..2], tb.word.row(2).unwrap());
        assert_eq!(&row[2..5], tb.position.row(5).unwrap());
        assert_eq!(&row[5..8], tb.position.row(6).unwrap());
        assert_eq!(&row[8..9], tb.postag.as_ref().unwrap().row(2).unwrap());
        let chars = char_features(&inst.char_ids[0], tb.chars.as_ref().unwrap()).unwrap();
        assert_eq!(&row[9..11], chars.as_slice());
        // PAD rows hold zero word and POS embeddings
        assert_eq!(&fm.values.row(3)[0..2], &[0.0, 0.0]);
        assert_eq!(embed_sequence(&inst, &tb, &cfg).unwrap(), fm);
    }

    #[test]
    fn out_of_range_id_is_an_error() {
        let cfg = FeatureConfig::default();
        let mut inst = instance(4);
        inst.p1_idx[0] = 500;
        assert!(matches!(embed_sequence(&inst, &tables(&cfg), &cfg), Err(Error::IndexOutOfRange { index: 500, .. })));
    }

    #[test]
    fn trainable_tables_start_with_zero_pad_row() {
        let cfg = FeatureConfig { postag_dim: 4, chars: Some(CharSpec::default()), ..FeatureConfig::default() };
        let tb = tables(&cfg);
        assert!(tb.postag.unwrap().row(0).unwrap().iter().all(|&x| x == 0.0));
        assert!(tb.chars.unwrap().table.row(0).unwrap().iter().all(|&x| x == 0.0));
        assert!(!tb.word.trainable);
    }

    proptest::proptest! {
        #[test]
        fn max_pool_dominates_each_response(ids in proptest::collection::vec(0u32..6, 3..10), seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = CharSpec { dim: 3, filters: 4, window: 3, activation: Activation::Tanh };
            let conv = CharConv::new(6, &spec, &mut rng);
            let out = char_features(&ids, &conv).unwrap();
            if ids.iter().any(|&c| c != 0) {
                let emb = conv.embed_chars(&ids).unwrap();
                for p in 0..=ids.len() - 3 {
                    for f in 0..4 {
                        let pre = dot(&conv.weights[f * 9..(f + 1) * 9], emb.row_block(p, 3)) + conv.bias[f];
                        proptest::prop_assert!(out[f] >= pre.tanh());
                    }
                }
            }
        }
    }
}
