//! Annotated sentences, entity-pair expansion, vocabularies and fixed-length
//! encoding of instances.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::relative_position_index;

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_SYMBOL: &str = "<pad>";
pub const UNK_SYMBOL: &str = "<unk>";

/// Contiguous token span `[start, end)` marking one named entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end, label: None }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.start <= idx && idx < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationAnnotation {
    pub e1: usize,
    pub e2: usize,
    pub related: bool,
}

/// One tokenized, POS-tagged sentence with its entities and relation labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub pos_tags: Vec<String>,
    pub entities: Vec<EntitySpan>,
    pub relations: Vec<RelationAnnotation>,
}

impl Sentence {
    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        if self.pos_tags.len() != n {
            return Err(Error::InvalidSentence(format!("{} tokens but {} POS tags", n, self.pos_tags.len())));
        }
        for (i, e) in self.entities.iter().enumerate() {
            if e.start >= e.end {
                return Err(Error::InvalidSentence(format!("entity {i} has empty span [{}, {})", e.start, e.end)));
            }
            if e.end > n {
                return Err(Error::InvalidSentence(format!(
                    "entity {i} span [{}, {}) out of bounds for {n} tokens",
                    e.start, e.end
                )));
            }
        }
        let m = self.entities.len();
        for r in &self.relations {
            if r.e1 == r.e2 {
                return Err(Error::InvalidSentence(format!("relation links entity {} to itself", r.e1)));
            }
            if r.e1 >= m || r.e2 >= m {
                return Err(Error::InvalidSentence(format!(
                    "relation ({}, {}) references a missing entity (have {m})",
                    r.e1, r.e2
                )));
            }
        }
        Ok(())
    }
}

/// Binary relation label. `False` is class index 0, `True` class index 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    False,
    True,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::False => 0,
            Label::True => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 1 {
            Label::True
        } else {
            Label::False
        }
    }

    /// SVM target: TRUE → +1, FALSE → −1.
    pub fn sign(self) -> f64 {
        match self {
            Label::True => 1.0,
            Label::False => -1.0,
        }
    }
}

impl From<bool> for Label {
    fn from(b: bool) -> Self {
        if b {
            Label::True
        } else {
            Label::False
        }
    }
}

/// Parses a JSON-lines corpus file. Every line is validated; the first bad
/// line aborts the load with its 1-based line number.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Sentence>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { path: path.to_path_buf(), line: i + 1, message };
        let sentence: Sentence = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        sentence.validate().map_err(|e| parse_err(e.to_string()))?;
        out.push(sentence);
    }
    Ok(out)
}

pub fn save_corpus(path: impl AsRef<Path>, sentences: &[Sentence]) -> Result<()> {
    write_json_lines(path, sentences)
}

/// How to label an entity pair that has no relation annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnlabeledPolicy {
    #[default]
    Error,
    AssumeFalse,
}

/// An unordered entity pair `(e1 < e2)` with its label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstancePair {
    pub e1: usize,
    pub e2: usize,
    pub label: Label,
}

/// Expands a sentence into all `n(n-1)/2` entity pairs, ordered by
/// `(e1, e2)`. An annotation matches its pair regardless of direction.
pub fn generate_instances(sentence: &Sentence, policy: UnlabeledPolicy) -> Result<Vec<InstancePair>> {
    let mut labels: HashMap<(usize, usize), bool> = HashMap::new();
    for r in &sentence.relations {
        let key = (r.e1.min(r.e2), r.e1.max(r.e2));
        if let Some(prev) = labels.insert(key, r.related) {
            if prev != r.related {
                return Err(Error::InvalidSentence(format!(
                    "conflicting annotations for entity pair ({}, {})",
                    key.0, key.1
                )));
            }
        }
    }
    let n = sentence.entities.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for e1 in 0..n {
        for e2 in e1 + 1..n {
            let label = match (labels.get(&(e1, e2)), policy) {
                (Some(&related), _) => Label::from(related),
                (None, UnlabeledPolicy::AssumeFalse) => Label::False,
                (None, UnlabeledPolicy::Error) => return Err(Error::UnannotatedPair(e1, e2)),
            };
            out.push(InstancePair { e1, e2, label });
        }
    }
    Ok(out)
}

/// Dense symbol ↔ id map with reserved low ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    symbols: Vec<String>,
    index: HashMap<String, u32>,
    has_unk: bool,
}

impl SymbolTable {
    fn new<I: IntoIterator<Item = String>>(has_unk: bool, symbols: I) -> Self {
        let mut table = Self { symbols: Vec::new(), index: HashMap::new(), has_unk };
        table.push(PAD_SYMBOL.to_string());
        if has_unk {
            table.push(UNK_SYMBOL.to_string());
        }
        for s in symbols {
            if !table.index.contains_key(&s) {
                table.push(s);
            }
        }
        table
    }

    fn push(&mut self, s: String) {
        self.index.insert(s.clone(), self.symbols.len() as u32);
        self.symbols.push(s);
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Exact lookup, `None` for unknown symbols.
    pub fn get(&self, s: &str) -> Option<u32> {
        self.index.get(s).copied()
    }

    /// Lookup falling back to UNK.
    pub fn id(&self, s: &str) -> u32 {
        self.get(s).unwrap_or(UNK_ID)
    }

    pub fn symbol(&self, id: u32) -> Option<&str> {
        self.symbols.get(id as usize).map(String::as_str)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    fn to_map(&self) -> BTreeMap<String, u32> {
        self.index.iter().map(|(k, &v)| (k.clone(), v)).collect()
    }

    fn from_map(name: &str, map: BTreeMap<String, u32>, has_unk: bool) -> Result<Self> {
        let bad = |msg: String| Error::InvalidParameter(format!("vocabulary `{name}`: {msg}"));
        let mut symbols = vec![None; map.len()];
        for (s, id) in map {
            let slot = symbols.get_mut(id as usize).ok_or_else(|| bad(format!("id {id} is not contiguous")))?;
            if slot.is_some() {
                return Err(bad(format!("id {id} assigned twice")));
            }
            *slot = Some(s);
        }
        let symbols: Vec<String> = symbols.into_iter().map(|s| s.unwrap()).collect();
        if symbols.first().map(String::as_str) != Some(PAD_SYMBOL) {
            return Err(bad(format!("id {PAD_ID} must be {PAD_SYMBOL}")));
        }
        if has_unk && symbols.get(UNK_ID as usize).map(String::as_str) != Some(UNK_SYMBOL) {
            return Err(bad(format!("id {UNK_ID} must be {UNK_SYMBOL}")));
        }
        let index = symbols.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        Ok(Self { symbols, index, has_unk })
    }
}

/// Word, POS-tag and character vocabularies. All three reserve PAD = 0 and
/// UNK = 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub words: SymbolTable,
    pub pos_tags: SymbolTable,
    pub chars: SymbolTable,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabularyFile {
    words: BTreeMap<String, u32>,
    pos_tags: BTreeMap<String, u32>,
    chars: BTreeMap<String, u32>,
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        VocabularyFile { words: self.words.to_map(), pos_tags: self.pos_tags.to_map(), chars: self.chars.to_map() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = VocabularyFile::deserialize(d)?;
        let conv = |name, map, unk| SymbolTable::from_map(name, map, unk).map_err(serde::de::Error::custom);
        Ok(Vocabulary {
            words: conv("words", file.words, true)?,
            pos_tags: conv("pos_tags", file.pos_tags, true)?,
            chars: conv("chars", file.chars, true)?,
        })
    }
}

impl Vocabulary {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Builds vocabularies from a corpus. Words seen fewer than `min_count`
/// times are left out and encode as UNK; every observed POS tag and
/// character is kept. Symbols are assigned ids in lexicographic order after
/// the reserved entries.
pub fn build_vocabulary(corpus: &[Sentence], min_count: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut word_counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut tags: BTreeSet<&str> = BTreeSet::new();
    let mut chars: BTreeSet<char> = BTreeSet::new();
    for s in corpus {
        for t in &s.tokens {
            *word_counts.entry(t.as_str()).or_default() += 1;
            chars.extend(t.chars());
        }
        tags.extend(s.pos_tags.iter().map(String::as_str));
    }
    let words = word_counts.into_iter().filter(|&(_, c)| c >= min_count).map(|(w, _)| w.to_string());
    Ok(Vocabulary {
        words: SymbolTable::new(true, words),
        pos_tags: SymbolTable::new(true, tags.into_iter().map(str::to_string)),
        chars: SymbolTable::new(true, chars.into_iter().map(String::from)),
    })
}

/// Fixed lengths used when encoding instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncodeConfig {
    /// Sequence length T.
    pub seq_len: usize,
    /// Position clip distance L; position ids lie in `[0, 2L]`.
    pub clip: usize,
    /// Characters kept per word (W).
    pub max_word_len: usize,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        Self { seq_len: 100, clip: 50, max_word_len: 25 }
    }
}

impl EncodeConfig {
    pub fn position_vocab_size(&self) -> usize {
        2 * self.clip + 1
    }
}

/// One entity pair of a sentence as padded id sequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodedInstance {
    pub word_ids: Vec<u32>,
    pub pos_ids: Vec<u32>,
    pub char_ids: Vec<Vec<u32>>,
    pub p1_idx: Vec<u32>,
    pub p2_idx: Vec<u32>,
    pub label: Label,
}

impl EncodedInstance {
    pub fn seq_len(&self) -> usize {
        self.word_ids.len()
    }

    /// Number of leading non-PAD tokens.
    pub fn token_count(&self) -> usize {
        self.word_ids.iter().rposition(|&w| w != PAD_ID).map_or(0, |i| i + 1)
    }
}

/// Start of the length-`seq_len` window kept from a sentence of `n` tokens:
/// the smallest window holding both spans, with the spare context split
/// evenly on either side and clamped to the sentence.
fn window_start(n: usize, a: &EntitySpan, b: &EntitySpan, seq_len: usize) -> Result<usize> {
    if n <= seq_len {
        return Ok(0);
    }
    let lo = a.start.min(b.start);
    let hi = a.end.max(b.end);
    let needed = hi - lo;
    if needed > seq_len {
        return Err(Error::WindowTooSmall { needed, seq_len });
    }
    let slack = seq_len - needed;
    let start = lo.saturating_sub(slack / 2);
    Ok(start.min(n - seq_len))
}

pub fn encode_instance(
    sentence: &Sentence,
    pair: &InstancePair,
    vocab: &Vocabulary,
    cfg: &EncodeConfig,
) -> Result<EncodedInstance> {
    let (e1, e2) = match (sentence.entities.get(pair.e1), sentence.entities.get(pair.e2)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::InvalidSentence(format!("pair ({}, {}) references a missing entity", pair.e1, pair.e2)))
        }
    };
    let t_len = cfg.seq_len;
    let n = sentence.tokens.len();
    let start = window_start(n, e1, e2, t_len)?;
    let end = (start + t_len).min(n);
    let shift = |e: &EntitySpan| EntitySpan::new(e.start - start, e.end - start);
    let (s1, s2) = (shift(e1), shift(e2));

    let mut word_ids = vec![PAD_ID; t_len];
    let mut pos_ids = vec![PAD_ID; t_len];
    let mut char_ids = vec![vec![PAD_ID; cfg.max_word_len]; t_len];
    for (t, i) in (start..end).enumerate() {
        let tok = &sentence.tokens[i];
        word_ids[t] = vocab.words.id(tok);
        pos_ids[t] = vocab.pos_tags.id(&sentence.pos_tags[i]);
        for (slot, ch) in char_ids[t].iter_mut().zip(tok.chars()) {
            let mut buf = [0u8; 4];
            *slot = vocab.chars.id(ch.encode_utf8(&mut buf));
        }
    }
    let p1_idx = (0..t_len).map(|t| relative_position_index(t, &s1, cfg.clip) as u32).collect();
    let p2_idx = (0..t_len).map(|t| relative_position_index(t, &s2, cfg.clip) as u32).collect();
    Ok(EncodedInstance { word_ids, pos_ids, char_ids, p1_idx, p2_idx, label: pair.label })
}

/// Expands and encodes every pair of every sentence, in corpus order.
pub fn encode_corpus(
    sentences: &[Sentence],
    vocab: &Vocabulary,
    cfg: &EncodeConfig,
    policy: UnlabeledPolicy,
) -> Result<Vec<EncodedInstance>> {
    let mut out = Vec::new();
    for s in sentences {
        for pair in generate_instances(s, policy)? {
            out.push(encode_instance(s, &pair, vocab, cfg)?);
        }
    }
    Ok(out)
}

pub fn save_instances(path: impl AsRef<Path>, instances: &[EncodedInstance]) -> Result<()> {
    write_json_lines(path, instances)
}

pub fn load_instances(path: impl AsRef<Path>) -> Result<Vec<EncodedInstance>> {
    read_json_lines(path)
}

pub(crate) fn write_json_lines<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json_lines<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sentence(tokens: &[&str], entities: &[(usize, usize)]) -> Sentence {
        Sentence {
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            pos_tags: tokens.iter().map(|_| "NN".to_string()).collect(),
            entities: entities.iter().map(|&(s, e)| EntitySpan::new(s, e)).collect(),
            relations: Vec::new(),
        }
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_minimal_record() {
        let f = write_tmp(
            r#"{"tokens":["a","b","c"],"pos_tags":["NN","VB","NN"],"entities":[{"start":0,"end":1}],"relations":[]}"#,
        );
        let corpus = load_corpus(f.path()).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus[0].tokens.len(), 3);
    }

    #[test]
    fn short_pos_tags_name_the_line() {
        let f = write_tmp(r#"{"tokens":["a","b","c"],"pos_tags":["NN","VB"],"entities":[],"relations":[]}"#);
        match load_corpus(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_bounds_span_rejected() {
        let f = write_tmp(
            "{\"tokens\":[\"a\"],\"pos_tags\":[\"NN\"],\"entities\":[],\"relations\":[]}\n\
             {\"tokens\":[\"a\"],\"pos_tags\":[\"NN\"],\"entities\":[{\"start\":0,\"end\":2}],\"relations\":[]}\n",
        );
        match load_corpus(f.path()) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("out of bounds"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let f = write_tmp(r#"{"tokens":[],"pos_tags":[],"entities":[],"relations":[],"extra":1}"#);
        assert!(load_corpus(f.path()).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_corpus("/nonexistent/corpus.jsonl").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("/nonexistent/corpus.jsonl"));
    }

    #[test]
    fn four_entities_give_six_pairs() {
        // Sulawesi Tenggara, Wakatobi, Labengki, Matarombéo.
        let mut s = sentence(
            &["Sulawesi", "Tenggara", "menawarkan", "Wakatobi", ",", "Labengki", "dan", "Matarombéo"],
            &[(0, 2), (3, 4), (5, 6), (7, 8)],
        );
        let related = [(0, 1, true), (0, 2, true), (0, 3, true), (1, 2, false), (1, 3, false), (2, 3, false)];
        s.relations = related.iter().map(|&(e1, e2, related)| RelationAnnotation { e1, e2, related }).collect();
        let pairs = generate_instances(&s, UnlabeledPolicy::Error).unwrap();
        assert_eq!(pairs.len(), 6);
        let order: Vec<_> = pairs.iter().map(|p| (p.e1, p.e2)).collect();
        assert_eq!(order, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(pairs[3].label, Label::False);
        assert_eq!(pairs[0].label, Label::True);
    }

    #[test]
    fn pair_counts_for_small_entity_sets() {
        let two = sentence(&["a", "b"], &[(0, 1), (1, 2)]);
        assert_eq!(generate_instances(&two, UnlabeledPolicy::AssumeFalse).unwrap().len(), 1);
        let one = sentence(&["a", "b"], &[(0, 1)]);
        assert!(generate_instances(&one, UnlabeledPolicy::Error).unwrap().is_empty());
    }

    #[test]
    fn reversed_annotation_matches_pair() {
        let mut s = sentence(&["a", "b"], &[(0, 1), (1, 2)]);
        s.relations.push(RelationAnnotation { e1: 1, e2: 0, related: true });
        let pairs = generate_instances(&s, UnlabeledPolicy::Error).unwrap();
        assert_eq!(pairs[0].label, Label::True);
    }

    #[test]
    fn unannotated_pair_policy() {
        let s = sentence(&["a", "b", "c"], &[(0, 1), (1, 2), (2, 3)]);
        assert!(matches!(generate_instances(&s, UnlabeledPolicy::Error), Err(Error::UnannotatedPair(0, 1))));
        let pairs = generate_instances(&s, UnlabeledPolicy::AssumeFalse).unwrap();
        assert!(pairs.iter().all(|p| p.label == Label::False));
    }

    #[test]
    fn min_count_filters_rare_words() {
        let corpus = vec![sentence(&["a", "a", "b"], &[])];
        let v = build_vocabulary(&corpus, 2).unwrap();
        assert!(v.words.get("a").is_some());
        assert_eq!(v.words.id("b"), UNK_ID);
        let v = build_vocabulary(&corpus, 1).unwrap();
        assert!(v.words.get("b").is_some());
        assert_eq!(v.words.len(), 4);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(build_vocabulary(&[], 1), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn vocabulary_round_trips_through_file() {
        let corpus = vec![sentence(&["héllo", "world", "héllo"], &[])];
        let v = build_vocabulary(&corpus, 1).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        v.save(f.path()).unwrap();
        let back = Vocabulary::load(f.path()).unwrap();
        assert_eq!(v, back);
        assert_eq!(back.chars.id("é"), v.chars.id("é"));
    }

    #[test]
    fn non_contiguous_vocabulary_rejected() {
        let text =
            r#"{"words":{"<pad>":0,"<unk>":1,"x":3},"pos_tags":{"<pad>":0,"<unk>":1},"chars":{"<pad>":0,"<unk>":1}}"#;
        assert!(serde_json::from_str::<Vocabulary>(text).is_err());
    }

    #[test]
    fn short_sentence_is_padded() {
        let s = sentence(&["a", "b", "c"], &[(0, 1), (2, 3)]);
        let v = build_vocabulary(std::slice::from_ref(&s), 1).unwrap();
        let cfg = EncodeConfig { seq_len: 5, clip: 50, max_word_len: 4 };
        let pair = InstancePair { e1: 0, e2: 1, label: Label::True };
        let inst = encode_instance(&s, &pair, &v, &cfg).unwrap();
        assert_eq!(inst.word_ids.len(), 5);
        assert_eq!(&inst.word_ids[3..], &[PAD_ID, PAD_ID]);
        assert_eq!(inst.token_count(), 3);
        // token inside entity 1 sits at the centre of the position vocabulary
        assert_eq!(inst.p1_idx[0], 50);
        assert_eq!(inst.p1_idx[2], 52);
        assert_eq!(inst.p2_idx[0], 48);
        assert_eq!(inst.char_ids[0], vec![v.chars.id("a"), 0, 0, 0]);
    }

    #[test]
    fn far_tokens_clamp_to_zero() {
        let toks: Vec<String> = (0..80).map(|i| format!("w{i}")).collect();
        let toks: Vec<&str> = toks.iter().map(String::as_str).collect();
        let s = sentence(&toks, &[(70, 71), (75, 76)]);
        let v = build_vocabulary(std::slice::from_ref(&s), 1).unwrap();
        let cfg = EncodeConfig { seq_len: 100, clip: 50, max_word_len: 25 };
        let pair = InstancePair { e1: 0, e2: 1, label: Label::False };
        let inst = encode_instance(&s, &pair, &v, &cfg).unwrap();
        // token 0 is 70 before entity 1: clamp(-70) + 50 = 0
        assert_eq!(inst.p1_idx[0], 0);
        assert_eq!(inst.p1_idx[70], 50);
    }

    #[test]
    fn truncation_keeps_both_entities_centred() {
        let toks: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
        let toks: Vec<&str> = toks.iter().map(String::as_str).collect();
        let s = sentence(&toks, &[(10, 12), (15, 16)]);
        let v = build_vocabulary(std::slice::from_ref(&s), 1).unwrap();
        let cfg = EncodeConfig { seq_len: 10, clip: 5, max_word_len: 3 };
        let pair = InstancePair { e1: 0, e2: 1, label: Label::False };
        let inst = encode_instance(&s, &pair, &v, &cfg).unwrap();
        // union [10,16) has 6 tokens; 4 spare split 2/2 → window [8,18)
        assert_eq!(inst.word_ids[0], v.words.id("w8"));
        assert_eq!(inst.word_ids[9], v.words.id("w17"));
        assert_eq!(inst.p1_idx[2], 5);
        assert_eq!(inst.p2_idx[7], 5);

        let tight = EncodeConfig { seq_len: 5, ..cfg };
        assert!(matches!(encode_instance(&s, &pair, &v, &tight), Err(Error::WindowTooSmall { needed: 6, seq_len: 5 })));
    }

    #[test]
    fn truncation_clamps_at_sentence_edges() {
        let toks: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
        let toks: Vec<&str> = toks.iter().map(String::as_str).collect();
        let s = sentence(&toks, &[(0, 1), (2, 3)]);
        let v = build_vocabulary(std::slice::from_ref(&s), 1).unwrap();
        let cfg = EncodeConfig { seq_len: 8, clip: 5, max_word_len: 3 };
        let inst = encode_instance(&s, &InstancePair { e1: 0, e2: 1, label: Label::True }, &v, &cfg).unwrap();
        assert_eq!(inst.word_ids[0], v.words.id("w0"));
        assert_eq!(inst.token_count(), 8);
    }

    #[test]
    fn instances_round_trip_json_lines() {
        let mut s = sentence(&["a", "b", "c"], &[(0, 1), (2, 3)]);
        s.relations.push(RelationAnnotation { e1: 0, e2: 1, related: true });
        let v = build_vocabulary(std::slice::from_ref(&s), 1).unwrap();
        let insts = encode_corpus(&[s], &v, &EncodeConfig::default(), UnlabeledPolicy::Error).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_instances(f.path(), &insts).unwrap();
        assert_eq!(load_instances(f.path()).unwrap(), insts);
    }

    fn arb_sentence() -> impl Strategy<Value = Sentence> {
        (2usize..40)
            .prop_flat_map(|n| {
                let spans = proptest::collection::vec((0..n, 1usize..4), 0..6);
                (Just(n), spans, proptest::collection::vec("[a-c]{1,3}", n))
            })
            .prop_map(|(n, spans, words)| {
                let entities = spans.into_iter().map(|(s, len)| EntitySpan::new(s, (s + len).min(n))).collect();
                Sentence {
                    pos_tags: words.iter().map(|w| format!("T{}", w.len())).collect(),
                    tokens: words,
                    entities,
                    relations: Vec::new(),
                }
            })
    }

    proptest! {
        #[test]
        fn pair_count_is_n_choose_2(s in arb_sentence()) {
            let n = s.entities.len();
            let pairs = generate_instances(&s, UnlabeledPolicy::AssumeFalse).unwrap();
            prop_assert_eq!(pairs.len(), n * n.saturating_sub(1) / 2);
            let mut seen = BTreeSet::new();
            for p in &pairs {
                prop_assert!(p.e1 < p.e2);
                prop_assert!(seen.insert((p.e1, p.e2)));
            }
        }

        #[test]
        fn encoded_ids_stay_in_range(s in arb_sentence(), seq_len in 4usize..30, clip in 1usize..10) {
            let vocab = build_vocabulary(std::slice::from_ref(&s), 1).unwrap();
            let cfg = EncodeConfig { seq_len, clip, max_word_len: 3 };
            for pair in generate_instances(&s, UnlabeledPolicy::AssumeFalse).unwrap() {
                let Ok(inst) = encode_instance(&s, &pair, &vocab, &cfg) else { continue };
                prop_assert_eq!(inst.word_ids.len(), seq_len);
                prop_assert_eq!(inst.p1_idx.len(), seq_len);
                prop_assert!(inst.p1_idx.iter().chain(&inst.p2_idx).all(|&p| p as usize <= 2 * clip));
                prop_assert!(inst.word_ids.iter().all(|&w| (w as usize) < vocab.words.len()));
                prop_assert!(inst.pos_ids.iter().all(|&w| (w as usize) < vocab.pos_tags.len()));
                prop_assert!(inst.char_ids.iter().flatten().all(|&c| (c as usize) < vocab.chars.len()));
                let again = encode_instance(&s, &pair, &vocab, &cfg).unwrap();
                prop_assert_eq!(inst, again);
            }
        }
    }
}
