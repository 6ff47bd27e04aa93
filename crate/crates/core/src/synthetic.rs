//! Seeded generator of annotated toy corpora.
//!
//! A pair is related when the tokens between the two entities contain a
//! linking marker and no negation, or when the entities are at most one
//! token apart and no negation separates them.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EntitySpan, RelationAnnotation, Sentence};
use crate::seed::{rng_for, Purpose};

pub const LINK_MARKERS: [&str; 4] = ["bersama", "dengan", "milik", "bekerja"];
pub const BLOCKERS: [&str; 2] = ["bukan", "tanpa"];

const FILLERS: [&str; 24] = [
    "yang", "itu", "ini", "kemarin", "pada", "akan", "sudah", "baru", "hari", "besar", "kota", "tahun", "sangat",
    "juga", "lalu", "setelah", "acara", "berita", "menurut", "para", "saat", "kecil", "jalan", "rumah",
];
const FILLER_TAGS: [&str; 3] = ["NN", "VB", "JJ"];
const NAMES: [&str; 16] = [
    "Budi",
    "Siti",
    "Andi",
    "Dewi",
    "Jakarta",
    "Bandung",
    "Surabaya",
    "Medan",
    "Pertamina",
    "Telkom",
    "Garuda",
    "Rina",
    "Joko",
    "Bali",
    "Bogor",
    "Indosat",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub min_len: usize,
    pub max_len: usize,
    /// Probability of a link marker in each gap between adjacent entities.
    pub marker_rate: f64,
    /// Probability of a negation in each gap.
    pub blocker_rate: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { min_len: 10, max_len: 24, marker_rate: 0.5, blocker_rate: 0.2 }
    }
}

/// Ground-truth relatedness of two spans of `s`.
pub fn relation_rule(s: &Sentence, a: &EntitySpan, b: &EntitySpan) -> bool {
    let (lo, hi) = if a.start <= b.start { (a, b) } else { (b, a) };
    let between = &s.tokens[lo.end.min(hi.start)..hi.start];
    let blocked = between.iter().any(|t| BLOCKERS.contains(&t.as_str()));
    let linked = between.iter().any(|t| LINK_MARKERS.contains(&t.as_str()));
    !blocked && (linked || between.len() <= 1)
}

/// `n` sentences, each with two or three entities and all pairs annotated.
pub fn generate_corpus(n: usize, seed: u64, cfg: &SyntheticConfig) -> Vec<Sentence> {
    let mut rng = rng_for(seed, Purpose::Synthetic);
    (0..n).map(|_| generate_sentence(&mut rng, cfg)).collect()
}

fn generate_sentence<R: Rng>(rng: &mut R, cfg: &SyntheticConfig) -> Sentence {
    let len = rng.random_range(cfg.min_len.max(6)..=cfg.max_len.max(cfg.min_len.max(6)));
    let n_ent = rng.random_range(2..=3usize);
    let mut entities = Vec::with_capacity(n_ent);
    loop {
        entities.clear();
        let mut starts: Vec<usize> = (0..n_ent).map(|_| rng.random_range(0..len - 1)).collect();
        starts.sort_unstable();
        let mut ok = true;
        for &st in &starts {
            let width = if rng.random_bool(0.3) { 2 } else { 1 };
            let end = (st + width).min(len);
            if entities.last().is_some_and(|p: &EntitySpan| p.end >= st) {
                ok = false;
                break;
            }
            entities.push(EntitySpan::new(st, end));
        }
        if ok {
            break;
        }
    }
    let mut tokens: Vec<String> = (0..len).map(|_| FILLERS.choose(rng).unwrap().to_string()).collect();
    let mut pos_tags: Vec<String> = (0..len).map(|_| FILLER_TAGS.choose(rng).unwrap().to_string()).collect();
    for e in &entities {
        for i in e.start..e.end {
            tokens[i] = NAMES.choose(rng).unwrap().to_string();
            pos_tags[i] = "NNP".into();
        }
    }
    for w in entities.windows(2) {
        let gap = w[0].end..w[1].start;
        if gap.is_empty() {
            continue;
        }
        if rng.random_bool(cfg.marker_rate) {
            let i = rng.random_range(gap.clone());
            tokens[i] = LINK_MARKERS.choose(rng).unwrap().to_string();
            pos_tags[i] = "IN".into();
        }
        if rng.random_bool(cfg.blocker_rate) {
            let i = rng.random_range(gap);
            tokens[i] = BLOCKERS.choose(rng).unwrap().to_string();
            pos_tags[i] = "NEG".into();
        }
    }
    let mut s = Sentence { tokens, pos_tags, entities, relations: Vec::new() };
    for i in 0..s.entities.len() {
        for j in i + 1..s.entities.len() {
            let related = relation_rule(&s, &s.entities[i], &s.entities[j]);
            s.relations.push(RelationAnnotation { e1: i, e2: j, related });
        }
    }
    s
}
