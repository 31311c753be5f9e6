//! Neighborhood POS signatures and the mini-tree overlap score.
//!
//! For a word occurrence, its neighborhood signature is the distribution of
//! UPOS tags on the tokens within `radius` positions of it (center excluded,
//! window clipped at sentence edges). Averaging over every occurrence of a
//! word type in a tagged training corpus gives the type's table row; the
//! overlap score compares the top-k tags of a row with those of one
//! occurrence.
//!
//! Signatures are kept as integer numerators over a shared denominator so
//! that table construction is exact and independent of reduction order.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::metrics::Fraction;

pub const TAG_COUNT: usize = 17;
pub const MAX_RADIUS: usize = 20;
pub const TABLE_VERSION: u32 = 1;

/// Universal POS tags, in the fixed order used for vectors and tie-breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Upos {
    #[serde(rename = "ADJ")]
    Adj,
    #[serde(rename = "ADP")]
    Adp,
    #[serde(rename = "ADV")]
    Adv,
    #[serde(rename = "AUX")]
    Aux,
    #[serde(rename = "CCONJ")]
    Cconj,
    #[serde(rename = "DET")]
    Det,
    #[serde(rename = "INTJ")]
    Intj,
    #[serde(rename = "NOUN")]
    Noun,
    #[serde(rename = "NUM")]
    Num,
    #[serde(rename = "PART")]
    Part,
    #[serde(rename = "PRON")]
    Pron,
    #[serde(rename = "PROPN")]
    Propn,
    #[serde(rename = "PUNCT")]
    Punct,
    #[serde(rename = "SCONJ")]
    Sconj,
    #[serde(rename = "SYM")]
    Sym,
    #[serde(rename = "VERB")]
    Verb,
    #[serde(rename = "X")]
    X,
}

impl Upos {
    pub const ALL: [Upos; TAG_COUNT] = [
        Upos::Adj,
        Upos::Adp,
        Upos::Adv,
        Upos::Aux,
        Upos::Cconj,
        Upos::Det,
        Upos::Intj,
        Upos::Noun,
        Upos::Num,
        Upos::Part,
        Upos::Pron,
        Upos::Propn,
        Upos::Punct,
        Upos::Sconj,
        Upos::Sym,
        Upos::Verb,
        Upos::X,
    ];

    const NAMES: [&'static str; TAG_COUNT] = [
        "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON",
        "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        Self::NAMES[self.index()]
    }
}

impl fmt::Display for Upos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Upos {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::NAMES
            .iter()
            .position(|&n| n == s)
            .map(|i| Upos::ALL[i])
            .ok_or_else(|| Error::UnknownTag(s.to_owned()))
    }
}

/// A tag distribution as integer numerators over a common denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    numer: [u128; TAG_COUNT],
    denom: u128,
}

impl Signature {
    /// The zero vector, for words that never had a neighbor.
    pub fn zero() -> Self {
        Signature {
            numer: [0; TAG_COUNT],
            denom: 1,
        }
    }

    pub fn get(&self, tag: Upos) -> Fraction {
        Fraction::new(self.numer[tag.index()], self.denom)
    }

    pub fn is_zero(&self) -> bool {
        self.numer.iter().all(|&n| n == 0)
    }

    pub fn to_probs(&self) -> [f64; TAG_COUNT] {
        self.numer.map(|n| Fraction::new(n, self.denom).to_f64())
    }

    /// The `k` highest-mass tags; equal masses go to the earlier tag.
    pub fn top_k(&self, k: usize) -> Vec<Upos> {
        let mut idx: Vec<usize> = (0..TAG_COUNT).collect();
        idx.sort_by(|&a, &b| self.numer[b].cmp(&self.numer[a]).then(a.cmp(&b)));
        idx.into_iter().take(k).map(|i| Upos::ALL[i]).collect()
    }
}

/// Neighborhood signature of position `i`.
pub fn neighborhood(tags: &[Upos], i: usize, radius: usize) -> Signature {
    let (numer, m) = neighbor_counts(tags, i, radius);
    if m == 0 {
        return Signature::zero();
    }
    Signature { numer, denom: m }
}

fn neighbor_counts(tags: &[Upos], i: usize, radius: usize) -> ([u128; TAG_COUNT], u128) {
    let lo = i.saturating_sub(radius);
    let hi = (i + radius + 1).min(tags.len());
    let mut counts = [0u128; TAG_COUNT];
    let mut m = 0;
    for (j, t) in tags.iter().enumerate().take(hi).skip(lo) {
        if j != i {
            counts[t.index()] += 1;
            m += 1;
        }
    }
    (counts, m)
}

/// Least common multiple of `1..=n`: every per-occurrence normalizer divides it.
fn scale_for(radius: usize) -> u128 {
    (1..=(2 * radius) as u128).fold(1, |a, b| a.lcm(&b))
}

/// A token sequence with one UPOS tag per token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<Upos>,
}

impl TaggedSentence {
    pub fn new(tokens: Vec<String>, tags: Vec<Upos>) -> Result<Self> {
        check_aligned(&tokens, &tags)?;
        Ok(TaggedSentence { tokens, tags })
    }
}

fn check_aligned(tokens: &[String], tags: &[Upos]) -> Result<()> {
    if tokens.len() != tags.len() {
        return Err(Error::MisalignedTags {
            tokens: tokens.len(),
            tags: tags.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Row {
    occurrences: u64,
    /// Occurrences in one-token sentences, which contribute no neighbors.
    isolated: u64,
    /// Per-occurrence distributions summed, scaled by the table scale.
    sums: [u128; TAG_COUNT],
}

impl Row {
    fn empty() -> Self {
        Row {
            occurrences: 0,
            isolated: 0,
            sums: [0; TAG_COUNT],
        }
    }

    fn merge(&mut self, other: &Row) {
        self.occurrences += other.occurrences;
        self.isolated += other.isolated;
        for (a, b) in self.sums.iter_mut().zip(other.sums) {
            *a += b;
        }
    }
}

/// Per-word-type mean neighborhood signatures over a tagged corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosSignatureTable {
    radius: usize,
    scale: u128,
    corpus_hash: String,
    rows: BTreeMap<String, Row>,
}

/// Builds the table in parallel. Row sums are exact integers, so the result
/// does not depend on how the work is split.
pub fn build_signature_table(sentences: &[TaggedSentence], radius: usize) -> Result<PosSignatureTable> {
    if !(1..=MAX_RADIUS).contains(&radius) {
        return Err(Error::InvalidParameter(format!(
            "radius must be 1 to {MAX_RADIUS}, got {radius}"
        )));
    }
    for s in sentences {
        check_aligned(&s.tokens, &s.tags)?;
    }
    let scale = scale_for(radius);
    let rows = sentences
        .par_iter()
        .fold(BTreeMap::new, |mut acc: BTreeMap<String, Row>, s| {
            for (i, word) in s.tokens.iter().enumerate() {
                let (counts, m) = neighbor_counts(&s.tags, i, radius);
                let row = acc.entry(word.clone()).or_insert_with(Row::empty);
                row.occurrences += 1;
                if m == 0 {
                    row.isolated += 1;
                    continue;
                }
                for (sum, c) in row.sums.iter_mut().zip(counts) {
                    *sum += c * (scale / m);
                }
            }
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (word, row) in b {
                a.entry(word).or_insert_with(Row::empty).merge(&row);
            }
            a
        });
    Ok(PosSignatureTable {
        radius,
        scale,
        corpus_hash: corpus_hash(sentences),
        rows,
    })
}

/// SHA-256 over the tokens and tags of every sentence, in order.
pub fn corpus_hash(sentences: &[TaggedSentence]) -> String {
    let mut h = Sha256::new();
    for s in sentences {
        for (tok, tag) in s.tokens.iter().zip(&s.tags) {
            h.update(tok.as_bytes());
            h.update(b"\x1f");
            h.update(tag.as_str().as_bytes());
            h.update(b" ");
        }
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

impl PosSignatureTable {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn corpus_hash(&self) -> &str {
        &self.corpus_hash
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    pub fn occurrences(&self, word: &str) -> Option<u64> {
        self.rows.get(word).map(|r| r.occurrences)
    }

    /// Mean neighborhood distribution of `word`; the zero vector when the
    /// word only ever appeared alone.
    pub fn psi(&self, word: &str) -> Option<Signature> {
        let row = self.rows.get(word)?;
        let n = u128::from(row.occurrences - row.isolated);
        if n == 0 {
            return Some(Signature::zero());
        }
        Some(Signature {
            numer: row.sums,
            denom: self.scale * n,
        })
    }

    /// Text form: `#`-prefixed header lines, then one tab-separated row per
    /// word type (`word occurrences isolated sum_ADJ .. sum_X`).
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("#pos-signature-table\tv{TABLE_VERSION}\n"));
        out.push_str(&format!("#radius\t{}\n", self.radius));
        out.push_str(&format!("#scale\t{}\n", self.scale));
        out.push_str(&format!("#tagset\t{}\n", Upos::NAMES.join(",")));
        out.push_str(&format!("#corpus_sha256\t{}\n", self.corpus_hash));
        for (word, row) in &self.rows {
            out.push_str(&format!("{word}\t{}\t{}", row.occurrences, row.isolated));
            for s in row.sums {
                out.push_str(&format!("\t{s}"));
            }
            out.push('\n');
        }
        w.write_all(out.as_bytes()).map_err(|e| Error::io("<table>", e))
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let bad = |line: usize, reason: &str| Error::MalformedRecord {
            line,
            reason: reason.to_owned(),
        };
        let mut header = HashMap::new();
        let mut rows = BTreeMap::new();
        for (i, line) in r.lines().enumerate() {
            let n = i + 1;
            let line = line.map_err(|e| Error::io("<table>", e))?;
            if let Some(h) = line.strip_prefix('#') {
                let (k, v) = h.split_once('\t').ok_or_else(|| bad(n, "malformed header"))?;
                header.insert(k.to_owned(), v.to_owned());
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 + TAG_COUNT {
                return Err(bad(n, "wrong number of columns"));
            }
            let num = |s: &str| s.parse::<u128>().map_err(|_| bad(n, "non-integer field"));
            let mut sums = [0; TAG_COUNT];
            for (slot, f) in sums.iter_mut().zip(&fields[3..]) {
                *slot = num(f)?;
            }
            let row = Row {
                occurrences: num(fields[1])? as u64,
                isolated: num(fields[2])? as u64,
                sums,
            };
            rows.insert(fields[0].to_owned(), row);
        }
        let get = |k: &str| header.get(k).ok_or_else(|| bad(0, &format!("missing header {k}")));
        if get("pos-signature-table")? != &format!("v{TABLE_VERSION}") {
            return Err(bad(1, "unsupported table version"));
        }
        if get("tagset")? != &Upos::NAMES.join(",") {
            return Err(bad(0, "tagset differs from the UPOS order"));
        }
        let radius: usize = get("radius")?.parse().map_err(|_| bad(0, "bad radius"))?;
        let scale: u128 = get("scale")?.parse().map_err(|_| bad(0, "bad scale"))?;
        if !(1..=MAX_RADIUS).contains(&radius) || scale != scale_for(radius) {
            return Err(bad(0, "radius and scale disagree"));
        }
        Ok(PosSignatureTable {
            radius,
            scale,
            corpus_hash: get("corpus_sha256")?.clone(),
            rows,
        })
    }
}

/// Mini-tree overlap of one sentence against a table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinitreeScore {
    pub k: usize,
    /// Mean per-word overlap over words found in the table; zero when none is.
    pub beta: Fraction,
    pub covered: usize,
    pub words: usize,
    pub coverage: f64,
}

/// Per word, `|top_k(table) ∩ top_k(sentence)| / k`, averaged over the words
/// the table knows. Unknown words are skipped and reflected in `coverage`.
pub fn minitree_overlap(
    tokens: &[String],
    tags: &[Upos],
    table: &PosSignatureTable,
    k: usize,
) -> Result<MinitreeScore> {
    if !(1..=TAG_COUNT).contains(&k) {
        return Err(Error::InvalidParameter(format!("k must be 1 to {TAG_COUNT}, got {k}")));
    }
    check_aligned(tokens, tags)?;
    let mut hits = 0u128;
    let mut covered = 0usize;
    for (i, word) in tokens.iter().enumerate() {
        let Some(train) = table.psi(word) else { continue };
        let local = neighborhood(tags, i, table.radius);
        let a = train.top_k(k);
        let b = local.top_k(k);
        hits += a.iter().filter(|t| b.contains(t)).count() as u128;
        covered += 1;
    }
    let beta = if covered == 0 {
        Fraction::zero()
    } else {
        Fraction::new(hits, (k * covered) as u128)
    };
    Ok(MinitreeScore {
        k,
        beta,
        covered,
        words: tokens.len(),
        coverage: if tokens.is_empty() { 0.0 } else { covered as f64 / tokens.len() as f64 },
    })
}

/// `β(permuted) / β(original)`, or `None` when the original scores zero.
pub fn signature_ratio(permuted: &MinitreeScore, original: &MinitreeScore) -> Option<Fraction> {
    if original.beta.is_zero() {
        return None;
    }
    Some(Fraction::from_ratio(permuted.beta.ratio() / original.beta.ratio()))
}

/// Tags for one example, as exchanged with an external tagger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedRecord {
    pub uid: String,
    pub premise_tags: Vec<Upos>,
    pub hypothesis_tags: Vec<Upos>,
}

/// Premise and hypothesis of every example in `d`, tagged from `tags`.
pub fn tagged_sentences(d: &Dataset, tags: &[TaggedRecord]) -> Result<Vec<TaggedSentence>> {
    let by_uid: HashMap<&str, &TaggedRecord> = tags.iter().map(|t| (t.uid.as_str(), t)).collect();
    let mut out = Vec::with_capacity(2 * d.len());
    for ex in &d.examples {
        let t = by_uid
            .get(ex.uid.as_str())
            .ok_or_else(|| Error::InvalidParameter(format!("no tags for {:?}", ex.uid)))?;
        out.push(TaggedSentence::new(ex.premise.tokens().to_vec(), t.premise_tags.clone())?);
        out.push(TaggedSentence::new(ex.hypothesis.tokens().to_vec(), t.hypothesis_tags.clone())?);
    }
    Ok(out)
}

pub fn read_tagged<R: BufRead>(r: R) -> Result<Vec<TaggedRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<tags>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TaggedRecord = serde_json::from_str(&line).map_err(|e| {
            if e.to_string().contains("unknown variant") {
                Error::UnknownTag(e.to_string())
            } else {
                Error::MalformedRecord {
                    line: i + 1,
                    reason: e.to_string(),
                }
            }
        })?;
        out.push(rec);
    }
    Ok(out)
}
