//! Loading, tokenizing and filtering NLI datasets.
//!
//! Every source format is normalized into [`Example`] records with a
//! three-way [`Label`]. Tokenization is whitespace-only; anything richer has
//! to arrive pretokenized in the `premise_tokens` / `hypothesis_tokens`
//! arrays of the canonical record.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permute::derangement_capacity;

/// Gold or predicted NLI label.
///
/// The declaration order is the canonical order used everywhere a label
/// index or a tie-break is needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Entailment,
    Neutral,
    Contradiction,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Neutral, Label::Contradiction];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Neutral => "neutral",
            Label::Contradiction => "contradiction",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match parse_source_label(s) {
            SourceLabel::Known(l) => Ok(l),
            _ => Err(Error::Protocol(format!("unknown label {s:?}"))),
        }
    }
}

enum SourceLabel {
    Known(Label),
    Missing,
    TwoWay,
    Unmappable,
}

fn parse_source_label(raw: &str) -> SourceLabel {
    match raw.trim().to_ascii_lowercase().as_str() {
        "entailment" | "e" | "0" => SourceLabel::Known(Label::Entailment),
        "neutral" | "n" | "1" => SourceLabel::Known(Label::Neutral),
        "contradiction" | "c" | "2" => SourceLabel::Known(Label::Contradiction),
        "" | "-" | "-1" => SourceLabel::Missing,
        "not_entailment" | "not-entailment" | "non-entailment" | "non_entailment" => {
            SourceLabel::TwoWay
        }
        _ => SourceLabel::Unmappable,
    }
}

/// A non-empty sequence of whitespace-free tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        for t in &tokens {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::InvalidToken(t.clone()));
            }
        }
        Ok(TokenSeq(tokens))
    }

    /// Wraps tokens produced by rearranging an already validated sequence.
    pub(crate) fn from_validated(tokens: Vec<String>) -> Self {
        debug_assert!(!tokens.is_empty());
        TokenSeq(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }

    /// Tokens joined by single spaces.
    pub fn text(&self) -> String {
        self.0.join(" ")
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

impl FromStr for TokenSeq {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        tokenize(s, TokenizeMode::Whitespace)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizeMode {
    #[default]
    Whitespace,
    /// Tokens were produced upstream. Text input must already be the tokens
    /// joined by single spaces; records must carry the token arrays.
    Pretokenized,
}

pub fn tokenize(text: &str, mode: TokenizeMode) -> Result<TokenSeq> {
    if text.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    let tokens = match mode {
        TokenizeMode::Whitespace => text.split_whitespace().map(str::to_owned).collect(),
        TokenizeMode::Pretokenized => text.split(' ').map(str::to_owned).collect(),
    };
    TokenSeq::new(tokens)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub uid: String,
    pub premise: TokenSeq,
    pub hypothesis: TokenSeq,
    pub gold: Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, examples: Vec<Example>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(examples.len());
        for ex in &examples {
            if !seen.insert(ex.uid.as_str()) {
                return Err(Error::DuplicateUid(ex.uid.clone()));
            }
        }
        Ok(Dataset {
            name: name.into(),
            examples,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Canonical JSONL encoding, one record per example in dataset order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for ex in &self.examples {
            let rec = CanonicalRecord {
                uid: ex.uid.clone(),
                premise: ex.premise.text(),
                hypothesis: ex.hypothesis.text(),
                label: ex.gold.as_str().to_owned(),
                premise_tokens: None,
                hypothesis_tokens: None,
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// The canonical dataset record, one JSON object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CanonicalRecord {
    pub uid: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premise_tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis_tokens: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Tsv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(Format::Jsonl),
            "tsv" => Ok(Format::Tsv),
            other => Err(Error::UnknownFormat(other.to_owned())),
        }
    }
}

/// Source field names for each canonical field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMap {
    /// When `None`, uids are synthesized from the line number.
    pub uid: Option<String>,
    pub premise: String,
    pub hypothesis: String,
    pub label: String,
    pub premise_tokens: String,
    pub hypothesis_tokens: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            uid: Some("uid".into()),
            premise: "premise".into(),
            hypothesis: "hypothesis".into(),
            label: "label".into(),
            premise_tokens: "premise_tokens".into(),
            hypothesis_tokens: "hypothesis_tokens".into(),
        }
    }
}

impl FieldMap {
    /// Field names used by the MNLI and SNLI distributions (both TSV and JSONL).
    pub fn glue_style() -> Self {
        FieldMap {
            uid: Some("pairID".into()),
            premise: "sentence1".into(),
            hypothesis: "sentence2".into(),
            label: "gold_label".into(),
            ..FieldMap::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub records: usize,
    pub missing_label: usize,
    pub unmappable_label: usize,
}

impl LoadReport {
    pub fn dropped(&self) -> usize {
        self.missing_label + self.unmappable_label
    }
}

/// Reads a dataset file. Records without a usable three-way label are
/// dropped and counted in the returned [`LoadReport`].
pub fn load_dataset(
    path: impl AsRef<Path>,
    format: Format,
    fields: &FieldMap,
    mode: TokenizeMode,
) -> Result<(Dataset, LoadReport)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_dataset(&name, &text, format, fields, mode)
}

pub fn parse_dataset(
    name: &str,
    text: &str,
    format: Format,
    fields: &FieldMap,
    mode: TokenizeMode,
) -> Result<(Dataset, LoadReport)> {
    let rows = match format {
        Format::Jsonl => jsonl_rows(text, fields)?,
        Format::Tsv => tsv_rows(text, fields)?,
    };
    let mut report = LoadReport::default();
    let mut examples = Vec::with_capacity(rows.len());
    for row in rows {
        report.records += 1;
        let gold = match parse_source_label(&row.label) {
            SourceLabel::Known(l) => l,
            SourceLabel::Missing => {
                report.missing_label += 1;
                continue;
            }
            SourceLabel::Unmappable => {
                report.unmappable_label += 1;
                continue;
            }
            SourceLabel::TwoWay => return Err(Error::TwoWayLabels(row.label)),
        };
        let malformed = |e: Error| Error::MalformedRecord {
            line: row.line,
            reason: e.to_string(),
        };
        let premise = row_tokens(row.premise, row.premise_tokens, mode).map_err(malformed)?;
        let hypothesis =
            row_tokens(row.hypothesis, row.hypothesis_tokens, mode).map_err(malformed)?;
        examples.push(Example {
            uid: row.uid,
            premise,
            hypothesis,
            gold,
        });
    }
    Ok((Dataset::new(name, examples)?, report))
}

struct RawRow {
    line: usize,
    uid: String,
    premise: Option<String>,
    hypothesis: Option<String>,
    premise_tokens: Option<Vec<String>>,
    hypothesis_tokens: Option<Vec<String>>,
    label: String,
}

fn row_tokens(
    text: Option<String>,
    tokens: Option<Vec<String>>,
    mode: TokenizeMode,
) -> Result<TokenSeq> {
    match (mode, tokens, text) {
        (TokenizeMode::Pretokenized, Some(tokens), _) => TokenSeq::new(tokens),
        (TokenizeMode::Pretokenized, None, _) => {
            Err(Error::InvalidParameter("pretokenized mode needs token arrays".into()))
        }
        (TokenizeMode::Whitespace, _, Some(text)) => tokenize(&text, TokenizeMode::Whitespace),
        (TokenizeMode::Whitespace, Some(tokens), None) => TokenSeq::new(tokens),
        (TokenizeMode::Whitespace, None, None) => Err(Error::EmptyText),
    }
}

fn json_scalar(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Null => None,
        other => Some(other.to_string()),
    }
}

fn jsonl_rows(text: &str, fields: &FieldMap) -> Result<Vec<RawRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::MalformedRecord {
            line: line_no,
            reason,
        };
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| malformed("not a JSON object".into()))?;
        let get = |k: &str| obj.get(k).and_then(json_scalar);
        let get_tokens = |k: &str| -> Result<Option<Vec<String>>> {
            match obj.get(k) {
                None | Some(serde_json::Value::Null) => Ok(None),
                Some(v) => serde_json::from_value(v.clone())
                    .map(Some)
                    .map_err(|e| malformed(format!("{k}: {e}"))),
            }
        };
        let uid = match &fields.uid {
            Some(k) => get(k).ok_or_else(|| malformed(format!("missing field {k:?}")))?,
            None => format!("line-{line_no}"),
        };
        let premise_tokens = get_tokens(&fields.premise_tokens)?;
        let hypothesis_tokens = get_tokens(&fields.hypothesis_tokens)?;
        let premise = get(&fields.premise);
        let hypothesis = get(&fields.hypothesis);
        if premise.is_none() && premise_tokens.is_none() {
            return Err(malformed(format!("missing field {:?}", fields.premise)));
        }
        if hypothesis.is_none() && hypothesis_tokens.is_none() {
            return Err(malformed(format!("missing field {:?}", fields.hypothesis)));
        }
        rows.push(RawRow {
            line: line_no,
            uid,
            premise,
            hypothesis,
            premise_tokens,
            hypothesis_tokens,
            label: get(&fields.label).unwrap_or_default(),
        });
    }
    Ok(rows)
}

fn tsv_rows(text: &str, fields: &FieldMap) -> Result<Vec<RawRow>> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let columns: Vec<&str> = header.split('\t').collect();
    let col = |name: &str| -> Result<usize> {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::MalformedRecord {
                line: 1,
                reason: format!("header has no column {name:?}"),
            })
    };
    let uid_col = fields.uid.as_deref().map(col).transpose()?;
    let premise_col = col(&fields.premise)?;
    let hypothesis_col = col(&fields.hypothesis)?;
    let label_col = col(&fields.label)?;

    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        let cell = |c: usize| -> Result<String> {
            cells
                .get(c)
                .map(|s| (*s).to_owned())
                .ok_or_else(|| Error::MalformedRecord {
                    line: line_no,
                    reason: format!("expected at least {} columns, found {}", c + 1, cells.len()),
                })
        };
        rows.push(RawRow {
            line: line_no,
            uid: match uid_col {
                Some(c) => cell(c)?,
                None => format!("line-{line_no}"),
            },
            premise: Some(cell(premise_col)?),
            hypothesis: Some(cell(hypothesis_col)?),
            premise_tokens: None,
            hypothesis_tokens: None,
            label: cell(label_col)?,
        });
    }
    Ok(rows)
}

/// Why an example was removed by [`filter_eligible`]. The first failing
/// check wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    PremiseTooShort,
    HypothesisTooShort,
    PremiseCapacity,
    HypothesisCapacity,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropReport {
    pub input: usize,
    pub retained: usize,
    pub premise_too_short: usize,
    pub hypothesis_too_short: usize,
    pub premise_capacity: usize,
    pub hypothesis_capacity: usize,
    /// `(uid, reason)` for every dropped example, in dataset order.
    pub dropped: Vec<(String, DropReason)>,
}

impl DropReport {
    pub fn dropped_total(&self) -> usize {
        self.premise_too_short
            + self.hypothesis_too_short
            + self.premise_capacity
            + self.hypothesis_capacity
    }
}

pub fn eligibility(ex: &Example, min_tokens: usize, q: usize) -> Option<DropReason> {
    if ex.premise.len() < min_tokens {
        return Some(DropReason::PremiseTooShort);
    }
    if ex.hypothesis.len() < min_tokens {
        return Some(DropReason::HypothesisTooShort);
    }
    if derangement_capacity(&ex.premise) < q as u128 {
        return Some(DropReason::PremiseCapacity);
    }
    if derangement_capacity(&ex.hypothesis) < q as u128 {
        return Some(DropReason::HypothesisCapacity);
    }
    None
}

/// Keeps examples whose premise and hypothesis both have at least
/// `min_tokens` tokens and at least `q` distinct derangements.
pub fn filter_eligible(d: &Dataset, min_tokens: usize, q: usize) -> Result<(Dataset, DropReport)> {
    if min_tokens < 2 {
        return Err(Error::InvalidParameter(format!(
            "min_tokens must be at least 2, got {min_tokens}"
        )));
    }
    let verdicts: Vec<Option<DropReason>> = d
        .examples
        .par_iter()
        .map(|ex| eligibility(ex, min_tokens, q))
        .collect();

    let mut report = DropReport {
        input: d.len(),
        ..DropReport::default()
    };
    let mut kept = Vec::new();
    for (ex, verdict) in d.examples.iter().zip(verdicts) {
        match verdict {
            None => kept.push(ex.clone()),
            Some(reason) => {
                match reason {
                    DropReason::PremiseTooShort => report.premise_too_short += 1,
                    DropReason::HypothesisTooShort => report.hypothesis_too_short += 1,
                    DropReason::PremiseCapacity => report.premise_capacity += 1,
                    DropReason::HypothesisCapacity => report.hypothesis_capacity += 1,
                }
                report.dropped.push((ex.uid.clone(), reason));
            }
        }
    }
    report.retained = kept.len();
    Ok((
        Dataset {
            name: d.name.clone(),
            examples: kept,
        },
        report,
    ))
}
