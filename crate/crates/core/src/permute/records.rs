//! The permuted-dataset file: one JSON record per line, the original pair at
//! `perm_index` 0 followed by its permutations.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Mode, PermutationSet, PermutationSpec};
use crate::corpus::{Example, Label, TokenSeq};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutedRecord {
    pub uid: String,
    pub perm_index: u32,
    pub premise: String,
    pub hypothesis: String,
    pub seed: u64,
    pub clump_fraction: f64,
    pub mode: Mode,
    /// Gold label of the source example, carried so reports need no
    /// second input.
    pub label: Label,
    /// Source position of every premise token; absent for originals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premise_source: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis_source: Option<Vec<usize>>,
}

impl PermutedRecord {
    pub fn premise_tokens(&self) -> Result<TokenSeq> {
        self.premise.parse()
    }

    pub fn hypothesis_tokens(&self) -> Result<TokenSeq> {
        self.hypothesis.parse()
    }

    pub fn is_original(&self) -> bool {
        self.perm_index == 0
    }
}

/// The original pair followed by every permutation in `set`.
pub fn records_for(ex: &Example, set: &PermutationSet, spec: &PermutationSpec) -> Vec<PermutedRecord> {
    let mut out = Vec::with_capacity(set.pairs.len() + 1);
    out.push(PermutedRecord {
        uid: ex.uid.clone(),
        perm_index: 0,
        premise: ex.premise.text(),
        hypothesis: ex.hypothesis.text(),
        seed: 0,
        clump_fraction: spec.clump_fraction,
        mode: spec.mode,
        label: ex.gold,
        premise_source: None,
        hypothesis_source: None,
    });
    for pair in &set.pairs {
        out.push(PermutedRecord {
            uid: ex.uid.clone(),
            perm_index: pair.perm_index,
            premise: pair.premise.tokens.text(),
            hypothesis: pair.hypothesis.tokens.text(),
            seed: pair.seed,
            clump_fraction: spec.clump_fraction,
            mode: spec.mode,
            label: ex.gold,
            premise_source: Some(pair.premise.source.clone()),
            hypothesis_source: Some(pair.hypothesis.source.clone()),
        });
    }
    out
}

pub fn write_records<W: Write>(mut w: W, records: &[PermutedRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(r: R) -> Result<Vec<PermutedRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}
