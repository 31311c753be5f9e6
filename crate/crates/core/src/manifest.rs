//! Everything needed to regenerate a permuted dataset bit-for-bit.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{filter_eligible, Dataset, DropReport};
use crate::error::Result;
use crate::permute::records::{records_for, PermutedRecord};
use crate::permute::{generate_all, Mode, PermutationSpec};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub master_seed: u64,
    pub q: usize,
    pub mode: Mode,
    pub clump_fraction: f64,
    pub min_tokens: usize,
    pub dataset_name: String,
    /// SHA-256 of the canonical JSONL form of the input dataset.
    pub dataset_sha256: String,
    pub examples: usize,
    pub retained: usize,
    /// SHA-256 of the permuted-dataset file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<String>>,
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(spec: &PermutationSpec, min_tokens: usize, dataset: &Dataset, retained: usize) -> Self {
        RunManifest {
            version: TOOLKIT_VERSION.to_owned(),
            master_seed: spec.master_seed,
            q: spec.q,
            mode: spec.mode,
            clump_fraction: spec.clump_fraction,
            min_tokens,
            dataset_name: dataset.name.clone(),
            dataset_sha256: sha256_hex(dataset.to_jsonl().as_bytes()),
            examples: dataset.len(),
            retained,
            output_sha256: None,
            model_id: None,
            thresholds: None,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn spec(&self) -> PermutationSpec {
        PermutationSpec {
            q: self.q,
            master_seed: self.master_seed,
            mode: self.mode,
            clump_fraction: self.clump_fraction,
        }
    }

    /// Whether `dataset` is the one this manifest was made from.
    pub fn matches(&self, dataset: &Dataset) -> bool {
        sha256_hex(dataset.to_jsonl().as_bytes()) == self.dataset_sha256
    }

    /// Re-runs filtering and permutation with the recorded settings.
    pub fn regenerate(&self, dataset: &Dataset) -> Result<Vec<PermutedRecord>> {
        Ok(permute_dataset(dataset, &self.spec(), self.min_tokens)?.0)
    }
}

/// Filters `dataset` for eligibility and emits every retained example's
/// original followed by its permutations.
pub fn permute_dataset(
    dataset: &Dataset,
    spec: &PermutationSpec,
    min_tokens: usize,
) -> Result<(Vec<PermutedRecord>, DropReport)> {
    spec.validate()?;
    let (kept, report) = filter_eligible(dataset, min_tokens, spec.q)?;
    let sets = generate_all(&kept, spec)?;
    let records = kept
        .examples
        .iter()
        .zip(&sets)
        .flat_map(|(ex, set)| records_for(ex, set, spec))
        .collect();
    Ok((records, report))
}
