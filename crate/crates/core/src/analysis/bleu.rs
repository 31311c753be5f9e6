//! Sentence-level BLEU between a permuted sentence and its original.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Buckets;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuConfig {
    /// Highest n-gram order, 1 to 4.
    pub max_order: usize,
    /// Stand-in match count for orders with no matching n-gram.
    pub smoothing: f64,
    /// Score boundaries for acceptance curves, strictly increasing in `[0, 1]`.
    pub bucket_edges: Vec<f64>,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            max_order: 2,
            smoothing: 1e-9,
            bucket_edges: vec![0.0, 0.15, 0.3, 0.45, 0.6, 0.75, 0.9, 1.0],
        }
    }
}

impl BleuConfig {
    pub fn order(max_order: usize) -> Self {
        BleuConfig {
            max_order,
            ..BleuConfig::default()
        }
    }

    pub fn buckets(&self) -> Result<Buckets> {
        if self.bucket_edges.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::InvalidParameter(format!(
                "BLEU bucket edges must lie in [0, 1]: {:?}",
                self.bucket_edges
            )));
        }
        Buckets::bounded(self.bucket_edges.clone())
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts
            .entry(w.iter().map(AsRef::as_ref).collect())
            .or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram matches and candidate n-gram total for one order.
pub fn modified_precision<S: AsRef<str>>(reference: &[S], candidate: &[S], n: usize) -> (usize, usize) {
    let refs = ngram_counts(reference, n);
    let cand = ngram_counts(candidate, n);
    let matches = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    (matches, candidate.len() + 1 - n)
}

/// Geometric mean of modified n-gram precisions for orders `1..=max_order`
/// times the brevity penalty. An order without matches contributes
/// `smoothing / total` instead of zero.
pub fn bleu<S: AsRef<str>>(reference: &[S], candidate: &[S], cfg: &BleuConfig) -> Result<f64> {
    if reference.is_empty() || candidate.is_empty() {
        return Err(Error::InvalidParameter("BLEU needs non-empty sentences".into()));
    }
    if !(1..=4).contains(&cfg.max_order) {
        return Err(Error::InvalidParameter(format!(
            "BLEU order must be 1 to 4, got {}",
            cfg.max_order
        )));
    }
    if cfg.max_order > reference.len().min(candidate.len()) {
        return Err(Error::InvalidParameter(format!(
            "BLEU-{} is undefined for sentences of {} and {} tokens",
            cfg.max_order,
            reference.len(),
            candidate.len()
        )));
    }
    let mut log_sum = 0.0;
    for n in 1..=cfg.max_order {
        let (matches, total) = modified_precision(reference, candidate, n);
        let p = if matches == 0 {
            cfg.smoothing / total as f64
        } else {
            matches as f64 / total as f64
        };
        log_sum += p.ln();
    }
    let (r, c) = (reference.len() as f64, candidate.len() as f64);
    let brevity = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(brevity * (log_sum / cfg.max_order as f64).exp())
}
