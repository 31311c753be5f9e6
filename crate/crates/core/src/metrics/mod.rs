//! Permutation-acceptance metrics.
//!
//! For every example the fraction of its `q` permutations assigned the gold
//! label (`pr_correct`) is computed exactly as a rational. The summary
//! metrics are fractions of examples above a threshold (`Ω_x`) and means of
//! `pr_correct` over the examples the model originally got right (`P^c`) or
//! wrong (`P^f`). All aggregation is done on integer counters and exact
//! rationals, so results do not depend on fold order.

mod entropy;
mod fraction;
mod report;

use std::collections::{HashMap, HashSet};

use num_rational::Ratio;
use rayon::prelude::*;

pub use entropy::{entropy_stats, quartiles, EntropySummary, Quartiles};
pub use fraction::Fraction;
pub use report::{
    compute_report, per_example_csv, FlipSummary, MetricsConfig, MetricsReport, OmegaPoint,
    ReportMetadata,
};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::model::Prediction;
use crate::permute::records::PermutedRecord;

/// Per-example summary of the model's behavior on one permutation set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleOutcome {
    pub uid: String,
    pub gold: Label,
    pub original_label: Label,
    pub original_correct: bool,
    /// Number of permutations.
    pub q: u32,
    /// Sorted perm indices (1-based) whose prediction equals the gold label.
    pub correct_perm_indices: Vec<u32>,
    /// Entropy in nats of the prediction for perm index `i + 1`.
    pub entropies: Vec<f64>,
}

impl ExampleOutcome {
    pub fn from_predictions(gold: Label, original: &Prediction, perms: &[Prediction]) -> Result<Self> {
        let pr = pr_correct(perms, gold)?;
        let mut sorted: Vec<&Prediction> = perms.iter().collect();
        sorted.sort_by_key(|p| p.perm_index);
        let correct_perm_indices: Vec<u32> = sorted
            .iter()
            .filter(|p| p.label == gold)
            .map(|p| p.perm_index)
            .collect();
        debug_assert_eq!(Fraction::new(correct_perm_indices.len() as u128, perms.len() as u128), pr);
        Ok(ExampleOutcome {
            uid: original.uid.clone(),
            gold,
            original_label: original.label,
            original_correct: original.label == gold,
            q: perms.len() as u32,
            correct_perm_indices,
            entropies: sorted.iter().map(|p| p.entropy()).collect(),
        })
    }

    pub fn correct(&self) -> u32 {
        self.correct_perm_indices.len() as u32
    }

    pub fn pr_correct(&self) -> Fraction {
        Fraction::new(u128::from(self.correct()), u128::from(self.q))
    }

    /// Entropies of the permutations that received the gold label.
    pub fn accepted_entropies(&self) -> impl Iterator<Item = f64> + '_ {
        self.correct_perm_indices
            .iter()
            .map(|&i| self.entropies[(i - 1) as usize])
    }

    pub fn is_flip(&self) -> bool {
        !self.original_correct && self.correct() > 0
    }
}

/// Fraction of an example's permutations predicted as `gold`.
///
/// `preds` must hold exactly one prediction for each perm index `1..=q`.
pub fn pr_correct(preds: &[Prediction], gold: Label) -> Result<Fraction> {
    let q = preds.len();
    if q == 0 {
        return Err(Error::InvalidParameter("no permutations to score".into()));
    }
    let mut seen = vec![false; q];
    for p in preds {
        let i = p.perm_index as usize;
        if i == 0 || i > q {
            return Err(Error::InvalidParameter(format!(
                "{}: perm_index {} outside 1..={q}",
                p.uid, p.perm_index
            )));
        }
        if std::mem::replace(&mut seen[i - 1], true) {
            return Err(Error::DuplicatePrediction {
                uid: p.uid.clone(),
                perm_index: p.perm_index,
            });
        }
    }
    let correct = preds.iter().filter(|p| p.label == gold).count();
    Ok(Fraction::new(correct as u128, q as u128))
}

fn check_threshold(x: Fraction) -> Result<()> {
    if x.is_zero() || x > Fraction::one() {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in (0, 1], got {x}"
        )));
    }
    Ok(())
}

fn nonempty(outcomes: &[ExampleOutcome]) -> Result<()> {
    if outcomes.is_empty() {
        return Err(Error::InvalidParameter("no example outcomes".into()));
    }
    Ok(())
}

/// Whether one example counts toward `Ω_x`: strictly more than a fraction
/// `x` of its permutations are correct, except at `x = 1` where all of them
/// must be.
pub fn passes(pr: Fraction, x: Fraction) -> bool {
    if x == Fraction::one() {
        pr == x
    } else {
        pr > x
    }
}

/// Fraction of examples whose `pr_correct` exceeds `x`.
pub fn omega_x(outcomes: &[ExampleOutcome], x: Fraction) -> Result<Fraction> {
    check_threshold(x)?;
    nonempty(outcomes)?;
    let hits = outcomes
        .par_iter()
        .filter(|o| passes(o.pr_correct(), x))
        .count();
    Ok(Fraction::new(hits as u128, outcomes.len() as u128))
}

/// Fraction of examples with at least one correct permutation.
pub fn omega_max(outcomes: &[ExampleOutcome]) -> Result<Fraction> {
    nonempty(outcomes)?;
    let hits = outcomes.iter().filter(|o| o.correct() > 0).count();
    Ok(Fraction::new(hits as u128, outcomes.len() as u128))
}

/// `Ω_x` at chance level for three-way classification.
pub fn omega_rand(outcomes: &[ExampleOutcome]) -> Result<Fraction> {
    omega_x(outcomes, Fraction::new(1, 3))
}

/// Examples split by whether the original, unpermuted pair was classified
/// correctly. Holds indices into the outcome slice.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Partition {
    pub correct: Vec<usize>,
    pub incorrect: Vec<usize>,
}

impl Partition {
    pub fn correct_uids<'a>(&'a self, outcomes: &'a [ExampleOutcome]) -> impl Iterator<Item = &'a str> {
        self.correct.iter().map(move |&i| outcomes[i].uid.as_str())
    }

    pub fn incorrect_uids<'a>(&'a self, outcomes: &'a [ExampleOutcome]) -> impl Iterator<Item = &'a str> {
        self.incorrect.iter().map(move |&i| outcomes[i].uid.as_str())
    }
}

pub fn partition_cf(outcomes: &[ExampleOutcome]) -> Partition {
    let mut part = Partition::default();
    for (i, o) in outcomes.iter().enumerate() {
        if o.original_correct {
            part.correct.push(i);
        } else {
            part.incorrect.push(i);
        }
    }
    part
}

/// Partition from original (perm index 0) predictions and gold labels.
pub fn partition_from_originals(
    originals: &[Prediction],
    golds: &HashMap<String, Label>,
) -> Result<(Vec<String>, Vec<String>)> {
    let mut by_uid: HashMap<&str, &Prediction> = HashMap::new();
    for p in originals.iter().filter(|p| p.perm_index == 0) {
        by_uid.insert(&p.uid, p);
    }
    let mut uids: Vec<&String> = golds.keys().collect();
    uids.sort();
    let (mut correct, mut incorrect) = (Vec::new(), Vec::new());
    for uid in uids {
        let p = by_uid.get(uid.as_str()).ok_or_else(|| Error::MissingPrediction {
            uid: uid.clone(),
            perm_index: 0,
        })?;
        if p.label == golds[uid] {
            correct.push(uid.clone());
        } else {
            incorrect.push(uid.clone());
        }
    }
    Ok((correct, incorrect))
}

fn mean_pr(outcomes: &[ExampleOutcome], side: &[usize]) -> Option<Fraction> {
    if side.is_empty() {
        return None;
    }
    let sum = side
        .iter()
        .map(|&i| outcomes[i].pr_correct().ratio())
        .fold(Ratio::from_integer(0u128), |a, b| a + b);
    Some(Fraction::from_ratio(sum / Ratio::from_integer(side.len() as u128)))
}

/// Mean `pr_correct` over originally-correct and originally-incorrect
/// examples; `None` for an empty side.
pub fn p_c_p_f(outcomes: &[ExampleOutcome], part: &Partition) -> (Option<Fraction>, Option<Fraction>) {
    (mean_pr(outcomes, &part.correct), mean_pr(outcomes, &part.incorrect))
}

/// Originally misclassified examples with at least one correct permutation.
pub fn flips(outcomes: &[ExampleOutcome], part: &Partition) -> Vec<String> {
    part.incorrect
        .iter()
        .map(|&i| &outcomes[i])
        .filter(|o| o.correct() > 0)
        .map(|o| o.uid.clone())
        .collect()
}

/// Joins permutation records with predictions and builds one outcome per
/// example, in record order. Any missing prediction aborts with the full
/// list of missing keys.
pub fn build_outcomes(records: &[PermutedRecord], preds: &[Prediction]) -> Result<Vec<ExampleOutcome>> {
    let mut by_key: HashMap<(&str, u32), &Prediction> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_key.insert((p.uid.as_str(), p.perm_index), p).is_some() {
            return Err(Error::DuplicatePrediction {
                uid: p.uid.clone(),
                perm_index: p.perm_index,
            });
        }
    }

    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&PermutedRecord>> = HashMap::new();
    for r in records {
        groups
            .entry(r.uid.as_str())
            .or_insert_with(|| {
                order.push(r.uid.as_str());
                Vec::new()
            })
            .push(r);
    }

    let mut missing = Vec::new();
    for r in records {
        if !by_key.contains_key(&(r.uid.as_str(), r.perm_index)) {
            missing.push(format!("{}#{}", r.uid, r.perm_index));
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingPredictions {
            count: missing.len(),
            first: missing.into_iter().take(10).collect::<Vec<_>>().join(", "),
        });
    }

    order
        .par_iter()
        .map(|uid| {
            let group = &groups[uid];
            let mut indices = HashSet::new();
            let mut original = None;
            let mut perms = Vec::with_capacity(group.len());
            for r in group {
                if !indices.insert(r.perm_index) {
                    return Err(Error::InvalidParameter(format!(
                        "duplicate record {}#{}",
                        r.uid, r.perm_index
                    )));
                }
                let p = by_key[&(r.uid.as_str(), r.perm_index)];
                if r.perm_index == 0 {
                    original = Some(p);
                } else {
                    perms.push(p.clone());
                }
            }
            let original = original.ok_or_else(|| Error::MissingPrediction {
                uid: (*uid).to_owned(),
                perm_index: 0,
            })?;
            ExampleOutcome::from_predictions(group[0].label, original, &perms)
        })
        .collect()
}
