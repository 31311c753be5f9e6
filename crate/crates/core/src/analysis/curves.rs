//! Acceptance broken down by BLEU overlap, POS signature ratio and length.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::bleu::{bleu, BleuConfig};
use super::buckets::{tally, Buckets, CurvePoint};
use super::pos::{minitree_overlap, signature_ratio, MinitreeScore, PosSignatureTable, TaggedRecord, Upos};
use crate::error::{Error, Result};
use crate::metrics::{ExampleOutcome, Fraction};
use crate::model::Prediction;
use crate::permute::records::PermutedRecord;
use crate::permute::Mode;

/// A permuted record, its original and whether the model kept the gold label.
struct Joined<'a> {
    original: &'a PermutedRecord,
    permuted: &'a PermutedRecord,
    accepted: bool,
}

fn join<'a>(records: &'a [PermutedRecord], preds: &[Prediction]) -> Result<Vec<Joined<'a>>> {
    let labels: HashMap<(&str, u32), _> = preds.iter().map(|p| ((p.uid.as_str(), p.perm_index), p.label)).collect();
    let originals: HashMap<&str, &PermutedRecord> = records
        .iter()
        .filter(|r| r.is_original())
        .map(|r| (r.uid.as_str(), r))
        .collect();
    records
        .iter()
        .filter(|r| !r.is_original())
        .map(|r| {
            let original = *originals.get(r.uid.as_str()).ok_or_else(|| {
                Error::InvalidParameter(format!("no original record for {:?}", r.uid))
            })?;
            let label = labels.get(&(r.uid.as_str(), r.perm_index)).ok_or_else(|| {
                Error::MissingPrediction {
                    uid: r.uid.clone(),
                    perm_index: r.perm_index,
                }
            })?;
            Ok(Joined {
                original,
                permuted: r,
                accepted: *label == r.label,
            })
        })
        .collect()
}

fn tokens(text: &str) -> Vec<&str> {
    text.split(' ').collect()
}

/// Pair-level BLEU of a permuted record against its original: the mean of
/// premise and hypothesis scores, or the hypothesis score alone when only
/// hypotheses were permuted.
pub fn pair_bleu(original: &PermutedRecord, permuted: &PermutedRecord, cfg: &BleuConfig) -> Result<f64> {
    let h = bleu(&tokens(&original.hypothesis), &tokens(&permuted.hypothesis), cfg)?;
    if permuted.mode == Mode::HypothesisOnly {
        return Ok(h);
    }
    let p = bleu(&tokens(&original.premise), &tokens(&permuted.premise), cfg)?;
    Ok((p + h) / 2.0)
}

/// Acceptance rate per BLEU bucket over every permuted record.
pub fn bleu_acceptance_curve(
    records: &[PermutedRecord],
    preds: &[Prediction],
    cfg: &BleuConfig,
) -> Result<Vec<CurvePoint>> {
    let buckets = cfg.buckets()?;
    let scored = join(records, preds)?
        .par_iter()
        .map(|j| Ok((pair_bleu(j.original, j.permuted, cfg)?, j.accepted)))
        .collect::<Result<Vec<_>>>()?;
    Ok(tally(&buckets, scored))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioCurve {
    pub points: Vec<CurvePoint>,
    /// Pairs scored.
    pub pairs: usize,
    /// Pairs dropped because an original sentence had zero overlap.
    pub excluded: usize,
    /// Pairs whose permutation sits closer to the training statistic than
    /// the original does (ratio above 1).
    pub above_one: usize,
}

fn permuted_tags(tags: &[Upos], source: Option<&Vec<usize>>, len: usize, uid: &str) -> Result<Vec<Upos>> {
    match source {
        Some(src) => {
            if src.len() != len || src.iter().any(|&i| i >= tags.len()) {
                return Err(Error::MisalignedTags {
                    tokens: len,
                    tags: tags.len(),
                });
            }
            Ok(src.iter().map(|&i| tags[i]).collect())
        }
        None => Err(Error::InvalidParameter(format!(
            "permuted record {uid:?} lacks source positions"
        ))),
    }
}

fn side_ratio(
    original: &str,
    permuted: &str,
    tags: &[Upos],
    source: Option<&Vec<usize>>,
    uid: &str,
    table: &PosSignatureTable,
    k: usize,
) -> Result<Option<Fraction>> {
    let orig_tokens: Vec<String> = original.split(' ').map(String::from).collect();
    let perm_tokens: Vec<String> = permuted.split(' ').map(String::from).collect();
    let base: MinitreeScore = minitree_overlap(&orig_tokens, tags, table, k)?;
    let ptags = permuted_tags(tags, source, perm_tokens.len(), uid)?;
    let perm = minitree_overlap(&perm_tokens, &ptags, table, k)?;
    Ok(signature_ratio(&perm, &base))
}

/// Acceptance rate per bucket of `β(permuted) / β(original)`. Tags for the
/// original sentences come from `tags`; permuted tags follow the recorded
/// source positions.
pub fn signature_ratio_curve(
    records: &[PermutedRecord],
    preds: &[Prediction],
    tags: &[TaggedRecord],
    table: &PosSignatureTable,
    k: usize,
    buckets: &Buckets,
) -> Result<RatioCurve> {
    let by_uid: HashMap<&str, &TaggedRecord> = tags.iter().map(|t| (t.uid.as_str(), t)).collect();
    let joined = join(records, preds)?;
    let scored = joined
        .par_iter()
        .map(|j| {
            let uid = j.permuted.uid.as_str();
            let t = by_uid
                .get(uid)
                .ok_or_else(|| Error::InvalidParameter(format!("no tags for {uid:?}")))?;
            let h = side_ratio(
                &j.original.hypothesis,
                &j.permuted.hypothesis,
                &t.hypothesis_tags,
                j.permuted.hypothesis_source.as_ref(),
                uid,
                table,
                k,
            )?;
            let ratio = if j.permuted.mode == Mode::HypothesisOnly {
                h.map(Fraction::ratio)
            } else {
                let p = side_ratio(
                    &j.original.premise,
                    &j.permuted.premise,
                    &t.premise_tags,
                    j.permuted.premise_source.as_ref(),
                    uid,
                    table,
                    k,
                )?;
                match (p, h) {
                    (Some(p), Some(h)) => Some((p.ratio() + h.ratio()) / 2),
                    _ => None,
                }
            };
            Ok((ratio.map(|r| Fraction::from_ratio(r).to_f64()), j.accepted))
        })
        .collect::<Result<Vec<_>>>()?;
    let excluded = scored.iter().filter(|(r, _)| r.is_none()).count();
    let kept: Vec<(f64, bool)> = scored.into_iter().filter_map(|(r, a)| r.map(|r| (r, a))).collect();
    Ok(RatioCurve {
        pairs: kept.len(),
        excluded,
        above_one: kept.iter().filter(|(r, _)| *r > 1.0).count(),
        points: tally(buckets, kept),
    })
}

/// Mean acceptance per length bucket.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthPoint {
    pub bucket_low: f64,
    pub bucket_high: Option<f64>,
    pub count: usize,
    pub mean_pr_correct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthCurves {
    /// Originally-correct examples.
    pub correct: Vec<LengthPoint>,
    /// Originally-incorrect examples.
    pub incorrect: Vec<LengthPoint>,
}

/// Mean of premise and hypothesis token counts of each original record.
pub fn example_lengths(records: &[PermutedRecord]) -> HashMap<String, f64> {
    records
        .iter()
        .filter(|r| r.is_original())
        .map(|r| {
            let n = tokens(&r.premise).len() + tokens(&r.hypothesis).len();
            (r.uid.clone(), n as f64 / 2.0)
        })
        .collect()
}

fn length_points(buckets: &Buckets, items: &[(f64, Fraction)]) -> Vec<LengthPoint> {
    let mut sums = vec![(0usize, Fraction::zero()); buckets.len()];
    for &(len, pr) in items {
        if let Some(i) = buckets.index(len) {
            sums[i].0 += 1;
            sums[i].1 = Fraction::from_ratio(sums[i].1.ratio() + pr.ratio());
        }
    }
    sums.into_iter()
        .enumerate()
        .map(|(i, (count, total))| {
            let (low, high) = buckets.bounds(i);
            LengthPoint {
                bucket_low: low,
                bucket_high: high,
                count,
                mean_pr_correct: (count > 0)
                    .then(|| Fraction::from_ratio(total.ratio() / count as u128).to_f64()),
            }
        })
        .collect()
}

/// Mean `pr_correct` per length bucket, split by whether the original pair
/// was classified correctly.
pub fn length_acceptance(
    outcomes: &[ExampleOutcome],
    lengths: &HashMap<String, f64>,
    buckets: &Buckets,
) -> Result<LengthCurves> {
    let mut correct = Vec::new();
    let mut incorrect = Vec::new();
    for o in outcomes {
        let len = *lengths
            .get(&o.uid)
            .ok_or_else(|| Error::InvalidParameter(format!("no length for {:?}", o.uid)))?;
        let side = if o.original_correct { &mut correct } else { &mut incorrect };
        side.push((len, o.pr_correct()));
    }
    Ok(LengthCurves {
        correct: length_points(buckets, &correct),
        incorrect: length_points(buckets, &incorrect),
    })
}

/// `side,bucket_low,bucket_high,count,mean_pr_correct` rows.
pub fn length_csv(curves: &LengthCurves) -> String {
    let mut out = String::from("side,bucket_low,bucket_high,count,mean_pr_correct\n");
    for (side, pts) in [("correct", &curves.correct), ("incorrect", &curves.incorrect)] {
        for p in pts {
            out.push_str(&format!(
                "{side},{},{},{},{}\n",
                p.bucket_low,
                p.bucket_high.map(|h| h.to_string()).unwrap_or_default(),
                p.count,
                p.mean_pr_correct.map(|m| m.to_string()).unwrap_or_default()
            ));
        }
    }
    out
}
