use std::collections::{BTreeMap, HashMap};

use super::{LogProbs, ModelHandle, NliModel, PairInput, Prediction};
use crate::corpus::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Side {
    Premise,
    Hypothesis,
}

/// Multinomial naive Bayes over side-tagged word counts.
///
/// A pair is reduced to a multiset of `(side, word)` features before
/// scoring and the log-likelihood is summed in sorted feature order, so the
/// output is bit-identical under any reordering of either sentence.
#[derive(Debug, Clone)]
pub struct BowModel {
    id: String,
    log_prior: [f64; 3],
    log_likelihood: HashMap<(Side, String), [f64; 3]>,
    log_unknown: [f64; 3],
}

/// Fits the bag-of-words reference model with add-`smoothing` estimates.
pub fn train_bow(train: &Dataset, smoothing: f64) -> Result<ModelHandle> {
    BowModel::train(train, smoothing).map(ModelHandle::ReferenceBow)
}

impl BowModel {
    pub fn train(train: &Dataset, smoothing: f64) -> Result<Self> {
        if !(smoothing > 0.0 && smoothing.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "smoothing must be positive, got {smoothing}"
            )));
        }
        let mut label_counts = [0u64; 3];
        let mut totals = [0u64; 3];
        let mut counts: BTreeMap<(Side, String), [u64; 3]> = BTreeMap::new();
        for ex in &train.examples {
            let y = ex.gold.index();
            label_counts[y] += 1;
            let sides = [
                (Side::Premise, ex.premise.tokens()),
                (Side::Hypothesis, ex.hypothesis.tokens()),
            ];
            for (side, tokens) in sides {
                for t in tokens {
                    counts.entry((side, t.clone())).or_default()[y] += 1;
                    totals[y] += 1;
                }
            }
        }
        if counts.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let n: u64 = label_counts.iter().sum();
        let vocab = counts.len() as f64;
        let denom: [f64; 3] =
            std::array::from_fn(|y| totals[y] as f64 + smoothing * (vocab + 1.0));
        let log_prior = std::array::from_fn(|y| {
            ((label_counts[y] as f64 + smoothing) / (n as f64 + 3.0 * smoothing)).ln()
        });
        let log_unknown = std::array::from_fn(|y| (smoothing / denom[y]).ln());
        let log_likelihood = counts
            .into_iter()
            .map(|(k, c)| {
                let ll = std::array::from_fn(|y| ((c[y] as f64 + smoothing) / denom[y]).ln());
                (k, ll)
            })
            .collect();
        Ok(BowModel {
            id: format!("reference_bow({}, alpha={smoothing})", train.name),
            log_prior,
            log_likelihood,
            log_unknown,
        })
    }

    pub fn score(&self, premise: &str, hypothesis: &str) -> LogProbs {
        let mut bag: BTreeMap<(Side, &str), u32> = BTreeMap::new();
        for t in premise.split_whitespace() {
            *bag.entry((Side::Premise, t)).or_default() += 1;
        }
        for t in hypothesis.split_whitespace() {
            *bag.entry((Side::Hypothesis, t)).or_default() += 1;
        }
        let mut scores = self.log_prior;
        let mut unknown = 0u32;
        for ((side, tok), n) in bag {
            match self.log_likelihood.get(&(side, tok.to_owned())) {
                Some(ll) => {
                    for y in 0..3 {
                        scores[y] += f64::from(n) * ll[y];
                    }
                }
                None => unknown += n,
            }
        }
        for y in 0..3 {
            scores[y] += f64::from(unknown) * self.log_unknown[y];
        }
        LogProbs::from_scores(scores)
    }
}

impl NliModel for BowModel {
    fn model_id(&self) -> String {
        self.id.clone()
    }

    fn predict_batch(&self, pairs: &[PairInput]) -> Result<Vec<Prediction>> {
        Ok(pairs
            .iter()
            .map(|p| {
                Prediction::from_logprobs(
                    p.uid.clone(),
                    p.perm_index,
                    self.score(&p.premise, &p.hypothesis),
                )
            })
            .collect())
    }
}
