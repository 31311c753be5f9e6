//! The classifier abstraction consumed by the metrics.
//!
//! A model maps `(uid, perm_index, premise, hypothesis)` inputs to
//! [`Prediction`]s carrying a label and a full log-probability vector. Three
//! analytic reference models are provided alongside two transports for
//! external classifiers: a prediction exchange file and an HTTP endpoint.

mod bow;
pub mod exchange;
pub mod http;
mod reference;

use serde::{Deserialize, Serialize};

pub use bow::{train_bow, BowModel};
pub use exchange::ExchangeModel;
pub use http::{HttpConfig, HttpModel};
pub use reference::{make_model_a, make_model_b, ModelA, ModelB, MODEL_A_EPSILON};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Tolerance on `sum(exp(logprobs)) = 1`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Natural-log class probabilities in canonical label order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogProbs {
    pub entailment: f64,
    pub neutral: f64,
    pub contradiction: f64,
}

impl LogProbs {
    pub fn from_array(v: [f64; 3]) -> Self {
        LogProbs {
            entailment: v[0],
            neutral: v[1],
            contradiction: v[2],
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.entailment, self.neutral, self.contradiction]
    }

    pub fn get(&self, label: Label) -> f64 {
        self.to_array()[label.index()]
    }

    /// Highest-scoring label; ties go to the earliest label in canonical order.
    pub fn argmax(&self) -> Label {
        let v = self.to_array();
        let mut best = 0;
        for i in 1..3 {
            if v[i] > v[best] {
                best = i;
            }
        }
        Label::ALL[best]
    }

    /// Entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.to_array()
            .iter()
            .map(|&lp| {
                let p = lp.exp();
                if p > 0.0 {
                    -p * lp
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn mass(&self) -> f64 {
        self.to_array().iter().map(|lp| lp.exp()).sum()
    }

    /// Normalizes raw scores with a log-sum-exp.
    pub fn from_scores(scores: [f64; 3]) -> Self {
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        LogProbs::from_array(scores.map(|s| s - lse))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub uid: String,
    pub perm_index: u32,
    pub label: Label,
    pub logprobs: LogProbs,
    /// Set when the model supplied only a label and the distribution was
    /// synthesized.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub label_only: bool,
}

impl Prediction {
    pub fn from_logprobs(uid: impl Into<String>, perm_index: u32, logprobs: LogProbs) -> Self {
        Prediction {
            uid: uid.into(),
            perm_index,
            label: logprobs.argmax(),
            logprobs,
            label_only: false,
        }
    }

    /// Wraps a bare label as a near-delta distribution.
    pub fn from_label(uid: impl Into<String>, perm_index: u32, label: Label) -> Self {
        let eps = MODEL_A_EPSILON;
        let mut v = [eps.ln(); 3];
        v[label.index()] = (1.0 - 2.0 * eps).ln();
        Prediction {
            uid: uid.into(),
            perm_index,
            label,
            logprobs: LogProbs::from_array(v),
            label_only: true,
        }
    }

    pub fn key(&self) -> (&str, u32) {
        (&self.uid, self.perm_index)
    }

    pub fn entropy(&self) -> f64 {
        self.logprobs.entropy()
    }

    /// Checks normalization and that the label attains the maximum
    /// log-probability.
    pub fn validate(&self) -> Result<()> {
        let v = self.logprobs.to_array();
        if v.iter().any(|x| x.is_nan() || *x > 1e-12) {
            return Err(Error::Protocol(format!(
                "{}#{}: invalid log-probabilities {v:?}",
                self.uid, self.perm_index
            )));
        }
        let mass = self.logprobs.mass();
        if (mass - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::Protocol(format!(
                "{}#{}: probabilities sum to {mass}",
                self.uid, self.perm_index
            )));
        }
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if self.logprobs.get(self.label) < max {
            return Err(Error::Protocol(format!(
                "{}#{}: label {} is not a most probable label",
                self.uid, self.perm_index, self.label
            )));
        }
        Ok(())
    }
}

/// One input pair as sent to a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairInput {
    pub uid: String,
    pub perm_index: u32,
    pub premise: String,
    pub hypothesis: String,
}

impl From<&crate::permute::records::PermutedRecord> for PairInput {
    fn from(r: &crate::permute::records::PermutedRecord) -> Self {
        PairInput {
            uid: r.uid.clone(),
            perm_index: r.perm_index,
            premise: r.premise.clone(),
            hypothesis: r.hypothesis.clone(),
        }
    }
}

pub trait NliModel: Send + Sync {
    fn model_id(&self) -> String;

    /// One prediction per input, in input order.
    fn predict_batch(&self, pairs: &[PairInput]) -> Result<Vec<Prediction>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ReferenceA,
    ReferenceB,
    ReferenceBow,
    FileExchange,
    Http,
}

pub enum ModelHandle {
    ReferenceA(ModelA),
    ReferenceB(ModelB),
    ReferenceBow(BowModel),
    FileExchange(ExchangeModel),
    Http(HttpModel),
}

impl ModelHandle {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelHandle::ReferenceA(_) => ModelKind::ReferenceA,
            ModelHandle::ReferenceB(_) => ModelKind::ReferenceB,
            ModelHandle::ReferenceBow(_) => ModelKind::ReferenceBow,
            ModelHandle::FileExchange(_) => ModelKind::FileExchange,
            ModelHandle::Http(_) => ModelKind::Http,
        }
    }

    fn inner(&self) -> &dyn NliModel {
        match self {
            ModelHandle::ReferenceA(m) => m,
            ModelHandle::ReferenceB(m) => m,
            ModelHandle::ReferenceBow(m) => m,
            ModelHandle::FileExchange(m) => m,
            ModelHandle::Http(m) => m,
        }
    }
}

impl NliModel for ModelHandle {
    fn model_id(&self) -> String {
        self.inner().model_id()
    }

    fn predict_batch(&self, pairs: &[PairInput]) -> Result<Vec<Prediction>> {
        if pairs.is_empty() {
            return Err(Error::InvalidParameter("empty prediction batch".into()));
        }
        self.inner().predict_batch(pairs)
    }
}
