use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LogProbs, NliModel, PairInput, Prediction};
use crate::corpus::Label;
use crate::error::Result;
use crate::model::ModelHandle;
use crate::permute::seed::keyed_seed;

/// Off-label mass of the constant-neutral model.
pub const MODEL_A_EPSILON: f64 = 1e-6;

/// Treats every input as meaningless and answers neutral.
#[derive(Debug, Clone, Copy, Default)]
pub struct ModelA;

pub fn make_model_a() -> ModelHandle {
    ModelHandle::ReferenceA(ModelA)
}

impl NliModel for ModelA {
    fn model_id(&self) -> String {
        "reference_a".into()
    }

    fn predict_batch(&self, pairs: &[PairInput]) -> Result<Vec<Prediction>> {
        let eps = MODEL_A_EPSILON;
        let logprobs = LogProbs::from_array([eps.ln(), (1.0 - 2.0 * eps).ln(), eps.ln()]);
        Ok(pairs
            .iter()
            .map(|p| Prediction::from_logprobs(p.uid.clone(), p.perm_index, logprobs))
            .collect())
    }
}

/// Guesses a label uniformly at random, seeded per `(uid, perm_index)`, and
/// reports a uniform distribution.
#[derive(Debug, Clone, Copy)]
pub struct ModelB {
    pub seed: u64,
}

pub fn make_model_b(seed: u64) -> ModelHandle {
    ModelHandle::ReferenceB(ModelB { seed })
}

impl ModelB {
    pub fn draw(&self, uid: &str, perm_index: u32) -> Label {
        let mut rng = ChaCha8Rng::seed_from_u64(keyed_seed(self.seed, uid, u64::from(perm_index)));
        Label::ALL[rng.gen_range(0..3)]
    }
}

impl NliModel for ModelB {
    fn model_id(&self) -> String {
        format!("reference_b(seed={})", self.seed)
    }

    fn predict_batch(&self, pairs: &[PairInput]) -> Result<Vec<Prediction>> {
        let uniform = LogProbs::from_array([-(3f64.ln()); 3]);
        Ok(pairs
            .iter()
            .map(|p| Prediction {
                uid: p.uid.clone(),
                perm_index: p.perm_index,
                label: self.draw(&p.uid, p.perm_index),
                logprobs: uniform,
                label_only: false,
            })
            .collect())
    }
}
