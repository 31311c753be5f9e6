//! Client side of the HTTP prediction protocol.
//!
//! `POST /predict` takes `{"pairs": [PairInput]}` and answers
//! `{"predictions": [Prediction]}`; `GET /health` answers
//! `{"status": "ok", "model_id": str}`. Batches are sent concurrently up to
//! the in-flight cap and reassembled by `(uid, perm_index)`, so concurrency
//! never changes the result.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{NliModel, PairInput, Prediction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub timeout_secs: f64,
    pub retries: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            batch_size: 64,
            max_in_flight: 4,
            timeout_secs: 60.0,
            retries: 3,
        }
    }
}

#[derive(Debug, Serialize)]
struct PredictRequest<'a> {
    pairs: &'a [PairInput],
}

#[derive(Debug, Deserialize)]
struct PredictResponse {
    predictions: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_id: String,
}

pub struct HttpModel {
    base: String,
    model_id: String,
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

impl HttpModel {
    /// Connects and checks `/health`.
    pub fn connect(base_url: &str, config: HttpConfig) -> Result<Self> {
        if config.batch_size == 0 || config.max_in_flight == 0 {
            return Err(Error::InvalidParameter(
                "batch size and in-flight cap must be positive".into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let base = base_url.trim_end_matches('/').to_owned();
        let mut model = HttpModel {
            base,
            model_id: String::new(),
            config,
            client,
        };
        let health = model.health()?;
        if health.status != "ok" {
            return Err(Error::Protocol(format!("health status {:?}", health.status)));
        }
        model.model_id = health.model_id;
        Ok(model)
    }

    pub fn health(&self) -> Result<Health> {
        self.with_retries(|| {
            let resp = self
                .client
                .get(format!("{}/health", self.base))
                .send()
                .and_then(|r| r.error_for_status())
                .map_err(|e| Error::Transport(e.to_string()))?;
            resp.json::<Health>()
                .map_err(|e| Error::Protocol(format!("bad /health body: {e}")))
        })
    }

    fn with_retries<T>(&self, mut f: impl FnMut() -> Result<T>) -> Result<T> {
        let mut attempt = 0;
        loop {
            match f() {
                Err(Error::Transport(_)) if attempt < self.config.retries => {
                    attempt += 1;
                    std::thread::sleep(Duration::from_millis(50 * attempt as u64));
                }
                other => return other,
            }
        }
    }

    fn post_batch(&self, batch: &[PairInput]) -> Result<Vec<Prediction>> {
        let body = self.with_retries(|| {
            let resp = self
                .client
                .post(format!("{}/predict", self.base))
                .json(&PredictRequest { pairs: batch })
                .send()
                .and_then(|r| r.error_for_status())
                .map_err(|e| Error::Transport(e.to_string()))?;
            resp.json::<PredictResponse>()
                .map_err(|e| Error::Protocol(format!("bad /predict body: {e}")))
        })?;

        let mut by_key: HashMap<(String, u32), Prediction> = HashMap::new();
        for v in body.predictions {
            let p = super::exchange::parse_prediction(&v.to_string())?;
            by_key.insert((p.uid.clone(), p.perm_index), p);
        }
        batch
            .iter()
            .map(|pair| {
                by_key
                    .remove(&(pair.uid.clone(), pair.perm_index))
                    .ok_or_else(|| {
                        Error::Protocol(format!(
                            "server returned no prediction for {}#{}",
                            pair.uid, pair.perm_index
                        ))
                    })
            })
            .collect()
    }
}

impl NliModel for HttpModel {
    fn model_id(&self) -> String {
        self.model_id.clone()
    }

    fn predict_batch(&self, pairs: &[PairInput]) -> Result<Vec<Prediction>> {
        let batches: Vec<&[PairInput]> = pairs.chunks(self.config.batch_size).collect();
        let mut out = Vec::with_capacity(pairs.len());
        for wave in batches.chunks(self.config.max_in_flight) {
            let results: Vec<Result<Vec<Prediction>>> = std::thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|b| s.spawn(move || self.post_batch(b)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("request thread panicked"))
                    .collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }
}
