//! Prediction exchange files: one JSON prediction record per line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Deserialize;

use super::{LogProbs, NliModel, PairInput, Prediction};
use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
struct Record {
    uid: String,
    perm_index: u32,
    label: Label,
    #[serde(default)]
    logprobs: Option<LogProbs>,
}

impl Record {
    fn into_prediction(self) -> Prediction {
        match self.logprobs {
            Some(logprobs) => Prediction {
                uid: self.uid,
                perm_index: self.perm_index,
                label: self.label,
                logprobs,
                label_only: false,
            },
            None => Prediction::from_label(self.uid, self.perm_index, self.label),
        }
    }
}

/// Parses one exchange record. Records without `logprobs` are wrapped as
/// near-delta distributions and flagged `label_only`.
pub fn parse_prediction(line: &str) -> Result<Prediction> {
    let rec: Record = serde_json::from_str(line)?;
    let p = rec.into_prediction();
    p.validate()?;
    Ok(p)
}

pub fn read_predictions<R: BufRead>(r: R) -> Result<Vec<Prediction>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<predictions>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_prediction(&line).map_err(|e| Error::MalformedRecord {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_predictions<W: Write>(mut w: W, preds: &[Prediction]) -> Result<()> {
    for p in preds {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n").map_err(|e| Error::io("<predictions>", e))?;
    }
    Ok(())
}

/// Serves predictions computed offline, joined on `(uid, perm_index)`.
#[derive(Debug, Clone)]
pub struct ExchangeModel {
    id: String,
    by_key: HashMap<(String, u32), Prediction>,
}

impl ExchangeModel {
    pub fn from_predictions(id: impl Into<String>, preds: Vec<Prediction>) -> Result<Self> {
        let mut by_key = HashMap::with_capacity(preds.len());
        for p in preds {
            let key = (p.uid.clone(), p.perm_index);
            if by_key.contains_key(&key) {
                return Err(Error::DuplicatePrediction {
                    uid: key.0,
                    perm_index: key.1,
                });
            }
            by_key.insert(key, p);
        }
        Ok(ExchangeModel {
            id: id.into(),
            by_key,
        })
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let preds = read_predictions(BufReader::new(f))?;
        Self::from_predictions(format!("file:{}", path.display()), preds)
    }

    pub fn len(&self) -> usize {
        self.by_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_key.is_empty()
    }
}

impl NliModel for ExchangeModel {
    fn model_id(&self) -> String {
        self.id.clone()
    }

    fn predict_batch(&self, pairs: &[PairInput]) -> Result<Vec<Prediction>> {
        pairs
            .iter()
            .map(|p| {
                self.by_key
                    .get(&(p.uid.clone(), p.perm_index))
                    .cloned()
                    .ok_or_else(|| Error::MissingPrediction {
                        uid: p.uid.clone(),
                        perm_index: p.perm_index,
                    })
            })
            .collect()
    }
}
