use serde::Serialize;

use crate::error::{Error, Result};

/// Half-open score buckets `[edges[i], edges[i+1])`. Bounded buckets close
/// the last interval; open-ended ones add `[edges[last], inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Buckets {
    edges: Vec<f64>,
    open_ended: bool,
}

impl Buckets {
    pub fn bounded(edges: Vec<f64>) -> Result<Self> {
        Self::new(edges, false)
    }

    pub fn open_ended(edges: Vec<f64>) -> Result<Self> {
        Self::new(edges, true)
    }

    fn new(edges: Vec<f64>, open_ended: bool) -> Result<Self> {
        let min = if open_ended { 1 } else { 2 };
        if edges.len() < min || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid bucket edges {edges:?}")));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "bucket edges must be strictly increasing: {edges:?}"
            )));
        }
        Ok(Buckets { edges, open_ended })
    }

    /// `count` equal-width buckets over `[0, 1]`.
    pub fn unit(count: usize) -> Self {
        let edges = (0..=count).map(|i| i as f64 / count as f64).collect();
        Buckets::bounded(edges).expect("valid unit grid")
    }

    pub fn len(&self) -> usize {
        if self.open_ended {
            self.edges.len()
        } else {
            self.edges.len() - 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn bounds(&self, i: usize) -> (f64, Option<f64>) {
        (self.edges[i], self.edges.get(i + 1).copied())
    }

    pub fn index(&self, v: f64) -> Option<usize> {
        if v.is_nan() || v < self.edges[0] {
            return None;
        }
        let last = *self.edges.last().expect("non-empty");
        if v >= last {
            return if self.open_ended {
                Some(self.edges.len() - 1)
            } else if v == last {
                Some(self.edges.len() - 2)
            } else {
                None
            };
        }
        Some(self.edges.partition_point(|&e| e <= v) - 1)
    }
}

/// Acceptance statistics for one bucket.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub bucket_low: f64,
    /// `None` for the open-ended last bucket.
    pub bucket_high: Option<f64>,
    pub count: usize,
    pub accepted: usize,
    /// `None` for an empty bucket.
    pub acceptance_rate: Option<f64>,
}

pub(crate) fn tally(buckets: &Buckets, items: impl IntoIterator<Item = (f64, bool)>) -> Vec<CurvePoint> {
    let mut counts = vec![(0usize, 0usize); buckets.len()];
    for (v, accepted) in items {
        if let Some(i) = buckets.index(v) {
            counts[i].0 += 1;
            counts[i].1 += usize::from(accepted);
        }
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, (count, accepted))| {
            let (low, high) = buckets.bounds(i);
            CurvePoint {
                bucket_low: low,
                bucket_high: high,
                count,
                accepted,
                acceptance_rate: (count > 0).then(|| accepted as f64 / count as f64),
            }
        })
        .collect()
}

/// `bucket_low,bucket_high,count,acceptance_rate` rows; empty cells for
/// unbounded edges and empty buckets.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("bucket_low,bucket_high,count,acceptance_rate\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.bucket_low,
            p.bucket_high.map(|h| h.to_string()).unwrap_or_default(),
            p.count,
            p.acceptance_rate.map(|r| r.to_string()).unwrap_or_default()
        ));
    }
    out
}
