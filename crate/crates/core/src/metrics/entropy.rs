use serde::Serialize;

use super::{ExampleOutcome, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

/// Five-number summary with linearly interpolated quartiles.
pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    Some(Quartiles {
        count: v.len(),
        min: v[0],
        q1: at(0.25),
        median: at(0.5),
        q3: at(0.75),
        max: v[v.len() - 1],
        mean: v.iter().sum::<f64>() / v.len() as f64,
    })
}

/// Entropies (nats) of accepted permutations, summarized separately for
/// originally-correct and originally-incorrect examples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropySummary {
    pub unit: &'static str,
    /// Maximum possible entropy, `ln 3`.
    pub ceiling: f64,
    pub correct: Option<Quartiles>,
    pub incorrect: Option<Quartiles>,
}

pub fn entropy_stats(outcomes: &[ExampleOutcome], part: &Partition) -> EntropySummary {
    let collect = |side: &[usize]| -> Vec<f64> {
        side.iter()
            .flat_map(|&i| outcomes[i].accepted_entropies())
            .collect()
    };
    EntropySummary {
        unit: "nats",
        ceiling: 3f64.ln(),
        correct: quartiles(&collect(&part.correct)),
        incorrect: quartiles(&collect(&part.incorrect)),
    }
}
