use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    entropy_stats, flips, omega_max, omega_x, p_c_p_f, partition_cf, EntropySummary,
    ExampleOutcome, Fraction,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricsConfig {
    /// Grid for the `Ω_x` sweep, each in `(0, 1]`.
    pub thresholds: Vec<Fraction>,
}

impl MetricsConfig {
    /// `k / points` for `k = 1..=points`.
    pub fn grid(points: u128) -> Self {
        MetricsConfig {
            thresholds: (1..=points).map(|k| Fraction::new(k, points)).collect(),
        }
    }
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig::grid(50)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub label_count: u32,
    pub threshold_rule: String,
    pub omega_max_rule: String,
    pub omega_rand_threshold: String,
    pub entropy_unit: String,
    pub scale: String,
}

impl Default for ReportMetadata {
    fn default() -> Self {
        ReportMetadata {
            label_count: 3,
            threshold_rule: "pr_correct > x for x < 1; pr_correct = 1 at x = 1".into(),
            omega_max_rule: "at least one permutation predicted as gold".into(),
            omega_rand_threshold: "1/3 (strict, so 34 of 100 is the minimum passing count)"
                .into(),
            entropy_unit: "nats".into(),
            scale: "all rates are fractions in [0, 1]".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaPoint {
    pub x: Fraction,
    pub omega: Fraction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlipSummary {
    pub count: usize,
    pub uids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub model_id: String,
    pub examples: usize,
    /// Permutations per example, when constant.
    pub q: Option<u32>,
    pub accuracy: Fraction,
    pub correct: usize,
    pub omega_max: Fraction,
    pub omega_rand: Fraction,
    pub omega_one: Fraction,
    pub p_c: Option<Fraction>,
    pub p_f: Option<Fraction>,
    pub d_c: usize,
    pub d_f: usize,
    /// Originally-correct examples with at least one accepted permutation.
    pub d_c_accepting: usize,
    pub flips: FlipSummary,
    pub omega_curve: Vec<OmegaPoint>,
    pub entropy: EntropySummary,
    pub metadata: ReportMetadata,
}

pub fn compute_report(
    dataset: &str,
    model_id: &str,
    outcomes: &[ExampleOutcome],
    cfg: &MetricsConfig,
) -> Result<MetricsReport> {
    if outcomes.is_empty() {
        return Err(Error::InvalidParameter("no example outcomes".into()));
    }
    let part = partition_cf(outcomes);
    let (p_c, p_f) = p_c_p_f(outcomes, &part);
    let flipped = flips(outcomes, &part);
    let mut grid = cfg.thresholds.clone();
    grid.sort();
    grid.dedup();
    let omega_curve = grid
        .iter()
        .map(|&x| Ok(OmegaPoint { x, omega: omega_x(outcomes, x)? }))
        .collect::<Result<Vec<_>>>()?;
    let q = outcomes[0].q;
    Ok(MetricsReport {
        dataset: dataset.to_owned(),
        model_id: model_id.to_owned(),
        examples: outcomes.len(),
        q: outcomes.iter().all(|o| o.q == q).then_some(q),
        accuracy: Fraction::new(part.correct.len() as u128, outcomes.len() as u128),
        correct: part.correct.len(),
        omega_max: omega_max(outcomes)?,
        omega_rand: omega_x(outcomes, Fraction::new(1, 3))?,
        omega_one: omega_x(outcomes, Fraction::one())?,
        p_c,
        p_f,
        d_c: part.correct.len(),
        d_f: part.incorrect.len(),
        d_c_accepting: part.correct.iter().filter(|&&i| outcomes[i].correct() > 0).count(),
        flips: FlipSummary {
            count: flipped.len(),
            uids: flipped,
        },
        omega_curve,
        entropy: entropy_stats(outcomes, &part),
        metadata: ReportMetadata::default(),
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn opt(v: Option<Fraction>) -> String {
    v.map(|f| f.to_f64().to_string()).unwrap_or_default()
}

impl MetricsReport {
    /// Violated report invariants; empty when the report is consistent.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let one = Fraction::one();
        let mut bounded = vec![
            ("accuracy", Some(self.accuracy)),
            ("omega_max", Some(self.omega_max)),
            ("omega_rand", Some(self.omega_rand)),
            ("omega_one", Some(self.omega_one)),
            ("p_c", self.p_c),
            ("p_f", self.p_f),
        ];
        bounded.extend(self.omega_curve.iter().map(|p| ("omega_x", Some(p.omega))));
        for (name, v) in bounded {
            if let Some(v) = v {
                if v > one {
                    bad.push(format!("{name} = {v} exceeds 1"));
                }
            }
        }
        for w in self.omega_curve.windows(2) {
            if w[1].omega > w[0].omega {
                bad.push(format!(
                    "omega_x increases from {} at x = {} to {} at x = {}",
                    w[0].omega, w[0].x, w[1].omega, w[1].x
                ));
            }
        }
        if !(self.omega_max >= self.omega_rand && self.omega_rand >= self.omega_one) {
            bad.push(format!(
                "expected omega_max >= omega_rand >= omega_one, got {} / {} / {}",
                self.omega_max, self.omega_rand, self.omega_one
            ));
        }
        let floor = Fraction::new(self.d_c_accepting as u128, self.examples.max(1) as u128);
        if self.omega_max < floor {
            bad.push(format!("omega_max = {} below the D^c floor {floor}", self.omega_max));
        }
        if self.d_c + self.d_f != self.examples || self.d_c != self.correct {
            bad.push("partition sizes disagree with example counts".into());
        }
        if self.flips.count > self.d_f {
            bad.push("more flips than originally incorrect examples".into());
        }
        bad
    }

    /// One `metric,value` row per scalar metric.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        let mut row = |k: &str, v: String| {
            let _ = writeln!(out, "{},{}", csv_field(k), v);
        };
        row("examples", self.examples.to_string());
        row("q", self.q.map(|q| q.to_string()).unwrap_or_default());
        row("accuracy", self.accuracy.to_f64().to_string());
        row("correct", self.correct.to_string());
        row("omega_max", self.omega_max.to_f64().to_string());
        row("omega_rand", self.omega_rand.to_f64().to_string());
        row("omega_one", self.omega_one.to_f64().to_string());
        row("p_c", opt(self.p_c));
        row("p_f", opt(self.p_f));
        row("d_c", self.d_c.to_string());
        row("d_f", self.d_f.to_string());
        row("flips", self.flips.count.to_string());
        for p in &self.omega_curve {
            row(&format!("omega_x@{}", p.x.to_f64()), p.omega.to_f64().to_string());
        }
        out
    }

    /// The `Ω_x` sweep as `x,omega` rows.
    pub fn sweep_csv(&self) -> String {
        let mut out = String::from("x,omega\n");
        for p in &self.omega_curve {
            let _ = writeln!(out, "{},{}", p.x.to_f64(), p.omega.to_f64());
        }
        out
    }
}

/// `uid,original_correct,pr_correct,flip` rows for plotting.
pub fn per_example_csv(outcomes: &[ExampleOutcome]) -> String {
    let mut out = String::from("uid,original_correct,pr_correct,flip\n");
    for o in outcomes {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            csv_field(&o.uid),
            o.original_correct,
            o.pr_correct().to_f64(),
            o.is_flip()
        );
    }
    out
}
