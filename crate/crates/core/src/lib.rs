//! Word-order permutation robustness for three-way NLI classifiers.
//!
//! Build permuted evaluation sets, collect predictions from any classifier
//! and measure how often it keeps the gold label once word order is gone.
//!
//! ```
//! use permacc::corpus::{Dataset, Example, Label};
//! use permacc::manifest::permute_dataset;
//! use permacc::metrics::{build_outcomes, compute_report, MetricsConfig};
//! use permacc::model::{make_model_a, NliModel, PairInput};
//! use permacc::permute::PermutationSpec;
//!
//! let ex = Example {
//!     uid: "1".into(),
//!     premise: "a man is playing a guitar on stage".parse()?,
//!     hypothesis: "someone on a stage makes music".parse()?,
//!     gold: Label::Neutral,
//! };
//! let data = Dataset::new("demo", vec![ex])?;
//! let (records, _) = permute_dataset(&data, &PermutationSpec::new(5, 1), 3)?;
//!
//! let model = make_model_a();
//! let inputs: Vec<PairInput> = records.iter().map(PairInput::from).collect();
//! let preds = model.predict_batch(&inputs)?;
//!
//! let outcomes = build_outcomes(&records, &preds)?;
//! let report = compute_report("demo", &model.model_id(), &outcomes, &MetricsConfig::default())?;
//! assert_eq!(report.omega_max.to_f64(), 1.0);
//! # Ok::<(), permacc::Error>(())
//! ```

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod manifest;
pub mod metrics;
pub mod model;
pub mod permute;

pub use error::{Error, Result};
