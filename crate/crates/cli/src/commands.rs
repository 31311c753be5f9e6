use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use log::{debug, info, warn};
use permacc::analysis::{
    self, bleu_acceptance_curve, build_signature_table, curve_csv, example_lengths,
    length_acceptance, length_csv, read_tagged, signature_ratio_curve, tagged_sentences,
    BleuConfig, Buckets, PosSignatureTable,
};
use permacc::corpus::{load_dataset, Dataset, FieldMap, Format, TokenizeMode};
use permacc::manifest::{permute_dataset, sha256_hex, RunManifest};
use permacc::metrics::{build_outcomes, compute_report, per_example_csv, Fraction, MetricsConfig, MetricsReport};
use permacc::model::exchange::{read_predictions, write_predictions};
use permacc::model::{
    make_model_a, make_model_b, train_bow, ExchangeModel, HttpConfig, HttpModel, ModelHandle,
    NliModel, PairInput, Prediction,
};
use permacc::permute::records::{read_records, write_records, PermutedRecord};
use permacc::permute::{permute_train, Mode, PermutationSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::*;
use crate::{
    BleuArgs, Cli, Command, DatasetArgs, EvaluateArgs, JoinArgs, LengthArgs, OutputFormat,
    PermuteArgs, PermuteTrainArgs, PosArgs, ReportArgs, SweepArgs,
};

pub fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    if let Some(n) = cli.workers.or(cfg.workers) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Permute(a) => permute(a, &cfg),
        Command::PermuteTrain(a) => permute_training_set(a, &cfg),
        Command::Evaluate(a) => evaluate(a, &cfg),
        Command::Report(a) => report(a, &cfg),
        Command::Sweep(a) => sweep(a, &cfg),
        Command::AnalyzeBleu(a) => analyze_bleu(a, &cfg),
        Command::AnalyzePos(a) => analyze_pos(a, &cfg),
        Command::AnalyzeLength(a) => analyze_length(a, &cfg),
    }
}

fn load(path: &Path, format: Option<&str>, glue: bool, pretokenized: bool) -> Result<Dataset> {
    let format: Format = match format {
        Some(f) => f.parse()?,
        None => path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("jsonl")
            .parse()?,
    };
    let fields = if glue { FieldMap::glue_style() } else { FieldMap::default() };
    let mode = if pretokenized { TokenizeMode::Pretokenized } else { TokenizeMode::Whitespace };
    let (d, report) = load_dataset(path, format, &fields, mode)?;
    if report.dropped() > 0 {
        info!(
            "{}: dropped {} records without a three-way label ({} missing, {} unmappable)",
            path.display(),
            report.dropped(),
            report.missing_label,
            report.unmappable_label
        );
    }
    Ok(d)
}

fn load_args(a: &DatasetArgs) -> Result<Dataset> {
    load(&a.input, a.input_format.as_deref(), a.glue_fields, a.pretokenized)
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn permute(a: PermuteArgs, cfg: &FileConfig) -> Result<ExitCode> {
    let data = load_args(&a.data)?;
    let (spec, min_tokens) = match &a.manifest {
        Some(path) => {
            let m: RunManifest = serde_json::from_reader(BufReader::new(
                File::open(path).with_context(|| format!("opening {}", path.display()))?,
            ))?;
            if !m.matches(&data) {
                bail!("{} does not match the dataset recorded in {}", a.data.input.display(), path.display());
            }
            (m.spec(), m.min_tokens)
        }
        None => {
            let mode: Mode = if a.hypothesis_only {
                Mode::HypothesisOnly
            } else {
                a.mode.as_deref().or(cfg.mode.as_deref()).unwrap_or("both").parse()?
            };
            let spec = PermutationSpec {
                q: a.q.or(cfg.q).unwrap_or(DEFAULT_Q),
                master_seed: a.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
                mode,
                clump_fraction: a.clump.or(cfg.clump).unwrap_or(0.0),
            };
            (spec, a.min_tokens.or(cfg.min_tokens).unwrap_or(DEFAULT_MIN_TOKENS))
        }
    };

    let (records, drops) = permute_dataset(&data, &spec, min_tokens)?;
    for (uid, reason) in &drops.dropped {
        debug!("dropped {uid}: {reason:?}");
    }
    info!(
        "{} of {} examples retained (too short: {} premise, {} hypothesis; too few derangements: {} premise, {} hypothesis)",
        drops.retained,
        drops.input,
        drops.premise_too_short,
        drops.hypothesis_too_short,
        drops.premise_capacity,
        drops.hypothesis_capacity
    );
    let mut bytes = Vec::new();
    write_records(&mut bytes, &records)?;
    fs::write(&a.out, &bytes).with_context(|| format!("writing {}", a.out.display()))?;

    let mut manifest = RunManifest::new(&spec, min_tokens, &data, drops.retained);
    manifest.output_sha256 = Some(sha256_hex(&bytes));
    write_json(&manifest_path(&a.out), &manifest)?;
    info!("wrote {} records to {}", records.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn permute_training_set(a: PermuteTrainArgs, cfg: &FileConfig) -> Result<ExitCode> {
    if a.q != 1 {
        bail!("training sets take exactly one permutation per pair (got --q {})", a.q);
    }
    let data = load_args(&a.data)?;
    let permuted = permute_train(&data, a.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED))?;
    fs::write(&a.out, permuted.to_jsonl()).with_context(|| format!("writing {}", a.out.display()))?;
    info!("wrote {} permuted training pairs to {}", permuted.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn read_records_file(path: &Path) -> Result<Vec<PermutedRecord>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_records(BufReader::new(f))?)
}

fn read_predictions_file(path: &Path) -> Result<Vec<Prediction>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_predictions(BufReader::new(f))?)
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictionMeta {
    model_id: String,
    records_sha256: String,
}

fn build_model(a: &EvaluateArgs, cfg: &FileConfig) -> Result<ModelHandle> {
    let spec = a.model.as_str();
    Ok(match spec {
        "a" => make_model_a(),
        "b" => make_model_b(a.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED)),
        "bow" => {
            let Some(train) = &a.train else {
                bail!("--model bow needs --train");
            };
            let d = load(train, a.train_format.as_deref(), a.glue_fields, false)?;
            train_bow(&d, 1.0)?
        }
        _ => {
            if let Some(path) = spec.strip_prefix("file:") {
                ModelHandle::FileExchange(ExchangeModel::open(path)?)
            } else if spec.starts_with("http") {
                let url = spec.strip_prefix("http:").filter(|u| u.starts_with("http")).unwrap_or(spec);
                let mut http = HttpConfig::default();
                if let Some(b) = a.batch_size.or(cfg.batch_size) {
                    http.batch_size = b;
                }
                if let Some(t) = a.timeout.or(cfg.timeout) {
                    http.timeout_secs = t;
                }
                if let Some(r) = a.retries.or(cfg.retries) {
                    http.retries = r;
                }
                ModelHandle::Http(HttpModel::connect(url, http)?)
            } else {
                bail!("unknown model {spec:?} (expected a, b, bow, file:PATH or http:URL)");
            }
        }
    })
}

/// Drops a trailing partial line left by an interrupted run and returns the
/// predictions already on disk.
fn checkpoint(path: &Path) -> Result<Vec<Prediction>> {
    let mut bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if keep < bytes.len() {
        warn!("discarding {} bytes of incomplete output", bytes.len() - keep);
        bytes.truncate(keep);
        fs::write(path, &bytes)?;
    }
    Ok(read_predictions(&bytes[..])?)
}

fn evaluate(a: EvaluateArgs, cfg: &FileConfig) -> Result<ExitCode> {
    let records_bytes = fs::read(&a.records).with_context(|| format!("reading {}", a.records.display()))?;
    let records = read_records(&records_bytes[..])?;
    let model = build_model(&a, cfg)?;
    let model_id = model.model_id();

    let done: HashSet<(String, u32)> = if a.resume && a.out.exists() {
        checkpoint(&a.out)?
            .into_iter()
            .map(|p| (p.uid, p.perm_index))
            .collect()
    } else {
        fs::write(&a.out, b"").with_context(|| format!("creating {}", a.out.display()))?;
        HashSet::new()
    };
    let todo: Vec<PairInput> = records
        .iter()
        .filter(|r| !done.contains(&(r.uid.clone(), r.perm_index)))
        .map(PairInput::from)
        .collect();
    if !done.is_empty() {
        info!("resuming: {} predictions on disk, {} to go", done.len(), todo.len());
    }
    write_json(
        &meta_path(&a.out),
        &PredictionMeta {
            model_id: model_id.clone(),
            records_sha256: sha256_hex(&records_bytes),
        },
    )?;

    let batch = a.batch_size.or(cfg.batch_size).unwrap_or(64).max(1);
    let wave = batch * rayon::current_num_threads().max(1) * 4;
    let mut out = OpenOptions::new().append(true).open(&a.out)?;
    let mut written = 0;
    for chunk in todo.chunks(wave) {
        let preds = chunk
            .par_chunks(batch)
            .map(|b| model.predict_batch(b))
            .collect::<permacc::Result<Vec<_>>>()
            .with_context(|| {
                format!(
                    "model failed after {written} new predictions; rerun with --resume to continue"
                )
            })?;
        let preds: Vec<Prediction> = preds.into_iter().flatten().collect();
        let mut buf = Vec::new();
        write_predictions(&mut buf, &preds)?;
        out.write_all(&buf)?;
        out.flush()?;
        written += preds.len();
    }
    info!("{model_id}: wrote {written} predictions to {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn thresholds(spec: Option<&str>) -> Result<MetricsConfig> {
    let Some(spec) = spec else {
        return Ok(MetricsConfig::grid(DEFAULT_THRESHOLD_POINTS));
    };
    if !spec.contains(',') {
        if let Ok(n) = spec.trim().parse::<u128>() {
            if n == 0 {
                bail!("threshold grid needs at least one point");
            }
            return Ok(MetricsConfig::grid(n));
        }
    }
    let mut out = Vec::new();
    for part in spec.split(',') {
        let x: Fraction = part.trim().parse()?;
        if x.is_zero() || x > Fraction::one() {
            bail!("threshold {} is outside (0, 1]", part.trim());
        }
        out.push(x);
    }
    Ok(MetricsConfig { thresholds: out })
}

fn edges(spec: Option<&str>) -> Result<Option<Vec<f64>>> {
    spec.map(|s| {
        s.split(',')
            .map(|e| e.trim().parse::<f64>().with_context(|| format!("bad bucket edge {e:?}")))
            .collect()
    })
    .transpose()
}

fn joined(j: &JoinArgs) -> Result<(Vec<PermutedRecord>, Vec<Prediction>)> {
    Ok((read_records_file(&j.records)?, read_predictions_file(&j.predictions)?))
}

fn model_id_for(predictions: &Path) -> String {
    fs::read(meta_path(predictions))
        .ok()
        .and_then(|b| serde_json::from_slice::<PredictionMeta>(&b).ok())
        .map(|m| m.model_id)
        .unwrap_or_else(|| format!("file:{}", predictions.display()))
}

fn metrics_report(j: &JoinArgs, cfg: &MetricsConfig) -> Result<MetricsReport> {
    let (records, preds) = joined(j)?;
    let outcomes = build_outcomes(&records, &preds)?;
    let name = j
        .records
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(compute_report(&name, &model_id_for(&j.predictions), &outcomes, cfg)?)
}

fn report(a: ReportArgs, cfg: &FileConfig) -> Result<ExitCode> {
    let spec = a.thresholds.as_deref().or(cfg.thresholds.as_deref());
    let mcfg = thresholds(spec)?;
    let (records, preds) = joined(&a.join)?;
    let outcomes = build_outcomes(&records, &preds)?;
    let name = a
        .join
        .records
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let model_id = model_id_for(&a.join.predictions);
    let r = compute_report(&name, &model_id, &outcomes, &mcfg)?;

    fs::create_dir_all(&a.out_dir)?;
    write_json(&a.out_dir.join("report.json"), &r)?;
    fs::write(a.out_dir.join("metrics.csv"), r.metrics_csv())?;
    fs::write(a.out_dir.join("per_example.csv"), per_example_csv(&outcomes))?;
    fs::write(a.out_dir.join("sweep.csv"), r.sweep_csv())?;

    if let Some(path) = &a.manifest {
        let mut m: RunManifest = serde_json::from_slice(&fs::read(path)?)?;
        m.model_id = Some(model_id);
        m.thresholds = Some(mcfg.thresholds.iter().map(ToString::to_string).collect());
        write_json(path, &m)?;
    }

    info!(
        "{} examples: accuracy {:.4}, omega_max {:.4}, omega_rand {:.4}, P^c {}, P^f {}, {} flips",
        r.examples,
        r.accuracy.to_f64(),
        r.omega_max.to_f64(),
        r.omega_rand.to_f64(),
        r.p_c.map_or("n/a".into(), |f| format!("{:.4}", f.to_f64())),
        r.p_f.map_or("n/a".into(), |f| format!("{:.4}", f.to_f64())),
        r.flips.count
    );
    let bad = r.check_invariants();
    if !bad.is_empty() {
        for b in &bad {
            log::error!("invariant violated: {b}");
        }
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(a: SweepArgs, cfg: &FileConfig) -> Result<ExitCode> {
    let mcfg = thresholds(a.thresholds.as_deref().or(cfg.thresholds.as_deref()))?;
    let r = metrics_report(&a.join, &mcfg)?;
    let text = match a.format {
        OutputFormat::Csv => r.sweep_csv(),
        OutputFormat::Json => serde_json::to_string_pretty(&r.omega_curve)? + "\n",
    };
    emit(a.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn analyze_bleu(a: BleuArgs, cfg: &FileConfig) -> Result<ExitCode> {
    let mut bcfg = BleuConfig::order(a.bleu_order.or(cfg.bleu_order).unwrap_or(DEFAULT_BLEU_ORDER));
    if let Some(e) = edges(a.buckets.as_deref().or(cfg.buckets.as_deref()))? {
        bcfg.bucket_edges = e;
    }
    let (records, preds) = joined(&a.join)?;
    let curve = bleu_acceptance_curve(&records, &preds, &bcfg)?;
    let text = match a.format {
        OutputFormat::Csv => curve_csv(&curve),
        OutputFormat::Json => serde_json::to_string_pretty(&curve)? + "\n",
    };
    emit(a.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn analyze_pos(a: PosArgs, cfg: &FileConfig) -> Result<ExitCode> {
    let radius = a.radius.or(cfg.radius).unwrap_or(DEFAULT_RADIUS);
    let k = a.topk.or(cfg.topk).unwrap_or(DEFAULT_TOPK);
    let read_tags = |p: &Path| -> Result<Vec<analysis::TaggedRecord>> {
        let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
        Ok(read_tagged(BufReader::new(f))?)
    };
    let table = match (&a.table, &a.train, &a.train_tags) {
        (Some(path), _, _) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let t = PosSignatureTable::read(BufReader::new(f))?;
            if a.radius.is_some() && t.radius() != radius {
                bail!("table was built with radius {}, not {radius}", t.radius());
            }
            t
        }
        (None, Some(train), Some(tags)) => {
            let d = load(train, a.train_format.as_deref(), a.glue_fields, false)?;
            let sentences = tagged_sentences(&d, &read_tags(tags)?)?;
            build_signature_table(&sentences, radius)?
        }
        _ => bail!("analyze-pos needs --table or --train with --train-tags"),
    };
    if let Some(path) = &a.save_table {
        table.write(File::create(path).with_context(|| format!("creating {}", path.display()))?)?;
    }
    let buckets = match edges(a.buckets.as_deref().or(cfg.buckets.as_deref()))? {
        Some(e) => Buckets::open_ended(e)?,
        None => Buckets::open_ended(vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5])?,
    };
    let (records, preds) = joined(&a.join)?;
    let tags = read_tags(&a.tags)?;
    let curve = signature_ratio_curve(&records, &preds, &tags, &table, k, &buckets)?;
    info!(
        "{} pairs scored, {} excluded (original overlap 0), {} with ratio above 1",
        curve.pairs, curve.excluded, curve.above_one
    );
    let text = match a.format {
        OutputFormat::Csv => curve_csv(&curve.points),
        OutputFormat::Json => serde_json::to_string_pretty(&curve)? + "\n",
    };
    emit(a.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn analyze_length(a: LengthArgs, cfg: &FileConfig) -> Result<ExitCode> {
    let buckets = match edges(a.buckets.as_deref().or(cfg.buckets.as_deref()))? {
        Some(e) => Buckets::open_ended(e)?,
        None => Buckets::open_ended(vec![0.0, 5.0, 10.0, 15.0, 20.0, 30.0])?,
    };
    let (records, preds) = joined(&a.join)?;
    let outcomes = build_outcomes(&records, &preds)?;
    let curves = length_acceptance(&outcomes, &example_lengths(&records), &buckets)?;
    let text = match a.format {
        OutputFormat::Csv => length_csv(&curves),
        OutputFormat::Json => serde_json::to_string_pretty(&curves)? + "\n",
    };
    emit(a.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}
