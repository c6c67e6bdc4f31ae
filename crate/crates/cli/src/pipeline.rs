//! Stage functions and the end-to-end campaign driver.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use xirpgan_core::augment::{encode_training_set, synthesize, Synthesized};
use xirpgan_core::eval::{
    augmentation_sweep, correlations_csv, discriminative_score, embedding_mixing, predictive_score, score_correlations, score_records_csv, EvalConfig, MixingReport, ScoreRecord,
};
use xirpgan_core::seed::derive_seed;
use xirpgan_core::series::{scale_positive, windows, Frequency, TimeSeries};
use xirpgan_core::shapley::{attribution_report, build_features, fit_surrogate, AttributionReport, FeatureVector, SurrogateConfig, BASE_FEATURES, SCORE_FEATURES};
use xirpgan_core::wgan::{train_wgan, GanModel};
use xirpgan_core::xirp::write_xirp;

use crate::artifacts::{dataset_dir, save_checkpoint, windows_csv, write_atomic};
use crate::config::RunConfig;
use crate::ingest::{ingest_m4_csv, Skipped};
use crate::plots::emit_plots;

pub const TARGETS: [&str; 4] = ["s_p", "s_d", "s_a", "alpha_star"];

/// Stable per-dataset, per-stage seed.
pub fn dataset_seed(master: u64, id: &str, stage: &str) -> u64 {
    derive_seed(master, &[id, stage])
}

/// Frequency named in the file name (`Daily-train.csv`), else `fallback`.
pub fn frequency_for(path: &Path, fallback: Frequency) -> Frequency {
    let name = path.file_name().map(|n| n.to_string_lossy().to_ascii_lowercase()).unwrap_or_default();
    Frequency::ALL.into_iter().find(|f| *f != Frequency::Other && name.contains(f.as_str())).unwrap_or(fallback)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inputs {
    pub series: Vec<TimeSeries>,
    pub sources: Vec<PathBuf>,
    pub skipped: Vec<Skipped>,
}

/// Ingests every configured input and keeps the selected ids in input order.
pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let mut out = Inputs { series: Vec::new(), sources: Vec::new(), skipped: Vec::new() };
    for path in &cfg.inputs {
        let freq = frequency_for(path, cfg.frequency);
        let got = ingest_m4_csv(path, freq, cfg.truncation.length(freq), cfg.effective_min_length()).with_context(|| format!("ingesting {}", path.display()))?;
        for s in got.series {
            if out.series.iter().any(|t| t.id() == s.id()) {
                bail!("duplicate dataset id `{}` in {}", s.id(), path.display());
            }
            out.series.push(s);
            out.sources.push(path.clone());
        }
        out.skipped.extend(got.skipped);
    }
    if !cfg.select.is_empty() {
        let missing: Vec<&String> = cfg.select.iter().filter(|id| !out.series.iter().any(|s| s.id() == id.as_str())).collect();
        if !missing.is_empty() {
            log::warn!("selected ids not found in the inputs: {missing:?}");
        }
        let keep: Vec<bool> = out.series.iter().map(|s| cfg.select.iter().any(|id| id == s.id())).collect();
        let mut k = keep.iter();
        out.series.retain(|_| *k.next().expect("same length"));
        let mut k = keep.iter();
        out.sources.retain(|_| *k.next().expect("same length"));
    }
    Ok(out)
}

/// Positively scaled series cut into overlapping windows.
pub fn real_windows(ts: &TimeSeries, cfg: &RunConfig) -> Result<Vec<Vec<f64>>> {
    let scaled = scale_positive(ts, cfg.scale_lo, cfg.scale_hi)?;
    Ok(windows(scaled.values(), cfg.window, cfg.stride)?)
}

pub fn train_stage(id: &str, real: &[Vec<f64>], cfg: &RunConfig) -> Result<GanModel> {
    let (images, _) = encode_training_set(real)?;
    let mut gan = cfg.gan.clone();
    gan.seed = dataset_seed(cfg.seed, id, "gan");
    Ok(train_wgan(&images, gan)?)
}

pub fn synthetic_count(n_real: usize, cfg: &RunConfig) -> usize {
    (cfg.synthetic_multiplier * n_real as f64).ceil() as usize
}

pub fn sample_stage(id: &str, model: &GanModel, n: usize, cfg: &RunConfig) -> Result<Synthesized> {
    Ok(synthesize(model, n, cfg.decode, dataset_seed(cfg.seed, id, "sample"))?)
}

pub fn eval_config(id: &str, cfg: &RunConfig) -> EvalConfig {
    EvalConfig { seed: dataset_seed(cfg.seed, id, "eval"), window: cfg.window, ..cfg.eval.clone() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub record: ScoreRecord,
    pub mixing: MixingReport,
}

pub fn evaluate_stage(id: &str, real: &[Vec<f64>], synthetic: &[Vec<f64>], cfg: &RunConfig) -> Result<Evaluation> {
    let ec = eval_config(id, cfg);
    let mixing = embedding_mixing(real, synthetic, &ec)?;
    let s_p = predictive_score(real, synthetic, &ec)?.mean;
    let s_d = discriminative_score(real, synthetic, &ec)?.mean;
    let sweep = augmentation_sweep(real, synthetic, &ec)?;
    let record = ScoreRecord { dataset_id: id.to_string(), s_p, s_d, s_a: sweep.s_a, alpha_star: sweep.alpha_star, rmse_curve: sweep.curve.points };
    Ok(Evaluation { record, mixing })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetReport {
    pub id: String,
    pub frequency: Frequency,
    pub length: usize,
    pub windows: usize,
    pub synthetic: usize,
    pub clamped: usize,
    pub evaluation: Evaluation,
}

/// Runs every per-dataset stage and writes its artifacts.
pub fn run_dataset(ts: &TimeSeries, cfg: &RunConfig) -> Result<DatasetReport> {
    let id = ts.id();
    let dir = dataset_dir(&cfg.output, id);
    let real = real_windows(ts, cfg)?;
    let model = train_stage(id, &real, cfg)?;
    save_checkpoint(&dir.join("model"), &model)?;
    let synth = sample_stage(id, &model, synthetic_count(real.len(), cfg), cfg)?;
    write_atomic(&dir.join("synthetic.csv"), windows_csv(&synth.windows).as_bytes())?;
    let samples = xirpgan_core::wgan::sample_xirps(&model, cfg.xirp_exports, dataset_seed(cfg.seed, id, "sample"))?;
    for (k, s) in samples.iter().enumerate() {
        let mut buf = Vec::new();
        write_xirp(&mut buf, &xirpgan_core::xirp::unscale_xirp(s).0, true)?;
        write_atomic(&dir.join("samples").join(format!("sample_{k:03}.xirp")), &buf)?;
    }
    let evaluation = evaluate_stage(id, &real, &synth.windows, cfg)?;
    write_atomic(&dir.join("mixing.csv"), evaluation.mixing.to_csv().as_bytes())?;
    Ok(DatasetReport {
        id: id.to_string(),
        frequency: ts.frequency(),
        length: ts.len(),
        windows: real.len(),
        synthetic: synth.windows.len(),
        clamped: synth.clamped,
        evaluation,
    })
}

/// Applies `f` to every item on up to `jobs` threads; results keep input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("result slot").expect("every item processed")).collect()
}

pub fn target_value(record: &ScoreRecord, target: &str) -> f64 {
    match target {
        "s_p" => record.s_p,
        "s_d" => record.s_d,
        "s_a" => record.s_a,
        "alpha_star" => record.alpha_star,
        other => panic!("unknown target {other}"),
    }
}

fn uses_scores(cfg: &RunConfig, target: &str) -> bool {
    let f = &cfg.feature_sets;
    match target {
        "s_p" => f.s_p,
        "s_d" => f.s_d,
        "s_a" => f.s_a,
        _ => f.alpha_star,
    }
}

pub fn feature_names(with_scores: bool) -> Vec<&'static str> {
    let mut v = BASE_FEATURES.to_vec();
    if with_scores {
        v.extend(SCORE_FEATURES);
    }
    v
}

/// Statistic table over the datasets, with degenerate ones listed separately.
pub fn feature_table(series: &[&TimeSeries], records: &[&ScoreRecord], cfg: &RunConfig) -> (Vec<FeatureVector>, Vec<(String, String)>) {
    let lags = (cfg.lags > 0).then_some(cfg.lags);
    let mut ok = Vec::new();
    let mut excluded = Vec::new();
    for (ts, r) in series.iter().zip(records) {
        match build_features(ts, Some((r.s_p, r.s_d)), lags) {
            Ok(f) => ok.push(f),
            Err(e) => {
                log::warn!("excluding {} from attribution: {e}", ts.id());
                excluded.push((ts.id().to_string(), e.to_string()));
            }
        }
    }
    (ok, excluded)
}

pub fn features_csv(rows: &[FeatureVector]) -> String {
    let mut s = format!("dataset_id,{},lags\n", feature_names(true).join(","));
    for f in rows {
        let vals: Vec<String> = f.values.iter().map(ToString::to_string).collect();
        s.push_str(&format!("{},{},{}\n", xirpgan_core::eval::csv_field(&f.dataset_id), vals.join(","), f.lags));
    }
    s
}

/// Fits one surrogate per target and attributes every dataset.
pub fn attribution_stage(features: &[FeatureVector], records: &[&ScoreRecord], cfg: &RunConfig) -> Result<Vec<AttributionReport>> {
    let by_id: BTreeMap<&str, &ScoreRecord> = records.iter().map(|r| (r.dataset_id.as_str(), *r)).collect();
    let ids: Vec<String> = features.iter().map(|f| f.dataset_id.clone()).collect();
    TARGETS
        .iter()
        .map(|&target| {
            let with = uses_scores(cfg, target);
            let m = feature_names(with).len();
            let rows: Vec<Vec<f64>> = features.iter().map(|f| f.values[..m].to_vec()).collect();
            let y: Vec<f64> = ids.iter().map(|id| target_value(by_id[id.as_str()], target)).collect();
            let sc = SurrogateConfig { seed: derive_seed(cfg.seed, &["shapley", target]), ..cfg.surrogate.clone() };
            let model = fit_surrogate(&rows, &y, &sc).with_context(|| format!("fitting the {target} surrogate"))?;
            Ok(attribution_report(target, &model, &feature_names(with), &ids, &rows)?)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Done(Box<DatasetReport>),
    Quarantined(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub datasets: Vec<(String, Frequency, Outcome)>,
    pub records: Vec<ScoreRecord>,
    pub attributions: Vec<AttributionReport>,
    pub notes: Vec<String>,
}

impl PipelineSummary {
    pub fn succeeded(&self) -> usize {
        self.datasets.iter().filter(|d| matches!(d.2, Outcome::Done(_))).count()
    }

    /// True when datasets were given and every one of them failed.
    pub fn all_failed(&self) -> bool {
        !self.datasets.is_empty() && self.succeeded() == 0
    }
}

fn datasets_csv(summary: &PipelineSummary, inputs: &Inputs) -> String {
    let mut s = String::from("dataset_id,frequency,source,length,windows,synthetic,clamped,knn_mixing,status,reason\n");
    for ((id, freq, outcome), src) in summary.datasets.iter().zip(&inputs.sources) {
        let id_f = xirpgan_core::eval::csv_field(id);
        let src = xirpgan_core::eval::csv_field(&src.display().to_string());
        match outcome {
            Outcome::Done(r) => s.push_str(&format!("{id_f},{freq},{src},{},{},{},{},{},ok,\n", r.length, r.windows, r.synthetic, r.clamped, r.evaluation.mixing.knn_mixing)),
            Outcome::Quarantined(why) => s.push_str(&format!("{id_f},{freq},{src},,,,,,quarantined,{}\n", xirpgan_core::eval::csv_field(why))),
        }
    }
    s
}

fn manifest(summary: &PipelineSummary, inputs: &Inputs, cfg: &RunConfig) -> String {
    let mut s = format!("# xirpgan {} run manifest; loadable with --config\n", env!("CARGO_PKG_VERSION"));
    s.push_str(&cfg.to_text());
    s.push_str("# per-dataset stage seeds (derived from run.seed, dataset id and stage)\n");
    for (id, freq, outcome) in &summary.datasets {
        let status = match outcome {
            Outcome::Done(_) => "ok".to_string(),
            Outcome::Quarantined(why) => format!("quarantined: {why}"),
        };
        s.push_str(&format!(
            "# dataset {id} frequency={freq} seed.gan={} seed.sample={} seed.eval={} status={status}\n",
            dataset_seed(cfg.seed, id, "gan"),
            dataset_seed(cfg.seed, id, "sample"),
            dataset_seed(cfg.seed, id, "eval"),
        ));
    }
    for k in &inputs.skipped {
        s.push_str(&format!("# skipped {} length={} (shorter than {})\n", k.id, k.length, cfg.effective_min_length()));
    }
    for n in &summary.notes {
        s.push_str(&format!("# note {n}\n"));
    }
    s
}

/// Runs every stage for every selected dataset and writes the artifact tree
/// under `cfg.output`. Per-dataset failures are quarantined.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineSummary> {
    let started = Instant::now();
    let inputs = load_inputs(cfg)?;
    let out = &cfg.output;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    if inputs.series.is_empty() {
        log::warn!("no datasets to process");
    }
    let timings: Mutex<Vec<(String, f64)>> = Mutex::new(Vec::new());
    let outcomes = parallel_map(&inputs.series, cfg.jobs, |ts| {
        let t = Instant::now();
        log::info!("dataset {}: {} values", ts.id(), ts.len());
        let r = run_dataset(ts, cfg);
        timings.lock().expect("timings").push((ts.id().to_string(), t.elapsed().as_secs_f64()));
        match r {
            Ok(rep) => Outcome::Done(Box::new(rep)),
            Err(e) => {
                log::warn!("quarantining {}: {e:#}", ts.id());
                Outcome::Quarantined(format!("{e:#}"))
            }
        }
    });
    let mut summary = PipelineSummary { datasets: Vec::new(), records: Vec::new(), attributions: Vec::new(), notes: Vec::new() };
    let mut done_series = Vec::new();
    for (ts, o) in inputs.series.iter().zip(outcomes) {
        if let Outcome::Done(r) = &o {
            summary.records.push(r.evaluation.record.clone());
            done_series.push(ts);
        }
        summary.datasets.push((ts.id().to_string(), ts.frequency(), o));
    }
    write_atomic(&out.join("scores.csv"), score_records_csv(&summary.records, &cfg.eval.alpha_grid).as_bytes())?;
    write_atomic(&out.join("datasets.csv"), datasets_csv(&summary, &inputs).as_bytes())?;
    match score_correlations(&summary.records) {
        Ok(m) => write_atomic(&out.join("correlations.csv"), correlations_csv(&m).as_bytes())?,
        Err(e) => summary.notes.push(format!("correlations skipped: {e}")),
    }
    let recs: Vec<&ScoreRecord> = summary.records.iter().collect();
    let (features, excluded) = feature_table(&done_series, &recs, cfg);
    for (id, why) in excluded {
        summary.notes.push(format!("{id} excluded from attribution: {why}"));
    }
    write_atomic(&out.join("features.csv"), features_csv(&features).as_bytes())?;
    match attribution_stage(&features, &recs, cfg) {
        Ok(reports) => {
            for r in &reports {
                write_atomic(&out.join("attribution").join(format!("{}.csv", r.target)), r.to_csv().as_bytes())?;
                write_atomic(&out.join("attribution").join(format!("{}_summary.csv", r.target)), r.summary_csv().as_bytes())?;
            }
            summary.attributions = reports;
        }
        Err(e) => summary.notes.push(format!("attribution skipped: {e:#}")),
    }
    if summary.records.is_empty() {
        summary.notes.push("plots skipped: no score records".into());
    } else {
        let freq: BTreeMap<String, Frequency> = summary.datasets.iter().map(|(id, f, _)| (id.clone(), *f)).collect();
        emit_plots(&summary.records, &freq, &summary.attributions, &out.join("plots"))?;
    }
    write_atomic(&out.join("manifest.txt"), manifest(&summary, &inputs, cfg).as_bytes())?;
    let mut t = timings.into_inner().expect("timings");
    t.sort_by(|a, b| a.0.cmp(&b.0));
    let mut timing = format!("total_seconds = {:.3}\n", started.elapsed().as_secs_f64());
    for (id, secs) in t {
        timing.push_str(&format!("dataset.{id}.seconds = {secs:.3}\n"));
    }
    write_atomic(&out.join("timing.txt"), timing.as_bytes())?;
    Ok(summary)
}

/// Errors out when `path` is missing, naming the stage that produces it.
pub fn require(path: &Path, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(anyhow!("{} not found; run `{producer}` first", path.display()))
    }
}
