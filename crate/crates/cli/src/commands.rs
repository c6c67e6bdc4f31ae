//! Subcommand implementations; each stage reads what the previous one wrote
//! under the output directory.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use xirpgan_core::eval::{correlations_csv, score_correlations, score_records_csv, ScoreRecord};
use xirpgan_core::series::Frequency;
use xirpgan_core::xirp::{encode_xirp, write_xirp};

use crate::artifacts::{dataset_dir, load_checkpoint, read_scores, read_windows, save_checkpoint, windows_csv, write_atomic};
use crate::config::{parse_alpha_grid, RunConfig};
use crate::ingest::write_m4;
use crate::pipeline::{attribution_stage, evaluate_stage, feature_table, features_csv, load_inputs, real_windows, require, run_pipeline, sample_stage, synthetic_count, train_stage, Inputs};
use crate::plots::{beeswarm, emit_plots};
use crate::smoke::smoke_files;

#[derive(Debug, Parser)]
#[command(name = "xirpgan", version, about = "Time-series augmentation with XIRP images and a WGAN-GP")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat `section.key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Frequency of inputs whose file name does not name one.
    #[arg(long, global = true)]
    pub frequency: Option<Frequency>,
    /// Comma-separated synthetic fractions, e.g. `0,0.1,0.2`.
    #[arg(long, global = true)]
    pub alpha_grid: Option<String>,
    /// Datasets processed in parallel.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Comma-separated dataset ids to process.
    #[arg(long, global = true)]
    pub select: Option<String>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// M4-style CSV files; defaults to `run.inputs`.
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and truncate inputs; writes one normalized CSV per frequency.
    Ingest(InputArgs),
    /// Write the first windows of each dataset as XIRP files.
    Encode {
        #[command(flatten)]
        input: InputArgs,
        /// Windows exported per dataset.
        #[arg(long, default_value_t = 8)]
        limit: usize,
    },
    /// Train one WGAN-GP per dataset and save checkpoints.
    Train(InputArgs),
    /// Generate synthetic windows from saved checkpoints.
    Sample(InputArgs),
    /// Score synthetic windows against the real ones.
    Evaluate(InputArgs),
    /// Fit surrogates on dataset statistics and attribute the scores.
    Shapley(InputArgs),
    /// Correlations and histograms from the score table.
    Report(InputArgs),
    /// Every stage end to end.
    Pipeline(InputArgs),
    /// Write the bundled synthetic corpus to the output directory.
    SmokeData,
}

/// Defaults, then the config file, then `XIRPGAN_*` variables, then flags.
pub fn resolve_config<I: IntoIterator<Item = (String, String)>>(g: &GlobalArgs, env: I) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &g.config {
        cfg.apply_file(p)?;
    }
    cfg.apply_env(env)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.output = o.clone();
    }
    if let Some(f) = g.frequency {
        cfg.frequency = f;
    }
    if let Some(a) = &g.alpha_grid {
        cfg.eval.alpha_grid = parse_alpha_grid(a)?;
    }
    if let Some(j) = g.jobs {
        cfg.jobs = j;
    }
    if let Some(s) = &g.select {
        cfg.set("run.select", s)?;
    }
    cfg.sync_seeds();
    cfg.eval.validate()?;
    cfg.gan.validate()?;
    Ok(cfg)
}

fn with_inputs(mut cfg: RunConfig, input: &InputArgs) -> RunConfig {
    if !input.inputs.is_empty() {
        cfg.inputs = input.inputs.clone();
    }
    cfg
}

fn inputs(cfg: &RunConfig) -> Result<Inputs> {
    if cfg.inputs.is_empty() {
        bail!("no input files; pass them as arguments or set run.inputs");
    }
    load_inputs(cfg)
}

fn frequencies(inp: &Inputs) -> BTreeMap<String, Frequency> {
    inp.series.iter().map(|s| (s.id().to_string(), s.frequency())).collect()
}

/// Runs `f` per dataset, logging and counting failures; fails only when
/// every dataset failed.
fn per_dataset<T>(inp: &Inputs, mut f: impl FnMut(&xirpgan_core::series::TimeSeries) -> Result<T>) -> Result<Vec<(String, T)>> {
    let mut ok = Vec::new();
    let mut failed = 0;
    for ts in &inp.series {
        match f(ts) {
            Ok(v) => ok.push((ts.id().to_string(), v)),
            Err(e) => {
                failed += 1;
                log::warn!("{}: {e:#}", ts.id());
            }
        }
    }
    if failed > 0 && ok.is_empty() {
        bail!("all {failed} datasets failed");
    }
    Ok(ok)
}

pub fn run(cli: Cli) -> Result<()> {
    let base = resolve_config(&cli.global, std::env::vars())?;
    match &cli.command {
        Command::Ingest(i) => ingest(&with_inputs(base, i)),
        Command::Encode { input, limit } => encode(&with_inputs(base, input), *limit),
        Command::Train(i) => train(&with_inputs(base, i)),
        Command::Sample(i) => sample(&with_inputs(base, i)),
        Command::Evaluate(i) => evaluate(&with_inputs(base, i)),
        Command::Shapley(i) => shapley(&with_inputs(base, i)),
        Command::Report(i) => report(&with_inputs(base, i)),
        Command::Pipeline(i) => {
            let cfg = with_inputs(base, i);
            let summary = run_pipeline(&cfg)?;
            println!("{} of {} datasets scored; outputs in {}", summary.succeeded(), summary.datasets.len(), cfg.output.display());
            for n in &summary.notes {
                println!("note: {n}");
            }
            if summary.all_failed() {
                bail!("every dataset failed; see {}", cfg.output.join("manifest.txt").display());
            }
            Ok(())
        }
        Command::SmokeData => {
            for (name, series) in smoke_files(base.seed) {
                let p = base.output.join(name);
                write_atomic(&p, write_m4(&series).as_bytes())?;
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

pub fn ingest(cfg: &RunConfig) -> Result<()> {
    let inp = inputs(cfg)?;
    for f in Frequency::ALL {
        let group: Vec<_> = inp.series.iter().filter(|s| s.frequency() == f).cloned().collect();
        if !group.is_empty() {
            write_atomic(&cfg.output.join(format!("ingested-{}.csv", f.as_str())), write_m4(&group).as_bytes())?;
        }
    }
    for s in &inp.series {
        println!("{}\t{}\t{}", s.id(), s.frequency(), s.len());
    }
    for k in &inp.skipped {
        println!("{}\tskipped\t{}", k.id, k.length);
    }
    Ok(())
}

pub fn encode(cfg: &RunConfig, limit: usize) -> Result<()> {
    let inp = inputs(cfg)?;
    per_dataset(&inp, |ts| {
        let dir = dataset_dir(&cfg.output, ts.id()).join("xirp");
        for (k, w) in real_windows(ts, cfg)?.iter().take(limit).enumerate() {
            let mut buf = Vec::new();
            write_xirp(&mut buf, &encode_xirp(w)?.0, true)?;
            write_atomic(&dir.join(format!("window_{k:04}.xirp")), &buf)?;
        }
        Ok(())
    })?;
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let inp = inputs(cfg)?;
    per_dataset(&inp, |ts| {
        let model = train_stage(ts.id(), &real_windows(ts, cfg)?, cfg)?;
        save_checkpoint(&dataset_dir(&cfg.output, ts.id()).join("model"), &model)
    })?;
    Ok(())
}

pub fn sample(cfg: &RunConfig) -> Result<()> {
    let inp = inputs(cfg)?;
    per_dataset(&inp, |ts| {
        let dir = dataset_dir(&cfg.output, ts.id());
        require(&dir.join("model").join("gan.cfg"), "train")?;
        let model = load_checkpoint(&dir.join("model"))?;
        let n = synthetic_count(real_windows(ts, cfg)?.len(), cfg);
        let s = sample_stage(ts.id(), &model, n, cfg)?;
        if s.clamped > 0 {
            log::info!("{}: {} diagonal entries raised to the decoding floor", ts.id(), s.clamped);
        }
        write_atomic(&dir.join("synthetic.csv"), windows_csv(&s.windows).as_bytes())
    })?;
    Ok(())
}

fn scores_path(cfg: &RunConfig) -> PathBuf {
    cfg.output.join("scores.csv")
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let inp = inputs(cfg)?;
    let done = per_dataset(&inp, |ts| {
        let dir = dataset_dir(&cfg.output, ts.id());
        require(&dir.join("synthetic.csv"), "sample")?;
        let synth = read_windows(&dir.join("synthetic.csv"))?;
        let ev = evaluate_stage(ts.id(), &real_windows(ts, cfg)?, &synth, cfg)?;
        write_atomic(&dir.join("mixing.csv"), ev.mixing.to_csv().as_bytes())?;
        Ok(ev.record)
    })?;
    let records: Vec<ScoreRecord> = done.into_iter().map(|(_, r)| r).collect();
    write_atomic(&scores_path(cfg), score_records_csv(&records, &cfg.eval.alpha_grid).as_bytes())
}

fn load_scores(cfg: &RunConfig) -> Result<Vec<ScoreRecord>> {
    require(&scores_path(cfg), "evaluate")?;
    Ok(read_scores(&scores_path(cfg))?.0)
}

pub fn shapley(cfg: &RunConfig) -> Result<()> {
    let inp = inputs(cfg)?;
    let records = load_scores(cfg)?;
    let mut series = Vec::new();
    let mut recs = Vec::new();
    for r in &records {
        if let Some(ts) = inp.series.iter().find(|s| s.id() == r.dataset_id) {
            series.push(ts);
            recs.push(r);
        }
    }
    let (features, excluded) = feature_table(&series, &recs, cfg);
    for (id, why) in excluded {
        println!("excluded {id}: {why}");
    }
    write_atomic(&cfg.output.join("features.csv"), features_csv(&features).as_bytes())?;
    for r in attribution_stage(&features, &recs, cfg)? {
        let dir = cfg.output.join("attribution");
        write_atomic(&dir.join(format!("{}.csv", r.target)), r.to_csv().as_bytes())?;
        write_atomic(&dir.join(format!("{}_summary.csv", r.target)), r.summary_csv().as_bytes())?;
        let (svg, csv) = beeswarm(&r);
        write_atomic(&cfg.output.join("plots").join(format!("beeswarm_{}.svg", r.target)), svg.as_bytes())?;
        write_atomic(&cfg.output.join("plots").join(format!("beeswarm_{}.csv", r.target)), csv.as_bytes())?;
        println!("{}: efficiency gap {:.3e}", r.target, r.efficiency_gap());
    }
    Ok(())
}

pub fn report(cfg: &RunConfig) -> Result<()> {
    let records = load_scores(cfg)?;
    if records.is_empty() {
        bail!("{} holds no records", scores_path(cfg).display());
    }
    match score_correlations(&records) {
        Ok(m) => {
            let text = correlations_csv(&m);
            write_atomic(&cfg.output.join("correlations.csv"), text.as_bytes())?;
            print!("{text}");
        }
        Err(e) => println!("correlations skipped: {e}"),
    }
    let freq = if cfg.inputs.is_empty() { BTreeMap::new() } else { frequencies(&inputs(cfg)?) };
    emit_plots(&records, &freq, &[], &cfg.output.join("plots"))?;
    Ok(())
}
