//! On-disk artifacts: atomic writes, GAN checkpoints, window and score tables.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use xirpgan_core::eval::ScoreRecord;
use xirpgan_core::nn::io::{load_params, save_params};
use xirpgan_core::wgan::{GanConfig, GanModel, HistoryRow};
use xirpgan_core::xirp::{PartitionScale, XirpScaler};

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let name = path.file_name().ok_or_else(|| anyhow!("no file name in {}", path.display()))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// File-system-safe rendering of a dataset id.
pub fn safe_name(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' }).collect()
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut s = String::from("step,critic_loss,gen_loss,penalty,score_gap\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{},{}\n", r.step, r.critic_loss, r.generator_loss, r.penalty, r.score_gap));
    }
    s
}

fn gan_entries(c: &GanConfig, size: usize, sc: &XirpScaler) -> Vec<(&'static str, String)> {
    let list = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
    vec![
        ("image_size", size.to_string()),
        ("latent_dim", c.latent_dim.to_string()),
        ("lambda", c.lambda.to_string()),
        ("critic_steps", c.critic_steps_per_gen.to_string()),
        ("batch_size", c.batch_size.to_string()),
        ("generator_steps", c.generator_steps.to_string()),
        ("generator_lr", c.generator_lr.to_string()),
        ("critic_lr", c.critic_lr.to_string()),
        ("beta1", c.beta1.to_string()),
        ("beta2", c.beta2.to_string()),
        ("generator_hidden", list(&c.generator_hidden)),
        ("critic_hidden", list(&c.critic_hidden)),
        ("seed", c.seed.to_string()),
        ("scaler.diag_min", sc.diag.min.to_string()),
        ("scaler.diag_max", sc.diag.max.to_string()),
        ("scaler.offdiag_min", sc.offdiag.min.to_string()),
        ("scaler.offdiag_max", sc.offdiag.max.to_string()),
    ]
}

/// `gan.cfg`, `generator.xgnn`, `critic.xgnn` and `history.csv` under `dir`.
pub fn save_checkpoint(dir: &Path, model: &GanModel) -> Result<()> {
    let cfg: String = gan_entries(&model.config, model.image_size, &model.scaler).into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    write_atomic(&dir.join("gan.cfg"), cfg.as_bytes())?;
    let mut g = Vec::new();
    save_params(&mut g, model.generator.spec(), &model.generator_params)?;
    write_atomic(&dir.join("generator.xgnn"), &g)?;
    let mut c = Vec::new();
    save_params(&mut c, model.critic.spec(), &model.critic_params)?;
    write_atomic(&dir.join("critic.xgnn"), &c)?;
    write_atomic(&dir.join("history.csv"), history_csv(&model.history).as_bytes())?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<GanModel> {
    let text = fs::read_to_string(dir.join("gan.cfg")).with_context(|| format!("reading checkpoint in {}", dir.display()))?;
    let kv: BTreeMap<&str, &str> = text.lines().filter_map(|l| l.split_once('=')).map(|(k, v)| (k.trim(), v.trim())).collect();
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| anyhow!("checkpoint lacks `{k}`"));
    let num = |k: &str| -> Result<f64> { Ok(get(k)?.parse()?) };
    let int = |k: &str| -> Result<usize> { Ok(get(k)?.parse()?) };
    let list = |k: &str| -> Result<Vec<usize>> { get(k)?.split(',').map(|s| s.trim().parse().map_err(Into::into)).collect() };
    let config = GanConfig {
        latent_dim: int("latent_dim")?,
        lambda: num("lambda")?,
        critic_steps_per_gen: int("critic_steps")?,
        batch_size: int("batch_size")?,
        generator_steps: int("generator_steps")?,
        generator_lr: num("generator_lr")?,
        critic_lr: num("critic_lr")?,
        beta1: num("beta1")?,
        beta2: num("beta2")?,
        generator_hidden: list("generator_hidden")?,
        critic_hidden: list("critic_hidden")?,
        seed: get("seed")?.parse()?,
    };
    let scaler = XirpScaler {
        diag: PartitionScale { min: num("scaler.diag_min")?, max: num("scaler.diag_max")? },
        offdiag: PartitionScale { min: num("scaler.offdiag_min")?, max: num("scaler.offdiag_max")? },
    };
    let mut model = GanModel::init(config, int("image_size")?, scaler)?;
    model.generator_params = load_params(fs::File::open(dir.join("generator.xgnn"))?, model.generator.spec())?;
    model.critic_params = load_params(fs::File::open(dir.join("critic.xgnn"))?, model.critic.spec())?;
    Ok(model)
}

/// One window per line, comma-separated.
pub fn windows_csv(windows: &[Vec<f64>]) -> String {
    windows.iter().map(|w| w.iter().map(ToString::to_string).collect::<Vec<_>>().join(",") + "\n").collect()
}

pub fn read_windows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| l.split(',').map(|c| c.trim().parse::<f64>().with_context(|| format!("{} line {}", path.display(), i + 1))).collect())
        .collect()
}

/// Parses a score table written by `score_records_csv`.
pub fn read_scores(path: &Path) -> Result<(Vec<ScoreRecord>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let fixed = ["dataset_id", "s_p", "s_d", "s_a", "alpha_star"];
    if headers.len() < fixed.len() || headers.iter().zip(fixed).any(|(h, f)| h != f) {
        bail!("{} is not a score table", path.display());
    }
    let grid: Vec<f64> = headers
        .iter()
        .skip(fixed.len())
        .map(|h| h.strip_prefix("rmse_a").and_then(|a| a.parse().ok()).ok_or_else(|| anyhow!("bad column `{h}`")))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> { Ok(rec.get(i).unwrap_or("").parse()?) };
        let rmse_curve = grid.iter().enumerate().filter_map(|(k, a)| rec.get(fixed.len() + k).filter(|s| !s.is_empty()).map(|s| s.parse().map(|v| (*a, v)))).collect::<Result<Vec<_>, _>>()?;
        out.push(ScoreRecord { dataset_id: rec.get(0).unwrap_or("").to_string(), s_p: f(1)?, s_d: f(2)?, s_a: f(3)?, alpha_star: f(4)?, rmse_curve });
    }
    Ok((out, grid))
}

/// Per-dataset artifact directory.
pub fn dataset_dir(out: &Path, id: &str) -> PathBuf {
    out.join("datasets").join(safe_name(id))
}
