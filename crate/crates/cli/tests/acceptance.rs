//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! with the measured quantities, then asserts.
//!
//! Tests hold a shared lock so the timed checks never compete for the CPU.

use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use xirpgan::config::{smoke_config, RunConfig};
use xirpgan::ingest::write_m4;
use xirpgan::pipeline::{real_windows, run_pipeline};
use xirpgan::smoke::{smoke_files, smoke_series};
use xirpgan_core::augment::{encode_training_set, synthesize};
use xirpgan_core::eval::{augmentation_curve, discriminative_score, embedding_mixing, EvalConfig};
use xirpgan_core::nn::{loss_and_grad, Activation, LossKind, Network, NetworkParams, NetworkSpec};
use xirpgan_core::series::{ljung_box, moments, spearman};
use xirpgan_core::shapley::{attribution_report, fit_surrogate, shapley_exact, to_matrix, SurrogateConfig};
use xirpgan_core::wgan::{critic_loss, critic_loss_and_grad, critic_spec, generator_loss, generator_loss_and_grad, generator_spec, train_wgan, GanConfig};
use xirpgan_core::xirp::{decode_diagonal, decode_variants, encode_irp, encode_xirp, recover_from_irp, DecodeMode};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(name: &str, pass: bool, detail: String) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

// ---------------------------------------------------------------------------

#[test]
fn codec_round_trips() {
    let _g = serial();
    let t = Instant::now();
    let mut r = rng(1);
    let (mut diag_exact, mut worst_variant, mut worst_recover) = (true, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = r.gen_range(2..=64);
        let x: Vec<f64> = (0..n).map(|_| r.gen_range(0.05..20.0)).collect();
        let xirp = encode_xirp(&x).unwrap();
        diag_exact &= decode_diagonal(&xirp.0).unwrap() == x;
        for v in decode_variants(&xirp).unwrap() {
            for (a, b) in v.iter().zip(&x) {
                worst_variant = worst_variant.max((a - b).abs() / b.abs().max(1.0));
            }
        }
        let rec = recover_from_irp(&encode_irp(&x).unwrap(), x[0]).unwrap();
        for (a, b) in rec.iter().zip(&x) {
            worst_recover = worst_recover.max((a - b).abs() / b.abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = diag_exact && worst_variant <= 1e-6 && worst_recover <= 1e-9 && secs < 10.0;
    verdict("codec round trips", pass, format!("diagonal exact={diag_exact}, worst variant error {worst_variant:.2e} (<=1e-6), worst recovery rel. error {worst_recover:.2e} (<=1e-9), {secs:.2}s (<10s)"));
    assert!(pass);
}

// ---------------------------------------------------------------------------

fn central(p: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            q[i] = p[i] + h;
            let up = f(&q);
            q[i] = p[i] - h;
            let down = f(&q);
            q[i] = p[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a - n| / (1e-4 * max(|a|, |n|) + 1e-8)`; at most 1 passes.
fn worst(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs() / (1e-4 * a.abs().max(n.abs()) + 1e-8)).fold(0.0, f64::max)
}

fn network_worst(spec: NetworkSpec, x: &Array3<f64>, y: &Array2<f64>, loss: LossKind) -> f64 {
    let net = Network::new(spec).unwrap();
    let p = net.init_params();
    let (_, g) = net.gradient(&p, x, y, loss).unwrap();
    let n = central(&p.0, 1e-5, |q| loss_and_grad(loss, &net.forward(&NetworkParams(q.to_vec()), x).unwrap(), y).0);
    worst(&g, &n)
}

#[test]
fn gradient_fidelity() {
    let _g = serial();
    let t = Instant::now();
    let losses = [LossKind::Mse, LossKind::SmoothMae, LossKind::Bce, LossKind::Wasserstein];
    let mut w = [0.0f64; 4];
    for seed in 0..20u64 {
        let mut r = rng(seed);
        let loss = losses[seed as usize % 4];
        let target = |r: &mut ChaCha8Rng, n: usize, m: usize| {
            Array2::from_shape_fn((n, m), |_| if loss == LossKind::Bce { f64::from(r.gen_range(0..2u8)) } else { r.sample(StandardNormal) })
        };
        let x = Array3::from_shape_fn((4, 1, 3), |_| r.sample(StandardNormal));
        let y = target(&mut r, 4, 2);
        w[0] = w[0].max(network_worst(NetworkSpec::mlp(3, &[5, 4], Activation::Tanh, 2, Activation::Identity, seed), &x, &y, loss));
        let xs = Array3::from_shape_fn((3, 4, 2), |_| r.sample(StandardNormal));
        let ys = target(&mut r, 3, 1);
        w[1] = w[1].max(network_worst(NetworkSpec::recurrent(2, &[3, 3], 1, Activation::Identity, seed), &xs, &ys, loss));

        let cfg = GanConfig { latent_dim: 3, generator_hidden: vec![4], critic_hidden: vec![5, 3], seed, ..GanConfig::default() };
        let critic = Network::new(critic_spec(&cfg, 2)).unwrap();
        let cp = critic.init_params();
        let real = Array2::from_shape_vec((4, 4), normal(&mut r, 16)).unwrap();
        let fake = Array2::from_shape_vec((4, 4), normal(&mut r, 16)).unwrap();
        let eps: Vec<f64> = (0..4).map(|_| r.gen::<f64>()).collect();
        let (_, g) = critic_loss_and_grad(&critic, &cp, &real, &fake, 10.0, &eps).unwrap();
        let n = central(&cp.0, 1e-5, |q| critic_loss(&critic, &NetworkParams(q.to_vec()), &real, &fake, 10.0, &eps).unwrap().loss);
        w[2] = w[2].max(worst(&g, &n));

        let generator = Network::new(generator_spec(&cfg, 2)).unwrap();
        let gp = generator.init_params();
        let z = Array2::from_shape_vec((5, 3), normal(&mut r, 15)).unwrap();
        let (_, g) = generator_loss_and_grad(&generator, &gp, &critic, &cp, &z).unwrap();
        let n = central(&gp.0, 1e-5, |q| generator_loss(&critic, &cp, &generator.forward_flat(&NetworkParams(q.to_vec()), &z).unwrap()).unwrap());
        w[3] = w[3].max(worst(&g, &n));
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = w.iter().all(|v| *v <= 1.0) && secs < 120.0;
    verdict(
        "gradient fidelity",
        pass,
        format!("worst error/tolerance at rel 1e-4: dense {:.3}, lstm {:.3}, critic+penalty {:.3}, generator {:.3} (<=1 passes), 20 seeds each, {secs:.1}s (<120s)", w[0], w[1], w[2], w[3]),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

fn brute_moments(x: &[f64]) -> [f64; 4] {
    let n = x.len() as f64;
    let mut mean = 0.0;
    for v in x {
        mean += v;
    }
    mean /= n;
    let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        s2 += d * d;
        s3 += d * d * d;
        s4 += d * d * d * d;
    }
    let m2 = s2 / n;
    [mean, s2 / (n - 1.0), (s3 / n) / (m2 * m2.sqrt()), (s4 / n) / (m2 * m2)]
}

fn brute_ljung_box(x: &[f64], h: usize) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let mut q = 0.0;
    for k in 1..=h {
        let mut ck = 0.0;
        for t in 0..n - k {
            ck += (x[t] - mean) * (x[t + k] - mean);
        }
        let rho = ck / c0;
        q += rho * rho / (n - k) as f64;
    }
    (n * (n + 2)) as f64 * q
}

fn brute_spearman(a: &[f64], b: &[f64]) -> f64 {
    let rank = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .map(|v| {
                let below = x.iter().filter(|w| *w < v).count() as f64;
                let equal = x.iter().filter(|w| *w == v).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (ra, rb) = (rank(a), rank(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[test]
fn statistical_oracles() {
    let _g = serial();
    let mut r = rng(3);
    let (mut wm, mut wq, mut ws, mut wscale, mut wmono) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = r.gen_range(20..300);
        let x = normal(&mut r, n);
        let m = moments(&x).unwrap();
        let o = brute_moments(&x);
        let (sk, ku) = m.higher().unwrap();
        for (a, b) in [m.mean, m.variance, sk, ku].iter().zip(o) {
            wm = wm.max(rel(*a, b));
        }
        let h = r.gen_range(1..=10);
        let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        wq = wq.max(rel(ljung_box(&x, h, false).unwrap().q, brute_ljung_box(&x, h)));
        wq = wq.max(rel(ljung_box(&x, h, true).unwrap().q, brute_ljung_box(&abs, h)));
        let c = r.gen_range(0.01..100.0);
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        let q = ljung_box(&x, h, false).unwrap().q;
        wscale = wscale.max((ljung_box(&scaled, h, false).unwrap().q - q).abs() / q.max(1e-12));

        let a: Vec<f64> = (0..n).map(|_| (r.gen_range(-3.0..3.0) * 4.0f64).round() / 4.0).collect();
        let b: Vec<f64> = a.iter().map(|v| v + r.gen_range(-2.0..2.0)).collect();
        let s = spearman(&a, &b).unwrap();
        ws = ws.max((s - brute_spearman(&a, &b)).abs());
        let mono: Vec<f64> = b.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
        wmono = wmono.max((spearman(&a, &mono).unwrap() - s).abs());
    }
    let pass = wm <= 1e-9 && wq <= 1e-9 && ws <= 1e-9 && wscale <= 1e-9 && wmono <= 1e-9;
    verdict(
        "statistical oracles",
        pass,
        format!("100 instances each: moments {wm:.1e}, ljung-box {wq:.1e}, spearman {ws:.1e}; scale invariance {wscale:.1e}, monotone invariance {wmono:.1e} (all <=1e-9)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

fn permutation_shapley(f: &dyn Fn(&[f64]) -> f64, x: &[f64], bg: &[Vec<f64>]) -> Vec<f64> {
    let v = |set: [bool; 3]| bg.iter().map(|b| f(&[0, 1, 2].map(|j| if set[j] { x[j] } else { b[j] }))).sum::<f64>() / bg.len() as f64;
    let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut phi = vec![0.0; 3];
    for o in orders {
        let mut set = [false; 3];
        for j in o {
            let before = v(set);
            set[j] = true;
            phi[j] += (v(set) - before) / 6.0;
        }
    }
    phi
}

#[test]
fn shapley_axioms() {
    let _g = serial();
    let t = Instant::now();
    let mut r = rng(4);
    let rows: Vec<Vec<f64>> = (0..50).map(|_| normal(&mut r, 8)).collect();
    let target: Vec<f64> = rows.iter().map(|x| x[0].sin() + 0.5 * x[1] * x[2] - 0.3 * x[5]).collect();
    let model = fit_surrogate(&rows, &target, &SurrogateConfig { seed: 9, ..SurrogateConfig::default() }).unwrap();
    let names = ["f0", "f1", "f2", "f3", "f4", "f5", "f6", "f7"];
    let ids: Vec<String> = (0..50).map(|i| format!("d{i}")).collect();
    let efficiency = attribution_report("target", &model, &names, &ids, &rows).unwrap().efficiency_gap();

    let (mut dummy, mut symmetry, mut oracle) = (0.0f64, 0.0f64, 0.0f64);
    let constructed = |x: &[f64]| (x[0] * x[1]).tanh() + x[0] + x[1] + x[3].powi(2);
    for _ in 0..20 {
        let mut bg: Vec<Vec<f64>> = (0..10).map(|_| normal(&mut r, 4)).collect();
        bg.iter_mut().for_each(|b| b[1] = b[0]);
        let v: f64 = r.sample(StandardNormal);
        let x = [v, v, r.sample(StandardNormal), r.sample(StandardNormal)];
        let phi = shapley_exact(&(4usize, &constructed), &x, &to_matrix(&bg)).unwrap();
        dummy = dummy.max(phi[2].abs());
        symmetry = symmetry.max((phi[0] - phi[1]).abs());

        let w = normal(&mut r, 4);
        let f = move |x: &[f64]| (w[0] * x[0] - x[1]).tanh() * x[2] + w[1] * x[0] * x[1] * x[2] + w[2] * x[1].powi(3) + w[3];
        let bg3: Vec<Vec<f64>> = (0..6).map(|_| normal(&mut r, 3)).collect();
        let x3 = normal(&mut r, 3);
        let exact = shapley_exact(&(3usize, &f), &x3, &to_matrix(&bg3)).unwrap();
        for (a, b) in exact.iter().zip(permutation_shapley(&f, &x3, &bg3)) {
            oracle = oracle.max((a - b).abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = efficiency <= 1e-6 && dummy <= 1e-9 && symmetry <= 1e-9 && oracle <= 1e-9 && secs < 60.0;
    verdict(
        "shapley axioms",
        pass,
        format!("efficiency gap {efficiency:.1e} over 50 instances (<=1e-6), dummy {dummy:.1e}, symmetry {symmetry:.1e}, permutation oracle {oracle:.1e} (<=1e-9), {secs:.1}s (<60s)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

fn smoke_windows(k: usize) -> Vec<Vec<f64>> {
    real_windows(&smoke_series(0)[k], &RunConfig::default()).unwrap()
}

#[test]
fn harness_soundness() {
    let _g = serial();
    let real = smoke_windows(0);
    let offset: Vec<Vec<f64>> = real.iter().map(|w| w.iter().map(|v| v + 5.0).collect()).collect();
    let (mut same_sd, mut same_mix, mut off_sd, mut off_mix) = (vec![], vec![], vec![], vec![]);
    for seed in 0..5 {
        let cfg = EvalConfig { repetitions: 3, seed, ..EvalConfig::default() };
        same_sd.push(discriminative_score(&real, &real, &cfg).unwrap().mean);
        same_mix.push(embedding_mixing(&real, &real, &cfg).unwrap().knn_mixing);
        off_sd.push(discriminative_score(&real, &offset, &cfg).unwrap().mean);
        off_mix.push(embedding_mixing(&real, &offset, &cfg).unwrap().knn_mixing);
    }
    let (a, b, c, d) = (median(same_sd), median(same_mix), median(off_sd), median(off_mix));
    let cfg = EvalConfig { repetitions: 2, alpha_grid: vec![0.0, 0.1, 0.3], seed: 11, ..EvalConfig::default() };
    let empty = augmentation_curve(&real, &[], &cfg).unwrap().at(0.0).unwrap();
    let full = augmentation_curve(&real, &smoke_windows(1), &cfg).unwrap().at(0.0).unwrap();
    let identical = empty.to_bits() == full.to_bits();
    let pass = (a - 0.5).abs() <= 0.1 && (b - 0.5).abs() <= 0.1 && c < 0.05 && d < 0.05 && identical;
    verdict(
        "harness soundness",
        pass,
        format!("identical data: median s_d {a:.3}, knn_mixing {b:.3} (0.5+-0.1); offset data: s_d {c:.3}, knn_mixing {d:.3} (<0.05); baseline rmse {empty:.6} bit-identical with empty/full pool: {identical}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

fn parse_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn svg_attr(svg: &str, attr: &str) -> Vec<String> {
    let key = format!("{attr}=\"");
    svg.match_indices(&key).map(|(i, _)| svg[i + key.len()..].split('"').next().unwrap().to_string()).collect()
}

#[test]
fn end_to_end_smoke() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = smoke_config();
    for (name, series) in smoke_files(0) {
        let p = dir.path().join(name);
        fs::write(&p, write_m4(&series)).unwrap();
        cfg.inputs.push(p);
    }
    cfg.output = dir.path().join("out");
    cfg.sync_seeds();
    let t = Instant::now();
    let summary = run_pipeline(&cfg).unwrap();
    let elapsed = t.elapsed();
    let out = &cfg.output;
    let mut problems = Vec::new();

    let (header, rows) = parse_csv(&out.join("scores.csv"));
    if header.len() != 5 + 6 || rows.len() != 6 {
        problems.push(format!("score table shape {}x{}", rows.len(), header.len()));
    }
    for row in &rows {
        let v: Vec<f64> = row[1..].iter().map(|c| c.parse().unwrap_or(f64::NAN)).collect();
        let ok = v.iter().all(|x| x.is_finite()) && (0.0..=1.0).contains(&v[1]) && v[0] > 0.0 && [0.1, 0.2, 0.3, 0.4, 0.5].iter().any(|a| (a - v[3]).abs() < 1e-12);
        if !ok {
            problems.push(format!("bad score row {row:?}"));
        }
    }

    let (_, corr) = parse_csv(&out.join("correlations.csv"));
    let m: Vec<Vec<f64>> = corr.iter().map(|r| r[1..].iter().map(|c| c.parse().unwrap()).collect()).collect();
    let corr_ok = m.len() == 3 && (0..3).all(|i| m[i][i] == 1.0 && (0..3).all(|j| m[i][j] == m[j][i] && m[i][j].abs() <= 1.0));
    if !corr_ok {
        problems.push(format!("correlation matrix {m:?}"));
    }

    for stem in ["s_a_pooled", "alpha_star_pooled", "s_a_daily", "s_a_weekly", "alpha_star_daily", "alpha_star_weekly"] {
        let (_, h) = parse_csv(&out.join("plots").join(format!("{stem}.csv")));
        let svg = fs::read_to_string(out.join("plots").join(format!("{stem}.svg"))).unwrap();
        let drawn: Vec<String> = svg_attr(&svg, "data-count");
        let listed: Vec<String> = h.iter().map(|r| r[2].clone()).collect();
        if drawn != listed || svg_attr(&svg, "data-lo") != h.iter().map(|r| r[0].clone()).collect::<Vec<_>>() {
            problems.push(format!("{stem}: svg and csv disagree"));
        }
    }

    let mut worst_eff = 0.0f64;
    for target in ["s_p", "s_d", "s_a", "alpha_star"] {
        let path = out.join("attribution").join(format!("{target}.csv"));
        let text = fs::read_to_string(&path).unwrap_or_default();
        let baseline: f64 = text.lines().next().and_then(|l| l.split_whitespace().find_map(|w| w.strip_prefix("baseline="))).and_then(|b| b.parse().ok()).unwrap_or(f64::NAN);
        let (_, rows) = parse_csv(&path);
        let mut by_id: std::collections::BTreeMap<String, (f64, f64)> = Default::default();
        for r in &rows {
            let e = by_id.entry(r[0].clone()).or_insert((0.0, r[6].parse().unwrap()));
            e.0 += r[2].parse::<f64>().unwrap();
        }
        if by_id.len() != 6 {
            problems.push(format!("{target}: {} attributed datasets", by_id.len()));
        }
        for (sum, pred) in by_id.values() {
            worst_eff = worst_eff.max((sum - (pred - baseline)).abs());
        }
    }
    if !(worst_eff <= 1e-6) {
        problems.push(format!("efficiency gap {worst_eff:e}"));
    }
    if summary.succeeded() != 6 {
        problems.push(format!("{} of 6 datasets succeeded", summary.succeeded()));
    }
    let pass = problems.is_empty() && elapsed < Duration::from_secs(30 * 60);
    verdict(
        "end-to-end smoke",
        pass,
        format!(
            "6 datasets, S=28, {} generator steps, k={}, alpha grid 0..0.5 step 0.1: {:.0}s (<1800s); attribution efficiency gap {worst_eff:.1e}; problems: {problems:?}",
            cfg.gan.generator_steps,
            cfg.eval.repetitions,
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

/// Generator steps for the trained side of the comparison.
const SANITY_STEPS: usize = 300;

#[test]
fn trained_generator_beats_untrained() {
    let _g = serial();
    let t = Instant::now();
    let base = smoke_config();
    let (mut trained_sd, mut trained_mix, mut untrained_sd, mut untrained_mix) = (vec![], vec![], vec![], vec![]);
    for seed in 0..5u64 {
        let mut sums = [0.0; 4];
        for (k, ts) in smoke_series(0).iter().enumerate() {
            let real = real_windows(ts, &base).unwrap();
            let (images, _) = encode_training_set(&real).unwrap();
            let ec = EvalConfig { repetitions: 1, seed: seed * 100 + k as u64, ..base.eval.clone() };
            for (slot, steps) in [(0, SANITY_STEPS), (2, 0)] {
                let gan = GanConfig { generator_steps: steps, seed: seed * 100 + k as u64, ..base.gan.clone() };
                let model = train_wgan(&images, gan).unwrap();
                let synth = synthesize(&model, real.len(), DecodeMode::Average, seed).unwrap().windows;
                sums[slot] += discriminative_score(&real, &synth, &ec).unwrap().mean / 6.0;
                sums[slot + 1] += embedding_mixing(&real, &synth, &ec).unwrap().knn_mixing / 6.0;
            }
        }
        trained_sd.push(sums[0]);
        trained_mix.push(sums[1]);
        untrained_sd.push(sums[2]);
        untrained_mix.push(sums[3]);
    }
    let (a, b, c, d) = (median(trained_sd), median(trained_mix), median(untrained_sd), median(untrained_mix));
    let pass = a > c && b > d;
    verdict(
        "trained generator beats untrained",
        pass,
        format!("median over 5 seeds of the 6-dataset mean: s_d trained {a:.3} vs untrained {c:.3}; knn_mixing trained {b:.3} vs untrained {d:.3} ({SANITY_STEPS} steps, {:.0}s)", t.elapsed().as_secs_f64()),
    );
    assert!(pass);
}
