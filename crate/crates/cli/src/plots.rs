//! Minimal static SVG figures. Each figure has a sibling CSV holding the
//! exact numbers drawn; both are rendered from the same formatted strings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use xirpgan_core::eval::{csv_field, ScoreRecord};
use xirpgan_core::series::Frequency;
use xirpgan_core::shapley::AttributionReport;

use crate::artifacts::write_atomic;

const W: f64 = 640.0;
const H: f64 = 400.0;
const M: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width bins over the value range, about `log2(n) + 1` of them.
/// A single distinct value gives one bar centred on it.
pub fn histogram(values: &[f64]) -> Histogram {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        let half = if lo == 0.0 { 0.005 } else { lo.abs() * 0.005 };
        return Histogram { edges: vec![lo - half, hi + half], counts: vec![values.len()] };
    }
    let bins = ((values.len() as f64).log2().ceil() as usize + 1).clamp(1, 20);
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| if k == bins { hi } else { lo + k as f64 * width }).collect();
    let mut counts = vec![0; bins];
    for v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram { edges, counts }
}

/// One bar per grid point, bounded by midpoints to the neighbours.
pub fn grid_histogram(values: &[f64], grid: &[f64]) -> Histogram {
    let mut g: Vec<f64> = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    let step = if g.len() > 1 { g[1] - g[0] } else { 0.1 };
    let mut edges = vec![g[0] - step / 2.0];
    for w in g.windows(2) {
        edges.push((w[0] + w[1]) / 2.0);
    }
    edges.push(g[g.len() - 1] + step / 2.0);
    let counts = g
        .iter()
        .map(|a| values.iter().filter(|v| (*v - a).abs() < 1e-9).count())
        .collect();
    Histogram { edges, counts }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut s = String::from("bin_lo,bin_hi,count\n");
    for (k, c) in h.counts.iter().enumerate() {
        writeln!(s, "{},{},{c}", num(h.edges[k]), num(h.edges[k + 1])).expect("string write");
    }
    s
}

pub fn histogram_svg(h: &Histogram, title: &str, xlabel: &str) -> String {
    let (lo, hi) = (h.edges[0], h.edges[h.edges.len() - 1]);
    let top = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let x = |v: f64| M + (v - lo) / (hi - lo) * (W - 2.0 * M);
    let y = |c: f64| H - M - c / top * (H - 2.0 * M);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n");
    writeln!(s, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>", W / 2.0, esc(title)).expect("string write");
    writeln!(s, "<line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>", H - M, W - M, H - M).expect("string write");
    writeln!(s, "<line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>", H - M).expect("string write");
    for (k, c) in h.counts.iter().enumerate() {
        let (a, b) = (h.edges[k], h.edges[k + 1]);
        writeln!(
            s,
            "<rect class=\"bar\" data-lo=\"{}\" data-hi=\"{}\" data-count=\"{c}\" x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"steelblue\" stroke=\"white\"/>",
            num(a),
            num(b),
            x(a),
            y(*c as f64),
            (x(b) - x(a)).max(0.5),
            H - M - y(*c as f64)
        )
        .expect("string write");
    }
    let mut ticks = vec![lo, hi];
    if lo < 0.0 && hi > 0.0 {
        ticks.push(0.0);
    }
    for t in ticks {
        writeln!(s, "<text class=\"tick\" x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{:.3}</text>", x(t), H - M + 16.0, t).expect("string write");
    }
    writeln!(s, "<text x=\"{:.2}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>", M - 4.0, M + 4.0, top).expect("string write");
    writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{}</text>", W / 2.0, H - 12.0, esc(xlabel)).expect("string write");
    s.push_str("</svg>\n");
    s
}

/// Points of one target's beeswarm: `(feature rank, dataset, phi, z, x, y)`.
pub fn beeswarm_points(r: &AttributionReport) -> Vec<(usize, String, f64, f64, f64, f64)> {
    let (lo, hi) = r.instances.iter().flat_map(|a| a.phi.iter()).fold((0.0f64, 0.0f64), |(l, h), p| (l.min(*p), h.max(*p)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let row_h = (H - 2.0 * M) / r.ordering.len().max(1) as f64;
    let mut pts = Vec::new();
    for (rank, &j) in r.ordering.iter().enumerate() {
        let mut row: Vec<(f64, &str, f64)> = r.instances.iter().map(|a| (a.phi[j], a.dataset_id.as_str(), a.standardized[j])).collect();
        row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
        let mut last_x = f64::NEG_INFINITY;
        let mut stack = 0usize;
        for (phi, id, z) in row {
            let px = M + 120.0 + (phi - lo) / span * (W - 2.0 * M - 120.0);
            stack = if px - last_x < 4.0 { stack + 1 } else { 0 };
            last_x = px;
            let offset = if stack % 2 == 1 { -1.0 } else { 1.0 } * ((stack + 1) / 2) as f64 * 3.0;
            let py = M + (rank as f64 + 0.5) * row_h + offset.clamp(-row_h / 2.0, row_h / 2.0);
            pts.push((rank + 1, id.to_string(), phi, z, px, py));
        }
    }
    pts
}

fn colour(z: f64) -> String {
    let t = ((z.clamp(-2.0, 2.0) + 2.0) / 4.0 * 255.0).round() as u8;
    format!("rgb({t},40,{})", 255 - t)
}

pub fn beeswarm(r: &AttributionReport) -> (String, String) {
    let pts = beeswarm_points(r);
    let mut csv = String::from("feature,feature_rank,dataset_id,phi,feature_z,x,y\n");
    let mut svg = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n");
    writeln!(svg, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">Shapley values for {}</text>", W / 2.0, esc(&r.target)).expect("string write");
    let row_h = (H - 2.0 * M) / r.ordering.len().max(1) as f64;
    for (rank, &j) in r.ordering.iter().enumerate() {
        writeln!(svg, "<text x=\"{}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{}</text>", M + 110.0, M + (rank as f64 + 0.5) * row_h + 4.0, esc(&r.feature_names[j])).expect("string write");
    }
    for (rank, id, phi, z, x, y) in pts {
        let feature = &r.feature_names[r.ordering[rank - 1]];
        let (p, zs, xs, ys) = (num(phi), num(z), format!("{x:.2}"), format!("{y:.2}"));
        writeln!(csv, "{feature},{rank},{},{p},{zs},{xs},{ys}", csv_field(&id)).expect("string write");
        writeln!(svg, "<circle class=\"point\" data-feature=\"{feature}\" data-id=\"{}\" data-phi=\"{p}\" data-z=\"{zs}\" cx=\"{xs}\" cy=\"{ys}\" r=\"2.5\" fill=\"{}\"/>", esc(&id), colour(z)).expect("string write");
    }
    writeln!(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">phi (colour: low to high feature value)</text>", W / 2.0, H - 12.0).expect("string write");
    svg.push_str("</svg>\n");
    (svg, csv)
}

fn write_hist(dir: &Path, stem: &str, h: &Histogram, title: &str, xlabel: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    for (ext, body) in [("svg", histogram_svg(h, title, xlabel)), ("csv", histogram_csv(h))] {
        let p = dir.join(format!("{stem}.{ext}"));
        write_atomic(&p, body.as_bytes())?;
        written.push(p);
    }
    Ok(())
}

/// Histograms of `s_a` and `alpha_star` (pooled and per frequency) and one
/// beeswarm per attribution target.
pub fn emit_plots(records: &[ScoreRecord], frequency: &BTreeMap<String, Frequency>, attributions: &[AttributionReport], dir: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        bail!("no score records to plot");
    }
    let mut written = Vec::new();
    let mut groups: Vec<(String, Vec<&ScoreRecord>)> = vec![("pooled".into(), records.iter().collect())];
    for f in Frequency::ALL {
        let g: Vec<&ScoreRecord> = records.iter().filter(|r| frequency.get(&r.dataset_id) == Some(&f)).collect();
        if !g.is_empty() {
            groups.push((f.as_str().into(), g));
        }
    }
    let mut grid: Vec<f64> = records.iter().flat_map(|r| r.rmse_curve.iter().map(|p| p.0)).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    for (name, g) in &groups {
        let sa: Vec<f64> = g.iter().map(|r| r.s_a).collect();
        write_hist(dir, &format!("s_a_{name}"), &histogram(&sa), &format!("augmentation score ({name})"), "s_a", &mut written)?;
        // Datasets that augmentation never helped land on 0.
        let alpha: Vec<f64> = g.iter().map(|r| r.optimal_level()).collect();
        let h = if grid.is_empty() { histogram(&alpha) } else { grid_histogram(&alpha, &grid) };
        write_hist(dir, &format!("alpha_star_{name}"), &h, &format!("best synthetic fraction ({name})"), "alpha*", &mut written)?;
    }
    for r in attributions {
        let (svg, csv) = beeswarm(r);
        for (ext, body) in [("svg", svg), ("csv", csv)] {
            let p = dir.join(format!("beeswarm_{}.{ext}", r.target));
            write_atomic(&p, body.as_bytes())?;
            written.push(p);
        }
    }
    Ok(written)
}
