use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};

/// Shortest round-trip decimal form, so reruns produce identical bytes.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let io = |e: csv::Error| BenchError::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    versions: Versions,
    /// SHA-256 of the optimizer settings and the case, when the command has a case.
    #[serde(skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

#[derive(Serialize)]
struct Versions {
    pihqcd: &'static str,
    bench: &'static str,
}

/// The replay record: passing it back through `--config` regenerates the run.
pub fn write_manifest(out: &Path, config: &ExperimentConfig, config_hash: Option<String>) -> Result<()> {
    let m = Manifest {
        config,
        versions: Versions { pihqcd: pihqcd::VERSION, bench: env!("CARGO_PKG_VERSION") },
        config_hash,
    };
    write_json(&out.join("manifest.json"), &m)
}

/// Wall-clock times live apart from the CSVs, which stay byte-reproducible.
pub fn write_timing(out: &Path, entries: &[(&str, f64)]) -> Result<()> {
    let map: serde_json::Map<String, serde_json::Value> = entries.iter().map(|(k, v)| (k.to_string(), serde_json::json!(v))).collect();
    write_json(&out.join("timing.json"), &map)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for a single value.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties; 0 when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}
