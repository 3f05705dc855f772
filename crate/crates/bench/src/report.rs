use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::output::{ensure_dir, mean, num, std_dev, write_csv};

const INPUTS: [&str; 3] = ["metrics.csv", "noise_sweep.csv", "convergence_summary.csv"];

/// Metrics of the summary table, in column order, with the source file and column they come from.
const COLUMNS: [(&str, &str, &str); 5] = [
    ("cost_pu", "metrics", "cost_pu"),
    ("utilization", "metrics", "utilization"),
    ("violation_rate", "metrics", "violation_rate"),
    ("iterations", "metrics", "iterations"),
    ("noise_degradation", "noise_sweep", "degradation"),
];

struct Table {
    source: &'static str,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn col(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn collect(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| BenchError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths {
        if p.is_dir() {
            collect(&p, found)?;
        } else if p.file_name().and_then(|n| n.to_str()).is_some_and(|n| INPUTS.contains(&n)) {
            found.push(p);
        }
    }
    Ok(())
}

fn read_table(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::input(path, e))?;
    let header = r.headers().map_err(|e| BenchError::input(path, e))?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()).map_err(|e| BenchError::input(path, e)))
        .collect::<Result<_>>()?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let source = match name {
        "metrics.csv" => "metrics",
        "noise_sweep.csv" => "noise_sweep",
        _ => "convergence",
    };
    Ok(Table { source, header, rows })
}

/// `mean ± std` per method and metric across every seed file under the input directory.
pub fn report(cfg: &ExperimentConfig) -> Result<String> {
    let dir = cfg.input.as_deref().ok_or_else(|| BenchError::Usage("report needs an input directory".into()))?;
    let mut files = Vec::new();
    collect(dir, &mut files)?;
    if files.is_empty() {
        return Err(BenchError::input(dir, "no experiment CSVs (metrics.csv, noise_sweep.csv, convergence_summary.csv) found"));
    }
    let tables: Vec<Table> = files.iter().map(|p| read_table(p)).collect::<Result<_>>()?;

    // method -> metric -> values
    let mut values: BTreeMap<String, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    let mut long = Vec::new();
    for t in &tables {
        let (Some(mc), seed_col) = (t.col("method"), t.col("seed")) else { continue };
        let noisiest = t.col("shots").and_then(|c| t.rows.iter().filter_map(|r| r[c].parse::<u64>().ok()).min());
        for row in &t.rows {
            let method = row[mc].clone();
            let seed = seed_col.map(|c| row[c].clone()).unwrap_or_default();
            for (h, v) in t.header.iter().zip(row) {
                if let Ok(x) = v.parse::<f64>() {
                    if h != "seed" {
                        long.push(vec![t.source.to_string(), method.clone(), seed.clone(), h.clone(), num(x)]);
                    }
                }
            }
            let at_noisiest = t.col("shots").is_none_or(|c| row[c].parse::<u64>().ok() == noisiest);
            for (metric, source, column) in COLUMNS {
                if source == t.source && at_noisiest {
                    if let Some(x) = t.col(column).and_then(|c| row[c].parse::<f64>().ok()) {
                        values.entry(method.clone()).or_default().entry(metric).or_default().push(x);
                    }
                }
            }
            if t.source == "convergence" {
                if let Some(x) = t.col("iterations_to_2pct").and_then(|c| row[c].parse::<f64>().ok()) {
                    values.entry(method.clone()).or_default().entry("iterations_to_2pct").or_default().push(x);
                }
            }
        }
    }

    let metric_order: Vec<&str> = COLUMNS.iter().map(|c| c.0).chain(["iterations_to_2pct"]).collect();
    let mut summary = Vec::new();
    let mut text = format!("{:<22}", "method");
    for m in &metric_order {
        text.push_str(&format!("{m:>26}"));
    }
    text.push('\n');
    for (method, per) in &values {
        text.push_str(&format!("{method:<22}"));
        for m in &metric_order {
            let cell = match per.get(m) {
                Some(xs) => {
                    summary.push(vec![method.clone(), m.to_string(), num(mean(xs)), num(std_dev(xs)), xs.len().to_string()]);
                    format!("{:.4} ± {:.4}", mean(xs), std_dev(xs))
                }
                None => "-".into(),
            };
            text.push_str(&format!("{cell:>26}"));
        }
        text.push('\n');
    }

    let out = &cfg.out;
    ensure_dir(out)?;
    write_csv(&out.join("summary.csv"), &["method", "metric", "mean", "std", "n"], &summary)?;
    std::fs::write(out.join("summary.txt"), &text).map_err(|e| BenchError::io(&out.join("summary.txt"), e))?;
    write_csv(&out.join("plot_data.csv"), &["source", "method", "seed", "variable", "value"], &long)?;
    Ok(format!("{text}aggregated {} files; wrote {}\n", files.len(), out.display()))
}
