//! Cross-seed aggregation of metrics CSVs.

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use crate::experiment::{read_metrics, CsvRow};

#[derive(Debug, Clone, PartialEq)]
pub struct FileSummary {
    pub path: PathBuf,
    pub steps: u64,
    pub mean_normalized: Option<f64>,
    pub total_ops: u64,
    pub ms: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub files: Vec<FileSummary>,
    pub runs: usize,
    pub mean_normalized: Option<f64>,
    pub std_normalized: Option<f64>,
    pub mean_ops: f64,
    pub failed: usize,
}

pub fn summarize_file(path: PathBuf) -> Result<FileSummary> {
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let rows = read_metrics(file).map_err(anyhow::Error::msg).with_context(|| path.display().to_string())?;
    let mut out = FileSummary {
        path,
        steps: 0,
        mean_normalized: None,
        total_ops: 0,
        ms: 0.0,
        failed: false,
    };
    match rows.last() {
        Some(&CsvRow::Summary { steps, mean_normalized, ops, ms, .. }) => {
            out.steps = steps;
            out.mean_normalized = mean_normalized;
            out.total_ops = ops;
            out.ms = ms;
        }
        Some(&CsvRow::Error { ops, ms, .. }) => {
            out.failed = true;
            out.total_ops = ops;
            out.ms = ms;
        }
        _ => bail!("{}: no summary row", out.path.display()),
    }
    Ok(out)
}

/// Aggregates every file matching `pattern`. Failed runs are listed but left
/// out of the means.
pub fn summarize_glob(pattern: &str) -> Result<Aggregate> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .with_context(|| format!("bad pattern {pattern:?}"))?
        .collect::<Result<_, _>>()?;
    paths.sort();
    if paths.is_empty() {
        bail!("no files match {pattern:?}");
    }
    let files = paths.into_iter().map(summarize_file).collect::<Result<Vec<_>>>()?;
    let ok: Vec<&FileSummary> = files.iter().filter(|f| !f.failed).collect();
    let norms: Vec<f64> = ok.iter().filter_map(|f| f.mean_normalized).collect();
    let mean = (!norms.is_empty()).then(|| norms.iter().sum::<f64>() / norms.len() as f64);
    let std = mean.filter(|_| norms.len() > 1).map(|m| {
        (norms.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (norms.len() - 1) as f64).sqrt()
    });
    let mean_ops = if ok.is_empty() {
        0.0
    } else {
        ok.iter().map(|f| f.total_ops as f64).sum::<f64>() / ok.len() as f64
    };
    Ok(Aggregate {
        runs: ok.len(),
        failed: files.len() - ok.len(),
        mean_normalized: mean,
        std_normalized: std,
        mean_ops,
        files,
    })
}

pub fn write_aggregate<W: Write>(agg: &Aggregate, out: W) -> Result<()> {
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["file", "steps", "mean_normalized", "total_ops", "ms", "status"])?;
    for f in &agg.files {
        w.write_record([
            f.path.display().to_string(),
            f.steps.to_string(),
            opt(f.mean_normalized),
            f.total_ops.to_string(),
            f.ms.to_string(),
            if f.failed { "error" } else { "ok" }.to_string(),
        ])?;
    }
    w.write_record([
        "mean".to_string(),
        agg.runs.to_string(),
        opt(agg.mean_normalized),
        agg.mean_ops.to_string(),
        String::new(),
        format!("{} failed", agg.failed),
    ])?;
    w.write_record([
        "stddev".to_string(),
        String::new(),
        opt(agg.std_normalized),
        String::new(),
        String::new(),
        String::new(),
    ])?;
    w.flush()?;
    Ok(())
}
