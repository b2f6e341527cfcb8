//! Merging training curves into smoothed plotting tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::train::CURVE_SUFFIX;

pub const SMOOTHING_WINDOW: usize = 100;
pub const MERGED_FILE: &str = "curves.csv";

/// One run's reward curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    /// The provenance comment of the source file, without `# `.
    pub provenance: String,
    pub steps: Vec<u64>,
    pub rewards: Vec<f64>,
}

/// Trailing mean over up to `window` samples; the first points average
/// whatever is available.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..xs.len())
        .map(|i| {
            let w = &xs[(i + 1).saturating_sub(window)..=i];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect()
}

/// Read `step` and the episode reward column of a curve CSV. Iterations that
/// finished no episode are skipped.
pub fn read_curve(path: &Path) -> Result<Curve> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let provenance = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim())
        .collect::<Vec<_>>()
        .join(" ");
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let bad = |m: String| Error::Config(format!("{}: {m}", path.display()));
    let step_col = col("step").ok_or_else(|| bad("no `step` column".into()))?;
    let reward_col = col("mean_episode_reward")
        .or_else(|| col("reward"))
        .ok_or_else(|| bad("no `mean_episode_reward` column".into()))?;
    let mut steps = Vec::new();
    let mut rewards = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(reward_col).unwrap_or("").trim();
        if cell.is_empty() {
            continue;
        }
        let parse_err = |what: &str| bad(format!("row {}: bad {what}", i + 1));
        steps.push(rec.get(step_col).unwrap_or("").trim().parse().map_err(|_| parse_err("step"))?);
        rewards.push(cell.parse().map_err(|_| parse_err("reward"))?);
    }
    let label = path
        .file_name()
        .and_then(|n| n.to_str())
        .map(|n| n.strip_suffix(CURVE_SUFFIX).or_else(|| n.strip_suffix(".csv")).unwrap_or(n))
        .unwrap_or("run")
        .to_string();
    Ok(Curve {
        label,
        provenance,
        steps,
        rewards,
    })
}

/// Curve files directly inside `dir`, sorted by name.
pub fn find_curves(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_curve = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(CURVE_SUFFIX));
        if is_curve && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Merge every curve in `dir` into one smoothed table written to `out`:
/// a `step` column and one column per run, empty where a run has no value.
pub fn export_curves(dir: &Path, out: &Path, window: usize) -> Result<Vec<Curve>> {
    let files = find_curves(dir)?;
    if files.is_empty() {
        return Err(Error::Config(format!("no *{CURVE_SUFFIX} files in {}", dir.display())));
    }
    let curves = files.iter().map(|f| read_curve(f)).collect::<Result<Vec<_>>>()?;
    let mut table: BTreeMap<u64, Vec<Option<f64>>> = BTreeMap::new();
    for (k, c) in curves.iter().enumerate() {
        for (&s, v) in c.steps.iter().zip(moving_average(&c.rewards, window)) {
            table.entry(s).or_insert_with(|| vec![None; curves.len()])[k] = Some(v);
        }
    }
    let mut text = String::new();
    for c in &curves {
        text.push_str(&format!("# {}: {}\n", c.label, c.provenance));
    }
    text.push_str(&format!("# window={window}\n"));
    let mut w = csv::Writer::from_writer(text.into_bytes());
    let mut header = vec!["step".to_string()];
    header.extend(curves.iter().map(|c| c.label.clone()));
    w.write_record(&header)?;
    for (step, vals) in &table {
        let mut row = vec![step.to_string()];
        row.extend(vals.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(out, bytes).map_err(|e| Error::io(out, e))?;
    Ok(curves)
}
