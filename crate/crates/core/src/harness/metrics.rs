//! Evaluation summaries and the recovery-time histogram.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Histogram bin width for recovery times (s).
pub const BIN_WIDTH_S: f64 = 0.05;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchCounts {
    pub to_frn: usize,
    pub to_bskn: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config_hash: String,
    pub seed: u64,
    pub episodes: usize,
    pub knockdowns: usize,
    /// One entry per completed recovery (s).
    pub recovery_times_s: Vec<f64>,
    pub mean_recovery_s: Option<f64>,
    /// Falls still unresolved when their episode ended.
    pub unrecovered: usize,
    pub goals: usize,
    /// Fraction of episodes with at least one goal for the robot.
    pub goal_rate: f64,
    pub episode_rewards: Vec<f64>,
    pub switches: SwitchCounts,
}

impl MetricsReport {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self {
            config_hash,
            seed,
            episodes: 0,
            knockdowns: 0,
            recovery_times_s: vec![],
            mean_recovery_s: None,
            unrecovered: 0,
            goals: 0,
            goal_rate: 0.0,
            episode_rewards: vec![],
            switches: SwitchCounts::default(),
        }
    }

    /// Recompute the derived fields from the raw samples.
    pub fn finish(&mut self, episodes_with_goal: usize) {
        self.mean_recovery_s = mean(&self.recovery_times_s);
        self.goal_rate = if self.episodes == 0 {
            0.0
        } else {
            episodes_with_goal as f64 / self.episodes as f64
        };
    }

    pub fn histogram(&self) -> Vec<Bin> {
        histogram(&self.recovery_times_s, BIN_WIDTH_S)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Histogram CSV with a provenance comment line.
    pub fn write_histogram_csv(&self, path: &Path) -> Result<()> {
        let mut out = provenance_line(&self.config_hash, self.seed, &[]).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["bin_start_s", "bin_end_s", "count"])?;
            for b in self.histogram() {
                w.write_record([format!("{:.2}", b.start), format!("{:.2}", b.end), b.count.to_string()])?;
            }
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&out).map_err(|e| Error::io(path, e))
    }
}

/// `# config_hash=... seed=... key=value ...` followed by a newline.
pub fn provenance_line(config_hash: &str, seed: u64, extra: &[(&str, String)]) -> String {
    let mut line = format!("# config_hash={config_hash} seed={seed}");
    for (k, v) in extra {
        line.push_str(&format!(" {k}={v}"));
    }
    line.push('\n');
    line
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

/// Fixed-width bins from zero up to the bin holding the largest sample.
pub fn histogram(samples: &[f64], width: f64) -> Vec<Bin> {
    // tolerate representation error, e.g. 0.7 / 0.05 = 13.999...
    let index = |t: f64| ((t / width) + 1e-9).floor().max(0.0) as usize;
    let Some(top) = samples.iter().map(|&t| index(t)).max() else {
        return vec![];
    };
    let mut counts = vec![0; top + 1];
    for &t in samples {
        counts[index(t)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| Bin {
            start: i as f64 * width,
            end: (i + 1) as f64 * width,
            count,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_edges_are_exact_for_frame_multiples() {
        let h = histogram(&[0.70, 0.70, 0.05, 0.0, 0.049], 0.05);
        assert_eq!(h.len(), 15);
        assert_eq!(h[14].count, 2);
        assert_eq!(h[1].count, 1);
        assert_eq!(h[0].count, 2);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 5);
    }

    #[test]
    fn empty_report_is_valid_json() {
        let mut r = MetricsReport::new("ab".into(), 1);
        r.finish(0);
        let text = serde_json::to_string(&r).unwrap();
        let back: MetricsReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.mean_recovery_s, None);
        assert!(back.recovery_times_s.is_empty());
        assert!(r.histogram().is_empty());
    }
}
