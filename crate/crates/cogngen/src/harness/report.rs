//! Aggregation of finished runs into a comparison table.
//!
//! A report folds every metrics file in a directory down to trailing-window
//! statistics per run, then groups runs of the same agent/task pair across
//! seeds. Runs shorter than the aggregation window are kept but flagged.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::gridworld::Task;
use crate::{Error, Result};

use super::metrics::{read_metrics, EpisodeRecord, RunMeta};
use super::AgentKind;

/// Episodes folded into the trailing statistics.
pub const REPORT_WINDOW: usize = 100;

/// Trailing-window statistics of a single run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub meta: RunMeta,
    pub episodes: usize,
    /// Success rate over the trailing window, in percent.
    pub success_pct: f64,
    /// Mean normalized episode length over the trailing window.
    pub mean_norm_length: f64,
    /// Mean extrinsic reward over the trailing window.
    pub mean_reward: f64,
    /// Window actually used (shorter than [`REPORT_WINDOW`] for short runs).
    pub window: usize,
}

/// Fold one run down to its trailing-window statistics.
pub fn summarize(meta: RunMeta, records: &[EpisodeRecord]) -> RunSummary {
    let window = records.len().min(REPORT_WINDOW);
    let tail = &records[records.len() - window..];
    let denom = window.max(1) as f64;
    RunSummary {
        meta,
        episodes: records.len(),
        success_pct: 100.0 * tail.iter().filter(|r| r.success).count() as f64 / denom,
        mean_norm_length: tail.iter().map(|r| r.norm_length).sum::<f64>() / denom,
        mean_reward: tail.iter().map(|r| r.reward).sum::<f64>() / denom,
        window,
    }
}

/// Trailing moving average of the success indicator; entry `i` averages the
/// window ending at episode `i` (shorter at the head).
pub fn smooth(records: &[EpisodeRecord], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(records.len());
    let mut running = 0.0;
    for (i, r) in records.iter().enumerate() {
        running += f64::from(u8::from(r.success));
        if i >= window {
            running -= f64::from(u8::from(records[i - window].success));
        }
        out.push(running / window.min(i + 1) as f64);
    }
    out
}

/// One agent/task pair aggregated across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub agent: AgentKind,
    pub task: Task,
    pub seeds: usize,
    pub mean_episodes: f64,
    pub success_mean: f64,
    pub success_std: f64,
    pub norm_len_mean: f64,
    pub norm_len_std: f64,
    /// Seeds whose run was shorter than the aggregation window.
    pub partial_seeds: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Group per-run summaries into deterministic, sorted report rows.
pub fn aggregate(summaries: &[RunSummary]) -> Vec<ReportRow> {
    let mut groups: BTreeMap<(String, String), Vec<&RunSummary>> = BTreeMap::new();
    for s in summaries {
        groups
            .entry((s.meta.agent.to_string(), s.meta.task.to_string()))
            .or_default()
            .push(s);
    }
    groups
        .into_values()
        .map(|runs| {
            let succ: Vec<f64> = runs.iter().map(|r| r.success_pct).collect();
            let lens: Vec<f64> = runs.iter().map(|r| r.mean_norm_length).collect();
            let (success_mean, success_std) = mean_std(&succ);
            let (norm_len_mean, norm_len_std) = mean_std(&lens);
            ReportRow {
                agent: runs[0].meta.agent,
                task: runs[0].meta.task,
                seeds: runs.len(),
                mean_episodes: runs.iter().map(|r| r.episodes as f64).sum::<f64>()
                    / runs.len() as f64,
                success_mean,
                success_std,
                norm_len_mean,
                norm_len_std,
                partial_seeds: runs.iter().filter(|r| r.window < REPORT_WINDOW).count(),
            }
        })
        .collect()
}

/// Read every metrics file in `dir` and aggregate. Returns the rows and any
/// warnings (unreadable files, short runs).
pub fn report_dir(dir: &Path) -> Result<(Vec<ReportRow>, Vec<String>)> {
    let mut summaries = Vec::new();
    let mut warnings = Vec::new();
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    for path in paths {
        match read_metrics(&path) {
            Ok((meta, records)) => {
                if records.is_empty() {
                    warnings.push(format!("{}: no completed episodes", path.display()));
                    continue;
                }
                if records.len() < REPORT_WINDOW {
                    warnings.push(format!(
                        "{}: only {} episodes (window is {REPORT_WINDOW})",
                        path.display(),
                        records.len()
                    ));
                }
                summaries.push(summarize(meta, &records));
            }
            Err(e) => warnings.push(format!("{}: {e}", path.display())),
        }
    }
    if summaries.is_empty() {
        return Err(Error::config(format!(
            "no readable metrics files in {}",
            dir.display()
        )));
    }
    Ok((aggregate(&summaries), warnings))
}

/// Render rows as a plain-text table.
pub fn format_table(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<8} {:<6} {:>5} {:>9} {:>16} {:>16} {:>8}\n",
        "agent", "task", "seeds", "episodes", "success %", "length %", "partial"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<8} {:<6} {:>5} {:>9.0} {:>9.1} ±{:>4.1} {:>9.1} ±{:>4.1} {:>8}\n",
            r.agent.to_string(),
            r.task.to_string(),
            r.seeds,
            r.mean_episodes,
            r.success_mean,
            r.success_std,
            100.0 * r.norm_len_mean,
            100.0 * r.norm_len_std,
            r.partial_seeds
        ));
    }
    out
}

/// Write rows as CSV.
pub fn write_report(rows: &[ReportRow], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(
        out,
        "agent,task,seeds,mean_episodes,success_pct_mean,success_pct_std,norm_length_mean,norm_length_std,partial_seeds"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.agent,
            r.task,
            r.seeds,
            r.mean_episodes,
            r.success_mean,
            r.success_std,
            r.norm_len_mean,
            r.norm_len_std,
            r.partial_seeds
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::MetricsWriter;
    use tempfile::tempdir;

    fn rec(episode: u32, success: bool, norm_length: f64) -> EpisodeRecord {
        EpisodeRecord {
            episode,
            reward: f64::from(u8::from(success)),
            length: 10,
            norm_length,
            success,
            mean_intrinsic: 0.0,
            eps_ext: 0.5,
            eps_int: 0.0,
        }
    }

    fn meta(agent: AgentKind, seed: u64) -> RunMeta {
        RunMeta {
            agent,
            task: Task::R6x6,
            seed,
        }
    }

    #[test]
    fn summarize_uses_trailing_window() {
        let mut records: Vec<EpisodeRecord> =
            (0..150).map(|i| rec(i, false, 1.0)).collect();
        for r in records.iter_mut().skip(50) {
            r.success = true;
            r.norm_length = 0.2;
            r.reward = 1.0;
        }
        let s = summarize(meta(AgentKind::CogNGen, 1), &records);
        assert_eq!(s.window, 100);
        assert_eq!(s.success_pct, 100.0);
        assert!((s.mean_norm_length - 0.2).abs() < 1e-12);
        assert_eq!(s.episodes, 150);
    }

    #[test]
    fn short_run_uses_what_exists() {
        let records: Vec<EpisodeRecord> = (0..10)
            .map(|i| rec(i, i % 2 == 0, 0.5))
            .collect();
        let s = summarize(meta(AgentKind::Dqn, 1), &records);
        assert_eq!(s.window, 10);
        assert_eq!(s.success_pct, 50.0);
    }

    #[test]
    fn smooth_matches_hand_windows() {
        let records = vec![
            rec(0, true, 0.1),
            rec(1, false, 0.1),
            rec(2, true, 0.1),
            rec(3, true, 0.1),
        ];
        let s = smooth(&records, 2);
        assert_eq!(s, vec![1.0, 0.5, 0.5, 1.0]);
        let s1 = smooth(&records, 1);
        assert_eq!(s1, vec![1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn aggregate_groups_by_agent_and_task() {
        let summaries = vec![
            summarize(meta(AgentKind::CogNGen, 1), &[rec(0, true, 0.2)]),
            summarize(meta(AgentKind::CogNGen, 2), &[rec(0, false, 0.4)]),
            summarize(meta(AgentKind::Dqn, 1), &[rec(0, true, 0.3)]),
        ];
        let rows = aggregate(&summaries);
        assert_eq!(rows.len(), 2);
        let cg = rows
            .iter()
            .find(|r| r.agent == AgentKind::CogNGen)
            .unwrap();
        assert_eq!(cg.seeds, 2);
        assert_eq!(cg.success_mean, 50.0);
        assert_eq!(cg.success_std, 50.0);
        assert!((cg.norm_len_mean - 0.3).abs() < 1e-12);
        assert_eq!(cg.partial_seeds, 2);
    }

    #[test]
    fn report_dir_reads_warns_and_writes() {
        let dir = tempdir().unwrap();
        for seed in [1u64, 2] {
            let path = dir.path().join(format!("dqn-r6x6-seed{seed}.csv"));
            let mut w = MetricsWriter::create(&path, meta(AgentKind::Dqn, seed)).unwrap();
            for ep in 0..5 {
                w.append(&rec(ep, seed == 1, 0.5)).unwrap();
            }
        }
        std::fs::write(dir.path().join("junk.csv"), "not,metrics\n1,2\n").unwrap();
        let (rows, warnings) = report_dir(dir.path()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].seeds, 2);
        assert_eq!(rows[0].success_mean, 50.0);
        assert_eq!(warnings.len(), 3);
        let out = dir.path().join("table.csv");
        write_report(&rows, &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.lines().count() == 2);
        assert!(text.contains("dqn,r6x6,2"));
        assert!(!format_table(&rows).is_empty());
    }

    #[test]
    fn empty_dir_is_an_error() {
        let dir = tempdir().unwrap();
        assert!(report_dir(dir.path()).is_err());
    }
}
