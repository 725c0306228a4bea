//! Per-episode metrics rows and their CSV on-disk format.
//!
//! A metrics file is a plain CSV with two leading comment lines: a schema
//! stamp and the run's identity. Rows are appended (and flushed) as episodes
//! finish, so an interrupted run leaves a valid file holding every episode it
//! completed. Malformed rows are rejected outright rather than skipped.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::gridworld::Task;
use crate::{Error, Result};

use super::AgentKind;

/// First line of every metrics file.
pub const METRICS_SCHEMA: &str = "# cogngen-metrics-v1";

const COLUMNS: &str = "episode,reward,length,norm_length,success,mean_intrinsic,eps_ext,eps_int";

/// One finished episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u32,
    /// Total extrinsic reward.
    pub reward: f64,
    /// Steps taken.
    pub length: u32,
    /// `length / max_steps` for the task.
    pub norm_length: f64,
    pub success: bool,
    /// Mean per-step intrinsic contribution.
    pub mean_intrinsic: f64,
    /// Exploration rates in force during the episode.
    pub eps_ext: f64,
    pub eps_int: f64,
}

/// Identity of the run a metrics file belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunMeta {
    pub agent: AgentKind,
    pub task: Task,
    pub seed: u64,
}

/// Incremental CSV writer for one run.
#[derive(Debug)]
pub struct MetricsWriter {
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path, meta: RunMeta) -> Result<Self> {
        if let Some(dir) = path.parent()
            && !dir.as_os_str().is_empty()
        {
            std::fs::create_dir_all(dir)?;
        }
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{METRICS_SCHEMA}")?;
        writeln!(
            out,
            "# agent={} task={} seed={}",
            meta.agent, meta.task, meta.seed
        )?;
        writeln!(out, "{COLUMNS}")?;
        out.flush()?;
        Ok(MetricsWriter { out })
    }

    pub fn append(&mut self, r: &EpisodeRecord) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{}",
            r.episode,
            r.reward,
            r.length,
            r.norm_length,
            r.success as u8,
            r.mean_intrinsic,
            r.eps_ext,
            r.eps_int
        )?;
        self.out.flush()?;
        Ok(())
    }
}

fn parse_meta(line: &str) -> Option<RunMeta> {
    let mut agent = None;
    let mut task = None;
    let mut seed = None;
    for part in line.trim_start_matches('#').split_whitespace() {
        let (key, value) = part.split_once('=')?;
        match key {
            "agent" => agent = value.parse::<AgentKind>().ok(),
            "task" => task = value.parse::<Task>().ok(),
            "seed" => seed = value.parse::<u64>().ok(),
            _ => {}
        }
    }
    Some(RunMeta {
        agent: agent?,
        task: task?,
        seed: seed?,
    })
}

fn bad_row(path: &Path, line_no: usize) -> Error {
    Error::config(format!(
        "malformed metrics row at {}:{line_no}",
        path.display()
    ))
}

/// Read a metrics file back; rejects files without the schema stamp.
pub fn read_metrics(path: &Path) -> Result<(RunMeta, Vec<EpisodeRecord>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut meta = None;
    let mut rows = Vec::new();
    let mut saw_schema = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if i == 0 {
            if line != METRICS_SCHEMA {
                return Err(Error::config(format!(
                    "{} is not a cogngen metrics file",
                    path.display()
                )));
            }
            saw_schema = true;
            continue;
        }
        if line.starts_with('#') {
            if meta.is_none() {
                meta = parse_meta(line);
            }
            continue;
        }
        if line.is_empty() || line == COLUMNS {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(bad_row(path, i + 1));
        }
        let parse_f = |s: &str| s.parse::<f64>().map_err(|_| bad_row(path, i + 1));
        rows.push(EpisodeRecord {
            episode: fields[0].parse().map_err(|_| bad_row(path, i + 1))?,
            reward: parse_f(fields[1])?,
            length: fields[2].parse().map_err(|_| bad_row(path, i + 1))?,
            norm_length: parse_f(fields[3])?,
            success: fields[4] == "1",
            mean_intrinsic: parse_f(fields[5])?,
            eps_ext: parse_f(fields[6])?,
            eps_int: parse_f(fields[7])?,
        });
    }
    debug_assert!(saw_schema);
    let meta = meta.ok_or_else(|| {
        Error::config(format!("{} is missing its run identity line", path.display()))
    })?;
    Ok((meta, rows))
}
