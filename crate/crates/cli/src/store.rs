//! Output directory layout.
//!
//! ```text
//! OUT/config.toml     effective config; resume refuses a different one
//! OUT/records.jsonl   one ResultRecord per line, in task order
//! OUT/timings.jsonl   {point_index, size, realization, wall_time} per task
//! OUT/summary.tsv     per (point, L) aggregates
//! OUT/r1.tsv          correlator runs only
//! ```
//!
//! Records carry no timing so that identical configs give identical files;
//! wall-clock times go to the sidecar.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use u1qec::decoders::{RealizationRecord, SweepTask};

use crate::config::{RunConfig, SCHEMA_VERSION};

pub const CONFIG_FILE: &str = "config.toml";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";
pub const SUMMARY_FILE: &str = "summary.tsv";
pub const R1_FILE: &str = "r1.tsv";

const IO_ATTEMPTS: u32 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub experiment_id: String,
    #[serde(flatten)]
    pub record: RealizationRecord,
    /// Sampled error field, present when `dump_fields` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<i64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskKey {
    pub point_index: usize,
    pub size: usize,
    pub realization: usize,
}

impl From<&SweepTask> for TaskKey {
    fn from(t: &SweepTask) -> Self {
        Self { point_index: t.point_index, size: t.size, realization: t.realization }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub point_index: usize,
    pub size: usize,
    pub realization: usize,
    pub wall_time: f64,
}

pub fn retry<T>(what: &str, mut f: impl FnMut() -> std::io::Result<T>) -> Result<T> {
    let mut last = None;
    for attempt in 0..IO_ATTEMPTS {
        match f() {
            Ok(v) => return Ok(v),
            Err(e) => {
                last = Some(e);
                if attempt + 1 < IO_ATTEMPTS {
                    thread::sleep(Duration::from_millis(100 << attempt));
                }
            }
        }
    }
    Err(last.unwrap()).with_context(|| format!("{what} failed after {IO_ATTEMPTS} attempts"))
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Prepares the directory and returns the keys already on disk.
    pub fn open(&self, cfg: &RunConfig, resume: bool) -> Result<BTreeSet<TaskKey>> {
        let records = self.path(RECORDS_FILE);
        let config = self.path(CONFIG_FILE);
        if config.exists() || records.exists() {
            if !resume {
                bail!("{} already holds a run; pass --resume to continue it", self.root.display());
            }
            let stored = read_config(&config)?;
            if !same_run(&stored, cfg) {
                bail!("{} was written by a different config", config.display());
            }
            let done = repair_and_scan(&records)?;
            trim_torn_line(&self.path(TIMINGS_FILE))?;
            return Ok(done);
        }
        retry("create output dir", || fs::create_dir_all(&self.root))?;
        let text = toml::to_string(cfg).context("serializing config")?;
        retry("write config", || fs::write(&config, &text))?;
        Ok(BTreeSet::new())
    }

    pub fn append(&self, records: &[ResultRecord], timings: &[Timing]) -> Result<()> {
        append_lines(&self.path(RECORDS_FILE), records)?;
        append_lines(&self.path(TIMINGS_FILE), timings)
    }

    pub fn write(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        retry(&format!("write {}", p.display()), || fs::write(&p, text))
    }
}

fn same_run(a: &RunConfig, b: &RunConfig) -> bool {
    let strip = |c: &RunConfig| RunConfig { workers: None, ..c.clone() };
    strip(a) == strip(b)
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RunConfig::from_toml(&text).with_context(|| format!("in {}", path.display()))
}

fn append_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if items.is_empty() {
        return Ok(());
    }
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, it)?;
        buf.push(b'\n');
    }
    retry(&format!("append to {}", path.display()), || {
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        f.write_all(&buf)?;
        f.sync_data()
    })
}

/// Drops a torn last line left by an interrupted writer and returns the completed keys.
fn repair_and_scan(path: &Path) -> Result<BTreeSet<TaskKey>> {
    let mut done = BTreeSet::new();
    if !path.exists() {
        return Ok(done);
    }
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut good = 0usize;
    for line in bytes.split_inclusive(|&b| b == b'\n') {
        if line.last() != Some(&b'\n') {
            break;
        }
        let rec: ResultRecord = match serde_json::from_slice(line) {
            Ok(r) => r,
            Err(e) => bail!("{}: corrupt record at byte {good}: {e}", path.display()),
        };
        if !done.insert(TaskKey::from(&rec.record.task)) {
            bail!("{}: duplicate record for {:?}", path.display(), rec.record.task);
        }
        good += line.len();
    }
    if good < bytes.len() {
        let f = OpenOptions::new().write(true).open(path)?;
        retry("truncate torn record", || f.set_len(good as u64))?;
    }
    Ok(done)
}

fn trim_torn_line(path: &Path) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let bytes = fs::read(path)?;
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if keep < bytes.len() {
        let f = OpenOptions::new().write(true).open(path)?;
        retry("truncate torn timing", || f.set_len(keep as u64))?;
    }
    Ok(())
}

pub fn read_records(dir: &Path) -> Result<Vec<ResultRecord>> {
    let path = dir.join(RECORDS_FILE);
    let f = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let rec: ResultRecord =
            serde_json::from_str(&line).with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        if rec.schema_version != SCHEMA_VERSION {
            bail!("{}: line {} has schema_version {}", path.display(), i + 1, rec.schema_version);
        }
        out.push(rec);
    }
    Ok(out)
}
