//! Versioned CSV/JSON writers. Every CSV starts with a `# glycemic-<kind> v<N>`
//! comment line; every JSON document carries a `version` field.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use glycemic_core::metrics::{MetricsReport, TrajectoryRow};
use glycemic_core::td3::EpisodeEnd;
use serde::Serialize;

pub const CSV_FORMAT_VERSION: u32 = 1;
pub const JSON_FORMAT_VERSION: u32 = 1;

pub const TRAJECTORY_COLUMNS: [&str; 12] = [
    "time_min",
    "G_mgdl",
    "e",
    "de",
    "u_mU_per_min",
    "reward",
    "reward_base",
    "penalty_i",
    "penalty_c",
    "meal_g",
    "terminated",
    "truncated",
];

pub const METRIC_COLUMNS: [&str; 11] = [
    "time_in_range",
    "min_g",
    "max_g",
    "undershoot_below_ref",
    "overshoot_above_high",
    "total_insulin_u",
    "mean_u_mU_per_min",
    "mean_u_U_per_h",
    "episode_return",
    "duration_min",
    "termination",
];

/// Number of leading metric columns that are numeric (all but `termination`).
pub const NUMERIC_METRICS: usize = 10;

pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn end_name(end: EpisodeEnd) -> &'static str {
    match end {
        EpisodeEnd::Terminated => "terminated",
        EpisodeEnd::Truncated => "truncated",
    }
}

pub fn trajectory_fields(r: &TrajectoryRow) -> Vec<String> {
    vec![
        num(r.time_min),
        num(r.g_mgdl),
        num(r.e),
        num(r.de),
        num(r.u_mu_per_min),
        num(r.reward),
        num(r.reward_base),
        num(r.penalty_i),
        num(r.penalty_c),
        num(r.meal_g),
        r.terminated.to_string(),
        r.truncated.to_string(),
    ]
}

pub fn metric_values(m: &MetricsReport) -> [f64; NUMERIC_METRICS] {
    [
        m.time_in_range,
        m.min_g,
        m.max_g,
        m.undershoot_below_ref,
        m.overshoot_above_high,
        m.total_insulin_u,
        m.mean_u_mu_per_min,
        m.mean_u_u_per_h,
        m.episode_return,
        m.duration_min,
    ]
}

pub fn metric_fields(m: &MetricsReport) -> Vec<String> {
    let mut v: Vec<String> = metric_values(m).iter().map(|x| num(*x)).collect();
    v.push(end_name(m.termination).to_string());
    v
}

/// A CSV table built in memory and written in one go.
pub struct Table {
    kind: &'static str,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(kind: &'static str, header: impl IntoIterator<Item = S>) -> Self {
        Table {
            kind,
            header: header.into_iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = format!("# glycemic-{} v{CSV_FORMAT_VERSION}\n", self.kind).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.header)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        Ok(buf)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }
}

pub fn trajectory_table(rows: &[TrajectoryRow]) -> Table {
    let mut t = Table::new("trajectory", TRAJECTORY_COLUMNS);
    for r in rows {
        t.push(trajectory_fields(r));
    }
    t
}

/// Writes via a sibling temporary file so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    version: u32,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, body: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&Versioned {
        version: JSON_FORMAT_VERSION,
        body,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}
