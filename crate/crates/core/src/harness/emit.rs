//! CSV output. Floats use Rust's shortest round-trip formatting, so equal
//! results give byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::net::ResponseRow;
use crate::stats::{aggregate, mean, smooth, standard_error, RunRecord, TTestResult};
use crate::{Error, Result};

use super::sweep::{SettingResult, SizeRow};

pub const SMOOTHING_WINDOW: usize = 10;

/// Writes `header` then one line per row.
pub fn write_csv<I, S>(path: &Path, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(row.as_ref());
        text.push('\n');
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Header and rows of a comma-separated file.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            msg: "empty file".into(),
        })?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let rows = lines.map(|l| l.split(',').map(|s| s.trim().to_string()).collect()).collect();
    Ok((header, rows))
}

/// Reads the named column as numbers.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let (header, rows) = read_csv(path)?;
    let parse_err = |msg: String| Error::Parse {
        path: path.to_path_buf(),
        msg,
    };
    let idx = header
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| parse_err(format!("no `{column}` column")))?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            r.get(idx)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| parse_err(format!("row {}: bad `{column}` value", i + 1)))
        })
        .collect()
}

/// Each run smoothed, then mean and standard error per episode.
pub fn learning_curve(records: &[RunRecord]) -> Result<(Vec<f64>, Vec<f64>)> {
    let smoothed = records
        .iter()
        .map(|r| smooth(&r.per_episode, SMOOTHING_WINDOW))
        .collect::<Result<Vec<_>>>()?;
    aggregate(&smoothed)
}

pub fn write_learning_curve(path: &Path, records: &[RunRecord]) -> Result<()> {
    let (m, se) = learning_curve(records)?;
    write_csv(
        path,
        "episode,mean,stderr",
        m.iter().zip(&se).enumerate().map(|(i, (m, s))| format!("{},{m},{s}", i + 1)),
    )
}

pub fn write_sensitivity(path: &Path, slice: &[&SettingResult]) -> Result<()> {
    write_csv(
        path,
        "step_size,mean_auc,stderr",
        slice.iter().map(|s| format!("{},{},{}", s.params.step_size, s.mean_auc, s.stderr)),
    )
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Every grid setting with its AUC summary.
pub fn write_sweep_summary(path: &Path, settings: &[SettingResult]) -> Result<()> {
    write_csv(
        path,
        "step_size,beta1,beta2,mean_auc,stderr,diverged_runs",
        settings.iter().map(|s| {
            format!(
                "{},{},{},{},{},{}",
                s.params.step_size,
                opt(s.params.beta1),
                opt(s.params.beta2),
                s.mean_auc,
                s.stderr,
                s.records.iter().filter(|r| r.diverged).count()
            )
        }),
    )
}

pub fn write_aucs(path: &Path, setting: &SettingResult) -> Result<()> {
    write_csv(path, "run,auc", setting.aucs.iter().enumerate().map(|(i, a)| format!("{i},{a}")))
}

/// Mean and standard error of the snapshot interference at each measured
/// episode, over the runs that produced a snapshot there.
pub fn interference_curve(records: &[RunRecord]) -> Vec<(usize, f64, f64)> {
    let mut by_episode: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for snap in records.iter().filter_map(|r| r.snapshots.as_ref()).flatten() {
        by_episode.entry(snap.episode_index).or_default().push(snap.mean_pairwise_interference);
    }
    by_episode
        .into_iter()
        .map(|(ep, v)| (ep, mean(&v), standard_error(&v)))
        .collect()
}

pub fn write_interference(path: &Path, records: &[RunRecord]) -> Result<()> {
    write_csv(
        path,
        "episode,mean_pi,stderr",
        interference_curve(records).into_iter().map(|(e, m, s)| format!("{e},{m},{s}")),
    )
}

pub fn write_net_size(path: &Path, rows: &[SizeRow]) -> Result<()> {
    write_csv(
        path,
        "size,mean_pi,sd",
        rows.iter().map(|r| format!("{},{},{}", r.size, r.mean_pi, r.sd)),
    )
}

pub fn write_runs(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut rows = Vec::new();
    for (i, r) in records.iter().enumerate() {
        for (e, v) in r.per_episode.iter().enumerate() {
            rows.push(format!("{i},{},{v},{}", e + 1, r.diverged));
        }
    }
    write_csv(path, "run,episode,value,diverged", rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TTestRow {
    pub task: String,
    pub system: String,
    pub preprocessing_a: String,
    pub preprocessing_b: String,
    pub result: TTestResult,
}

pub fn write_ttest(path: &Path, rows: &[TTestRow]) -> Result<()> {
    write_csv(
        path,
        "task,system,preprocessing_a,preprocessing_b,t,df,p,significant",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{},{}",
                r.task,
                r.system,
                r.preprocessing_a,
                r.preprocessing_b,
                r.result.t_statistic,
                r.result.degrees_of_freedom,
                r.result.p_value,
                r.result.significant_at_5pct
            )
        }),
    )
}

pub fn write_response_map(path: &Path, rows: &[ResponseRow]) -> Result<()> {
    let mut text = Vec::with_capacity(rows.len());
    for r in rows {
        let mut s = String::new();
        let _ = write!(s, "{},{},{},{}", r.unit, r.x0, r.x1, r.activation);
        text.push(s);
    }
    write_csv(path, "unit,x0,x1,activation", text)
}
