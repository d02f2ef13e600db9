use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::OptimizerParams;
use crate::eval::EvalDataset;
use crate::stats::{auc, mean, sample_sd, standard_error, two_sample_ttest, RunRecord, TTestResult};
use crate::{Error, Result};

use super::config::ExperimentConfig;
use super::run::run_single;

#[derive(Clone, Debug, PartialEq)]
pub struct SettingResult {
    pub params: OptimizerParams,
    pub records: Vec<RunRecord>,
    /// Per-run area under the learning curve.
    pub aucs: Vec<f64>,
    pub mean_auc: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub settings: Vec<SettingResult>,
    /// Index of the setting with the lowest mean AUC.
    pub best: usize,
}

impl SweepResult {
    pub fn best(&self) -> &SettingResult {
        &self.settings[self.best]
    }

    /// Settings sharing the best betas, by increasing step size.
    pub fn sensitivity(&self) -> Vec<&SettingResult> {
        let b = self.best().params;
        let mut out: Vec<&SettingResult> = self
            .settings
            .iter()
            .filter(|s| s.params.beta1 == b.beta1 && s.params.beta2 == b.beta2)
            .collect();
        out.sort_by(|x, y| x.params.step_size.total_cmp(&y.params.step_size));
        out
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// Runs every grid setting for `cfg.runs` seeds. Results do not depend on
/// the worker count.
pub fn run_sweep(cfg: &ExperimentConfig, dataset: Option<&EvalDataset>) -> Result<SweepResult> {
    cfg.validate()?;
    let settings = cfg.settings();
    let jobs: Vec<(usize, usize)> = (0..settings.len())
        .flat_map(|s| (0..cfg.runs).map(move |r| (s, r)))
        .collect();
    let records: Vec<RunRecord> = pool(cfg.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(s, r)| run_single(cfg, settings[s], cfg.run_seed(r), dataset))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut out = Vec::with_capacity(settings.len());
    let mut it = records.into_iter();
    for params in settings {
        let records: Vec<RunRecord> = it.by_ref().take(cfg.runs).collect();
        let aucs = records.iter().map(|r| auc(&r.per_episode)).collect::<Result<Vec<_>>>()?;
        out.push(SettingResult {
            params,
            mean_auc: mean(&aucs),
            stderr: standard_error(&aucs),
            records,
            aucs,
        });
    }
    let best = out
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.mean_auc.total_cmp(&b.mean_auc))
        .map(|(i, _)| i)
        .ok_or(Error::Empty("grid"))?;
    Ok(SweepResult { settings: out, best })
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub a: SweepResult,
    pub b: SweepResult,
    /// Best-setting AUCs of `a` against those of `b`.
    pub ttest: TTestResult,
}

/// Sweeps two configurations and t-tests their best settings' AUCs.
pub fn compare(a: &ExperimentConfig, b: &ExperimentConfig, dataset: Option<&EvalDataset>) -> Result<Comparison> {
    if a.runs != b.runs {
        return Err(Error::RunCountMismatch(a.runs, b.runs));
    }
    if a.task != b.task || a.episodes != b.episodes {
        return Err(Error::InvalidConfig("compared configs must share task and episode count".into()));
    }
    let sa = run_sweep(a, dataset)?;
    let sb = run_sweep(b, dataset)?;
    let ttest = two_sample_ttest(&sa.best().aucs, &sb.best().aucs)?;
    Ok(Comparison { a: sa, b: sb, ttest })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeAxis {
    /// One hidden layer of 5, 10, 25, 50 or 75 units.
    Units,
    /// One to four hidden layers of 25 units.
    Layers,
}

impl SizeAxis {
    pub fn sizes(self) -> Vec<(usize, Vec<usize>)> {
        match self {
            SizeAxis::Units => [5, 10, 25, 50, 75].into_iter().map(|u| (u, vec![u])).collect(),
            SizeAxis::Layers => (1..=4).map(|l| (l, vec![25; l])).collect(),
        }
    }
}

impl std::str::FromStr for SizeAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "units" => Ok(SizeAxis::Units),
            "layers" => Ok(SizeAxis::Layers),
            _ => Err(Error::InvalidConfig(format!("unknown size axis `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SizeRow {
    pub size: usize,
    pub best: OptimizerParams,
    /// Time-averaged interference of each run at the best setting.
    pub per_run: Vec<f64>,
    pub mean_pi: f64,
    pub sd: f64,
}

/// For each network size, sweeps step sizes, then summarizes the
/// time-averaged interference of the best setting across runs.
pub fn network_size_sweep(cfg: &ExperimentConfig, axis: SizeAxis, dataset: &EvalDataset) -> Result<Vec<SizeRow>> {
    let mut rows = Vec::new();
    for (size, hidden) in axis.sizes() {
        let mut c = cfg.clone();
        c.hidden_layers = hidden;
        c.measure_interference = true;
        let sweep = run_sweep(&c, Some(dataset))?;
        let best = sweep.best();
        let per_run: Vec<f64> = best.records.iter().filter_map(RunRecord::time_averaged_interference).collect();
        if per_run.is_empty() {
            return Err(Error::Empty("interference snapshots"));
        }
        rows.push(SizeRow {
            size,
            best: best.params,
            mean_pi: mean(&per_run),
            sd: sample_sd(&per_run),
            per_run,
        });
    }
    Ok(rows)
}
