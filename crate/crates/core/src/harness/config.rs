use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{LearnerConfig, OptimizerParams, System};
use crate::env::{
    Acrobot, AcrobotState, Dynamics, EpisodeConfig, Environment, MountainCar, MountainCarState,
    NUM_ACTIONS,
};
use crate::featurize::{BoundsSpec, Featurizer, Preprocessing, TileCoder, TileCoderConfig};
use crate::net::NetworkSpec;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    McPrediction,
    McControl,
    AcrobotControl,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::McPrediction, Task::McControl, Task::AcrobotControl];

    pub fn name(self) -> &'static str {
        match self {
            Task::McPrediction => "mc_prediction",
            Task::McControl => "mc_control",
            Task::AcrobotControl => "acrobot_control",
        }
    }

    pub fn is_prediction(self) -> bool {
        self == Task::McPrediction
    }

    pub fn episode_config(self) -> EpisodeConfig {
        match self {
            Task::McPrediction => EpisodeConfig::MOUNTAIN_CAR_PREDICTION,
            Task::McControl => EpisodeConfig::MOUNTAIN_CAR_CONTROL,
            Task::AcrobotControl => EpisodeConfig::ACROBOT,
        }
    }

    pub fn bounds(self) -> BoundsSpec {
        match self {
            Task::McPrediction | Task::McControl => MountainCarState::bounds(),
            Task::AcrobotControl => AcrobotState::bounds(),
        }
    }

    pub fn environment(self) -> Box<dyn Environment> {
        match self {
            Task::McPrediction | Task::McControl => Box::new(MountainCar::default()),
            Task::AcrobotControl => Box::new(Acrobot::default()),
        }
    }

    pub fn bins_per_dim(self) -> usize {
        match self {
            Task::AcrobotControl => 32,
            _ => 20,
        }
    }

    pub fn tile_coder(self) -> TileCoderConfig {
        match self {
            Task::AcrobotControl => TileCoderConfig::ACROBOT,
            _ => TileCoderConfig::MOUNTAIN_CAR,
        }
    }

    pub fn hidden_units(self) -> usize {
        match self {
            Task::AcrobotControl => 100,
            _ => 50,
        }
    }

    pub fn outputs(self) -> usize {
        if self.is_prediction() {
            1
        } else {
            NUM_ACTIONS
        }
    }

    /// Exponents `c` of the full-scale step-size grid `2^-c`.
    fn step_exponents(self) -> std::ops::RangeInclusive<i32> {
        match self {
            Task::McPrediction => 3..=18,
            Task::McControl => 1..=18,
            Task::AcrobotControl => 5..=18,
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown task `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Full grids, 30 runs, 10M-step dataset walk.
    Full,
    /// 10 runs, shorter runs, every other step-size exponent.
    #[default]
    Desk,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Profile::Full),
            "desk" => Ok(Profile::Desk),
            _ => Err(Error::InvalidConfig(format!("unknown profile `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub walk_steps: usize,
    pub sample_size: usize,
    pub seed: u64,
    /// Reuse a dataset written by `eval-dataset` instead of building one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

/// Everything needed to reproduce a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub preprocessing: Preprocessing,
    pub system: System,
    pub hidden_layers: Vec<usize>,
    pub step_size_grid: Vec<f64>,
    pub beta1_grid: Vec<f64>,
    pub beta2_grid: Vec<f64>,
    pub episodes: usize,
    pub runs: usize,
    pub base_seed: u64,
    pub measure_interference: bool,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub target_sync_period: usize,
    pub epsilon: f64,
    /// Prediction runs saturate at this multiple of the initial value error.
    pub divergence_factor: f64,
    pub dataset: DatasetConfig,
    pub workers: usize,
}

pub const FULL_BETA1: [f64; 3] = [0.9, 0.99, 0.999];
pub const FULL_BETA2: [f64; 4] = [0.9, 0.99, 0.999, 0.9999];

impl ExperimentConfig {
    pub fn profile(profile: Profile, task: Task, preprocessing: Preprocessing, system: System) -> Self {
        let exps: Vec<i32> = match profile {
            Profile::Full => task.step_exponents().collect(),
            Profile::Desk => task.step_exponents().step_by(2).collect(),
        };
        let (runs, episodes, walk_steps) = match (profile, task) {
            (Profile::Full, _) => (30, 500, 10_000_000),
            (Profile::Desk, Task::AcrobotControl) => (10, 200, 100_000),
            (Profile::Desk, _) => (10, 300, 100_000),
        };
        let (beta1_grid, beta2_grid) = if system.uses_adam() {
            (FULL_BETA1.to_vec(), FULL_BETA2.to_vec())
        } else {
            (Vec::new(), Vec::new())
        };
        ExperimentConfig {
            task,
            preprocessing,
            system,
            hidden_layers: vec![task.hidden_units()],
            step_size_grid: exps.into_iter().map(|c| 2f64.powi(-c)).collect(),
            beta1_grid,
            beta2_grid,
            episodes,
            runs,
            base_seed: 0,
            measure_interference: false,
            batch_size: 32,
            buffer_capacity: 2000,
            target_sync_period: 100,
            epsilon: 0.1,
            divergence_factor: 10.0,
            dataset: DatasetConfig {
                walk_steps,
                sample_size: 500,
                seed: 0x5eed_da7a,
                path: None,
            },
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.step_size_grid.is_empty() || self.step_size_grid.iter().any(|a| !(*a > 0.0)) {
            return bad("step-size grid must be non-empty and positive".into());
        }
        let has_betas = !self.beta1_grid.is_empty() && !self.beta2_grid.is_empty();
        let no_betas = self.beta1_grid.is_empty() && self.beta2_grid.is_empty();
        if self.system.uses_adam() && !has_betas {
            return bad(format!("{} needs beta1 and beta2 grids", self.system));
        }
        if !self.system.uses_adam() && !no_betas {
            return bad(format!("{} takes no beta grids", self.system));
        }
        if self.episodes == 0 || self.runs == 0 {
            return bad("episodes and runs must be positive".into());
        }
        if self.measure_interference && !self.task.is_prediction() {
            return bad("interference is only defined for prediction".into());
        }
        if !(self.divergence_factor > 1.0) {
            return bad("divergence factor must exceed 1".into());
        }
        self.network_spec().validate()?;
        for p in self.settings() {
            self.learner_config(p).validate()?;
        }
        Ok(())
    }

    pub fn network_spec(&self) -> NetworkSpec {
        let input_length = match self.preprocessing {
            Preprocessing::Raw => self.task.bounds().dims(),
            Preprocessing::Discretize => self.task.bounds().dims() * self.task.bins_per_dim(),
            Preprocessing::Tilecode => self.task.tile_coder().capacity,
        };
        NetworkSpec::new(input_length, self.hidden_layers.clone(), self.task.outputs())
    }

    /// A fresh featurizer; each run needs its own.
    pub fn featurizer(&self) -> Result<Featurizer> {
        let bounds = self.task.bounds();
        Ok(match self.preprocessing {
            Preprocessing::Raw => Featurizer::Raw(bounds),
            Preprocessing::Discretize => Featurizer::Discretize {
                bounds,
                bins: self.task.bins_per_dim(),
            },
            Preprocessing::Tilecode => Featurizer::TileCode(TileCoder::new(bounds, self.task.tile_coder())?),
        })
    }

    pub fn learner_config(&self, params: OptimizerParams) -> LearnerConfig {
        LearnerConfig {
            system: self.system,
            params,
            batch_size: self.batch_size,
            buffer_capacity: self.buffer_capacity,
            target_sync_period: self.target_sync_period,
            epsilon: self.epsilon,
            gamma: self.task.episode_config().discount,
        }
    }

    /// Cartesian product of the grids, step-size outermost.
    pub fn settings(&self) -> Vec<OptimizerParams> {
        let mut out = Vec::new();
        for &a in &self.step_size_grid {
            if self.system.uses_adam() {
                for &b1 in &self.beta1_grid {
                    for &b2 in &self.beta2_grid {
                        out.push(OptimizerParams::adam(a, b1, b2));
                    }
                }
            } else {
                out.push(OptimizerParams::sgd(a));
            }
        }
        out
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }

    /// Metric value of an episode that never finished (control) or whose
    /// run diverged; prediction ceilings are per run.
    pub fn control_cutoff(&self) -> usize {
        self.task.episode_config().cutoff_steps
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json_file(path: &Path) -> Result<ConfigOverrides> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }
}

/// Partial configuration, as read from a config file or the command line.
/// Unset fields fall back to the profile defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub profile: Option<Profile>,
    pub task: Option<Task>,
    pub preprocessing: Option<Preprocessing>,
    pub system: Option<System>,
    pub hidden_layers: Option<Vec<usize>>,
    pub step_size_grid: Option<Vec<f64>>,
    pub beta1_grid: Option<Vec<f64>>,
    pub beta2_grid: Option<Vec<f64>>,
    pub episodes: Option<usize>,
    pub runs: Option<usize>,
    pub base_seed: Option<u64>,
    pub measure_interference: Option<bool>,
    pub batch_size: Option<usize>,
    pub buffer_capacity: Option<usize>,
    pub target_sync_period: Option<usize>,
    pub epsilon: Option<f64>,
    pub divergence_factor: Option<f64>,
    pub dataset: Option<DatasetConfig>,
    pub dataset_path: Option<PathBuf>,
    pub walk_steps: Option<usize>,
    pub sample_size: Option<usize>,
    pub workers: Option<usize>,
}

impl ConfigOverrides {
    /// Fields set in `other` win.
    pub fn merge(self, other: ConfigOverrides) -> ConfigOverrides {
        macro_rules! pick {
            ($($f:ident),*) => {
                ConfigOverrides { $($f: other.$f.or(self.$f)),* }
            };
        }
        pick!(
            profile, task, preprocessing, system, hidden_layers, step_size_grid, beta1_grid,
            beta2_grid, episodes, runs, base_seed, measure_interference, batch_size,
            buffer_capacity, target_sync_period, epsilon, divergence_factor, dataset,
            dataset_path, walk_steps, sample_size, workers
        )
    }

    pub fn resolve(self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::profile(
            self.profile.unwrap_or_default(),
            self.task.unwrap_or(Task::McPrediction),
            self.preprocessing.unwrap_or(Preprocessing::Raw),
            self.system.unwrap_or(System::Sgd),
        );
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        set!(
            hidden_layers, step_size_grid, beta1_grid, beta2_grid, episodes, runs, base_seed,
            measure_interference, batch_size, buffer_capacity, target_sync_period, epsilon,
            divergence_factor, dataset, workers
        );
        if let Some(p) = self.dataset_path {
            cfg.dataset.path = Some(p);
        }
        if let Some(n) = self.walk_steps {
            cfg.dataset.walk_steps = n;
        }
        if let Some(n) = self.sample_size {
            cfg.dataset.sample_size = n;
        }
        cfg.workers = cfg.workers.max(1);
        cfg.validate()?;
        Ok(cfg)
    }
}
