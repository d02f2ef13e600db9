use crate::agent::{Agent, Learner, OptimizerParams};
use crate::env::{energy_pumping_policy, Environment, MountainCarState, SAFETY_CAP};
use crate::eval::{build_eval_dataset, interference_schedule, pairwise_interference, rve, EvalDataset, InterferenceSnapshot};
use crate::net::Network;
use crate::stats::RunRecord;
use crate::{seeded_stream, streams, Error, Result, SeededRng};

use super::config::ExperimentConfig;

/// The prediction dataset named by the config: loaded from disk when a path
/// is set, otherwise built from the configured walk. `None` for control.
pub fn prepare_dataset(cfg: &ExperimentConfig) -> Result<Option<EvalDataset>> {
    if !cfg.task.is_prediction() {
        return Ok(None);
    }
    if let Some(path) = &cfg.dataset.path {
        return EvalDataset::read_csv(path).map(Some);
    }
    let mut rng = seeded_stream(cfg.dataset.seed, streams::ENV);
    build_eval_dataset::<MountainCarState, _>(&energy_pumping_policy, cfg.dataset.walk_steps, cfg.dataset.sample_size, &mut rng)
        .map(Some)
}

struct RunState {
    agent: Agent,
    env: Box<dyn Environment>,
    env_rng: SeededRng,
    agent_rng: SeededRng,
}

impl RunState {
    fn new(cfg: &ExperimentConfig, params: OptimizerParams, seed: u64) -> Result<Self> {
        let mut net_rng = seeded_stream(seed, streams::NET);
        let net = Network::init(cfg.network_spec(), &mut net_rng)?;
        let learner = Learner::new(cfg.learner_config(params), net)?;
        Ok(RunState {
            agent: Agent::new(learner, cfg.featurizer()?)?,
            env: cfg.task.environment(),
            env_rng: seeded_stream(seed, streams::ENV),
            agent_rng: seeded_stream(seed, streams::AGENT),
        })
    }

    fn prediction_episode(&mut self) -> Result<()> {
        self.agent.begin_episode(self.env.as_mut(), &mut self.env_rng, &mut self.agent_rng, false)?;
        for _ in 0..SAFETY_CAP {
            if self.agent.step_prediction(self.env.as_mut(), &energy_pumping_policy, &mut self.agent_rng)?.terminal {
                return Ok(());
            }
        }
        Err(Error::SafetyCapExceeded(SAFETY_CAP))
    }

    /// Returns the number of steps taken.
    fn control_episode(&mut self, cutoff: usize) -> Result<usize> {
        self.agent.begin_episode(self.env.as_mut(), &mut self.env_rng, &mut self.agent_rng, true)?;
        for steps in 1..=cutoff {
            if self.agent.step_control(self.env.as_mut(), &mut self.agent_rng)?.terminal {
                return Ok(steps);
            }
        }
        Ok(cutoff)
    }

    fn rve(&mut self, dataset: &EvalDataset) -> Result<f64> {
        rve(self.agent.learner.net_mut(), &mut self.agent.featurizer, dataset)
    }

    fn snapshot(&mut self, episode_index: usize, dataset: &EvalDataset) -> Option<InterferenceSnapshot> {
        // a snapshot where every gradient vanished carries no information
        let report = pairwise_interference(self.agent.learner.net_mut(), &mut self.agent.featurizer, dataset).ok()?;
        Some(InterferenceSnapshot {
            episode_index,
            mean_pairwise_interference: report.mean,
        })
    }
}

/// One seeded run of the configured task.
///
/// Control records steps per episode; a run whose parameters stop being
/// finite is marked diverged and its remaining episodes count as cutoffs.
/// Prediction records the value error after each episode; a run whose error
/// becomes non-finite or exceeds `divergence_factor` times its initial error
/// is marked diverged and saturates at that ceiling.
pub fn run_single(cfg: &ExperimentConfig, params: OptimizerParams, seed: u64, dataset: Option<&EvalDataset>) -> Result<RunRecord> {
    let mut st = RunState::new(cfg, params, seed)?;
    let mut per_episode = Vec::with_capacity(cfg.episodes);
    let mut diverged = false;

    if cfg.task.is_prediction() {
        let dataset = dataset.ok_or(Error::Empty("eval dataset"))?;
        let ceiling = cfg.divergence_factor * st.rve(dataset)?;
        let schedule = if cfg.measure_interference {
            interference_schedule(cfg.episodes)
        } else {
            Vec::new()
        };
        let mut snapshots = Vec::new();
        if schedule.first() == Some(&0) {
            snapshots.extend(st.snapshot(0, dataset));
        }
        for ep in 1..=cfg.episodes {
            if diverged {
                per_episode.push(ceiling);
                continue;
            }
            st.prediction_episode()?;
            let e = st.rve(dataset)?;
            if e.is_finite() && e <= ceiling {
                per_episode.push(e);
            } else {
                diverged = true;
                per_episode.push(ceiling);
                continue;
            }
            if schedule.binary_search(&ep).is_ok() {
                snapshots.extend(st.snapshot(ep, dataset));
            }
        }
        return Ok(RunRecord {
            run_seed: seed,
            per_episode,
            diverged,
            snapshots: cfg.measure_interference.then_some(snapshots),
        });
    }

    let cutoff = cfg.control_cutoff();
    for _ in 0..cfg.episodes {
        if diverged {
            per_episode.push(cutoff as f64);
            continue;
        }
        let steps = st.control_episode(cutoff)?;
        if st.agent.learner.net().all_finite() {
            per_episode.push(steps as f64);
        } else {
            diverged = true;
            per_episode.push(cutoff as f64);
        }
    }
    Ok(RunRecord {
        run_seed: seed,
        per_episode,
        diverged,
        snapshots: None,
    })
}

/// Trains for `cfg.episodes` episodes and returns the final network; used
/// for response maps.
pub fn train_network(cfg: &ExperimentConfig, params: OptimizerParams, seed: u64) -> Result<Network> {
    let mut st = RunState::new(cfg, params, seed)?;
    for _ in 0..cfg.episodes {
        if cfg.task.is_prediction() {
            st.prediction_episode()?;
        } else {
            st.control_episode(cfg.control_cutoff())?;
        }
    }
    Ok(st.agent.learner.net().clone())
}
