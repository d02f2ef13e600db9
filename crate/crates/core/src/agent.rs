//! TD(0) prediction and Sarsa(0) control learners.
//!
//! The five learning systems are compositions of the same pieces: an
//! optimizer (SGD or Adam), an optional replay buffer and an optional target
//! network. Replay variants learn only from sampled mini-batches, one per
//! environment step, once the buffer holds a full batch.

use rand::seq::index;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::featurize::{FeatureVector, Featurizer};
use crate::net::Network;
use crate::optim::{Adam, AdamState, Optimizer, Sgd, SgdConfig};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Sgd,
    SgdEr,
    Adam,
    AdamEr,
    AdamErTn,
}

impl System {
    pub const ALL: [System; 5] = [
        System::Sgd,
        System::SgdEr,
        System::Adam,
        System::AdamEr,
        System::AdamErTn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            System::Sgd => "sgd",
            System::SgdEr => "sgd_er",
            System::Adam => "adam",
            System::AdamEr => "adam_er",
            System::AdamErTn => "adam_er_tn",
        }
    }

    pub fn uses_adam(self) -> bool {
        matches!(self, System::Adam | System::AdamEr | System::AdamErTn)
    }

    pub fn uses_replay(self) -> bool {
        matches!(self, System::SgdEr | System::AdamEr | System::AdamErTn)
    }

    pub fn uses_target(self) -> bool {
        self == System::AdamErTn
    }
}

impl std::fmt::Display for System {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        System::ALL
            .into_iter()
            .find(|sys| sys.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown system `{s}`")))
    }
}

/// Step-size plus Adam's decay rates where the system uses Adam.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerParams {
    pub step_size: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
}

impl OptimizerParams {
    pub fn sgd(step_size: f64) -> Self {
        OptimizerParams {
            step_size,
            beta1: None,
            beta2: None,
        }
    }

    pub fn adam(step_size: f64, beta1: f64, beta2: f64) -> Self {
        OptimizerParams {
            step_size,
            beta1: Some(beta1),
            beta2: Some(beta2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub system: System,
    pub params: OptimizerParams,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub target_sync_period: usize,
    /// Exploration rate; unused by prediction.
    pub epsilon: f64,
    pub gamma: f64,
}

impl LearnerConfig {
    pub fn new(system: System, params: OptimizerParams) -> Self {
        LearnerConfig {
            system,
            params,
            batch_size: 32,
            buffer_capacity: 2000,
            target_sync_period: 100,
            epsilon: 0.1,
            gamma: crate::env::GAMMA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let adam_fields = self.params.beta1.is_some() && self.params.beta2.is_some();
        let no_adam_fields = self.params.beta1.is_none() && self.params.beta2.is_none();
        if self.system.uses_adam() && !adam_fields {
            return Err(Error::InvalidConfig(format!("{} needs beta1 and beta2", self.system)));
        }
        if !self.system.uses_adam() && !no_adam_fields {
            return Err(Error::InvalidConfig(format!("{} takes no beta parameters", self.system)));
        }
        if self.system.uses_replay() && (self.batch_size == 0 || self.buffer_capacity < self.batch_size) {
            return Err(Error::InvalidConfig(format!(
                "batch {} must be positive and fit the buffer {}",
                self.batch_size, self.buffer_capacity
            )));
        }
        if self.system.uses_target() && self.target_sync_period == 0 {
            return Err(Error::InvalidConfig("target sync period must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidConfig(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        Ok(())
    }

    fn optimizer(&self, params: usize) -> Result<Box<dyn Optimizer>> {
        let p = self.params;
        Ok(match (p.beta1, p.beta2) {
            (Some(b1), Some(b2)) => Box::new(Adam(AdamState::new(params, p.step_size, b1, b2)?)),
            _ => Box::new(Sgd(SgdConfig::new(p.step_size)?)),
        })
    }
}

/// One step of experience. `action` and `next_action` index network
/// outputs (always 0 for state-value prediction).
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s_features: FeatureVector,
    pub action: usize,
    pub reward: f64,
    pub s_next_features: FeatureVector,
    pub next_action: usize,
    pub terminal: bool,
}

/// Fixed-capacity FIFO ring of transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity),
            next: 0,
            inserted: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, tr: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(tr);
        } else {
            self.items[self.next] = tr;
        }
        self.next = (self.next + 1) % self.capacity;
        self.inserted += 1;
    }

    /// Storage slot `i`.
    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// `batch` distinct slots drawn uniformly.
    pub fn sample_slots<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.len() < batch {
            return Err(Error::BufferUnderfull {
                len: self.items.len(),
                batch,
            });
        }
        Ok(index::sample(rng, self.items.len(), batch).into_vec())
    }
}

/// Frozen copy of the learned network, refreshed every `period` steps.
#[derive(Clone, Debug)]
pub struct TargetNetwork {
    pub net: Network,
    pub steps_since_sync: usize,
    pub period: usize,
}

impl TargetNetwork {
    pub fn new(source: &Network, period: usize) -> Self {
        TargetNetwork {
            net: source.clone(),
            steps_since_sync: 0,
            period,
        }
    }

    /// Counts one environment step; syncs when the period elapses.
    pub fn tick(&mut self, source: &Network) -> bool {
        self.steps_since_sync += 1;
        if self.steps_since_sync >= self.period {
            self.net.copy_params_from(source);
            self.steps_since_sync = 0;
            true
        } else {
            false
        }
    }
}

/// `r + gamma * V(s') - v(s)`, bootstrapping from `target` when given.
///
/// Leaves `net`'s forward cache on `s`, ready for the gradient of the taken
/// output.
pub fn td0_delta(net: &mut Network, target: Option<&mut Network>, tr: &Transition, gamma: f64) -> Result<f64> {
    let bootstrap = if tr.terminal {
        0.0
    } else {
        let boot_net = match target {
            Some(t) => t,
            None => &mut *net,
        };
        boot_net.forward(&tr.s_next_features)?[tr.next_action]
    };
    let value = net.forward(&tr.s_features)?[tr.action];
    Ok(tr.reward + gamma * bootstrap - value)
}

/// Greedy with probability `1 - epsilon` (ties broken uniformly), uniform
/// otherwise.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    if q.is_empty() {
        return Err(Error::Empty("q-values"));
    }
    if rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..q.len()));
    }
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut ties = q.iter().enumerate().filter(|(_, &v)| v == best).map(|(i, _)| i);
    let first = match ties.next() {
        Some(i) => i,
        // all NaN
        None => return Ok(rng.gen_range(0..q.len())),
    };
    let rest: Vec<usize> = ties.collect();
    if rest.is_empty() {
        return Ok(first);
    }
    let k = rng.gen_range(0..=rest.len());
    Ok(if k == 0 { first } else { rest[k - 1] })
}

/// Network, optimizer and the optional replay/target machinery of one run.
pub struct Learner {
    cfg: LearnerConfig,
    net: Network,
    target: Option<TargetNetwork>,
    optimizer: Box<dyn Optimizer>,
    buffer: Option<ReplayBuffer>,
    grad: Vec<f64>,
    updates: u64,
}

impl Learner {
    pub fn new(cfg: LearnerConfig, net: Network) -> Result<Self> {
        cfg.validate()?;
        let optimizer = cfg.optimizer(net.param_count())?;
        Ok(Learner {
            target: cfg
                .system
                .uses_target()
                .then(|| TargetNetwork::new(&net, cfg.target_sync_period)),
            buffer: cfg
                .system
                .uses_replay()
                .then(|| ReplayBuffer::new(cfg.buffer_capacity)),
            grad: vec![0.0; net.param_count()],
            optimizer,
            net,
            cfg,
            updates: 0,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn target(&self) -> Option<&TargetNetwork> {
        self.target.as_ref()
    }

    pub fn buffer(&self) -> Option<&ReplayBuffer> {
        self.buffer.as_ref()
    }

    /// Optimizer steps taken so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn values(&mut self, x: &FeatureVector) -> Result<&[f64]> {
        self.net.forward(x)
    }

    /// One optimizer step on `-delta * grad v(s)` for the fresh transition.
    pub fn online_update(&mut self, tr: &Transition) -> Result<f64> {
        let target = self.target.as_mut().map(|t| &mut t.net);
        let delta = td0_delta(&mut self.net, target, tr, self.cfg.gamma)?;
        self.grad.fill(0.0);
        self.net.accumulate_gradient(tr.action, -delta, &mut self.grad)?;
        self.optimizer.step(self.net.params_mut(), &self.grad)?;
        self.updates += 1;
        Ok(delta)
    }

    /// One optimizer step on the batch-mean pseudo-gradient of a uniformly
    /// sampled mini-batch.
    pub fn replay_update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let buffer = self.buffer.as_ref().ok_or_else(|| {
            Error::InvalidConfig(format!("{} has no replay buffer", self.cfg.system))
        })?;
        let batch = self.cfg.batch_size;
        let slots = buffer.sample_slots(batch, rng)?;
        self.grad.fill(0.0);
        let scale = 1.0 / batch as f64;
        for slot in slots {
            let tr = buffer.get(slot);
            let target = self.target.as_mut().map(|t| &mut t.net);
            let delta = td0_delta(&mut self.net, target, tr, self.cfg.gamma)?;
            self.net.accumulate_gradient(tr.action, -delta * scale, &mut self.grad)?;
        }
        self.optimizer.step(self.net.params_mut(), &self.grad)?;
        self.updates += 1;
        Ok(())
    }

    /// Routes a fresh transition to the variant's update rule and advances
    /// the target-network clock.
    pub fn observe<R: Rng + ?Sized>(&mut self, tr: Transition, rng: &mut R) -> Result<()> {
        if let Some(buffer) = self.buffer.as_mut() {
            buffer.push(tr);
            if buffer.len() >= self.cfg.batch_size {
                self.replay_update(rng)?;
            }
        } else {
            self.online_update(&tr)?;
        }
        if let Some(t) = self.target.as_mut() {
            t.tick(&self.net);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub terminal: bool,
}

/// Learner plus featurizer, driving an environment one step at a time.
pub struct Agent {
    pub learner: Learner,
    pub featurizer: Featurizer,
    // features of the current state and the action already chosen for it
    current: Option<(FeatureVector, usize)>,
}

impl Agent {
    pub fn new(learner: Learner, featurizer: Featurizer) -> Result<Self> {
        let expected = learner.net().spec().input_length;
        if featurizer.input_length() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: featurizer.input_length(),
            });
        }
        Ok(Agent {
            learner,
            featurizer,
            current: None,
        })
    }

    fn choose(&mut self, x: &FeatureVector, rng: &mut dyn RngCore) -> Result<usize> {
        let eps = self.learner.cfg.epsilon;
        let q = self.learner.values(x)?;
        epsilon_greedy(q, eps, rng)
    }

    /// Resets `env` and, for control, picks the first action.
    pub fn begin_episode(&mut self, env: &mut dyn Environment, env_rng: &mut dyn RngCore, rng: &mut dyn RngCore, control: bool) -> Result<()> {
        env.reset(env_rng);
        let x = self.featurizer.encode(env.observation())?;
        let a = if control { self.choose(&x, rng)? } else { 0 };
        self.current = Some((x, a));
        Ok(())
    }

    /// Sarsa(0): act, observe, pick the next action, learn.
    pub fn step_control(&mut self, env: &mut dyn Environment, rng: &mut dyn RngCore) -> Result<StepOutcome> {
        let (x, a) = self
            .current
            .take()
            .ok_or_else(|| Error::InvalidConfig("episode not started".into()))?;
        let (reward, terminal) = env.step(a);
        let x_next = self.featurizer.encode(env.observation())?;
        let a_next = if terminal { 0 } else { self.choose(&x_next, rng)? };
        let tr = Transition {
            s_features: x,
            action: a,
            reward,
            s_next_features: x_next.clone(),
            next_action: a_next,
            terminal,
        };
        self.learner.observe(tr, rng)?;
        self.current = (!terminal).then_some((x_next, a_next));
        Ok(StepOutcome { reward, terminal })
    }

    /// TD(0) under a fixed policy over raw observations.
    pub fn step_prediction(
        &mut self,
        env: &mut dyn Environment,
        policy: &dyn Fn(&[f64]) -> usize,
        rng: &mut dyn RngCore,
    ) -> Result<StepOutcome> {
        let (x, _) = self
            .current
            .take()
            .ok_or_else(|| Error::InvalidConfig("episode not started".into()))?;
        let action = policy(env.observation());
        let (reward, terminal) = env.step(action);
        let x_next = self.featurizer.encode(env.observation())?;
        let tr = Transition {
            s_features: x,
            action: 0,
            reward,
            s_next_features: x_next.clone(),
            next_action: 0,
            terminal,
        };
        self.learner.observe(tr, rng)?;
        self.current = (!terminal).then_some((x_next, 0));
        Ok(StepOutcome { reward, terminal })
    }
}
