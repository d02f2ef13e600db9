//! Classic-control dynamics: Mountain Car and Acrobot.
//!
//! Both tasks are undiscounted, pay -1 per step and 0 on the terminating
//! transition, and expose three discrete actions indexed `0..3`.

use std::f64::consts::PI;

use rand::{Rng, RngCore};

use crate::featurize::BoundsSpec;
use crate::{Error, Result};

/// Number of discrete actions in both environments.
pub const NUM_ACTIONS: usize = 3;

/// Steps after which an episode that should terminate on its own is
/// considered runaway.
pub const SAFETY_CAP: usize = 100_000;

/// Discount used by every task.
pub const GAMMA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult<S> {
    pub next_state: S,
    pub reward: f64,
    pub terminal: bool,
}

impl<S> StepResult<S> {
    fn new(next_state: S, terminal: bool) -> Self {
        StepResult {
            next_state,
            reward: if terminal { 0.0 } else { -1.0 },
            terminal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeConfig {
    pub cutoff_steps: usize,
    pub discount: f64,
}

impl EpisodeConfig {
    pub const MOUNTAIN_CAR_CONTROL: EpisodeConfig = EpisodeConfig {
        cutoff_steps: 1000,
        discount: GAMMA,
    };
    pub const ACROBOT: EpisodeConfig = EpisodeConfig {
        cutoff_steps: 500,
        discount: GAMMA,
    };
    /// Prediction episodes run to termination; the cap only guards runaways.
    pub const MOUNTAIN_CAR_PREDICTION: EpisodeConfig = EpisodeConfig {
        cutoff_steps: SAFETY_CAP,
        discount: GAMMA,
    };
}

/// State dynamics shared by the concrete environments.
pub trait Dynamics: Copy + Send + std::fmt::Debug {
    const DIMS: usize;

    fn reset<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn step(self, action: usize) -> StepResult<Self>;
    fn write_observation(&self, out: &mut [f64]);
    fn bounds() -> BoundsSpec;
}

// ---------------------------------------------------------------------------
// Mountain Car

pub const MC_MIN_POSITION: f64 = -1.2;
pub const MC_MAX_POSITION: f64 = 0.6;
pub const MC_MAX_SPEED: f64 = 0.07;
pub const MC_GOAL_POSITION: f64 = 0.5;
const MC_FORCE: f64 = 0.001;
const MC_GRAVITY: f64 = 0.0025;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Throttle {
    Back = 0,
    None = 1,
    Forward = 2,
}

impl Throttle {
    pub fn from_index(action: usize) -> Throttle {
        match action {
            0 => Throttle::Back,
            1 => Throttle::None,
            2 => Throttle::Forward,
            _ => panic!("mountain car action {action} out of range"),
        }
    }

    fn force(self) -> f64 {
        match self {
            Throttle::Back => -1.0,
            Throttle::None => 0.0,
            Throttle::Forward => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MountainCarState {
    pub position: f64,
    pub velocity: f64,
}

impl MountainCarState {
    pub fn new(position: f64, velocity: f64) -> Self {
        MountainCarState { position, velocity }
    }

    pub fn from_observation(obs: &[f64]) -> Self {
        MountainCarState::new(obs[0], obs[1])
    }
}

pub fn mountain_car_reset<R: Rng + ?Sized>(rng: &mut R) -> MountainCarState {
    let u: f64 = rng.gen();
    MountainCarState::new(-0.6 + 0.2 * u, 0.0)
}

pub fn mountain_car_step(s: MountainCarState, a: Throttle) -> StepResult<MountainCarState> {
    let velocity = (s.velocity + MC_FORCE * a.force() - MC_GRAVITY * (3.0 * s.position).cos())
        .clamp(-MC_MAX_SPEED, MC_MAX_SPEED);
    let position = (s.position + velocity).clamp(MC_MIN_POSITION, MC_MAX_POSITION);
    let velocity = if position <= MC_MIN_POSITION { 0.0 } else { velocity };
    StepResult::new(
        MountainCarState { position, velocity },
        position >= MC_GOAL_POSITION,
    )
}

/// Throttles in the direction of the current velocity.
pub fn energy_pumping_action(s: &MountainCarState) -> Throttle {
    if s.velocity < 0.0 {
        Throttle::Back
    } else {
        Throttle::Forward
    }
}

/// [`energy_pumping_action`] over a raw observation, as an action index.
pub fn energy_pumping_policy(obs: &[f64]) -> usize {
    energy_pumping_action(&MountainCarState::from_observation(obs)) as usize
}

impl Dynamics for MountainCarState {
    const DIMS: usize = 2;

    fn reset<R: Rng + ?Sized>(rng: &mut R) -> Self {
        mountain_car_reset(rng)
    }

    fn step(self, action: usize) -> StepResult<Self> {
        mountain_car_step(self, Throttle::from_index(action))
    }

    fn write_observation(&self, out: &mut [f64]) {
        out[0] = self.position;
        out[1] = self.velocity;
    }

    fn bounds() -> BoundsSpec {
        BoundsSpec::new(vec![
            (MC_MIN_POSITION, MC_MAX_POSITION),
            (-MC_MAX_SPEED, MC_MAX_SPEED),
        ])
        .expect("static bounds")
    }
}

// ---------------------------------------------------------------------------
// Acrobot

pub const ACROBOT_MAX_VEL_1: f64 = 4.0 * PI;
pub const ACROBOT_MAX_VEL_2: f64 = 9.0 * PI;
pub const ACROBOT_DT: f64 = 0.2;

const LINK_LENGTH_1: f64 = 1.0;
const LINK_MASS_1: f64 = 1.0;
const LINK_MASS_2: f64 = 1.0;
const LINK_COM_POS_1: f64 = 0.5;
const LINK_COM_POS_2: f64 = 0.5;
const LINK_MOI: f64 = 1.0;
const G: f64 = 9.8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcrobotState {
    pub theta1: f64,
    pub theta2: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl AcrobotState {
    pub fn new(theta1: f64, theta2: f64, omega1: f64, omega2: f64) -> Self {
        AcrobotState {
            theta1,
            theta2,
            omega1,
            omega2,
        }
    }

    fn to_array(self) -> [f64; 4] {
        [self.theta1, self.theta2, self.omega1, self.omega2]
    }

    /// Tip of the second link is above the bar.
    pub fn is_terminal(&self) -> bool {
        -self.theta1.cos() - (self.theta1 + self.theta2).cos() > 1.0
    }
}

/// Torque for action index `0..3`.
pub fn acrobot_torque(action: usize) -> f64 {
    match action {
        0 => -1.0,
        1 => 0.0,
        2 => 1.0,
        _ => panic!("acrobot action {action} out of range"),
    }
}

pub fn acrobot_reset<R: Rng + ?Sized>(rng: &mut R) -> AcrobotState {
    let mut draw = || -0.1 + 0.2 * rng.gen::<f64>();
    AcrobotState::new(draw(), draw(), draw(), draw())
}

/// Time derivative of `(theta1, theta2, omega1, omega2)` under `torque`.
fn acrobot_derivs(s: [f64; 4], torque: f64) -> [f64; 4] {
    let (m1, m2) = (LINK_MASS_1, LINK_MASS_2);
    let l1 = LINK_LENGTH_1;
    let (lc1, lc2) = (LINK_COM_POS_1, LINK_COM_POS_2);
    let (i1, i2) = (LINK_MOI, LINK_MOI);
    let [theta1, theta2, dtheta1, dtheta2] = s;

    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * G * (theta1 + theta2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * G * (theta1 - PI / 2.0).cos()
        + phi2;
    let ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2]
}

fn rk4(s: [f64; 4], torque: f64, dt: f64) -> [f64; 4] {
    let offset = |base: [f64; 4], k: [f64; 4], h: f64| {
        let mut out = base;
        for (o, k) in out.iter_mut().zip(k) {
            *o += h * k;
        }
        out
    };
    let k1 = acrobot_derivs(s, torque);
    let k2 = acrobot_derivs(offset(s, k1, dt / 2.0), torque);
    let k3 = acrobot_derivs(offset(s, k2, dt / 2.0), torque);
    let k4 = acrobot_derivs(offset(s, k3, dt), torque);
    let mut out = s;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Wraps `x` into `[lo, hi]` by whole periods.
pub fn wrap(mut x: f64, lo: f64, hi: f64) -> f64 {
    let diff = hi - lo;
    while x > hi {
        x -= diff;
    }
    while x < lo {
        x += diff;
    }
    x
}

pub fn acrobot_step(s: AcrobotState, action: usize) -> StepResult<AcrobotState> {
    let [t1, t2, w1, w2] = rk4(s.to_array(), acrobot_torque(action), ACROBOT_DT);
    let next = AcrobotState::new(
        wrap(t1, -PI, PI),
        wrap(t2, -PI, PI),
        w1.clamp(-ACROBOT_MAX_VEL_1, ACROBOT_MAX_VEL_1),
        w2.clamp(-ACROBOT_MAX_VEL_2, ACROBOT_MAX_VEL_2),
    );
    let terminal = next.is_terminal();
    StepResult::new(next, terminal)
}

impl Dynamics for AcrobotState {
    const DIMS: usize = 4;

    fn reset<R: Rng + ?Sized>(rng: &mut R) -> Self {
        acrobot_reset(rng)
    }

    fn step(self, action: usize) -> StepResult<Self> {
        acrobot_step(self, action)
    }

    fn write_observation(&self, out: &mut [f64]) {
        out.copy_from_slice(&self.to_array());
    }

    fn bounds() -> BoundsSpec {
        BoundsSpec::new(vec![
            (-PI, PI),
            (-PI, PI),
            (-ACROBOT_MAX_VEL_1, ACROBOT_MAX_VEL_1),
            (-ACROBOT_MAX_VEL_2, ACROBOT_MAX_VEL_2),
        ])
        .expect("static bounds")
    }
}

// ---------------------------------------------------------------------------
// Episode lifecycle

/// Object-safe view of an environment instance used by agents and the
/// harness.
pub trait Environment: Send {
    fn reset(&mut self, rng: &mut dyn RngCore);
    /// Advances one step; returns `(reward, terminal)`.
    fn step(&mut self, action: usize) -> (f64, bool);
    fn observation(&self) -> &[f64];
    fn bounds(&self) -> BoundsSpec;
    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }
}

/// Owns a state of `S` and its observation buffer.
#[derive(Clone, Debug)]
pub struct Simulator<S: Dynamics> {
    state: S,
    obs: Vec<f64>,
}

impl<S: Dynamics> Simulator<S> {
    pub fn new(state: S) -> Self {
        let mut obs = vec![0.0; S::DIMS];
        state.write_observation(&mut obs);
        Simulator { state, obs }
    }

    pub fn state(&self) -> S {
        self.state
    }

    pub fn set_state(&mut self, state: S) {
        self.state = state;
        self.state.write_observation(&mut self.obs);
    }
}

impl<S: Dynamics> Environment for Simulator<S> {
    fn reset(&mut self, rng: &mut dyn RngCore) {
        self.set_state(S::reset(rng));
    }

    fn step(&mut self, action: usize) -> (f64, bool) {
        let r = self.state.step(action);
        self.set_state(r.next_state);
        (r.reward, r.terminal)
    }

    fn observation(&self) -> &[f64] {
        &self.obs
    }

    fn bounds(&self) -> BoundsSpec {
        S::bounds()
    }
}

pub type MountainCar = Simulator<MountainCarState>;
pub type Acrobot = Simulator<AcrobotState>;

impl Default for MountainCar {
    fn default() -> Self {
        Simulator::new(MountainCarState::new(-0.5, 0.0))
    }
}

impl Default for Acrobot {
    fn default() -> Self {
        Simulator::new(AcrobotState::new(0.0, 0.0, 0.0, 0.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawTransition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// Set only by a natural termination, never by the cutoff.
    pub terminal: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub trajectory: Vec<RawTransition>,
    pub steps: usize,
    pub terminated_naturally: bool,
}

impl Episode {
    pub fn undiscounted_return(&self) -> f64 {
        self.trajectory.iter().map(|t| t.reward).sum()
    }
}

/// Resets `env` and follows `policy` for at most `cutoff` steps.
pub fn run_episode(
    env: &mut dyn Environment,
    mut policy: impl FnMut(&[f64]) -> usize,
    cutoff: usize,
    rng: &mut dyn RngCore,
) -> Result<Episode> {
    if cutoff == 0 {
        return Err(Error::InvalidConfig("episode cutoff must be at least 1".into()));
    }
    env.reset(rng);
    let mut trajectory = Vec::new();
    let mut terminated_naturally = false;
    while trajectory.len() < cutoff {
        let obs = env.observation().to_vec();
        let action = policy(&obs);
        let (reward, terminal) = env.step(action);
        trajectory.push(RawTransition {
            obs,
            action,
            reward,
            next_obs: env.observation().to_vec(),
            terminal,
        });
        if terminal {
            terminated_naturally = true;
            break;
        }
    }
    Ok(Episode {
        steps: trajectory.len(),
        trajectory,
        terminated_naturally,
    })
}
