//! C ABI over `tdlab`.
//!
//! Every fallible function returns a [`TdlabStatus`]; on failure the
//! message is available from [`tdlab_last_error`] on the same thread.
//! Objects are opaque handles created by `*_new` and released by the
//! matching `*_free`. Output buffers are caller-allocated with explicit
//! lengths.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tdlab::agent::{OptimizerParams, System};
use tdlab::env::Environment;
use tdlab::eval::{pairwise_interference, EvalDataset};
use tdlab::featurize::{Featurizer, Preprocessing};
use tdlab::harness::{prepare_dataset, run_single, ExperimentConfig, Profile, Task};
use tdlab::net::{Network, NetworkSpec};
use tdlab::stats::{two_sample_ttest_with, TTestKind};
use tdlab::{seeded_stream, streams, Error, SeededRng};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TdlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    BufferTooSmall = 4,
    NumericalError = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TdlabTask {
    McPrediction = 0,
    McControl = 1,
    AcrobotControl = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TdlabPreprocessing {
    Raw = 0,
    Discretize = 1,
    Tilecode = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TdlabSystem {
    Sgd = 0,
    SgdEr = 1,
    Adam = 2,
    AdamEr = 3,
    AdamErTn = 4,
}

impl From<TdlabTask> for Task {
    fn from(t: TdlabTask) -> Task {
        match t {
            TdlabTask::McPrediction => Task::McPrediction,
            TdlabTask::McControl => Task::McControl,
            TdlabTask::AcrobotControl => Task::AcrobotControl,
        }
    }
}

impl From<TdlabPreprocessing> for Preprocessing {
    fn from(p: TdlabPreprocessing) -> Preprocessing {
        match p {
            TdlabPreprocessing::Raw => Preprocessing::Raw,
            TdlabPreprocessing::Discretize => Preprocessing::Discretize,
            TdlabPreprocessing::Tilecode => Preprocessing::Tilecode,
        }
    }
}

impl From<TdlabSystem> for System {
    fn from(s: TdlabSystem) -> System {
        match s {
            TdlabSystem::Sgd => System::Sgd,
            TdlabSystem::SgdEr => System::SgdEr,
            TdlabSystem::Adam => System::Adam,
            TdlabSystem::AdamEr => System::AdamEr,
            TdlabSystem::AdamErTn => System::AdamErTn,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TdlabTTest {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub significant_at_5pct: bool,
}

/// One seeded run. `beta1`/`beta2` are ignored by the SGD systems.
/// Prediction runs build an evaluation dataset from `walk_steps` and
/// `sample_size`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TdlabRunConfig {
    pub task: TdlabTask,
    pub preprocessing: TdlabPreprocessing,
    pub system: TdlabSystem,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub episodes: usize,
    pub seed: u64,
    pub walk_steps: usize,
    pub sample_size: usize,
}

/// Environment with its own reset stream.
pub struct TdlabEnv {
    env: Box<dyn Environment>,
    rng: SeededRng,
}

pub struct TdlabFeaturizer(Featurizer);

pub struct TdlabNetwork(Network);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tdlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

struct Fail(TdlabStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        let status = match e {
            Error::DimensionMismatch { .. } | Error::LengthMismatch(..) => TdlabStatus::DimensionMismatch,
            Error::ZeroPooledVariance | Error::AllPairsSkipped(_) | Error::SafetyCapExceeded(_) => {
                TdlabStatus::NumericalError
            }
            Error::Io { .. } | Error::Parse { .. } => TdlabStatus::Io,
            _ => TdlabStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

fn fail(status: TdlabStatus, msg: impl Into<String>) -> Fail {
    Fail(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TdlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TdlabStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TdlabStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(TdlabStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, need: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len < need {
        return Err(fail(TdlabStatus::BufferTooSmall, format!("{what} holds {len}, needs {need}")));
    }
    if need == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(TdlabStatus::NullPointer, format!("{what} is null")));
    }
    Ok(&mut std::slice::from_raw_parts_mut(p, len)[..need])
}

unsafe fn handle<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| fail(TdlabStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<T>(p: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(fail(TdlabStatus::NullPointer, format!("{what} is null")));
    }
    p.write(value);
    Ok(())
}

fn free<T>(p: *mut T) {
    if !p.is_null() {
        // SAFETY: handles are only created by Box::into_raw in this crate
        drop(unsafe { Box::from_raw(p) });
    }
}

// ---------------------------------------------------------------------------
// environments

/// # Safety
/// `out_env` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tdlab_env_new(task: TdlabTask, seed: u64, out_env: *mut *mut TdlabEnv) -> TdlabStatus {
    guard(|| {
        let env = TdlabEnv {
            env: Task::from(task).environment(),
            rng: seeded_stream(seed, streams::ENV),
        };
        out(out_env, Box::into_raw(Box::new(env)), "out_env")
    })
}

#[no_mangle]
pub extern "C" fn tdlab_env_free(env: *mut TdlabEnv) {
    free(env)
}

/// Observation length of the environment, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tdlab_env_dims(env: *const TdlabEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.observation().len())
}

/// Starts an episode and writes the first observation.
///
/// # Safety
/// `env` must be a live handle and `obs` valid for `obs_len` writes.
#[no_mangle]
pub unsafe extern "C" fn tdlab_env_reset(env: *mut TdlabEnv, obs: *mut f64, obs_len: usize) -> TdlabStatus {
    guard(|| {
        let e = handle(env, "env")?;
        e.env.reset(&mut e.rng);
        let o = e.env.observation();
        slice_mut(obs, obs_len, o.len(), "obs")?.copy_from_slice(o);
        Ok(())
    })
}

/// Applies action `0..3` and writes reward, terminal flag and the next
/// observation.
///
/// # Safety
/// `env` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tdlab_env_step(
    env: *mut TdlabEnv,
    action: usize,
    reward: *mut f64,
    terminal: *mut bool,
    obs: *mut f64,
    obs_len: usize,
) -> TdlabStatus {
    guard(|| {
        let e = handle(env, "env")?;
        if action >= e.env.num_actions() {
            return Err(fail(TdlabStatus::InvalidArgument, format!("action {action} out of range")));
        }
        let buf = slice_mut(obs, obs_len, e.env.observation().len(), "obs")?;
        let (r, t) = e.env.step(action);
        buf.copy_from_slice(e.env.observation());
        out(reward, r, "reward")?;
        out(terminal, t, "terminal")
    })
}

// ---------------------------------------------------------------------------
// featurizers

/// # Safety
/// `out_featurizer` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tdlab_featurizer_new(
    task: TdlabTask,
    preprocessing: TdlabPreprocessing,
    out_featurizer: *mut *mut TdlabFeaturizer,
) -> TdlabStatus {
    guard(|| {
        let cfg = ExperimentConfig::profile(Profile::Desk, task.into(), preprocessing.into(), System::Sgd);
        let f = TdlabFeaturizer(cfg.featurizer()?);
        out(out_featurizer, Box::into_raw(Box::new(f)), "out_featurizer")
    })
}

#[no_mangle]
pub extern "C" fn tdlab_featurizer_free(f: *mut TdlabFeaturizer) {
    free(f)
}

/// Network input length produced by the featurizer, or 0 for null.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tdlab_featurizer_input_length(f: *const TdlabFeaturizer) -> usize {
    f.as_ref().map_or(0, |f| f.0.input_length())
}

/// Writes the dense feature vector of `obs`.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn tdlab_featurizer_encode(
    f: *mut TdlabFeaturizer,
    obs: *const f64,
    obs_len: usize,
    features: *mut f64,
    features_len: usize,
) -> TdlabStatus {
    guard(|| {
        let f = handle(f, "featurizer")?;
        let x = f.0.encode(slice(obs, obs_len, "obs")?)?.to_dense();
        slice_mut(features, features_len, x.len(), "features")?.copy_from_slice(&x);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// networks

/// Xavier-initialized network seeded like a run with `seed`.
///
/// # Safety
/// `hidden` must be valid for `n_hidden` reads; `out_net` for writes.
#[no_mangle]
pub unsafe extern "C" fn tdlab_network_new(
    input_length: usize,
    hidden: *const usize,
    n_hidden: usize,
    outputs: usize,
    seed: u64,
    out_net: *mut *mut TdlabNetwork,
) -> TdlabStatus {
    guard(|| {
        let spec = NetworkSpec::new(input_length, slice(hidden, n_hidden, "hidden")?.to_vec(), outputs);
        let net = Network::init(spec, &mut seeded_stream(seed, streams::NET))?;
        out(out_net, Box::into_raw(Box::new(TdlabNetwork(net))), "out_net")
    })
}

#[no_mangle]
pub extern "C" fn tdlab_network_free(net: *mut TdlabNetwork) {
    free(net)
}

/// Number of parameters, or 0 for null.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tdlab_network_param_count(net: *const TdlabNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.param_count())
}

/// Copies the flat parameter vector: per layer, row-major weights
/// (`fan_out x fan_in`) then biases.
///
/// # Safety
/// `params` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tdlab_network_get_params(net: *const TdlabNetwork, params: *mut f64, len: usize) -> TdlabStatus {
    guard(|| {
        let n = net.as_ref().ok_or_else(|| fail(TdlabStatus::NullPointer, "net is null"))?;
        slice_mut(params, len, n.0.param_count(), "params")?.copy_from_slice(n.0.params());
        Ok(())
    })
}

/// # Safety
/// `params` must be valid for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn tdlab_network_set_params(net: *mut TdlabNetwork, params: *const f64, len: usize) -> TdlabStatus {
    guard(|| {
        let n = handle(net, "net")?;
        let src = slice(params, len, "params")?;
        if src.len() != n.0.param_count() {
            return Err(Error::DimensionMismatch {
                expected: n.0.param_count(),
                actual: src.len(),
            }
            .into());
        }
        n.0.params_mut().copy_from_slice(src);
        Ok(())
    })
}

/// Dense forward pass.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn tdlab_network_forward(
    net: *mut TdlabNetwork,
    x: *const f64,
    x_len: usize,
    outputs: *mut f64,
    outputs_len: usize,
) -> TdlabStatus {
    guard(|| {
        let n = handle(net, "net")?;
        let fv = tdlab::featurize::FeatureVector::Dense(slice(x, x_len, "x")?.to_vec());
        let y = n.0.forward(&fv)?.to_vec();
        slice_mut(outputs, outputs_len, y.len(), "outputs")?.copy_from_slice(&y);
        Ok(())
    })
}

/// Gradient of output `output_index` at `x` with respect to every
/// parameter, in the flat parameter order.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn tdlab_network_gradient(
    net: *mut TdlabNetwork,
    x: *const f64,
    x_len: usize,
    output_index: usize,
    grad: *mut f64,
    grad_len: usize,
) -> TdlabStatus {
    guard(|| {
        let n = handle(net, "net")?;
        let fv = tdlab::featurize::FeatureVector::Dense(slice(x, x_len, "x")?.to_vec());
        n.0.forward(&fv)?;
        let g = n.0.backward(output_index)?;
        slice_mut(grad, grad_len, g.0.len(), "grad")?.copy_from_slice(&g.0);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// measures and runs

/// Mean pairwise cosine similarity of the value gradients at `n_states`
/// raw states stored row-major with `dims` columns.
///
/// # Safety
/// `states` must be valid for `n_states * dims` reads.
#[no_mangle]
pub unsafe extern "C" fn tdlab_pairwise_interference(
    net: *mut TdlabNetwork,
    featurizer: *mut TdlabFeaturizer,
    states: *const f64,
    n_states: usize,
    dims: usize,
    mean: *mut f64,
) -> TdlabStatus {
    guard(|| {
        let n = handle(net, "net")?;
        let f = handle(featurizer, "featurizer")?;
        let flat = slice(states, n_states.saturating_mul(dims), "states")?;
        let rows: Vec<Vec<f64>> = flat.chunks(dims.max(1)).map(<[f64]>::to_vec).collect();
        let ds = EvalDataset::new(rows, vec![0.0; n_states])?;
        let report = pairwise_interference(&mut n.0, &mut f.0, &ds)?;
        out(mean, report.mean, "mean")
    })
}

/// Two-sample t-test; pooled variance unless `welch`.
///
/// # Safety
/// `a` and `b` must be valid for their lengths; `result` for writes.
#[no_mangle]
pub unsafe extern "C" fn tdlab_ttest(
    a: *const f64,
    a_len: usize,
    b: *const f64,
    b_len: usize,
    welch: bool,
    result: *mut TdlabTTest,
) -> TdlabStatus {
    guard(|| {
        let kind = if welch { TTestKind::Welch } else { TTestKind::Pooled };
        let r = two_sample_ttest_with(slice(a, a_len, "a")?, slice(b, b_len, "b")?, kind)?;
        out(
            result,
            TdlabTTest {
                t_statistic: r.t_statistic,
                degrees_of_freedom: r.degrees_of_freedom,
                p_value: r.p_value,
                significant_at_5pct: r.significant_at_5pct,
            },
            "result",
        )
    })
}

/// Runs one seed and writes the per-episode metric (steps for control,
/// value error for prediction).
///
/// # Safety
/// `config` must be valid for reads, `per_episode` for `len` writes and
/// `diverged` for writes.
#[no_mangle]
pub unsafe extern "C" fn tdlab_run_single(
    config: *const TdlabRunConfig,
    per_episode: *mut f64,
    len: usize,
    diverged: *mut bool,
) -> TdlabStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| fail(TdlabStatus::NullPointer, "config is null"))?;
        let system = System::from(c.system);
        let mut cfg = ExperimentConfig::profile(Profile::Desk, c.task.into(), c.preprocessing.into(), system);
        let params = if system.uses_adam() {
            OptimizerParams::adam(c.step_size, c.beta1, c.beta2)
        } else {
            OptimizerParams::sgd(c.step_size)
        };
        cfg.episodes = c.episodes;
        cfg.step_size_grid = vec![c.step_size];
        cfg.beta1_grid = params.beta1.into_iter().collect();
        cfg.beta2_grid = params.beta2.into_iter().collect();
        cfg.dataset.walk_steps = c.walk_steps;
        cfg.dataset.sample_size = c.sample_size;
        cfg.validate()?;
        let buf = slice_mut(per_episode, len, c.episodes, "per_episode")?;
        let dataset = prepare_dataset(&cfg)?;
        let rec = run_single(&cfg, params, c.seed, dataset.as_ref())?;
        buf.copy_from_slice(&rec.per_episode);
        out(diverged, rec.diverged, "diverged")
    })
}
