//! Ground truth for the prediction task, value error and gradient
//! interference.

use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::env::{Dynamics, SAFETY_CAP};
use crate::featurize::Featurizer;
use crate::net::Network;
use crate::{Error, Result};

/// Gradients with a norm below this are skipped by the interference measure.
pub const ZERO_GRADIENT_NORM: f64 = 1e-12;

/// On-policy state sample with Monte-Carlo true values.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalDataset {
    pub states: Vec<Vec<f64>>,
    pub true_values: Vec<f64>,
}

impl EvalDataset {
    pub fn new(states: Vec<Vec<f64>>, true_values: Vec<f64>) -> Result<Self> {
        if states.len() != true_values.len() {
            return Err(Error::LengthMismatch(states.len(), true_values.len()));
        }
        Ok(EvalDataset { states, true_values })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Writes `position,velocity,true_value` rows (other dimensionalities
    /// use `x0,x1,...`).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let dims = self.states.first().map_or(2, Vec::len);
        let mut out = String::new();
        if dims == 2 {
            out.push_str("position,velocity");
        } else {
            let names: Vec<String> = (0..dims).map(|d| format!("x{d}")).collect();
            out.push_str(&names.join(","));
        }
        out.push_str(",true_value\n");
        for (s, v) in self.states.iter().zip(&self.true_values) {
            for x in s {
                out.push_str(&format!("{x},"));
            }
            out.push_str(&format!("{v}\n"));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            msg,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| parse_err("empty file".into()))?;
        let cols = header.split(',').count();
        if cols < 2 || !header.trim_end().ends_with("true_value") {
            return Err(parse_err(format!("unexpected header `{header}`")));
        }
        let (mut states, mut values) = (Vec::new(), Vec::new());
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| parse_err(format!("line {}: {e}", n + 2)))?;
            if fields.len() != cols {
                return Err(parse_err(format!("line {}: expected {cols} fields", n + 2)));
            }
            values.push(fields[cols - 1]);
            states.push(fields[..cols - 1].to_vec());
        }
        EvalDataset::new(states, values)
    }
}

/// Undiscounted return from `state` following `policy` to termination.
pub fn true_value<S: Dynamics>(policy: &dyn Fn(&[f64]) -> usize, state: S) -> Result<f64> {
    let mut obs = vec![0.0; S::DIMS];
    let mut s = state;
    let mut ret = 0.0;
    for _ in 0..SAFETY_CAP {
        s.write_observation(&mut obs);
        let r = s.step(policy(&obs));
        ret += r.reward;
        if r.terminal {
            return Ok(ret);
        }
        s = r.next_state;
    }
    Err(Error::SafetyCapExceeded(SAFETY_CAP))
}

/// Walks `total_steps` steps under `policy` with episodic restarts, keeps a
/// uniform sample of `sample_size` visited states and rolls each out once
/// for its true value.
pub fn build_eval_dataset<S: Dynamics, R: Rng + ?Sized>(
    policy: &dyn Fn(&[f64]) -> usize,
    total_steps: usize,
    sample_size: usize,
    rng: &mut R,
) -> Result<EvalDataset> {
    if sample_size == 0 {
        return Err(Error::Empty("eval sample"));
    }
    if sample_size > total_steps {
        return Err(Error::SampleTooSmall {
            need: sample_size,
            got: total_steps,
        });
    }
    let mut obs = vec![0.0; S::DIMS];
    let mut reservoir: Vec<S> = Vec::with_capacity(sample_size);
    let mut s = S::reset(rng);
    let mut episode_len = 0;
    for i in 0..total_steps {
        // reservoir sampling keeps a uniform subset without storing the walk
        if i < sample_size {
            reservoir.push(s);
        } else {
            let j = rng.gen_range(0..=i);
            if j < sample_size {
                reservoir[j] = s;
            }
        }
        s.write_observation(&mut obs);
        let r = s.step(policy(&obs));
        episode_len += 1;
        if r.terminal {
            s = S::reset(rng);
            episode_len = 0;
        } else if episode_len >= SAFETY_CAP {
            return Err(Error::SafetyCapExceeded(SAFETY_CAP));
        } else {
            s = r.next_state;
        }
    }
    let mut states = Vec::with_capacity(sample_size);
    let mut values = Vec::with_capacity(sample_size);
    for s in reservoir {
        values.push(true_value(policy, s)?);
        s.write_observation(&mut obs);
        states.push(obs.clone());
    }
    EvalDataset::new(states, values)
}

/// Root-mean-squared error of the network's state values over the dataset.
pub fn rve(net: &mut Network, featurizer: &mut Featurizer, dataset: &EvalDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Empty("eval dataset"));
    }
    let mut sq = 0.0;
    for (s, v) in dataset.states.iter().zip(&dataset.true_values) {
        let x = featurizer.encode(s)?;
        let err = net.forward(&x)?[0] - v;
        sq += err * err;
    }
    Ok((sq / dataset.len() as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterferenceReport {
    /// Mean cosine similarity over the counted pairs.
    pub mean: f64,
    pub pairs: usize,
    pub skipped_pairs: usize,
}

/// Running sums for the mean pairwise cosine similarity.
///
/// Uses `sum_{i<j} u_i.u_j = (|sum u|^2 - sum |u|^2) / 2` over unit vectors
/// `u`, so the cost is linear in the number of gradients.
#[derive(Clone, Debug, Default)]
pub struct InterferenceAccumulator {
    sum: Vec<f64>,
    self_dots: f64,
    kept: usize,
    total: usize,
}

impl InterferenceAccumulator {
    pub fn add(&mut self, g: &[f64]) -> Result<()> {
        self.total += 1;
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < ZERO_GRADIENT_NORM {
            return Ok(());
        }
        if self.sum.is_empty() {
            self.sum = vec![0.0; g.len()];
        } else if self.sum.len() != g.len() {
            return Err(Error::DimensionMismatch {
                expected: self.sum.len(),
                actual: g.len(),
            });
        }
        let mut sq = 0.0;
        for (s, x) in self.sum.iter_mut().zip(g) {
            let u = x / norm;
            *s += u;
            sq += u * u;
        }
        self.self_dots += sq;
        self.kept += 1;
        Ok(())
    }

    pub fn finish(&self) -> Result<InterferenceReport> {
        let total = self.total;
        if total < 2 {
            return Err(Error::SampleTooSmall { need: 2, got: total });
        }
        let all_pairs = total * (total - 1) / 2;
        let pairs = self.kept * self.kept.saturating_sub(1) / 2;
        if pairs == 0 {
            return Err(Error::AllPairsSkipped(all_pairs));
        }
        let total_sq = self.sum.iter().map(|s| s * s).sum::<f64>();
        let mean = ((total_sq - self.self_dots) / 2.0 / pairs as f64).clamp(-1.0, 1.0);
        Ok(InterferenceReport {
            mean,
            pairs,
            skipped_pairs: all_pairs - pairs,
        })
    }
}

/// Mean pairwise cosine similarity over unordered distinct pairs. Pairs
/// involving a zero or non-finite gradient are skipped and counted.
pub fn interference_from_gradients<'a, I>(grads: I) -> Result<InterferenceReport>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc = InterferenceAccumulator::default();
    for g in grads {
        acc.add(g)?;
    }
    acc.finish()
}

/// Pairwise interference of the state-value gradients over the dataset.
pub fn pairwise_interference(net: &mut Network, featurizer: &mut Featurizer, dataset: &EvalDataset) -> Result<InterferenceReport> {
    let mut acc = InterferenceAccumulator::default();
    let mut grad = vec![0.0; net.param_count()];
    for s in &dataset.states {
        let x = featurizer.encode(s)?;
        net.forward(&x)?;
        grad.fill(0.0);
        net.accumulate_gradient(0, 1.0, &mut grad)?;
        acc.add(&grad)?;
    }
    acc.finish()
}

/// Gradient of the state value at every dataset state.
pub fn dataset_gradients(net: &mut Network, featurizer: &mut Featurizer, dataset: &EvalDataset) -> Result<Vec<Vec<f64>>> {
    dataset
        .states
        .iter()
        .map(|s| {
            let x = featurizer.encode(s)?;
            net.forward(&x)?;
            Ok(net.backward(0)?.0)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterferenceSnapshot {
    pub episode_index: usize,
    pub mean_pairwise_interference: f64,
}

/// Episodes after which interference is measured: before learning (0), 1,
/// 5, 10, 25 and every 25 thereafter, ending at `max_episodes`.
pub fn interference_schedule(max_episodes: usize) -> Vec<usize> {
    let mut eps: Vec<usize> = [0, 1, 5, 10]
        .into_iter()
        .chain((25..=max_episodes).step_by(25))
        .filter(|&e| e <= max_episodes)
        .collect();
    if eps.last() != Some(&max_episodes) {
        eps.push(max_episodes);
    }
    eps
}
