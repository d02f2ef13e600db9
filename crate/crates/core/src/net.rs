//! Fully-connected value network: ReLU hidden layers, linear outputs,
//! Xavier-uniform init and hand-derived backpropagation.
//!
//! Parameters live in one flat vector, layer by layer; within a layer the
//! `fan_out x fan_in` weight matrix (row-major, one row per output unit)
//! comes first, followed by the `fan_out` biases. Gradients share this
//! layout, so optimizers and the interference measure index them the same
//! way.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::featurize::{FeatureVector, Featurizer};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_length: usize,
    pub hidden_layers: Vec<usize>,
    pub outputs: usize,
}

impl NetworkSpec {
    pub fn new(input_length: usize, hidden_layers: Vec<usize>, outputs: usize) -> Self {
        NetworkSpec {
            input_length,
            hidden_layers,
            outputs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_length == 0 || self.outputs == 0 || self.hidden_layers.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "network widths must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_layers.len() + 2);
        w.push(self.input_length);
        w.extend(&self.hidden_layers);
        w.push(self.outputs);
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }
}

/// Gradient of one output with respect to every parameter, in the
/// network's flat layout.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    weights: usize,
    biases: usize,
}

impl Layer {
    fn xavier_bound(&self) -> f64 {
        (6.0 / (self.fan_in + self.fan_out) as f64).sqrt()
    }
}

#[derive(Clone, Debug)]
enum CachedInput {
    Dense(Vec<f64>),
    Sparse(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<Layer>,
    params: Vec<f64>,
    // per layer, pre- and post-activation values of the last forward pass
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    input: Option<CachedInput>,
}

impl Network {
    /// Builds a network with all parameters zero.
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::new();
        let mut offset = 0;
        for pair in spec.widths().windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            layers.push(Layer {
                fan_in,
                fan_out,
                weights: offset,
                biases: offset + fan_in * fan_out,
            });
            offset += fan_in * fan_out + fan_out;
        }
        Ok(Network {
            pre: layers.iter().map(|l| vec![0.0; l.fan_out]).collect(),
            post: layers.iter().map(|l| vec![0.0; l.fan_out]).collect(),
            params: vec![0.0; offset],
            layers,
            spec,
            input: None,
        })
    }

    /// Xavier-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        let mut net = Network::zeros(spec)?;
        for layer in net.layers.clone() {
            let bound = layer.xavier_bound();
            for w in &mut net.params[layer.weights..layer.biases] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.input = None;
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Overwrites this network's parameters with `other`'s.
    pub fn copy_params_from(&mut self, other: &Network) {
        assert_eq!(self.spec, other.spec, "parameter copy between different shapes");
        self.params.copy_from_slice(&other.params);
        self.input = None;
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Weight `(row, col)` of layer `layer`.
    pub fn weight(&self, layer: usize, row: usize, col: usize) -> f64 {
        let l = &self.layers[layer];
        self.params[l.weights + row * l.fan_in + col]
    }

    pub fn weight_mut(&mut self, layer: usize, row: usize, col: usize) -> &mut f64 {
        let l = self.layers[layer];
        self.input = None;
        &mut self.params[l.weights + row * l.fan_in + col]
    }

    pub fn bias(&self, layer: usize, unit: usize) -> f64 {
        self.params[self.layers[layer].biases + unit]
    }

    pub fn bias_mut(&mut self, layer: usize, unit: usize) -> &mut f64 {
        let b = self.layers[layer].biases;
        self.input = None;
        &mut self.params[b + unit]
    }

    /// Xavier bound of layer `layer`.
    pub fn init_bound(&self, layer: usize) -> f64 {
        self.layers[layer].xavier_bound()
    }

    /// Post-activation values of hidden layer `layer` from the last forward
    /// pass.
    pub fn hidden_activations(&self, layer: usize) -> Option<&[f64]> {
        if self.input.is_none() || layer + 1 >= self.layers.len() {
            return None;
        }
        Some(&self.post[layer])
    }

    pub fn forward(&mut self, x: &FeatureVector) -> Result<&[f64]> {
        if x.len() != self.spec.input_length {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_length,
                actual: x.len(),
            });
        }
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let w = &self.params[layer.weights..layer.biases];
            let b = &self.params[layer.biases..layer.biases + layer.fan_out];
            let pre = &mut self.pre[li];
            pre.copy_from_slice(b);
            if li == 0 {
                match x {
                    FeatureVector::Dense(v) => {
                        for (j, p) in pre.iter_mut().enumerate() {
                            let row = &w[j * layer.fan_in..(j + 1) * layer.fan_in];
                            *p += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                    FeatureVector::Sparse { active, .. } => {
                        for (j, p) in pre.iter_mut().enumerate() {
                            let row = &w[j * layer.fan_in..(j + 1) * layer.fan_in];
                            *p += active.iter().map(|&i| row[i]).sum::<f64>();
                        }
                    }
                }
            } else {
                let prev = &self.post[li - 1];
                for (j, p) in pre.iter_mut().enumerate() {
                    let row = &w[j * layer.fan_in..(j + 1) * layer.fan_in];
                    *p += row.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            let post = &mut self.post[li];
            if li == last {
                post.copy_from_slice(&self.pre[li]);
            } else {
                for (o, &p) in post.iter_mut().zip(&self.pre[li]) {
                    *o = p.max(0.0);
                }
            }
        }
        self.input = Some(match x {
            FeatureVector::Dense(v) => match self.input.take() {
                Some(CachedInput::Dense(mut buf)) => {
                    buf.clear();
                    buf.extend_from_slice(v);
                    CachedInput::Dense(buf)
                }
                _ => CachedInput::Dense(v.clone()),
            },
            FeatureVector::Sparse { active, .. } => match self.input.take() {
                Some(CachedInput::Sparse(mut buf)) => {
                    buf.clear();
                    buf.extend_from_slice(active);
                    CachedInput::Sparse(buf)
                }
                _ => CachedInput::Sparse(active.clone()),
            },
        });
        Ok(&self.post[last])
    }

    /// Output values of the last forward pass.
    pub fn outputs(&self) -> Option<&[f64]> {
        self.input.as_ref().map(|_| self.post[self.layers.len() - 1].as_slice())
    }

    /// Adds `scale * d(output[output_index]) / d(params)` into `grad`, using
    /// the cached forward pass.
    pub fn accumulate_gradient(&self, output_index: usize, scale: f64, grad: &mut [f64]) -> Result<()> {
        let input = self.input.as_ref().ok_or(Error::NoForwardCache)?;
        if output_index >= self.spec.outputs {
            return Err(Error::OutputIndex {
                index: output_index,
                outputs: self.spec.outputs,
            });
        }
        if grad.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                actual: grad.len(),
            });
        }
        let last = self.layers.len() - 1;
        // gradient w.r.t. the current layer's pre-activations
        let mut delta = vec![0.0; self.spec.outputs];
        delta[output_index] = scale;
        for li in (0..=last).rev() {
            let layer = self.layers[li];
            let (gw, gb) = grad[layer.weights..layer.biases + layer.fan_out].split_at_mut(layer.biases - layer.weights);
            for (g, d) in gb.iter_mut().zip(&delta) {
                *g += d;
            }
            for (j, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut gw[j * layer.fan_in..(j + 1) * layer.fan_in];
                if li == 0 {
                    match input {
                        CachedInput::Dense(x) => {
                            for (g, xi) in row.iter_mut().zip(x) {
                                *g += d * xi;
                            }
                        }
                        CachedInput::Sparse(active) => {
                            for &i in active {
                                row[i] += d;
                            }
                        }
                    }
                } else {
                    for (g, a) in row.iter_mut().zip(&self.post[li - 1]) {
                        *g += d * a;
                    }
                }
            }
            if li == 0 {
                break;
            }
            let w = &self.params[layer.weights..layer.biases];
            let below = &self.pre[li - 1];
            let mut next = vec![0.0; layer.fan_in];
            for (j, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &w[j * layer.fan_in..(j + 1) * layer.fan_in];
                for (n, wji) in next.iter_mut().zip(row) {
                    *n += wji * d;
                }
            }
            // ReLU derivative, 0 at exactly 0
            for (n, &p) in next.iter_mut().zip(below) {
                if p <= 0.0 {
                    *n = 0.0;
                }
            }
            delta = next;
        }
        Ok(())
    }

    pub fn backward(&self, output_index: usize) -> Result<GradientVector> {
        let mut g = vec![0.0; self.params.len()];
        self.accumulate_gradient(output_index, 1.0, &mut g)?;
        Ok(GradientVector(g))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResponseRow {
    pub unit: usize,
    pub x0: f64,
    pub x1: f64,
    pub activation: f64,
}

/// First-hidden-layer activations over a `grid x grid` lattice spanning the
/// featurizer's 2-D bounds, unit by unit.
pub fn response_map(net: &mut Network, featurizer: &mut Featurizer, grid: usize) -> Result<Vec<ResponseRow>> {
    let bounds = featurizer.bounds().clone();
    if bounds.dims() != 2 {
        return Err(Error::NotTwoDimensional(bounds.dims()));
    }
    if net.spec().hidden_layers.is_empty() {
        return Err(Error::InvalidConfig("response maps need a hidden layer".into()));
    }
    if grid == 0 {
        return Err(Error::InvalidConfig("grid must have at least one point".into()));
    }
    let axis = |d: usize, k: usize| {
        let (lo, hi) = bounds.ranges()[d];
        if grid == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * k as f64 / (grid - 1) as f64
        }
    };
    let units = net.spec().hidden_layers[0];
    let mut points = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            let (x0, x1) = (axis(0, i), axis(1, j));
            net.forward(&featurizer.encode(&[x0, x1])?)?;
            let acts = net.hidden_activations(0).expect("forward pass cached").to_vec();
            points.push((x0, x1, acts));
        }
    }
    let mut rows = Vec::with_capacity(units * points.len());
    for unit in 0..units {
        for (x0, x1, acts) in &points {
            rows.push(ResponseRow {
                unit,
                x0: *x0,
                x1: *x1,
                activation: acts[unit],
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Dynamics, MountainCarState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(42)
    }

    #[test]
    fn xavier_bound_and_zero_biases() {
        let net = Network::init(NetworkSpec::new(2, vec![50], 1), &mut rng()).unwrap();
        assert!((net.init_bound(1) - (6.0f64 / 51.0).sqrt()).abs() < 1e-15);
        assert!((net.init_bound(1) - 0.34300).abs() < 1e-5);
        for layer in 0..2 {
            let bound = net.init_bound(layer);
            let l = net.layers[layer];
            assert!(net.params[l.weights..l.biases].iter().all(|w| w.abs() <= bound));
            assert!(net.params[l.biases..l.biases + l.fan_out].iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn init_is_deterministic() {
        let spec = NetworkSpec::new(128, vec![50], 3);
        let a = Network::init(spec.clone(), &mut rng()).unwrap();
        let b = Network::init(spec, &mut rng()).unwrap();
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut net = Network::zeros(NetworkSpec::new(3, vec![4, 4], 2)).unwrap();
        let out = net.forward(&FeatureVector::Dense(vec![0.3, -2.0, 9.0])).unwrap();
        assert_eq!(out, &[0.0, 0.0]);
    }

    #[test]
    fn hand_traced_one_one_one() {
        let mut net = Network::zeros(NetworkSpec::new(1, vec![1], 1)).unwrap();
        *net.weight_mut(0, 0, 0) = 2.0;
        *net.bias_mut(0, 0) = 0.5;
        *net.weight_mut(1, 0, 0) = -3.0;
        *net.bias_mut(1, 0) = 1.0;
        let out = net.forward(&FeatureVector::Dense(vec![1.5])).unwrap()[0];
        // hidden = relu(2*1.5 + 0.5) = 3.5; out = -3*3.5 + 1
        assert_eq!(out, -9.5);
        let g = net.backward(0).unwrap();
        // layout: w0, b0, w1, b1
        assert_eq!(g.0, vec![-3.0 * 1.5, -3.0, 3.5, 1.0]);
    }

    #[test]
    fn sparse_input_sums_columns() {
        let mut net = Network::init(NetworkSpec::new(6, vec![3], 1), &mut rng()).unwrap();
        *net.bias_mut(0, 1) = 0.25;
        net.forward(&FeatureVector::Sparse {
            active: vec![1, 4],
            len: 6,
        })
        .unwrap();
        for j in 0..3 {
            let expected = net.weight(0, j, 1) + net.weight(0, j, 4) + net.bias(0, j);
            assert_eq!(net.pre[0][j], expected);
        }
    }

    #[test]
    fn sparse_matches_dense() {
        let mut net = Network::init(NetworkSpec::new(8, vec![5, 4], 3), &mut rng()).unwrap();
        let sparse = FeatureVector::Sparse {
            active: vec![0, 3, 7],
            len: 8,
        };
        let a = net.forward(&sparse).unwrap().to_vec();
        let ga = net.backward(2).unwrap();
        let b = net.forward(&FeatureVector::Dense(sparse.to_dense())).unwrap().to_vec();
        let gb = net.backward(2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in ga.0.iter().zip(&gb.0) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_unit_gradient() {
        // no hidden layer: y = w.x + b
        let mut net = Network::zeros(NetworkSpec::new(2, vec![], 1)).unwrap();
        *net.weight_mut(0, 0, 0) = 0.7;
        net.forward(&FeatureVector::Dense(vec![3.0, -1.0])).unwrap();
        assert_eq!(net.backward(0).unwrap().0, vec![3.0, -1.0, 1.0]);
    }

    #[test]
    fn dead_unit_blocks_gradient() {
        let mut net = Network::zeros(NetworkSpec::new(1, vec![2], 1)).unwrap();
        *net.weight_mut(0, 0, 0) = -1.0; // dead for x > 0
        *net.weight_mut(0, 1, 0) = 1.0;
        *net.weight_mut(1, 0, 0) = 5.0;
        *net.weight_mut(1, 0, 1) = 5.0;
        net.forward(&FeatureVector::Dense(vec![2.0])).unwrap();
        let g = net.backward(0).unwrap().0;
        // w0 row 0 and b0[0] get nothing
        assert_eq!(g[0], 0.0);
        assert_eq!(g[2], 0.0);
        assert_eq!(g[1], 10.0);
    }

    #[test]
    fn backward_requires_forward() {
        let net = Network::zeros(NetworkSpec::new(1, vec![1], 2)).unwrap();
        assert!(matches!(net.backward(0), Err(Error::NoForwardCache)));
        let mut net = net;
        net.forward(&FeatureVector::Dense(vec![1.0])).unwrap();
        assert!(matches!(net.backward(2), Err(Error::OutputIndex { .. })));
        assert!(net.forward(&FeatureVector::Dense(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn copied_params_forward_identically() {
        let spec = NetworkSpec::new(4, vec![6], 3);
        let src = Network::init(spec.clone(), &mut rng()).unwrap();
        let mut a = src.clone();
        let mut b = Network::zeros(spec).unwrap();
        b.copy_params_from(&src);
        let x = FeatureVector::Dense(vec![0.1, -0.4, 0.9, 0.0]);
        assert_eq!(
            a.forward(&x).unwrap().to_vec(),
            b.forward(&x).unwrap().to_vec()
        );
    }

    #[test]
    fn response_map_shape_and_zero_net() {
        let bounds = MountainCarState::bounds();
        let mut feat = Featurizer::Raw(bounds);
        let mut net = Network::zeros(NetworkSpec::new(2, vec![7], 1)).unwrap();
        let rows = response_map(&mut net, &mut feat, 5).unwrap();
        assert_eq!(rows.len(), 5 * 5 * 7);
        assert!(rows.iter().all(|r| r.activation == 0.0));
    }

    #[test]
    fn response_map_half_planes_for_raw_inputs() {
        let bounds = MountainCarState::bounds();
        let mut feat = Featurizer::Raw(bounds.clone());
        let mut net = Network::init(NetworkSpec::new(2, vec![6], 1), &mut rng()).unwrap();
        for j in 0..6 {
            *net.bias_mut(0, j) = 0.1 * j as f64 - 0.2;
        }
        let rows = response_map(&mut net, &mut feat, 9).unwrap();
        for r in rows {
            let x = crate::featurize::normalize(&[r.x0, r.x1], &bounds).unwrap().to_dense();
            let z = net.weight(0, r.unit, 0) * x[0] + net.weight(0, r.unit, 1) * x[1] + net.bias(0, r.unit);
            assert_eq!(r.activation > 0.0, z > 0.0);
        }
    }

    #[test]
    fn response_map_rejects_non_2d() {
        let bounds = crate::env::AcrobotState::bounds();
        let mut feat = Featurizer::Raw(bounds);
        let mut net = Network::zeros(NetworkSpec::new(4, vec![3], 1)).unwrap();
        assert!(matches!(
            response_map(&mut net, &mut feat, 3),
            Err(Error::NotTwoDimensional(4))
        ));
    }
}
