//! Independent reference implementations used by the integration tests.

#![allow(dead_code)]

use rand::Rng;

use tdlab::featurize::BoundsSpec;
use tdlab::net::Network;

/// Uniform point inside `bounds`.
pub fn random_point<R: Rng + ?Sized>(r: &mut R, bounds: &BoundsSpec) -> Vec<f64> {
    bounds.ranges().iter().map(|&(lo, hi)| r.gen_range(lo..hi)).collect()
}

/// Plain dense forward pass through the network's weight accessors.
/// Returns the outputs and the smallest hidden pre-activation magnitude.
pub fn oracle_forward(net: &Network, x: &[f64]) -> (Vec<f64>, f64) {
    let spec = net.spec();
    let mut widths = vec![spec.input_length];
    widths.extend(&spec.hidden_layers);
    widths.push(spec.outputs);
    let last = widths.len() - 2;
    let mut act = x.to_vec();
    let mut min_pre = f64::INFINITY;
    for l in 0..=last {
        let mut next = Vec::with_capacity(widths[l + 1]);
        for row in 0..widths[l + 1] {
            let mut p = net.bias(l, row);
            for (col, a) in act.iter().enumerate() {
                p += net.weight(l, row, col) * a;
            }
            if l == last {
                next.push(p);
            } else {
                min_pre = min_pre.min(p.abs());
                next.push(p.max(0.0));
            }
        }
        act = next;
    }
    (act, min_pre)
}

/// Dense copy of a network's weights, evaluated layer by layer.
pub struct OracleNet {
    /// `weights[l][row][col]`
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

/// Location of one parameter.
#[derive(Clone, Copy, Debug)]
pub enum Param {
    Weight(usize, usize, usize),
    Bias(usize, usize),
}

impl OracleNet {
    pub fn from_network(net: &Network) -> Self {
        let spec = net.spec();
        let mut widths = vec![spec.input_length];
        widths.extend(&spec.hidden_layers);
        widths.push(spec.outputs);
        let weights = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| (0..w[1]).map(|r| (0..w[0]).map(|c| net.weight(l, r, c)).collect()).collect())
            .collect();
        let biases = widths[1..]
            .iter()
            .enumerate()
            .map(|(l, &w)| (0..w).map(|r| net.bias(l, r)).collect())
            .collect();
        OracleNet { weights, biases }
    }

    /// Parameters in flat order: layer by layer, row-major weights, then
    /// biases.
    pub fn layout(&self) -> Vec<Param> {
        let mut out = Vec::new();
        for (l, w) in self.weights.iter().enumerate() {
            for (r, row) in w.iter().enumerate() {
                out.extend((0..row.len()).map(|c| Param::Weight(l, r, c)));
            }
            out.extend((0..self.biases[l].len()).map(|r| Param::Bias(l, r)));
        }
        out
    }

    pub fn get_mut(&mut self, p: Param) -> &mut f64 {
        match p {
            Param::Weight(l, r, c) => &mut self.weights[l][r][c],
            Param::Bias(l, r) => &mut self.biases[l][r],
        }
    }

    fn layer(&self, l: usize, input: &[f64]) -> Vec<f64> {
        let last = l + 1 == self.weights.len();
        self.weights[l]
            .iter()
            .zip(&self.biases[l])
            .map(|(row, b)| {
                let p = b + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
                if last {
                    p
                } else {
                    p.max(0.0)
                }
            })
            .collect()
    }

    /// Inputs to every layer plus the outputs: `acts[0]` is `x`.
    pub fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for l in 0..self.weights.len() {
            let next = self.layer(l, acts.last().unwrap());
            acts.push(next);
        }
        acts
    }

    /// Outputs when evaluation restarts at layer `from` with its cached input.
    pub fn outputs_from(&self, from: usize, input: &[f64]) -> Vec<f64> {
        let mut a = input.to_vec();
        for l in from..self.weights.len() {
            a = self.layer(l, &a);
        }
        a
    }
}

/// (tiling, tile coordinate per dimension).
pub type Tile = (usize, Vec<i64>);

/// Tiles hit by `s`: tiling `t` of `n` shifts the grid by `t/n` of a tile.
pub fn oracle_tiles(s: &[f64], bounds: &BoundsSpec, n: usize, tiles: usize) -> Vec<Tile> {
    (0..n)
        .map(|t| {
            let coords = s
                .iter()
                .zip(bounds.ranges())
                .map(|(&x, &(lo, hi))| {
                    let pos = (x - lo) / (hi - lo) * tiles as f64 + t as f64 / n as f64;
                    (pos.floor() as i64).clamp(0, tiles as i64 - 1)
                })
                .collect();
            (t, coords)
        })
        .collect()
}

/// `∫_0^x f(t, 1 - t) dt` by tanh-sinh quadrature; `f` receives the
/// complement separately so endpoint singularities keep full precision.
pub fn tanh_sinh(f: &dyn Fn(f64, f64) -> f64, x: f64) -> f64 {
    let h = 1.0 / 256.0;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut sum = 0.0;
    let mut k = -(6.0 / h) as i64;
    while (k as f64) * h <= 6.0 {
        let s = k as f64 * h;
        let u = half_pi * s.sinh();
        // node t = x (1 + tanh u) / 2 written without cancellation
        let t = x / (1.0 + (-2.0 * u).exp());
        let x_minus_t = x / (1.0 + (2.0 * u).exp());
        let one_minus_t = (1.0 - x) + x_minus_t;
        let w = half_pi * s.cosh() / u.cosh().powi(2);
        if t > 0.0 && one_minus_t > 0.0 && w.is_finite() && w > 0.0 {
            sum += w * f(t, one_minus_t);
        }
        k += 1;
    }
    sum * h * x / 2.0
}

/// One acrobot step from the Lagrangian form `M(q) q'' = tau - c - g`,
/// solved by Cramer's rule and integrated with classical RK4.
/// Returns the wrapped, clamped state and the termination flag.
pub fn oracle_acrobot(s: [f64; 4], torque: f64) -> ([f64; 4], bool) {
    use std::f64::consts::PI;
    let accel = |q: &[f64; 4]| -> [f64; 4] {
        let (t1, t2, w1, w2) = (q[0], q[1], q[2], q[3]);
        let m11 = 3.5 + t2.cos();
        let m12 = 1.25 + 0.5 * t2.cos();
        let m22 = 1.25;
        let h = 0.5 * t2.sin();
        let g2 = 4.9 * (t1 + t2 - PI / 2.0).cos();
        let g1 = 14.7 * (t1 - PI / 2.0).cos() + g2;
        let r1 = -(-h * w2 * w2 - 2.0 * h * w1 * w2 + g1);
        let r2 = torque - h * w1 * w1 - g2;
        let det = m11 * m22 - m12 * m12;
        [w1, w2, (r1 * m22 - m12 * r2) / det, (m11 * r2 - m12 * r1) / det]
    };
    let dt = 0.2;
    let add = |a: &[f64; 4], b: &[f64; 4], c: f64| -> [f64; 4] { std::array::from_fn(|i| a[i] + c * b[i]) };
    let k1 = accel(&s);
    let k2 = accel(&add(&s, &k1, dt / 2.0));
    let k3 = accel(&add(&s, &k2, dt / 2.0));
    let k4 = accel(&add(&s, &k3, dt));
    let n: [f64; 4] = std::array::from_fn(|i| s[i] + dt * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0);
    let wrap = |a: f64| (a + PI).rem_euclid(2.0 * PI) - PI;
    let out = [
        wrap(n[0]),
        wrap(n[1]),
        n[2].clamp(-4.0 * PI, 4.0 * PI),
        n[3].clamp(-9.0 * PI, 9.0 * PI),
    ];
    let terminal = -out[0].cos() - (out[0] + out[1]).cos() > 1.0;
    (out, terminal)
}

/// Distance between two angles on the circle.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    use std::f64::consts::PI;
    ((a - b + PI).rem_euclid(2.0 * PI) - PI).abs()
}
