//! Small dense ReLU networks with Adam, shared by the fixing classifiers and
//! the Q-network.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// Layer widths, input first.
    pub sizes: Vec<usize>,
    /// Row-major `out x in` matrices.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Grads {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.weights, &self.biases)
    }

    pub fn scale(&mut self, s: f64) {
        for v in self
            .weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .flatten()
        {
            *v *= s;
        }
    }
}

fn flatten(w: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for (wl, bl) in w.iter().zip(b) {
        out.extend_from_slice(wl);
        out.extend_from_slice(bl);
    }
    out
}

/// Activations kept from a forward pass.
pub struct Trace {
    /// Layer inputs; `acts[0]` is the network input.
    acts: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl Mlp {
    /// He-normal weights, zero biases.
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output widths");
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let sd = (2.0 / fan_in.max(1) as f64).sqrt();
            let dist = Normal::new(0.0, sd).expect("valid normal");
            weights.push((0..fan_in * fan_out).map(|_| dist.sample(rng)).collect());
            biases.push(vec![0.0; fan_out]);
        }
        Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn params(&self) -> Vec<f64> {
        flatten(&self.weights, &self.biases)
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.num_params());
        let mut k = 0;
        for (wl, bl) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in wl.iter_mut().chain(bl.iter_mut()) {
                *v = p[k];
                k += 1;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).output
    }

    pub fn forward_trace(&self, x: &[f64]) -> Trace {
        assert_eq!(x.len(), self.input_dim(), "input width");
        let last = self.weights.len() - 1;
        let mut acts = Vec::with_capacity(self.weights.len());
        let mut h = x.to_vec();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let n_in = self.sizes[l];
            let mut z: Vec<f64> = b.clone();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                *zo += row.iter().zip(&h).map(|(a, c)| a * c).sum::<f64>();
            }
            if l < last {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            acts.push(std::mem::replace(&mut h, z));
        }
        Trace { acts, output: h }
    }

    /// Accumulate parameter gradients for upstream gradient `dout` on the output.
    pub fn backward(&self, trace: &Trace, dout: &[f64], grads: &mut Grads) {
        let mut delta = dout.to_vec();
        for l in (0..self.weights.len()).rev() {
            let n_in = self.sizes[l];
            let input = &trace.acts[l];
            let w = &self.weights[l];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                grads.biases[l][o] += d;
                let g = &mut grads.weights[l][o * n_in..(o + 1) * n_in];
                for (gi, xi) in g.iter_mut().zip(input) {
                    *gi += d * xi;
                }
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![0.0; n_in];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (p, wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += d * wi;
                }
            }
            // ReLU derivative, taken from the stored post-activation.
            for (p, a) in prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, net: &Mlp) -> Self {
        let n = net.num_params();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Grads) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        let g = grads.flat();
        let mut p = net.params();
        for k in 0..p.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g[k] * g[k];
            let mh = self.m[k] / b1t;
            let vh = self.v[k] / b2t;
            p[k] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
        net.set_params(&p);
    }
}

/// Fisher-Yates order of `0..n`.
pub fn shuffled(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for k in (1..n).rev() {
        let j = rng.random_range(0..=k);
        idx.swap(k, j);
    }
    idx
}

/// Central finite-difference gradient of `f` at the network's parameters.
pub fn numeric_grad(net: &Mlp, h: f64, f: impl Fn(&Mlp) -> f64) -> Vec<f64> {
    let base = net.params();
    let mut probe = net.clone();
    let mut out = Vec::with_capacity(base.len());
    let mut p = base.clone();
    for k in 0..base.len() {
        p[k] = base[k] + h;
        probe.set_params(&p);
        let up = f(&probe);
        p[k] = base[k] - h;
        probe.set_params(&p);
        let down = f(&probe);
        p[k] = base[k];
        out.push((up - down) / (2.0 * h));
    }
    out
}

/// Largest `|a-b| / max(|a|, |b|, floor)` over paired entries.
pub fn max_rel_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
