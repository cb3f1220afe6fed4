//! Small fully connected networks with exact reverse-mode gradients.
//!
//! Parameters live in one flat vector. Layer `l` stores its weight matrix
//! row-major (`out x in`) followed by its bias; [`Layout`] records the
//! offsets.

use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Selu,
    Identity,
}

const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;

impl Activation {
    fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Selu => {
                if x > T::zero() {
                    T::lit(SELU_LAMBDA) * x
                } else {
                    T::lit(SELU_LAMBDA * SELU_ALPHA) * x.exp_m1()
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    fn derivative<T: Real>(self, x: T, y: T) -> T {
        match self {
            Activation::Tanh => T::one() - y * y,
            Activation::Selu => {
                if x > T::zero() {
                    T::lit(SELU_LAMBDA)
                } else {
                    y + T::lit(SELU_LAMBDA * SELU_ALPHA)
                }
            }
            Activation::Identity => T::one(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Selu => "selu",
            Activation::Identity => "identity",
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "selu" => Ok(Activation::Selu),
            "identity" => Ok(Activation::Identity),
            other => Err(invalid("activation", format!("unknown `{other}`"))),
        }
    }
}

/// Architecture: `widths = [input, hidden..., output]`. Hidden layers use
/// `activation`; the output layer is affine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activation: Activation, seed: u64) -> Result<Self> {
        if widths.len() < 2 {
            return Err(invalid("widths", "need at least one layer"));
        }
        if widths.contains(&0) {
            return Err(invalid("widths", "widths must be positive"));
        }
        Ok(Self {
            widths,
            activation,
            seed,
        })
    }

    /// `input -> hidden x n_hidden -> output` with tanh hidden units.
    pub fn tanh(input: usize, hidden: usize, n_hidden: usize, output: usize, seed: u64) -> Result<Self> {
        let mut widths = vec![input];
        widths.extend(std::iter::repeat_n(hidden, n_hidden));
        widths.push(output);
        Self::new(widths, Activation::Tanh, seed)
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn layout(&self) -> Layout {
        let mut layers = Vec::with_capacity(self.n_layers());
        let mut offset = 0;
        for w in self.widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = offset;
            let bias = weights + fan_in * fan_out;
            offset = bias + fan_out;
            layers.push(LayerSlot {
                fan_in,
                fan_out,
                weights,
                bias,
            });
        }
        Layout {
            layers,
            total: offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub bias: usize,
}

/// Offsets of each layer's weights and bias in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub layers: Vec<LayerSlot>,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    spec: MlpSpec,
    layout: Layout,
    params: Vec<T>,
}

/// Pre- and post-activation values of every layer for one input.
struct Tape<T> {
    pre: Vec<Vec<T>>,
    post: Vec<Vec<T>>,
}

impl<T: Real> Mlp<T> {
    /// Initializes every weight and bias uniformly in `+-1/sqrt(fan_in)`,
    /// drawn from a ChaCha8 stream seeded with `spec.seed`.
    pub fn new(spec: MlpSpec) -> Self {
        let layout = spec.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut params = vec![T::zero(); layout.total];
        for slot in &layout.layers {
            let bound = T::from_usize_lossy(slot.fan_in).sqrt().recip();
            for p in &mut params[slot.weights..slot.bias + slot.fan_out] {
                *p = (T::lit(2.0) * T::sample_unit(&mut rng) - T::one()) * bound;
            }
        }
        Self {
            spec,
            layout,
            params,
        }
    }

    pub fn from_params(spec: MlpSpec, params: Vec<T>) -> Result<Self> {
        let layout = spec.layout();
        if params.len() != layout.total {
            return Err(Error::DimensionMismatch {
                expected: layout.total,
                got: params.len(),
            });
        }
        Ok(Self {
            spec,
            layout,
            params,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn run(&self, input: &[T]) -> Result<Tape<T>> {
        if input.len() != self.spec.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim(),
                got: input.len(),
            });
        }
        let last = self.layout.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layout.layers.len());
        let mut post: Vec<Vec<T>> = Vec::with_capacity(self.layout.layers.len() + 1);
        post.push(input.to_vec());
        for (l, slot) in self.layout.layers.iter().enumerate() {
            let x = &post[l];
            let w = &self.params[slot.weights..slot.bias];
            let b = &self.params[slot.bias..slot.bias + slot.fan_out];
            let z: Vec<T> = (0..slot.fan_out)
                .map(|o| {
                    let row = &w[o * slot.fan_in..(o + 1) * slot.fan_in];
                    row.iter().zip(x).fold(b[o], |acc, (&wi, &xi)| acc + wi * xi)
                })
                .collect();
            let y = if l == last {
                z.clone()
            } else {
                z.iter().map(|&v| self.spec.activation.apply(v)).collect()
            };
            pre.push(z);
            post.push(y);
        }
        Ok(Tape { pre, post })
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        Ok(self.run(input)?.post.pop().expect("non-empty"))
    }

    /// Gradient of `upstream . forward(input)` with respect to the parameters.
    pub fn backward(&self, input: &[T], upstream: &[T]) -> Result<Vec<T>> {
        let mut grad = vec![T::zero(); self.params.len()];
        self.backward_into(input, upstream, T::one(), &mut grad)?;
        Ok(grad)
    }

    /// Accumulates `scale * d(upstream . forward(input)) / dtheta` into `grad`.
    pub fn backward_into(&self, input: &[T], upstream: &[T], scale: T, grad: &mut [T]) -> Result<()> {
        if upstream.len() != self.spec.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.output_dim(),
                got: upstream.len(),
            });
        }
        if grad.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: grad.len(),
            });
        }
        let tape = self.run(input)?;
        let last = self.layout.layers.len() - 1;
        let mut delta: Vec<T> = upstream.iter().map(|&u| u * scale).collect();
        for (l, slot) in self.layout.layers.iter().enumerate().rev() {
            if l != last {
                for (o, dv) in delta.iter_mut().enumerate() {
                    *dv = *dv * self.spec.activation.derivative(tape.pre[l][o], tape.post[l + 1][o]);
                }
            }
            let x = &tape.post[l];
            for o in 0..slot.fan_out {
                let g = delta[o];
                if g == T::zero() {
                    continue;
                }
                let row = slot.weights + o * slot.fan_in;
                for (gi, &xi) in grad[row..row + slot.fan_in].iter_mut().zip(x) {
                    *gi = *gi + g * xi;
                }
                grad[slot.bias + o] = grad[slot.bias + o] + g;
            }
            if l > 0 {
                let w = &self.params[slot.weights..slot.bias];
                let mut next = vec![T::zero(); slot.fan_in];
                for (o, &g) in delta.iter().enumerate() {
                    let row = &w[o * slot.fan_in..(o + 1) * slot.fan_in];
                    for (n, &wi) in next.iter_mut().zip(row) {
                        *n = *n + g * wi;
                    }
                }
                delta = next;
            }
        }
        Ok(())
    }

    /// Rows `d output_i / d theta`, one per output unit.
    pub fn jacobian(&self, input: &[T]) -> Result<Vec<Vec<T>>> {
        let out = self.spec.output_dim();
        (0..out)
            .map(|i| {
                let mut e = vec![T::zero(); out];
                e[i] = T::one();
                self.backward(input, &e)
            })
            .collect()
    }

    /// Plain-text serialization: a header block then one parameter per line.
    pub fn write_text<W: Write>(&self, name: &str, w: &mut W) -> Result<()> {
        writeln!(w, "network {name}")?;
        writeln!(w, "activation {}", self.spec.activation.name())?;
        let widths: Vec<String> = self.spec.widths.iter().map(|v| v.to_string()).collect();
        writeln!(w, "widths {}", widths.join(" "))?;
        writeln!(w, "seed {}", self.spec.seed)?;
        writeln!(w, "params {}", self.params.len())?;
        for p in &self.params {
            writeln!(w, "{:e}", p.to_f64().unwrap_or(f64::NAN))?;
        }
        Ok(())
    }

    /// Reads back what [`write_text`](Self::write_text) wrote; returns the name.
    pub fn read_text<R: BufRead>(lines: &mut std::io::Lines<R>) -> Result<(String, Self)> {
        let name = expect_field(lines, "network")?;
        let activation: Activation = expect_field(lines, "activation")?.parse()?;
        let widths = expect_field(lines, "widths")?
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|e| Error::Checkpoint(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let seed = parse_num::<u64>(&expect_field(lines, "seed")?)?;
        let count = parse_num::<usize>(&expect_field(lines, "params")?)?;
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines
                .next()
                .ok_or_else(|| Error::Checkpoint("truncated parameter block".into()))??;
            let v = parse_num::<f64>(line.trim())?;
            params.push(T::from_f64(v).ok_or_else(|| Error::Checkpoint("bad value".into()))?);
        }
        let spec = MlpSpec::new(widths, activation, seed)?;
        Ok((name, Self::from_params(spec, params)?))
    }
}

pub(crate) fn expect_field<R: BufRead>(lines: &mut std::io::Lines<R>, key: &str) -> Result<String> {
    let line = lines
        .next()
        .ok_or_else(|| Error::Checkpoint(format!("missing `{key}`")))??;
    let rest = line
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| Error::Checkpoint(format!("expected `{key}`, found `{line}`")))?;
    Ok(rest.trim().to_string())
}

pub(crate) fn parse_num<N: FromStr>(s: &str) -> Result<N>
where
    N::Err: std::fmt::Display,
{
    s.parse::<N>().map_err(|e| Error::Checkpoint(format!("`{s}`: {e}")))
}

/// `theta += lr * grad` (ascent; pass a negated loss gradient to descend).
pub fn sgd_step<T: Real>(params: &mut [T], grad: &[T], lr: T) {
    debug_assert_eq!(params.len(), grad.len());
    for (p, &g) in params.iter_mut().zip(grad) {
        *p = *p + lr * g;
    }
}

/// Bias-corrected Adam, in the same ascent convention as [`sgd_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(n_params: usize, beta1: T, beta2: T, eps: T) -> Result<Self> {
        let unit = |x: T| x >= T::zero() && x < T::one();
        if !unit(beta1) || !unit(beta2) || !(eps > T::zero()) {
            return Err(invalid("adam", "need 0 <= beta < 1 and eps > 0"));
        }
        Ok(Self {
            beta1,
            beta2,
            eps,
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            t: 0,
        })
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T], lr: T) {
        debug_assert_eq!(params.len(), grad.len());
        self.t += 1;
        let c1 = T::one() - self.beta1.powi(self.t);
        let c2 = T::one() - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (T::one() - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (T::one() - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] = params[i] + lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(seed: u64) -> Mlp<f64> {
        Mlp::new(MlpSpec::tanh(3, 5, 2, 2, seed).unwrap())
    }

    #[test]
    fn spec_validation() {
        assert!(MlpSpec::new(vec![3], Activation::Tanh, 0).is_err());
        assert!(MlpSpec::new(vec![3, 0, 1], Activation::Tanh, 0).is_err());
        let spec = MlpSpec::tanh(2, 32, 2, 2, 0).unwrap();
        assert_eq!(spec.layout().total, 2 * 32 + 32 + 32 * 32 + 32 + 32 * 2 + 2);
    }

    #[test]
    fn layout_partitions_params() {
        let spec = MlpSpec::tanh(4, 7, 3, 2, 0).unwrap();
        let layout = spec.layout();
        let mut next = 0;
        for s in &layout.layers {
            assert_eq!(s.weights, next);
            assert_eq!(s.bias, s.weights + s.fan_in * s.fan_out);
            next = s.bias + s.fan_out;
        }
        assert_eq!(next, layout.total);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let spec = MlpSpec::tanh(3, 4, 2, 2, 0).unwrap();
        let n = spec.layout().total;
        let m = Mlp::<f64>::from_params(spec, vec![0.0; n]).unwrap();
        assert_eq!(m.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer() {
        let spec = MlpSpec::new(vec![2, 2], Activation::Tanh, 0).unwrap();
        let m = Mlp::from_params(spec, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.forward(&[0.3, -0.7]).unwrap(), vec![0.3, -0.7]);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = net(9);
        assert_eq!(a.params(), net(9).params());
        assert_ne!(a.params(), net(10).params());
        for slot in &a.layout().layers {
            let bound = 1.0 / (slot.fan_in as f64).sqrt();
            for &p in &a.params()[slot.weights..slot.bias + slot.fan_out] {
                assert!(p.abs() <= bound);
            }
        }
    }

    #[test]
    fn dimension_errors() {
        let m = net(0);
        assert!(m.forward(&[1.0]).is_err());
        assert!(m.backward(&[1.0, 2.0, 3.0], &[1.0]).is_err());
    }

    #[test]
    fn backward_zero_upstream_and_linearity() {
        let m = net(4);
        let x = [0.2, -0.4, 0.9];
        assert!(m.backward(&x, &[0.0, 0.0]).unwrap().iter().all(|&g| g == 0.0));
        let g1 = m.backward(&x, &[0.7, -0.1]).unwrap();
        let g2 = m.backward(&x, &[-0.3, 0.5]).unwrap();
        let g12 = m.backward(&x, &[0.4, 0.4]).unwrap();
        for i in 0..g1.len() {
            assert!((g1[i] + g2[i] - g12[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn selu_backward_matches_finite_differences() {
        let spec = MlpSpec::new(vec![2, 6, 6, 1], Activation::Selu, 2).unwrap();
        let m = Mlp::<f64>::new(spec.clone());
        let x = [0.5, -1.5];
        let g = m.backward(&x, &[1.0]).unwrap();
        let h = 1e-6;
        for i in 0..m.n_params() {
            let mut p = m.params().to_vec();
            p[i] += h;
            let up = Mlp::from_params(spec.clone(), p.clone()).unwrap().forward(&x).unwrap()[0];
            p[i] -= 2.0 * h;
            let dn = Mlp::from_params(spec.clone(), p).unwrap().forward(&x).unwrap()[0];
            assert!(((up - dn) / (2.0 * h) - g[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn text_round_trip() {
        let m = net(12);
        let mut buf = Vec::new();
        m.write_text("actor", &mut buf).unwrap();
        let mut lines = std::io::BufRead::lines(&buf[..]);
        let (name, back) = Mlp::<f64>::read_text(&mut lines).unwrap();
        assert_eq!(name, "actor");
        assert_eq!(back, m);
    }

    #[test]
    fn sgd_examples() {
        let mut p = vec![1.0, 2.0];
        sgd_step(&mut p, &[0.0, 0.0], 0.5);
        assert_eq!(p, vec![1.0, 2.0]);
        sgd_step(&mut p, &[1.0, 0.0], 1.0);
        assert_eq!(p, vec![2.0, 2.0]);
        let mut a = vec![0.25, -1.0];
        let mut b = a.clone();
        sgd_step(&mut a, &[0.5, 3.0], 0.5);
        sgd_step(&mut b, &[0.5, 3.0], 0.25);
        sgd_step(&mut b, &[0.5, 3.0], 0.25);
        assert_eq!(a, b);
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut adam = Adam::new(2, 0.9, 0.999, 1e-8).unwrap();
        let mut p = vec![1.0, -1.0];
        for _ in 0..10 {
            adam.step(&mut p, &[0.0, 0.0], 0.1);
        }
        assert_eq!(p, vec![1.0, -1.0]);
        assert!(Adam::<f64>::new(1, 1.0, 0.9, 1e-8).is_err());
    }

    #[test]
    fn adam_hand_trace() {
        // beta = (0.5, 0.9), eps = 1e-8, lr = 0.1, grads 1, -2, 3 on one parameter.
        // t=1: m=0.5 v=0.1 m^=1 v^=1 step=0.1
        // t=2: m=-0.75 v=0.49 m^=-1 v^=2.578947.. step=-0.1/1.605909..= -0.0622700..
        // t=3: m=1.125 v=1.341 m^=1.285714.. v^=4.9483.. step=0.1*1.285714/2.224481..=0.0577980..
        let mut adam = Adam::new(1, 0.5, 0.9, 1e-8).unwrap();
        let mut p = vec![0.0];
        let mut trace = Vec::new();
        for g in [1.0, -2.0, 3.0] {
            adam.step(&mut p, &[g], 0.1);
            trace.push(p[0]);
        }
        let expected = [
            0.1,
            0.1 - 0.1 / (0.49_f64 / 0.19).sqrt(),
            0.1 - 0.1 / (0.49_f64 / 0.19).sqrt() + 0.1 * (1.125 / 0.875) / (1.341_f64 / 0.271).sqrt(),
        ];
        for (a, e) in trace.iter().zip(expected) {
            assert!((a - e).abs() < 1e-7, "{a} vs {e}");
        }
    }

    #[test]
    fn adam_constant_gradient_step_tends_to_lr() {
        let mut adam = Adam::new(1, 0.9, 0.999, 1e-8).unwrap();
        let mut p = vec![0.0];
        let mut last: f64 = 0.0;
        for _ in 0..5000 {
            let before = p[0];
            adam.step(&mut p, &[-0.37], 0.01);
            last = p[0] - before;
        }
        assert!((last + 0.01).abs() < 1e-6);
    }
}
