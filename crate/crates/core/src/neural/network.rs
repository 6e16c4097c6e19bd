//! Network definitions, forward pass and hand-derived reverse-mode
//! gradients (backpropagation through time for the recurrent cells).
//!
//! Parameters live in one flat vector; [`Layout`] maps each layer onto it.
//! Weight matrices are row-major `(fan_out, fan_in)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::{sigmoid, ActivationKind};
use super::loss::LossKind;
use super::NeuralError;
use crate::dataset::Encoding;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CellKind {
    Elman,
    Lstm,
    Gru,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "cell", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Architecture {
    DenseStack,
    Rbf,
    Recurrent(CellKind),
}

/// Network shape.
///
/// For dense and RBF networks `layer_count` counts neuron layers including
/// the input layer, so a 4-layer dense stack has two hidden layers and a
/// 3-layer RBF network is input → Gaussian units → output. For recurrent
/// networks it is the number of stacked cells; a dense head maps the last
/// hidden state to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub architecture: Architecture,
    /// Input width (dense/RBF) or features per time step (recurrent).
    pub input_units: usize,
    pub layer_count: usize,
    pub hidden_width: usize,
    pub activation: ActivationKind,
    pub output_units: usize,
    pub output_activation: ActivationKind,
    /// RBF only: train centers and width, or only the output weights.
    #[serde(default = "yes")]
    pub rbf_trainable_centers: bool,
}

fn yes() -> bool {
    true
}

/// Named architectures with their default shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Preset {
    Fdnn,
    Rbfnn,
    Rnn,
    Lstm,
    Gru,
}

pub const DENSE_HIDDEN_WIDTH: usize = 64;
pub const RECURRENT_HIDDEN_WIDTH: usize = 32;

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Fdnn, Preset::Rbfnn, Preset::Rnn, Preset::Lstm, Preset::Gru];
    pub const RECURRENT: [Preset; 3] = [Preset::Rnn, Preset::Lstm, Preset::Gru];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fdnn => "FDNN",
            Preset::Rbfnn => "RBFNN",
            Preset::Rnn => "RNN",
            Preset::Lstm => "LSTM",
            Preset::Gru => "GRU",
        }
    }

    pub fn parse(name: &str) -> Option<Preset> {
        match name.to_ascii_uppercase().as_str() {
            "FDNN" => Some(Preset::Fdnn),
            "RBFNN" | "RBF" => Some(Preset::Rbfnn),
            "RNN" | "ELMAN" => Some(Preset::Rnn),
            "LSTM" => Some(Preset::Lstm),
            "GRU" => Some(Preset::Gru),
            _ => None,
        }
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, Preset::Rnn | Preset::Lstm | Preset::Gru)
    }

    pub fn encoding(self) -> Encoding {
        if self.is_recurrent() {
            Encoding::Windowed
        } else {
            Encoding::Binary32
        }
    }

    pub fn config(self, output_units: usize) -> NetworkConfig {
        let recurrent = |cell| NetworkConfig {
            architecture: Architecture::Recurrent(cell),
            input_units: 4,
            layer_count: 10,
            hidden_width: RECURRENT_HIDDEN_WIDTH,
            activation: ActivationKind::Tanh,
            output_units,
            output_activation: ActivationKind::Identity,
            rbf_trainable_centers: true,
        };
        match self {
            Preset::Fdnn => NetworkConfig {
                architecture: Architecture::DenseStack,
                input_units: 32,
                layer_count: 4,
                hidden_width: DENSE_HIDDEN_WIDTH,
                activation: ActivationKind::Sigmoid,
                output_units,
                output_activation: ActivationKind::Identity,
                rbf_trainable_centers: true,
            },
            Preset::Rbfnn => NetworkConfig {
                architecture: Architecture::Rbf,
                input_units: 32,
                layer_count: 3,
                hidden_width: DENSE_HIDDEN_WIDTH,
                activation: ActivationKind::Gaussian,
                output_units,
                output_activation: ActivationKind::Identity,
                rbf_trainable_centers: true,
            },
            Preset::Rnn => recurrent(CellKind::Elman),
            Preset::Lstm => recurrent(CellKind::Lstm),
            Preset::Gru => recurrent(CellKind::Gru),
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::Config(m.to_string()));
        if self.input_units == 0 || self.output_units == 0 || self.hidden_width == 0 {
            return bad("input_units, hidden_width and output_units must be >= 1");
        }
        if self.output_activation == ActivationKind::Gaussian {
            return bad("GAUSSIAN is not an output activation");
        }
        match self.architecture {
            Architecture::DenseStack => {
                if self.layer_count < 2 {
                    return bad("a dense stack needs at least input and output layers");
                }
                if self.activation == ActivationKind::Gaussian {
                    return bad("GAUSSIAN units belong to RBF networks");
                }
            }
            Architecture::Rbf => {
                if self.layer_count < 3 {
                    return bad("an RBF network needs input, Gaussian and output layers");
                }
                if self.activation != ActivationKind::Gaussian {
                    return bad("RBF hidden units must be GAUSSIAN");
                }
            }
            Architecture::Recurrent(_) => {
                if self.layer_count == 0 {
                    return bad("a recurrent network needs at least one cell");
                }
                if self.activation == ActivationKind::Gaussian {
                    return bad("GAUSSIAN is not a recurrent activation");
                }
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        Layout::of(self).total
    }

    pub fn is_recurrent(&self) -> bool {
        matches!(self.architecture, Architecture::Recurrent(_))
    }
}

#[derive(Debug, Clone)]
struct DenseLayout {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

#[derive(Debug, Clone)]
struct RbfLayout {
    centers: usize,
    log_sigma: usize,
    units: usize,
    input: usize,
}

#[derive(Debug, Clone)]
struct CellLayout {
    w: usize,
    u: usize,
    b: usize,
    /// GRU keeps separate recurrent biases.
    b_h: usize,
    input: usize,
    hidden: usize,
    gates: usize,
}

/// Offsets of every parameter block in the flat vector.
#[derive(Debug, Clone)]
pub struct Layout {
    cells: Vec<CellLayout>,
    rbf: Option<RbfLayout>,
    dense: Vec<DenseLayout>,
    pub total: usize,
}

impl Layout {
    pub fn of(cfg: &NetworkConfig) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let mut cells = Vec::new();
        let mut rbf = None;
        let mut widths = Vec::new();
        match cfg.architecture {
            Architecture::DenseStack => {
                widths.push(cfg.input_units);
                widths.extend(std::iter::repeat_n(cfg.hidden_width, cfg.layer_count.saturating_sub(2)));
                widths.push(cfg.output_units);
            }
            Architecture::Rbf => {
                let units = cfg.hidden_width;
                rbf = Some(RbfLayout {
                    centers: take(units * cfg.input_units),
                    log_sigma: take(1),
                    units,
                    input: cfg.input_units,
                });
                widths.push(units);
                widths.extend(std::iter::repeat_n(cfg.hidden_width, cfg.layer_count.saturating_sub(3)));
                widths.push(cfg.output_units);
            }
            Architecture::Recurrent(cell) => {
                let gates = match cell {
                    CellKind::Elman => 1,
                    CellKind::Gru => 3,
                    CellKind::Lstm => 4,
                };
                let h = cfg.hidden_width;
                for l in 0..cfg.layer_count {
                    let input = if l == 0 { cfg.input_units } else { h };
                    let w = take(gates * h * input);
                    let u = take(gates * h * h);
                    let b = take(gates * h);
                    let b_h = if cell == CellKind::Gru { take(gates * h) } else { b };
                    cells.push(CellLayout { w, u, b, b_h, input, hidden: h, gates });
                }
                widths.push(h);
                widths.push(cfg.output_units);
            }
        }
        let dense = widths
            .windows(2)
            .map(|io| {
                let w = take(io[0] * io[1]);
                let b = take(io[1]);
                DenseLayout { w, b, fan_in: io[0], fan_out: io[1] }
            })
            .collect();
        Layout { cells, rbf, dense, total: at }
    }
}

// out += W x, W is (rows, cols)
#[inline]
fn matvec_add<T: Scalar>(w: &[T], cols: usize, x: &[T], out: &mut [T]) {
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = T::zero();
        for (a, b) in row.iter().zip(x) {
            acc += *a * *b;
        }
        *o += acc;
    }
}

// out += Wᵀ d
#[inline]
fn matvec_t_add<T: Scalar>(w: &[T], cols: usize, d: &[T], out: &mut [T]) {
    for (r, &dr) in d.iter().enumerate() {
        if dr == T::zero() {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += *a * dr;
        }
    }
}

// g += d xᵀ
#[inline]
fn outer_add<T: Scalar>(g: &mut [T], cols: usize, d: &[T], x: &[T]) {
    for (r, &dr) in d.iter().enumerate() {
        if dr == T::zero() {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (gi, xi) in row.iter_mut().zip(x) {
            *gi += dr * *xi;
        }
    }
}

#[derive(Debug, Clone, Default)]
struct StepCache<T> {
    x: Vec<T>,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    /// Gate outputs: Elman [h]; LSTM [i f g o]; GRU [r z n].
    gates: Vec<T>,
    c: Vec<T>,
    tc: Vec<T>,
    /// GRU: U_n h + b_hn; Elman: pre-activation.
    aux: Vec<T>,
    h: Vec<T>,
}

#[derive(Debug, Clone)]
enum Cache<T> {
    Dense,
    Rbf { d2: Vec<T>, phi: Vec<T> },
    Recurrent { steps: Vec<Vec<StepCache<T>>> },
}

/// Output of a forward pass together with what backward needs.
#[derive(Debug, Clone)]
pub struct Forward<T> {
    pub output: Vec<T>,
    input: Vec<T>,
    /// Dense-part pre-activations and activations (`acts[0]` is the dense
    /// input).
    pre: Vec<Vec<T>>,
    acts: Vec<Vec<T>>,
    cache: Cache<T>,
}

struct Net<'a, T> {
    cfg: &'a NetworkConfig,
    layout: Layout,
    params: &'a [T],
}

impl<'a, T: Scalar> Net<'a, T> {
    fn new(cfg: &'a NetworkConfig, params: &'a [T]) -> Result<Self, NeuralError> {
        cfg.validate()?;
        let layout = Layout::of(cfg);
        if params.len() != layout.total {
            return Err(NeuralError::Shape(format!(
                "expected {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        Ok(Net { cfg, layout, params })
    }

    fn hidden_act(&self) -> ActivationKind {
        match self.cfg.architecture {
            Architecture::DenseStack => self.cfg.activation,
            _ => ActivationKind::Sigmoid,
        }
    }

    fn dense_forward(&self, input: Vec<T>) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
        let n = self.layout.dense.len();
        let mut pre = Vec::with_capacity(n);
        let mut acts = Vec::with_capacity(n + 1);
        acts.push(input);
        for (i, l) in self.layout.dense.iter().enumerate() {
            let act = if i + 1 == n { self.cfg.output_activation } else { self.hidden_act() };
            let mut z = self.params[l.b..l.b + l.fan_out].to_vec();
            matvec_add(&self.params[l.w..l.w + l.fan_in * l.fan_out], l.fan_in, &acts[i], &mut z);
            let a = z.iter().map(|&v| act.apply(v)).collect();
            pre.push(z);
            acts.push(a);
        }
        (pre, acts)
    }

    fn forward(&self, input: &[T]) -> Result<Forward<T>, NeuralError> {
        let cfg = self.cfg;
        let (dense_in, cache) = match cfg.architecture {
            Architecture::DenseStack => {
                if input.len() != cfg.input_units {
                    return Err(shape_err(cfg.input_units, input.len()));
                }
                (input.to_vec(), Cache::Dense)
            }
            Architecture::Rbf => {
                if input.len() != cfg.input_units {
                    return Err(shape_err(cfg.input_units, input.len()));
                }
                let r = self.layout.rbf.as_ref().expect("rbf layout");
                let sigma = self.params[r.log_sigma].exp();
                let two_s2 = T::lit(2.0) * sigma * sigma;
                let mut d2 = Vec::with_capacity(r.units);
                let mut phi = Vec::with_capacity(r.units);
                for j in 0..r.units {
                    let c = &self.params[r.centers + j * r.input..r.centers + (j + 1) * r.input];
                    let d: T = input.iter().zip(c).map(|(&x, &m)| (x - m) * (x - m)).sum();
                    d2.push(d);
                    phi.push((-d / two_s2).exp());
                }
                (phi.clone(), Cache::Rbf { d2, phi })
            }
            Architecture::Recurrent(cell) => {
                if input.is_empty() || !input.len().is_multiple_of(cfg.input_units) {
                    return Err(NeuralError::Shape(format!(
                        "recurrent input of length {} is not a whole number of {}-feature steps",
                        input.len(),
                        cfg.input_units
                    )));
                }
                let steps = self.recurrent_forward(cell, input);
                let last = steps.last().and_then(|l| l.last()).map(|s| s.h.clone()).expect("non-empty");
                (last, Cache::Recurrent { steps })
            }
        };
        let (pre, acts) = self.dense_forward(dense_in);
        Ok(Forward { output: acts.last().expect("output layer").clone(), input: input.to_vec(), pre, acts, cache })
    }

    fn recurrent_forward(&self, cell: CellKind, input: &[T]) -> Vec<Vec<StepCache<T>>> {
        let p = self.params;
        let act = self.cfg.activation;
        let mut seq: Vec<Vec<T>> = input.chunks(self.cfg.input_units).map(<[T]>::to_vec).collect();
        let mut all = Vec::with_capacity(self.layout.cells.len());
        for l in &self.layout.cells {
            let h_n = l.hidden;
            let w = &p[l.w..l.w + l.gates * h_n * l.input];
            let u = &p[l.u..l.u + l.gates * h_n * h_n];
            let b = &p[l.b..l.b + l.gates * h_n];
            let mut h = vec![T::zero(); h_n];
            let mut c = vec![T::zero(); h_n];
            let mut steps = Vec::with_capacity(seq.len());
            for x in &seq {
                let mut sc = StepCache { x: x.clone(), h_prev: h.clone(), ..Default::default() };
                match cell {
                    CellKind::Elman => {
                        let mut z = b.to_vec();
                        matvec_add(w, l.input, x, &mut z);
                        matvec_add(u, h_n, &h, &mut z);
                        h = z.iter().map(|&v| act.apply(v)).collect();
                        sc.aux = z;
                        sc.gates = h.clone();
                    }
                    CellKind::Lstm => {
                        let mut z = b.to_vec();
                        matvec_add(w, l.input, x, &mut z);
                        matvec_add(u, h_n, &h, &mut z);
                        let mut gates = vec![T::zero(); 4 * h_n];
                        for k in 0..h_n {
                            gates[k] = sigmoid(z[k]);
                            gates[h_n + k] = sigmoid(z[h_n + k]);
                            gates[2 * h_n + k] = act.apply(z[2 * h_n + k]);
                            gates[3 * h_n + k] = sigmoid(z[3 * h_n + k]);
                        }
                        sc.c_prev = c.clone();
                        for k in 0..h_n {
                            c[k] = gates[h_n + k] * c[k] + gates[k] * gates[2 * h_n + k];
                        }
                        let tc: Vec<T> = c.iter().map(|&v| act.apply(v)).collect();
                        h = (0..h_n).map(|k| gates[3 * h_n + k] * tc[k]).collect();
                        sc.aux = z;
                        sc.gates = gates;
                        sc.c = c.clone();
                        sc.tc = tc;
                    }
                    CellKind::Gru => {
                        let bh = &p[l.b_h..l.b_h + 3 * h_n];
                        let mut zi = b.to_vec();
                        matvec_add(w, l.input, x, &mut zi);
                        let mut zh = bh.to_vec();
                        matvec_add(u, h_n, &h, &mut zh);
                        let mut gates = vec![T::zero(); 3 * h_n];
                        for k in 0..h_n {
                            gates[k] = sigmoid(zi[k] + zh[k]);
                            gates[h_n + k] = sigmoid(zi[h_n + k] + zh[h_n + k]);
                        }
                        let mut n_pre = vec![T::zero(); h_n];
                        for k in 0..h_n {
                            n_pre[k] = zi[2 * h_n + k] + gates[k] * zh[2 * h_n + k];
                            gates[2 * h_n + k] = act.apply(n_pre[k]);
                        }
                        h = (0..h_n)
                            .map(|k| {
                                let zk = gates[h_n + k];
                                (T::one() - zk) * gates[2 * h_n + k] + zk * h[k]
                            })
                            .collect();
                        sc.aux = zh[2 * h_n..].to_vec();
                        sc.c = n_pre;
                        sc.gates = gates;
                    }
                }
                sc.h = h.clone();
                steps.push(sc);
            }
            seq = steps.iter().map(|s| s.h.clone()).collect();
            all.push(steps);
        }
        all
    }

    /// Accumulates `∂L/∂θ` into `grad` given `∂L/∂output`.
    fn backward(&self, fwd: &Forward<T>, d_out: &[T], grad: &mut [T]) {
        let p = self.params;
        let n = self.layout.dense.len();
        let mut da = d_out.to_vec();
        for i in (0..n).rev() {
            let l = &self.layout.dense[i];
            let act = if i + 1 == n { self.cfg.output_activation } else { self.hidden_act() };
            let delta: Vec<T> = (0..l.fan_out)
                .map(|k| da[k] * act.derivative(fwd.pre[i][k], fwd.acts[i + 1][k]))
                .collect();
            outer_add(&mut grad[l.w..l.w + l.fan_in * l.fan_out], l.fan_in, &delta, &fwd.acts[i]);
            for (g, d) in grad[l.b..l.b + l.fan_out].iter_mut().zip(&delta) {
                *g += *d;
            }
            let mut prev = vec![T::zero(); l.fan_in];
            matvec_t_add(&p[l.w..l.w + l.fan_in * l.fan_out], l.fan_in, &delta, &mut prev);
            da = prev;
        }
        match &fwd.cache {
            Cache::Dense => {}
            Cache::Rbf { d2, phi } => {
                if !self.cfg.rbf_trainable_centers {
                    return;
                }
                let r = self.layout.rbf.as_ref().expect("rbf layout");
                let sigma = p[r.log_sigma].exp();
                let s2 = sigma * sigma;
                let mut d_log_sigma = T::zero();
                for j in 0..r.units {
                    let g = da[j] * phi[j];
                    // φ = exp(−d²/(2σ²)): ∂φ/∂μ = φ (x − μ)/σ², ∂φ/∂ln σ = φ d²/σ²
                    d_log_sigma += g * d2[j] / s2;
                    let c0 = r.centers + j * r.input;
                    for k in 0..r.input {
                        grad[c0 + k] += g * (fwd.input[k] - p[c0 + k]) / s2;
                    }
                }
                grad[r.log_sigma] += d_log_sigma;
            }
            Cache::Recurrent { steps } => {
                let cell = match self.cfg.architecture {
                    Architecture::Recurrent(c) => c,
                    _ => unreachable!(),
                };
                let t_len = steps[0].len();
                let mut d_seq: Vec<Vec<T>> = vec![vec![T::zero(); self.cfg.hidden_width]; t_len];
                d_seq[t_len - 1] = da;
                for (li, l) in self.layout.cells.iter().enumerate().rev() {
                    d_seq = self.cell_backward(cell, l, &steps[li], d_seq, grad);
                }
            }
        }
    }

    /// BPTT through one layer; returns `∂L/∂x_t` for every step.
    fn cell_backward(
        &self,
        cell: CellKind,
        l: &CellLayout,
        steps: &[StepCache<T>],
        d_h_seq: Vec<Vec<T>>,
        grad: &mut [T],
    ) -> Vec<Vec<T>> {
        let p = self.params;
        let act = self.cfg.activation;
        let h_n = l.hidden;
        let w_len = l.gates * h_n * l.input;
        let u_len = l.gates * h_n * h_n;
        let w = &p[l.w..l.w + w_len];
        let u = &p[l.u..l.u + u_len];
        let mut dh_next = vec![T::zero(); h_n];
        let mut dc_next = vec![T::zero(); h_n];
        let mut dx_seq = vec![Vec::new(); steps.len()];
        for t in (0..steps.len()).rev() {
            let s = &steps[t];
            let dh: Vec<T> = (0..h_n).map(|k| d_h_seq[t][k] + dh_next[k]).collect();
            let mut dx = vec![T::zero(); l.input];
            let mut dh_prev = vec![T::zero(); h_n];
            match cell {
                CellKind::Elman => {
                    let dz: Vec<T> = (0..h_n).map(|k| dh[k] * act.derivative(s.aux[k], s.h[k])).collect();
                    outer_add(&mut grad[l.w..l.w + w_len], l.input, &dz, &s.x);
                    outer_add(&mut grad[l.u..l.u + u_len], h_n, &dz, &s.h_prev);
                    for (g, d) in grad[l.b..l.b + h_n].iter_mut().zip(&dz) {
                        *g += *d;
                    }
                    matvec_t_add(w, l.input, &dz, &mut dx);
                    matvec_t_add(u, h_n, &dz, &mut dh_prev);
                }
                CellKind::Lstm => {
                    let g = &s.gates;
                    let mut dz = vec![T::zero(); 4 * h_n];
                    let mut dc_prev = vec![T::zero(); h_n];
                    for k in 0..h_n {
                        let (i, f, gg, o) = (g[k], g[h_n + k], g[2 * h_n + k], g[3 * h_n + k]);
                        let d_o = dh[k] * s.tc[k];
                        let dc = dc_next[k] + dh[k] * o * act.derivative(s.c[k], s.tc[k]);
                        dz[k] = dc * gg * i * (T::one() - i);
                        dz[h_n + k] = dc * s.c_prev[k] * f * (T::one() - f);
                        dz[2 * h_n + k] = dc * i * act.derivative(s.aux[2 * h_n + k], gg);
                        dz[3 * h_n + k] = d_o * o * (T::one() - o);
                        dc_prev[k] = dc * f;
                    }
                    outer_add(&mut grad[l.w..l.w + w_len], l.input, &dz, &s.x);
                    outer_add(&mut grad[l.u..l.u + u_len], h_n, &dz, &s.h_prev);
                    for (gb, d) in grad[l.b..l.b + 4 * h_n].iter_mut().zip(&dz) {
                        *gb += *d;
                    }
                    matvec_t_add(w, l.input, &dz, &mut dx);
                    matvec_t_add(u, h_n, &dz, &mut dh_prev);
                    dc_next = dc_prev;
                }
                CellKind::Gru => {
                    let g = &s.gates;
                    // input-side and hidden-side pre-activation gradients
                    let mut dzi = vec![T::zero(); 3 * h_n];
                    let mut dzh = vec![T::zero(); 3 * h_n];
                    for k in 0..h_n {
                        let (r, z, nn) = (g[k], g[h_n + k], g[2 * h_n + k]);
                        let dn = dh[k] * (T::one() - z);
                        let dzg = dh[k] * (s.h_prev[k] - nn);
                        dh_prev[k] += dh[k] * z;
                        let dan = dn * act.derivative(s.c[k], nn);
                        let dr = dan * s.aux[k];
                        let dar = dr * r * (T::one() - r);
                        let daz = dzg * z * (T::one() - z);
                        dzi[k] = dar;
                        dzh[k] = dar;
                        dzi[h_n + k] = daz;
                        dzh[h_n + k] = daz;
                        dzi[2 * h_n + k] = dan;
                        dzh[2 * h_n + k] = dan * r;
                    }
                    outer_add(&mut grad[l.w..l.w + w_len], l.input, &dzi, &s.x);
                    outer_add(&mut grad[l.u..l.u + u_len], h_n, &dzh, &s.h_prev);
                    for (gb, d) in grad[l.b..l.b + 3 * h_n].iter_mut().zip(&dzi) {
                        *gb += *d;
                    }
                    for (gb, d) in grad[l.b_h..l.b_h + 3 * h_n].iter_mut().zip(&dzh) {
                        *gb += *d;
                    }
                    matvec_t_add(w, l.input, &dzi, &mut dx);
                    matvec_t_add(u, h_n, &dzh, &mut dh_prev);
                }
            }
            dh_next = dh_prev;
            dx_seq[t] = dx;
        }
        dx_seq
    }
}

fn shape_err(expected: usize, got: usize) -> NeuralError {
    NeuralError::Shape(format!("expected input of length {expected}, got {got}"))
}

/// Runs the network on one input.
pub fn forward<T: Scalar>(config: &NetworkConfig, parameters: &[T], input: &[T]) -> Result<Forward<T>, NeuralError> {
    Net::new(config, parameters)?.forward(input)
}

/// Gradient of `loss(forward(input), target)` with respect to every
/// parameter, from a cached forward pass.
pub fn backward<T: Scalar>(
    config: &NetworkConfig,
    parameters: &[T],
    cached: &Forward<T>,
    loss_kind: &LossKind<T>,
    target: &[T],
) -> Result<Vec<T>, NeuralError> {
    let net = Net::new(config, parameters)?;
    let (_, d_out) = loss_kind.value_and_grad(&cached.output, target)?;
    let mut grad = vec![T::zero(); parameters.len()];
    net.backward(cached, &d_out, &mut grad);
    Ok(grad)
}

/// Mean loss and mean gradient over a batch of `(input, target)` pairs.
pub fn batch_loss_and_gradient<T: Scalar>(
    config: &NetworkConfig,
    parameters: &[T],
    batch: &[(&[T], &[T])],
    loss_kind: &LossKind<T>,
) -> Result<(T, Vec<T>), NeuralError> {
    if batch.is_empty() {
        return Err(NeuralError::Shape("empty batch".into()));
    }
    let net = Net::new(config, parameters)?;
    let mut grad = vec![T::zero(); parameters.len()];
    let mut total = T::zero();
    for (input, target) in batch {
        let fwd = net.forward(input)?;
        let (l, d_out) = loss_kind.value_and_grad(&fwd.output, target)?;
        total += l;
        net.backward(&fwd, &d_out, &mut grad);
    }
    let n = T::lit(batch.len() as f64);
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((total / n, grad))
}

/// Mean loss over a batch.
pub fn batch_loss<T: Scalar>(
    config: &NetworkConfig,
    parameters: &[T],
    batch: &[(&[T], &[T])],
    loss_kind: &LossKind<T>,
) -> Result<T, NeuralError> {
    if batch.is_empty() {
        return Err(NeuralError::Shape("empty batch".into()));
    }
    let net = Net::new(config, parameters)?;
    let mut total = T::zero();
    for (input, target) in batch {
        total += loss_kind.value(&net.forward(input)?.output, target)?;
    }
    Ok(total / T::lit(batch.len() as f64))
}

/// Glorot-uniform weights, zero biases. RBF centers are drawn from
/// `rbf_inputs` when given (uniform in [0, 1) otherwise) and the width is
/// the mean pairwise distance between centers.
pub fn init_parameters<T: Scalar>(
    config: &NetworkConfig,
    rng: &mut impl Rng,
    rbf_inputs: Option<&[Vec<T>]>,
) -> Result<Vec<T>, NeuralError> {
    config.validate()?;
    let layout = Layout::of(config);
    let mut p = vec![T::zero(); layout.total];
    let mut glorot = |p: &mut [T], fan_in: usize, fan_out: usize| {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in p.iter_mut() {
            *v = T::lit(rng.gen_range(-a..a));
        }
    };
    for l in &layout.cells {
        let h = l.hidden;
        for g in 0..l.gates {
            let w0 = l.w + g * h * l.input;
            glorot(&mut p[w0..w0 + h * l.input], l.input, h);
            let u0 = l.u + g * h * h;
            glorot(&mut p[u0..u0 + h * h], h, h);
        }
    }
    for l in &layout.dense {
        glorot(&mut p[l.w..l.w + l.fan_in * l.fan_out], l.fan_in, l.fan_out);
    }
    if let Some(r) = &layout.rbf {
        let mut centers: Vec<Vec<T>> = Vec::with_capacity(r.units);
        for _ in 0..r.units {
            let c = match rbf_inputs {
                Some(xs) if !xs.is_empty() => xs[rng.gen_range(0..xs.len())].clone(),
                _ => (0..r.input).map(|_| T::lit(rng.gen::<f64>())).collect(),
            };
            centers.push(c);
        }
        for (j, c) in centers.iter().enumerate() {
            if c.len() != r.input {
                return Err(shape_err(r.input, c.len()));
            }
            p[r.centers + j * r.input..r.centers + (j + 1) * r.input].copy_from_slice(c);
        }
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for a in 0..centers.len() {
            for b in a + 1..centers.len() {
                let d: f64 = centers[a]
                    .iter()
                    .zip(&centers[b])
                    .map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2))
                    .sum();
                sum += d.sqrt();
                pairs += 1;
            }
        }
        let sigma = if pairs > 0 && sum > 0.0 { sum / pairs as f64 } else { 1.0 };
        p[r.log_sigma] = T::lit(sigma.ln());
    }
    Ok(p)
}

/// RBF width `σ` encoded in a parameter vector (`None` for other
/// architectures).
pub fn rbf_sigma<T: Scalar>(config: &NetworkConfig, parameters: &[T]) -> Option<T> {
    Layout::of(config).rbf.map(|r| parameters[r.log_sigma].exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_parameters() {
        let mut cfg = Preset::Fdnn.config(5);
        let p = vec![0.0f64; cfg.parameter_count()];
        assert_eq!(forward(&cfg, &p, &[1.0; 32]).unwrap().output, vec![0.0; 5]);
        cfg.output_activation = ActivationKind::Sigmoid;
        assert_eq!(forward(&cfg, &p, &[1.0; 32]).unwrap().output, vec![0.5; 5]);

        let mut tanh = Preset::Fdnn.config(3);
        tanh.activation = ActivationKind::Tanh;
        tanh.output_activation = ActivationKind::Tanh;
        let p = vec![0.0f64; tanh.parameter_count()];
        assert_eq!(forward(&tanh, &p, &[0.3; 32]).unwrap().output, vec![0.0; 3]);

        for preset in Preset::RECURRENT {
            let mut cfg = preset.config(2);
            cfg.output_activation = ActivationKind::Tanh;
            let p = vec![0.0f64; cfg.parameter_count()];
            assert_eq!(forward(&cfg, &p, &[0.7; 12]).unwrap().output, vec![0.0; 2]);
        }
    }

    #[test]
    fn gaussian_unit_at_center() {
        let mut cfg = Preset::Rbfnn.config(1);
        cfg.hidden_width = 2;
        cfg.input_units = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = vec![0.2, -0.4, 1.0];
        let p = init_parameters::<f64>(&cfg, &mut rng, Some(std::slice::from_ref(&x))).unwrap();
        let fwd = forward(&cfg, &p, &x).unwrap();
        assert_eq!(fwd.acts[0], vec![1.0, 1.0]);
        assert_eq!(rbf_sigma(&cfg, &p), Some(1.0));
    }

    #[test]
    fn single_linear_unit_gradient() {
        let cfg = NetworkConfig {
            architecture: Architecture::DenseStack,
            input_units: 1,
            layer_count: 2,
            hidden_width: 1,
            activation: ActivationKind::Identity,
            output_units: 1,
            output_activation: ActivationKind::Identity,
            rbf_trainable_centers: true,
        };
        let (w, b, x, y) = (0.7f64, 0.0, 1.5, -0.4);
        let p = vec![w, b];
        let fwd = forward(&cfg, &p, &[x]).unwrap();
        let g = backward(&cfg, &p, &fwd, &LossKind::Mse, &[y]).unwrap();
        assert!((g[0] - 2.0 * (w * x - y) * x).abs() < 1e-12);
        let zero = backward(&cfg, &p, &fwd, &LossKind::Mse, &fwd.output.clone()).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_checks() {
        let cfg = Preset::Fdnn.config(2);
        let p = vec![0.0f64; cfg.parameter_count()];
        assert!(matches!(forward(&cfg, &p, &[0.0; 31]), Err(NeuralError::Shape(_))));
        assert!(matches!(forward(&cfg, &p[1..], &[0.0; 32]), Err(NeuralError::Shape(_))));
        let rnn = Preset::Rnn.config(2);
        let p = vec![0.0f64; rnn.parameter_count()];
        assert!(matches!(forward(&rnn, &p, &[0.0; 6]), Err(NeuralError::Shape(_))));
    }

    #[test]
    fn preset_shapes() {
        let f = Preset::Fdnn.config(7);
        assert_eq!((f.input_units, f.layer_count, f.activation), (32, 4, ActivationKind::Sigmoid));
        assert_eq!(f.parameter_count(), 32 * 64 + 64 + 64 * 64 + 64 + 64 * 7 + 7);
        let r = Preset::Rbfnn.config(7);
        assert_eq!((r.input_units, r.layer_count, r.activation), (32, 3, ActivationKind::Gaussian));
        for p in Preset::RECURRENT {
            let c = p.config(7);
            assert_eq!((c.input_units, c.layer_count, c.activation), (4, 10, ActivationKind::Tanh));
        }
    }
}
