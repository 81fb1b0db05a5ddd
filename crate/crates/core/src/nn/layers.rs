//! Parameterized building blocks recorded onto a [`Graph`].

use rand::Rng;

use super::graph::{Graph, ParamId, ParamStore, Tensor, Var};

pub(crate) fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> Tensor {
    Tensor::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..=bound))
}

/// `x W + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        Self {
            weight: store.add(format!("{name}.weight"), uniform(rng, input, output, bound)),
            bias: store.add(format!("{name}.bias"), uniform(rng, 1, output, bound)),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        let xw = g.matmul(x, w);
        g.add_row(xw, b)
    }
}

/// A single-layer LSTM with gates ordered input, forget, cell, output.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub input_weight: ParamId,
    pub hidden_weight: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

impl Lstm {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let bound = 1.0 / (hidden.max(1) as f64).sqrt();
        Self {
            input_weight: store.add(format!("{name}.wx"), uniform(rng, input, 4 * hidden, bound)),
            hidden_weight: store.add(format!("{name}.wh"), uniform(rng, hidden, 4 * hidden, bound)),
            bias: store.add(format!("{name}.bias"), uniform(rng, 1, 4 * hidden, bound)),
            hidden,
        }
    }

    /// One step for a batch: `x` is `B x input`, `h`/`c` are `B x hidden`.
    pub fn step(&self, g: &mut Graph, x: Var, h: Var, c: Var) -> (Var, Var) {
        let n = self.hidden;
        let wx = g.param(self.input_weight);
        let wh = g.param(self.hidden_weight);
        let b = g.param(self.bias);
        let xw = g.matmul(x, wx);
        let hw = g.matmul(h, wh);
        let pre = g.add(xw, hw);
        let gates = g.add_row(pre, b);

        let i = g.slice_cols(gates, 0, n);
        let i = g.sigmoid(i);
        let f = g.slice_cols(gates, n, 2 * n);
        let f = g.sigmoid(f);
        let cand = g.slice_cols(gates, 2 * n, 3 * n);
        let cand = g.tanh(cand);
        let o = g.slice_cols(gates, 3 * n, 4 * n);
        let o = g.sigmoid(o);

        let keep = g.mul(f, c);
        let write = g.mul(i, cand);
        let c_next = g.add(keep, write);
        let squashed = g.tanh(c_next);
        let h_next = g.mul(o, squashed);
        (h_next, c_next)
    }

    /// Runs over `inputs` (each `B x input`) from a zero state. Rows whose
    /// mask is false at a step keep their previous state, so each row's final
    /// state is its state after its own last valid input. Returns the hidden
    /// state after every step.
    pub fn run(&self, g: &mut Graph, inputs: &[Var], masks: Option<&[Vec<bool>]>, batch: usize) -> Vec<Var> {
        let mut h = g.zeros(batch, self.hidden);
        let mut c = g.zeros(batch, self.hidden);
        let mut out = Vec::with_capacity(inputs.len());
        for (t, &x) in inputs.iter().enumerate() {
            let (h_new, c_new) = self.step(g, x, h, c);
            match masks.map(|m| &m[t]) {
                Some(mask) if mask.iter().any(|m| !m) => {
                    h = g.blend(h_new, h, mask.clone());
                    c = g.blend(c_new, c, mask.clone());
                }
                _ => {
                    h = h_new;
                    c = c_new;
                }
            }
            out.push(h);
        }
        out
    }
}
