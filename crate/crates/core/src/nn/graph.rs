//! Reverse-mode automatic differentiation over 2-D `f64` tensors.
//!
//! A [`Graph`] records the operations of one forward pass against a borrowed
//! [`ParamStore`]; [`Graph::backward`] returns gradients for every parameter.
//! Graphs are built per example and dropped afterwards.

use ndarray::{s, Array2, ArrayView2, Axis, Zip};

pub type Tensor = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Named trainable tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.raw_dim()))
                .collect(),
        }
    }
}

/// One gradient tensor per parameter, aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            t.mapv_inplace(|x| x * factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    /// Mean of the listed parameter rows, one output row per group.
    Embed(ParamId, Vec<Vec<usize>>),
    MatMul(Var, Var),
    Add(Var, Var),
    /// `a + row`, broadcasting a `1 x n` row over every row of `a`.
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    Slice(Var, usize, usize),
    StackRows(Vec<Var>),
    SelectRows(Var, Vec<usize>),
    /// Row-wise choice: `mask[r]` picks from the first operand, else the second.
    Blend(Var, Var, Vec<bool>),
    Sum(Vec<Var>),
    /// Summed binary cross-entropy of sigmoid(logits) against 0/1 targets.
    BceWithLogits(Var, Tensor),
    /// Summed softmax cross-entropy, one target column per row.
    SoftmaxXent(Var, Vec<usize>),
}

struct Node {
    value: Option<Tensor>,
    op: Op,
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> ArrayView2<'_, f64> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t.view(),
            (None, Op::Param(id)) => self.params.get(*id).view(),
            _ => unreachable!("node without value"),
        }
    }

    /// The value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        let t = self.value(v);
        debug_assert_eq!(t.dim(), (1, 1));
        t[[0, 0]]
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant)
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.constant(Tensor::zeros((rows, cols)))
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    /// Looks up rows of an embedding table and averages each group.
    /// An empty group yields a zero row.
    pub fn embed(&mut self, table: ParamId, groups: Vec<Vec<usize>>) -> Var {
        let t = self.params.get(table);
        let mut out = Tensor::zeros((groups.len(), t.ncols()));
        for (r, group) in groups.iter().enumerate() {
            if group.is_empty() {
                continue;
            }
            let mut row = out.row_mut(r);
            for &i in group {
                row += &t.row(i);
            }
            row /= group.len() as f64;
        }
        self.push(out, Op::Embed(table, groups))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(&self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = &self.value(a) + &self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "add_row expects a 1 x n row");
        let v = &self.value(a) + &self.value(row);
        self.push(v, Op::AddRow(a, row))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = &self.value(a) * &self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let v = self.value(a).mapv(|x| x * factor);
        self.push(v, Op::Scale(a, factor))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p)).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat: row counts differ");
        self.push(v, Op::Concat(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, lo: usize, hi: usize) -> Var {
        let v = self.value(a).slice(s![.., lo..hi]).to_owned();
        self.push(v, Op::Slice(a, lo, hi))
    }

    pub fn stack_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p)).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("stack_rows: column counts differ");
        self.push(v, Op::StackRows(parts.to_vec()))
    }

    pub fn select_rows(&mut self, a: Var, rows: Vec<usize>) -> Var {
        let v = self.value(a).select(Axis(0), &rows);
        self.push(v, Op::SelectRows(a, rows))
    }

    pub fn blend(&mut self, a: Var, b: Var, mask: Vec<bool>) -> Var {
        let mut v = self.value(b).to_owned();
        let av = self.value(a);
        for (r, &m) in mask.iter().enumerate() {
            if m {
                v.row_mut(r).assign(&av.row(r));
            }
        }
        self.push(v, Op::Blend(a, b, mask))
    }

    pub fn sum(&mut self, parts: &[Var]) -> Var {
        let mut v = self.value(parts[0]).to_owned();
        for &p in &parts[1..] {
            v += &self.value(p);
        }
        self.push(v, Op::Sum(parts.to_vec()))
    }

    pub fn bce_with_logits(&mut self, logits: Var, targets: Tensor) -> Var {
        let x = self.value(logits);
        assert_eq!(x.dim(), targets.dim(), "bce target shape");
        let mut loss = 0.0;
        Zip::from(&x).and(&targets).for_each(|&x, &t| {
            loss += x.max(0.0) - x * t + (-x.abs()).exp().ln_1p();
        });
        self.push(Tensor::from_elem((1, 1), loss), Op::BceWithLogits(logits, targets))
    }

    pub fn softmax_xent(&mut self, logits: Var, targets: Vec<usize>) -> Var {
        let x = self.value(logits);
        assert_eq!(x.nrows(), targets.len(), "softmax target count");
        let mut loss = 0.0;
        for (row, &t) in x.rows().into_iter().zip(&targets) {
            loss += log_sum_exp(row.iter().copied()) - row[t];
        }
        self.push(Tensor::from_elem((1, 1), loss), Op::SoftmaxXent(logits, targets))
    }

    /// Gradients of the scalar node `loss` with respect to every parameter.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.value(loss).dim(), (1, 1), "backward from a non-scalar");
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::ones((1, 1)));
        let mut out = self.params.zero_grads();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => out.tensors[id.0] += &g,
                Op::Embed(id, groups) => {
                    let target = &mut out.tensors[id.0];
                    for (r, group) in groups.iter().enumerate() {
                        if group.is_empty() {
                            continue;
                        }
                        let scale = 1.0 / group.len() as f64;
                        for &i in group {
                            target.row_mut(i).scaled_add(scale, &g.row(r));
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::AddRow(a, row) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, *row, gr);
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * &self.value(*b);
                    let gb = &g * &self.value(*a);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, f) => accumulate(&mut grads, *a, g.mapv(|x| x * f)),
                Op::Sigmoid(a) => {
                    let y = node.value.as_ref().unwrap();
                    let ga = Zip::from(&g).and(y).map_collect(|&g, &y| g * y * (1.0 - y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let y = node.value.as_ref().unwrap();
                    let ga = Zip::from(&g).and(y).map_collect(|&g, &y| g * (1.0 - y * y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Concat(parts) => {
                    let mut lo = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        accumulate(&mut grads, p, g.slice(s![.., lo..lo + w]).to_owned());
                        lo += w;
                    }
                }
                Op::Slice(a, lo, hi) => {
                    let mut ga = Tensor::zeros(self.value(*a).raw_dim());
                    ga.slice_mut(s![.., *lo..*hi]).assign(&g);
                    accumulate(&mut grads, *a, ga);
                }
                Op::StackRows(parts) => {
                    let mut lo = 0;
                    for &p in parts {
                        let h = self.value(p).nrows();
                        accumulate(&mut grads, p, g.slice(s![lo..lo + h, ..]).to_owned());
                        lo += h;
                    }
                }
                Op::SelectRows(a, rows) => {
                    let mut ga = Tensor::zeros(self.value(*a).raw_dim());
                    for (r, &src) in rows.iter().enumerate() {
                        let mut dst = ga.row_mut(src);
                        dst += &g.row(r);
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Blend(a, b, mask) => {
                    let mut ga = Tensor::zeros(g.raw_dim());
                    let mut gb = Tensor::zeros(g.raw_dim());
                    for (r, &m) in mask.iter().enumerate() {
                        if m {
                            ga.row_mut(r).assign(&g.row(r));
                        } else {
                            gb.row_mut(r).assign(&g.row(r));
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Sum(parts) => {
                    for &p in parts {
                        accumulate(&mut grads, p, g.clone());
                    }
                }
                Op::BceWithLogits(logits, targets) => {
                    let scale = g[[0, 0]];
                    let ga = Zip::from(&self.value(*logits))
                        .and(targets)
                        .map_collect(|&x, &t| scale * (sigmoid(x) - t));
                    accumulate(&mut grads, *logits, ga);
                }
                Op::SoftmaxXent(logits, targets) => {
                    let scale = g[[0, 0]];
                    let x = self.value(*logits);
                    let mut ga = Tensor::zeros(x.raw_dim());
                    for (r, &t) in targets.iter().enumerate() {
                        let row = x.row(r);
                        let lse = log_sum_exp(row.iter().copied());
                        for (c, &v) in row.iter().enumerate() {
                            ga[[r, c]] = scale * (v - lse).exp();
                        }
                        ga[[r, t]] -= scale;
                    }
                    accumulate(&mut grads, *logits, ga);
                }
            }
        }
        out
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}
