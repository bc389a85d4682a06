use std::fmt;

use super::kernels::{self, ConvGeom};
use super::tensor::{numel, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A single-input differentiable operation implemented outside the core op set.
///
/// The tape stores the forward result; `backward` maps the output gradient to
/// the input gradient using whatever the implementor saved during forward.
pub trait CustomOp: Send + Sync {
    fn name(&self) -> &'static str;
    fn backward(&self, input: &[f64], grad_out: &[f64]) -> Vec<f64>;
}

pub(crate) enum Op {
    Leaf,
    Conv1d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    ConvTranspose1d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    Snake { x: Var, alpha: Var },
    MatMul { a: Var, b: Var, m: usize, k: usize, n: usize },
    Transpose { x: Var, rows: usize, cols: usize },
    Reshape { x: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { x: Var, c: f64 },
    AddBias { x: Var, b: Var, cols: usize },
    Sigmoid { x: Var },
    Tanh { x: Var },
    Gelu { x: Var },
    Softmax { x: Var, cols: usize },
    LayerNorm { x: Var, gain: Var, bias: Var, cols: usize, inv_std: Vec<f64> },
    ConcatCols { parts: Vec<(Var, usize)>, rows: usize },
    Mean { x: Var },
    AbsMean { x: Var },
    SqMean { x: Var },
    StraightThrough { x: Var },
    Gather { table: Var, dim: usize, codes: Vec<usize> },
    Custom { x: Var, op: Box<dyn CustomOp> },
}

impl Op {
    fn kind(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv1d { .. } => "conv1d",
            Op::ConvTranspose1d { .. } => "conv_transpose1d",
            Op::Snake { .. } => "snake",
            Op::MatMul { .. } => "matmul",
            Op::Transpose { .. } => "transpose",
            Op::Reshape { .. } => "reshape",
            Op::Add { .. } => "add",
            Op::Sub { .. } => "sub",
            Op::Mul { .. } => "mul",
            Op::Scale { .. } => "scale",
            Op::AddBias { .. } => "add_bias",
            Op::Sigmoid { .. } => "sigmoid",
            Op::Tanh { .. } => "tanh",
            Op::Gelu { .. } => "gelu",
            Op::Softmax { .. } => "softmax",
            Op::LayerNorm { .. } => "layer_norm",
            Op::ConcatCols { .. } => "concat_cols",
            Op::Mean { .. } => "mean",
            Op::AbsMean { .. } => "abs_mean",
            Op::SqMean { .. } => "sq_mean",
            Op::StraightThrough { .. } => "straight_through",
            Op::Gather { .. } => "gather",
            Op::Custom { op, .. } => op.name(),
        }
    }
}

pub(crate) struct Node {
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub op: Op,
    pub needs_grad: bool,
}

/// Reverse-mode recording of a computation.
///
/// Nodes are appended in evaluation order, so insertion order is a valid
/// topological order and [`Tape::backward`] simply walks it in reverse.
#[derive(Default)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("nodes", &self.nodes.len()).finish()
    }
}

/// Gradients produced by one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient of `v`, or zeros of the right length if nothing reached it.
    pub fn get_or_zeros(&self, tape: &Tape, v: Var) -> Vec<f64> {
        self.get(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; tape.value(v).len()])
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, delta: Vec<f64>) {
    match slot {
        Some(g) => g.iter_mut().zip(&delta).for_each(|(a, b)| *a += b),
        None => *slot = Some(delta),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Handle of the `i`-th recorded node.
    pub fn var_at(&self, i: usize) -> Option<Var> {
        (i < self.nodes.len()).then_some(Var(i))
    }

    /// Op kinds in insertion order.
    pub fn op_kinds(&self) -> Vec<&'static str> {
        self.nodes.iter().map(|n| n.op.kind()).collect()
    }

    /// Copies a recorded value out as a detached tensor.
    pub fn tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::new(n.shape.clone(), n.value.clone()).expect("tape node shape is consistent")
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let val = self.value(v);
        debug_assert_eq!(val.len(), 1);
        val[0]
    }

    pub(crate) fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, needs_grad: bool) -> Var {
        debug_assert_eq!(numel(&shape), value.len(), "{} produced inconsistent shape", op.kind());
        self.nodes.push(Node { shape, value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// Records a tensor as a leaf. Trainable leaves receive gradients.
    pub fn leaf(&mut self, t: &Tensor, trainable: bool) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, trainable)
    }

    pub fn constant(&mut self, t: &Tensor) -> Var {
        self.leaf(t, false)
    }

    /// Records raw values without a gradient path.
    pub fn constant_from(&mut self, shape: Vec<usize>, value: Vec<f64>) -> Result<Var> {
        if numel(&shape) != value.len() {
            return Err(Error::shape("constant", format!("shape {shape:?} vs {} values", value.len())));
        }
        Ok(self.push(shape, value, Op::Leaf, false))
    }

    /// Runs reverse-mode differentiation from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_node = &self.nodes[loss.0];
        if loss_node.value.len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got shape {:?}", loss_node.shape),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(gy) = grads[idx].take() else { continue };
            self.backprop_node(node, &gy, &mut grads);
            grads[idx] = Some(gy);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn backprop_node(&self, node: &Node, gy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Conv1d { x, w, b, geom } => {
                if self.wants(*x) {
                    let gx = kernels::conv1d_backward_input(gy, self.value(*w), geom);
                    accumulate(&mut grads[x.0], gx);
                }
                if self.wants(*w) {
                    let gw = kernels::conv1d_backward_weight(gy, self.value(*x), geom);
                    accumulate(&mut grads[w.0], gw);
                }
                if let Some(b) = b.filter(|b| self.wants(*b)) {
                    accumulate(&mut grads[b.0], kernels::row_sums(gy, geom.c_out, geom.t_out));
                }
            }
            Op::ConvTranspose1d { x, w, b, geom } => {
                // geom describes the adjoint conv1d: its input is our output.
                if self.wants(*x) {
                    let gx = kernels::conv1d_forward(gy, self.value(*w), None, geom);
                    accumulate(&mut grads[x.0], gx);
                }
                if self.wants(*w) {
                    let gw = kernels::conv1d_backward_weight(self.value(*x), gy, geom);
                    accumulate(&mut grads[w.0], gw);
                }
                if let Some(b) = b.filter(|b| self.wants(*b)) {
                    accumulate(&mut grads[b.0], kernels::row_sums(gy, geom.c_in, geom.t_in));
                }
            }
            Op::Snake { x, alpha } => {
                let xs = self.value(*x);
                let al = self.value(*alpha);
                let t = xs.len() / al.len();
                let (want_x, want_a) = (self.wants(*x), self.wants(*alpha));
                let mut gx = if want_x { vec![0.0; xs.len()] } else { Vec::new() };
                let mut ga = vec![0.0; al.len()];
                for (c, &a) in al.iter().enumerate() {
                    let mut acc = 0.0;
                    for i in c * t..(c + 1) * t {
                        let (s, co) = (a * xs[i]).sin_cos();
                        let s2 = 2.0 * s * co;
                        if want_x {
                            gx[i] = gy[i] * (1.0 + s2);
                        }
                        acc += gy[i] * (xs[i] * s2 / a - s * s / (a * a));
                    }
                    ga[c] = acc;
                }
                if want_x {
                    accumulate(&mut grads[x.0], gx);
                }
                if want_a {
                    accumulate(&mut grads[alpha.0], ga);
                }
            }
            Op::MatMul { a, b, m, k, n } => {
                if self.wants(*a) {
                    let mut ga = vec![0.0; m * k];
                    kernels::gemm_acc(*m, *n, *k, gy, false, self.value(*b), true, &mut ga);
                    accumulate(&mut grads[a.0], ga);
                }
                if self.wants(*b) {
                    let mut gb = vec![0.0; k * n];
                    kernels::gemm_acc(*k, *m, *n, self.value(*a), true, gy, false, &mut gb);
                    accumulate(&mut grads[b.0], gb);
                }
            }
            Op::Transpose { x, rows, cols } => {
                if self.wants(*x) {
                    // y is [cols, rows]; gx[r, c] = gy[c, r]
                    let mut gx = vec![0.0; rows * cols];
                    for r in 0..*rows {
                        for c in 0..*cols {
                            gx[r * cols + c] = gy[c * rows + r];
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
            }
            Op::Reshape { x } => {
                if self.wants(*x) {
                    accumulate(&mut grads[x.0], gy.to_vec());
                }
            }
            Op::Add { a, b } => {
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], gy.to_vec());
                }
                if self.wants(*b) {
                    accumulate(&mut grads[b.0], gy.to_vec());
                }
            }
            Op::Sub { a, b } => {
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], gy.to_vec());
                }
                if self.wants(*b) {
                    accumulate(&mut grads[b.0], gy.iter().map(|g| -g).collect());
                }
            }
            Op::Mul { a, b } => {
                if self.wants(*a) {
                    let gb: Vec<f64> = gy.iter().zip(self.value(*b)).map(|(g, v)| g * v).collect();
                    accumulate(&mut grads[a.0], gb);
                }
                if self.wants(*b) {
                    let ga: Vec<f64> = gy.iter().zip(self.value(*a)).map(|(g, v)| g * v).collect();
                    accumulate(&mut grads[b.0], ga);
                }
            }
            Op::Scale { x, c } => {
                if self.wants(*x) {
                    accumulate(&mut grads[x.0], gy.iter().map(|g| g * c).collect());
                }
            }
            Op::AddBias { x, b, cols } => {
                if self.wants(*x) {
                    accumulate(&mut grads[x.0], gy.to_vec());
                }
                if self.wants(*b) {
                    let mut gb = vec![0.0; *cols];
                    for row in gy.chunks_exact(*cols) {
                        gb.iter_mut().zip(row).for_each(|(a, g)| *a += g);
                    }
                    accumulate(&mut grads[b.0], gb);
                }
            }
            Op::Sigmoid { x } => {
                if self.wants(*x) {
                    let gx = gy.iter().zip(y).map(|(g, s)| g * s * (1.0 - s)).collect();
                    accumulate(&mut grads[x.0], gx);
                }
            }
            Op::Tanh { x } => {
                if self.wants(*x) {
                    let gx = gy.iter().zip(y).map(|(g, t)| g * (1.0 - t * t)).collect();
                    accumulate(&mut grads[x.0], gx);
                }
            }
            Op::Gelu { x } => {
                if self.wants(*x) {
                    let gx = gy.iter().zip(self.value(*x)).map(|(g, &v)| g * gelu_grad(v)).collect();
                    accumulate(&mut grads[x.0], gx);
                }
            }
            Op::Softmax { x, cols } => {
                if self.wants(*x) {
                    let mut gx = vec![0.0; y.len()];
                    for ((grow, yrow), out) in gy.chunks_exact(*cols).zip(y.chunks_exact(*cols)).zip(gx.chunks_exact_mut(*cols)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(g, p)| g * p).sum();
                        for ((o, g), p) in out.iter_mut().zip(grow).zip(yrow) {
                            *o = p * (g - dot);
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
            }
            Op::LayerNorm { x, gain, bias, cols, inv_std } => {
                let xs = self.value(*x);
                let gn = self.value(*gain);
                let rows = xs.len() / cols;
                let mut gx = vec![0.0; xs.len()];
                let mut g_gain = vec![0.0; *cols];
                let mut g_bias = vec![0.0; *cols];
                for r in 0..rows {
                    let row = &xs[r * cols..(r + 1) * cols];
                    let grow = &gy[r * cols..(r + 1) * cols];
                    let mean = row.iter().sum::<f64>() / *cols as f64;
                    let is = inv_std[r];
                    let xhat: Vec<f64> = row.iter().map(|v| (v - mean) * is).collect();
                    let dxhat: Vec<f64> = grow.iter().zip(gn).map(|(g, a)| g * a).collect();
                    let m1 = dxhat.iter().sum::<f64>() / *cols as f64;
                    let m2 = dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / *cols as f64;
                    for c in 0..*cols {
                        gx[r * cols + c] = is * (dxhat[c] - m1 - xhat[c] * m2);
                        g_gain[c] += grow[c] * xhat[c];
                        g_bias[c] += grow[c];
                    }
                }
                if self.wants(*x) {
                    accumulate(&mut grads[x.0], gx);
                }
                if self.wants(*gain) {
                    accumulate(&mut grads[gain.0], g_gain);
                }
                if self.wants(*bias) {
                    accumulate(&mut grads[bias.0], g_bias);
                }
            }
            Op::ConcatCols { parts, rows } => {
                let total: usize = parts.iter().map(|(_, c)| c).sum();
                let mut offset = 0;
                for &(p, c) in parts {
                    if self.wants(p) {
                        let mut gp = vec![0.0; rows * c];
                        for r in 0..*rows {
                            gp[r * c..(r + 1) * c].copy_from_slice(&gy[r * total + offset..r * total + offset + c]);
                        }
                        accumulate(&mut grads[p.0], gp);
                    }
                    offset += c;
                }
            }
            Op::Mean { x } => {
                if self.wants(*x) {
                    let n = self.value(*x).len();
                    accumulate(&mut grads[x.0], vec![gy[0] / n as f64; n]);
                }
            }
            Op::AbsMean { x } => {
                if self.wants(*x) {
                    let xs = self.value(*x);
                    let s = gy[0] / xs.len() as f64;
                    let gx = xs.iter().map(|v| if *v > 0.0 { s } else if *v < 0.0 { -s } else { 0.0 }).collect();
                    accumulate(&mut grads[x.0], gx);
                }
            }
            Op::SqMean { x } => {
                if self.wants(*x) {
                    let xs = self.value(*x);
                    let s = 2.0 * gy[0] / xs.len() as f64;
                    accumulate(&mut grads[x.0], xs.iter().map(|v| s * v).collect());
                }
            }
            Op::StraightThrough { x } => {
                if self.wants(*x) {
                    accumulate(&mut grads[x.0], gy.to_vec());
                }
            }
            Op::Gather { table, dim, codes } => {
                if self.wants(*table) {
                    let t = codes.len();
                    let mut gt = vec![0.0; self.value(*table).len()];
                    for (col, &code) in codes.iter().enumerate() {
                        for d in 0..*dim {
                            gt[code * dim + d] += gy[d * t + col];
                        }
                    }
                    accumulate(&mut grads[table.0], gt);
                }
            }
            Op::Custom { x, op } => {
                if self.wants(*x) {
                    accumulate(&mut grads[x.0], op.backward(self.value(*x), gy));
                }
            }
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}
