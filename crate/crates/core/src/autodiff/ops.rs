//! Forward definitions of every differentiable op recorded on a [`Tape`].

use super::kernels::{self, ConvGeom};
use super::tape::{gelu, CustomOp, Op, Tape, Var};
use crate::error::{Error, Result};

/// Output length of a strided convolution, or `None` when the padded input is
/// shorter than the kernel.
pub fn conv_out_len(t: usize, k: usize, stride: usize, padding: usize) -> Option<usize> {
    if k == 0 || stride == 0 || t + 2 * padding < k {
        return None;
    }
    Some((t + 2 * padding - k) / stride + 1)
}

/// Output length of a transposed convolution.
pub fn conv_transpose_out_len(t: usize, k: usize, stride: usize, padding: usize) -> Option<usize> {
    if k == 0 || stride == 0 || t == 0 {
        return None;
    }
    ((t - 1) * stride + k).checked_sub(2 * padding).filter(|&n| n > 0)
}

impl Tape {
    fn need2(&self, a: Var, b: Var) -> bool {
        self.needs_grad(a) || self.needs_grad(b)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn dims2(&self, op: &'static str, v: Var, what: &str) -> Result<(usize, usize)> {
        match self.shape(v) {
            &[r, c] => Ok((r, c)),
            s => Err(Error::shape(op, format!("{what} must be 2-D, got {s:?}"))),
        }
    }

    /// 1-D convolution of `x: [C_in, T]` with `w: [C_out, C_in, k]`.
    pub fn conv1d(&mut self, x: Var, w: Var, bias: Option<Var>, stride: usize, padding: usize) -> Result<Var> {
        const OP: &str = "conv1d";
        let (c_in, t_in) = self.dims2(OP, x, "input")?;
        let &[c_out, wc_in, k] = self.shape(w) else {
            return Err(Error::shape(OP, format!("weight must be [C_out, C_in, k], got {:?}", self.shape(w))));
        };
        if wc_in != c_in {
            return Err(Error::shape(OP, format!("C_in: input has {c_in} channels, weight expects {wc_in}")));
        }
        if let Some(b) = bias {
            if self.shape(b) != [c_out] {
                return Err(Error::shape(OP, format!("C_out: bias {:?} vs {c_out} output channels", self.shape(b))));
            }
        }
        if stride == 0 {
            return Err(Error::arg(OP, "stride must be >= 1"));
        }
        let t_out = conv_out_len(t_in, k, stride, padding).ok_or_else(|| {
            Error::shape(OP, format!("T: padded length {} shorter than kernel {k}", t_in + 2 * padding))
        })?;
        let geom = ConvGeom { c_in, c_out, k, stride, pad: padding, t_in, t_out };
        let out = kernels::conv1d_forward(self.value(x), self.value(w), bias.map(|b| self.value(b)), &geom);
        let needs = self.need2(x, w) || bias.is_some_and(|b| self.needs_grad(b));
        Ok(self.push(vec![c_out, t_out], out, Op::Conv1d { x, w, b: bias, geom }, needs))
    }

    /// Transposed 1-D convolution of `x: [C_in, T]` with `w: [C_in, C_out, k]`;
    /// the adjoint of [`Tape::conv1d`] with the same weight.
    pub fn conv_transpose1d(&mut self, x: Var, w: Var, bias: Option<Var>, stride: usize, padding: usize) -> Result<Var> {
        const OP: &str = "conv_transpose1d";
        let (c_in, t_in) = self.dims2(OP, x, "input")?;
        let &[wc_in, c_out, k] = self.shape(w) else {
            return Err(Error::shape(OP, format!("weight must be [C_in, C_out, k], got {:?}", self.shape(w))));
        };
        if wc_in != c_in {
            return Err(Error::shape(OP, format!("C_in: input has {c_in} channels, weight expects {wc_in}")));
        }
        if let Some(b) = bias {
            if self.shape(b) != [c_out] {
                return Err(Error::shape(OP, format!("C_out: bias {:?} vs {c_out} output channels", self.shape(b))));
            }
        }
        if stride == 0 {
            return Err(Error::arg(OP, "stride must be >= 1"));
        }
        let t_out = conv_transpose_out_len(t_in, k, stride, padding)
            .ok_or_else(|| Error::shape(OP, format!("T: input length {t_in} too short for kernel {k} / padding {padding}")))?;
        // Geometry of the conv1d whose adjoint this is.
        let geom = ConvGeom { c_in: c_out, c_out: c_in, k, stride, pad: padding, t_in: t_out, t_out: t_in };
        let mut out = kernels::conv1d_backward_input(self.value(x), self.value(w), &geom);
        if let Some(b) = bias {
            let bv = self.value(b);
            for (c, row) in out.chunks_exact_mut(t_out).enumerate() {
                row.iter_mut().for_each(|v| *v += bv[c]);
            }
        }
        let needs = self.need2(x, w) || bias.is_some_and(|b| self.needs_grad(b));
        Ok(self.push(vec![c_out, t_out], out, Op::ConvTranspose1d { x, w, b: bias, geom }, needs))
    }

    /// Snake activation `x + sin²(αx)/α` with one α per channel of `x: [C, T]`.
    pub fn snake(&mut self, x: Var, alpha: Var) -> Result<Var> {
        const OP: &str = "snake";
        let (c, t) = self.dims2(OP, x, "input")?;
        if self.shape(alpha) != [c] {
            return Err(Error::shape(OP, format!("alpha {:?} vs {c} channels", self.shape(alpha))));
        }
        let al = self.value(alpha);
        if let Some(bad) = al.iter().position(|a| !(*a > 0.0)) {
            return Err(Error::arg(OP, format!("alpha must be > 0, channel {bad} has {}", al[bad])));
        }
        let out = self
            .value(x)
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let a = al[i / t];
                let s = (a * v).sin();
                v + s * s / a
            })
            .collect();
        let needs = self.need2(x, alpha);
        Ok(self.push(vec![c, t], out, Op::Snake { x, alpha }, needs))
    }

    /// `[m, k] · [k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        const OP: &str = "matmul";
        let (m, k) = self.dims2(OP, a, "lhs")?;
        let (k2, n) = self.dims2(OP, b, "rhs")?;
        if k != k2 {
            return Err(Error::shape(OP, format!("inner dimension {k} vs {k2}")));
        }
        let mut out = vec![0.0; m * n];
        kernels::gemm_acc(m, k, n, self.value(a), false, self.value(b), false, &mut out);
        let needs = self.need2(a, b);
        Ok(self.push(vec![m, n], out, Op::MatMul { a, b, m, k, n }, needs))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (rows, cols) = self.dims2("transpose", x, "input")?;
        let xs = self.value(x);
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = xs[r * cols + c];
            }
        }
        let needs = self.needs_grad(x);
        Ok(self.push(vec![cols, rows], out, Op::Transpose { x, rows, cols }, needs))
    }

    /// Same values under a new shape with equal element count.
    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        if super::tensor::numel(&shape) != self.value(x).len() {
            return Err(Error::shape("reshape", format!("{:?} -> {shape:?}", self.shape(x))));
        }
        let out = self.value(x).to_vec();
        let needs = self.needs_grad(x);
        Ok(self.push(shape, out, Op::Reshape { x }, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        let needs = self.need2(a, b);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Add { a, b }, needs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x - y).collect();
        let needs = self.need2(a, b);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Sub { a, b }, needs))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        let needs = self.need2(a, b);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Mul { a, b }, needs))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let out = self.value(x).iter().map(|v| v * c).collect();
        let needs = self.needs_grad(x);
        self.push(self.shape(x).to_vec(), out, Op::Scale { x, c }, needs)
    }

    /// Adds `b: [C]` to every row of `x: [N, C]`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (_, cols) = self.dims2("add_bias", x, "input")?;
        if self.shape(b) != [cols] {
            return Err(Error::shape("add_bias", format!("bias {:?} vs {cols} columns", self.shape(b))));
        }
        let bv = self.value(b);
        let out = self.value(x).iter().enumerate().map(|(i, v)| v + bv[i % cols]).collect();
        let needs = self.need2(x, b);
        Ok(self.push(self.shape(x).to_vec(), out, Op::AddBias { x, b, cols }, needs))
    }

    /// `x · w + b` for `x: [N, in]`, `w: [in, out]`, `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        self.add_bias(y, b)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|&v| sigmoid(v)).collect();
        let needs = self.needs_grad(x);
        self.push(self.shape(x).to_vec(), out, Op::Sigmoid { x }, needs)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|v| v.tanh()).collect();
        let needs = self.needs_grad(x);
        self.push(self.shape(x).to_vec(), out, Op::Tanh { x }, needs)
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|&v| gelu(v)).collect();
        let needs = self.needs_grad(x);
        self.push(self.shape(x).to_vec(), out, Op::Gelu { x }, needs)
    }

    /// Softmax over the last axis of a 2-D tensor.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let (_, cols) = self.dims2("softmax", x, "input")?;
        let mut out = self.value(x).to_vec();
        for row in out.chunks_exact_mut(cols) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
        let needs = self.needs_grad(x);
        Ok(self.push(self.shape(x).to_vec(), out, Op::Softmax { x, cols }, needs))
    }

    /// Layer normalization over the last axis of `x: [N, C]` with affine `gain`/`bias: [C]`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        const OP: &str = "layer_norm";
        let (_, cols) = self.dims2(OP, x, "input")?;
        if self.shape(gain) != [cols] || self.shape(bias) != [cols] {
            return Err(Error::shape(OP, format!("affine params must be [{cols}]")));
        }
        let (g, b) = (self.value(gain), self.value(bias));
        let mut out = vec![0.0; self.value(x).len()];
        let mut inv_std = Vec::new();
        for (row, o) in self.value(x).chunks_exact(cols).zip(out.chunks_exact_mut(cols)) {
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for c in 0..cols {
                o[c] = (row[c] - mean) * is * g[c] + b[c];
            }
        }
        let needs = self.needs_grad(x) || self.need2(gain, bias);
        Ok(self.push(self.shape(x).to_vec(), out, Op::LayerNorm { x, gain, bias, cols, inv_std }, needs))
    }

    /// Concatenates 2-D tensors with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        const OP: &str = "concat_cols";
        let Some(&first) = parts.first() else {
            return Err(Error::arg(OP, "no inputs"));
        };
        let (rows, _) = self.dims2(OP, first, "input")?;
        let mut spec = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.dims2(OP, p, "input")?;
            if r != rows {
                return Err(Error::shape(OP, format!("row count {r} vs {rows}")));
            }
            spec.push((p, c));
        }
        let total: usize = spec.iter().map(|(_, c)| c).sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &(p, c) in &spec {
                out.extend_from_slice(&self.value(p)[r * c..(r + 1) * c]);
            }
        }
        let needs = parts.iter().any(|&p| self.needs_grad(p));
        Ok(self.push(vec![rows, total], out, Op::ConcatCols { parts: spec, rows }, needs))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let xs = self.value(x);
        let v = xs.iter().sum::<f64>() / xs.len() as f64;
        let needs = self.needs_grad(x);
        self.push(vec![], vec![v], Op::Mean { x }, needs)
    }

    /// Mean absolute value (L1 mean).
    pub fn abs_mean(&mut self, x: Var) -> Var {
        let xs = self.value(x);
        let v = xs.iter().map(|v| v.abs()).sum::<f64>() / xs.len() as f64;
        let needs = self.needs_grad(x);
        self.push(vec![], vec![v], Op::AbsMean { x }, needs)
    }

    /// Mean squared value (L2 mean).
    pub fn sq_mean(&mut self, x: Var) -> Var {
        let xs = self.value(x);
        let v = xs.iter().map(|v| v * v).sum::<f64>() / xs.len() as f64;
        let needs = self.needs_grad(x);
        self.push(vec![], vec![v], Op::SqMean { x }, needs)
    }

    /// Forward value `replacement`, backward identity into `x`.
    pub fn straight_through(&mut self, x: Var, replacement: Vec<f64>) -> Result<Var> {
        if replacement.len() != self.value(x).len() {
            return Err(Error::shape("straight_through", "replacement length differs from input"));
        }
        let needs = self.needs_grad(x);
        Ok(self.push(self.shape(x).to_vec(), replacement, Op::StraightThrough { x }, needs))
    }

    /// Looks up rows of `table: [K, D]` and lays them out as columns: `[D, codes.len()]`.
    pub fn gather_columns(&mut self, table: Var, codes: &[usize]) -> Result<Var> {
        const OP: &str = "gather";
        let (k, dim) = self.dims2(OP, table, "table")?;
        if let Some(bad) = codes.iter().find(|&&c| c >= k) {
            return Err(Error::arg(OP, format!("code {bad} out of range for {k} rows")));
        }
        let tv = self.value(table);
        let t = codes.len();
        let mut out = vec![0.0; dim * t];
        for (col, &code) in codes.iter().enumerate() {
            for d in 0..dim {
                out[d * t + col] = tv[code * dim + d];
            }
        }
        let needs = self.needs_grad(table);
        Ok(self.push(vec![dim, t], out, Op::Gather { table, dim, codes: codes.to_vec() }, needs))
    }

    /// Records an externally computed forward result with its own backward rule.
    pub fn custom(&mut self, x: Var, shape: Vec<usize>, value: Vec<f64>, op: Box<dyn CustomOp>) -> Result<Var> {
        if super::tensor::numel(&shape) != value.len() {
            return Err(Error::shape(op.name(), "output value does not match its shape"));
        }
        let needs = self.needs_grad(x);
        Ok(self.push(shape, value, Op::Custom { x, op }, needs))
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}
