//! Slice-level numeric kernels shared by forward and backward passes.

/// Geometry of a strided, zero-padded 1-D convolution viewed in the
/// forward (downsampling) direction: `[c_in, t_in] -> [c_out, t_out]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub t_in: usize,
    pub t_out: usize,
}

impl ConvGeom {
    /// Output positions `t` for which `t*stride + j - pad` lands inside the input.
    #[inline]
    fn valid_range(&self, j: usize) -> (usize, usize) {
        let lo = if self.pad > j { (self.pad - j).div_ceil(self.stride) } else { 0 };
        let shifted = self.t_in + self.pad;
        let hi = if shifted > j { ((shifted - j - 1) / self.stride + 1).min(self.t_out) } else { 0 };
        (lo, hi.max(lo))
    }
}

/// Unfolds `x: [c_in, t_in]` into `[c_in·k, t_out]` patch columns.
fn im2col(x: &[f64], g: &ConvGeom) -> Vec<f64> {
    let mut col = vec![0.0; g.c_in * g.k * g.t_out];
    for ci in 0..g.c_in {
        let xin = &x[ci * g.t_in..(ci + 1) * g.t_in];
        for j in 0..g.k {
            let row = &mut col[(ci * g.k + j) * g.t_out..(ci * g.k + j + 1) * g.t_out];
            let (lo, hi) = g.valid_range(j);
            if hi == lo {
                continue;
            }
            let base = lo * g.stride + j - g.pad;
            if g.stride == 1 {
                row[lo..hi].copy_from_slice(&xin[base..base + (hi - lo)]);
            } else {
                for (o, xv) in row[lo..hi].iter_mut().zip(xin[base..].iter().step_by(g.stride)) {
                    *o = *xv;
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: scatters patch columns back onto `[c_in, t_in]`.
fn col2im(col: &[f64], g: &ConvGeom) -> Vec<f64> {
    let mut x = vec![0.0; g.c_in * g.t_in];
    for ci in 0..g.c_in {
        let xrow = &mut x[ci * g.t_in..(ci + 1) * g.t_in];
        for j in 0..g.k {
            let row = &col[(ci * g.k + j) * g.t_out..(ci * g.k + j + 1) * g.t_out];
            let (lo, hi) = g.valid_range(j);
            if hi == lo {
                continue;
            }
            let base = lo * g.stride + j - g.pad;
            if g.stride == 1 {
                for (xv, v) in xrow[base..base + (hi - lo)].iter_mut().zip(&row[lo..hi]) {
                    *xv += v;
                }
            } else {
                for (xv, v) in xrow[base..].iter_mut().step_by(g.stride).zip(&row[lo..hi]) {
                    *xv += v;
                }
            }
        }
    }
    x
}

pub(crate) fn conv1d_forward(x: &[f64], w: &[f64], bias: Option<&[f64]>, g: &ConvGeom) -> Vec<f64> {
    let mut out = vec![0.0; g.c_out * g.t_out];
    if let Some(b) = bias {
        for (row, &bv) in out.chunks_exact_mut(g.t_out).zip(b) {
            row.iter_mut().for_each(|v| *v = bv);
        }
    }
    if g.k == 1 && g.stride == 1 && g.pad == 0 {
        gemm_acc(g.c_out, g.c_in, g.t_out, w, false, x, false, &mut out);
    } else {
        let col = im2col(x, g);
        gemm_acc(g.c_out, g.c_in * g.k, g.t_out, w, false, &col, false, &mut out);
    }
    out
}

/// Gradient of conv1d wrt its input; also the forward map of a transposed convolution.
pub(crate) fn conv1d_backward_input(gy: &[f64], w: &[f64], g: &ConvGeom) -> Vec<f64> {
    if g.k == 1 && g.stride == 1 && g.pad == 0 {
        let mut gx = vec![0.0; g.c_in * g.t_in];
        gemm_acc(g.c_in, g.c_out, g.t_in, w, true, gy, false, &mut gx);
        return gx;
    }
    let mut col = vec![0.0; g.c_in * g.k * g.t_out];
    gemm_acc(g.c_in * g.k, g.c_out, g.t_out, w, true, gy, false, &mut col);
    col2im(&col, g)
}

/// Gradient of conv1d wrt its weight, `[c_out, c_in, k]`.
pub(crate) fn conv1d_backward_weight(gy: &[f64], x: &[f64], g: &ConvGeom) -> Vec<f64> {
    let mut gw = vec![0.0; g.c_out * g.c_in * g.k];
    if g.k == 1 && g.stride == 1 && g.pad == 0 {
        gemm_acc(g.c_out, g.t_out, g.c_in, gy, false, x, true, &mut gw);
    } else {
        let col = im2col(x, g);
        gemm_acc(g.c_out, g.t_out, g.c_in * g.k, gy, false, &col, true, &mut gw);
    }
    gw
}

pub(crate) fn row_sums(gy: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    (0..rows).map(|r| gy[r * cols..(r + 1) * cols].iter().sum()).collect()
}

/// `c += a · b` for row-major `a: [m,k]`, `b: [k,n]`, with optional transposes
/// applied through strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_acc(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: strides describe exactly the m*k, k*n and m*n buffers checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
