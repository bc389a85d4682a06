//! Central finite-difference gradient checking.

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Relative error above which a gradient is reported as wrong.
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input index, flat element index)` of the worst entry.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn flagged(&self) -> bool {
        !(self.max_rel_error <= GRAD_CHECK_TOLERANCE)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::arg("grad_check", format!("eps {eps} outside [1e-7, 1e-3]")));
    }
    Ok(())
}

/// Compares a supplied analytic gradient against central differences of `value`.
pub fn grad_check_with<F>(value: F, analytic: &[Vec<f64>], points: &[Tensor], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&[Tensor]) -> Result<f64>,
{
    check_eps(eps)?;
    let mut work: Vec<Tensor> = points.to_vec();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: (0, 0), analytic: 0.0, numeric: 0.0, checked: 0 };
    for (pi, point) in points.iter().enumerate() {
        if analytic[pi].len() != point.len() {
            return Err(Error::shape("grad_check", format!("analytic gradient #{pi} has wrong length")));
        }
        for e in 0..point.len() {
            let orig = point.data()[e];
            work[pi].data_mut()[e] = orig + eps;
            let plus = value(&work)?;
            work[pi].data_mut()[e] = orig - eps;
            let minus = value(&work)?;
            work[pi].data_mut()[e] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[pi][e];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if report.checked == 1 || !(err <= report.max_rel_error) {
                report.max_rel_error = err;
                report.worst = (pi, e);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

/// Gradient check of a tape-built scalar function of several inputs.
pub fn grad_check_many<F>(f: F, points: &[Tensor], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    check_eps(eps)?;
    let mut tape = Tape::new();
    let vars: Vec<Var> = points.iter().map(|p| tape.leaf(p, true)).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars.iter().map(|&v| grads.get_or_zeros(&tape, v)).collect();
    grad_check_with(
        |pts| {
            let mut tape = Tape::new();
            let vars: Vec<Var> = pts.iter().map(|p| tape.leaf(p, false)).collect();
            let out = f(&mut tape, &vars)?;
            Ok(tape.scalar(out))
        },
        &analytic,
        points,
        eps,
    )
}

/// Gradient check of a scalar function of one tensor.
pub fn grad_check<F>(f: F, point: &Tensor, eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    grad_check_many(|tape, vars| f(tape, vars[0]), std::slice::from_ref(point), eps)
}

/// Gradient check over every entry of every parameter in `store`.
pub fn grad_check_params<F>(store: &super::ParamStore, f: F, eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &super::Bound) -> Result<Var>,
{
    let points: Vec<Tensor> = store.iter().map(|(_, t)| t.detached()).collect();
    grad_check_many(|tape, vars| f(tape, &super::Bound::from_vars(vars.to_vec())), &points, eps)
}
