//! Builds a small attention layer on the tape and checks every gradient
//! against central differences.
//!
//! cargo run --release --example gradcheck

use latent_se::autodiff::{grad_check_many, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn randn(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| StandardNormal.sample(rng)).collect()).unwrap()
}

fn main() -> latent_se::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    // x [T=6, E=8], q/k/v weights [8, 8]
    let points: Vec<Tensor> = [[6, 8], [8, 8], [8, 8], [8, 8]].iter().map(|s| randn(s, &mut rng)).collect();
    let report = grad_check_many(
        |tape, v| {
            let q = tape.matmul(v[0], v[1])?;
            let k = tape.matmul(v[0], v[2])?;
            let val = tape.matmul(v[0], v[3])?;
            let kt = tape.transpose(k)?;
            let s = tape.matmul(q, kt)?;
            let s = tape.scale(s, 1.0 / 8f64.sqrt());
            let a = tape.softmax(s)?;
            let y = tape.matmul(a, val)?;
            let y = tape.gelu(y);
            Ok(tape.sq_mean(y))
        },
        &points,
        1e-6,
    )?;
    println!(
        "checked {} partial derivatives, worst relative error {:.2e} at input {} element {} (analytic {:.6e}, numeric {:.6e})",
        report.checked, report.max_rel_error, report.worst.0, report.worst.1, report.analytic, report.numeric
    );
    println!("{}", if report.flagged() { "MISMATCH" } else { "ok" });
    Ok(())
}
