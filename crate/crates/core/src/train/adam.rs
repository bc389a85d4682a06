use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. Moment buffers follow the store's registration order.
#[derive(Clone, Debug)]
pub struct Adam {
    pub cfg: AdamConfig,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, cfg: AdamConfig) -> Self {
        let m: Vec<Vec<f64>> = store.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Self { cfg, t: 0, v: m.clone(), m }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update from the gradient buffers of `store`. Parameters without a
    /// gradient buffer are left alone. A non-finite gradient aborts before any
    /// parameter is touched.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) -> Result<()> {
        if !(lr > 0.0) {
            return Err(Error::arg("adam_step", format!("lr must be > 0, got {lr}")));
        }
        if self.m.len() != store.len() {
            return Err(Error::shape("adam_step", format!("{} moment buffers for {} parameters", self.m.len(), store.len())));
        }
        for id in store.ids() {
            if let Some(g) = store.get(id).grad() {
                if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        context: format!("gradient of parameter {} at element {i} is {}", store.name(id), g[i]),
                    });
                }
            }
        }
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (i, p) in store.tensors_mut().iter_mut().enumerate() {
            let Some(g) = p.grad().map(<[f64]>::to_vec) else { continue };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (((w, g), m), v) in p.data_mut().iter_mut().zip(&g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                *w -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn store(v: f64, g: f64) -> ParamStore {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::from_vec(vec![v]));
        s.get_mut(id).accumulate_grad(&[g]);
        s
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = store(1.25, 0.0);
        let mut a = Adam::new(&s, AdamConfig::default());
        a.step(&mut s, 0.1).unwrap();
        assert_eq!(s.get(crate::autodiff::ParamId(0)).data()[0], 1.25);
        assert_eq!(a.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let lr = 1.5e-4;
        for g in [0.3, -0.3, 1e-3, 50.0] {
            let mut s = store(0.0, g);
            let mut a = Adam::new(&s, AdamConfig::default());
            a.step(&mut s, lr).unwrap();
            let d = s.get(crate::autodiff::ParamId(0)).data()[0].abs();
            assert!(d >= 0.99 * lr && d <= lr, "{g}: {d}");
        }
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut s = store(0.0, f64::NAN);
        let mut a = Adam::new(&s, AdamConfig::default());
        let err = a.step(&mut s, 0.1).unwrap_err().to_string();
        assert!(err.contains("parameter w"), "{err}");
        assert_eq!(a.steps(), 0);
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let run = || {
            let mut s = store(0.5, 0.0);
            let mut a = Adam::new(&s, AdamConfig::default());
            for k in 0..10 {
                s.zero_grad();
                let w = s.get(crate::autodiff::ParamId(0)).data()[0];
                s.get_mut(crate::autodiff::ParamId(0)).accumulate_grad(&[2.0 * w - 0.1 * k as f64]);
                a.step(&mut s, 0.01).unwrap();
            }
            s.value_bits()
        };
        assert_eq!(run(), run());
    }
}
