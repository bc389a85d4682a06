use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se::SEConfig;

/// One layer of a model description, as seen by the MAC counter.
///
/// Layers are applied in order; each maps a frame count `T` to a new one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Samples to frames at a fixed hop, padding the tail. Costs nothing here:
    /// codec encode/decode is shared by every pipeline and left out.
    Frames { name: String, hop: usize },
    Linear { name: String, c_in: usize, c_out: usize },
    Conv1d { name: String, c_in: usize, c_out: usize, kernel: usize, stride: usize, pad: usize },
    ConvTranspose1d { name: String, c_in: usize, c_out: usize, kernel: usize, stride: usize, pad: usize },
    /// Multi-head self-attention of width `emb`: score and mixing products
    /// plus the four `emb x emb` projections.
    Attention { name: String, emb: usize },
}

impl LayerSpec {
    pub fn name(&self) -> &str {
        match self {
            LayerSpec::Frames { name, .. }
            | LayerSpec::Linear { name, .. }
            | LayerSpec::Conv1d { name, .. }
            | LayerSpec::ConvTranspose1d { name, .. }
            | LayerSpec::Attention { name, .. } => name,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Frames { .. } => "frames",
            LayerSpec::Linear { .. } => "linear",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::ConvTranspose1d { .. } => "conv_transpose1d",
            LayerSpec::Attention { .. } => "attention",
        }
    }

    /// `(macs, t_out)` for an input of `t` frames.
    pub fn apply(&self, t: u64) -> Result<(u64, u64)> {
        let bad = |d: String| Err(Error::shape("count_macs", format!("layer {}: {d}", self.name())));
        let u = |x: usize| x as u64;
        match *self {
            LayerSpec::Frames { hop, .. } => {
                if hop == 0 {
                    return bad("hop must be positive".into());
                }
                Ok((0, t.div_ceil(u(hop))))
            }
            LayerSpec::Linear { c_in, c_out, .. } => Ok((u(c_in) * u(c_out) * t, t)),
            LayerSpec::Conv1d { c_in, c_out, kernel, stride, pad, .. } => {
                if stride == 0 || kernel == 0 {
                    return bad("kernel and stride must be positive".into());
                }
                let span = t + 2 * u(pad);
                if span < u(kernel) {
                    return bad(format!("{t} frames (+{pad} padding each side) shorter than kernel {kernel}"));
                }
                let t_out = (span - u(kernel)) / u(stride) + 1;
                Ok((u(c_in) * u(c_out) * u(kernel) * t_out, t_out))
            }
            LayerSpec::ConvTranspose1d { c_in, c_out, kernel, stride, pad, .. } => {
                if stride == 0 || kernel == 0 {
                    return bad("kernel and stride must be positive".into());
                }
                let full = (t.max(1) - 1) * u(stride) + u(kernel);
                if full < 2 * u(pad) || t == 0 {
                    return bad(format!("{t} frames leave no output after cropping {pad}"));
                }
                // every input frame scatters a full kernel into the output
                Ok((u(c_in) * u(c_out) * u(kernel) * t, full - 2 * u(pad)))
            }
            LayerSpec::Attention { emb, .. } => Ok((2 * t * t * u(emb) + 4 * t * u(emb) * u(emb), t)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacEntry {
    pub layer: String,
    pub kind: String,
    pub macs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacReport {
    pub entries: Vec<MacEntry>,
    pub total: u64,
    pub input_duration: f64,
}

impl MacReport {
    pub fn gmacs(&self) -> f64 {
        self.total as f64 / 1e9
    }
}

/// Counts multiply-accumulates of `layers` applied to `input_len` samples.
pub fn count_macs(layers: &[LayerSpec], input_len: usize, sample_rate: u32) -> Result<MacReport> {
    if sample_rate == 0 {
        return Err(Error::arg("count_macs", "sample_rate must be positive"));
    }
    let mut t = input_len as u64;
    let mut entries = Vec::with_capacity(layers.len());
    for l in layers {
        let (macs, next) = l.apply(t)?;
        entries.push(MacEntry { layer: l.name().to_string(), kind: l.kind().to_string(), macs });
        t = next;
    }
    let total = entries.iter().map(|e| e.macs).sum();
    Ok(MacReport { entries, total, input_duration: input_len as f64 / sample_rate as f64 })
}

fn block_layers(cfg: &SEConfig, name: &str) -> Vec<LayerSpec> {
    let e = cfg.emb;
    let h = e * cfg.ffn_mult;
    vec![
        LayerSpec::Attention { name: format!("{name}.attn"), emb: e },
        LayerSpec::Linear { name: format!("{name}.ffn1"), c_in: e, c_out: h },
        LayerSpec::Linear { name: format!("{name}.ffn2"), c_in: h, c_out: e },
    ]
}

fn stack_layers(cfg: &SEConfig) -> Vec<LayerSpec> {
    let e = cfg.emb;
    let k = cfg.mod_kernel;
    let mut v: Vec<LayerSpec> = (0..cfg.n_blocks).flat_map(|i| block_layers(cfg, &format!("block{i}"))).collect();
    for path in ["gate", "value"] {
        v.push(LayerSpec::Conv1d { name: format!("modulation.{path}"), c_in: e, c_out: e, kernel: k, stride: 1, pad: k / 2 });
    }
    v
}

/// The latent SE model behind a codec with the given hop.
pub fn se_layers(cfg: &SEConfig, latent_dim: usize, hop: usize) -> Vec<LayerSpec> {
    let mut v = vec![
        LayerSpec::Frames { name: "codec.encode".into(), hop },
        LayerSpec::Linear { name: "input".into(), c_in: latent_dim, c_out: cfg.emb },
    ];
    v.extend(stack_layers(cfg));
    v.push(LayerSpec::Linear { name: "output".into(), c_in: cfg.emb, c_out: latent_dim });
    v
}

/// A waveform-domain counterpart to the latent model: a learned strided conv
/// front end feeding the same transformer stack, and a transposed conv back
/// to samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeDomainBaseline {
    pub stack: SEConfig,
    pub stride: usize,
    pub kernel: usize,
}

impl TimeDomainBaseline {
    pub fn matched(stack: &SEConfig) -> Self {
        Self { stack: stack.clone(), stride: 8, kernel: 16 }
    }

    pub fn validate(&self) -> Result<()> {
        self.stack.validate()?;
        if self.stride == 0 || self.kernel < self.stride || (self.kernel - self.stride) % 2 != 0 {
            return Err(Error::Config(format!(
                "baseline: kernel {} must be >= stride {} with an even difference",
                self.kernel, self.stride
            )));
        }
        Ok(())
    }

    fn pad(&self) -> usize {
        (self.kernel - self.stride) / 2
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let e = self.stack.emb;
        let (k, s, p) = (self.kernel, self.stride, self.pad());
        let mut v = vec![LayerSpec::Conv1d { name: "front_end".into(), c_in: 1, c_out: e, kernel: k, stride: s, pad: p }];
        v.extend(stack_layers(&self.stack));
        v.push(LayerSpec::ConvTranspose1d { name: "back_end".into(), c_in: e, c_out: 1, kernel: k, stride: s, pad: p });
        v
    }

    /// Parameter shapes in layer order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let e = self.stack.emb;
        let h = e * self.stack.ffn_mult;
        let dh = self.stack.head_dim();
        let mut v = vec![("front_end.w".into(), vec![e, 1, self.kernel]), ("front_end.b".into(), vec![e])];
        for b in 0..self.stack.n_blocks {
            for n in ["ln1.g", "ln1.b", "ln2.g", "ln2.b"] {
                v.push((format!("block{b}.{n}"), vec![e]));
            }
            for hd in 0..self.stack.n_heads {
                for q in ["q", "k", "v"] {
                    v.push((format!("block{b}.head{hd}.{q}.w"), vec![e, dh]));
                    v.push((format!("block{b}.head{hd}.{q}.b"), vec![dh]));
                }
            }
            v.push((format!("block{b}.proj.w"), vec![e, e]));
            v.push((format!("block{b}.proj.b"), vec![e]));
            v.push((format!("block{b}.ffn1.w"), vec![e, h]));
            v.push((format!("block{b}.ffn1.b"), vec![h]));
            v.push((format!("block{b}.ffn2.w"), vec![h, e]));
            v.push((format!("block{b}.ffn2.b"), vec![e]));
        }
        for path in ["gate", "value"] {
            v.push((format!("modulation.{path}.w"), vec![e, e, self.stack.mod_kernel]));
            v.push((format!("modulation.{path}.b"), vec![e]));
        }
        v.push(("modulation.inner.alpha".into(), vec![e]));
        v.push(("modulation.outer.alpha".into(), vec![e]));
        v.push(("back_end.w".into(), vec![e, 1, self.kernel]));
        v.push(("back_end.b".into(), vec![1]));
        v
    }

    pub fn n_params(&self) -> usize {
        self.param_shapes().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }
}
