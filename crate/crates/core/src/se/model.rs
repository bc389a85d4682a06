use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::SEConfig;
use crate::autodiff::{Bound, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub(crate) struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    fn new(store: &mut ParamStore, rng: &mut impl Rng, name: &str, n_in: usize, n_out: usize) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        let w = store.add(format!("{name}.w"), Tensor::uniform(vec![n_in, n_out], bound, rng));
        let b = store.add(format!("{name}.b"), Tensor::zeros(vec![n_out]));
        Self { w, b }
    }

    fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        tape.linear(x, p[self.w], p[self.b])
    }
}

#[derive(Clone, Debug)]
struct Norm {
    gain: ParamId,
    bias: ParamId,
}

impl Norm {
    fn new(store: &mut ParamStore, name: &str, e: usize) -> Self {
        Self {
            gain: store.add(format!("{name}.gain"), Tensor::full(vec![e], 1.0)),
            bias: store.add(format!("{name}.bias"), Tensor::zeros(vec![e])),
        }
    }
}

#[derive(Clone, Debug)]
struct Head {
    q: Linear,
    k: Linear,
    v: Linear,
}

/// Pre-norm block on `[T, E]`: `x + Attn(LN(x))`, then `+ FFN(LN(·))`.
#[derive(Clone, Debug)]
pub struct TransformerBlock {
    norm1: Norm,
    heads: Vec<Head>,
    proj: Linear,
    norm2: Norm,
    ffn_in: Linear,
    ffn_out: Linear,
    eps: f64,
    scale: f64,
}

impl TransformerBlock {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, name: &str, cfg: &SEConfig) -> Self {
        let (e, dh) = (cfg.emb, cfg.head_dim());
        let heads = (0..cfg.n_heads)
            .map(|h| Head {
                q: Linear::new(store, rng, &format!("{name}.head{h}.q"), e, dh),
                k: Linear::new(store, rng, &format!("{name}.head{h}.k"), e, dh),
                v: Linear::new(store, rng, &format!("{name}.head{h}.v"), e, dh),
            })
            .collect();
        Self {
            norm1: Norm::new(store, &format!("{name}.norm1"), e),
            heads,
            proj: Linear::new(store, rng, &format!("{name}.proj"), e, e),
            norm2: Norm::new(store, &format!("{name}.norm2"), e),
            ffn_in: Linear::new(store, rng, &format!("{name}.ffn_in"), e, e * cfg.ffn_mult),
            ffn_out: Linear::new(store, rng, &format!("{name}.ffn_out"), e * cfg.ffn_mult, e),
            eps: cfg.layer_norm_eps,
            scale: 1.0 / (dh as f64).sqrt(),
        }
    }

    /// Output projections whose zeroing turns the block into the identity.
    pub fn output_projections(&self) -> [ParamId; 4] {
        [self.proj.w, self.proj.b, self.ffn_out.w, self.ffn_out.b]
    }

    /// Forward on `[T, E]`; also returns each head's `[T, T]` attention weights.
    pub fn forward_on(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<(Var, Vec<Var>)> {
        let h = tape.layer_norm(x, p[self.norm1.gain], p[self.norm1.bias], self.eps)?;
        let mut outs = Vec::with_capacity(self.heads.len());
        let mut maps = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let q = head.q.forward(tape, p, h)?;
            let k = head.k.forward(tape, p, h)?;
            let v = head.v.forward(tape, p, h)?;
            let kt = tape.transpose(k)?;
            let s = tape.matmul(q, kt)?;
            let s = tape.scale(s, self.scale);
            let a = tape.softmax(s)?;
            outs.push(tape.matmul(a, v)?);
            maps.push(a);
        }
        let cat = tape.concat_cols(&outs)?;
        let att = self.proj.forward(tape, p, cat)?;
        let x = tape.add(x, att)?;
        let h = tape.layer_norm(x, p[self.norm2.gain], p[self.norm2.bias], self.eps)?;
        let h = self.ffn_in.forward(tape, p, h)?;
        let h = tape.gelu(h);
        let h = self.ffn_out.forward(tape, p, h)?;
        Ok((tape.add(x, h)?, maps))
    }
}

/// `snake(sigmoid(conv_a(x)) ⊙ snake(conv_b(x)))` on `[E, T]` with same-padded convs.
#[derive(Clone, Debug)]
pub struct ModulationBlock {
    pub gate_w: ParamId,
    pub gate_b: ParamId,
    pub value_w: ParamId,
    pub value_b: ParamId,
    pub inner_alpha: ParamId,
    pub outer_alpha: ParamId,
    kernel: usize,
}

impl ModulationBlock {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, name: &str, e: usize, kernel: usize) -> Self {
        let bound = 1.0 / ((e * kernel) as f64).sqrt();
        Self {
            gate_w: store.add(format!("{name}.gate.w"), Tensor::uniform(vec![e, e, kernel], bound, rng)),
            gate_b: store.add(format!("{name}.gate.b"), Tensor::zeros(vec![e])),
            value_w: store.add(format!("{name}.value.w"), Tensor::uniform(vec![e, e, kernel], bound, rng)),
            value_b: store.add(format!("{name}.value.b"), Tensor::zeros(vec![e])),
            inner_alpha: store.add(format!("{name}.inner.alpha"), Tensor::full(vec![e], 1.0)),
            outer_alpha: store.add(format!("{name}.outer.alpha"), Tensor::full(vec![e], 1.0)),
            kernel,
        }
    }

    pub fn forward_on(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let pad = self.kernel / 2;
        let a = tape.conv1d(x, p[self.gate_w], Some(p[self.gate_b]), 1, pad)?;
        let gate = tape.sigmoid(a);
        let b = tape.conv1d(x, p[self.value_w], Some(p[self.value_b]), 1, pad)?;
        let v = tape.snake(b, p[self.inner_alpha])?;
        let m = tape.mul(gate, v)?;
        tape.snake(m, p[self.outer_alpha])
    }
}

/// Sinusoidal positional encoding, `[T, E]`.
pub fn positional_encoding(t: usize, e: usize) -> Tensor {
    let mut pe = vec![0.0; t * e];
    for pos in 0..t {
        for i in 0..e {
            let freq = 1.0 / 10_000f64.powf((2 * (i / 2)) as f64 / e as f64);
            let ang = pos as f64 * freq;
            pe[pos * e + i] = if i % 2 == 0 { ang.sin() } else { ang.cos() };
        }
    }
    Tensor::new(vec![t, e], pe).expect("consistent shape")
}

/// Latent enhancement network: `[D, T] -> [D, T]`.
#[derive(Clone, Debug)]
pub struct SEModel {
    config: SEConfig,
    latent_dim: usize,
    params: ParamStore,
    input: Linear,
    blocks: Vec<TransformerBlock>,
    modulation: ModulationBlock,
    output: Linear,
}

impl SEModel {
    pub fn new(config: SEConfig, latent_dim: usize) -> Result<Self> {
        config.validate()?;
        if latent_dim == 0 {
            return Err(Error::Config("se: latent_dim must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let e = config.emb;
        let input = Linear::new(&mut store, &mut rng, "se.input", latent_dim, e);
        let blocks = (0..config.n_blocks)
            .map(|i| TransformerBlock::new(&mut store, &mut rng, &format!("se.block{i}"), &config))
            .collect();
        let modulation = ModulationBlock::new(&mut store, &mut rng, "se.modulation", e, config.mod_kernel);
        let output = Linear::new(&mut store, &mut rng, "se.output", e, latent_dim);
        Ok(Self { config, latent_dim, params: store, input, blocks, modulation, output })
    }

    pub fn config(&self) -> &SEConfig {
        &self.config
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn blocks(&self) -> &[TransformerBlock] {
        &self.blocks
    }

    pub fn modulation(&self) -> &ModulationBlock {
        &self.modulation
    }

    fn forward_inner(&self, tape: &mut Tape, p: &Bound, y_e: Var) -> Result<(Var, Vec<Vec<Var>>)> {
        let t = match tape.shape(y_e) {
            &[d, t] if d == self.latent_dim && t > 0 => t,
            s => {
                return Err(Error::shape(
                    "se_forward",
                    format!("D: model expects [{}, T] with T >= 1, got {s:?}", self.latent_dim),
                ))
            }
        };
        let x = tape.transpose(y_e)?;
        let mut h = self.input.forward(tape, p, x)?;
        if self.config.positional_encoding {
            let pe = tape.constant(&positional_encoding(t, self.config.emb));
            h = tape.add(h, pe)?;
        }
        let mut maps = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (out, m) = b.forward_on(tape, p, h)?;
            h = out;
            maps.push(m);
        }
        let h = tape.transpose(h)?;
        let h = self.modulation.forward_on(tape, p, h)?;
        let h = tape.transpose(h)?;
        let h = self.output.forward(tape, p, h)?;
        Ok((tape.transpose(h)?, maps))
    }

    /// Records the forward pass of `y_e: [D, T]`.
    pub fn forward_on(&self, tape: &mut Tape, p: &Bound, y_e: Var) -> Result<Var> {
        Ok(self.forward_inner(tape, p, y_e)?.0)
    }

    pub fn forward(&self, y_e: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, false);
        let x = tape.constant(y_e);
        let y = self.forward_on(&mut tape, &p, x)?;
        Ok(tape.tensor(y))
    }

    /// Attention weights `[block][head]`, each `[T, T]`.
    pub fn attention_maps(&self, y_e: &Tensor) -> Result<Vec<Vec<Tensor>>> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, false);
        let x = tape.constant(y_e);
        let (_, maps) = self.forward_inner(&mut tape, &p, x)?;
        Ok(maps.iter().map(|m| m.iter().map(|&v| tape.tensor(v)).collect()).collect())
    }
}
