use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{stride_kernel, CodecConfig};
use super::rvq::{quantize_with, Quantized};
use crate::autodiff::{Bound, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

const MIN_ALPHA: f64 = 1e-4;

#[derive(Clone, Debug)]
struct Conv {
    w: ParamId,
    b: ParamId,
    stride: usize,
    pad: usize,
    transposed: bool,
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        pad: usize,
        transposed: bool,
    ) -> Self {
        let fan_in = if transposed { (c_in * k / stride).max(1) } else { c_in * k };
        let bound = (3.0 / fan_in as f64).sqrt();
        let shape = if transposed { vec![c_in, c_out, k] } else { vec![c_out, c_in, k] };
        let w = store.add(format!("{name}.w"), Tensor::uniform(shape, bound, rng));
        let b = store.add(format!("{name}.b"), Tensor::zeros(vec![c_out]));
        Self { w, b, stride, pad, transposed }
    }

    fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        if self.transposed {
            tape.conv_transpose1d(x, p[self.w], Some(p[self.b]), self.stride, self.pad)
        } else {
            tape.conv1d(x, p[self.w], Some(p[self.b]), self.stride, self.pad)
        }
    }
}

fn alpha(store: &mut ParamStore, name: &str, c: usize, init: f64) -> ParamId {
    store.add(format!("{name}.alpha"), Tensor::full(vec![c], init))
}

/// `x + conv1(snake(conv0(snake(x))))` at constant width.
#[derive(Clone, Debug)]
struct ResUnit {
    a0: ParamId,
    c0: Conv,
    a1: ParamId,
    c1: Conv,
}

impl ResUnit {
    fn new(store: &mut ParamStore, rng: &mut impl Rng, name: &str, c: usize, cfg: &CodecConfig) -> Self {
        let k = cfg.residual_kernel;
        let unit = Self {
            a0: alpha(store, &format!("{name}.act0"), c, cfg.snake_alpha_init),
            c0: Conv::new(store, rng, &format!("{name}.conv0"), c, c, k, 1, k / 2, false),
            a1: alpha(store, &format!("{name}.act1"), c, cfg.snake_alpha_init),
            c1: Conv::new(store, rng, &format!("{name}.conv1"), c, c, 1, 1, 0, false),
        };
        // start as the identity so depth does not inflate activations
        store.get_mut(unit.c1.w).data_mut().iter_mut().for_each(|v| *v = 0.0);
        unit
    }

    fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let h = tape.snake(x, p[self.a0])?;
        let h = self.c0.forward(tape, p, h)?;
        let h = tape.snake(h, p[self.a1])?;
        let h = self.c1.forward(tape, p, h)?;
        tape.add(x, h)
    }
}

#[derive(Clone, Debug)]
struct Stage {
    res: ResUnit,
    act: ParamId,
    resample: Conv,
}

/// Encoder layers: input conv, one residual unit plus strided conv per
/// stride, then a projection to the latent width.
#[derive(Clone, Debug)]
pub struct EncoderState {
    input: Conv,
    stages: Vec<Stage>,
    out_act: ParamId,
    output: Conv,
}

/// Decoder layers mirroring [`EncoderState`] with transposed convs.
#[derive(Clone, Debug)]
pub struct DecoderState {
    input: Conv,
    stages: Vec<Stage>,
    out_act: ParamId,
    output: Conv,
}

/// `N_q` codebooks of shape `[K, D]`; row 0 of each is a frozen zero codeword.
#[derive(Clone, Debug)]
pub struct ResidualVq {
    codebooks: Vec<ParamId>,
}

impl ResidualVq {
    pub fn ids(&self) -> &[ParamId] {
        &self.codebooks
    }

    pub fn tensors(&self, store: &ParamStore) -> Vec<Tensor> {
        self.codebooks.iter().map(|&id| store.get(id).detached()).collect()
    }
}

/// Quantizer output recorded on a tape.
#[derive(Clone, Debug)]
pub struct TapeQuantized {
    /// Quantized values with a straight-through gradient to the latent.
    pub quantized: Var,
    pub codes: Vec<Vec<usize>>,
    /// `mean((latent - sg(quantized))^2)`; gradient reaches the latent only.
    pub commit_loss: Var,
}

#[derive(Clone, Debug)]
pub struct CodecModel {
    config: CodecConfig,
    params: ParamStore,
    encoder: EncoderState,
    rvq: ResidualVq,
    decoder: DecoderState,
}

impl CodecModel {
    pub fn new(config: CodecConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let ch = config.channels();
        let a0 = config.snake_alpha_init;
        let d = config.latent_dim;

        let input = Conv::new(&mut store, &mut rng, "codec.enc.in", 1, ch[0], 7, 1, 3, false);
        let mut stages = Vec::new();
        for (i, &s) in config.strides.iter().enumerate() {
            let name = format!("codec.enc.{i}");
            let (k, pad) = stride_kernel(s);
            stages.push(Stage {
                res: ResUnit::new(&mut store, &mut rng, &format!("{name}.res"), ch[i], &config),
                act: alpha(&mut store, &format!("{name}.act"), ch[i], a0),
                resample: Conv::new(&mut store, &mut rng, &format!("{name}.down"), ch[i], ch[i + 1], k, s, pad, false),
            });
        }
        let n = config.strides.len();
        let out_act = alpha(&mut store, "codec.enc.out", ch[n], a0);
        let output = Conv::new(&mut store, &mut rng, "codec.enc.out", ch[n], d, 3, 1, 1, false);
        let encoder = EncoderState { input, stages, out_act, output };

        let codebooks = (0..config.n_codebooks)
            .map(|i| {
                let mut cb = Tensor::randn(vec![config.codebook_size, d], 0.1 / (i + 1) as f64, &mut rng);
                cb.data_mut()[..d].iter_mut().for_each(|v| *v = 0.0);
                store.add(format!("codec.rvq.{i}"), cb)
            })
            .collect();
        let rvq = ResidualVq { codebooks };

        let input = Conv::new(&mut store, &mut rng, "codec.dec.in", d, ch[n], 7, 1, 3, false);
        let mut stages = Vec::new();
        for (j, i) in (0..n).rev().enumerate() {
            let s = config.strides[i];
            let name = format!("codec.dec.{j}");
            let (k, pad) = stride_kernel(s);
            stages.push(Stage {
                act: alpha(&mut store, &format!("{name}.act"), ch[i + 1], a0),
                resample: Conv::new(&mut store, &mut rng, &format!("{name}.up"), ch[i + 1], ch[i], k, s, pad, true),
                res: ResUnit::new(&mut store, &mut rng, &format!("{name}.res"), ch[i], &config),
            });
        }
        let out_act = alpha(&mut store, "codec.dec.out", ch[0], a0);
        let output = Conv::new(&mut store, &mut rng, "codec.dec.out", ch[0], 1, 7, 1, 3, false);
        store.get_mut(output.w).data_mut().iter_mut().for_each(|v| *v *= 0.1);
        let decoder = DecoderState { input, stages, out_act, output };

        Ok(Self { config, params: store, encoder, rvq, decoder })
    }

    pub fn config(&self) -> &CodecConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn rvq(&self) -> &ResidualVq {
        &self.rvq
    }

    pub fn hop(&self) -> usize {
        self.config.hop()
    }

    /// Zero-pads on the right to the next multiple of the hop.
    pub fn pad(&self, wave: &[f64]) -> Result<Vec<f64>> {
        if wave.is_empty() {
            return Err(Error::arg("encode", "empty input"));
        }
        let hop = self.hop();
        let mut w = wave.to_vec();
        w.resize(wave.len().div_ceil(hop) * hop, 0.0);
        Ok(w)
    }

    /// Encoder on a `[1, L]` waveform whose length is a multiple of the hop.
    pub fn encode_on(&self, tape: &mut Tape, p: &Bound, wave: Var) -> Result<Var> {
        let l = tape.shape(wave).iter().product::<usize>();
        if l == 0 || l % self.hop() != 0 {
            return Err(Error::shape("encode", format!("L={l} must be a positive multiple of {}", self.hop())));
        }
        let e = &self.encoder;
        let mut h = tape.reshape(wave, vec![1, l])?;
        h = e.input.forward(tape, p, h)?;
        for st in &e.stages {
            h = st.res.forward(tape, p, h)?;
            h = tape.snake(h, p[st.act])?;
            h = st.resample.forward(tape, p, h)?;
        }
        h = tape.snake(h, p[e.out_act])?;
        e.output.forward(tape, p, h)
    }

    /// Decoder from `[D, T]` to a `[L]` waveform bounded by `tanh`.
    pub fn decode_on(&self, tape: &mut Tape, p: &Bound, latent: Var) -> Result<Var> {
        match tape.shape(latent) {
            &[d, t] if d == self.config.latent_dim && t > 0 => {}
            s => {
                return Err(Error::shape(
                    "decode",
                    format!("D: expected [{}, T], got {s:?}", self.config.latent_dim),
                ))
            }
        }
        let dec = &self.decoder;
        let mut h = dec.input.forward(tape, p, latent)?;
        for st in &dec.stages {
            h = tape.snake(h, p[st.act])?;
            h = st.resample.forward(tape, p, h)?;
            h = st.res.forward(tape, p, h)?;
        }
        h = tape.snake(h, p[dec.out_act])?;
        h = dec.output.forward(tape, p, h)?;
        let l = tape.shape(h)[1];
        let h = tape.tanh(h);
        tape.reshape(h, vec![l])
    }

    /// Quantizes a recorded latent. The codebooks see no gradient here; see
    /// [`CodecModel::codebook_loss_on`].
    pub fn quantize_on(&self, tape: &mut Tape, latent: Var) -> Result<(TapeQuantized, Quantized)> {
        let q = self.quantize(&tape.tensor(latent))?;
        let quantized = tape.straight_through(latent, q.quantized.data().to_vec())?;
        let target = tape.constant(&q.quantized);
        let diff = tape.sub(latent, target)?;
        let commit_loss = tape.sq_mean(diff);
        Ok((TapeQuantized { quantized, codes: q.codes.clone(), commit_loss }, q))
    }

    /// Sum over stages of `mean((codeword - sg(residual))^2)` for the chosen codes.
    pub fn codebook_loss_on(&self, tape: &mut Tape, p: &Bound, q: &Quantized) -> Result<Var> {
        let mut total: Option<Var> = None;
        for (i, &id) in self.rvq.codebooks.iter().enumerate() {
            let picked = tape.gather_columns(p[id], &q.codes[i])?;
            let target = tape.constant(&q.residuals[i]);
            let diff = tape.sub(picked, target)?;
            let l = tape.sq_mean(diff);
            total = Some(match total {
                Some(t) => tape.add(t, l)?,
                None => l,
            });
        }
        total.ok_or_else(|| Error::shape("codebook_loss", "no codebooks"))
    }

    /// `[D, T]` latent of a waveform, right-padded to a multiple of the hop.
    pub fn encode(&self, wave: &[f64]) -> Result<Tensor> {
        let w = self.pad(wave)?;
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, false);
        let x = tape.constant_from(vec![1, w.len()], w)?;
        let y = self.encode_on(&mut tape, &p, x)?;
        Ok(tape.tensor(y))
    }

    pub fn quantize(&self, latent: &Tensor) -> Result<Quantized> {
        quantize_with(&self.rvq.tensors(&self.params), latent)
    }

    /// Waveform of length `T · hop`.
    pub fn decode(&self, latent: &Tensor) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, false);
        let x = tape.constant(latent);
        let y = self.decode_on(&mut tape, &p, x)?;
        Ok(tape.value(y).to_vec())
    }

    /// Encode, quantize, decode and truncate back to the input length.
    pub fn reconstruct(&self, wave: &[f64]) -> Result<Vec<f64>> {
        let latent = self.encode(wave)?;
        let q = self.quantize(&latent)?;
        let mut out = self.decode(&q.quantized)?;
        out.truncate(wave.len());
        Ok(out)
    }

    /// Clears gradients of the frozen zero codewords and keeps snake α positive.
    pub(crate) fn apply_constraints(&mut self, grads_only: bool) {
        let d = self.config.latent_dim;
        for &id in &self.rvq.codebooks {
            if let Some(g) = self.params.get_mut(id).grad_mut() {
                g[..d].iter_mut().for_each(|v| *v = 0.0);
            }
        }
        if grads_only {
            return;
        }
        let ids: Vec<ParamId> = self.params.ids().filter(|&id| self.params.name(id).ends_with(".alpha")).collect();
        for id in ids {
            self.params.get_mut(id).data_mut().iter_mut().for_each(|a| *a = a.max(MIN_ALPHA));
        }
    }
}
