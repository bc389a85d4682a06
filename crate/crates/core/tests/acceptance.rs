//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.
//! Tests share a lock so timing runs never compete with training.

use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use latent_se::autodiff::{grad_check_many, grad_check_params, Tape, Tensor, Var, GRAD_CHECK_TOLERANCE};
use latent_se::codec::{
    codes_to_latent, encode_checkpoint, pretrain_codec, quantize_with, CodecConfig, CodecModel, PretrainConfig,
};
use latent_se::data::{mix_at_snr, synthesize, wav_read, wav_write, Corpus, CorpusConfig, SourceKind, UtteranceSpec, PCM_SCALE, VALIDATION_EPOCH};
use latent_se::dsp::{snr_db, DftPath, FramePlan, MelConfig, MelPlan};
use latent_se::losses::{history_csv, overall_loss, LossWeights};
use latent_se::perf::{count_macs, measure_rtf, se_layers, TimeDomainBaseline};
use latent_se::pipeline::Pipeline;
use latent_se::se::{SEConfig, SEModel};
use latent_se::train::{evaluate, run_ablation, train_se, Ablation, AblationResult, TrainConfig};

static LOCK: Mutex<()> = Mutex::new(());

/// Writes past libtest's output capture so results show in every run.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, $($t)*);
        let _ = out.flush();
    }};
}

fn serial() -> MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: u32, title: &str, pass: bool, detail: String) {
    say!("criterion {n:>2} {}: {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} ({title}) failed: {detail}");
}

fn randn(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).unwrap()
}

fn positive(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(0.3..2.0)).collect()).unwrap()
}

type Build = fn(&mut Tape, &[Var]) -> latent_se::Result<Var>;

/// Reduces an op output to a scalar with fixed pseudo-random weights.
fn reduce(tape: &mut Tape, y: Var) -> latent_se::Result<Var> {
    let shape = tape.shape(y).to_vec();
    let n: usize = shape.iter().product();
    let w: Vec<f64> = (0..n).map(|i| ((i * 37 + 11) % 17) as f64 / 8.0 - 1.0).collect();
    let wv = tape.constant_from(shape, w)?;
    let p = tape.mul(y, wv)?;
    Ok(tape.mean(p))
}

fn op_cases() -> Vec<(&'static str, Vec<Vec<usize>>, Vec<bool>, Build)> {
    // (name, input shapes, strictly positive inputs, builder)
    vec![
        ("conv1d", vec![vec![3, 9], vec![4, 3, 3], vec![4]], vec![false; 3], |t, v| {
            let y = t.conv1d(v[0], v[1], Some(v[2]), 2, 1)?;
            reduce(t, y)
        }),
        ("conv_transpose1d", vec![vec![3, 5], vec![3, 2, 4], vec![2]], vec![false; 3], |t, v| {
            let y = t.conv_transpose1d(v[0], v[1], Some(v[2]), 2, 1)?;
            reduce(t, y)
        }),
        ("snake", vec![vec![3, 4], vec![3]], vec![false, true], |t, v| {
            let y = t.snake(v[0], v[1])?;
            reduce(t, y)
        }),
        ("matmul", vec![vec![3, 4], vec![4, 2]], vec![false; 2], |t, v| {
            let y = t.matmul(v[0], v[1])?;
            reduce(t, y)
        }),
        ("transpose", vec![vec![3, 4]], vec![false], |t, v| {
            let y = t.transpose(v[0])?;
            reduce(t, y)
        }),
        ("reshape", vec![vec![3, 4]], vec![false], |t, v| {
            let y = t.reshape(v[0], vec![2, 6])?;
            reduce(t, y)
        }),
        ("add", vec![vec![2, 3], vec![2, 3]], vec![false; 2], |t, v| {
            let y = t.add(v[0], v[1])?;
            reduce(t, y)
        }),
        ("sub", vec![vec![2, 3], vec![2, 3]], vec![false; 2], |t, v| {
            let y = t.sub(v[0], v[1])?;
            reduce(t, y)
        }),
        ("mul", vec![vec![2, 3], vec![2, 3]], vec![false; 2], |t, v| {
            let y = t.mul(v[0], v[1])?;
            reduce(t, y)
        }),
        ("scale", vec![vec![2, 3]], vec![false], |t, v| {
            let y = t.scale(v[0], -1.7);
            reduce(t, y)
        }),
        ("add_bias", vec![vec![3, 4], vec![4]], vec![false; 2], |t, v| {
            let y = t.add_bias(v[0], v[1])?;
            reduce(t, y)
        }),
        ("linear", vec![vec![3, 4], vec![4, 2], vec![2]], vec![false; 3], |t, v| {
            let y = t.linear(v[0], v[1], v[2])?;
            reduce(t, y)
        }),
        ("sigmoid", vec![vec![2, 5]], vec![false], |t, v| {
            let y = t.sigmoid(v[0]);
            reduce(t, y)
        }),
        ("tanh", vec![vec![2, 5]], vec![false], |t, v| {
            let y = t.tanh(v[0]);
            reduce(t, y)
        }),
        ("gelu", vec![vec![2, 5]], vec![false], |t, v| {
            let y = t.gelu(v[0]);
            reduce(t, y)
        }),
        ("softmax", vec![vec![3, 5]], vec![false], |t, v| {
            let y = t.softmax(v[0])?;
            reduce(t, y)
        }),
        ("layer_norm", vec![vec![3, 6], vec![6], vec![6]], vec![false; 3], |t, v| {
            let y = t.layer_norm(v[0], v[1], v[2], 1e-5)?;
            reduce(t, y)
        }),
        ("concat_cols", vec![vec![3, 2], vec![3, 4]], vec![false; 2], |t, v| {
            let y = t.concat_cols(&[v[0], v[1]])?;
            reduce(t, y)
        }),
        ("mean", vec![vec![2, 3]], vec![false], |t, v| Ok(t.mean(v[0]))),
        ("abs_mean", vec![vec![2, 3]], vec![false], |t, v| Ok(t.abs_mean(v[0]))),
        ("sq_mean", vec![vec![2, 3]], vec![false], |t, v| Ok(t.sq_mean(v[0]))),
        ("gather_columns", vec![vec![4, 3]], vec![false], |t, v| {
            let y = t.gather_columns(v[0], &[2, 0, 2, 3])?;
            reduce(t, y)
        }),
        ("mel_spectrogram", vec![vec![96]], vec![false], |t, v| {
            let plan = MelPlan::new(&MelConfig { n_fft: 32, hop: 16, n_mels: 6, ..Default::default() })?;
            let y = plan.on_tape(t, v[0])?;
            reduce(t, y)
        }),
    ]
}

#[test]
fn c01_gradient_correctness() {
    let _g = serial();
    let t0 = Instant::now();
    let seeds = 20u64;
    let mut worst = (0.0f64, "");
    let mut failures = Vec::new();
    for (name, shapes, pos, build) in op_cases() {
        for seed in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * seed + shapes.len() as u64);
            let points: Vec<Tensor> =
                shapes.iter().zip(&pos).map(|(s, &p)| if p { positive(s, &mut rng) } else { randn(s, &mut rng) }).collect();
            let r = grad_check_many(build, &points, 1e-6).unwrap();
            if r.max_rel_error > worst.0 {
                worst = (r.max_rel_error, name);
            }
            if r.flagged() {
                failures.push(format!("{name} seed {seed}: {:.2e}", r.max_rel_error));
            }
        }
    }
    // full SE forward at a tiny config; the target sits near the output so
    // rounding noise on exactly-zero gradients stays below the tolerance floor
    for seed in 0..seeds {
        let cfg = SEConfig { n_blocks: 2, emb: 8, n_heads: 2, ffn_mult: 2, seed, ..Default::default() };
        let m = SEModel::new(cfg, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 77);
        let x = randn(&[4, 5], &mut rng);
        let y0 = m.forward(&x).unwrap();
        let noise = randn(&[4, 5], &mut rng);
        let target = Tensor::new(vec![4, 5], y0.data().iter().zip(noise.data()).map(|(a, b)| a + 0.05 * b).collect()).unwrap();
        let r = grad_check_params(
            m.params(),
            |tape, p| {
                let xv = tape.constant(&x);
                let y = m.forward_on(tape, p, xv)?;
                let tv = tape.constant(&target);
                let d = tape.sub(y, tv)?;
                Ok(tape.sq_mean(d))
            },
            1e-5,
        )
        .unwrap();
        if r.max_rel_error > worst.0 {
            worst = (r.max_rel_error, "se_forward");
        }
        if r.flagged() {
            failures.push(format!("se_forward seed {seed}: {:.2e}", r.max_rel_error));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let n_ops = op_cases().len() + 1;
    verdict(
        1,
        "gradient correctness",
        failures.is_empty() && secs < 120.0,
        format!(
            "{n_ops} checks x {seeds} seeds, worst rel err {:.2e} ({}) vs {GRAD_CHECK_TOLERANCE:.0e}, {secs:.1}s{}",
            worst.0,
            worst.1,
            if failures.is_empty() { String::new() } else { format!("; failures: {failures:?}") }
        ),
    );
}

#[test]
fn c02_overall_loss_arithmetic() {
    let _g = serial();
    let v = overall_loss(1.0, 0.002, 11.0, &LossWeights::default());
    verdict(2, "overall loss arithmetic", v == 3.0, format!("overall_loss(1, 0.002, 11) = {v:?}"));
}

#[test]
fn c03_compression_contract() {
    let _g = serial();
    let codec = CodecModel::new(CodecConfig::default()).unwrap();
    let mut lines = Vec::new();
    let mut pass = codec.hop() == 320;
    for l in [320usize, 3200, 160_000] {
        let wave: Vec<f64> = (0..l).map(|i| 0.2 * (i as f64 * 0.01).sin()).collect();
        let t = codec.encode(&wave).unwrap().shape()[1];
        pass &= t == l / 320;
        lines.push(format!("L={l} -> T={t}"));
    }
    verdict(3, "compression contract", pass, lines.join(", "));
}

#[test]
fn c04_rvq_invariants() {
    let _g = serial();
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pass = true;
    let mut notes = Vec::new();

    // energy non-increase and exact reconstruction, codebooks with a zero row
    let mut monotone = true;
    let mut exact = true;
    for _ in 0..200 {
        let (d, k, nq, t) = (rng.gen_range(1..6), rng.gen_range(2..6), rng.gen_range(1..5), rng.gen_range(1..6));
        let cbs: Vec<Tensor> = (0..nq)
            .map(|_| {
                let mut c = randn(&[k, d], &mut rng);
                c.data_mut()[..d].fill(0.0);
                c
            })
            .collect();
        let latent = randn(&[d, t], &mut rng);
        let q = quantize_with(&cbs, &latent).unwrap();
        for frame in 0..t {
            let e: Vec<f64> = q.residual_energy().iter().map(|stage| stage[frame]).collect();
            monotone &= e.windows(2).all(|w| w[1] <= w[0]);
        }
        let rebuilt = codes_to_latent(&cbs, &q.codes).unwrap();
        exact &= rebuilt.data().iter().zip(q.quantized.data()).all(|(a, b)| a.to_bits() == b.to_bits());
    }
    pass &= monotone && exact;
    notes.push(format!("energy monotone {monotone}, codeword-sum exact {exact}"));

    // single-stage idempotence
    let mut idem = true;
    for _ in 0..100 {
        let cb = vec![randn(&[5, 3], &mut rng)];
        let q = quantize_with(&cb, &randn(&[3, 4], &mut rng)).unwrap();
        let q2 = quantize_with(&cb, &q.quantized).unwrap();
        idem &= q2.codes == q.codes && q2.quantized == q.quantized;
    }
    pass &= idem;
    notes.push(format!("idempotent {idem}"));

    // K=2, N_q=2, D=2: enumerate all 4 paths; greedy is the path whose
    // stage distances are lexicographically smallest
    let mut brute = true;
    for _ in 0..500 {
        let cbs = vec![randn(&[2, 2], &mut rng), randn(&[2, 2], &mut rng)];
        let x = randn(&[2, 1], &mut rng);
        let xs = [x.data()[0], x.data()[1]];
        let word = |s: usize, c: usize| [cbs[s].data()[2 * c], cbs[s].data()[2 * c + 1]];
        let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
        let mut best: Option<((f64, f64), (usize, usize))> = None;
        for c0 in 0..2 {
            for c1 in 0..2 {
                let w0 = word(0, c0);
                let d0 = dist(xs, w0);
                let r = [xs[0] - w0[0], xs[1] - w0[1]];
                let d1 = dist(r, word(1, c1));
                if best.is_none_or(|(key, _)| (d0, d1) < key) {
                    best = Some(((d0, d1), (c0, c1)));
                }
            }
        }
        let (c0, c1) = best.unwrap().1;
        let q = quantize_with(&cbs, &x).unwrap();
        brute &= q.codes == vec![vec![c0], vec![c1]];
    }
    pass &= brute;
    notes.push(format!("brute force agrees {brute}"));
    let secs = t0.elapsed().as_secs_f64();
    pass &= secs < 10.0;
    verdict(4, "RVQ invariants", pass, format!("{}, {secs:.2}s", notes.join(", ")));
}

/// The trained desk system shared by criteria 5, 6 and 10.
struct Desk {
    codec: CodecModel,
    codec_bits_before: Vec<u64>,
    ablation: AblationResult,
    minutes: f64,
}

fn desk_corpus() -> Corpus {
    Corpus::new(CorpusConfig { seed: 0, n_utterances: 200, ..Default::default() }).unwrap()
}

fn desk_se() -> SEConfig {
    SEConfig { n_blocks: 2, emb: 64, n_heads: 4, ffn_mult: 4, seed: 0, ..Default::default() }
}

fn desk_train() -> TrainConfig {
    TrainConfig {
        lr: 1e-3,
        epochs: 20,
        batch_size: 4,
        weights: LossWeights { alpha: 1.0, beta: 2.5, gamma: 0.5 },
        ..Default::default()
    }
}

fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let t0 = Instant::now();
        let corpus = desk_corpus();
        let pcfg = PretrainConfig { epochs: 15, ..Default::default() };
        let (codec, _) = pretrain_codec(CodecConfig::default(), &pcfg, &corpus).unwrap();
        let codec_bits_before = codec.params().value_bits();
        let ablation = run_ablation(&codec, &desk_se(), &corpus, &desk_train()).unwrap();
        Desk { codec, codec_bits_before, ablation, minutes: t0.elapsed().as_secs_f64() / 60.0 }
    })
}

#[test]
fn c05_loss_ablation() {
    let _g = serial();
    let d = desk();
    let row = |a| d.ablation.row(a).unwrap();
    let (all, tfo, emb) = (row(Ablation::All), row(Ablation::TimeFreqOnly), row(Ablation::EmbOnly));
    for r in [emb, tfo, all] {
        say!(
            "  {:<15} val l_emb {:.4} (initial {:.4}), SI-SNR improvement {:+.2} dB, mel distance {:.4}",
            r.arm.name(),
            r.val_l_emb,
            r.initial_val_l_emb,
            r.si_snr_improvement,
            r.mel_distance
        );
    }
    let ratio = tfo.val_l_emb / all.val_l_emb;
    let shrink = all.val_l_emb / all.initial_val_l_emb;
    verdict(
        5,
        "loss ablation",
        ratio >= 2.0 && shrink <= 0.5 && d.minutes <= 30.0,
        format!(
            "time_freq_only/all l_emb = {ratio:.2} (need >= 2), all final/initial = {shrink:.3} (need <= 0.5), {:.1} min",
            d.minutes
        ),
    );
}

#[test]
fn c06_enhancement_efficacy() {
    let _g = serial();
    let d = desk();
    let model = &d.ablation.outcome(Ablation::All).unwrap().model;
    // a corpus with a different seed never seen in training
    let held = Corpus::new(CorpusConfig { seed: 1, n_utterances: 60, ..Default::default() }).unwrap();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..held.len())
        .map(|i| held.mixture(i, VALIDATION_EPOCH).map(|p| (p.clean, p.noisy)).unwrap())
        .collect();
    let report = evaluate(&d.codec, model, &pairs, &MelPlan::new(&MelConfig::default()).unwrap()).unwrap();
    let n = report.utterances.len();
    let med = report.median_si_snr_improvement;
    verdict(6, "enhancement efficacy", n >= 50 && med > 0.0, format!("median SI-SNR improvement {med:+.3} dB over {n} held-out utterances"));
}

#[test]
fn c07_efficiency_mechanism() {
    let _g = serial();
    let cfg = SEConfig::default();
    let l = 160_000u64;
    let latent = count_macs(&se_layers(&cfg, 64, 320), l as usize, 16_000).unwrap().total;
    let base = count_macs(&TimeDomainBaseline::matched(&cfg).layers(), l as usize, 16_000).unwrap().total;
    let (e, d, k, m, b) = (256u64, 64u64, 3u64, 4u64, 8u64);
    let block = |t: u64| 2 * t * t * e + 4 * t * e * e + 2 * e * m * e * t;
    let t_lat = l / 320;
    let latent_cf = d * e * t_lat + b * block(t_lat) + 2 * e * e * k * t_lat + e * d * t_lat;
    let t_time = l / 8;
    let base_cf = 16 * e * t_time + b * block(t_time) + 2 * e * e * k * t_time + 16 * e * t_time;
    let ratio = base as f64 / latent as f64;
    verdict(
        7,
        "efficiency mechanism",
        latent == latent_cf && base == base_cf && ratio >= 10.0,
        format!("latent {latent} (closed form {latent_cf}), time-domain {base} (closed form {base_cf}), ratio {ratio:.1}"),
    );
}

#[test]
fn c08_rtf_harness() {
    let _g = serial();
    let codec = CodecModel::new(CodecConfig::default()).unwrap();
    let se = SEModel::new(SEConfig::default(), 64).unwrap();
    let pipe = Pipeline::new(codec, se).unwrap();
    let wave = synthesize(&UtteranceSpec::new(8, 10.0, 16_000, SourceKind::PseudoSpeech).unwrap()).unwrap();
    let r = measure_rtf(&pipe, &wave, 5, 1).unwrap();
    let gap = r.stage_gap();
    let s = r.stages;
    verdict(
        8,
        "RTF harness",
        r.runs.len() >= 5 && r.rtf < 1.0 && gap <= 0.05,
        format!(
            "10 s input, median RTF {:.4} (min {:.3} s, max {:.3} s); encode {:.3} s, se {:.3} s, quantize {:.3} s, decode {:.3} s; stage sum off by {:.2}%",
            r.rtf,
            r.wall_min,
            r.wall_max,
            s.encode,
            s.se,
            s.quantize,
            s.decode,
            100.0 * gap
        ),
    );
}

/// A small but complete run: codec pretraining then SE training.
fn small_run() -> (Vec<u8>, Vec<u8>, String, String) {
    let corpus = Corpus::new(CorpusConfig { seed: 5, n_utterances: 20, ..Default::default() }).unwrap();
    let ccfg = CodecConfig { base_channels: 2, ..Default::default() };
    let pcfg = PretrainConfig { epochs: 2, warmup_epochs: 1, ..Default::default() };
    let (codec, _) = pretrain_codec(ccfg, &pcfg, &corpus).unwrap();
    let se_cfg = SEConfig { n_blocks: 1, emb: 16, n_heads: 2, ffn_mult: 2, seed: 5, ..Default::default() };
    let cfg = TrainConfig { epochs: 2, ..desk_train() };
    let out = train_se(&codec, SEModel::new(se_cfg, 64).unwrap(), &corpus, &cfg).unwrap();
    let cfg_json = serde_json::json!({ "codec": codec.config() });
    let codec_bytes = encode_checkpoint(&cfg_json, &[codec.params()]).unwrap();
    let se_bytes = encode_checkpoint(&cfg_json, &[codec.params(), out.model.params()]).unwrap();
    (codec_bytes, se_bytes, history_csv(&out.train_losses()), history_csv(&out.val_losses()))
}

#[test]
fn c09_determinism() {
    let _g = serial();
    let a = small_run();
    let b = small_run();
    let same = [a.0 == b.0, a.1 == b.1, a.2 == b.2, a.3 == b.3];
    verdict(
        9,
        "determinism",
        same.iter().all(|&s| s),
        format!(
            "codec checkpoint {}, pipeline checkpoint {}, train CSV {}, val CSV {} ({} + {} checkpoint bytes)",
            same[0], same[1], same[2], same[3], a.0.len(), a.1.len()
        ),
    );
}

#[test]
fn c10_frozen_codec() {
    let _g = serial();
    let d = desk();
    let after = d.codec.params().value_bits();
    let same = after == d.codec_bits_before;
    verdict(
        10,
        "frozen codec",
        same,
        format!("{} codec values bit-identical across three SE training runs: {same}", after.len()),
    );
}

#[test]
fn c11_dsp_accuracy() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let clean = synthesize(&UtteranceSpec::new(1, 0.05, 16_000, SourceKind::PseudoSpeech).unwrap()).unwrap();
    let noise = synthesize(&UtteranceSpec::new(2, 0.05, 16_000, SourceKind::White).unwrap()).unwrap();
    let mut worst_snr = 0.0f64;
    for _ in 0..10_000 {
        let target = rng.gen_range(-5.0..=20.0);
        let p = mix_at_snr(&clean, &noise, target).unwrap();
        let residual: Vec<f64> = p.noisy.iter().zip(&p.clean).map(|(n, c)| n - c).collect();
        worst_snr = worst_snr.max((snr_db(&p.clean, &residual) - target).abs());
    }

    let mut worst_dft = 0.0f64;
    for n in [16usize, 60, 128, 400, 1024] {
        let plan = FramePlan::new(n);
        let frame: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = plan.spectrum(&frame, DftPath::Direct);
        let b = plan.spectrum(&frame, DftPath::Fft);
        for (x, y) in a.iter().zip(&b) {
            worst_dft = worst_dft.max((x - y).norm());
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rt.wav");
    let pcm: Vec<f64> = (0..4000).map(|_| rng.gen_range(-32768i32..=32767) as f64 / PCM_SCALE).collect();
    wav_write(&path, &pcm, 16_000).unwrap();
    let back = wav_read(&path).unwrap();
    let wav_exact = back.sample_rate == 16_000 && back.samples.iter().zip(&pcm).all(|(a, b)| a.to_bits() == b.to_bits()) && back.samples.len() == pcm.len();
    let bytes = std::fs::read(&path).unwrap();
    wav_write(&path, &back.samples, 16_000).unwrap();
    let bytes_exact = std::fs::read(&path).unwrap() == bytes;

    verdict(
        11,
        "DSP accuracy",
        worst_snr <= 0.01 && worst_dft <= 1e-9 && wav_exact && bytes_exact,
        format!(
            "SNR error max {worst_snr:.2e} dB over 10^4 draws, DFT/FFT max diff {worst_dft:.2e}, WAV samples exact {wav_exact}, file bytes exact {bytes_exact}"
        ),
    );
}

/// 5-epoch moving averages of training l_overall over the run's final half.
fn final_half_trend(outcome: &latent_se::train::TrainOutcome) -> Vec<f64> {
    let losses: Vec<f64> = outcome.train_losses().iter().map(|e| e.loss.l_overall).collect();
    let ma: Vec<f64> = losses.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
    // ma[i] ends at epoch i + 5
    let start = (losses.len() / 2).saturating_sub(5);
    ma[start..].to_vec()
}

#[test]
fn desk_training_properties() {
    let _g = serial();
    let d = desk();
    let emb = d.ablation.row(Ablation::EmbOnly).unwrap().val_l_emb;
    let all = d.ablation.row(Ablation::All).unwrap().val_l_emb;
    say!("property: emb_only l_emb {emb:.4} vs all {all:.4} (ratio {:.2}, need <= 1.5)", emb / all);
    assert!(emb <= 1.5 * all);
    for arm in Ablation::ARMS {
        let trend = final_half_trend(d.ablation.outcome(arm).unwrap());
        let steady = trend.windows(2).all(|w| w[1] <= w[0]);
        say!("property: {} training loss moving average non-increasing over final half: {steady}", arm.name());
        // the arm without the latent loss is expected to drift
        if arm != Ablation::TimeFreqOnly {
            assert!(steady, "{}: {trend:?}", arm.name());
        }
    }
}
