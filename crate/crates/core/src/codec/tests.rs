use super::*;
use crate::autodiff::{grad_check_params, Tape, Tensor};

fn desk(strides: Vec<usize>, d: usize) -> CodecConfig {
    CodecConfig { strides, latent_dim: d, base_channels: 2, codebook_size: 8, n_codebooks: 2, ..CodecConfig::default() }
}

fn tone(len: usize) -> Vec<f64> {
    (0..len).map(|i| 0.5 * (i as f64 * 0.07).sin()).collect()
}

#[test]
fn default_stride_set_compresses_320x() {
    let m = CodecModel::new(CodecConfig::default()).unwrap();
    assert_eq!(m.hop(), 320);
    for (l, t) in [(320, 1), (3200, 10)] {
        assert_eq!(m.encode(&tone(l)).unwrap().shape(), [64, t]);
    }
}

#[test]
fn small_strides_shape_chain() {
    let m = CodecModel::new(desk(vec![2, 2], 8)).unwrap();
    assert_eq!(m.encode(&tone(16)).unwrap().shape(), [8, 4]);
}

#[test]
fn encode_pads_and_rejects_empty() {
    let m = CodecModel::new(desk(vec![2, 2], 8)).unwrap();
    assert_eq!(m.encode(&tone(13)).unwrap().shape(), [8, 4]);
    assert!(m.encode(&[]).is_err());
}

#[test]
fn decode_length_and_bounds() {
    let m = CodecModel::new(CodecConfig::default()).unwrap();
    let z = Tensor::randn(vec![64, 10], 3.0, &mut rand::thread_rng());
    let y = m.decode(&z).unwrap();
    assert_eq!(y.len(), 3200);
    assert!(y.iter().all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn zero_latent_decodes_to_silence() {
    let m = CodecModel::new(desk(vec![2, 4], 8)).unwrap();
    let y = m.decode(&Tensor::zeros(vec![8, 5])).unwrap();
    assert_eq!(y, vec![0.0; 40]);
}

#[test]
fn round_trip_preserves_length() {
    let m = CodecModel::new(desk(vec![2, 5], 8)).unwrap();
    for l in [1, 9, 10, 11, 137] {
        assert_eq!(m.reconstruct(&tone(l)).unwrap().len(), l);
    }
}

#[test]
fn decoder_rejects_wrong_width() {
    let m = CodecModel::new(desk(vec![2], 8)).unwrap();
    let err = m.decode(&Tensor::zeros(vec![7, 3])).unwrap_err().to_string();
    assert!(err.contains("D:"), "{err}");
}

#[test]
fn invalid_configs_rejected() {
    for c in [
        CodecConfig { strides: vec![], ..CodecConfig::default() },
        CodecConfig { codebook_size: 1, ..CodecConfig::default() },
        CodecConfig { latent_dim: 0, ..CodecConfig::default() },
        CodecConfig { snake_alpha_init: 0.0, ..CodecConfig::default() },
    ] {
        assert!(CodecModel::new(c).is_err());
    }
}

#[test]
fn zero_codeword_keeps_residuals_monotone() {
    let m = CodecModel::new(CodecConfig { n_codebooks: 4, ..desk(vec![2, 2], 8) }).unwrap();
    let latent = m.encode(&tone(400)).unwrap();
    let q = m.quantize(&latent).unwrap();
    for w in q.residual_energy().windows(2) {
        assert!(w[1].iter().zip(&w[0]).all(|(b, a)| b <= a));
    }
    let back = codes_to_latent(&m.rvq().tensors(m.params()), &q.codes).unwrap();
    assert_eq!(back, q.quantized);
}

#[test]
fn straight_through_gradient_is_identity() {
    let m = CodecModel::new(desk(vec![2, 2], 4)).unwrap();
    let latent = m.encode(&tone(32)).unwrap();
    let zq = m.quantize(&latent).unwrap().quantized;
    let grad_at = |input: &Tensor, through_quantizer: bool| {
        let mut tape = Tape::new();
        let p = m.params().bind(&mut tape, false);
        let x = tape.leaf(input, true);
        let z = if through_quantizer { m.quantize_on(&mut tape, x).unwrap().0.quantized } else { x };
        let y = m.decode_on(&mut tape, &p, z).unwrap();
        let l = tape.sq_mean(y);
        tape.backward(l).unwrap().get_or_zeros(&tape, x)
    };
    let through = grad_at(&latent, true);
    assert!(through.iter().any(|v| *v != 0.0));
    assert_eq!(through, grad_at(&zq, false));
}

#[test]
fn codec_gradients_match_finite_differences() {
    let m = CodecModel::new(CodecConfig { base_channels: 2, ..desk(vec![2, 2], 3) }).unwrap();
    let x = tone(16);
    let r = grad_check_params(
        m.params(),
        |tape, p| {
            let w = tape.constant_from(vec![1, 16], x.clone())?;
            let lat = m.encode_on(tape, p, w)?;
            let y = m.decode_on(tape, p, lat)?;
            Ok(tape.sq_mean(y))
        },
        1e-6,
    )
    .unwrap();
    assert!(!r.flagged(), "{r:?}");
}

#[test]
fn checkpoint_round_trip_restores_model() {
    let mut m = CodecModel::new(desk(vec![2, 2], 8)).unwrap();
    m.params_mut().round_to_f32();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("codec.ckpt");
    m.save(&p).unwrap();
    let back = CodecModel::from_checkpoint(&load_checkpoint(&p).unwrap()).unwrap();
    assert_eq!(back.config(), m.config());
    assert_eq!(back.params().value_bits(), m.params().value_bits());
    assert_eq!(back.reconstruct(&tone(50)).unwrap(), m.reconstruct(&tone(50)).unwrap());
}

#[test]
fn zero_epochs_returns_initial_model() {
    let corpus = crate::data::Corpus::new(crate::data::CorpusConfig { n_utterances: 10, ..Default::default() }).unwrap();
    let cfg = desk(vec![2, 4, 5, 8], 8);
    let (m, hist) = pretrain_codec(cfg.clone(), &PretrainConfig { epochs: 0, ..Default::default() }, &corpus).unwrap();
    assert!(hist.is_empty());
    assert_eq!(m.params().value_bits(), CodecModel::new(cfg).unwrap().params().value_bits());
}
