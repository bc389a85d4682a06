use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use latent_se::data::{wav_read, wav_write};

const BIN: &str = env!("CARGO_BIN_EXE_latent-se");

fn tiny_config(dir: &Path) -> PathBuf {
    let cfg = serde_json::json!({
        "version": 1,
        "codec": { "strides": [2, 4], "base_channels": 2, "latent_dim": 4, "n_codebooks": 2, "codebook_size": 8 },
        "pretrain": { "epochs": 2, "warmup_epochs": 1, "batch_size": 2 },
        "se": { "n_blocks": 1, "emb": 8, "n_heads": 2, "ffn_mult": 2 },
        "train": { "epochs": 2, "lr": 0.001, "batch_size": 2, "weights": { "alpha": 1.0, "beta": 2.0, "gamma": 0.5 } },
        "mel": { "n_fft": 128, "hop": 32, "n_mels": 16 },
        "data": { "n_utterances": 8, "crop_seconds": 0.05, "validation_every": 4 },
        "perf": { "durations": [0.1], "runs": 5 }
    });
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("LOG_LEVEL", "warn").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Pretrains a codec and trains an SE model into `dir`; returns (codec, pipeline).
fn train_into(dir: &Path, cfg: &Path, seed: &str) -> (PathBuf, PathBuf) {
    let codec = dir.join("codec.ckpt");
    let pipe = dir.join("se.ckpt");
    ok(&["pretrain-codec", "--config", s(cfg), "--seed", seed, "--out", s(&codec), "--history", s(&dir.join("codec.csv"))]);
    ok(&[
        "train-se",
        "--config",
        s(cfg),
        "--seed",
        seed,
        "--codec",
        s(&codec),
        "--out",
        s(&pipe),
        "--history",
        s(&dir.join("history.csv")),
        "--run-manifest",
        s(&dir.join("run.json")),
    ]);
    (codec, pipe)
}

#[test]
fn help_documents_every_subcommand() {
    for (cmd, flag) in [
        ("pretrain-codec", "--epochs"),
        ("train-se", "--ablation"),
        ("enhance", "--checkpoint"),
        ("evaluate", "--manifest"),
        ("profile", "--durations"),
        ("ablate", "--codec"),
    ] {
        let out = ok(&[cmd, "--help"]);
        assert!(out.contains(flag) && out.contains("--config") && out.contains("--seed"), "{cmd}: {out}");
    }
}

#[test]
fn full_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = tiny_config(d);
    let (codec, pipe) = train_into(d, &cfg, "3");
    let hist = std::fs::read_to_string(d.join("history.csv")).unwrap();
    assert!(hist.starts_with("epoch,l_emb,l_time,l_freq,l_overall"));
    assert_eq!(hist.lines().count(), 3);
    assert_eq!(std::fs::read_to_string(d.join("history.val.csv")).unwrap().lines().count(), 4);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["corpus_hash"].as_str().unwrap().len(), 64);

    // enhance keeps length and rate
    let clean: Vec<f64> = (0..8000).map(|i| 0.3 * (i as f64 * 0.07).sin()).collect();
    let noisy: Vec<f64> = clean.iter().enumerate().map(|(i, c)| c + 0.05 * ((i * 7919 % 101) as f64 / 50.0 - 1.0)).collect();
    let (cw, nw, ew) = (d.join("clean.wav"), d.join("noisy.wav"), d.join("enhanced.wav"));
    wav_write(&cw, &clean, 16_000).unwrap();
    wav_write(&nw, &noisy, 16_000).unwrap();
    let out = ok(&["enhance", "--in", s(&nw), "--out", s(&ew), "--checkpoint", s(&pipe)]);
    assert!(out.contains("RTF"));
    let e = wav_read(&ew).unwrap();
    assert_eq!((e.samples.len(), e.sample_rate), (8000, 16_000));

    // evaluate on a two-pair manifest, one pair clean against itself
    let m = d.join("pairs.txt");
    std::fs::write(&m, "clean.wav noisy.wav\nclean.wav clean.wav\n").unwrap();
    let csv = d.join("eval.csv");
    ok(&["evaluate", "--config", s(&cfg), "--checkpoint", s(&pipe), "--manifest", s(&m), "--out", s(&csv)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("clean,noisy,si_snr_noisy"));

    // profile with timing on the tiny pipeline
    let prof = d.join("profile.csv");
    let report = d.join("profile.json");
    ok(&["profile", "--config", s(&cfg), "--checkpoint", s(&pipe), "--out", s(&prof), "--report", s(&report)]);
    let p = std::fs::read_to_string(&prof).unwrap();
    assert!(p.starts_with("duration_s,model,macs_total,rtf_median,rtf_mean"));
    let latent_row = p.lines().find(|l| l.contains(",latent,")).unwrap();
    assert!(!latent_row.ends_with(','), "RTF filled: {latent_row}");
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["durations"][0]["rtf"]["runs"].as_array().unwrap().len(), 5);

    // ablation table
    let ab = d.join("ablation.csv");
    ok(&["ablate", "--config", s(&cfg), "--codec", s(&codec), "--epochs", "1", "--out", s(&ab)]);
    let t = std::fs::read_to_string(&ab).unwrap();
    assert_eq!(t.lines().next().unwrap(), "arm,val_l_emb,si_snr_improvement,mel_distance");
    let arms: Vec<&str> = t.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(arms, ["emb_only", "time_freq_only", "all"]);
}

#[test]
fn profile_default_config_pins_mac_total() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    ok(&["profile", "--durations", "10", "--no-rtf", "--out", s(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let row = text.lines().find(|l| l.contains(",latent,")).unwrap();
    assert_eq!(row.split(',').nth(2).unwrap(), "4382720000");
}

#[test]
fn seeded_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = tiny_config(a.path());
    train_into(a.path(), &cfg, "11");
    train_into(b.path(), &cfg, "11");
    for f in ["codec.ckpt", "se.ckpt", "codec.csv", "history.csv", "history.val.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn failures_exit_nonzero_and_leave_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = d.join("out.wav");

    let missing = run(&["enhance", "--in", "nope.wav", "--out", s(&out), "--checkpoint", s(&d.join("missing.ckpt"))]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing.ckpt"));

    let bad_cfg = d.join("bad.json");
    std::fs::write(&bad_cfg, r#"{"version": 1, "train": {"learnin_rate": 1}}"#).unwrap();
    let o = run(&["profile", "--config", s(&bad_cfg), "--no-rtf", "--out", s(&d.join("p.csv"))]);
    assert!(!o.status.success());
    assert!(!d.join("p.csv").exists());

    // malformed WAV against a real checkpoint
    let cfg = tiny_config(d);
    let (_, pipe) = train_into(d, &cfg, "1");
    let junk = d.join("junk.wav");
    std::fs::write(&junk, b"RIFF0000WAVEjunk").unwrap();
    let o = run(&["enhance", "--in", s(&junk), "--out", s(&out), "--checkpoint", s(&pipe)]);
    assert!(!o.status.success());
    assert!(!out.exists());
    let leftovers: Vec<_> = std::fs::read_dir(d).unwrap().filter_map(|e| e.ok()).filter(|e| e.file_name().to_string_lossy().contains(".tmp")).collect();
    assert!(leftovers.is_empty());
}
