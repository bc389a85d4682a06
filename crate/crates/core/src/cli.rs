//! Command-line front end. `latent-se <command> --help` lists every flag; each
//! flag overrides the config-file key of the same name.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::codec::{load_checkpoint, pretrain_codec, CodecModel};
use crate::config::RunConfig;
use crate::data::{read_manifest, wav_read, wav_write, Corpus};
use crate::dsp::MelPlan;
use crate::error::{Error, Result};
use crate::io::write_bytes_atomic;
use crate::losses::write_history_csv;
use crate::perf::{compare_efficiency, count_macs, measure_rtf, se_layers, TimeDomainBaseline};
use crate::pipeline::Pipeline;
use crate::se::SEModel;
use crate::train::{evaluate, run_ablation, train_se, Ablation, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "latent-se", version, about = "Speech enhancement in a neural audio codec's latent space")]
pub struct Cli {
    /// JSON run config; missing keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every seeded component (codec, SE, data, training).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the codec on clean synthetic speech.
    PretrainCodec(PretrainArgs),
    /// Train the SE model against a frozen codec.
    TrainSe(TrainArgs),
    /// Enhance one WAV file.
    Enhance(EnhanceArgs),
    /// Score a trained pipeline on `clean noisy` WAV pairs.
    Evaluate(EvaluateArgs),
    /// Count MACs and time the pipeline.
    Profile(ProfileArgs),
    /// Train one SE model per loss configuration and tabulate them.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Number of corpus utterances (data.n_utterances).
    #[arg(long)]
    pub n_utterances: Option<usize>,
    /// Clean WAV manifest replacing synthetic speech (data.manifest).
    #[arg(long)]
    pub data_manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Output codec checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub warmup_epochs: Option<usize>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Per-epoch loss CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Run manifest JSON.
    #[arg(long)]
    pub run_manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Loss weights alpha, beta, gamma.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Pretrained codec checkpoint.
    #[arg(long)]
    pub codec: PathBuf,
    /// Output pipeline checkpoint (codec and SE).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_ablation)]
    pub ablation: Option<Ablation>,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Directory for periodic and best-validation checkpoints.
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Training loss CSV; validation losses go to the same name with `.val` before the extension.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub run_manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// One `clean.wav noisy.wav` pair per line.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Per-utterance CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Pipeline checkpoint; freshly initialized models from the config otherwise.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Input durations in seconds (perf.durations).
    #[arg(long, value_delimiter = ',')]
    pub durations: Option<Vec<f64>>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Timing threads; 1 pins timing to one thread.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Skip timing and report MACs only.
    #[arg(long)]
    pub no_rtf: bool,
    /// Efficiency CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// MAC and RTF report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub codec: PathBuf,
    /// Three-arm comparison CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub run_manifest: Option<PathBuf>,
}

fn parse_ablation(s: &str) -> std::result::Result<Ablation, String> {
    Ablation::ARMS
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| format!("expected one of emb_only, time_freq_only, all; got {s}"))
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl DataArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.data.n_utterances, self.n_utterances);
        if self.data_manifest.is_some() {
            cfg.data.manifest = self.data_manifest.clone();
        }
    }
}

impl TrainFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.train.epochs, self.epochs);
        set(&mut cfg.train.lr, self.lr);
        set(&mut cfg.train.batch_size, self.batch_size);
        set(&mut cfg.train.weights.alpha, self.alpha);
        set(&mut cfg.train.weights.beta, self.beta);
        set(&mut cfg.train.weights.gamma, self.gamma);
        self.data.apply(cfg);
    }
}

impl Cli {
    /// The config file (or defaults) with every flag applied.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.set_seed(s);
        }
        match &self.command {
            Command::PretrainCodec(a) => {
                set(&mut cfg.pretrain.epochs, a.epochs);
                set(&mut cfg.pretrain.lr, a.lr);
                set(&mut cfg.pretrain.batch_size, a.batch_size);
                set(&mut cfg.pretrain.warmup_epochs, a.warmup_epochs);
                a.data.apply(&mut cfg);
            }
            Command::TrainSe(a) => {
                a.train.apply(&mut cfg);
                set(&mut cfg.train.ablation, a.ablation);
                set(&mut cfg.train.checkpoint_every, a.checkpoint_every);
                if a.checkpoint_dir.is_some() {
                    cfg.train.checkpoint_dir = a.checkpoint_dir.clone();
                }
            }
            Command::Ablate(a) => a.train.apply(&mut cfg),
            Command::Profile(a) => {
                set(&mut cfg.perf.durations, a.durations.clone());
                set(&mut cfg.perf.runs, a.runs);
                set(&mut cfg.perf.threads, a.threads);
            }
            Command::Enhance(_) | Command::Evaluate(_) => {}
        }
        cfg.sync();
        cfg.validate()?;
        Ok(cfg)
    }
}

fn seed_of(cfg: &RunConfig) -> u64 {
    cfg.train.seed
}

fn write_manifest(path: Option<&PathBuf>, command: &str, cfg: &RunConfig, corpus: &Corpus, metrics: serde_json::Value) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    RunManifest {
        command: command.into(),
        config: serde_json::to_value(cfg)?,
        seed: seed_of(cfg),
        corpus_hash: corpus.content_hash()?,
        metrics,
    }
    .write(path)
}

fn load_codec(path: &Path) -> Result<CodecModel> {
    CodecModel::from_checkpoint(&load_checkpoint(path)?)
}

fn val_history_path(p: &Path) -> PathBuf {
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = p.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    p.with_file_name(format!("{stem}.val{ext}"))
}

fn pretrain(cfg: &RunConfig, a: &PretrainArgs) -> Result<()> {
    let corpus = Corpus::new(cfg.data.clone())?;
    let (model, history) = pretrain_codec(cfg.codec.clone(), &cfg.pretrain, &corpus)?;
    model.save(&a.out)?;
    if let Some(h) = &a.history {
        let mut s = String::from("epoch,l1,mel,commit,codebook,total\n");
        for r in &history {
            s += &format!("{},{:e},{:e},{:e},{:e},{:e}\n", r.epoch, r.l1, r.mel, r.commit, r.codebook, r.total);
        }
        write_bytes_atomic(h, s.as_bytes())?;
    }
    let last = history.last();
    write_manifest(a.run_manifest.as_ref(), "pretrain-codec", cfg, &corpus, json!({ "final_epoch": last }))?;
    println!("codec checkpoint written to {}", a.out.display());
    Ok(())
}

fn train(cfg: &RunConfig, a: &TrainArgs) -> Result<()> {
    let codec = load_codec(&a.codec)?;
    let corpus = Corpus::new(cfg.data.clone())?;
    let se = SEModel::new(cfg.se.clone(), codec.config().latent_dim)?;
    let out = train_se(&codec, se, &corpus, &cfg.train)?;
    let last = *out.history.last().expect("history holds the initial validation");
    Pipeline::new(codec, out.model.clone())?.save(&a.out)?;
    if let Some(h) = &a.history {
        write_history_csv(h, &out.train_losses())?;
        write_history_csv(&val_history_path(h), &out.val_losses())?;
    }
    let metrics = json!({ "final": last, "initial_val": out.history[0].val, "best_epoch": out.best_epoch });
    write_manifest(a.run_manifest.as_ref(), "train-se", cfg, &corpus, metrics)?;
    println!(
        "epoch {}: val l_emb {:.5} l_time {:.5} l_freq {:.5} (initial l_emb {:.5}); wrote {}",
        last.epoch,
        last.val.l_emb,
        last.val.l_time,
        last.val.l_freq,
        out.history[0].val.l_emb,
        a.out.display()
    );
    Ok(())
}

fn enhance(a: &EnhanceArgs) -> Result<()> {
    let pipe = Pipeline::load(&a.checkpoint)?;
    let wav = wav_read(&a.input)?;
    let sr = pipe.codec.config().sample_rate;
    if wav.sample_rate != sr {
        return Err(Error::Wav(format!("{}: sample rate {} Hz, codec expects {sr} Hz", a.input.display(), wav.sample_rate)));
    }
    let t0 = Instant::now();
    let e = pipe.enhance(&wav.samples)?;
    let wall = t0.elapsed().as_secs_f64();
    wav_write(&a.out, &e.wave, sr)?;
    let audio = wav.samples.len() as f64 / sr as f64;
    println!("enhanced {:.2} s of audio in {:.3} s (RTF {:.4})", audio, wall, wall / audio);
    Ok(())
}

fn evaluate_cmd(cfg: &RunConfig, a: &EvaluateArgs) -> Result<()> {
    let pipe = Pipeline::load(&a.checkpoint)?;
    let sr = pipe.codec.config().sample_rate;
    let rows = read_manifest(&a.manifest)?;
    let mut pairs = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let [clean, noisy] = r.as_slice() else {
            return Err(Error::Config(format!("{} line {}: expected `clean noisy`", a.manifest.display(), i + 1)));
        };
        let (c, n) = (wav_read(clean)?, wav_read(noisy)?);
        if c.sample_rate != sr || n.sample_rate != sr {
            return Err(Error::Wav(format!("pair {}: sample rate differs from codec's {sr} Hz", i + 1)));
        }
        pairs.push((c.samples, n.samples));
    }
    if pairs.is_empty() {
        return Err(Error::Config(format!("{}: no pairs", a.manifest.display())));
    }
    let report = evaluate(&pipe.codec, &pipe.se, &pairs, &MelPlan::new(&cfg.mel)?)?;
    let mut s = String::from("clean,noisy,si_snr_noisy,si_snr_enhanced,si_snr_improvement,mel_distance,latent_l1\n");
    for (r, u) in rows.iter().zip(&report.utterances) {
        s += &format!(
            "{},{},{:e},{:e},{:e},{:e},{:e}\n",
            r[0].display(),
            r[1].display(),
            u.si_snr_noisy,
            u.si_snr_enhanced,
            u.si_snr_improvement,
            u.mel_distance,
            u.latent_l1
        );
    }
    write_bytes_atomic(&a.out, s.as_bytes())?;
    println!(
        "{} pairs: median SI-SNR improvement {:.3} dB, mean mel distance {:.5}, mean latent L1 {:.5}",
        report.utterances.len(),
        report.median_si_snr_improvement,
        report.mean_mel_distance,
        report.mean_latent_l1
    );
    Ok(())
}

fn profile(cfg: &RunConfig, a: &ProfileArgs) -> Result<()> {
    let pipe = match &a.checkpoint {
        Some(p) => Pipeline::load(p)?,
        None => {
            let codec = CodecModel::new(cfg.codec.clone())?;
            let se = SEModel::new(cfg.se.clone(), cfg.codec.latent_dim)?;
            Pipeline::new(codec, se)?
        }
    };
    let sr = pipe.codec.config().sample_rate;
    let baseline = TimeDomainBaseline::matched(pipe.se.config());
    let mut report = compare_efficiency(&pipe, &baseline, &cfg.perf.durations, None)?;
    let layers = se_layers(pipe.se.config(), pipe.se.latent_dim(), pipe.codec.hop());
    let mut details = Vec::new();
    for &d in &cfg.perf.durations {
        let len = (d * sr as f64).round() as usize;
        let macs = count_macs(&layers, len, sr)?;
        let rtf = if a.no_rtf {
            None
        } else {
            // a fixed tone keeps timing independent of any data source
            let wave: Vec<f64> = (0..len).map(|i| 0.3 * (i as f64 * 0.05).sin()).collect();
            let r = measure_rtf(&pipe, &wave, cfg.perf.runs, cfg.perf.threads)?;
            if let Some(row) = report.rows.iter_mut().find(|row| row.duration_s == d && row.model == "latent") {
                row.rtf_median = Some(r.rtf);
                row.rtf_mean = Some(r.rtf_mean);
            }
            Some(r)
        };
        details.push(json!({ "duration_s": d, "macs": macs, "rtf": rtf }));
    }
    write_bytes_atomic(&a.out, report.csv().as_bytes())?;
    if let Some(p) = &a.report {
        let threads = if cfg.perf.threads == 1 { "single-threaded".to_string() } else { format!("{} threads", cfg.perf.threads) };
        let doc = json!({ "timing": threads, "durations": details, "baseline_params": baseline.n_params() });
        write_bytes_atomic(p, serde_json::to_string_pretty(&doc)?.as_bytes())?;
    }
    print!("{}", report.table());
    if cfg.perf.threads > 1 {
        println!("(timed with {} threads)", cfg.perf.threads);
    }
    Ok(())
}

fn ablate(cfg: &RunConfig, a: &AblateArgs) -> Result<()> {
    let codec = load_codec(&a.codec)?;
    let corpus = Corpus::new(cfg.data.clone())?;
    let r = run_ablation(&codec, &cfg.se, &corpus, &cfg.train)?;
    r.write_csv(&a.out)?;
    write_manifest(a.run_manifest.as_ref(), "ablate", cfg, &corpus, serde_json::to_value(&r.rows)?)?;
    print!("{}", r.csv());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.resolve()?;
    log::info!("resolved config:\n{}", cfg.to_json());
    match &cli.command {
        Command::PretrainCodec(a) => pretrain(&cfg, a),
        Command::TrainSe(a) => train(&cfg, a),
        Command::Enhance(a) => enhance(a),
        Command::Evaluate(a) => evaluate_cmd(&cfg, a),
        Command::Profile(a) => profile(&cfg, a),
        Command::Ablate(a) => ablate(&cfg, a),
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LOG_LEVEL", "info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
