//! `ttn`: decompose weight matrices into tensor-train form, simulate noisy
//! multi-channel scenes, train dense/TT denoising regressors, enhance
//! recordings and score them.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use ttn_core::audio::{
    build_dataset, enhance, lps, normalize, read_wav, read_wav_mono, simulate_scene, stft,
    truncate_bins, write_wav, DatasetMode, FeatureMatrix, FeatureStats, Manifest, NormStats,
    PipelineSpec, SceneFile, Waveform,
};
use ttn_core::checkpoint;
use ttn_core::experiment::{run_experiment, ExperimentConfig};
use ttn_core::metrics::{segmental_snr, si_sdr};
use ttn_core::nn::{build_network, train, ArchSpec, NetKind, TrainConfig};
use ttn_core::tensor::DenseTensor;
use ttn_core::tt::{dense_param_count, tt_param_count, tt_svd_decompose, ModeFactorization};

#[derive(Parser)]
#[command(name = "ttn", version, about = "Tensor-train regression toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decompose a dense weight matrix into TT cores and report the
    /// compression.
    Decompose(DecomposeArgs),
    /// Render a scene file into clean/noisy WAV pairs plus a manifest.
    Simulate(SimulateArgs),
    /// Train a denoising regressor over a simulated manifest.
    Train(TrainArgs),
    /// Enhance a noisy multi-channel WAV with a trained model.
    Enhance(EnhanceArgs),
    /// Score an enhanced WAV against the clean reference.
    Evaluate(EvaluateArgs),
    /// Run the full dense-vs-TT trade-off experiment from one config.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct DecomposeArgs {
    /// Weight tensor file (TTNW record) to decompose.
    #[arg(long, conflicts_with = "random")]
    weights: Option<PathBuf>,
    /// Generate a seeded random ROWSxCOLS matrix instead of reading one.
    #[arg(long, value_name = "ROWSxCOLS")]
    random: Option<String>,
    /// Paired mode factorization, e.g. "32,64x32,64".
    #[arg(long)]
    modes: String,
    /// Rank caps: "max", a single uniform interior rank, or a full
    /// comma-separated K+1 list with unit ends.
    #[arg(long, default_value = "max")]
    ranks: String,
    /// Relative Frobenius truncation tolerance.
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output TT checkpoint path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene description (TOML).
    #[arg(long)]
    scene: PathBuf,
    /// Output directory for WAVs and manifest.
    #[arg(long)]
    out: PathBuf,
    /// Override the scene's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Manifest written by `simulate`.
    #[arg(long)]
    manifest: PathBuf,
    /// Architecture spec (TOML).
    #[arg(long)]
    arch: PathBuf,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0.0002)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the arch spec's context radius M.
    #[arg(long)]
    context: Option<usize>,
    /// Override the arch spec's channel count B.
    #[arg(long)]
    channels: Option<usize>,
    /// Override every TT hidden layer's interior rank.
    #[arg(long)]
    ranks: Option<usize>,
    /// Output directory (model.ttnc, stats.ttns, loss.log).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnhanceArgs {
    /// Model checkpoint (model.ttnc).
    #[arg(long)]
    model: PathBuf,
    /// Feature statistics (stats.ttns).
    #[arg(long)]
    stats: PathBuf,
    /// Noisy multi-channel WAV.
    #[arg(long)]
    noisy: PathBuf,
    /// Enhanced WAV output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Enhanced (or otherwise processed) WAV.
    #[arg(long)]
    enhanced: PathBuf,
    /// Clean reference WAV.
    #[arg(long)]
    clean: PathBuf,
    /// Optional noisy WAV for a baseline row (reference channel used).
    #[arg(long)]
    noisy: Option<PathBuf>,
    /// Optional model checkpoint for name/parameter columns.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config (TOML); defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the metric table and loss logs.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Decompose(args) => cmd_decompose(args),
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Train(args) => cmd_train(args),
        Cmd::Enhance(args) => cmd_enhance(args),
        Cmd::Evaluate(args) => cmd_evaluate(args),
        Cmd::Experiment(args) => cmd_experiment(args),
    }
}

fn parse_mode_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| anyhow!("{e}: {t}")))
        .collect()
}

fn parse_modes(text: &str) -> Result<(Vec<usize>, Vec<usize>)> {
    let (m, n) = text
        .split_once('x')
        .ok_or_else(|| anyhow!("modes must look like \"32,64x32,64\""))?;
    Ok((parse_mode_list(m)?, parse_mode_list(n)?))
}

fn parse_factorization(modes: &str, ranks: &str) -> Result<ModeFactorization> {
    let (input_modes, output_modes) = parse_modes(modes)?;
    let fact = match ranks.trim() {
        "max" | "full" => ModeFactorization::with_full_ranks(input_modes, output_modes)?,
        text if !text.contains(',') => {
            let rank: usize = text.parse().context("rank")?;
            ModeFactorization::with_uniform_rank(input_modes, output_modes, rank)?
        }
        text => {
            let ranks = parse_mode_list(text)?;
            ModeFactorization::new(input_modes, output_modes, ranks)?
        }
    };
    Ok(fact)
}

fn cmd_decompose(args: DecomposeArgs) -> Result<()> {
    let fact = parse_factorization(&args.modes, &args.ranks)?;
    let w = match (&args.weights, &args.random) {
        (Some(path), None) => checkpoint::load_weights(path)?,
        (None, Some(dims)) => {
            let (rows, cols) = dims
                .split_once('x')
                .ok_or_else(|| anyhow!("--random wants ROWSxCOLS"))?;
            let rows: usize = rows.parse().context("rows")?;
            let cols: usize = cols.parse().context("cols")?;
            random_matrix(rows, cols, args.seed)
        }
        _ => bail!("exactly one of --weights or --random is required"),
    };
    let tt = tt_svd_decompose(&w, &fact, args.tol)?;
    let err = tt.reconstruct().rel_error(&w);
    checkpoint::save_tt(&args.out, &tt)?;

    let dense = dense_param_count(&fact);
    let tt_count = tt.param_count();
    println!("matrix\t{}x{}", w.shape()[0], w.shape()[1]);
    println!("achieved_ranks\t{:?}", tt.ranks());
    println!("tt_params\t{tt_count}");
    println!("dense_params\t{dense}");
    println!("compression\t{:.2}x", dense as f64 / tt_count as f64);
    println!("rel_error\t{err:.3e}");
    println!("checkpoint\t{}", args.out.display());
    // The cap-implied count can differ from achieved ranks under
    // truncation; report both when they disagree.
    let cap_count = tt_param_count(&fact);
    if cap_count != tt_count {
        println!("cap_params\t{cap_count}");
    }
    Ok(())
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseTensor {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseTensor::new(vec![rows, cols], data).expect("shape")
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.scene)
        .with_context(|| format!("reading {}", args.scene.display()))?;
    let mut scene = SceneFile::from_toml(&text)?;
    if let Some(seed) = args.seed {
        scene.seed = seed;
    }
    let manifest = simulate_scene(&scene, &args.out)?;
    println!(
        "wrote {} utterances ({} train, {} test) to {}",
        manifest.utterances.len(),
        manifest.entries("train").count(),
        manifest.entries("test").count(),
        args.out.display()
    );
    println!("presets\t{:?}", manifest.presets);
    Ok(())
}

/// Per-utterance retained-bin features: (noisy channels, clean reference).
fn utterance_features(
    entry_clean: &Waveform,
    entry_noisy: &[Waveform],
    bins: usize,
) -> Result<(Vec<FeatureMatrix>, FeatureMatrix)> {
    let chans = entry_noisy
        .iter()
        .map(|w| Ok(truncate_bins(&lps(&stft(w)?), bins)))
        .collect::<Result<Vec<_>>>()?;
    let clean = truncate_bins(&lps(&stft(entry_clean)?), bins);
    Ok((chans, clean))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let manifest = Manifest::from_toml(
        &std::fs::read_to_string(&args.manifest)
            .with_context(|| format!("reading {}", args.manifest.display()))?,
    )?;
    let mut arch = ArchSpec::from_toml(
        &std::fs::read_to_string(&args.arch)
            .with_context(|| format!("reading {}", args.arch.display()))?,
    )?;
    if let Some(context) = args.context {
        arch.context = context;
    }
    if let Some(channels) = args.channels {
        arch.channels = channels;
    }
    if let Some(rank) = args.ranks {
        arch.set_uniform_tt_rank(rank);
    }
    if arch.channels != manifest.channels {
        bail!(
            "arch expects {} channels but the manifest provides {}",
            arch.channels,
            manifest.channels
        );
    }

    let mode = match arch.mode {
        NetKind::Dense => DatasetMode::Dense,
        NetKind::Tt => DatasetMode::Tt,
    };
    let mut per_utt = Vec::new();
    for entry in manifest.entries("train") {
        let clean = read_wav_mono(&entry.clean)?;
        let noisy = read_wav(&entry.noisy)?;
        if noisy.len() != arch.channels {
            bail!(
                "{}: {} channels in file, arch wants {}",
                entry.noisy.display(),
                noisy.len(),
                arch.channels
            );
        }
        per_utt.push(utterance_features(&clean, &noisy, arch.bins)?);
    }
    if per_utt.is_empty() {
        bail!("manifest has no train utterances");
    }

    let stats = FeatureStats {
        inputs: (0..arch.channels)
            .map(|b| {
                let mats: Vec<&FeatureMatrix> = per_utt.iter().map(|(c, _)| &c[b]).collect();
                NormStats::fit(&mats)
            })
            .collect(),
        target: {
            let mats: Vec<&FeatureMatrix> = per_utt.iter().map(|(_, c)| c).collect();
            NormStats::fit(&mats)
        },
    };

    let fact = arch.hidden.first().and_then(|h| match h.kind {
        NetKind::Tt => {
            let (im, om, r) = (h.input_modes.clone()?, h.output_modes.clone()?, h.ranks.clone()?);
            ModeFactorization::new(im, om, r).ok()
        }
        NetKind::Dense => None,
    });

    let mut input_blocks = Vec::new();
    let mut target_blocks = Vec::new();
    for (chans, clean) in &per_utt {
        let normalized: Vec<FeatureMatrix> = chans
            .iter()
            .zip(&stats.inputs)
            .map(|(f, st)| normalize(f, Some(st)).0)
            .collect();
        let (clean_norm, _) = normalize(clean, Some(&stats.target));
        let ds = build_dataset(
            &normalized,
            &clean_norm,
            arch.context,
            mode,
            fact.clone(),
            Some(&chans[0]),
        )?;
        input_blocks.push(ds.inputs);
        target_blocks.push(ds.targets);
    }
    let inputs = vstack(&input_blocks);
    let targets = vstack(&target_blocks);

    let net = build_network(&arch, args.seed)?;
    let cfg = TrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch,
        epochs: args.epochs,
        seed: args.seed,
        ..TrainConfig::default()
    };
    println!(
        "training {} rows, {} params, {} epochs",
        inputs.shape()[0],
        net.count_params(),
        cfg.epochs
    );
    let (net, trace) = train(net, &inputs, &targets, &cfg)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let pipeline = PipelineSpec {
        mode,
        bins: arch.bins,
        context: arch.context,
        channels: arch.channels,
        fact,
    };
    checkpoint::save_model(&args.out.join("model.ttnc"), &net, Some(&pipeline))?;
    checkpoint::save_stats(&args.out.join("stats.ttns"), &stats)?;
    let log: String = trace
        .iter()
        .enumerate()
        .map(|(e, l)| format!("{e}\t{l:.10}\n"))
        .collect();
    std::fs::write(args.out.join("loss.log"), log)?;
    println!(
        "final_loss\t{:.6}",
        trace.last().copied().unwrap_or(f64::NAN)
    );
    println!("model\t{}", args.out.join("model.ttnc").display());
    Ok(())
}

fn vstack(blocks: &[DenseTensor]) -> DenseTensor {
    let width = blocks[0].shape()[1];
    let rows: usize = blocks.iter().map(|b| b.shape()[0]).sum();
    let mut data = Vec::with_capacity(rows * width);
    for b in blocks {
        data.extend_from_slice(b.data());
    }
    DenseTensor::new(vec![rows, width], data).expect("stacked shape")
}

fn cmd_enhance(args: EnhanceArgs) -> Result<()> {
    let model = checkpoint::load_model(&args.model)?;
    let pipeline = model
        .pipeline
        .ok_or_else(|| anyhow!("model checkpoint carries no pipeline geometry"))?;
    let stats = checkpoint::load_stats(&args.stats)?;
    let noisy = read_wav(&args.noisy)?;
    let out = enhance(&model.network, &noisy, &stats, &pipeline)?;
    write_wav(&args.out, std::slice::from_ref(&out))?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let enhanced = read_wav_mono(&args.enhanced)?;
    let clean = read_wav_mono(&args.clean)?;
    let (name, channels, params) = match &args.model {
        Some(path) => {
            let model = checkpoint::load_model(path)?;
            let channels = model.pipeline.as_ref().map_or(1, |p| p.channels);
            let kind = if model
                .network
                .layers()
                .iter()
                .any(|l| matches!(l, ttn_core::nn::Layer::Tt { .. }))
            {
                "ttn"
            } else {
                "dnn"
            };
            (kind.to_string(), channels, model.network.count_params())
        }
        None => ("enhanced".to_string(), 1, 0),
    };
    println!("model\tchannels\tparams\tsi_sdr_db\tseg_snr_db");
    println!(
        "{name}\t{channels}\t{params}\t{:.6}\t{:.6}",
        si_sdr(&enhanced, &clean)?,
        segmental_snr(&enhanced, &clean)?
    );
    if let Some(noisy_path) = &args.noisy {
        let noisy = read_wav(noisy_path)?;
        println!(
            "noisy\t{}\t0\t{:.6}\t{:.6}",
            noisy.len(),
            si_sdr(&noisy[0], &clean)?,
            segmental_snr(&noisy[0], &clean)?
        );
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_toml(
            &std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        )?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let report = run_experiment(&cfg)?;
    print!("{}", report.table());
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        std::fs::write(out.join("metrics.tsv"), report.table())?;
        for row in &report.rows {
            if row.loss_trace.is_empty() {
                continue;
            }
            let log: String = row
                .loss_trace
                .iter()
                .enumerate()
                .map(|(e, l)| format!("{e}\t{l:.10}\n"))
                .collect();
            std::fs::write(out.join(format!("loss_{}_ch{}.log", row.model, row.channels)), log)?;
        }
        println!("wrote {}", out.join("metrics.tsv").display());
    }
    Ok(())
}
