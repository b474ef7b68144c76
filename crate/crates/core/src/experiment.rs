//! The desk-scale trade-off experiment: synthetic multi-channel noisy
//! speech, a dense baseline regressor against tensor-train networks at two
//! parameter budgets, trained identically and scored with SI-SDR and
//! segmental SNR on held-out mixtures.

use crate::audio::{
    build_dataset, enhance, harmonic_voice, lps, normalize, simulate_multichannel, stft,
    truncate_bins, white_noise, DatasetMode, FeatureMatrix, FeatureStats, MixtureScene, NormStats,
    PipelineSpec, Waveform,
};
use crate::metrics::{segmental_snr, si_sdr};
use crate::nn::{train, Layer, Network, NnError, TrainConfig};
use crate::tensor::DenseTensor;
use crate::tt::ModeFactorization;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Audio(#[from] crate::audio::AudioError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Tt(#[from] crate::tt::TtError),
    #[error(transparent)]
    Metric(#[from] crate::metrics::MetricError),
}

fn default_seed() -> u64 {
    17
}
fn default_channel_cases() -> Vec<usize> {
    vec![1, 2]
}
fn default_bins() -> usize {
    64
}
fn default_context() -> usize {
    2
}
fn default_snr() -> f64 {
    5.0
}
fn default_train_utts() -> usize {
    40
}
fn default_test_utts() -> usize {
    6
}
fn default_utt_seconds() -> f64 {
    0.75
}
fn default_epochs() -> usize {
    60
}
fn default_batch() -> usize {
    32
}
fn default_lr() -> f64 {
    0.0002
}
fn default_hidden() -> Vec<usize> {
    vec![256, 256, 256]
}
fn default_rank_small() -> usize {
    6
}
fn default_rank_large() -> usize {
    16
}

/// Everything the experiment depends on; the defaults are the acceptance
/// configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Channel counts to evaluate (single- and multi-channel cases).
    pub channel_cases: Vec<usize>,
    /// Retained LPS bins.
    pub bins: usize,
    /// Context radius M.
    pub context: usize,
    /// Input SNR of the simulated mixtures, dB.
    pub snr_db: f64,
    pub train_utterances: usize,
    pub test_utterances: usize,
    pub utterance_s: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Dense baseline hidden widths; TT nets mirror these widths.
    pub hidden: Vec<usize>,
    /// Interior TT rank of the small (heavily compressed) TTN.
    pub tt_rank_small: usize,
    /// Interior TT rank of the larger TTN.
    pub tt_rank_large: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            channel_cases: default_channel_cases(),
            bins: default_bins(),
            context: default_context(),
            snr_db: default_snr(),
            train_utterances: default_train_utts(),
            test_utterances: default_test_utts(),
            utterance_s: default_utt_seconds(),
            epochs: default_epochs(),
            batch_size: default_batch(),
            learning_rate: default_lr(),
            hidden: default_hidden(),
            tt_rank_small: default_rank_small(),
            tt_rank_large: default_rank_large(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::BadConfig(e.to_string()))
    }
}

/// One model's outcome in one channel configuration.
#[derive(Debug, Clone)]
pub struct ModelRow {
    pub model: String,
    pub channels: usize,
    pub params: usize,
    pub si_sdr_db: f64,
    pub seg_snr_db: f64,
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<ModelRow>,
}

impl ExperimentReport {
    /// Tab-separated metric table, one row per model and channel case.
    pub fn table(&self) -> String {
        let mut out = String::from("model\tchannels\tparams\tsi_sdr_db\tseg_snr_db\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.6}\t{:.6}\n",
                r.model, r.channels, r.params, r.si_sdr_db, r.seg_snr_db
            ));
        }
        out
    }

    pub fn row(&self, model: &str, channels: usize) -> Option<&ModelRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.channels == channels)
    }
}

/// Divisor pair of `n` closest to square, larger factor last.
fn factor_pair(n: usize) -> (usize, usize) {
    let mut a = (n as f64).sqrt() as usize;
    while a > 1 && n % a != 0 {
        a -= 1;
    }
    (a.max(1), n / a.max(1))
}

struct Utterance {
    clean: Waveform,
    noisy: Vec<Waveform>,
}

struct PreparedCase {
    train_inputs_dense: DenseTensor,
    train_targets_dense: DenseTensor,
    train_inputs_tt: DenseTensor,
    train_targets_tt: DenseTensor,
    stats: FeatureStats,
    test: Vec<Utterance>,
    noisy_si_sdr: f64,
    noisy_seg_snr: f64,
}

/// Samples trimmed from each end before scoring, so window tapering at the
/// edges does not enter the metrics.
const METRIC_TRIM: usize = 512;

fn trimmed(w: &Waveform) -> Waveform {
    Waveform::new(
        w.samples[METRIC_TRIM..w.len() - METRIC_TRIM].to_vec(),
        w.sample_rate,
    )
}

fn vstack(blocks: &[DenseTensor]) -> DenseTensor {
    let width = blocks[0].shape()[1];
    let rows: usize = blocks.iter().map(|b| b.shape()[0]).sum();
    let mut data = Vec::with_capacity(rows * width);
    for b in blocks {
        data.extend_from_slice(b.data());
    }
    DenseTensor::new(vec![rows, width], data).unwrap()
}

fn prepare_case(cfg: &ExperimentConfig, channels: usize) -> Result<PreparedCase, ExperimentError> {
    let total = cfg.train_utterances + cfg.test_utterances;
    let len = (cfg.utterance_s * 16_000.0).round() as usize;
    let mut utts = Vec::with_capacity(total);
    for u in 0..total {
        let base = cfg
            .seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add((channels as u64) << 32)
            .wrapping_add(u as u64);
        let clean = harmonic_voice(cfg.utterance_s, 16_000, base);
        let noise = white_noise(len, 16_000, base.wrapping_add(0x517c_c1b7));
        let scene = MixtureScene {
            clean: clean.clone(),
            noise,
            interferer: None,
            snr_db: cfg.snr_db,
            sinr_db: None,
            channels,
            delays: (0..channels).map(|b| 4 * b).collect(),
            gains: (0..channels).map(|b| 1.0 - 0.05 * b as f64).collect(),
            interferer_delays: None,
            seed: base.wrapping_add(0x2545_f491),
        };
        let noisy = simulate_multichannel(&scene)?;
        utts.push(Utterance { clean, noisy });
    }

    // Raw retained-bin features for every utterance.
    let mut feats: Vec<(Vec<FeatureMatrix>, FeatureMatrix)> = Vec::with_capacity(total);
    for utt in &utts {
        let chans: Vec<FeatureMatrix> = utt
            .noisy
            .iter()
            .map(|w| Ok::<_, ExperimentError>(truncate_bins(&lps(&stft(w)?), cfg.bins)))
            .collect::<Result<_, _>>()?;
        let clean = truncate_bins(&lps(&stft(&utt.clean)?), cfg.bins);
        feats.push((chans, clean));
    }

    // Stats from the training partition only.
    let train_feats = &feats[..cfg.train_utterances];
    let input_stats: Vec<NormStats> = (0..channels)
        .map(|b| {
            let mats: Vec<&FeatureMatrix> = train_feats.iter().map(|(c, _)| &c[b]).collect();
            NormStats::fit(&mats)
        })
        .collect();
    let target_stats = {
        let mats: Vec<&FeatureMatrix> = train_feats.iter().map(|(_, c)| c).collect();
        NormStats::fit(&mats)
    };
    let stats = FeatureStats {
        inputs: input_stats,
        target: target_stats,
    };

    // Per-utterance datasets, stacked (context windows never straddle
    // utterance boundaries).
    let mut dense_in = Vec::new();
    let mut dense_t = Vec::new();
    let mut tt_in = Vec::new();
    let mut tt_t = Vec::new();
    for (chans, clean) in train_feats {
        let normalized: Vec<FeatureMatrix> = chans
            .iter()
            .zip(&stats.inputs)
            .map(|(f, st)| normalize(f, Some(st)).0)
            .collect();
        let (clean_norm, _) = normalize(clean, Some(&stats.target));
        let ds_dense = build_dataset(
            &normalized,
            &clean_norm,
            cfg.context,
            DatasetMode::Dense,
            None,
            None,
        )?;
        let ds_tt = build_dataset(
            &normalized,
            &clean_norm,
            cfg.context,
            DatasetMode::Tt,
            None,
            Some(&chans[0]),
        )?;
        dense_in.push(ds_dense.inputs);
        dense_t.push(ds_dense.targets);
        tt_in.push(ds_tt.inputs);
        tt_t.push(ds_tt.targets);
    }

    // Noisy reference-channel baseline on the test split.
    let test: Vec<Utterance> = utts.split_off(cfg.train_utterances);
    let mut si_sum = 0.0;
    let mut seg_sum = 0.0;
    for utt in &test {
        si_sum += si_sdr(&trimmed(&utt.noisy[0]), &trimmed(&utt.clean))?;
        seg_sum += segmental_snr(&trimmed(&utt.noisy[0]), &trimmed(&utt.clean))?;
    }

    Ok(PreparedCase {
        train_inputs_dense: vstack(&dense_in),
        train_targets_dense: vstack(&dense_t),
        train_inputs_tt: vstack(&tt_in),
        train_targets_tt: vstack(&tt_t),
        stats,
        noisy_si_sdr: si_sum / cfg.test_utterances as f64,
        noisy_seg_snr: seg_sum / cfg.test_utterances as f64,
        test,
    })
}

fn dense_network(cfg: &ExperimentConfig, channels: usize, seed: u64) -> Result<Network, NnError> {
    let mut width = cfg.bins * (2 * cfg.context + 1) * channels;
    let mut layers = Vec::new();
    for (i, &units) in cfg.hidden.iter().enumerate() {
        layers.push(Layer::dense_random(width, units, seed.wrapping_add(i as u64)));
        layers.push(Layer::relu());
        width = units;
    }
    layers.push(Layer::dense_random(
        width,
        cfg.bins,
        seed.wrapping_add(cfg.hidden.len() as u64),
    ));
    Network::new(layers)
}

fn tt_network(
    cfg: &ExperimentConfig,
    channels: usize,
    rank: usize,
    seed: u64,
) -> Result<Network, ExperimentError> {
    let frame = cfg.bins - 1;
    let mut layers = Vec::new();
    // Input layout is [channel [frame [bin]]], so (channels * frames, bins)
    // is the natural pairing for the first TT layer.
    let mut in_modes = vec![channels * (2 * cfg.context + 1), frame];
    for (i, &units) in cfg.hidden.iter().enumerate() {
        let out_modes = {
            let (a, b) = factor_pair(units);
            vec![a, b]
        };
        let fact =
            ModeFactorization::with_uniform_rank(in_modes.clone(), out_modes.clone(), rank)?;
        layers.push(Layer::tt_random(&fact, seed.wrapping_add(i as u64)));
        layers.push(Layer::relu());
        in_modes = out_modes;
    }
    let width: usize = in_modes.iter().product();
    layers.push(Layer::dense_random(
        width,
        frame,
        seed.wrapping_add(cfg.hidden.len() as u64),
    ));
    Ok(Network::new(layers)?)
}

fn evaluate(
    net: &Network,
    spec: &PipelineSpec,
    stats: &FeatureStats,
    test: &[Utterance],
) -> Result<(f64, f64), ExperimentError> {
    let mut si_sum = 0.0;
    let mut seg_sum = 0.0;
    for utt in test {
        let out = enhance(net, &utt.noisy, stats, spec)?;
        si_sum += si_sdr(&trimmed(&out), &trimmed(&utt.clean))?;
        seg_sum += segmental_snr(&trimmed(&out), &trimmed(&utt.clean))?;
    }
    Ok((si_sum / test.len() as f64, seg_sum / test.len() as f64))
}

/// Run the full experiment: for every channel case, train the dense
/// baseline and two TTNs on identical data/seeds and score them on the
/// held-out mixtures. Deterministic for a fixed config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    if cfg.bins < 8 {
        return Err(ExperimentError::BadConfig("bins must be >= 8".into()));
    }
    if cfg.hidden.is_empty() {
        return Err(ExperimentError::BadConfig("hidden layers required".into()));
    }
    let mut rows = Vec::new();
    for &channels in &cfg.channel_cases {
        let case = prepare_case(cfg, channels)?;
        rows.push(ModelRow {
            model: "noisy".into(),
            channels,
            params: 0,
            si_sdr_db: case.noisy_si_sdr,
            seg_snr_db: case.noisy_seg_snr,
            loss_trace: Vec::new(),
        });

        let train_cfg = TrainConfig {
            learning_rate: cfg.learning_rate,
            batch_size: cfg.batch_size,
            epochs: cfg.epochs,
            seed: cfg.seed,
            ..TrainConfig::default()
        };

        let dense_spec = PipelineSpec {
            mode: DatasetMode::Dense,
            bins: cfg.bins,
            context: cfg.context,
            channels,
            fact: None,
        };
        let net = dense_network(cfg, channels, cfg.seed ^ 0x00de_0001)?;
        let (net, trace) = train(
            net,
            &case.train_inputs_dense,
            &case.train_targets_dense,
            &train_cfg,
        )?;
        let (si, seg) = evaluate(&net, &dense_spec, &case.stats, &case.test)?;
        rows.push(ModelRow {
            model: "dnn".into(),
            channels,
            params: net.count_params(),
            si_sdr_db: si,
            seg_snr_db: seg,
            loss_trace: trace,
        });

        for (label, rank) in [("ttn-lo", cfg.tt_rank_small), ("ttn-hi", cfg.tt_rank_large)] {
            let frame = cfg.bins - 1;
            let fact = ModeFactorization::with_uniform_rank(
                vec![channels * (2 * cfg.context + 1), frame],
                {
                    let (a, b) = factor_pair(cfg.hidden[0]);
                    vec![a, b]
                },
                rank,
            )?;
            let tt_spec = PipelineSpec {
                mode: DatasetMode::Tt,
                bins: cfg.bins,
                context: cfg.context,
                channels,
                fact: Some(fact),
            };
            let net = tt_network(cfg, channels, rank, cfg.seed ^ ((rank as u64) << 8))?;
            let (net, trace) = train(
                net,
                &case.train_inputs_tt,
                &case.train_targets_tt,
                &train_cfg,
            )?;
            let (si, seg) = evaluate(&net, &tt_spec, &case.stats, &case.test)?;
            rows.push(ModelRow {
                model: label.into(),
                channels,
                params: net.count_params(),
                si_sdr_db: si,
                seg_snr_db: seg,
                loss_trace: trace,
            });
        }
    }
    Ok(ExperimentReport { rows })
}
