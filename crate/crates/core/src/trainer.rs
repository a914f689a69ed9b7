//! Training orchestration: signature-homogeneous mini-batching, the
//! edge-level pretraining phase, chain training, convergence checks
//! and checkpointing.
//!
//! One iteration is one mini-batch step; one epoch is one pass over
//! the sample corpus. In deterministic mode (threads = 1) the whole
//! run is a pure function of (graph, config, samples).

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::HinGraph;
use crate::io;
use crate::model::{
    accumulate_backward, neg_sampling_loss, sgd_step, Gradients, ModelParams, NegSampler,
    NoiseDistribution,
};
use crate::sampler::{sample_edge_triples, ChainSample};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub eta_embed: f64,
    pub eta_dnn: f64,
    pub neg: usize,
    pub max_chain_length: usize,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub seed: u64,
    pub dim: usize,
    pub hidden: usize,
    pub pretrain_epochs: usize,
    pub noise: NoiseDistribution,
    /// keep length-1 samples in the chain phase (disable for a strict
    /// chains-only second phase)
    pub keep_short_chains: bool,
    /// optional gradient-norm cap, 0 disables
    pub max_grad_norm: f64,
    /// 1 = deterministic mode; > 1 = throughput mode (results vary)
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            eta_embed: 0.05,
            eta_dnn: 0.005,
            neg: 5,
            max_chain_length: 3,
            max_iterations: 200,
            convergence_tol: 1e-4,
            seed: 0,
            dim: 30,
            hidden: 200,
            pretrain_epochs: 50,
            noise: NoiseDistribution::Unigram34,
            keep_short_chains: true,
            max_grad_norm: 0.0,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Error::Parse {
            path: "train config".into(),
            line: 0,
            msg: msg.to_string(),
        };
        if self.batch_size < 1 {
            return Err(bad("batch_size must be >= 1"));
        }
        if self.eta_embed <= 0.0 || self.eta_dnn <= 0.0 {
            return Err(bad("learning rates must be > 0"));
        }
        if self.max_chain_length < 1 {
            return Err(bad("max_chain_length must be >= 1"));
        }
        if self.convergence_tol < 0.0 {
            return Err(bad("convergence_tol must be >= 0"));
        }
        if self.neg < 1 {
            return Err(bad("neg must be >= 1"));
        }
        if self.threads < 1 {
            return Err(bad("threads must be >= 1"));
        }
        Ok(())
    }

    /// Applies one `key = value` assignment; keys match the field
    /// names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |k: &str, v: &str| Error::Parse {
            path: "config".into(),
            line: 0,
            msg: format!("bad value `{v}` for key `{k}`"),
        };
        match key {
            "batch_size" => self.batch_size = value.parse().map_err(|_| bad(key, value))?,
            "eta_embed" => self.eta_embed = value.parse().map_err(|_| bad(key, value))?,
            "eta_dnn" => self.eta_dnn = value.parse().map_err(|_| bad(key, value))?,
            "neg" => self.neg = value.parse().map_err(|_| bad(key, value))?,
            "max_chain_length" => {
                self.max_chain_length = value.parse().map_err(|_| bad(key, value))?
            }
            "max_iterations" => self.max_iterations = value.parse().map_err(|_| bad(key, value))?,
            "convergence_tol" => {
                self.convergence_tol = value.parse().map_err(|_| bad(key, value))?
            }
            "seed" => self.seed = value.parse().map_err(|_| bad(key, value))?,
            "dim" => self.dim = value.parse().map_err(|_| bad(key, value))?,
            "hidden" => self.hidden = value.parse().map_err(|_| bad(key, value))?,
            "pretrain_epochs" => {
                self.pretrain_epochs = value.parse().map_err(|_| bad(key, value))?
            }
            "noise" => {
                self.noise = match value {
                    "unigram" => NoiseDistribution::Unigram34,
                    "uniform" => NoiseDistribution::Uniform,
                    _ => return Err(bad(key, value)),
                }
            }
            "keep_short_chains" => {
                self.keep_short_chains = value.parse().map_err(|_| bad(key, value))?
            }
            "max_grad_norm" => self.max_grad_norm = value.parse().map_err(|_| bad(key, value))?,
            "threads" => self.threads = value.parse().map_err(|_| bad(key, value))?,
            _ => return Err(Error::UnknownConfigKey(key.to_string())),
        }
        Ok(())
    }

    /// Reads a flat `key = value` config file; `#` lines are comments.
    pub fn load<R: BufRead>(reader: R, path: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_string(),
                line: i + 1,
                msg: "expected `key = value`".into(),
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pretrain,
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxEpochs,
    EmptyCorpus,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// (phase, mean loss) per epoch, in execution order
    pub epoch_losses: Vec<(Phase, f64)>,
    pub stop_reason: StopReason,
    pub wall_secs: f64,
    pub samples_per_sec: f64,
}

impl TrainReport {
    fn new() -> Self {
        TrainReport {
            epoch_losses: Vec::new(),
            stop_reason: StopReason::MaxEpochs,
            wall_secs: 0.0,
            samples_per_sec: 0.0,
        }
    }

    pub fn losses_for(&self, phase: Phase) -> Vec<f64> {
        self.epoch_losses
            .iter()
            .filter(|(p, _)| *p == phase)
            .map(|(_, l)| *l)
            .collect()
    }
}

/// splitmix64 over (seed, tag): independent deterministic substreams.
fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_INIT: u64 = 1;
const TAG_CORPUS: u64 = 2;
const TAG_BATCH_PRETRAIN: u64 = 3;
const TAG_BATCH_CHAIN: u64 = 4;
const TAG_NEG_PRETRAIN: u64 = 5;
const TAG_NEG_CHAIN: u64 = 6;

/// Splits samples into signature-homogeneous batches of at most
/// `batch_size`, shuffling group order and within-group order
/// deterministically from `seed`. Every sample index appears exactly
/// once.
pub fn make_batches(samples: &[ChainSample], batch_size: usize, seed: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1);
    let mut group_index: HashMap<&[crate::graph::EdgeTypeId], usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let gi = *group_index.entry(s.relations.as_slice()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[gi].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut rng);
    let mut batches = Vec::new();
    for gi in order {
        groups[gi].shuffle(&mut rng);
        for chunk in groups[gi].chunks(batch_size) {
            batches.push(chunk.to_vec());
        }
    }
    batches
}

/// True iff the relative change between the last two epoch losses is
/// below `tol`.
pub fn convergence_check(losses: &[f64], tol: f64) -> bool {
    if losses.len() < 2 {
        return false;
    }
    let prev = losses[losses.len() - 2];
    let last = losses[losses.len() - 1];
    let diff = (last - prev).abs();
    // tol = 0 still converges on an exactly flat epoch
    diff == 0.0 || diff / prev.abs().max(1e-12) < tol
}

fn clip_gradients(grads: &mut Gradients, max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let mut sq = 0.0;
    for g in grads.embed.values() {
        sq += g.iter().map(|v| v * v).sum::<f64>();
    }
    for g in grads.transforms.values() {
        for arr in [&g.w1, &g.b1, &g.w2, &g.b2, &g.w3, &g.b3] {
            sq += arr.iter().map(|v| v * v).sum::<f64>();
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
}

fn batch_step(
    params: &mut ModelParams,
    samples: &[ChainSample],
    batch: &[usize],
    neg_sampler: &NegSampler,
    neg_rng: &mut ChaCha8Rng,
    cfg: &TrainConfig,
) -> Result<f64> {
    let mut grads = Gradients::new();
    let mut loss_sum = 0.0;
    for &i in batch {
        let s = &samples[i];
        let negatives = neg_sampler.draw_batch(neg_rng);
        let (loss, tape) = neg_sampling_loss(params, s, &negatives)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss for sample {i}")));
        }
        accumulate_backward(params, &tape, s, &negatives, &mut grads)?;
        loss_sum += loss;
    }
    grads.scale(1.0 / batch.len() as f64);
    clip_gradients(&mut grads, cfg.max_grad_norm);
    sgd_step(params, &grads, cfg.eta_embed, cfg.eta_dnn)?;
    Ok(loss_sum)
}

fn write_checkpoint(
    dir: &Path,
    phase: Phase,
    epoch: usize,
    params: &ModelParams,
    loss: f64,
) -> Result<()> {
    let phase_name = match phase {
        Phase::Pretrain => "phase1",
        Phase::Chain => "phase2",
    };
    let epoch_dir = dir.join(phase_name).join(format!("epoch_{epoch}"));
    std::fs::create_dir_all(&epoch_dir)?;
    let mut f = std::fs::File::create(epoch_dir.join("embeddings.bin"))?;
    io::write_embeddings_checkpoint(&params.embeddings, &mut f)?;
    let mut f = std::fs::File::create(epoch_dir.join("transforms.bin"))?;
    io::write_transforms(params, &mut f)?;
    let mut f = std::fs::File::create(epoch_dir.join("meta"))?;
    writeln!(f, "phase = {phase_name}")?;
    writeln!(f, "epoch = {epoch}")?;
    writeln!(f, "loss = {loss}")?;
    writeln!(f, "version = {}", params.version())?;
    Ok(())
}

/// Runs `epochs` passes of one phase, starting at `start_epoch` (so a
/// loaded checkpoint can continue on the exact same trajectory).
/// Stops early on convergence. Appends to `report` and returns the
/// stop reason.
#[allow(clippy::too_many_arguments)]
pub fn run_phase(
    params: &mut ModelParams,
    samples: &[ChainSample],
    neg_sampler: &NegSampler,
    cfg: &TrainConfig,
    phase: Phase,
    start_epoch: usize,
    epochs: usize,
    checkpoint_dir: Option<&Path>,
    report: &mut TrainReport,
) -> Result<StopReason> {
    if samples.is_empty() || epochs == 0 {
        return Ok(StopReason::EmptyCorpus);
    }
    let (batch_tag, neg_tag) = match phase {
        Phase::Pretrain => (TAG_BATCH_PRETRAIN, TAG_NEG_PRETRAIN),
        Phase::Chain => (TAG_BATCH_CHAIN, TAG_NEG_CHAIN),
    };
    let mut phase_losses = report.losses_for(phase);
    for epoch in start_epoch..start_epoch + epochs {
        let batches = make_batches(
            samples,
            cfg.batch_size,
            derive_seed(cfg.seed, batch_tag.wrapping_add((epoch as u64) << 8)),
        );
        let mut neg_rng = ChaCha8Rng::seed_from_u64(derive_seed(
            cfg.seed,
            neg_tag.wrapping_add((epoch as u64) << 8),
        ));
        let mut loss_sum = 0.0;
        if cfg.threads <= 1 {
            for batch in &batches {
                loss_sum += batch_step(params, samples, batch, neg_sampler, &mut neg_rng, cfg)?;
            }
        } else {
            loss_sum = parallel_epoch(params, samples, &batches, neg_sampler, &mut neg_rng, cfg)?;
        }
        let mean_loss = loss_sum / samples.len() as f64;
        report.epoch_losses.push((phase, mean_loss));
        phase_losses.push(mean_loss);
        if let Some(dir) = checkpoint_dir {
            write_checkpoint(dir, phase, epoch, params, mean_loss)?;
        }
        if convergence_check(&phase_losses, cfg.convergence_tol) {
            return Ok(StopReason::Converged);
        }
    }
    Ok(StopReason::MaxEpochs)
}

/// Throughput mode: workers compute batch gradients against a shared
/// read-locked snapshot and a single writer applies them in arrival
/// order. Update order is nondeterministic across runs.
fn parallel_epoch(
    params: &mut ModelParams,
    samples: &[ChainSample],
    batches: &[Vec<usize>],
    neg_sampler: &NegSampler,
    neg_rng: &mut ChaCha8Rng,
    cfg: &TrainConfig,
) -> Result<f64> {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::{mpsc, RwLock};

    // pre-draw negatives so worker scheduling cannot change the streams
    let negatives: Vec<Vec<crate::graph::NodeId>> = batches
        .iter()
        .map(|b| {
            b.iter()
                .flat_map(|_| neg_sampler.draw_batch(neg_rng))
                .collect()
        })
        .collect();

    let shared = RwLock::new(std::mem::replace(
        params,
        ModelParams::zeros(0, 0, cfg.dim.max(1), cfg.hidden.max(1)),
    ));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<Result<(f64, Gradients)>>();

    let result: Result<f64> = std::thread::scope(|scope| {
        for _ in 0..cfg.threads {
            let tx = tx.clone();
            let shared = &shared;
            let next = &next;
            let negatives = &negatives;
            scope.spawn(move || loop {
                let bi = next.fetch_add(1, Ordering::Relaxed);
                if bi >= batches.len() {
                    break;
                }
                let out = (|| {
                    let p = shared.read().unwrap();
                    let batch = &batches[bi];
                    let mut grads = Gradients::new();
                    let mut loss_sum = 0.0;
                    for (k, &i) in batch.iter().enumerate() {
                        let negs = &negatives[bi][k * cfg.neg..(k + 1) * cfg.neg];
                        let (loss, tape) = neg_sampling_loss(&p, &samples[i], negs)?;
                        accumulate_backward(&p, &tape, &samples[i], negs, &mut grads)?;
                        loss_sum += loss;
                    }
                    grads.scale(1.0 / batch.len() as f64);
                    Ok((loss_sum, grads))
                })();
                if tx.send(out).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut total = 0.0;
        for msg in rx {
            match msg {
                // gradients may be stale by the time they apply; that's
                // the throughput-mode contract
                Ok((loss, mut grads)) => {
                    total += loss;
                    clip_gradients(&mut grads, cfg.max_grad_norm);
                    let mut p = shared.write().unwrap();
                    sgd_step(&mut p, &grads, cfg.eta_embed, cfg.eta_dnn)?;
                }
                Err(Error::StaleTape { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Ok(total)
    });
    *params = shared.into_inner().unwrap();
    result
}

/// The corpus the edge-level trainer uses: |E| uniform edge triples.
pub fn edge_corpus(g: &HinGraph, cfg: &TrainConfig) -> Result<Vec<ChainSample>> {
    sample_edge_triples(g, g.edge_count(), derive_seed(cfg.seed, TAG_CORPUS))
}

fn init_params(g: &HinGraph, cfg: &TrainConfig) -> ModelParams {
    ModelParams::init(
        g.node_count(),
        g.edge_type_count(),
        cfg.dim,
        cfg.hidden,
        derive_seed(cfg.seed, TAG_INIT),
    )
}

/// Edge-level training: single-relation triples only.
pub fn train_edge_model(
    g: &HinGraph,
    cfg: &TrainConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<(ModelParams, TrainReport)> {
    cfg.validate()?;
    let corpus = edge_corpus(g, cfg)?;
    train_chain_model_impl(g, cfg, &corpus, 0, checkpoint_dir)
}

/// Chain training: an edge-level pretraining phase over the length-1
/// samples, then mixed-length chain batches. With max chain length 1
/// and no pretraining this coincides with [`train_edge_model`] given
/// the same sample stream.
pub fn train_chain_model(
    g: &HinGraph,
    cfg: &TrainConfig,
    samples: &[ChainSample],
    checkpoint_dir: Option<&Path>,
) -> Result<(ModelParams, TrainReport)> {
    cfg.validate()?;
    train_chain_model_impl(g, cfg, samples, cfg.pretrain_epochs, checkpoint_dir)
}

fn train_chain_model_impl(
    g: &HinGraph,
    cfg: &TrainConfig,
    samples: &[ChainSample],
    pretrain_epochs: usize,
    checkpoint_dir: Option<&Path>,
) -> Result<(ModelParams, TrainReport)> {
    for s in samples {
        if s.len() > cfg.max_chain_length {
            return Err(Error::ChainTooLong(s.len(), cfg.max_chain_length));
        }
    }
    let started = Instant::now();
    let mut params = init_params(g, cfg);
    let mut report = TrainReport::new();
    let neg_sampler = NegSampler::from_samples(samples, g.node_count(), cfg.neg, cfg.noise);

    let mut processed = 0usize;
    if pretrain_epochs > 0 {
        let short: Vec<ChainSample> = samples.iter().filter(|s| s.len() == 1).cloned().collect();
        let stop = run_phase(
            &mut params,
            &short,
            &neg_sampler,
            cfg,
            Phase::Pretrain,
            0,
            pretrain_epochs,
            checkpoint_dir,
            &mut report,
        )?;
        processed += short.len() * report.losses_for(Phase::Pretrain).len();
        let _ = stop;
    }

    let chain_corpus: Vec<ChainSample> = if cfg.keep_short_chains || pretrain_epochs == 0 {
        samples.to_vec()
    } else {
        samples.iter().filter(|s| s.len() > 1).cloned().collect()
    };
    let stop = run_phase(
        &mut params,
        &chain_corpus,
        &neg_sampler,
        cfg,
        Phase::Chain,
        0,
        cfg.max_iterations,
        checkpoint_dir,
        &mut report,
    )?;
    processed += chain_corpus.len() * report.losses_for(Phase::Chain).len();

    report.stop_reason = stop;
    report.wall_secs = started.elapsed().as_secs_f64();
    report.samples_per_sec = if report.wall_secs > 0.0 {
        processed as f64 / report.wall_secs
    } else {
        0.0
    };
    Ok((params, report))
}
