//! Training orchestration: class-balanced batch sampling, optional
//! corruption, encoding, mining, triplet loss, backpropagation, AdamW with
//! decoupled weight decay, margin and learning-rate schedules, periodic
//! validation snapshots, and binary checkpoints.

use std::io::{Read, Write};
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::compute_centroids;
use crate::contrastive::{
    build_triplets, loss_gradient, margin_at, mine_pairs, triplet_loss, DistanceKind,
    MarginSchedule, MinedPairs, MinerConfig, TripletMode,
};
use crate::corpus::Corpus;
use crate::encoder::{
    self, quantize_f32, EmbeddingStore, EncoderConfig, EncoderParams, ParamGrads, TENSOR_NAMES,
};
use crate::error::{Error, Result};
use crate::eval::{confusion, inter_similarity, intra_similarity, weighted_prf};
use crate::textproc::{span_crop, token_delete, tokenize, CorruptionConfig, TokenSequence};

pub const ADAM_EPSILON: f64 = 1e-8;

/// Which corruption augmentation runs on batch documents before encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    Off,
    TokenDeletion,
    SpanCropping,
}

/// Corruption switch plus its probabilities. Corruption applies
/// independently to every batch document (anchors, positives, and negatives
/// alike); inference-time inputs stay clean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corruption {
    pub kind: CorruptionKind,
    pub config: CorruptionConfig,
}

impl Default for Corruption {
    fn default() -> Self {
        Corruption {
            kind: CorruptionKind::Off,
            config: CorruptionConfig::default(),
        }
    }
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub betas: (f64, f64),
    pub weight_decay: f64,
    pub warmup_steps: u64,
    pub margin: MarginSchedule,
    pub miner: Option<MinerConfig>,
    pub corruption: Corruption,
    pub triplet_mode: TripletMode,
    pub distance: DistanceKind,
    /// Optional global-norm gradient clip; off by default.
    pub grad_clip: Option<f64>,
    /// Validation snapshot cadence in steps.
    pub eval_every: u64,
    pub seed: u64,
}

impl TrainConfig {
    /// Desk-scale defaults: the surrogate encoder trains in seconds with a
    /// larger learning rate and far fewer steps than the full-scale setup.
    pub fn desk() -> Self {
        TrainConfig {
            steps: 3000,
            batch_size: 32,
            lr: 1e-3,
            betas: (0.9, 0.99),
            weight_decay: 0.01,
            warmup_steps: 300,
            margin: MarginSchedule::default(),
            miner: Some(MinerConfig::default()),
            corruption: Corruption::default(),
            triplet_mode: TripletMode::Online,
            distance: DistanceKind::Cosine,
            grad_clip: None,
            eval_every: 100,
            seed: 42,
        }
    }

    /// The full-scale hyperparameters preserved as a named preset.
    pub fn paper() -> Self {
        TrainConfig {
            steps: 30_000,
            lr: 1e-5,
            warmup_steps: 3000,
            ..TrainConfig::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::invalid("steps must be >= 1"));
        }
        if self.batch_size < 4 {
            return Err(Error::invalid("batch_size must be >= 4"));
        }
        if self.lr <= 0.0 {
            return Err(Error::invalid("lr must be > 0"));
        }
        for beta in [self.betas.0, self.betas.1] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::invalid("betas must be in [0, 1)"));
            }
        }
        if self.weight_decay < 0.0 {
            return Err(Error::invalid("weight_decay must be >= 0"));
        }
        if self.warmup_steps >= self.steps {
            return Err(Error::invalid("warmup_steps must be < steps"));
        }
        if self.eval_every < 1 {
            return Err(Error::invalid("eval_every must be >= 1"));
        }
        self.margin.validate()?;
        if let Some(miner) = &self.miner {
            miner.validate()?;
        }
        self.corruption.config.validate()?;
        if self.triplet_mode == TripletMode::Online && self.miner.is_none() {
            return Err(Error::Config(
                "online triplet mode requires a miner config".to_string(),
            ));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::desk()
    }
}

/// Linear warmup from 0 to `lr` over `warmup_steps`, then linear decay back
/// to 0 at `steps`.
pub fn lr_at(config: &TrainConfig, t: u64) -> f64 {
    if t < config.warmup_steps {
        return config.lr * t as f64 / config.warmup_steps as f64;
    }
    let remaining = (config.steps - t.min(config.steps)) as f64;
    config.lr * remaining / (config.steps - config.warmup_steps) as f64
}

/// First/second moment accumulators, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub m: ParamGrads,
    pub v: ParamGrads,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &EncoderParams) -> Self {
        OptimizerState {
            m: ParamGrads::zeros_like(params),
            v: ParamGrads::zeros_like(params),
            step: 0,
        }
    }
}

/// One AdamW update: decoupled weight decay, then the bias-corrected Adam
/// moment update. Parameters are quantized to f32 precision afterward so
/// checkpoints round-trip exactly.
pub fn adamw_step(
    params: &mut EncoderParams,
    grads: &ParamGrads,
    state: &mut OptimizerState,
    lr: f64,
    betas: (f64, f64),
    weight_decay: f64,
) -> Result<()> {
    for (t, name) in TENSOR_NAMES.iter().enumerate() {
        if grads.tensor(t).iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient(name.to_string()));
        }
        if grads.tensor(t).len() != params.tensor(t).len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient tensor {name} has {} entries, params have {}",
                grads.tensor(t).len(),
                params.tensor(t).len()
            )));
        }
    }
    state.step += 1;
    let (beta1, beta2) = betas;
    let bias1 = 1.0 - beta1.powi(state.step as i32);
    let bias2 = 1.0 - beta2.powi(state.step as i32);
    for t in 0..5 {
        let g = grads.tensor(t);
        for (m, &g) in state.m.tensor_mut(t).iter_mut().zip(g) {
            *m = beta1 * *m + (1.0 - beta1) * g;
        }
        for (v, &g) in state.v.tensor_mut(t).iter_mut().zip(g) {
            *v = beta2 * *v + (1.0 - beta2) * g * g;
        }
        let p = params.tensor_mut(t);
        let moments = state.m.tensor(t).iter().zip(state.v.tensor(t));
        for (p, (&m, &v)) in p.iter_mut().zip(moments) {
            let mut theta = *p * (1.0 - lr * weight_decay);
            let m_hat = m / bias1;
            let v_hat = v / bias2;
            theta -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
            *p = quantize_f32(theta);
        }
    }
    Ok(())
}

/// Per-step log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub lambda: f64,
    pub lr: f64,
    pub loss: f64,
    pub mined_pairs: usize,
    pub active_triplets: usize,
}

/// Periodic validation snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSnapshot {
    pub step: u64,
    pub intra: f64,
    pub inter: f64,
    pub val_f1: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LogLine {
    Step(StepRecord),
    Snapshot(EvalSnapshot),
}

/// Full record of a training run: one record per executed step, plus
/// validation snapshots when a validation corpus was supplied.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<EvalSnapshot>,
}

impl TrainLog {
    /// JSONL rendering, steps in order with snapshots interleaved by step.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut snapshots = self.snapshots.iter().peekable();
        for record in &self.records {
            while let Some(s) = snapshots.peek() {
                if s.step <= record.step {
                    out.push_str(&serde_json::to_string(&LogLine::Snapshot((*s).clone())).unwrap());
                    out.push('\n');
                    snapshots.next();
                } else {
                    break;
                }
            }
            out.push_str(&serde_json::to_string(&LogLine::Step(record.clone())).unwrap());
            out.push('\n');
        }
        for s in snapshots {
            out.push_str(&serde_json::to_string(&LogLine::Snapshot(s.clone())).unwrap());
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }
}

/// A document's encoder input: its token sequence, or an externally
/// precomputed vector that bypasses the pooled stage.
#[derive(Debug, Clone)]
enum TrainInput {
    Tokens(TokenSequence),
    Vector(Vec<f64>),
}

struct TrainSet {
    inputs: Vec<TrainInput>,
    labels: Vec<String>,
    /// Pooled features per input, cached when corruption cannot change them.
    features: Vec<Option<encoder::PooledFeatures>>,
}

impl TrainSet {
    fn from_corpus(corpus: &Corpus, enc: &EncoderConfig, cache_features: bool) -> Result<Self> {
        let mut inputs = Vec::with_capacity(corpus.len());
        let mut labels = Vec::with_capacity(corpus.len());
        let mut features = Vec::with_capacity(corpus.len());
        for doc in corpus.docs() {
            let tokens = tokenize(&doc.text);
            features.push(if cache_features {
                Some(encoder::pooled_features(enc, &tokens)?)
            } else {
                None
            });
            inputs.push(TrainInput::Tokens(tokens));
            labels.push(doc.label.clone());
        }
        Ok(TrainSet {
            inputs,
            labels,
            features,
        })
    }

    fn from_store(corpus: &Corpus, store: &EmbeddingStore, enc: &EncoderConfig) -> Result<Self> {
        if store.dim() != enc.embed_dim {
            return Err(Error::ShapeMismatch(format!(
                "embedding store dim {} must equal encoder embed_dim {}",
                store.dim(),
                enc.embed_dim
            )));
        }
        let mut inputs = Vec::with_capacity(corpus.len());
        let mut labels = Vec::with_capacity(corpus.len());
        for doc in corpus.docs() {
            let vector = store
                .get(&doc.id)
                .ok_or_else(|| Error::invalid(format!("no external embedding for id {}", doc.id)))?;
            inputs.push(TrainInput::Vector(vector.values().to_vec()));
            labels.push(doc.label.clone());
        }
        let features = vec![None; inputs.len()];
        Ok(TrainSet {
            inputs,
            labels,
            features,
        })
    }

    fn encode_all(&self, params: &EncoderParams) -> Result<Vec<crate::encoder::Embedding>> {
        self.inputs
            .iter()
            .zip(&self.features)
            .map(|(input, features)| match (input, features) {
                (TrainInput::Tokens(_), Some(f)) => Ok(encoder::encode_from_features(params, f).0),
                (TrainInput::Tokens(tokens), None) => encoder::encode(params, tokens),
                (TrainInput::Vector(v), _) => Ok(encoder::encode_external(params, v)?.0),
            })
            .collect()
    }
}

/// Groups item indices per category, validating that every category has at
/// least two training docs.
fn class_rosters(labels: &[String], categories: &[String]) -> Result<Vec<Vec<usize>>> {
    let mut rosters: Vec<Vec<usize>> = vec![Vec::new(); categories.len()];
    for (i, label) in labels.iter().enumerate() {
        let c = categories
            .iter()
            .position(|cat| cat == label)
            .ok_or_else(|| Error::invalid(format!("label {label} not in categories")))?;
        rosters[c].push(i);
    }
    for (c, roster) in rosters.iter().enumerate() {
        if roster.len() < 2 {
            return Err(Error::invalid(format!(
                "category {} has {} training docs, need at least 2",
                categories[c],
                roster.len()
            )));
        }
    }
    Ok(rosters)
}

/// Class-balanced batch: up to `batch_size / 4` distinct classes (minimum 2),
/// sampled evenly; classes shorter than their share are sampled with
/// replacement.
fn sample_batch(rosters: &[Vec<usize>], batch_size: usize, rng: &mut StdRng) -> Vec<usize> {
    let m = rosters.len();
    let k = ((batch_size / 4).max(2)).min(m);
    let mut class_order: Vec<usize> = (0..m).collect();
    for i in (1..class_order.len()).rev() {
        let j = rng.gen_range(0..=i);
        class_order.swap(i, j);
    }
    let chosen = &class_order[..k];
    let base = batch_size / k;
    let remainder = batch_size % k;

    let mut batch = Vec::with_capacity(batch_size);
    for (slot, &class) in chosen.iter().enumerate() {
        let need = base + usize::from(slot < remainder);
        let roster = &rosters[class];
        if roster.len() >= need {
            // Distinct sample via partial Fisher-Yates.
            let mut scratch: Vec<usize> = roster.clone();
            for i in 0..need {
                let j = rng.gen_range(i..scratch.len());
                scratch.swap(i, j);
            }
            batch.extend_from_slice(&scratch[..need]);
        } else {
            for _ in 0..need {
                batch.push(roster[rng.gen_range(0..roster.len())]);
            }
        }
    }
    batch
}

/// Trains the encoder on a corpus. Deterministic given the config seed.
pub fn train(
    corpus: &Corpus,
    encoder_config: &EncoderConfig,
    config: &TrainConfig,
) -> Result<(EncoderParams, TrainLog)> {
    train_with_validation(corpus, None, encoder_config, config)
}

/// Trains with periodic snapshots (intra, inter, weighted F1) on a
/// validation corpus.
pub fn train_with_validation(
    corpus: &Corpus,
    validation: Option<&Corpus>,
    encoder_config: &EncoderConfig,
    config: &TrainConfig,
) -> Result<(EncoderParams, TrainLog)> {
    let cache = config.corruption.kind == CorruptionKind::Off;
    let train_set = TrainSet::from_corpus(corpus, encoder_config, cache)?;
    let val_set = validation
        .map(|v| TrainSet::from_corpus(v, encoder_config, true))
        .transpose()?;
    train_impl(corpus, train_set, val_set, encoder_config, config)
}

/// Trains from externally precomputed embeddings: the store vectors replace
/// the pooled stage, so the feature table receives no gradient and only the
/// MLP trains. Corruption is token-level and does not apply here.
pub fn train_with_embeddings(
    corpus: &Corpus,
    store: &EmbeddingStore,
    validation: Option<&Corpus>,
    encoder_config: &EncoderConfig,
    config: &TrainConfig,
) -> Result<(EncoderParams, TrainLog)> {
    let train_set = TrainSet::from_store(corpus, store, encoder_config)?;
    let val_set = validation
        .map(|v| TrainSet::from_store(v, store, encoder_config))
        .transpose()?;
    train_impl(corpus, train_set, val_set, encoder_config, config)
}

fn train_impl(
    corpus: &Corpus,
    train_set: TrainSet,
    val_set: Option<TrainSet>,
    encoder_config: &EncoderConfig,
    config: &TrainConfig,
) -> Result<(EncoderParams, TrainLog)> {
    encoder_config.validate()?;
    config.validate()?;
    if corpus.categories().len() < 2 {
        return Err(Error::invalid("training needs at least 2 categories"));
    }
    let rosters = class_rosters(&train_set.labels, corpus.categories())?;

    let mut params = encoder::init_params(encoder_config, config.seed)?;
    let mut state = OptimizerState::new(&params);
    // Separate stream from init so adding draws to one never shifts the other.
    let mut rng = StdRng::seed_from_u64(config.seed ^ 0x5457_4241_4243_4844);
    let mut log = TrainLog::default();
    let epsilon = config.miner.map(|m| m.epsilon).unwrap_or(0.0);

    for t in 0..config.steps {
        if let Some(val) = &val_set {
            if t % config.eval_every == 0 {
                log.snapshots
                    .push(snapshot(t, &params, &train_set, val)?);
            }
        }

        let lambda = margin_at(&config.margin, t);
        let lr = lr_at(config, t);
        let batch = sample_batch(&rosters, config.batch_size, &mut rng);
        let batch_labels: Vec<&String> = batch.iter().map(|&i| &train_set.labels[i]).collect();

        // Encode the batch, corrupting token inputs when configured.
        let mut embeddings = Vec::with_capacity(batch.len());
        let mut caches = Vec::with_capacity(batch.len());
        for &item in &batch {
            let (h, cache) = match &train_set.inputs[item] {
                TrainInput::Tokens(tokens) => {
                    let corruption = &config.corruption;
                    match corruption.kind {
                        CorruptionKind::Off => match &train_set.features[item] {
                            Some(f) => encoder::encode_from_features(&params, f),
                            None => {
                                let f = encoder::pooled_features(encoder_config, tokens)?;
                                encoder::encode_from_features(&params, &f)
                            }
                        },
                        CorruptionKind::TokenDeletion => {
                            let corrupted = token_delete(tokens, corruption.config.p, &mut rng);
                            let f = encoder::pooled_features(encoder_config, &corrupted)?;
                            encoder::encode_from_features(&params, &f)
                        }
                        CorruptionKind::SpanCropping => {
                            let corrupted = span_crop(
                                tokens,
                                corruption.config.p_s,
                                corruption.config.p_span,
                                &mut rng,
                            );
                            let f = encoder::pooled_features(encoder_config, &corrupted)?;
                            encoder::encode_from_features(&params, &f)
                        }
                    }
                }
                TrainInput::Vector(v) => encoder::encode_external(&params, v)?,
            };
            embeddings.push(h);
            caches.push(cache);
        }

        let mined = match config.triplet_mode {
            TripletMode::Online => mine_pairs(&embeddings, &batch_labels, epsilon)?,
            TripletMode::Offline => MinedPairs::default(),
        };
        let triplets = build_triplets(&mined, config.triplet_mode, &batch_labels, &mut rng);

        if triplets.is_empty() {
            // Nothing to learn from: log and skip without touching state.
            log.records.push(StepRecord {
                step: t,
                lambda,
                lr,
                loss: 0.0,
                mined_pairs: mined.len(),
                active_triplets: 0,
            });
            continue;
        }

        let mut dist_ap = Vec::with_capacity(triplets.len());
        let mut dist_an = Vec::with_capacity(triplets.len());
        for &(a, p, n) in &triplets.triplets {
            dist_ap.push(crate::contrastive::distance(
                config.distance,
                &embeddings[a],
                &embeddings[p],
            )?);
            dist_an.push(crate::contrastive::distance(
                config.distance,
                &embeddings[a],
                &embeddings[n],
            )?);
        }
        let (loss, active) = triplet_loss(&dist_ap, &dist_an, lambda)?;

        let emb_grads = loss_gradient(&embeddings, &triplets, lambda, config.distance)?;
        let mut grads = encoder::backward_cached(&params, &caches, &emb_grads)?;
        if let Some(max_norm) = config.grad_clip {
            let norm: f64 = (0..5)
                .map(|i| grads.tensor(i).iter().map(|g| g * g).sum::<f64>())
                .sum::<f64>()
                .sqrt();
            if norm > max_norm {
                grads.scale(max_norm / norm);
            }
        }
        adamw_step(
            &mut params,
            &grads,
            &mut state,
            lr,
            config.betas,
            config.weight_decay,
        )?;

        log.records.push(StepRecord {
            step: t,
            lambda,
            lr,
            loss,
            mined_pairs: mined.len(),
            active_triplets: active.iter().filter(|&&a| a).count(),
        });
    }

    if let Some(val) = &val_set {
        log.snapshots
            .push(snapshot(config.steps, &params, &train_set, val)?);
    }

    Ok((params, log))
}

fn snapshot(
    step: u64,
    params: &EncoderParams,
    train_set: &TrainSet,
    val_set: &TrainSet,
) -> Result<EvalSnapshot> {
    let train_embeddings = train_set.encode_all(params)?;
    let val_embeddings = val_set.encode_all(params)?;
    let index = compute_centroids(&train_embeddings, &train_set.labels)?;
    let mut preds = Vec::with_capacity(val_embeddings.len());
    for e in &val_embeddings {
        preds.push(crate::classify::predict(&index, e)?.0);
    }
    let categories: Vec<String> = index.labels().map(str::to_string).collect();
    let matrix = confusion(&val_set.labels, &preds, &categories)?;
    let prf = weighted_prf(&matrix)?;
    Ok(EvalSnapshot {
        step,
        intra: intra_similarity(&val_embeddings, &val_set.labels)?,
        inter: inter_similarity(&val_embeddings, &val_set.labels)?,
        val_f1: prf.f1,
    })
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"WAI1";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    encoder_config: EncoderConfig,
    train_config: TrainConfig,
    step: u64,
    arrays: Vec<ArrayInfo>,
}

#[derive(Serialize, Deserialize)]
struct ArrayInfo {
    name: String,
    shape: Vec<usize>,
}

/// A loaded checkpoint.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: EncoderParams,
    pub train_config: TrainConfig,
    pub step: u64,
}

/// Serializes a checkpoint: magic `WAI1`, u32 LE version, u32 LE header
/// length, a JSON header, then the arrays as little-endian f32, row-major,
/// in manifest order. Written atomically (temp file + rename).
pub fn save_checkpoint(
    params: &EncoderParams,
    train_config: &TrainConfig,
    step: u64,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let header = CheckpointHeader {
        encoder_config: params.config,
        train_config: train_config.clone(),
        step,
        arrays: params
            .tensor_shapes()
            .iter()
            .zip(TENSOR_NAMES)
            .map(|(&(rows, cols), name)| ArrayInfo {
                name: name.to_string(),
                shape: if cols == 1 {
                    vec![rows]
                } else {
                    vec![rows, cols]
                },
            })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header).expect("header serialization cannot fail");

    let mut bytes =
        Vec::with_capacity(12 + header_bytes.len() + 4 * params.config.param_count());
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_bytes);
    for t in 0..5 {
        for &value in params.tensor(t) {
            bytes.extend_from_slice(&(value as f32).to_le_bytes());
        }
    }

    let tmp = path.with_extension("tmp");
    let mut file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Reads and validates a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;

    if bytes.len() < 12 || &bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint".to_string()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + header_len {
        return Err(Error::Checkpoint("truncated header".to_string()));
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[12..12 + header_len])
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;

    let expected: usize = header
        .arrays
        .iter()
        .map(|a| a.shape.iter().product::<usize>())
        .sum();
    let data = &bytes[12 + header_len..];
    if data.len() != expected * 4 {
        return Err(Error::Checkpoint(format!(
            "truncated or oversized data section: {} bytes, expected {}",
            data.len(),
            expected * 4
        )));
    }

    let mut cursor = 0usize;
    let mut read_array = |count: usize| -> Vec<f64> {
        let out = data[cursor..cursor + count * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        cursor += count * 4;
        out
    };
    let c = header.encoder_config;
    let params = EncoderParams {
        config: c,
        feature_table: read_array(c.vocab_size * c.embed_dim),
        w1: read_array(c.hidden_dim * c.embed_dim),
        b1: read_array(c.hidden_dim),
        w2: read_array(c.out_dim * c.hidden_dim),
        b2: read_array(c.out_dim),
    };
    params.validate()?;
    Ok(Checkpoint {
        params,
        train_config: header.train_config,
        step: header.step,
    })
}

/// Hex SHA-256 of a file, used to tie centroid stores to the checkpoint
/// that produced them.
pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
