//! Pluggable sentence encoder.
//!
//! The reference encoder hashes boundary-padded character n-grams into a
//! trainable feature table, mean-pools token vectors into one input vector,
//! and maps it through a small MLP to an embedding of size `out_dim`. All
//! gradients are analytic and checked against finite differences. Externally
//! precomputed embeddings are supported through [`EmbeddingStore`]; in that
//! mode the store vectors replace the pooled stage and only the MLP trains.

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::contrastive;
use crate::error::{Error, Result};
use crate::textproc::TokenSequence;

/// Rounds through f32 so parameters always carry exactly the precision the
/// checkpoint format stores; save/load round-trips are then bit-exact.
pub(crate) fn quantize_f32(x: f64) -> f64 {
    x as f32 as f64
}

/// 64-bit FNV-1a over a byte stream. Fixed constants; identical input hashes
/// identically across runs and platforms.
pub fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn fnv1a64_chars<'a>(chars: impl Iterator<Item = &'a char>) -> u64 {
    let mut buf = [0u8; 4];
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for c in chars {
        for &b in c.encode_utf8(&mut buf).as_bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}

/// Dimensions of the reference encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Character n-gram size.
    pub ngram_n: usize,
    /// Hashed feature-table rows.
    pub vocab_size: usize,
    /// Per-feature embedding width (MLP input).
    pub embed_dim: usize,
    /// MLP hidden width.
    pub hidden_dim: usize,
    /// Sentence-embedding size.
    pub out_dim: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            ngram_n: 3,
            vocab_size: 32_768,
            embed_dim: 32,
            hidden_dim: 128,
            out_dim: 64,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ngram_n < 1
            || self.vocab_size < 1
            || self.embed_dim < 1
            || self.hidden_dim < 1
        {
            return Err(Error::invalid("encoder dimensions must be >= 1"));
        }
        if self.out_dim < 2 {
            return Err(Error::invalid("out_dim must be >= 2"));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.vocab_size * self.embed_dim
            + self.hidden_dim * self.embed_dim
            + self.hidden_dim
            + self.out_dim * self.hidden_dim
            + self.out_dim
    }
}

/// Trainable weights: feature table plus a two-layer MLP.
///
/// Layouts are row-major: `w1` is `hidden_dim x embed_dim`, `w2` is
/// `out_dim x hidden_dim`, `feature_table` is `vocab_size x embed_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub feature_table: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

pub(crate) const TENSOR_NAMES: [&str; 5] = ["feature_table", "w1", "b1", "w2", "b2"];

impl EncoderParams {
    pub(crate) fn tensor(&self, i: usize) -> &[f64] {
        match i {
            0 => &self.feature_table,
            1 => &self.w1,
            2 => &self.b1,
            3 => &self.w2,
            4 => &self.b2,
            _ => unreachable!("tensor index out of range"),
        }
    }

    pub(crate) fn tensor_mut(&mut self, i: usize) -> &mut [f64] {
        match i {
            0 => &mut self.feature_table,
            1 => &mut self.w1,
            2 => &mut self.b1,
            3 => &mut self.w2,
            4 => &mut self.b2,
            _ => unreachable!("tensor index out of range"),
        }
    }

    pub(crate) fn tensor_shapes(&self) -> [(usize, usize); 5] {
        let c = &self.config;
        [
            (c.vocab_size, c.embed_dim),
            (c.hidden_dim, c.embed_dim),
            (c.hidden_dim, 1),
            (c.out_dim, c.hidden_dim),
            (c.out_dim, 1),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        for (i, (rows, cols)) in self.tensor_shapes().iter().enumerate() {
            let t = self.tensor(i);
            if t.len() != rows * cols {
                return Err(Error::ShapeMismatch(format!(
                    "{} has {} entries, expected {}x{}",
                    TENSOR_NAMES[i],
                    t.len(),
                    rows,
                    cols
                )));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "{} contains non-finite entries",
                    TENSOR_NAMES[i]
                )));
            }
        }
        Ok(())
    }
}

/// Gradients (or any per-parameter accumulators) shaped like [`EncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub feature_table: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl ParamGrads {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        ParamGrads {
            feature_table: vec![0.0; params.feature_table.len()],
            w1: vec![0.0; params.w1.len()],
            b1: vec![0.0; params.b1.len()],
            w2: vec![0.0; params.w2.len()],
            b2: vec![0.0; params.b2.len()],
        }
    }

    pub(crate) fn tensor(&self, i: usize) -> &[f64] {
        match i {
            0 => &self.feature_table,
            1 => &self.w1,
            2 => &self.b1,
            3 => &self.w2,
            4 => &self.b2,
            _ => unreachable!("tensor index out of range"),
        }
    }

    pub(crate) fn tensor_mut(&mut self, i: usize) -> &mut [f64] {
        match i {
            0 => &mut self.feature_table,
            1 => &mut self.w1,
            2 => &mut self.b1,
            3 => &mut self.w2,
            4 => &mut self.b2,
            _ => unreachable!("tensor index out of range"),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for i in 0..5 {
            for v in self.tensor_mut(i) {
                *v *= factor;
            }
        }
    }
}

/// A pooled sentence embedding of fixed size.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("embedding must be non-empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding contains non-finite entries"));
        }
        Ok(Embedding { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Draws parameters from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer
/// with zero biases. Deterministic given `seed`.
pub fn init_params(config: &EncoderConfig, seed: u64) -> Result<EncoderParams> {
    config.validate()?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut draw = |count: usize, fan_in: usize| -> Vec<f64> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        (0..count)
            .map(|_| quantize_f32(rng.gen_range(-bound..bound)))
            .collect()
    };
    let feature_table = draw(config.vocab_size * config.embed_dim, config.embed_dim);
    let w1 = draw(config.hidden_dim * config.embed_dim, config.embed_dim);
    let w2 = draw(config.out_dim * config.hidden_dim, config.hidden_dim);
    Ok(EncoderParams {
        config: *config,
        feature_table,
        w1,
        b1: vec![0.0; config.hidden_dim],
        w2,
        b2: vec![0.0; config.out_dim],
    })
}

/// Fully random parameters (biases included) with entries uniform in
/// (-bound, bound). Gradient checking wants activations of order one so the
/// finite-difference step is a genuinely small perturbation; the training
/// initialization of [`init_params`] starts much closer to zero.
pub fn random_params(config: &EncoderConfig, seed: u64, bound: f64) -> Result<EncoderParams> {
    config.validate()?;
    if bound <= 0.0 {
        return Err(Error::invalid("bound must be > 0"));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut draw = |count: usize| -> Vec<f64> {
        (0..count)
            .map(|_| quantize_f32(rng.gen_range(-bound..bound)))
            .collect()
    };
    Ok(EncoderParams {
        config: *config,
        feature_table: draw(config.vocab_size * config.embed_dim),
        w1: draw(config.hidden_dim * config.embed_dim),
        b1: draw(config.hidden_dim),
        w2: draw(config.out_dim * config.hidden_dim),
        b2: draw(config.out_dim),
    })
}

/// Pooled sparse input for one document: feature-table rows with weights.
/// Weights sum to 1 (mean over tokens of the mean over each token's grams).
#[derive(Debug, Clone, PartialEq)]
pub struct PooledFeatures {
    pub(crate) rows: Vec<(u32, f64)>,
}

/// Hashes the boundary-padded character n-grams of every token and folds
/// them into per-row weights.
///
/// Tokens are padded as `<token>`; tokens shorter than the window contribute
/// their whole padded form as a single gram. Contributions are sorted before
/// summation so the result is bit-identical under token permutation and
/// duplication.
pub fn pooled_features(config: &EncoderConfig, tokens: &TokenSequence) -> Result<PooledFeatures> {
    if tokens.is_empty() {
        return Err(Error::invalid("cannot encode an empty token sequence"));
    }
    let n = config.ngram_n;
    let v = config.vocab_size as u64;
    let inv_len = 1.0 / tokens.len() as f64;
    let mut contributions: Vec<(u32, u64)> = Vec::new();
    for token in tokens.tokens() {
        let padded: Vec<char> = std::iter::once('<')
            .chain(token.chars())
            .chain(std::iter::once('>'))
            .collect();
        let gram_count = padded.len().saturating_sub(n) + 1;
        let weight = (inv_len / gram_count as f64).to_bits();
        if padded.len() <= n {
            let idx = (fnv1a64_chars(padded.iter()) % v) as u32;
            contributions.push((idx, weight));
        } else {
            for window in padded.windows(n) {
                let idx = (fnv1a64_chars(window.iter()) % v) as u32;
                contributions.push((idx, weight));
            }
        }
    }
    contributions.sort_unstable();
    // Group identical (row, weight) contributions and fold each group as
    // count * weight: duplicating every token doubles counts and exactly
    // halves weights, so the products (and their sorted summation order)
    // are bit-identical.
    let mut rows: Vec<(u32, f64)> = Vec::with_capacity(contributions.len());
    let mut i = 0;
    while i < contributions.len() {
        let (idx, bits) = contributions[i];
        let mut count = 1usize;
        while i + count < contributions.len() && contributions[i + count] == (idx, bits) {
            count += 1;
        }
        let group = count as f64 * f64::from_bits(bits);
        match rows.last_mut() {
            Some((last_idx, acc)) if *last_idx == idx => *acc += group,
            _ => rows.push((idx, group)),
        }
        i += count;
    }
    Ok(PooledFeatures { rows })
}

/// Per-item activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Sparse pooled input; empty when the input came from an external store.
    features: Vec<(u32, f64)>,
    x: Vec<f64>,
    z1: Vec<f64>,
    a1: Vec<f64>,
}

fn mlp_forward(params: &EncoderParams, x: Vec<f64>, features: Vec<(u32, f64)>) -> (Embedding, ForwardCache) {
    let c = &params.config;
    let mut z1 = vec![0.0; c.hidden_dim];
    for (j, z) in z1.iter_mut().enumerate() {
        let row = &params.w1[j * c.embed_dim..(j + 1) * c.embed_dim];
        *z = params.b1[j] + row.iter().zip(&x).map(|(w, xi)| w * xi).sum::<f64>();
    }
    let a1: Vec<f64> = z1.iter().map(|&z| if z > 0.0 { z } else { 0.0 }).collect();
    let mut h = vec![0.0; c.out_dim];
    for (k, hk) in h.iter_mut().enumerate() {
        let row = &params.w2[k * c.hidden_dim..(k + 1) * c.hidden_dim];
        *hk = params.b2[k] + row.iter().zip(&a1).map(|(w, a)| w * a).sum::<f64>();
    }
    (
        Embedding { values: h },
        ForwardCache { features, x, z1, a1 },
    )
}

/// Forward pass from precomputed pooled features (the trainer caches these
/// per document when corruption is off).
pub fn encode_from_features(
    params: &EncoderParams,
    features: &PooledFeatures,
) -> (Embedding, ForwardCache) {
    let e = params.config.embed_dim;
    let mut x = vec![0.0; e];
    for &(idx, w) in &features.rows {
        let row = &params.feature_table[idx as usize * e..(idx as usize + 1) * e];
        for (xi, ri) in x.iter_mut().zip(row) {
            *xi += w * ri;
        }
    }
    mlp_forward(params, x, features.rows.clone())
}

fn encode_cached(params: &EncoderParams, tokens: &TokenSequence) -> Result<(Embedding, ForwardCache)> {
    let features = pooled_features(&params.config, tokens)?;
    Ok(encode_from_features(params, &features))
}

/// Encodes one token sequence into a sentence embedding.
pub fn encode(params: &EncoderParams, tokens: &TokenSequence) -> Result<Embedding> {
    encode_cached(params, tokens).map(|(h, _)| h)
}

/// Encodes a batch; elementwise identical to mapping [`encode`].
pub fn encode_batch(params: &EncoderParams, batch: &[TokenSequence]) -> Result<Vec<Embedding>> {
    encode_batch_cached(params, batch).map(|(embeddings, _)| embeddings)
}

/// Batch encode that also returns the activations needed by [`backward_cached`].
pub fn encode_batch_cached(
    params: &EncoderParams,
    batch: &[TokenSequence],
) -> Result<(Vec<Embedding>, Vec<ForwardCache>)> {
    let mut embeddings = Vec::with_capacity(batch.len());
    let mut caches = Vec::with_capacity(batch.len());
    for (i, tokens) in batch.iter().enumerate() {
        let (h, cache) = encode_cached(params, tokens)
            .map_err(|e| Error::invalid(format!("batch item {i}: {e}")))?;
        embeddings.push(h);
        caches.push(cache);
    }
    Ok((embeddings, caches))
}

/// Encodes an externally precomputed vector (the pooled stage is bypassed,
/// so only the MLP participates). The vector length must equal `embed_dim`.
pub fn encode_external(params: &EncoderParams, vector: &[f64]) -> Result<(Embedding, ForwardCache)> {
    if vector.len() != params.config.embed_dim {
        return Err(Error::ShapeMismatch(format!(
            "external vector has dim {}, encoder expects embed_dim {}",
            vector.len(),
            params.config.embed_dim
        )));
    }
    Ok(mlp_forward(params, vector.to_vec(), Vec::new()))
}

/// Accumulates exact gradients of all parameters over a batch, given
/// upstream gradients dL/dh per item. relu'(0) is defined as 0.
pub fn backward_cached(
    params: &EncoderParams,
    caches: &[ForwardCache],
    upstream: &[Vec<f64>],
) -> Result<ParamGrads> {
    if caches.len() != upstream.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} caches vs {} upstream gradients",
            caches.len(),
            upstream.len()
        )));
    }
    let c = &params.config;
    let mut grads = ParamGrads::zeros_like(params);
    for (cache, g) in caches.iter().zip(upstream) {
        if g.len() != c.out_dim {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient has dim {}, expected {}",
                g.len(),
                c.out_dim
            )));
        }
        // Output layer.
        let mut ga1 = vec![0.0; c.hidden_dim];
        for (k, &gk) in g.iter().enumerate() {
            grads.b2[k] += gk;
            let w2_row = &params.w2[k * c.hidden_dim..(k + 1) * c.hidden_dim];
            let gw2_row = &mut grads.w2[k * c.hidden_dim..(k + 1) * c.hidden_dim];
            for j in 0..c.hidden_dim {
                gw2_row[j] += gk * cache.a1[j];
                ga1[j] += w2_row[j] * gk;
            }
        }
        // Hidden layer through the relu subgradient.
        let mut gx = vec![0.0; c.embed_dim];
        for j in 0..c.hidden_dim {
            if cache.z1[j] <= 0.0 {
                continue;
            }
            let gz = ga1[j];
            grads.b1[j] += gz;
            let w1_row = &params.w1[j * c.embed_dim..(j + 1) * c.embed_dim];
            let gw1_row = &mut grads.w1[j * c.embed_dim..(j + 1) * c.embed_dim];
            for i in 0..c.embed_dim {
                gw1_row[i] += gz * cache.x[i];
                gx[i] += w1_row[i] * gz;
            }
        }
        // Distribute the pooled-input gradient over the touched table rows.
        for &(idx, w) in &cache.features {
            let row = &mut grads.feature_table
                [idx as usize * c.embed_dim..(idx as usize + 1) * c.embed_dim];
            for (gi, &gxi) in row.iter_mut().zip(&gx) {
                *gi += w * gxi;
            }
        }
    }
    Ok(grads)
}

/// Recomputes the forward pass for `batch` and backpropagates `upstream`.
pub fn backward(
    params: &EncoderParams,
    batch: &[TokenSequence],
    upstream: &[Vec<f64>],
) -> Result<ParamGrads> {
    let (_, caches) = encode_batch_cached(params, batch)?;
    backward_cached(params, &caches, upstream)
}

/// Outcome of a finite-difference check over the full loss pipeline.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Tensor name and flat index of the worst parameter, e.g. `w2[137]`.
    pub worst_param: String,
    pub params_checked: usize,
    /// Probes whose FD secant straddled a relu or hinge kink; the loss is
    /// not differentiable there, so they carry no information.
    pub skipped_kinks: usize,
}

const GRAD_CHECK_MARGIN: f64 = 0.1;
const GRAD_CHECK_SAMPLES_PER_TENSOR: usize = 40;

/// Labels batch items round-robin over two classes and enumerates every
/// valid (anchor, positive, negative) triple.
fn pipeline_triplets(batch_len: usize) -> Vec<(usize, usize, usize)> {
    let mut triplets = Vec::new();
    for a in 0..batch_len {
        for p in 0..batch_len {
            if p == a || p % 2 != a % 2 {
                continue;
            }
            for n in 0..batch_len {
                if n % 2 != a % 2 {
                    triplets.push((a, p, n));
                }
            }
        }
    }
    triplets
}

/// Loss of the full pipeline (encode, cosine distances, hinge sum) together
/// with its kink signature: the relu gate of every hidden unit and the
/// active flag of every hinge. Central differences are only meaningful
/// between two points with the same signature.
pub(crate) fn pipeline_probe(
    params: &EncoderParams,
    batch: &[TokenSequence],
) -> Result<(f64, Vec<bool>)> {
    let (embeddings, caches) = encode_batch_cached(params, batch)?;
    let mut signature: Vec<bool> = caches
        .iter()
        .flat_map(|c| c.z1.iter().map(|&z| z > 0.0))
        .collect();
    let triplets = pipeline_triplets(batch.len());
    let mut dist_ap = Vec::with_capacity(triplets.len());
    let mut dist_an = Vec::with_capacity(triplets.len());
    for &(a, p, n) in &triplets {
        dist_ap.push(contrastive::cosine_distance(&embeddings[a], &embeddings[p])?);
        dist_an.push(contrastive::cosine_distance(&embeddings[a], &embeddings[n])?);
    }
    let (loss, active) = contrastive::triplet_loss(&dist_ap, &dist_an, GRAD_CHECK_MARGIN)?;
    signature.extend(active);
    Ok((loss, signature))
}


/// Analytic parameter gradients of [`pipeline_loss`].
pub(crate) fn pipeline_param_grads(
    params: &EncoderParams,
    batch: &[TokenSequence],
) -> Result<ParamGrads> {
    let (embeddings, caches) = encode_batch_cached(params, batch)?;
    let triplets = contrastive::TripletSet {
        triplets: pipeline_triplets(batch.len()),
    };
    let emb_grads = contrastive::loss_gradient(
        &embeddings,
        &triplets,
        GRAD_CHECK_MARGIN,
        contrastive::DistanceKind::Cosine,
    )?;
    backward_cached(params, &caches, &emb_grads)
}

#[cfg(test)]
pub(crate) fn relative_error(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(1e-10);
    (a - b).abs() / denom
}

/// Compares analytic gradients of the full pipeline against central finite
/// differences on a random subsample of at most 200 parameters, reporting
/// the worst relative error.
pub fn grad_check(
    params: &EncoderParams,
    batch: &[TokenSequence],
    fd_step: f64,
) -> Result<GradCheckReport> {
    if fd_step <= 0.0 || !fd_step.is_finite() {
        return Err(Error::invalid(format!("fd_step must be > 0, got {fd_step}")));
    }
    let analytic = pipeline_param_grads(params, batch)?;
    compare_against_fd(params, batch, fd_step, &analytic)
}

/// FD comparison split out so tests can feed deliberately corrupted
/// analytic gradients through the same path.
pub(crate) fn compare_against_fd(
    params: &EncoderParams,
    batch: &[TokenSequence],
    fd_step: f64,
    analytic: &ParamGrads,
) -> Result<GradCheckReport> {
    // Restrict feature-table probes to rows the batch actually touches;
    // untouched rows have exactly zero gradient on both sides.
    let mut touched_rows: Vec<usize> = {
        let mut set = HashSet::new();
        for tokens in batch {
            for (idx, _) in pooled_features(&params.config, tokens)?.rows {
                set.insert(idx as usize);
            }
        }
        set.into_iter().collect()
    };
    touched_rows.sort_unstable();

    let mut rng = StdRng::seed_from_u64(0x6ad_c43c);
    let e = params.config.embed_dim;
    let mut probes: Vec<(usize, usize)> = Vec::new();
    for tensor in 0..5 {
        if tensor == 0 && touched_rows.is_empty() {
            continue;
        }
        let len = params.tensor(tensor).len();
        for _ in 0..GRAD_CHECK_SAMPLES_PER_TENSOR.min(len) {
            let flat = if tensor == 0 {
                let row = touched_rows[rng.gen_range(0..touched_rows.len())];
                row * e + rng.gen_range(0..e)
            } else {
                rng.gen_range(0..len)
            };
            probes.push((tensor, flat));
        }
    }
    probes.sort_unstable();
    probes.dedup();

    // Components that are near zero by cancellation are measured against a
    // floor tied to the dominant gradient magnitude, keeping FD rounding
    // noise (eps * |loss| / fd_step) out of the relative error.
    let grad_scale = probes
        .iter()
        .map(|&(t, i)| analytic.tensor(t)[i].abs())
        .fold(0.0, f64::max);
    let floor = (grad_scale * 1e-3).max(1e-10);

    let mut work = params.clone();
    let mut worst = (0.0f64, String::from("none"));
    let mut skipped = 0usize;
    let mut checked = 0usize;
    for &(tensor, flat) in &probes {
        let original = work.tensor(tensor)[flat];
        work.tensor_mut(tensor)[flat] = original + fd_step;
        let (loss_plus, sig_plus) = pipeline_probe(&work, batch)?;
        work.tensor_mut(tensor)[flat] = original - fd_step;
        let (loss_minus, sig_minus) = pipeline_probe(&work, batch)?;
        work.tensor_mut(tensor)[flat] = original;
        if sig_plus != sig_minus {
            skipped += 1;
            continue;
        }
        checked += 1;
        let numeric = (loss_plus - loss_minus) / (2.0 * fd_step);
        let exact = analytic.tensor(tensor)[flat];
        let err = (numeric - exact).abs() / numeric.abs().max(exact.abs()).max(floor);
        if err > worst.0 {
            worst = (err, format!("{}[{}]", TENSOR_NAMES[tensor], flat));
        }
    }
    Ok(GradCheckReport {
        max_rel_error: worst.0,
        worst_param: worst.1,
        params_checked: checked,
        skipped_kinks: skipped,
    })
}

/// Id-keyed external embeddings of a shared dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    entries: BTreeMap<String, Embedding>,
}

impl EmbeddingStore {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Embedding> {
        self.entries.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

#[derive(Deserialize)]
struct EmbeddingRecord {
    id: String,
    vec: Vec<f64>,
}

/// Loads embeddings from JSONL (`{"id": ..., "vec": [...]}`), inferring the
/// dimension from the first record and enforcing it on the rest.
pub fn load_external_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut dim = None;
    let mut entries = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EmbeddingRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let expected = *dim.get_or_insert(record.vec.len());
        if record.vec.len() != expected {
            return Err(Error::parse(
                path,
                lineno,
                format!(
                    "embedding {} has dim {}, expected {}",
                    record.id,
                    record.vec.len(),
                    expected
                ),
            ));
        }
        let embedding = Embedding::new(record.vec)
            .map_err(|e| Error::parse(path, lineno, format!("embedding {}: {e}", record.id)))?;
        if entries.insert(record.id.clone(), embedding).is_some() {
            return Err(Error::parse(
                path,
                lineno,
                format!("duplicate embedding id: {}", record.id),
            ));
        }
    }
    match dim {
        Some(dim) => Ok(EmbeddingStore { dim, entries }),
        None => Err(Error::invalid("empty embedding store")),
    }
}
