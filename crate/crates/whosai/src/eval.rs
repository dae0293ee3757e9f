//! Assessment criteria: confusion-derived weighted P/R/F1, intra/inter
//! embedding similarity, centroid similarity matrix, and a deterministic
//! 2D PCA projection for visualization exports.

use std::collections::BTreeMap;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::classify::CentroidIndex;
use crate::encoder::Embedding;
use crate::error::{Error, Result};

/// Default per-category subsampling cap for the O(N^2) pair sums.
pub const SIMILARITY_SUBSAMPLE_CAP: usize = 500;
/// Fixed seed for the subsampler, so repeated evaluations agree.
const SIMILARITY_SUBSAMPLE_SEED: u64 = 0x5e1f_5a3e;

/// Count matrix over the canonical category order; rows are truth,
/// columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    categories: Vec<String>,
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Row sums, i.e. per-class supports.
    pub fn supports(&self) -> Vec<usize> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }

    /// CSV rendering with a header row and column of labels.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path)
            .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))?;
        let mut header = vec![String::new()];
        header.extend(self.categories.iter().cloned());
        writer
            .write_record(&header)
            .and_then(|_| {
                for (label, row) in self.categories.iter().zip(&self.counts) {
                    let mut record = vec![label.clone()];
                    record.extend(row.iter().map(usize::to_string));
                    writer.write_record(&record)?;
                }
                writer.flush().map_err(csv::Error::from)
            })
            .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))
    }
}

/// Accumulates a confusion matrix. Every truth and prediction label must
/// appear in `categories`.
pub fn confusion(truth: &[String], preds: &[String], categories: &[String]) -> Result<ConfusionMatrix> {
    if truth.is_empty() {
        return Err(Error::invalid("cannot build a confusion matrix from no labels"));
    }
    if truth.len() != preds.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} truth labels vs {} predictions",
            truth.len(),
            preds.len()
        )));
    }
    let index: BTreeMap<&str, usize> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut counts = vec![vec![0usize; categories.len()]; categories.len()];
    for (t, p) in truth.iter().zip(preds) {
        let ti = *index
            .get(t.as_str())
            .ok_or_else(|| Error::invalid(format!("unknown label: {t}")))?;
        let pi = *index
            .get(p.as_str())
            .ok_or_else(|| Error::invalid(format!("unknown label: {p}")))?;
        counts[ti][pi] += 1;
    }
    Ok(ConfusionMatrix {
        categories: categories.to_vec(),
        counts,
    })
}

/// Per-class precision/recall/F1 with support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassPrf {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Support-weighted precision/recall/F1 with the per-class breakdown.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrfReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassPrf>,
}

/// Computes weighted P/R/F1 from a confusion matrix. A class with a zero
/// denominator scores 0 for that metric.
pub fn weighted_prf(matrix: &ConfusionMatrix) -> Result<PrfReport> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::invalid("confusion matrix is all zeros"));
    }
    let m = matrix.categories.len();
    let mut per_class = Vec::with_capacity(m);
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    for k in 0..m {
        let tp = matrix.counts[k][k];
        let support: usize = matrix.counts[k].iter().sum();
        let predicted: usize = (0..m).map(|i| matrix.counts[i][k]).sum();
        let precision = if predicted > 0 {
            tp as f64 / predicted as f64
        } else {
            0.0
        };
        let recall = if support > 0 {
            tp as f64 / support as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let weight = support as f64 / total as f64;
        wp += weight * precision;
        wr += weight * recall;
        wf += weight * f1;
        per_class.push(ClassPrf {
            label: matrix.categories[k].clone(),
            precision,
            recall,
            f1,
            support,
        });
    }
    Ok(PrfReport {
        precision: wp,
        recall: wr,
        f1: wf,
        per_class,
    })
}

fn cosine_similarity(a: &Embedding, b: &Embedding) -> f64 {
    let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
    let na: f64 = a.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

fn grouped<'a>(
    embeddings: &'a [Embedding],
    labels: &'a [String],
    cap: usize,
) -> Result<BTreeMap<&'a str, Vec<&'a Embedding>>> {
    if embeddings.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} embeddings vs {} labels",
            embeddings.len(),
            labels.len()
        )));
    }
    let mut groups: BTreeMap<&str, Vec<&Embedding>> = BTreeMap::new();
    for (e, l) in embeddings.iter().zip(labels) {
        groups.entry(l.as_str()).or_default().push(e);
    }
    // Seeded subsample caps the pairwise sums on large categories.
    let mut rng = StdRng::seed_from_u64(SIMILARITY_SUBSAMPLE_SEED);
    for members in groups.values_mut() {
        if members.len() > cap {
            for i in 0..cap {
                let j = rng.gen_range(i..members.len());
                members.swap(i, j);
            }
            members.truncate(cap);
        }
    }
    Ok(groups)
}

/// Mean within-category pairwise cosine similarity, macro-averaged over
/// categories with at least two members (smaller ones are skipped with a
/// warning). Self-pairs are excluded.
pub fn intra_similarity(embeddings: &[Embedding], labels: &[String]) -> Result<f64> {
    intra_similarity_with_cap(embeddings, labels, SIMILARITY_SUBSAMPLE_CAP)
}

pub fn intra_similarity_with_cap(
    embeddings: &[Embedding],
    labels: &[String],
    cap: usize,
) -> Result<f64> {
    let groups = grouped(embeddings, labels, cap)?;
    let mut per_category = Vec::new();
    for (label, members) in &groups {
        if members.len() < 2 {
            log::warn!("intra similarity: skipping category {label} with a single member");
            continue;
        }
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                sum += cosine_similarity(members[i], members[j]);
                pairs += 1;
            }
        }
        per_category.push(sum / pairs as f64);
    }
    if per_category.is_empty() {
        return Err(Error::invalid(
            "intra similarity needs a category with at least 2 members",
        ));
    }
    Ok(per_category.iter().sum::<f64>() / per_category.len() as f64)
}

/// Mean cross-category pairwise cosine similarity, macro-averaged over
/// unordered category pairs.
pub fn inter_similarity(embeddings: &[Embedding], labels: &[String]) -> Result<f64> {
    inter_similarity_with_cap(embeddings, labels, SIMILARITY_SUBSAMPLE_CAP)
}

pub fn inter_similarity_with_cap(
    embeddings: &[Embedding],
    labels: &[String],
    cap: usize,
) -> Result<f64> {
    let groups = grouped(embeddings, labels, cap)?;
    if groups.len() < 2 {
        return Err(Error::invalid("inter similarity needs at least 2 categories"));
    }
    let names: Vec<&str> = groups.keys().copied().collect();
    let mut per_pair = Vec::new();
    for gi in 0..names.len() {
        for gj in (gi + 1)..names.len() {
            let (a, b) = (&groups[names[gi]], &groups[names[gj]]);
            let mut sum = 0.0;
            for ea in a {
                for eb in b {
                    sum += cosine_similarity(ea, eb);
                }
            }
            per_pair.push(sum / (a.len() * b.len()) as f64);
        }
    }
    Ok(per_pair.iter().sum::<f64>() / per_pair.len() as f64)
}

/// Pairwise cosine similarity between centroids; symmetric with unit
/// diagonal.
pub fn centroid_similarity_matrix(index: &CentroidIndex) -> Vec<Vec<f64>> {
    let m = index.len();
    let mut matrix = vec![vec![0.0; m]; m];
    for i in 0..m {
        matrix[i][i] = 1.0;
        for j in (i + 1)..m {
            let s = cosine_similarity(&index.entries()[i].1, &index.entries()[j].1);
            matrix[i][j] = s;
            matrix[j][i] = s;
        }
    }
    matrix
}

const PCA_TOLERANCE: f64 = 1e-9;
const PCA_MAX_ITERATIONS: usize = 1000;

/// Projects embeddings onto their top `out_dims` principal directions.
///
/// Mean-centered power iteration with deflation; when the data has lower
/// rank than requested, the remaining directions come from a deterministic
/// orthonormal completion (their explained variance is ~0). Components are
/// sign-fixed so each one's largest-magnitude entry is positive.
pub fn pca_project(embeddings: &[Embedding], out_dims: usize) -> Result<Vec<Vec<f64>>> {
    let n = embeddings.len();
    if n < out_dims + 1 {
        return Err(Error::invalid(format!(
            "pca needs at least {} embeddings, got {n}",
            out_dims + 1
        )));
    }
    let dim = embeddings[0].dim();
    if embeddings.iter().any(|e| e.dim() != dim) {
        return Err(Error::ShapeMismatch("embeddings have inconsistent dims".into()));
    }
    if dim < out_dims {
        return Err(Error::invalid(format!(
            "pca rank too low: data dimension {dim} < {out_dims} requested components"
        )));
    }

    let mut mean = vec![0.0; dim];
    for e in embeddings {
        for (m, v) in mean.iter_mut().zip(e.values()) {
            *m += v / n as f64;
        }
    }
    let centered: Vec<Vec<f64>> = embeddings
        .iter()
        .map(|e| e.values().iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();

    // Covariance (dim x dim), row-major.
    let mut cov = vec![0.0; dim * dim];
    for row in &centered {
        for i in 0..dim {
            for j in i..dim {
                cov[i * dim + j] += row[i] * row[j] / (n - 1) as f64;
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            cov[i * dim + j] = cov[j * dim + i];
        }
    }
    let trace: f64 = (0..dim).map(|i| cov[i * dim + i]).sum();

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(out_dims);
    let mut deflated = cov;
    for comp in 0..out_dims {
        let direction = power_iterate(&deflated, dim, comp as u64, &components);
        let eigenvalue = rayleigh(&deflated, &direction, dim);
        let direction = if eigenvalue > PCA_TOLERANCE * trace.max(1.0) {
            // Deflate the found component.
            for i in 0..dim {
                for j in 0..dim {
                    deflated[i * dim + j] -= eigenvalue * direction[i] * direction[j];
                }
            }
            direction
        } else {
            // Degenerate remainder: deterministic orthonormal completion.
            orthonormal_completion(&components, dim)?
        };
        components.push(fix_sign(direction));
    }

    Ok(centered
        .iter()
        .map(|row| {
            components
                .iter()
                .map(|c| row.iter().zip(c).map(|(r, ci)| r * ci).sum())
                .collect()
        })
        .collect())
}

fn rayleigh(matrix: &[f64], v: &[f64], dim: usize) -> f64 {
    let mut mv = vec![0.0; dim];
    for (i, out) in mv.iter_mut().enumerate() {
        *out = (0..dim).map(|j| matrix[i * dim + j] * v[j]).sum();
    }
    v.iter().zip(&mv).map(|(a, b)| a * b).sum()
}

fn power_iterate(matrix: &[f64], dim: usize, component: u64, previous: &[Vec<f64>]) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(0x9ca0_0000 + component);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut v);
    for _ in 0..PCA_MAX_ITERATIONS {
        let mut next = vec![0.0; dim];
        for (i, out) in next.iter_mut().enumerate() {
            *out = (0..dim).map(|j| matrix[i * dim + j] * v[j]).sum();
        }
        // Re-orthogonalize against earlier components every iteration so the
        // returned basis is orthonormal to machine precision even when
        // deflation left residue.
        for p in previous {
            let proj: f64 = next.iter().zip(p).map(|(a, b)| a * b).sum();
            for (x, pi) in next.iter_mut().zip(p) {
                *x -= proj * pi;
            }
        }
        let norm: f64 = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            break; // zero matrix; caller falls back to completion
        }
        for x in &mut next {
            *x /= norm;
        }
        // Convergence up to sign.
        let delta = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .min(
                v.iter()
                    .zip(&next)
                    .map(|(a, b)| (a + b) * (a + b))
                    .sum::<f64>(),
            );
        v = next;
        if delta.sqrt() < PCA_TOLERANCE {
            break;
        }
    }
    v
}

fn normalize(v: &mut [f64]) {
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v {
            *x /= norm;
        }
    }
}

/// First standard basis vector with a non-negligible residual against the
/// collected components, Gram-Schmidt orthogonalized.
fn orthonormal_completion(components: &[Vec<f64>], dim: usize) -> Result<Vec<f64>> {
    for axis in 0..dim {
        let mut candidate = vec![0.0; dim];
        candidate[axis] = 1.0;
        for c in components {
            let proj: f64 = candidate.iter().zip(c).map(|(a, b)| a * b).sum();
            for (x, ci) in candidate.iter_mut().zip(c) {
                *x -= proj * ci;
            }
        }
        let norm: f64 = candidate.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for x in &mut candidate {
                *x /= norm;
            }
            return Ok(candidate);
        }
    }
    Err(Error::invalid("pca could not complete an orthonormal basis"))
}

fn fix_sign(mut v: Vec<f64>) -> Vec<f64> {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    v
}

/// Full evaluation bundle serialized by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassPrf>,
    pub intra: f64,
    pub inter: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub centroid_similarity: Option<CentroidSimilarity>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CentroidSimilarity {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}
