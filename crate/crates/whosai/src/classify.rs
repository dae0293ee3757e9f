//! Nearest-centroid classification over per-category mean embeddings,
//! with incremental registration of new categories and a JSON store.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contrastive::cosine_distance;
use crate::encoder::Embedding;
use crate::error::{Error, Result};

/// Immutable set of (label, centroid) pairs in lexicographic label order.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidIndex {
    entries: Vec<(String, Embedding)>,
    dim: usize,
    /// Hash of the encoder checkpoint the centroids were computed with;
    /// empty when unknown.
    encoder_hash: String,
}

impl CentroidIndex {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(label, _)| label.as_str())
    }

    pub fn entries(&self) -> &[(String, Embedding)] {
        &self.entries
    }

    pub fn encoder_hash(&self) -> &str {
        &self.encoder_hash
    }

    pub fn with_encoder_hash(mut self, hash: impl Into<String>) -> Self {
        self.encoder_hash = hash.into();
        self
    }
}

fn mean_embedding(embeddings: &[&Embedding], dim: usize) -> Embedding {
    // Summation in bit-lexicographic order makes the mean bit-identical
    // under any permutation of the inputs.
    let mut ordered: Vec<&Embedding> = embeddings.to_vec();
    ordered.sort_by(|a, b| {
        let key = |e: &Embedding| e.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        key(a).cmp(&key(b))
    });
    let mut mean = vec![0.0; dim];
    for e in ordered {
        for (m, v) in mean.iter_mut().zip(e.values()) {
            *m += v;
        }
    }
    let inv = 1.0 / embeddings.len() as f64;
    for m in &mut mean {
        *m *= inv;
    }
    Embedding::new(mean).expect("mean of finite embeddings is finite")
}

/// Builds a centroid per category as the arithmetic mean of its embeddings.
pub fn compute_centroids(embeddings: &[Embedding], labels: &[String]) -> Result<CentroidIndex> {
    if embeddings.is_empty() {
        return Err(Error::invalid("cannot compute centroids of empty input"));
    }
    if embeddings.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} embeddings vs {} labels",
            embeddings.len(),
            labels.len()
        )));
    }
    let dim = embeddings[0].dim();
    if embeddings.iter().any(|e| e.dim() != dim) {
        return Err(Error::ShapeMismatch(
            "embeddings have inconsistent dims".to_string(),
        ));
    }
    let mut by_label: BTreeMap<&str, Vec<&Embedding>> = BTreeMap::new();
    for (e, label) in embeddings.iter().zip(labels) {
        by_label.entry(label.as_str()).or_default().push(e);
    }
    let entries = by_label
        .into_iter()
        .map(|(label, members)| (label.to_string(), mean_embedding(&members, dim)))
        .collect();
    Ok(CentroidIndex {
        entries,
        dim,
        encoder_hash: String::new(),
    })
}

/// Assigns `query` to the category with the least distant centroid under
/// cosine distance; ties break to the lexicographically smallest label.
/// Also returns the full distance vector in index order for diagnostics.
pub fn predict(index: &CentroidIndex, query: &Embedding) -> Result<(String, Vec<f64>)> {
    if index.is_empty() {
        return Err(Error::invalid("empty centroid index"));
    }
    if query.dim() != index.dim {
        return Err(Error::ShapeMismatch(format!(
            "query dim {} vs centroid dim {}",
            query.dim(),
            index.dim
        )));
    }
    let mut distances = Vec::with_capacity(index.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, (_, centroid)) in index.entries.iter().enumerate() {
        let d = cosine_distance(query, centroid)?;
        distances.push(d);
        // Strict < keeps the first (lexicographically smallest) label on ties.
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    let (winner, _) = best.expect("non-empty index");
    Ok((index.entries[winner].0.clone(), distances))
}

/// Returns a new index with a centroid for `label` computed from
/// `embeddings`, inserted at its lexicographic position. Existing centroids
/// are untouched.
pub fn register_category(
    index: &CentroidIndex,
    embeddings: &[Embedding],
    label: &str,
) -> Result<CentroidIndex> {
    if label.is_empty() {
        return Err(Error::invalid("category label must be non-empty"));
    }
    if embeddings.is_empty() {
        return Err(Error::invalid("cannot register a category from no embeddings"));
    }
    if index.labels().any(|l| l == label) {
        return Err(Error::invalid(format!("category {label} already registered")));
    }
    if embeddings.iter().any(|e| e.dim() != index.dim) {
        return Err(Error::ShapeMismatch(format!(
            "new embeddings must have dim {}",
            index.dim
        )));
    }
    let refs: Vec<&Embedding> = embeddings.iter().collect();
    let centroid = mean_embedding(&refs, index.dim);
    let mut entries = index.entries.clone();
    let pos = entries
        .binary_search_by(|(l, _)| l.as_str().cmp(label))
        .unwrap_err();
    entries.insert(pos, (label.to_string(), centroid));
    Ok(CentroidIndex {
        entries,
        dim: index.dim,
        encoder_hash: index.encoder_hash.clone(),
    })
}

#[derive(Serialize, Deserialize)]
struct StoredIndex {
    dim: usize,
    encoder: String,
    centroids: Vec<StoredCentroid>,
}

#[derive(Serialize, Deserialize)]
struct StoredCentroid {
    label: String,
    vec: Vec<f64>,
}

/// Writes the index as JSON (`{"dim", "encoder", "centroids": [...]}`),
/// labels sorted, numbers at full round-trip precision.
pub fn save_index(index: &CentroidIndex, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let stored = StoredIndex {
        dim: index.dim,
        encoder: index.encoder_hash.clone(),
        centroids: index
            .entries
            .iter()
            .map(|(label, e)| StoredCentroid {
                label: label.clone(),
                vec: e.values().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&stored).expect("index serialization cannot fail");
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

/// Loads and validates a centroid store written by [`save_index`].
pub fn load_index(path: impl AsRef<Path>) -> Result<CentroidIndex> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stored: StoredIndex =
        serde_json::from_str(&raw).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    if stored.centroids.is_empty() {
        return Err(Error::invalid("centroid store has no centroids"));
    }
    let mut entries = Vec::with_capacity(stored.centroids.len());
    for c in stored.centroids {
        if c.vec.len() != stored.dim {
            return Err(Error::ShapeMismatch(format!(
                "centroid {} has dim {}, store declares {}",
                c.label,
                c.vec.len(),
                stored.dim
            )));
        }
        entries.push((c.label, Embedding::new(c.vec)?));
    }
    entries.sort_by(|(a, _), (b, _)| a.cmp(b));
    for pair in entries.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::invalid(format!(
                "duplicate centroid label: {}",
                pair[0].0
            )));
        }
    }
    Ok(CentroidIndex {
        entries,
        dim: stored.dim,
        encoder_hash: stored.encoder,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn emb(values: &[f64]) -> Embedding {
        Embedding::new(values.to_vec()).unwrap()
    }

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn centroid_is_class_mean() {
        let embeddings = vec![emb(&[1.0, 0.0]), emb(&[0.0, 1.0]), emb(&[3.0, 3.0])];
        let index = compute_centroids(&embeddings, &labels(&["a", "a", "b"])).unwrap();
        assert_eq!(index.entries()[0].1.values(), &[0.5, 0.5]);
        assert_eq!(index.entries()[1].1.values(), &[3.0, 3.0]);
    }

    #[test]
    fn centroid_order_is_lexicographic_and_permutation_invariant() {
        let e = vec![emb(&[1.0, 0.0]), emb(&[0.0, 1.0]), emb(&[1.0, 1.0])];
        let a = compute_centroids(&e, &labels(&["z", "a", "m"])).unwrap();
        let shuffled = vec![e[2].clone(), e[0].clone(), e[1].clone()];
        let b = compute_centroids(&shuffled, &labels(&["m", "z", "a"])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.labels().collect::<Vec<_>>(), vec!["a", "m", "z"]);

        // Bit-identical even when a multi-member class is reordered.
        let mut rng = StdRng::seed_from_u64(2);
        let members: Vec<Embedding> = (0..7)
            .map(|_| emb(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]))
            .collect();
        let mut lbls = labels(&["x", "x", "x", "x", "x", "y", "y"]);
        let forward = compute_centroids(&members, &lbls).unwrap();
        let mut reversed = members;
        reversed.reverse();
        lbls.reverse();
        let backward = compute_centroids(&reversed, &lbls).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn opposite_vectors_give_zero_centroid_and_predict_errors() {
        let embeddings = vec![emb(&[1.0, 1.0]), emb(&[-1.0, -1.0]), emb(&[1.0, 0.0])];
        let index = compute_centroids(&embeddings, &labels(&["a", "a", "b"])).unwrap();
        assert_eq!(index.entries()[0].1.values(), &[0.0, 0.0]);
        let err = predict(&index, &emb(&[1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::ZeroVector(_)));
    }

    #[test]
    fn predict_own_centroid_and_tie_break() {
        let index = compute_centroids(
            &[emb(&[1.0, 0.0]), emb(&[0.0, 1.0])],
            &labels(&["right", "up"]),
        )
        .unwrap();
        let (label, distances) = predict(&index, &emb(&[1.0, 0.0])).unwrap();
        assert_eq!(label, "right");
        assert!(distances[0].abs() < 1e-12);

        // Exactly equidistant from both centroids: smaller label wins.
        let (label, _) = predict(&index, &emb(&[1.0, 1.0])).unwrap();
        assert_eq!(label, "right");
    }

    #[test]
    fn predict_matches_bruteforce_argmin() {
        let mut rng = StdRng::seed_from_u64(12);
        for trial in 0..10 {
            let classes = rng.gen_range(2..6);
            let dim = 5;
            let embeddings: Vec<Embedding> = (0..classes * 3)
                .map(|_| {
                    emb(&(0..dim)
                        .map(|_| rng.gen_range(-1.0..1.0))
                        .collect::<Vec<f64>>())
                })
                .collect();
            let lbls: Vec<String> = (0..classes * 3).map(|i| format!("c{}", i % classes)).collect();
            let index = compute_centroids(&embeddings, &lbls).unwrap();
            for _ in 0..100 {
                let q = emb(&(0..dim)
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect::<Vec<f64>>());
                let (label, _) = predict(&index, &q).unwrap();
                let oracle = index
                    .entries()
                    .iter()
                    .map(|(l, c)| (l.clone(), cosine_distance(&q, c).unwrap()))
                    .min_by(|(la, da), (lb, db)| {
                        da.partial_cmp(db).unwrap().then_with(|| la.cmp(lb))
                    })
                    .unwrap()
                    .0;
                assert_eq!(label, oracle, "trial {trial}");
            }
        }
    }

    #[test]
    fn predict_scale_invariant() {
        let index = compute_centroids(
            &[emb(&[1.0, 0.2]), emb(&[-0.3, 1.0])],
            &labels(&["a", "b"]),
        )
        .unwrap();
        let q = emb(&[0.9, 0.4]);
        let scaled = emb(&[9.0, 4.0]);
        assert_eq!(predict(&index, &q).unwrap().0, predict(&index, &scaled).unwrap().0);
    }

    #[test]
    fn register_inserts_sorted_and_preserves_old() {
        let index = compute_centroids(
            &[emb(&[1.0, 0.0]), emb(&[0.0, 1.0])],
            &labels(&["alpha", "gamma"]),
        )
        .unwrap();
        let updated = register_category(&index, &[emb(&[-1.0, 0.0]), emb(&[-1.0, 0.2])], "beta")
            .unwrap();
        assert_eq!(updated.labels().collect::<Vec<_>>(), vec!["alpha", "beta", "gamma"]);
        assert_eq!(updated.entries()[0], index.entries()[0]);
        assert_eq!(updated.entries()[2], index.entries()[1]);

        let (label, _) = predict(&updated, &emb(&[-1.0, 0.1])).unwrap();
        assert_eq!(label, "beta");
        // Queries near old centroids keep their old predictions.
        let (label, _) = predict(&updated, &emb(&[1.0, 0.05])).unwrap();
        assert_eq!(label, "alpha");
    }

    #[test]
    fn register_duplicate_or_empty_errors() {
        let index = compute_centroids(
            &[emb(&[1.0, 0.0]), emb(&[0.0, 1.0])],
            &labels(&["a", "b"]),
        )
        .unwrap();
        assert!(register_category(&index, &[emb(&[1.0, 1.0])], "a").is_err());
        assert!(register_category(&index, &[], "c").is_err());
    }

    #[test]
    fn register_then_rebuild_without_restores_original() {
        let embeddings = vec![emb(&[1.0, 0.0]), emb(&[0.0, 1.0]), emb(&[1.0, 1.0])];
        let lbls = labels(&["a", "a", "b"]);
        let index = compute_centroids(&embeddings, &lbls).unwrap();
        let registered = register_category(&index, &[emb(&[-1.0, -2.0])], "c").unwrap();
        let rebuilt_entries: Vec<(String, Embedding)> = registered
            .entries()
            .iter()
            .filter(|(l, _)| l != "c")
            .cloned()
            .collect();
        assert_eq!(rebuilt_entries, index.entries());
    }

    #[test]
    fn save_load_roundtrip() {
        let index = compute_centroids(
            &[emb(&[0.123456789012345, -2.5]), emb(&[1e-13, 7.0])],
            &labels(&["a", "b"]),
        )
        .unwrap()
        .with_encoder_hash("abc123");
        let f = tempfile::NamedTempFile::new().unwrap();
        save_index(&index, f.path()).unwrap();
        let loaded = load_index(f.path()).unwrap();
        assert_eq!(loaded, index);
    }

    #[test]
    fn load_rejects_dim_mismatch_and_duplicates() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(
            f.path(),
            r#"{"dim":2,"encoder":"","centroids":[{"label":"a","vec":[1.0,2.0,3.0]}]}"#,
        )
        .unwrap();
        assert!(load_index(f.path()).is_err());

        std::fs::write(
            f.path(),
            r#"{"dim":1,"encoder":"","centroids":[{"label":"a","vec":[1.0]},{"label":"a","vec":[2.0]}]}"#,
        )
        .unwrap();
        let err = load_index(f.path()).unwrap_err();
        assert!(err.to_string().contains("duplicate centroid label"), "{err}");
    }
}
