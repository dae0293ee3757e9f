//! Triplet contrastive learning: distances, dynamic margin scheduling,
//! online multi-similarity pair mining, triplet construction, and the
//! gradient of the hinge loss with respect to the embeddings.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::Embedding;
use crate::error::{Error, Result};

/// Distance used by the loss and the centroid classifier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    #[default]
    Cosine,
    SquaredEuclidean,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine distance `1 - sim(a, b)`, in [0, 2]. Zero-norm vectors are an error.
pub fn cosine_distance(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch(format!(
            "cosine distance over dims {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let (na, nb) = (norm(a.values()), norm(b.values()));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector("cosine distance".to_string()));
    }
    // Rounding can push the raw value an ulp past the mathematical range.
    Ok((1.0 - dot(a.values(), b.values()) / (na * nb)).clamp(0.0, 2.0))
}

/// Distance under the selected kind.
pub fn distance(kind: DistanceKind, a: &Embedding, b: &Embedding) -> Result<f64> {
    match kind {
        DistanceKind::Cosine => cosine_distance(a, b),
        DistanceKind::SquaredEuclidean => {
            if a.dim() != b.dim() {
                return Err(Error::ShapeMismatch(format!(
                    "distance over dims {} and {}",
                    a.dim(),
                    b.dim()
                )));
            }
            Ok(a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x - y) * (x - y))
                .sum())
        }
    }
}

/// How the margin evolves with the training step.
///
/// The schedule formula admits two readings; `StepIncrease` raises the margin
/// by `lambda_delta` every `step_size` steps (monotone), `PaperMod` applies
/// the literal `t mod step_size` form, which saw-tooths. StepIncrease is the
/// default; PaperMod is kept for fidelity experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginMode {
    StepIncrease,
    PaperMod,
}

/// Linear margin schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginSchedule {
    pub lambda_min: f64,
    pub lambda_delta: f64,
    pub step_size: u64,
    pub mode: MarginMode,
}

impl Default for MarginSchedule {
    fn default() -> Self {
        MarginSchedule {
            lambda_min: 0.1,
            lambda_delta: 0.025,
            step_size: 750,
            mode: MarginMode::StepIncrease,
        }
    }
}

impl MarginSchedule {
    /// A constant margin, for ablations with dynamic scheduling off.
    pub fn fixed(lambda: f64) -> Self {
        MarginSchedule {
            lambda_min: lambda,
            lambda_delta: 0.0,
            step_size: 1,
            mode: MarginMode::StepIncrease,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_min <= 0.0 {
            return Err(Error::invalid("lambda_min must be > 0"));
        }
        if self.lambda_delta < 0.0 {
            return Err(Error::invalid("lambda_delta must be >= 0"));
        }
        if self.step_size < 1 {
            return Err(Error::invalid("margin step_size must be >= 1"));
        }
        Ok(())
    }
}

/// Margin at training step `t`.
pub fn margin_at(schedule: &MarginSchedule, t: u64) -> f64 {
    match schedule.mode {
        MarginMode::StepIncrease => {
            schedule.lambda_min + schedule.lambda_delta * (t / schedule.step_size) as f64
        }
        MarginMode::PaperMod => {
            schedule.lambda_min + schedule.lambda_delta * (t % schedule.step_size) as f64
        }
    }
}

/// Multi-similarity mining slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinerConfig {
    pub epsilon: f64,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig { epsilon: 0.1 }
    }
}

impl MinerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon < 0.0 {
            return Err(Error::invalid("mining epsilon must be >= 0"));
        }
        Ok(())
    }
}

/// Pairs selected by the miner, as (anchor, other) batch indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MinedPairs {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
}

impl MinedPairs {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty() && self.negatives.is_empty()
    }
}

/// Online multi-similarity pair mining over one batch.
///
/// For each anchor, negatives closer than the hardest positive plus `epsilon`
/// are kept, and positives farther than the hardest negative minus `epsilon`
/// are kept. Anchors lacking a positive or a negative contribute nothing;
/// a single-class batch yields an empty result.
pub fn mine_pairs<L: PartialEq>(
    embeddings: &[Embedding],
    labels: &[L],
    epsilon: f64,
) -> Result<MinedPairs> {
    if embeddings.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} embeddings vs {} labels",
            embeddings.len(),
            labels.len()
        )));
    }
    let n = embeddings.len();
    // Distance matrix once; rows are then scanned per anchor.
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cosine_distance(&embeddings[i], &embeddings[j])?;
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    let mut mined = MinedPairs::default();
    for a in 0..n {
        let mut hardest_pos = f64::NEG_INFINITY;
        let mut hardest_neg = f64::INFINITY;
        for o in 0..n {
            if o == a {
                continue;
            }
            let d = dist[a * n + o];
            if labels[o] == labels[a] {
                hardest_pos = hardest_pos.max(d);
            } else {
                hardest_neg = hardest_neg.min(d);
            }
        }
        if !hardest_pos.is_finite() || !hardest_neg.is_finite() {
            continue;
        }
        for o in 0..n {
            if o == a {
                continue;
            }
            let d = dist[a * n + o];
            if labels[o] == labels[a] {
                if d > hardest_neg - epsilon {
                    mined.positives.push((a, o));
                }
            } else if d < hardest_pos + epsilon {
                mined.negatives.push((a, o));
            }
        }
    }
    Ok(mined)
}

/// How triplets are formed from a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletMode {
    /// Cross-product of mined positives and negatives sharing each anchor.
    Online,
    /// One uniformly random positive and negative per batch item.
    Offline,
}

/// Index triples (anchor, positive, negative).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripletSet {
    pub triplets: Vec<(usize, usize, usize)>,
}

impl TripletSet {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }
}

/// Builds loss triplets from mined pairs (online) or by uniform sampling
/// (offline, which ignores `mined`).
pub fn build_triplets<L: PartialEq>(
    mined: &MinedPairs,
    mode: TripletMode,
    labels: &[L],
    rng: &mut impl Rng,
) -> TripletSet {
    let mut set = TripletSet::default();
    match mode {
        TripletMode::Online => {
            let n = labels.len();
            let mut pos_of: Vec<Vec<usize>> = vec![Vec::new(); n];
            let mut neg_of: Vec<Vec<usize>> = vec![Vec::new(); n];
            for &(a, p) in &mined.positives {
                pos_of[a].push(p);
            }
            for &(a, o) in &mined.negatives {
                neg_of[a].push(o);
            }
            for a in 0..n {
                for &p in &pos_of[a] {
                    for &o in &neg_of[a] {
                        set.triplets.push((a, p, o));
                    }
                }
            }
        }
        TripletMode::Offline => {
            for a in 0..labels.len() {
                let positives: Vec<usize> = (0..labels.len())
                    .filter(|&i| i != a && labels[i] == labels[a])
                    .collect();
                let negatives: Vec<usize> = (0..labels.len())
                    .filter(|&i| labels[i] != labels[a])
                    .collect();
                if positives.is_empty() || negatives.is_empty() {
                    continue;
                }
                let p = positives[rng.gen_range(0..positives.len())];
                let o = negatives[rng.gen_range(0..negatives.len())];
                set.triplets.push((a, p, o));
            }
        }
    }
    set
}

/// Hinge triplet loss over parallel distance lists. Returns the summed loss
/// and, per triplet, whether the hinge was strictly positive.
pub fn triplet_loss(dist_ap: &[f64], dist_an: &[f64], lambda: f64) -> Result<(f64, Vec<bool>)> {
    if dist_ap.len() != dist_an.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} positive vs {} negative distances",
            dist_ap.len(),
            dist_an.len()
        )));
    }
    if lambda < 0.0 {
        return Err(Error::invalid("margin must be >= 0"));
    }
    let mut loss = 0.0;
    let mut active = Vec::with_capacity(dist_ap.len());
    for (&ap, &an) in dist_ap.iter().zip(dist_an) {
        let hinge = ap - an + lambda;
        if hinge > 0.0 {
            loss += hinge;
            active.push(true);
        } else {
            active.push(false);
        }
    }
    Ok((loss, active))
}

/// d cosine_distance(u, v) / du, evaluated elementwise.
fn cosine_grad_wrt_first(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector("cosine distance gradient".to_string()));
    }
    let sim = dot(u, v) / (nu * nv);
    Ok(u.iter()
        .zip(v)
        .map(|(&ui, &vi)| sim * ui / (nu * nu) - vi / (nu * nv))
        .collect())
}

/// Accumulates dL/dh for every embedding over the active triplets of the
/// hinge loss at margin `lambda`. Inactive triplets contribute zero.
pub fn loss_gradient(
    embeddings: &[Embedding],
    triplets: &TripletSet,
    lambda: f64,
    kind: DistanceKind,
) -> Result<Vec<Vec<f64>>> {
    let dim = embeddings.first().map(Embedding::dim).unwrap_or(0);
    let mut grads = vec![vec![0.0; dim]; embeddings.len()];
    for &(a, p, o) in &triplets.triplets {
        let (ha, hp, hn) = (&embeddings[a], &embeddings[p], &embeddings[o]);
        let d_ap = distance(kind, ha, hp)?;
        let d_an = distance(kind, ha, hn)?;
        if d_ap - d_an + lambda <= 0.0 {
            continue;
        }
        match kind {
            DistanceKind::Cosine => {
                let ga_p = cosine_grad_wrt_first(ha.values(), hp.values())?;
                let ga_n = cosine_grad_wrt_first(ha.values(), hn.values())?;
                let gp = cosine_grad_wrt_first(hp.values(), ha.values())?;
                let gn = cosine_grad_wrt_first(hn.values(), ha.values())?;
                for i in 0..dim {
                    grads[a][i] += ga_p[i] - ga_n[i];
                    grads[p][i] += gp[i];
                    grads[o][i] -= gn[i];
                }
            }
            DistanceKind::SquaredEuclidean => {
                for i in 0..dim {
                    let diff_ap = ha.values()[i] - hp.values()[i];
                    let diff_an = ha.values()[i] - hn.values()[i];
                    grads[a][i] += 2.0 * diff_ap - 2.0 * diff_an;
                    grads[p][i] -= 2.0 * diff_ap;
                    grads[o][i] += 2.0 * diff_an;
                }
            }
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn emb(values: &[f64]) -> Embedding {
        Embedding::new(values.to_vec()).unwrap()
    }

    fn random_embeddings(n: usize, dim: usize, rng: &mut StdRng) -> Vec<Embedding> {
        (0..n)
            .map(|_| {
                emb(&(0..dim)
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect::<Vec<f64>>())
            })
            .collect()
    }

    #[test]
    fn cosine_distance_basics() {
        let a = emb(&[1.0, 0.0]);
        let b = emb(&[0.0, 1.0]);
        let neg = emb(&[-1.0, 0.0]);
        assert!((cosine_distance(&a, &a).unwrap() - 0.0).abs() < 1e-15);
        assert!((cosine_distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine_distance(&a, &neg).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn cosine_distance_zero_vector_errors() {
        let a = emb(&[1.0, 0.0]);
        let z = Embedding::new(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            cosine_distance(&a, &z),
            Err(Error::ZeroVector(_))
        ));
    }

    #[test]
    fn margin_schedule_step_increase() {
        let schedule = MarginSchedule::default();
        assert_eq!(margin_at(&schedule, 0), 0.1);
        assert_eq!(margin_at(&schedule, 749), 0.1);
        assert_eq!(margin_at(&schedule, 750), 0.125);
        assert!((margin_at(&schedule, 1500) - 0.15).abs() < 1e-15);
        // Non-decreasing over a dense scan.
        let mut previous = f64::NEG_INFINITY;
        for t in 0..5_000 {
            let m = margin_at(&schedule, t);
            assert!(m >= previous && m >= schedule.lambda_min);
            previous = m;
        }
    }

    #[test]
    fn margin_schedule_paper_mod() {
        let schedule = MarginSchedule {
            mode: MarginMode::PaperMod,
            ..MarginSchedule::default()
        };
        assert_eq!(margin_at(&schedule, 0), 0.1);
        assert!((margin_at(&schedule, 749) - (0.1 + 0.025 * 749.0)).abs() < 1e-12);
        assert_eq!(margin_at(&schedule, 750), 0.1);
    }

    #[test]
    fn triplet_loss_hand_cases() {
        let (loss, active) = triplet_loss(&[0.2], &[0.9], 0.5).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(active, vec![false]);

        let (loss, active) = triplet_loss(&[0.9], &[0.2], 0.5).unwrap();
        assert!((loss - 1.2).abs() < 1e-15);
        assert_eq!(active, vec![true]);

        let (loss, active) = triplet_loss(&[0.4, 0.4], &[0.4, 0.4], 0.0).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(active, vec![false, false]);
    }

    #[test]
    fn triplet_loss_length_mismatch_errors() {
        assert!(triplet_loss(&[0.1], &[0.1, 0.2], 0.0).is_err());
    }

    /// Naive per-anchor re-evaluation of the mining conditions, recomputing
    /// distances directly from the embeddings.
    fn mine_pairs_bruteforce(
        embeddings: &[Embedding],
        labels: &[usize],
        epsilon: f64,
    ) -> MinedPairs {
        let n = embeddings.len();
        let d = |i: usize, j: usize| cosine_distance(&embeddings[i], &embeddings[j]).unwrap();
        let mut mined = MinedPairs::default();
        for a in 0..n {
            let pos: Vec<usize> = (0..n)
                .filter(|&i| i != a && labels[i] == labels[a])
                .collect();
            let neg: Vec<usize> = (0..n).filter(|&i| labels[i] != labels[a]).collect();
            if pos.is_empty() || neg.is_empty() {
                continue;
            }
            let hardest_pos = pos.iter().map(|&p| d(a, p)).fold(f64::NEG_INFINITY, f64::max);
            let hardest_neg = neg.iter().map(|&o| d(a, o)).fold(f64::INFINITY, f64::min);
            for &p in &pos {
                if d(a, p) > hardest_neg - epsilon {
                    mined.positives.push((a, p));
                }
            }
            for &o in &neg {
                if d(a, o) < hardest_pos + epsilon {
                    mined.negatives.push((a, o));
                }
            }
        }
        mined
    }

    #[test]
    fn miner_matches_bruteforce_oracle() {
        for seed in 0..100u64 {
            let mut rng = StdRng::seed_from_u64(seed);
            let n = rng.gen_range(4..=16);
            let classes = rng.gen_range(2..=5);
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
            let embeddings = random_embeddings(n, 6, &mut rng);
            let epsilon = rng.gen_range(0.0..0.5);
            let mined = mine_pairs(&embeddings, &labels, epsilon).unwrap();
            let oracle = mine_pairs_bruteforce(&embeddings, &labels, epsilon);
            assert_eq!(mined, oracle, "seed {seed}");
        }
    }

    #[test]
    fn miner_separated_classes_mine_nothing_across() {
        // Within-class clusters tight, cross-class distance far beyond
        // every within-class distance plus epsilon.
        let embeddings = vec![
            emb(&[1.0, 0.001]),
            emb(&[1.0, -0.001]),
            emb(&[-1.0, 0.001]),
            emb(&[-1.0, -0.001]),
        ];
        let labels = vec![0, 0, 1, 1];
        let epsilon = 0.05;
        let mined = mine_pairs(&embeddings, &labels, epsilon).unwrap();
        assert!(mined.negatives.is_empty());
        assert_eq!(mined, mine_pairs_bruteforce(&embeddings, &labels, epsilon));
    }

    #[test]
    fn miner_slack_dominates() {
        // epsilon = 4 exceeds the maximum cosine distance 2, so every valid
        // pair is mined.
        let mut rng = StdRng::seed_from_u64(3);
        let embeddings = random_embeddings(6, 4, &mut rng);
        let labels = vec![0, 0, 1, 1, 2, 2];
        let mined = mine_pairs(&embeddings, &labels, 4.0).unwrap();
        assert_eq!(mined.positives.len(), 6);
        assert_eq!(mined.negatives.len(), 6 * 4);
    }

    #[test]
    fn miner_identical_embeddings_different_labels() {
        let embeddings = vec![emb(&[0.5, 0.5]), emb(&[0.5, 0.5])];
        let labels = vec![0, 1];
        let mined = mine_pairs(&embeddings, &labels, 0.0).unwrap();
        // No positives exist for either anchor, so nothing is mined at all;
        // with a third same-label point the zero-distance negative appears.
        assert!(mined.is_empty());

        let embeddings = vec![emb(&[0.5, 0.5]), emb(&[0.5, 0.5]), emb(&[0.4, 0.6])];
        let labels = vec![0, 1, 0];
        let mined = mine_pairs(&embeddings, &labels, 0.0).unwrap();
        assert!(mined.negatives.contains(&(0, 1)));
    }

    #[test]
    fn miner_single_class_batch_is_empty() {
        let mut rng = StdRng::seed_from_u64(4);
        let embeddings = random_embeddings(5, 4, &mut rng);
        let mined = mine_pairs(&embeddings, &[1, 1, 1, 1, 1], 0.2).unwrap();
        assert!(mined.is_empty());
    }

    #[test]
    fn build_triplets_online_cross_product() {
        let mined = MinedPairs {
            positives: vec![(0, 1), (0, 2)],
            negatives: vec![(0, 3), (0, 4), (0, 5)],
        };
        let labels = vec![0, 0, 0, 1, 1, 1];
        let mut rng = StdRng::seed_from_u64(0);
        let set = build_triplets(&mined, TripletMode::Online, &labels, &mut rng);
        assert_eq!(set.len(), 6);
        assert!(set.triplets.contains(&(0, 2, 4)));
    }

    #[test]
    fn build_triplets_online_empty_input() {
        let mut rng = StdRng::seed_from_u64(0);
        let set = build_triplets(
            &MinedPairs::default(),
            TripletMode::Online,
            &[0, 1],
            &mut rng,
        );
        assert!(set.is_empty());
    }

    #[test]
    fn build_triplets_offline_singleton_class_skipped() {
        let labels = vec![0, 1, 1];
        let mut rng = StdRng::seed_from_u64(0);
        let set = build_triplets(&MinedPairs::default(), TripletMode::Offline, &labels, &mut rng);
        // Item 0 has no positive; items 1 and 2 each yield one triplet.
        assert_eq!(set.len(), 2);
        for &(a, p, o) in &set.triplets {
            assert_eq!(labels[a], labels[p]);
            assert_ne!(labels[a], labels[o]);
            assert_ne!(a, p);
        }
    }

    #[test]
    fn loss_gradient_zero_without_active_triplets() {
        let embeddings = vec![emb(&[1.0, 0.0]), emb(&[1.0, 0.01]), emb(&[-1.0, 0.0])];
        let set = TripletSet {
            triplets: vec![(0, 1, 2)],
        };
        // d_ap ~ 0, d_an = 2, margin small: hinge inactive.
        let grads = loss_gradient(&embeddings, &set, 0.1, DistanceKind::Cosine).unwrap();
        assert!(grads.iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn loss_gradient_additive_over_duplicates() {
        let mut rng = StdRng::seed_from_u64(6);
        let embeddings = random_embeddings(4, 5, &mut rng);
        let once = TripletSet {
            triplets: vec![(0, 1, 2)],
        };
        let twice = TripletSet {
            triplets: vec![(0, 1, 2), (0, 1, 2)],
        };
        let g1 = loss_gradient(&embeddings, &once, 1.5, DistanceKind::Cosine).unwrap();
        let g2 = loss_gradient(&embeddings, &twice, 1.5, DistanceKind::Cosine).unwrap();
        for (a, b) in g1.iter().flatten().zip(g2.iter().flatten()) {
            assert!((2.0 * a - b).abs() < 1e-14);
        }
    }

    fn triplet_loss_of(embeddings: &[Embedding], set: &TripletSet, lambda: f64, kind: DistanceKind) -> f64 {
        let mut loss = 0.0;
        for &(a, p, o) in &set.triplets {
            let d_ap = distance(kind, &embeddings[a], &embeddings[p]).unwrap();
            let d_an = distance(kind, &embeddings[a], &embeddings[o]).unwrap();
            loss += (d_ap - d_an + lambda).max(0.0);
        }
        loss
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        for kind in [DistanceKind::Cosine, DistanceKind::SquaredEuclidean] {
            let mut rng = StdRng::seed_from_u64(7);
            let embeddings = random_embeddings(5, 4, &mut rng);
            let set = TripletSet {
                triplets: vec![(0, 1, 2), (3, 4, 0), (2, 0, 4)],
            };
            let lambda = 2.5; // large enough to keep every hinge active
            let analytic = loss_gradient(&embeddings, &set, lambda, kind).unwrap();
            let h = 1e-6;
            for i in 0..embeddings.len() {
                for d in 0..4 {
                    let mut plus = embeddings.clone();
                    let mut minus = embeddings.clone();
                    let mut vp = plus[i].values().to_vec();
                    let mut vm = minus[i].values().to_vec();
                    vp[d] += h;
                    vm[d] -= h;
                    plus[i] = emb(&vp);
                    minus[i] = emb(&vm);
                    let numeric = (triplet_loss_of(&plus, &set, lambda, kind)
                        - triplet_loss_of(&minus, &set, lambda, kind))
                        / (2.0 * h);
                    let err = crate::encoder::relative_error(numeric, analytic[i][d]);
                    assert!(
                        err < 1e-5,
                        "{kind:?} grad mismatch at [{i}][{d}]: fd={numeric}, analytic={}",
                        analytic[i][d]
                    );
                }
            }
        }
    }

    proptest! {
        /// Positive rescaling of any embedding leaves cosine distances,
        /// mined pairs, and hinge activation unchanged.
        #[test]
        fn scale_invariance(
            seed in any::<u64>(),
            scale in 0.1f64..10.0,
            which in 0usize..6,
        ) {
            let mut rng = StdRng::seed_from_u64(seed);
            let embeddings = random_embeddings(6, 4, &mut rng);
            let labels = vec![0, 0, 1, 1, 2, 2];
            let mut scaled = embeddings.clone();
            let v: Vec<f64> = scaled[which].values().iter().map(|x| x * scale).collect();
            scaled[which] = emb(&v);

            let d1 = cosine_distance(&embeddings[0], &embeddings[3]).unwrap();
            let d2 = cosine_distance(&scaled[0], &scaled[3]).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-9);

            let m1 = mine_pairs(&embeddings, &labels, 0.1).unwrap();
            let m2 = mine_pairs(&scaled, &labels, 0.1).unwrap();
            prop_assert_eq!(m1, m2);
        }

        /// Loss is non-negative and zero iff every triplet satisfies the
        /// margin constraint.
        #[test]
        fn loss_nonnegative_and_zero_iff_satisfied(
            seed in any::<u64>(),
            lambda in 0.0f64..1.0,
        ) {
            let mut rng = StdRng::seed_from_u64(seed);
            let embeddings = random_embeddings(6, 4, &mut rng);
            let labels = vec![0, 0, 0, 1, 1, 1];
            let mined = mine_pairs(&embeddings, &labels, 1.0).unwrap();
            let mut rng2 = StdRng::seed_from_u64(seed ^ 1);
            let set = build_triplets(&mined, TripletMode::Online, &labels, &mut rng2);
            let mut dist_ap = Vec::new();
            let mut dist_an = Vec::new();
            for &(a, p, o) in &set.triplets {
                dist_ap.push(cosine_distance(&embeddings[a], &embeddings[p]).unwrap());
                dist_an.push(cosine_distance(&embeddings[a], &embeddings[o]).unwrap());
            }
            let (loss, active) = triplet_loss(&dist_ap, &dist_an, lambda).unwrap();
            prop_assert!(loss >= 0.0);
            let all_satisfied = dist_ap
                .iter()
                .zip(&dist_an)
                .all(|(&ap, &an)| an >= ap + lambda);
            prop_assert_eq!(loss == 0.0, all_satisfied);
            prop_assert_eq!(active.iter().filter(|&&a| a).count() == 0, loss == 0.0);
        }
    }
}
