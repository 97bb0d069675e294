//! Task, class and instance selection distributions.
//!
//! Four samplers share this module: uniform selection, multiplicative
//! instance weighting, per-class weighting with sequential draws, and the
//! class-pair samplers (exact and greedy) driven by a [`PotentialMatrix`].
//! Exact enumeration of both class-pair laws lives in [`exact`]; frequency
//! tables with chi-square checks in [`empirical`].
//!
//! All categorical draws use inverse-CDF over max-shifted exponentiated
//! weights from a seeded stream, so a fixed seed reproduces the exact task
//! sequence.

mod empirical;
mod exact;
mod gcp;

pub use empirical::{empirical_distribution, EmpiricalSetDistribution};
pub use exact::{
    exact_cp_distribution, exact_cp_distribution_with_cap, exact_gcp_distribution,
    exact_gcp_distribution_with_cap, proposition_counterexample, total_variation,
    DEFAULT_ENUMERATION_CAP,
};
pub use gcp::sample_task_gcp;

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::io::Write;

use rand::Rng;

use crate::episode::Episode;
use crate::error::{Error, Result};
use crate::learner::PredictionBatch;
use crate::potentials::ClassId;

/// An ordered list of distinct classes. Order records the sampling sequence;
/// equality and hashing ignore it.
#[derive(Debug, Clone)]
pub struct CategorySet {
    classes: Vec<ClassId>,
}

impl CategorySet {
    pub fn new(classes: Vec<ClassId>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidCategorySet("empty category set".into()));
        }
        let mut sorted = classes.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidCategorySet(format!("duplicate class in {sorted:?}")));
        }
        Ok(CategorySet { classes })
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn contains(&self, c: ClassId) -> bool {
        self.classes.contains(&c)
    }

    pub fn position_of(&self, c: ClassId) -> Option<usize> {
        self.classes.iter().position(|&x| x == c)
    }

    /// Classes in ascending order; the canonical set identity.
    pub fn sorted_ids(&self) -> Vec<ClassId> {
        let mut ids = self.classes.clone();
        ids.sort_unstable();
        ids
    }
}

impl PartialEq for CategorySet {
    fn eq(&self, other: &Self) -> bool {
        self.sorted_ids() == other.sorted_ids()
    }
}

impl Eq for CategorySet {}

impl Hash for CategorySet {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.sorted_ids().hash(state);
    }
}

/// Explicit probability table over K-class category sets.
#[derive(Debug, Clone)]
pub struct SetDistribution {
    num_classes: usize,
    k: usize,
    /// Sorted-id sets in lexicographic order, each with its probability.
    entries: Vec<(Vec<ClassId>, f64)>,
}

impl SetDistribution {
    pub fn from_entries(
        num_classes: usize,
        k: usize,
        mut entries: Vec<(Vec<ClassId>, f64)>,
    ) -> Result<Self> {
        let mut total = 0.0;
        for (set, p) in &mut entries {
            set.sort_unstable();
            if set.len() != k || set.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidCategorySet(format!("entry {set:?} is not a {k}-subset")));
            }
            if set.iter().any(|c| c.index() >= num_classes) {
                return Err(Error::InvalidCategorySet(format!(
                    "entry {set:?} exceeds {num_classes} classes"
                )));
            }
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::NonFinite { context: "set probability".into(), value: *p });
            }
            total += *p;
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidCategorySet("duplicate set in distribution".into()));
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!("set probabilities sum to {total}")));
        }
        Ok(SetDistribution { num_classes, k, entries })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn entries(&self) -> &[(Vec<ClassId>, f64)] {
        &self.entries
    }

    /// Probability of a set, zero when absent from the support.
    pub fn probability_of(&self, set: &CategorySet) -> f64 {
        let key = set.sorted_ids();
        self.entries
            .binary_search_by(|e| e.0.cmp(&key))
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn same_universe(&self, other: &SetDistribution) -> bool {
        self.num_classes == other.num_classes && self.k == other.k
    }

    /// CSV export: `class_ids,probability` with ascending semicolon-joined
    /// ids and 12 decimal digits, sorted by descending probability.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "class_ids,probability")?;
        let mut rows: Vec<&(Vec<ClassId>, f64)> = self.entries.iter().collect();
        rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        for (set, p) in rows {
            let ids: Vec<String> = set.iter().map(ClassId::to_string).collect();
            writeln!(out, "{},{p:.12}", ids.join(";"))?;
        }
        Ok(())
    }
}

fn check_rates(alpha: f64, tau: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidConfig(format!("alpha must be positive and finite, got {alpha}")));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidConfig(format!("tau must lie in [0, 1], got {tau}")));
    }
    Ok(())
}

/// Normalized selection weights over a flat training set.
#[derive(Debug, Clone)]
pub struct InstanceWeights {
    weights: Vec<f64>,
}

impl InstanceWeights {
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidWeights("no instances".into()));
        }
        Ok(InstanceWeights { weights: vec![1.0 / n as f64; n] })
    }

    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights("instance weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidWeights("all instance weights are zero".into()));
        }
        Ok(InstanceWeights { weights: weights.into_iter().map(|w| w / total).collect() })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Multiplicative update `w_i <- w_i^tau * exp(alpha * (1 - p_i))`,
    /// renormalized to sum one. `correct_probs[i]` is the model's probability
    /// of instance i's true class.
    pub fn update(&mut self, correct_probs: &[f64], alpha: f64, tau: f64) -> Result<()> {
        check_rates(alpha, tau)?;
        if correct_probs.len() != self.weights.len() {
            return Err(Error::InvalidWeights(format!(
                "{} probabilities for {} instances",
                correct_probs.len(),
                self.weights.len()
            )));
        }
        if correct_probs.iter().any(|p| !p.is_finite() || !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidWeights("correct-class probabilities must lie in [0, 1]".into()));
        }
        // Work in log domain and renormalize with max-subtraction.
        let logs: Vec<f64> = self
            .weights
            .iter()
            .zip(correct_probs)
            .map(|(&w, &p)| tau * w.ln() + alpha * (1.0 - p))
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (w, &l) in self.weights.iter_mut().zip(&logs) {
            *w = (l - max).exp();
            total += *w;
        }
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::InvalidWeights("instance weights collapsed to zero".into()));
        }
        for w in &mut self.weights {
            *w /= total;
        }
        Ok(())
    }
}

/// Per-class selection scores over the meta-training category set.
#[derive(Debug, Clone)]
pub struct ClassWeights {
    weights: Vec<f64>,
}

impl ClassWeights {
    pub fn uniform(num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidWeights("class weighting needs at least 2 classes".into()));
        }
        Ok(ClassWeights { weights: vec![1.0; num_classes] })
    }

    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidWeights("class weighting needs at least 2 classes".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights("class weights must be finite and nonnegative".into()));
        }
        if !weights.iter().any(|w| *w > 0.0) {
            return Err(Error::InvalidWeights("all class weights are zero".into()));
        }
        Ok(ClassWeights { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.weights.iter().filter(|w| **w > 0.0).count()
    }

    /// Mean probability mass the batch assigns to class `c` being wrong:
    /// mass placed on c by queries of other classes, plus mass missing from
    /// c on its own queries, averaged over all N*K queries.
    pub fn episode_class_scores(
        episode: &Episode,
        predictions: &PredictionBatch,
    ) -> Result<Vec<(ClassId, f64)>> {
        predictions.validate_for(episode)?;
        let categories = episode.categories().classes();
        let total_queries = predictions.probs().len() as f64;
        let mut scores = vec![0.0; categories.len()];
        for (q, row) in episode.query().iter().zip(predictions.probs()) {
            let label_pos = episode.categories().position_of(q.label).expect("validated label");
            for (pos, &p) in row.iter().enumerate() {
                scores[pos] += if pos == label_pos { 1.0 - p } else { p };
            }
        }
        Ok(categories
            .iter()
            .zip(scores)
            .map(|(&c, s)| (c, s / total_queries))
            .collect())
    }

    /// Multiplicative update `w_c <- w_c^tau * exp(alpha * score_c)` for every
    /// class in the episode; classes outside it keep their weight.
    pub fn update_from_episode(
        &mut self,
        episode: &Episode,
        predictions: &PredictionBatch,
        alpha: f64,
        tau: f64,
    ) -> Result<()> {
        check_rates(alpha, tau)?;
        for &c in episode.categories().classes() {
            if c.index() >= self.weights.len() {
                return Err(Error::InvalidWeights(format!(
                    "episode class {c} out of range for {} classes",
                    self.weights.len()
                )));
            }
        }
        for (c, score) in Self::episode_class_scores(episode, predictions)? {
            let w = &mut self.weights[c.index()];
            let updated = w.powf(tau) * (alpha * score).exp();
            if !updated.is_finite() {
                return Err(Error::NonFinite { context: format!("class weight {c}"), value: updated });
            }
            *w = updated;
        }
        Ok(())
    }
}

/// Draw `k` distinct classes, each draw proportional to the remaining weights.
pub fn sample_classes_without_replacement<R: Rng>(
    weights: &ClassWeights,
    k: usize,
    rng: &mut R,
) -> Result<CategorySet> {
    if k == 0 {
        return Err(Error::InvalidCategorySet("cannot sample 0 classes".into()));
    }
    if weights.positive_count() < k {
        return Err(Error::InvalidWeights(format!(
            "need {k} positive class weights, have {}",
            weights.positive_count()
        )));
    }
    let mut remaining = weights.weights().to_vec();
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k {
        let idx = categorical_index(&remaining, rng);
        chosen.push(ClassId(idx));
        remaining[idx] = 0.0;
    }
    CategorySet::new(chosen)
}

/// Uniform K-subset by partial Fisher-Yates over the class indices.
pub fn sample_classes_uniform<R: Rng>(num_classes: usize, k: usize, rng: &mut R) -> Result<CategorySet> {
    if k == 0 || k > num_classes {
        return Err(Error::InvalidCategorySet(format!(
            "cannot sample {k} classes out of {num_classes}"
        )));
    }
    let picked = rand::seq::index::sample(rng, num_classes, k);
    CategorySet::new(picked.into_iter().map(ClassId).collect())
}

/// Inverse-CDF draw over nonnegative weights.
pub(crate) fn categorical_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0 && total.is_finite(), "categorical draw over weights summing to {total}");
    let mut target = rng.random::<f64>() * total;
    let mut fallback = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        fallback = i;
        if target < w {
            return i;
        }
        target -= w;
    }
    // Round-off pushed the target past the last positive weight.
    fallback
}

/// Inverse-CDF draw over log weights, normalized by max-subtraction.
/// Entries of negative infinity have zero probability.
pub(crate) fn categorical_from_logs<R: Rng>(logs: &[f64], rng: &mut R) -> usize {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(max.is_finite(), "all log weights are -inf");
    let weights: Vec<f64> = logs
        .iter()
        .map(|&l| if l == f64::NEG_INFINITY { 0.0 } else { (l - max).exp() })
        .collect();
    categorical_index(&weights, rng)
}

/// Frequency map of draws from a category-set sampler.
pub(crate) fn count_draws<R: Rng, F>(
    mut sampler: F,
    draws: u64,
    rng: &mut R,
) -> Result<HashMap<Vec<ClassId>, u64>>
where
    F: FnMut(&mut R) -> Result<CategorySet>,
{
    let mut counts: HashMap<Vec<ClassId>, u64> = HashMap::new();
    for _ in 0..draws {
        let set = sampler(rng)?;
        *counts.entry(set.sorted_ids()).or_insert(0) += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::ClassIndexedDataset;
    use crate::rng::stream_rng;
    use crate::stats::chi_square_gof;
    use approx::assert_relative_eq;

    fn cats(ids: &[usize]) -> CategorySet {
        CategorySet::new(ids.iter().map(|&i| ClassId(i)).collect()).unwrap()
    }

    fn two_class_episode_one_query() -> Episode {
        let pools = vec![
            vec![vec![0.0], vec![0.1]],
            vec![vec![1.0], vec![1.1]],
        ];
        let ds = ClassIndexedDataset::from_pools(pools).unwrap();
        let mut rng = stream_rng(2, 0);
        ds.build_episode(&cats(&[0, 1]), 1, 1, &mut rng).unwrap()
    }

    #[test]
    fn category_set_rejects_duplicates() {
        assert!(CategorySet::new(vec![ClassId(1), ClassId(1)]).is_err());
        assert!(CategorySet::new(vec![]).is_err());
    }

    #[test]
    fn category_set_equality_ignores_order() {
        let a = cats(&[3, 1, 2]);
        let b = cats(&[1, 2, 3]);
        assert_eq!(a, b);
        let mut map = HashMap::new();
        map.insert(a, 1);
        assert!(map.contains_key(&b));
    }

    #[test]
    fn instance_update_identity_factor_when_confident() {
        // p = 1 makes the multiplicative factor e^0 = 1; with tau = 1 the
        // weights are exactly preserved.
        let mut w = InstanceWeights::from_weights(vec![0.2, 0.3, 0.5]).unwrap();
        w.update(&[1.0, 1.0, 1.0], 1.0, 1.0).unwrap();
        for (got, want) in w.weights().iter().zip([0.2, 0.3, 0.5]) {
            assert_relative_eq!(*got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn instance_update_factor_matches_hand_computed_value() {
        // alpha = 1, tau = 1, p = 0.2 gives factor e^0.8 against a p = 1 peer.
        let mut w = InstanceWeights::from_weights(vec![0.5, 0.5]).unwrap();
        w.update(&[0.2, 1.0], 1.0, 1.0).unwrap();
        let ratio = w.weights()[0] / w.weights()[1];
        assert_relative_eq!(ratio, 2.225_540_928_492_468, max_relative = 1e-12);
        assert_relative_eq!(w.weights().iter().sum::<f64>(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn instance_update_uniform_stays_uniform() {
        let mut w = InstanceWeights::uniform(4).unwrap();
        w.update(&[0.3; 4], 2.0, 0.5).unwrap();
        for &x in w.weights() {
            assert_relative_eq!(x, 0.25, max_relative = 1e-12);
        }
    }

    #[test]
    fn instance_update_is_permutation_equivariant() {
        let base = vec![0.1, 0.2, 0.3, 0.4];
        let probs = vec![0.9, 0.1, 0.5, 0.25];
        let mut w1 = InstanceWeights::from_weights(base.clone()).unwrap();
        w1.update(&probs, 1.0, 0.5).unwrap();

        // permutation (0 1 2 3) -> (2 0 3 1)
        let perm = [2usize, 0, 3, 1];
        let mut w2 = InstanceWeights::from_weights(perm.map(|i| base[i]).to_vec()).unwrap();
        w2.update(&perm.map(|i| probs[i]), 1.0, 0.5).unwrap();
        for (i, &pi) in perm.iter().enumerate() {
            assert_relative_eq!(w2.weights()[i], w1.weights()[pi], max_relative = 1e-12);
        }
    }

    #[test]
    fn instance_update_rejects_all_zero() {
        assert!(InstanceWeights::from_weights(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn class_scores_match_hand_computed_example() {
        // K = 2, N = 1. Query of A: p(A) = 0.6; query of B: p(A) = 0.1.
        // score(A) = ((1 - 0.6) + 0.1) / 2 = 0.25
        let ep = two_class_episode_one_query();
        let batch = PredictionBatch::new(
            ep.categories().classes().to_vec(),
            vec![vec![0.6, 0.4], vec![0.1, 0.9]],
        )
        .unwrap();
        let scores = ClassWeights::episode_class_scores(&ep, &batch).unwrap();
        assert_eq!(scores[0].0, ClassId(0));
        assert_relative_eq!(scores[0].1, 0.25, max_relative = 1e-12);
        assert_relative_eq!(scores[1].1, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn class_update_perfect_classifier_only_discounts() {
        let ep = two_class_episode_one_query();
        let batch = PredictionBatch::new(
            ep.categories().classes().to_vec(),
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let mut w = ClassWeights::from_weights(vec![4.0, 9.0]).unwrap();
        w.update_from_episode(&ep, &batch, 1.0, 0.5).unwrap();
        assert_relative_eq!(w.weights()[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(w.weights()[1], 3.0, max_relative = 1e-12);
    }

    #[test]
    fn class_update_uniform_classifier_preserves_episode_ratios() {
        let ep = two_class_episode_one_query();
        let batch = PredictionBatch::new(
            ep.categories().classes().to_vec(),
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        )
        .unwrap();
        let mut w = ClassWeights::from_weights(vec![2.0, 8.0]).unwrap();
        let before = w.weights()[0] / w.weights()[1];
        w.update_from_episode(&ep, &batch, 1.0, 1.0).unwrap();
        let after = w.weights()[0] / w.weights()[1];
        assert_relative_eq!(before, after, max_relative = 1e-12);
    }

    #[test]
    fn class_update_leaves_outside_classes_untouched() {
        let ep = two_class_episode_one_query();
        let batch = PredictionBatch::new(
            ep.categories().classes().to_vec(),
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        )
        .unwrap();
        let mut w = ClassWeights::from_weights(vec![1.0, 1.0, 5.5, 6.5]).unwrap();
        w.update_from_episode(&ep, &batch, 1.0, 0.5).unwrap();
        assert_eq!(w.weights()[2], 5.5);
        assert_eq!(w.weights()[3], 6.5);
    }

    #[test]
    fn wr_sampling_exhausts_all_classes() {
        let w = ClassWeights::uniform(5).unwrap();
        let mut rng = stream_rng(1, 0);
        let set = sample_classes_without_replacement(&w, 5, &mut rng).unwrap();
        assert_eq!(set.sorted_ids(), (0..5).map(ClassId).collect::<Vec<_>>());
    }

    #[test]
    fn wr_sampling_matches_weight_ratios() {
        // weights (1, 1, 2): class 2 drawn with probability 0.5
        let w = ClassWeights::from_weights(vec![1.0, 1.0, 2.0]).unwrap();
        let mut rng = stream_rng(17, 0);
        let mut counts = [0u64; 3];
        let draws = 100_000;
        for _ in 0..draws {
            let set = sample_classes_without_replacement(&w, 1, &mut rng).unwrap();
            counts[set.classes()[0].index()] += 1;
        }
        let test = chi_square_gof(&counts, &[0.25, 0.25, 0.5]).unwrap();
        assert!(test.p_value > 0.001, "chi2 p = {}", test.p_value);
    }

    #[test]
    fn wr_sampling_degenerate_weight_dominates() {
        let w = ClassWeights::from_weights(vec![1.0, 1e-12, 1e-12]).unwrap();
        let mut rng = stream_rng(23, 0);
        for _ in 0..200 {
            let set = sample_classes_without_replacement(&w, 1, &mut rng).unwrap();
            assert_eq!(set.classes()[0], ClassId(0));
        }
    }

    #[test]
    fn wr_sampling_needs_enough_positive_weights() {
        let w = ClassWeights::from_weights(vec![1.0, 0.0, 1.0]).unwrap();
        let mut rng = stream_rng(3, 0);
        assert!(sample_classes_without_replacement(&w, 3, &mut rng).is_err());
        assert!(sample_classes_without_replacement(&w, 2, &mut rng).is_ok());
    }

    #[test]
    fn uniform_subset_sampler_covers_range() {
        let mut rng = stream_rng(4, 0);
        let set = sample_classes_uniform(6, 6, &mut rng).unwrap();
        assert_eq!(set.sorted_ids().len(), 6);
        assert!(sample_classes_uniform(4, 5, &mut rng).is_err());
    }

    #[test]
    fn set_distribution_lookup_and_csv() {
        let d = SetDistribution::from_entries(
            4,
            2,
            vec![
                (vec![ClassId(1), ClassId(0)], 0.75),
                (vec![ClassId(2), ClassId(3)], 0.25),
            ],
        )
        .unwrap();
        assert_relative_eq!(d.probability_of(&cats(&[1, 0])), 0.75);
        assert_eq!(d.probability_of(&cats(&[0, 2])), 0.0);

        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "class_ids,probability");
        assert_eq!(lines[1], "0;1,0.750000000000");
        assert_eq!(lines[2], "2;3,0.250000000000");
    }

    #[test]
    fn set_distribution_validates_total() {
        let bad = SetDistribution::from_entries(3, 2, vec![(vec![ClassId(0), ClassId(1)], 0.5)]);
        assert!(bad.is_err());
    }
}
