//! Greedy class-pair task sampling.
//!
//! Draws an unordered class pair with probability proportional to its
//! potential, then grows the set one class at a time, each candidate weighted
//! by the product of its potentials with every class already chosen. The
//! candidate weights are kept as running log scores, extended by one term per
//! step, so a draw costs O(k * num_classes) after the O(log #pairs) pair draw.

use rand::Rng;

use crate::error::{Error, Result};
use crate::potentials::PotentialMatrix;
use crate::samplers::{categorical_from_logs, CategorySet};

pub fn sample_task_gcp<R: Rng>(
    matrix: &PotentialMatrix,
    k: usize,
    rng: &mut R,
) -> Result<CategorySet> {
    let n = matrix.num_classes();
    if k < 2 || k > n {
        return Err(Error::InvalidCategorySet(format!(
            "greedy class-pair sampling needs 2 <= k <= {n}, got {k}"
        )));
    }

    let tree = matrix.pair_weights();
    let pair_idx = tree.sample(rng.random::<f64>());
    let (first, second) = matrix.unpack(pair_idx);

    let mut chosen = Vec::with_capacity(k);
    chosen.push(first);
    chosen.push(second);

    // Running log score per candidate: sum of log potentials to every chosen
    // class. Chosen classes are masked out with -inf.
    let mut scores: Vec<f64> = (0..n)
        .map(|c| {
            if c == first.index() || c == second.index() {
                f64::NEG_INFINITY
            } else {
                matrix.log_at(c, first.index()) + matrix.log_at(c, second.index())
            }
        })
        .collect();

    while chosen.len() < k {
        let picked = categorical_from_logs(&scores, rng);
        scores[picked] = f64::NEG_INFINITY;
        for (c, score) in scores.iter_mut().enumerate() {
            if score.is_finite() {
                *score += matrix.log_at(c, picked);
            }
        }
        chosen.push(crate::potentials::ClassId(picked));
    }
    CategorySet::new(chosen)
}
