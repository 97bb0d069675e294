//! Exact enumeration of the class-pair and greedy class-pair task laws.
//!
//! These are verification oracles, not training-path samplers: they walk
//! every K-subset (and for the greedy law, every sampling order of every
//! subset) and fail loudly once the state count passes the enumeration cap.
//! Log-domain accumulation keeps heavily updated matrices from overflowing.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::potentials::{ClassId, PotentialMatrix};
use crate::samplers::SetDistribution;

pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

fn factorial(k: usize) -> u128 {
    (1..=k as u128).product()
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Probability of each K-subset proportional to the product of its pair
/// potentials.
pub fn exact_cp_distribution(matrix: &PotentialMatrix, k: usize) -> Result<SetDistribution> {
    exact_cp_distribution_with_cap(matrix, k, DEFAULT_ENUMERATION_CAP)
}

pub fn exact_cp_distribution_with_cap(
    matrix: &PotentialMatrix,
    k: usize,
    cap: u128,
) -> Result<SetDistribution> {
    let n = matrix.num_classes();
    if k < 2 || k > n {
        return Err(Error::InvalidCategorySet(format!("cp law needs 2 <= k <= {n}, got {k}")));
    }
    let states = binomial(n, k);
    if states > cap {
        return Err(Error::EnumerationCap { states, cap });
    }

    let mut sets = Vec::with_capacity(states as usize);
    let mut logs = Vec::with_capacity(states as usize);
    for combo in (0..n).combinations(k) {
        let mut log_w = 0.0;
        for (a, b) in combo.iter().tuple_combinations() {
            log_w += matrix.log_at(*a, *b);
        }
        sets.push(combo);
        logs.push(log_w);
    }
    let z = log_sum_exp(&logs);
    let entries = sets
        .into_iter()
        .zip(logs)
        .map(|(set, l)| (set.into_iter().map(ClassId).collect(), (l - z).exp()))
        .collect();
    SetDistribution::from_entries(n, k, entries)
}

/// Exact law of [`super::sample_task_gcp`]: for every subset, the total
/// probability over all of its sampling orders, where an order is an
/// unordered initial pair followed by a permutation of the remaining
/// classes and each step divides by that step's own normalizer.
pub fn exact_gcp_distribution(matrix: &PotentialMatrix, k: usize) -> Result<SetDistribution> {
    exact_gcp_distribution_with_cap(matrix, k, DEFAULT_ENUMERATION_CAP)
}

pub fn exact_gcp_distribution_with_cap(
    matrix: &PotentialMatrix,
    k: usize,
    cap: u128,
) -> Result<SetDistribution> {
    let n = matrix.num_classes();
    if k < 2 || k > n {
        return Err(Error::InvalidCategorySet(format!("gcp law needs 2 <= k <= {n}, got {k}")));
    }
    if k > 6 {
        return Err(Error::InvalidCategorySet(format!(
            "gcp enumeration is limited to k <= 6, got {k}"
        )));
    }
    // Orders per subset: one unordered pair times (k-2)! tails = k!/2.
    let states = binomial(n, k).saturating_mul(factorial(k) / 2);
    if states > cap {
        return Err(Error::EnumerationCap { states, cap });
    }

    // Global normalizer of the initial pair draw.
    let pair_logs: Vec<f64> = (0..n)
        .tuple_combinations()
        .map(|(a, b)| matrix.log_at(a, b))
        .collect();
    let pair_z = log_sum_exp(&pair_logs);

    let mut entries = Vec::with_capacity(binomial(n, k) as usize);
    for combo in (0..n).combinations(k) {
        let mut total = 0.0;
        for pair in combo.iter().copied().combinations(2) {
            let rest: Vec<usize> =
                combo.iter().copied().filter(|c| !pair.contains(c)).collect();
            let tails: Box<dyn Iterator<Item = Vec<usize>>> = if rest.is_empty() {
                Box::new(std::iter::once(Vec::new()))
            } else {
                Box::new(rest.iter().copied().permutations(rest.len()))
            };
            for tail in tails {
                let mut log_p = matrix.log_at(pair[0], pair[1]) - pair_z;
                let mut chosen = pair.clone();
                for &next in &tail {
                    // Normalizer over every remaining candidate in the full
                    // class universe, not just the subset.
                    let mut step_logs = Vec::with_capacity(n - chosen.len());
                    let mut next_log = f64::NEG_INFINITY;
                    for c in 0..n {
                        if chosen.contains(&c) {
                            continue;
                        }
                        let w: f64 = chosen.iter().map(|&j| matrix.log_at(c, j)).sum();
                        if c == next {
                            next_log = w;
                        }
                        step_logs.push(w);
                    }
                    log_p += next_log - log_sum_exp(&step_logs);
                    chosen.push(next);
                }
                total += log_p.exp();
            }
        }
        entries.push((combo.into_iter().map(ClassId).collect(), total));
    }
    SetDistribution::from_entries(n, k, entries)
}

/// Total variation distance between two set distributions over the same
/// universe; sets absent from one support count as probability zero.
pub fn total_variation(a: &SetDistribution, b: &SetDistribution) -> Result<f64> {
    if !a.same_universe(b) {
        return Err(Error::UniverseMismatch(format!(
            "({} classes, k={}) vs ({} classes, k={})",
            a.num_classes(),
            a.k(),
            b.num_classes(),
            b.k()
        )));
    }
    // Both entry lists are sorted by set id; merge-walk them.
    let (xs, ys) = (a.entries(), b.entries());
    let (mut i, mut j) = (0, 0);
    let mut sum = 0.0;
    while i < xs.len() || j < ys.len() {
        match (xs.get(i), ys.get(j)) {
            (Some((sx, px)), Some((sy, py))) => match sx.cmp(sy) {
                std::cmp::Ordering::Equal => {
                    sum += (px - py).abs();
                    i += 1;
                    j += 1;
                }
                std::cmp::Ordering::Less => {
                    sum += px;
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    sum += py;
                    j += 1;
                }
            },
            (Some((_, px)), None) => {
                sum += px;
                i += 1;
            }
            (None, Some((_, py))) => {
                sum += py;
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    Ok(sum / 2.0)
}

/// The documented 4-class matrix for which the greedy law strictly differs
/// from the class-pair law: the per-step normalizers do not cancel.
pub fn proposition_counterexample() -> PotentialMatrix {
    let mut m = PotentialMatrix::new(4).expect("4 >= 2");
    let pairs = [(0, 1, 2.0), (0, 2, 3.0), (0, 3, 1.0), (1, 2, 1.0), (1, 3, 4.0), (2, 3, 1.0)];
    for (i, j, c) in pairs {
        m.set_log_potential(ClassId(i), ClassId(j), f64::ln(c)).expect("in range");
    }
    m
}
