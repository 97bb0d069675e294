//! Class-pair potentials and their multiplicative difficulty updates.
//!
//! The matrix stores one weight per unordered class pair, kept in log domain:
//! repeated multiplicative updates compound exponentials and overflow
//! linear-domain floats long before they stop being meaningful. A fresh
//! matrix has every potential equal to one (log zero), i.e. task sampling
//! starts uniform. A linear-domain copy of the pair weights is cached in a
//! prefix-sum tree so the greedy sampler can draw the initial pair in
//! O(log #pairs); only pairs touched by an update are re-exponentiated.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::episode::Episode;
use crate::error::{Error, Result};
use crate::learner::PredictionBatch;
use crate::tree::SumTree;

/// Index of a class within the meta-training category set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub usize);

impl ClassId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How a pair's confusion value is turned into the update exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Prefer confusable pairs: score = u.
    Hard,
    /// Prefer well-separated pairs: score = 1 - u.
    Easy,
    /// Prefer pairs near the decision boundary: score = (1 - u) * u.
    Uncertain,
}

impl Strategy {
    /// Update exponent for a confusion value u.
    ///
    /// Confusion sums two per-direction averages, so it lives in [0, 2].
    /// Hard uses it as-is; Easy and Uncertain clamp to [0, 1] first so their
    /// scores stay in the intended unit range.
    pub fn score(self, u: f64) -> f64 {
        match self {
            Strategy::Hard => u,
            Strategy::Easy => 1.0 - u.clamp(0.0, 1.0),
            Strategy::Uncertain => {
                let c = u.clamp(0.0, 1.0);
                (1.0 - c) * c
            }
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(Strategy::Hard),
            "easy" => Ok(Strategy::Easy),
            "uncertain" => Ok(Strategy::Uncertain),
            other => Err(Error::Parse(format!("unknown strategy '{other}'"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Strategy::Hard => "hard",
            Strategy::Easy => "easy",
            Strategy::Uncertain => "uncertain",
        };
        write!(f, "{name}")
    }
}

/// Average probability mass a prediction batch puts across one class pair,
/// summed over both directions of confusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConfusion {
    pub pair: (ClassId, ClassId),
    pub value: f64,
}

/// Rebuild the linear weight cache once a log potential drifts this far above
/// the shift used when the cache was last built.
const REBUILD_MARGIN: f64 = 200.0;

/// Symmetric positive class-pair weights stored as packed upper-triangle logs.
#[derive(Debug, Clone)]
pub struct PotentialMatrix {
    num_classes: usize,
    log_pot: Vec<f64>,
    /// Linear pair weights are exp(log - shift).
    shift: f64,
    weights: SumTree,
}

impl PotentialMatrix {
    /// All-ones matrix over `num_classes` classes.
    pub fn new(num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "potential matrix needs at least 2 classes, got {num_classes}"
            )));
        }
        let pairs = num_classes * (num_classes - 1) / 2;
        Ok(PotentialMatrix {
            num_classes,
            log_pot: vec![0.0; pairs],
            shift: 0.0,
            weights: SumTree::new(&vec![1.0; pairs]),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_pairs(&self) -> usize {
        self.log_pot.len()
    }

    fn check_pair(&self, i: ClassId, j: ClassId) -> Result<usize> {
        let (a, b) = (i.index(), j.index());
        if a == b || a >= self.num_classes || b >= self.num_classes {
            return Err(Error::PairOutOfRange { i: a, j: b, num_classes: self.num_classes });
        }
        Ok(self.pack(a.min(b), a.max(b)))
    }

    /// Packed upper-triangle index for i < j.
    fn pack(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.num_classes);
        i * self.num_classes - i * (i + 1) / 2 + j - i - 1
    }

    /// Inverse of `pack`.
    pub(crate) fn unpack(&self, mut idx: usize) -> (ClassId, ClassId) {
        debug_assert!(idx < self.log_pot.len());
        for i in 0..self.num_classes - 1 {
            let row = self.num_classes - 1 - i;
            if idx < row {
                return (ClassId(i), ClassId(i + 1 + idx));
            }
            idx -= row;
        }
        unreachable!("pair index out of range")
    }

    pub fn log_potential(&self, i: ClassId, j: ClassId) -> Result<f64> {
        Ok(self.log_pot[self.check_pair(i, j)?])
    }

    /// Unchecked log potential for hot paths; callers guarantee i != j.
    pub(crate) fn log_at(&self, i: usize, j: usize) -> f64 {
        self.log_pot[self.pack(i.min(j), i.max(j))]
    }

    /// Linear-domain potential C(i, j).
    pub fn potential(&self, i: ClassId, j: ClassId) -> Result<f64> {
        Ok(self.log_potential(i, j)?.exp())
    }

    pub fn set_log_potential(&mut self, i: ClassId, j: ClassId, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite { context: format!("log potential ({i}, {j})"), value });
        }
        let idx = self.check_pair(i, j)?;
        self.write_log(idx, value);
        Ok(())
    }

    fn write_log(&mut self, idx: usize, value: f64) {
        self.log_pot[idx] = value;
        if value > self.shift + REBUILD_MARGIN {
            self.rebuild_weights();
        } else {
            self.weights.set(idx, (value - self.shift).exp());
        }
    }

    fn rebuild_weights(&mut self) {
        let max = self.log_pot.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.shift = max;
        let linear: Vec<f64> = self.log_pot.iter().map(|&l| (l - max).exp()).collect();
        self.weights = SumTree::new(&linear);
    }

    /// Multiplicative update: for every listed pair,
    /// `log C <- tau * log C + alpha * score(u)`. Pairs not listed keep their
    /// value; the confusion is undefined for classes outside the episode.
    pub fn apply_update(
        &mut self,
        confusions: &[PairConfusion],
        alpha: f64,
        tau: f64,
        strategy: Strategy,
    ) -> Result<()> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha must be positive and finite, got {alpha}")));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidConfig(format!("tau must lie in [0, 1], got {tau}")));
        }
        for c in confusions {
            if !c.value.is_finite() {
                return Err(Error::NonFinite { context: "pair confusion".into(), value: c.value });
            }
            let idx = self.check_pair(c.pair.0, c.pair.1)?;
            let updated = tau * self.log_pot[idx] + alpha * strategy.score(c.value);
            if !updated.is_finite() {
                return Err(Error::NonFinite { context: "updated log potential".into(), value: updated });
            }
            self.write_log(idx, updated);
        }
        Ok(())
    }

    /// Dense symmetric matrix of linear potentials, normalized so the largest
    /// off-diagonal entry is 1. Diagonal entries are written as 0.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        let max = self.log_pot.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut table = vec![vec![0.0; self.num_classes]; self.num_classes];
        for i in 0..self.num_classes {
            for j in i + 1..self.num_classes {
                let v = (self.log_pot[self.pack(i, j)] - max).exp();
                table[i][j] = v;
                table[j][i] = v;
            }
        }
        table
    }

    /// Snapshot as CSV: header row of class ids, then one row per class with
    /// six decimal digits.
    pub fn write_snapshot_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (0..self.num_classes).map(|c| c.to_string()).collect();
        writeln!(out, "{}", header.join(","))?;
        for row in self.snapshot() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Largest log potential in the matrix.
    pub fn max_log_potential(&self) -> f64 {
        self.log_pot.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn pair_weights(&self) -> &SumTree {
        &self.weights
    }
}

/// Per-pair confusion of an episode's predictions, Eq.-style: the mean
/// probability of classifying queries of class j as i plus the mean of the
/// reverse direction, each mean over the episode's N queries per class.
pub fn pair_confusion(predictions: &PredictionBatch, episode: &Episode) -> Result<Vec<PairConfusion>> {
    predictions.validate_for(episode)?;
    let categories = episode.categories().classes();
    let k = categories.len();
    let n = episode.queries_per_class() as f64;

    // directed_mass[a][b] = sum over queries labeled cat[a] of p(cat[b] | q)
    let mut directed = vec![vec![0.0; k]; k];
    for (q, row) in episode.query().iter().zip(predictions.probs()) {
        let label_pos = episode
            .categories()
            .position_of(q.label)
            .expect("validated episode query label");
        for (b, &p) in row.iter().enumerate() {
            directed[label_pos][b] += p;
        }
    }

    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            let value = directed[b][a] / n + directed[a][b] / n;
            out.push(PairConfusion { pair: (categories[a], categories[b]), value });
        }
    }
    Ok(out)
}
