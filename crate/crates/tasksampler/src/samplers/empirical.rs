//! Frequency tables over drawn category sets, with chi-square comparison
//! against a reference law.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::potentials::ClassId;
use crate::samplers::{CategorySet, SetDistribution};
use crate::stats::{chi_square_gof, ChiSquareTest};

#[derive(Debug, Clone)]
pub struct EmpiricalSetDistribution {
    num_classes: usize,
    k: usize,
    draws: u64,
    counts: BTreeMap<Vec<ClassId>, u64>,
}

/// Draw `draws` category sets from `sampler` and tabulate their frequencies.
pub fn empirical_distribution<R: Rng, F>(
    num_classes: usize,
    k: usize,
    draws: u64,
    rng: &mut R,
    mut sampler: F,
) -> Result<EmpiricalSetDistribution>
where
    F: FnMut(&mut R) -> Result<CategorySet>,
{
    if draws == 0 {
        return Err(Error::InvalidConfig("empirical distribution needs at least one draw".into()));
    }
    let mut counts: BTreeMap<Vec<ClassId>, u64> = BTreeMap::new();
    for _ in 0..draws {
        let set = sampler(rng)?;
        if set.len() != k || set.classes().iter().any(|c| c.index() >= num_classes) {
            return Err(Error::UniverseMismatch(format!(
                "drawn set {:?} does not belong to ({num_classes} classes, k={k})",
                set.sorted_ids()
            )));
        }
        *counts.entry(set.sorted_ids()).or_insert(0) += 1;
    }
    Ok(EmpiricalSetDistribution { num_classes, k, draws, counts })
}

impl EmpiricalSetDistribution {
    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn count_of(&self, set: &CategorySet) -> u64 {
        self.counts.get(&set.sorted_ids()).copied().unwrap_or(0)
    }

    /// Observed frequencies as a probability table.
    pub fn frequencies(&self) -> Result<SetDistribution> {
        let entries = self
            .counts
            .iter()
            .map(|(set, &c)| (set.clone(), c as f64 / self.draws as f64))
            .collect();
        SetDistribution::from_entries(self.num_classes, self.k, entries)
    }

    /// Most frequently drawn set.
    pub fn mode(&self) -> Option<(Vec<ClassId>, u64)> {
        self.counts.iter().max_by_key(|(_, &c)| c).map(|(s, &c)| (s.clone(), c))
    }

    /// Largest |observed frequency - reference probability| over the union of
    /// supports.
    pub fn max_abs_deviation(&self, reference: &SetDistribution) -> Result<f64> {
        self.check_universe(reference)?;
        let mut worst = 0.0f64;
        for (set, p) in reference.entries() {
            let f = self.counts.get(set).copied().unwrap_or(0) as f64 / self.draws as f64;
            worst = worst.max((f - p).abs());
        }
        for (set, &c) in &self.counts {
            if reference.entries().binary_search_by(|e| e.0.cmp(set)).is_err() {
                worst = worst.max(c as f64 / self.draws as f64);
            }
        }
        Ok(worst)
    }

    /// Goodness-of-fit of the observed counts against a reference law. The
    /// reference support defines the bins; observing a set the reference
    /// gives probability zero is an error.
    pub fn chi_square_vs(&self, reference: &SetDistribution) -> Result<ChiSquareTest> {
        self.check_universe(reference)?;
        let mut observed = Vec::with_capacity(reference.entries().len());
        let mut expected = Vec::with_capacity(reference.entries().len());
        let mut seen = 0u64;
        for (set, p) in reference.entries() {
            let c = self.counts.get(set).copied().unwrap_or(0);
            seen += c;
            observed.push(c);
            expected.push(*p);
        }
        if seen != self.draws {
            return Err(Error::UniverseMismatch(format!(
                "{} draws landed outside the reference support",
                self.draws - seen
            )));
        }
        chi_square_gof(&observed, &expected)
    }

    fn check_universe(&self, reference: &SetDistribution) -> Result<()> {
        if reference.num_classes() != self.num_classes || reference.k() != self.k {
            return Err(Error::UniverseMismatch(format!(
                "empirical ({} classes, k={}) vs reference ({} classes, k={})",
                self.num_classes,
                self.k,
                reference.num_classes(),
                reference.k()
            )));
        }
        Ok(())
    }
}
