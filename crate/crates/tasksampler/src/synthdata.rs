//! Synthetic class-cluster datasets with controllable confusability.
//!
//! Classes are grouped into superclusters: class centers within one
//! supercluster sit close together, superclusters sit far apart. Pairs of
//! classes sharing a supercluster are therefore hard to tell apart by
//! construction, which gives the adaptive sampler a checkable ground truth.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::episode::ClassIndexedDataset;
use crate::error::{Error, Result};
use crate::potentials::ClassId;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    pub num_classes: usize,
    pub points_per_class: usize,
    pub dim: usize,
    pub num_superclusters: usize,
    pub within_supercluster_spread: f64,
    pub between_supercluster_spread: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        ClusterSpec {
            num_classes: 25,
            points_per_class: 60,
            dim: 16,
            num_superclusters: 5,
            within_supercluster_spread: 1.0,
            between_supercluster_spread: 8.0,
            noise_sigma: 0.7,
            seed: 7,
        }
    }
}

impl ClusterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || self.points_per_class == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig("cluster spec needs >= 2 classes, points and dim >= 1".into()));
        }
        if self.num_superclusters == 0 || self.num_superclusters > self.num_classes {
            return Err(Error::InvalidConfig(format!(
                "superclusters must lie in [1, num_classes], got {}",
                self.num_superclusters
            )));
        }
        if !(self.noise_sigma > 0.0)
            || !(self.within_supercluster_spread > 0.0)
            || self.between_supercluster_spread <= self.within_supercluster_spread
        {
            return Err(Error::InvalidConfig(
                "spreads must satisfy between > within > 0 and noise_sigma > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Class-to-supercluster assignment: balanced and shuffled, deterministic in
/// the spec seed. Every supercluster receives either floor or ceil of
/// num_classes / num_superclusters classes.
pub fn supercluster_assignment(spec: &ClusterSpec) -> Vec<usize> {
    let mut assignment: Vec<usize> =
        (0..spec.num_classes).map(|c| c % spec.num_superclusters).collect();
    let mut rng = stream_rng(spec.seed, 0);
    // Fisher-Yates; rand's shuffle would work too but this keeps the exact
    // draw sequence pinned down for reproducibility tests.
    for i in (1..assignment.len()).rev() {
        let j = rng.random_range(0..=i);
        assignment.swap(i, j);
    }
    assignment
}

fn gaussian_vec<R: Rng>(dim: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) * scale).collect()
}

/// Generate the dataset described by `spec`. Identical specs produce
/// bit-identical datasets.
pub fn generate(spec: &ClusterSpec) -> Result<ClassIndexedDataset> {
    spec.validate()?;
    let assignment = supercluster_assignment(spec);

    let mut center_rng = stream_rng(spec.seed, 1);
    let super_centers: Vec<Vec<f64>> = (0..spec.num_superclusters)
        .map(|_| gaussian_vec(spec.dim, spec.between_supercluster_spread, &mut center_rng))
        .collect();

    let mut class_rng = stream_rng(spec.seed, 2);
    let class_centers: Vec<Vec<f64>> = (0..spec.num_classes)
        .map(|c| {
            let base = &super_centers[assignment[c]];
            let offset = gaussian_vec(spec.dim, spec.within_supercluster_spread, &mut class_rng);
            base.iter().zip(&offset).map(|(b, o)| b + o).collect()
        })
        .collect();

    let mut point_rng = stream_rng(spec.seed, 3);
    let pools: Vec<Vec<Vec<f64>>> = (0..spec.num_classes)
        .map(|c| {
            (0..spec.points_per_class)
                .map(|_| {
                    let noise = gaussian_vec(spec.dim, spec.noise_sigma, &mut point_rng);
                    class_centers[c].iter().zip(&noise).map(|(m, n)| m + n).collect()
                })
                .collect()
        })
        .collect();

    ClassIndexedDataset::from_pools(pools)
}

/// Ground-truth confusability of one class pair.
#[derive(Debug, Clone, Copy)]
pub struct PairGroundTruth {
    pub pair: (ClassId, ClassId),
    pub same_supercluster: bool,
    pub center_distance: f64,
}

/// Per-pair confusability oracle: supercluster co-membership and empirical
/// class-center distance. Pairs are listed for i < j in class order.
pub fn confusability_ground_truth(
    dataset: &ClassIndexedDataset,
    spec: &ClusterSpec,
) -> Result<Vec<PairGroundTruth>> {
    if dataset.num_classes() != spec.num_classes || dataset.dim() != spec.dim {
        return Err(Error::Dataset(format!(
            "dataset shape {}x{} does not match spec {}x{}",
            dataset.num_classes(),
            dataset.dim(),
            spec.num_classes,
            spec.dim
        )));
    }
    let assignment = supercluster_assignment(spec);
    let centers: Vec<Vec<f64>> =
        (0..spec.num_classes).map(|c| dataset.class_center(ClassId(c))).collect();
    let mut out = Vec::with_capacity(spec.num_classes * (spec.num_classes - 1) / 2);
    for i in 0..spec.num_classes {
        for j in i + 1..spec.num_classes {
            let dist = centers[i]
                .iter()
                .zip(&centers[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            out.push(PairGroundTruth {
                pair: (ClassId(i), ClassId(j)),
                same_supercluster: assignment[i] == assignment[j],
                center_distance: dist,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let spec = ClusterSpec { num_classes: 6, points_per_class: 5, dim: 4, ..Default::default() };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        for c in 0..6 {
            for i in 0..5 {
                assert_eq!(a.pool(ClassId(c))[i].as_ref(), b.pool(ClassId(c))[i].as_ref());
            }
        }
        let other = generate(&ClusterSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.pool(ClassId(0))[0].as_ref(), other.pool(ClassId(0))[0].as_ref());
    }

    #[test]
    fn pools_are_rectangular() {
        let spec = ClusterSpec { num_classes: 7, points_per_class: 9, dim: 3, ..Default::default() };
        let ds = generate(&spec).unwrap();
        assert_eq!(ds.num_classes(), 7);
        assert_eq!(ds.points_per_class(), 9);
        assert_eq!(ds.dim(), 3);
    }

    #[test]
    fn tiny_noise_collapses_points_onto_class_centers() {
        let spec = ClusterSpec {
            num_classes: 4,
            points_per_class: 6,
            dim: 5,
            noise_sigma: 1e-12,
            ..Default::default()
        };
        let ds = generate(&spec).unwrap();
        for c in 0..4 {
            let center = ds.class_center(ClassId(c));
            for p in ds.pool(ClassId(c)) {
                let d: f64 = p.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
                assert!(d.sqrt() < 1e-9);
            }
        }
    }

    #[test]
    fn assignment_is_balanced_and_deterministic() {
        let spec = ClusterSpec { num_classes: 25, num_superclusters: 5, ..Default::default() };
        let a = supercluster_assignment(&spec);
        assert_eq!(a, supercluster_assignment(&spec));
        for s in 0..5 {
            assert_eq!(a.iter().filter(|&&x| x == s).count(), 5);
        }
    }

    #[test]
    fn same_supercluster_pairs_sit_closer_on_average() {
        // Direct distance computation over the generated centers.
        let spec = ClusterSpec {
            num_classes: 20,
            points_per_class: 60,
            dim: 16,
            num_superclusters: 4,
            within_supercluster_spread: 1.0,
            between_supercluster_spread: 8.0,
            noise_sigma: 0.7,
            seed: 7,
        };
        let ds = generate(&spec).unwrap();
        let truth = confusability_ground_truth(&ds, &spec).unwrap();
        let mean = |same: bool| {
            let d: Vec<f64> = truth
                .iter()
                .filter(|t| t.same_supercluster == same)
                .map(|t| t.center_distance)
                .collect();
            d.iter().sum::<f64>() / d.len() as f64
        };
        let (same, cross) = (mean(true), mean(false));
        assert!(
            same < cross,
            "expected same-supercluster pairs closer: same {same:.3} vs cross {cross:.3}"
        );
    }

    #[test]
    fn degenerate_supercluster_counts() {
        let one = ClusterSpec {
            num_classes: 5,
            points_per_class: 3,
            dim: 2,
            num_superclusters: 1,
            ..Default::default()
        };
        let ds = generate(&one).unwrap();
        let truth = confusability_ground_truth(&ds, &one).unwrap();
        assert!(truth.iter().all(|t| t.same_supercluster));

        let all = ClusterSpec { num_superclusters: 5, ..one };
        let ds = generate(&all).unwrap();
        let truth = confusability_ground_truth(&ds, &all).unwrap();
        assert!(truth.iter().all(|t| !t.same_supercluster));
    }

    #[test]
    fn spec_validation_rejects_inverted_spreads() {
        let bad = ClusterSpec {
            within_supercluster_spread: 9.0,
            between_supercluster_spread: 8.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ClusterSpec { num_superclusters: 26, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
