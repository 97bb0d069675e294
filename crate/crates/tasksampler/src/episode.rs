//! Episode data model: class-indexed datasets and K-way-M-shot task
//! construction.
//!
//! Episodes hold reference-counted views of the dataset's feature vectors, so
//! building one is O(K * (M + N)) regardless of feature dimension.

use std::io::{BufRead, BufReader, Read, Write};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::potentials::ClassId;
use crate::samplers::CategorySet;

/// One labeled feature vector.
#[derive(Debug, Clone)]
pub struct LabeledPoint {
    pub features: Arc<[f64]>,
    pub label: ClassId,
}

/// A K-way-M-shot task: category set plus disjoint support and query sets.
///
/// Support holds M points per class and query N points per class, both
/// grouped in category order.
#[derive(Debug, Clone)]
pub struct Episode {
    categories: CategorySet,
    support: Vec<LabeledPoint>,
    query: Vec<LabeledPoint>,
    shots: usize,
    queries: usize,
}

impl Episode {
    pub fn categories(&self) -> &CategorySet {
        &self.categories
    }

    pub fn support(&self) -> &[LabeledPoint] {
        &self.support
    }

    pub fn query(&self) -> &[LabeledPoint] {
        &self.query
    }

    pub fn k(&self) -> usize {
        self.categories.len()
    }

    pub fn shots_per_class(&self) -> usize {
        self.shots
    }

    pub fn queries_per_class(&self) -> usize {
        self.queries
    }
}

/// Dataset keyed by class, with equally sized per-class point pools.
#[derive(Debug, Clone)]
pub struct ClassIndexedDataset {
    pools: Vec<Vec<Arc<[f64]>>>,
    dim: usize,
}

impl ClassIndexedDataset {
    pub fn from_pools(pools: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if pools.is_empty() || pools[0].is_empty() {
            return Err(Error::Dataset("dataset needs at least one class with points".into()));
        }
        let per_class = pools[0].len();
        let dim = pools[0][0].len();
        if dim == 0 {
            return Err(Error::Dataset("zero-dimensional features".into()));
        }
        let mut shared = Vec::with_capacity(pools.len());
        for (c, pool) in pools.into_iter().enumerate() {
            if pool.len() != per_class {
                return Err(Error::Dataset(format!(
                    "class {c} has {} points, expected {per_class}",
                    pool.len()
                )));
            }
            let mut arcs = Vec::with_capacity(pool.len());
            for p in pool {
                if p.len() != dim {
                    return Err(Error::Dataset(format!(
                        "class {c} has a point of dimension {}, expected {dim}",
                        p.len()
                    )));
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Dataset(format!("class {c} has a non-finite feature")));
                }
                arcs.push(Arc::from(p.into_boxed_slice()));
            }
            shared.push(arcs);
        }
        Ok(ClassIndexedDataset { pools: shared, dim })
    }

    pub fn num_classes(&self) -> usize {
        self.pools.len()
    }

    /// Pool size L, identical for every class.
    pub fn points_per_class(&self) -> usize {
        self.pools[0].len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, class: ClassId, index: usize) -> LabeledPoint {
        LabeledPoint { features: Arc::clone(&self.pools[class.index()][index]), label: class }
    }

    pub fn pool(&self, class: ClassId) -> &[Arc<[f64]>] {
        &self.pools[class.index()]
    }

    /// Mean feature vector of one class pool.
    pub fn class_center(&self, class: ClassId) -> Vec<f64> {
        let pool = &self.pools[class.index()];
        let mut center = vec![0.0; self.dim];
        for p in pool {
            for (c, v) in center.iter_mut().zip(p.iter()) {
                *c += v;
            }
        }
        for c in &mut center {
            *c /= pool.len() as f64;
        }
        center
    }

    /// Build an episode by drawing `shots + queries` distinct points per
    /// class uniformly without replacement: the first `shots` go to the
    /// support set, the rest to the query set.
    pub fn build_episode<R: Rng>(
        &self,
        categories: &CategorySet,
        shots: usize,
        queries: usize,
        rng: &mut R,
    ) -> Result<Episode> {
        let per_class = self.points_per_class();
        if shots == 0 || queries == 0 {
            return Err(Error::InvalidConfig("episodes need at least one shot and one query".into()));
        }
        if shots + queries > per_class {
            return Err(Error::Dataset(format!(
                "pool exhausted: {shots} shots + {queries} queries > {per_class} points per class"
            )));
        }
        for &c in categories.classes() {
            if c.index() >= self.num_classes() {
                return Err(Error::Dataset(format!(
                    "category {c} out of range for {} classes",
                    self.num_classes()
                )));
            }
        }
        let mut support = Vec::with_capacity(shots * categories.len());
        let mut query = Vec::with_capacity(queries * categories.len());
        for &c in categories.classes() {
            let picked = rand::seq::index::sample(rng, per_class, shots + queries);
            for (slot, idx) in picked.into_iter().enumerate() {
                let point = self.point(c, idx);
                if slot < shots {
                    support.push(point);
                } else {
                    query.push(point);
                }
            }
        }
        Ok(Episode { categories: categories.clone(), support, query, shots, queries })
    }

    /// Class-level split: the first floor(fraction * classes) classes become
    /// the meta-train side, the rest the meta-test side. Class ids are
    /// re-indexed from zero on each side; pools are untouched.
    pub fn meta_split(&self, train_fraction: f64) -> Result<(Self, Self)> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(Error::InvalidConfig(format!(
                "train fraction must lie in [0, 1], got {train_fraction}"
            )));
        }
        let n = self.num_classes();
        let cut = (train_fraction * n as f64).floor() as usize;
        if cut < 2 || n - cut < 2 {
            return Err(Error::InvalidConfig(format!(
                "split {cut}/{} leaves a side with fewer than 2 classes",
                n - cut
            )));
        }
        let train = ClassIndexedDataset { pools: self.pools[..cut].to_vec(), dim: self.dim };
        let test = ClassIndexedDataset { pools: self.pools[cut..].to_vec(), dim: self.dim };
        Ok((train, test))
    }

    /// CSV dump with columns `label,f0..f{d-1}`.
    pub fn save_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = String::from("label");
        for i in 0..self.dim {
            header.push_str(&format!(",f{i}"));
        }
        writeln!(out, "{header}")?;
        for (c, pool) in self.pools.iter().enumerate() {
            for p in pool {
                let mut line = c.to_string();
                for v in p.iter() {
                    line.push(',');
                    line.push_str(&v.to_string());
                }
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn load_csv<R: Read>(input: R) -> Result<Self> {
        let reader = BufReader::new(input);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dataset file".into()))??;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"label") || cols.len() < 2 {
            return Err(Error::Parse("dataset header must be label,f0..".into()));
        }
        let dim = cols.len() - 1;
        let mut by_label: Vec<Vec<Vec<f64>>> = Vec::new();
        for (ln, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let label: usize = fields
                .next()
                .unwrap()
                .parse()
                .map_err(|_| Error::Parse(format!("bad label on data row {}", ln + 1)))?;
            let feats: Vec<f64> = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse(format!("bad feature on data row {}", ln + 1)))?;
            if feats.len() != dim {
                return Err(Error::Parse(format!(
                    "row {} has {} features, expected {dim}",
                    ln + 1,
                    feats.len()
                )));
            }
            if label >= by_label.len() {
                by_label.resize(label + 1, Vec::new());
            }
            by_label[label].push(feats);
        }
        Self::from_pools(by_label)
    }
}
