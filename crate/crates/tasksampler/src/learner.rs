//! Prediction providers: a trainable linear prototypical classifier and a
//! deterministic oracle for sampler tests.
//!
//! The classifier embeds points with a single linear map W, averages embedded
//! support points into one prototype per class, and scores queries by a
//! softmax over negative squared distances to the prototypes. One SGD step per
//! episode on the query negative log-likelihood, with the gradient computed
//! analytically.

use std::io::{BufRead, BufReader, Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::episode::Episode;
use crate::error::{Error, Result};
use crate::potentials::ClassId;

const PROB_FLOOR: f64 = 1e-12;

/// Per-query probability vectors over an episode's classes, aligned with
/// `Episode::query` and the episode's category order.
#[derive(Debug, Clone)]
pub struct PredictionBatch {
    classes: Vec<ClassId>,
    probs: Vec<Vec<f64>>,
}

impl PredictionBatch {
    pub fn new(classes: Vec<ClassId>, probs: Vec<Vec<f64>>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::PredictionMismatch("empty class list".into()));
        }
        for (i, row) in probs.iter().enumerate() {
            if row.len() != classes.len() {
                return Err(Error::PredictionMismatch(format!(
                    "row {i} has arity {}, expected {}",
                    row.len(),
                    classes.len()
                )));
            }
            let mut sum = 0.0;
            for &p in row {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::PredictionMismatch(format!("row {i} has invalid probability {p}")));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::PredictionMismatch(format!("row {i} sums to {sum}")));
            }
        }
        Ok(PredictionBatch { classes, probs })
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn validate_for(&self, episode: &Episode) -> Result<()> {
        if self.classes != episode.categories().classes() {
            return Err(Error::PredictionMismatch("class order differs from episode categories".into()));
        }
        let expected = episode.queries_per_class() * episode.k();
        if self.probs.len() != expected {
            return Err(Error::PredictionMismatch(format!(
                "{} prediction rows for {expected} queries",
                self.probs.len()
            )));
        }
        Ok(())
    }
}

/// Mean over queries of -log p(true class), with probabilities floored at
/// 1e-12 to keep the loss finite.
pub fn episode_loss(batch: &PredictionBatch, episode: &Episode) -> Result<f64> {
    batch.validate_for(episode)?;
    let mut total = 0.0;
    for (q, row) in episode.query().iter().zip(batch.probs()) {
        let pos = episode.categories().position_of(q.label).expect("validated label");
        total -= row[pos].max(PROB_FLOOR).ln();
    }
    Ok(total / batch.probs().len() as f64)
}

/// Linear embedding x -> W x with plain SGD on the episodic loss.
#[derive(Debug, Clone)]
pub struct LinearEmbedding {
    weight: Vec<f64>, // row-major, embed_dim x input_dim
    embed_dim: usize,
    input_dim: usize,
    pub learning_rate: f64,
}

struct ForwardPass {
    class_means: Vec<Vec<f64>>, // per class, input space
    prototypes: Vec<Vec<f64>>,  // per class, embedded
    embedded_queries: Vec<Vec<f64>>,
    probs: Vec<Vec<f64>>,
    label_positions: Vec<usize>,
}

impl LinearEmbedding {
    /// Gaussian init with entries scaled by 1/sqrt(input_dim).
    pub fn new<R: Rng>(embed_dim: usize, input_dim: usize, learning_rate: f64, rng: &mut R) -> Result<Self> {
        if embed_dim == 0 || input_dim == 0 {
            return Err(Error::InvalidConfig("embedding dimensions must be positive".into()));
        }
        if !(learning_rate >= 0.0) || !learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!("bad learning rate {learning_rate}")));
        }
        let scale = 1.0 / (input_dim as f64).sqrt();
        let weight = (0..embed_dim * input_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        Ok(LinearEmbedding { weight, embed_dim, input_dim, learning_rate })
    }

    pub fn from_weights(rows: Vec<Vec<f64>>, learning_rate: f64) -> Result<Self> {
        let embed_dim = rows.len();
        let input_dim = rows.first().map_or(0, Vec::len);
        if embed_dim == 0 || input_dim == 0 {
            return Err(Error::InvalidConfig("empty weight matrix".into()));
        }
        let mut weight = Vec::with_capacity(embed_dim * input_dim);
        for row in &rows {
            if row.len() != input_dim {
                return Err(Error::InvalidConfig("ragged weight matrix".into()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { context: "weight matrix".into(), value: f64::NAN });
            }
            weight.extend_from_slice(row);
        }
        Ok(LinearEmbedding { weight, embed_dim, input_dim, learning_rate })
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn weight_rows(&self) -> Vec<Vec<f64>> {
        self.weight.chunks(self.input_dim).map(<[f64]>::to_vec).collect()
    }

    pub fn scale_weights(&mut self, s: f64) {
        for w in &mut self.weight {
            *w *= s;
        }
    }

    fn embed(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim);
        let mut out = vec![0.0; self.embed_dim];
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weight[r * self.input_dim..(r + 1) * self.input_dim];
            *o = row.iter().zip(x).map(|(w, v)| w * v).sum();
        }
        out
    }

    fn forward_pass(&self, episode: &Episode) -> Result<ForwardPass> {
        if episode.support().is_empty() || episode.query().is_empty() {
            return Err(Error::PredictionMismatch("empty episode".into()));
        }
        if episode.support()[0].features.len() != self.input_dim {
            return Err(Error::PredictionMismatch(format!(
                "episode dimension {} vs embedding input {}",
                episode.support()[0].features.len(),
                self.input_dim
            )));
        }
        let k = episode.k();
        let categories = episode.categories();

        // Prototypes of a linear map are the map applied to class mean inputs.
        let mut class_means = vec![vec![0.0; self.input_dim]; k];
        let mut counts = vec![0usize; k];
        for p in episode.support() {
            let pos = categories.position_of(p.label).expect("support label in categories");
            for (m, v) in class_means[pos].iter_mut().zip(p.features.iter()) {
                *m += v;
            }
            counts[pos] += 1;
        }
        for (mean, count) in class_means.iter_mut().zip(&counts) {
            for m in mean.iter_mut() {
                *m /= *count as f64;
            }
        }
        let prototypes: Vec<Vec<f64>> = class_means.iter().map(|m| self.embed(m)).collect();

        let mut embedded_queries = Vec::with_capacity(episode.query().len());
        let mut probs = Vec::with_capacity(episode.query().len());
        let mut label_positions = Vec::with_capacity(episode.query().len());
        for q in episode.query() {
            let u = self.embed(&q.features);
            let mut logits = vec![0.0; k];
            for (c, proto) in prototypes.iter().enumerate() {
                let d2: f64 = u.iter().zip(proto).map(|(a, b)| (a - b) * (a - b)).sum();
                logits[c] = -d2;
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut row: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = row.iter().sum();
            for p in &mut row {
                *p /= z;
            }
            label_positions.push(categories.position_of(q.label).expect("query label in categories"));
            probs.push(row);
            embedded_queries.push(u);
        }
        Ok(ForwardPass { class_means, prototypes, embedded_queries, probs, label_positions })
    }

    /// Prediction probabilities for every query, conditioned on the support
    /// set through the class prototypes.
    pub fn forward(&self, episode: &Episode) -> Result<PredictionBatch> {
        let pass = self.forward_pass(episode)?;
        PredictionBatch::new(episode.categories().classes().to_vec(), pass.probs)
    }

    /// One SGD step on the episode. Returns the pre-update predictions (the
    /// ones the potential update consumes) and the pre-update loss.
    pub fn train_step(&mut self, episode: &Episode) -> Result<(PredictionBatch, f64)> {
        let pass = self.forward_pass(episode)?;
        let k = episode.k();
        let d = self.input_dim;
        let e = self.embed_dim;
        let num_queries = pass.probs.len();
        let inv_q = 1.0 / num_queries as f64;

        // grad = -2 sum_{n,c} g[n][c] (u_n - p_c)(q_n - mean_c)^T
        //      = 2 [ sum_n u_n m_n^T + sum_c p_c r_c^T - sum_c s_c p_c mean_c^T ]
        // with g[n][c] = (prob - onehot)/|Q|, m_n = sum_c g[n][c] mean_c,
        // r_c = sum_n g[n][c] q_n, s_c = sum_n g[n][c]. The sum_n u_n q_n^T
        // term vanishes because every g row sums to zero.
        let mut grad = vec![0.0; e * d];
        let mut r = vec![vec![0.0; d]; k];
        let mut s = vec![0.0; k];
        for (n, q) in episode.query().iter().enumerate() {
            let mut m_n = vec![0.0; d];
            for c in 0..k {
                let mut g = pass.probs[n][c] * inv_q;
                if c == pass.label_positions[n] {
                    g -= inv_q;
                }
                s[c] += g;
                for (acc, v) in r[c].iter_mut().zip(q.features.iter()) {
                    *acc += g * v;
                }
                for (acc, v) in m_n.iter_mut().zip(&pass.class_means[c]) {
                    *acc += g * v;
                }
            }
            let u = &pass.embedded_queries[n];
            for row in 0..e {
                let dst = &mut grad[row * d..(row + 1) * d];
                let ur = u[row];
                for (g, v) in dst.iter_mut().zip(&m_n) {
                    *g += ur * v;
                }
            }
        }
        for c in 0..k {
            let p = &pass.prototypes[c];
            for row in 0..e {
                let dst = &mut grad[row * d..(row + 1) * d];
                let pr = p[row];
                for (g, (rv, mv)) in dst.iter_mut().zip(r[c].iter().zip(&pass.class_means[c])) {
                    *g += pr * (rv - s[c] * mv);
                }
            }
        }

        let mut loss = 0.0;
        for (n, row) in pass.probs.iter().enumerate() {
            loss -= row[pass.label_positions[n]].max(PROB_FLOOR).ln();
        }
        loss *= inv_q;

        for (w, g) in self.weight.iter_mut().zip(&grad) {
            *w -= self.learning_rate * 2.0 * g;
            if !w.is_finite() {
                return Err(Error::NonFinite { context: "weight after SGD step".into(), value: *w });
            }
        }

        let batch = PredictionBatch::new(episode.categories().classes().to_vec(), pass.probs)?;
        Ok((batch, loss))
    }

    /// Loss gradient with respect to the weights, without applying a step.
    pub fn loss_gradient(&self, episode: &Episode) -> Result<Vec<f64>> {
        let mut probe = self.clone();
        // A unit-rate step moves the weights by exactly one gradient.
        probe.learning_rate = 1.0;
        let before = probe.weight.clone();
        probe.train_step(episode)?;
        Ok(before.iter().zip(&probe.weight).map(|(b, a)| b - a).collect())
    }

    /// CSV matrix dump with a `rows,cols` shape header.
    pub fn save_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{},{}", self.embed_dim, self.input_dim)?;
        for row in self.weight.chunks(self.input_dim) {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn load_csv<R: Read>(input: R, learning_rate: f64) -> Result<Self> {
        let reader = BufReader::new(input);
        let mut lines = reader.lines();
        let shape = lines.next().ok_or_else(|| Error::Parse("empty weight file".into()))??;
        let dims: Vec<usize> = shape
            .split(',')
            .map(|v| v.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse("bad shape header".into()))?;
        if dims.len() != 2 {
            return Err(Error::Parse("shape header must be rows,cols".into()));
        }
        let mut rows = Vec::with_capacity(dims[0]);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|v| v.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse("bad weight cell".into()))?;
            rows.push(row);
        }
        if rows.len() != dims[0] || rows.iter().any(|r| r.len() != dims[1]) {
            return Err(Error::Parse("weight matrix does not match shape header".into()));
        }
        Self::from_weights(rows, learning_rate)
    }
}

/// Feature-independent learner that emits fixed per-class confusion rows,
/// renormalized over each episode's categories.
#[derive(Debug, Clone)]
pub struct OracleLearner {
    table: Vec<Vec<f64>>,
}

impl OracleLearner {
    /// `table[true_class][candidate]` is the unnormalized probability mass
    /// assigned to `candidate` for queries of `true_class`.
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::InvalidConfig("empty oracle table".into()));
        }
        for row in &table {
            if row.len() != n {
                return Err(Error::InvalidConfig("oracle table must be square".into()));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidConfig("oracle masses must be finite and nonnegative".into()));
            }
        }
        Ok(OracleLearner { table })
    }

    /// Oracle that classifies perfectly.
    pub fn identity(num_classes: usize) -> Self {
        let table = (0..num_classes)
            .map(|i| (0..num_classes).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        OracleLearner { table }
    }

    /// Oracle that is maximally confused.
    pub fn uniform(num_classes: usize) -> Self {
        OracleLearner { table: vec![vec![1.0; num_classes]; num_classes] }
    }

    pub fn forward(&self, episode: &Episode) -> Result<PredictionBatch> {
        let categories = episode.categories().classes();
        for &c in categories {
            if c.index() >= self.table.len() {
                return Err(Error::OracleMissingClass(c.index()));
            }
        }
        let mut probs = Vec::with_capacity(episode.query().len());
        for q in episode.query() {
            if q.label.index() >= self.table.len() {
                return Err(Error::OracleMissingClass(q.label.index()));
            }
            let row = &self.table[q.label.index()];
            let mut masses: Vec<f64> = categories.iter().map(|c| row[c.index()]).collect();
            let z: f64 = masses.iter().sum();
            if z <= 0.0 {
                return Err(Error::OracleMissingClass(q.label.index()));
            }
            for m in &mut masses {
                *m /= z;
            }
            probs.push(masses);
        }
        PredictionBatch::new(categories.to_vec(), probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::ClassIndexedDataset;
    use crate::rng::stream_rng;
    use crate::samplers::CategorySet;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;

    fn cats(ids: &[usize]) -> CategorySet {
        CategorySet::new(ids.iter().map(|&i| ClassId(i)).collect()).unwrap()
    }

    fn random_dataset(classes: usize, per_class: usize, dim: usize, seed: u64) -> ClassIndexedDataset {
        let mut rng = stream_rng(seed, 0);
        let pools = (0..classes)
            .map(|_| {
                (0..per_class)
                    .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        ClassIndexedDataset::from_pools(pools).unwrap()
    }

    fn random_episode(seed: u64, dim: usize, k: usize, m: usize, n: usize) -> crate::episode::Episode {
        let ds = random_dataset(k, m + n, dim, seed);
        let mut rng = stream_rng(seed, 1);
        let ids: Vec<usize> = (0..k).collect();
        ds.build_episode(&cats(&ids), m, n, &mut rng).unwrap()
    }

    #[test]
    fn forward_two_class_softmax_value() {
        // Construct an episode where the query lands exactly on prototype 0
        // and at squared distance 1 from prototype 1, in the identity map.
        let pools = vec![
            vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]],
        ];
        let ds = ClassIndexedDataset::from_pools(pools).unwrap();
        let mut rng = stream_rng(0, 0);
        let ep = ds.build_episode(&cats(&[0, 1]), 2, 1, &mut rng).unwrap();
        let emb = LinearEmbedding::from_weights(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0.0).unwrap();
        let batch = emb.forward(&ep).unwrap();
        // query of class 0 is at (0,0): d0 = 0, d1 = 1
        let row = &batch.probs()[0];
        assert_relative_eq!(row[0], 0.731_058_578_630_004_9, max_relative = 1e-12);
        assert_relative_eq!(row[1], 0.268_941_421_369_995_1, max_relative = 1e-12);
    }

    #[test]
    fn forward_equidistant_queries_are_uniform() {
        let pools = vec![
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            vec![vec![-1.0, 0.0], vec![-1.0, 0.0]],
        ];
        let ds = ClassIndexedDataset::from_pools(pools).unwrap();
        let mut rng = stream_rng(0, 0);
        let ep = ds.build_episode(&cats(&[0, 1]), 1, 1, &mut rng).unwrap();
        let emb = LinearEmbedding::from_weights(vec![vec![0.0, 1.0], vec![0.0, 0.5]], 0.0).unwrap();
        // W zeroes the separating coordinate, leaving all queries equidistant.
        let batch = emb.forward(&ep).unwrap();
        for row in batch.probs() {
            assert_relative_eq!(row[0], 0.5, max_relative = 1e-12);
            assert_relative_eq!(row[1], 0.5, max_relative = 1e-12);
        }
    }

    #[test]
    fn episode_loss_reference_values() {
        let ep = random_episode(3, 4, 2, 2, 1);
        let perfect = OracleLearner::identity(2).forward(&ep).unwrap();
        let loss = episode_loss(&perfect, &ep).unwrap();
        assert!(loss < 1e-10);

        let uniform = OracleLearner::uniform(2).forward(&ep).unwrap();
        let loss = episode_loss(&uniform, &ep).unwrap();
        assert_relative_eq!(loss, 2.0f64.ln(), max_relative = 1e-12);

        // two queries with p(true) = 0.5 and 0.25
        let rows = vec![vec![0.5, 0.5], vec![0.75, 0.25]];
        let classes = ep.categories().classes().to_vec();
        // query 0 belongs to class 0, query 1 to class 1 (one query per class)
        let batch = PredictionBatch::new(classes, rows).unwrap();
        let loss = episode_loss(&batch, &ep).unwrap();
        assert_relative_eq!(loss, 1.039_720_770_839_917_9, max_relative = 1e-12);
    }

    #[test]
    fn uniform_loss_is_log_k() {
        let ep = random_episode(5, 6, 5, 2, 3);
        let uniform = OracleLearner::uniform(5).forward(&ep).unwrap();
        let loss = episode_loss(&uniform, &ep).unwrap();
        assert_relative_eq!(loss, 5.0f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn zero_learning_rate_leaves_weights_unchanged() {
        let ep = random_episode(11, 4, 3, 2, 2);
        let mut rng = stream_rng(4, 2);
        let mut emb = LinearEmbedding::new(3, 4, 0.0, &mut rng).unwrap();
        let before = emb.weight_rows();
        emb.train_step(&ep).unwrap();
        assert_eq!(before, emb.weight_rows());
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        for trial in 0..10 {
            let ep = random_episode(100 + trial, 4, 3, 2, 2);
            let mut rng = stream_rng(trial, 5);
            let emb = LinearEmbedding::new(3, 4, 0.1, &mut rng).unwrap();
            let analytic = emb.loss_gradient(&ep).unwrap();

            let h = 1e-5;
            let rows = emb.weight_rows();
            let mut numeric = Vec::with_capacity(analytic.len());
            for r in 0..3 {
                for c in 0..4 {
                    let mut plus = rows.clone();
                    plus[r][c] += h;
                    let mut minus = rows.clone();
                    minus[r][c] -= h;
                    let lp = episode_loss(
                        &LinearEmbedding::from_weights(plus, 0.0).unwrap().forward(&ep).unwrap(),
                        &ep,
                    )
                    .unwrap();
                    let lm = episode_loss(
                        &LinearEmbedding::from_weights(minus, 0.0).unwrap().forward(&ep).unwrap(),
                        &ep,
                    )
                    .unwrap();
                    numeric.push((lp - lm) / (2.0 * h));
                }
            }
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
            let rel = norm(&diff) / norm(&numeric).max(1e-12);
            assert!(rel < 1e-4, "trial {trial}: relative gradient error {rel}");
        }
    }

    #[test]
    fn repeated_steps_reduce_loss_below_log_k() {
        let ep = random_episode(77, 6, 3, 3, 3);
        let mut rng = stream_rng(77, 9);
        let mut emb = LinearEmbedding::new(4, 6, 0.05, &mut rng).unwrap();
        let (_, first_loss) = emb.train_step(&ep).unwrap();
        let mut last = first_loss;
        for _ in 0..300 {
            let (_, loss) = emb.train_step(&ep).unwrap();
            last = loss;
        }
        assert!(last < 3.0f64.ln(), "loss {last} never fell below log K");
        assert!(last < first_loss);
    }

    #[test]
    fn scaling_weights_preserves_argmax() {
        let ep = random_episode(13, 5, 4, 2, 3);
        let mut rng = stream_rng(13, 3);
        let mut emb = LinearEmbedding::new(4, 5, 0.0, &mut rng).unwrap();
        let before = emb.forward(&ep).unwrap();
        emb.scale_weights(3.7);
        let after = emb.forward(&ep).unwrap();
        for (a, b) in before.probs().iter().zip(after.probs()) {
            let argmax = |row: &[f64]| {
                row.iter().enumerate().max_by(|x, y| x.1.partial_cmp(y.1).unwrap()).unwrap().0
            };
            assert_eq!(argmax(a), argmax(b));
        }
    }

    #[test]
    fn oracle_rows_renormalize_and_ignore_features() {
        let ep = random_episode(21, 3, 3, 1, 2);
        let mut table = vec![vec![0.0; 3]; 3];
        table[0] = vec![0.6, 0.3, 0.3]; // renormalizes to 0.5, 0.25, 0.25
        table[1] = vec![0.0, 1.0, 0.0];
        table[2] = vec![0.2, 0.2, 0.6];
        let oracle = OracleLearner::new(table).unwrap();
        let batch = oracle.forward(&ep).unwrap();
        for (q, row) in ep.query().iter().zip(batch.probs()) {
            if q.label == ClassId(0) {
                assert_relative_eq!(row[0], 0.5, max_relative = 1e-12);
            }
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        // identical for every query of the same class regardless of features
        let rows0: Vec<&Vec<f64>> = ep
            .query()
            .iter()
            .zip(batch.probs())
            .filter(|(q, _)| q.label == ClassId(0))
            .map(|(_, r)| r)
            .collect();
        assert!(rows0.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn oracle_missing_class_errors() {
        let ep = random_episode(22, 3, 3, 1, 1);
        let oracle = OracleLearner::identity(2); // table too small for class 2
        assert!(oracle.forward(&ep).is_err());
    }

    #[test]
    fn weight_csv_roundtrip() {
        let emb = LinearEmbedding::from_weights(
            vec![vec![0.25, -1.5, 3.0], vec![0.125, 2.0, -0.75]],
            0.01,
        )
        .unwrap();
        let mut buf = Vec::new();
        emb.save_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("2,3\n"));
        let loaded = LinearEmbedding::load_csv(&buf[..], 0.01).unwrap();
        assert_eq!(loaded.weight_rows(), emb.weight_rows());
    }

    #[test]
    fn prediction_batch_validation() {
        assert!(PredictionBatch::new(vec![ClassId(0), ClassId(1)], vec![vec![0.7, 0.2]]).is_err());
        assert!(PredictionBatch::new(vec![ClassId(0), ClassId(1)], vec![vec![0.7]]).is_err());
        assert!(PredictionBatch::new(vec![ClassId(0), ClassId(1)], vec![vec![1.2, -0.2]]).is_err());
        assert!(PredictionBatch::new(vec![ClassId(0), ClassId(1)], vec![vec![0.5, 0.5]]).is_ok());
    }
}
