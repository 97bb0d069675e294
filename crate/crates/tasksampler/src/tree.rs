//! Flat segment tree over nonnegative weights, supporting point updates and
//! inverse-CDF sampling in O(log n). Backs the pair draw of the greedy
//! class-pair sampler, where only the pairs of the current episode change
//! between draws.

#[derive(Debug, Clone)]
pub(crate) struct SumTree {
    /// Number of leaves, rounded up to a power of two.
    base: usize,
    len: usize,
    /// 1-indexed heap layout; node i has children 2i and 2i+1.
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(weights: &[f64]) -> Self {
        let len = weights.len();
        let base = len.next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * base];
        nodes[base..base + len].copy_from_slice(weights);
        for i in (1..base).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        SumTree { base, len, nodes }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, index: usize) -> f64 {
        self.nodes[self.base + index]
    }

    pub fn set(&mut self, index: usize, weight: f64) {
        debug_assert!(index < self.len && weight >= 0.0 && weight.is_finite());
        let mut i = self.base + index;
        self.nodes[i] = weight;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// Index of the leaf whose CDF segment contains `u * total`, for u in [0, 1).
    ///
    /// Descends the tree accumulating left-subtree sums. Floating-point
    /// round-off can land the walk on a zero-weight leaf at a segment
    /// boundary; in that case the nearest positive leaf is returned.
    pub fn sample(&self, u: f64) -> usize {
        debug_assert!(self.total() > 0.0, "sampling from an all-zero tree");
        let mut target = u * self.total();
        let mut i = 1;
        while i < self.base {
            let left = self.nodes[2 * i];
            if target < left {
                i = 2 * i;
            } else {
                target -= left;
                i = 2 * i + 1;
            }
        }
        let mut index = i - self.base;
        if index >= self.len || self.nodes[self.base + index] <= 0.0 {
            index = self.nearest_positive(index.min(self.len - 1));
        }
        index
    }

    fn nearest_positive(&self, from: usize) -> usize {
        for i in (0..=from).rev() {
            if self.nodes[self.base + i] > 0.0 {
                return i;
            }
        }
        for i in from + 1..self.len {
            if self.nodes[self.base + i] > 0.0 {
                return i;
            }
        }
        panic!("sampling from an all-zero tree");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_updates() {
        let mut t = SumTree::new(&[1.0, 2.0, 3.0]);
        assert_eq!(t.total(), 6.0);
        t.set(1, 5.0);
        assert_eq!(t.total(), 9.0);
        assert_eq!(t.get(1), 5.0);
    }

    #[test]
    fn sample_hits_cdf_segments() {
        let t = SumTree::new(&[1.0, 2.0, 1.0]);
        assert_eq!(t.sample(0.0), 0);
        assert_eq!(t.sample(0.249), 0);
        assert_eq!(t.sample(0.26), 1);
        assert_eq!(t.sample(0.74), 1);
        assert_eq!(t.sample(0.76), 2);
        assert_eq!(t.sample(0.999), 2);
    }

    #[test]
    fn sample_skips_zero_weights() {
        let t = SumTree::new(&[0.0, 1.0, 0.0, 2.0]);
        for u in [0.0, 0.1, 0.33, 0.34, 0.9, 0.999_999] {
            let i = t.sample(u);
            assert!(t.get(i) > 0.0, "u={u} landed on zero-weight leaf {i}");
        }
    }

    #[test]
    fn single_leaf() {
        let t = SumTree::new(&[2.5]);
        assert_eq!(t.sample(0.7), 0);
    }
}
