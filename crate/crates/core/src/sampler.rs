//! Categorical sampling by cumulative-weight inversion over a Fenwick tree,
//! so a single weight can change in `O(log n)` without a full rebuild.

#[derive(Debug, Clone)]
pub struct CategoricalSampler {
    tree: Vec<f64>,
    weights: Vec<f64>,
    top_bit: usize,
}

impl CategoricalSampler {
    pub fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let mut s = CategoricalSampler {
            tree: vec![0.0; n + 1],
            weights: Vec::new(),
            top_bit: if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) },
        };
        s.rebuild(weights);
        s
    }

    /// Replaces every weight.
    pub fn rebuild(&mut self, weights: &[f64]) {
        let n = weights.len();
        debug_assert_eq!(n + 1, self.tree.len());
        self.weights.clear();
        self.weights.extend_from_slice(weights);
        self.tree[0] = 0.0;
        self.tree[1..].copy_from_slice(weights);
        for i in 1..=n {
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                self.tree[parent] += self.tree[i];
            }
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Adds `delta` to the weight of item `i`.
    pub fn add(&mut self, i: usize, delta: f64) {
        self.weights[i] += delta;
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += delta;
            k += k & k.wrapping_neg();
        }
    }

    pub fn total(&self) -> f64 {
        let mut k = self.len();
        let mut sum = 0.0;
        while k > 0 {
            sum += self.tree[k];
            k &= k - 1;
        }
        sum
    }

    /// Item whose cumulative interval contains `u * total`, for `u` in `[0, 1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut target = u * self.total();
        let mut pos = 0;
        let mut mask = self.top_bit;
        while mask > 0 {
            let next = pos + mask;
            if next < self.tree.len() && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            mask >>= 1;
        }
        // rounding can push the target past the last item
        pos.min(self.len() - 1)
    }
}
