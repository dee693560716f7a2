//! Static range-maximum queries over `f64` heights.

/// Sparse table: `levels[k][i]` is the max of `values[i .. i + 2^k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTable {
    levels: Vec<Vec<f64>>,
}

impl SparseTable {
    pub fn new(values: &[f64]) -> Self {
        let n = values.len();
        let mut levels = vec![values.to_vec()];
        let mut width = 1;
        while 2 * width <= n {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = (0..=n - 2 * width)
                .map(|i| prev[i].max(prev[i + width]))
                .collect();
            levels.push(next);
            width *= 2;
        }
        SparseTable { levels }
    }

    pub fn len(&self) -> usize {
        self.levels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Max over the half-open index range `lo..hi`; `None` when empty.
    pub fn max(&self, lo: usize, hi: usize) -> Option<f64> {
        if lo >= hi || hi > self.len() {
            return None;
        }
        let k = (hi - lo).ilog2() as usize;
        let row = &self.levels[k];
        Some(row[lo].max(row[hi - (1 << k)]))
    }

    /// Smallest index `i` with `values[i] > threshold`.
    pub fn first_above(&self, threshold: f64) -> Option<usize> {
        let n = self.len();
        if self.max(0, n)? <= threshold {
            return None;
        }
        // prefix maxima are monotone in the right end
        let (mut lo, mut hi) = (0usize, n);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.max(0, mid).is_some_and(|m| m > threshold) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_linear_scan_on_all_ranges() {
        let vals = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0];
        let t = SparseTable::new(&vals);
        for lo in 0..vals.len() {
            for hi in lo..=vals.len() {
                let naive = vals[lo..hi].iter().copied().reduce(f64::max);
                assert_eq!(t.max(lo, hi), naive, "{lo}..{hi}");
            }
        }
    }

    #[test]
    fn first_above_finds_leftmost() {
        let vals = [1.0, 2.0, 7.0, 3.0, 8.0];
        let t = SparseTable::new(&vals);
        assert_eq!(t.first_above(2.5), Some(2));
        assert_eq!(t.first_above(0.5), Some(0));
        assert_eq!(t.first_above(7.0), Some(4));
        assert_eq!(t.first_above(8.0), None);
        assert_eq!(SparseTable::new(&[]).first_above(0.0), None);
    }
}
