//! Minimal kd-tree for k-nearest-neighbour queries over dense points.

/// Static kd-tree over `n` points of dimension `dim`, median-split,
/// axis cycling by depth. Points are borrowed as a flat row-major slice
/// at query time; the tree itself stores only a permutation.
#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    // Permutation of point indices; each build range stores its median
    // point at the range midpoint, so the array encodes the whole tree.
    order: Vec<u32>,
}

impl KdTree {
    pub fn build(points: &[f64], dim: usize) -> Self {
        assert!(dim > 0 && points.len() % dim == 0);
        let n = points.len() / dim;
        let mut order: Vec<u32> = (0..n as u32).collect();
        if n > 0 {
            build_range(points, dim, &mut order, 0);
        }
        KdTree { dim, order }
    }

    /// Indices of the `k` nearest points to `query`, ordered by
    /// (squared distance, index). Ties break toward the lower index.
    pub fn nearest(&self, points: &[f64], query: &[f64], k: usize) -> Vec<u32> {
        assert_eq!(query.len(), self.dim);
        let mut best: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
        if k > 0 && !self.order.is_empty() {
            self.search(points, query, k, 0, self.order.len(), 0, &mut best);
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        points: &[f64],
        query: &[f64],
        k: usize,
        lo: usize,
        hi: usize,
        depth: usize,
        best: &mut Vec<(f64, u32)>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = &points[idx as usize * self.dim..(idx as usize + 1) * self.dim];
        let d2: f64 = p
            .iter()
            .zip(query.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        push_candidate(best, k, (d2, idx));

        let axis = depth % self.dim;
        let delta = query[axis] - p[axis];
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(points, query, k, near.0, near.1, depth + 1, best);
        let worst = best.last().map(|(d, _)| *d).unwrap_or(f64::INFINITY);
        if best.len() < k || delta * delta <= worst {
            self.search(points, query, k, far.0, far.1, depth + 1, best);
        }
    }
}

fn push_candidate(best: &mut Vec<(f64, u32)>, k: usize, cand: (f64, u32)) {
    let pos = best.partition_point(|&(d, i)| (d, i) < cand);
    best.insert(pos, cand);
    if best.len() > k {
        best.pop();
    }
}

fn build_range(points: &[f64], dim: usize, order: &mut [u32], depth: usize) {
    let n = order.len();
    if n <= 1 {
        return;
    }
    let axis = depth % dim;
    let mid = n / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize * dim + axis]
            .total_cmp(&points[b as usize * dim + axis])
            .then(a.cmp(&b))
    });
    let (left, rest) = order.split_at_mut(mid);
    build_range(points, dim, left, depth + 1);
    build_range(points, dim, &mut rest[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn brute_force(points: &[f64], dim: usize, query: &[f64], k: usize) -> Vec<u32> {
        let n = points.len() / dim;
        let mut all: Vec<(f64, u32)> = (0..n)
            .map(|i| {
                let d2 = points[i * dim..(i + 1) * dim]
                    .iter()
                    .zip(query)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d2, i as u32)
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.truncate(k);
        all.into_iter().map(|(_, i)| i).collect()
    }

    #[test]
    fn matches_brute_force_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dims in 1..=4usize {
            for _ in 0..30 {
                let n = rng.random_range(1..120usize);
                let points: Vec<f64> = (0..n * dims).map(|_| rng.random_range(-5.0..5.0)).collect();
                let tree = KdTree::build(&points, dims);
                let query: Vec<f64> = (0..dims).map(|_| rng.random_range(-6.0..6.0)).collect();
                let k = rng.random_range(1..=5usize).min(n);
                assert_eq!(
                    tree.nearest(&points, &query, k),
                    brute_force(&points, dims, &query, k)
                );
            }
        }
    }

    #[test]
    fn duplicate_points_break_ties_by_index() {
        let points = vec![1.0, 1.0, 1.0, 2.0];
        let tree = KdTree::build(&points, 1);
        assert_eq!(tree.nearest(&points, &[1.0], 2), vec![0, 1]);
    }
}
