use super::{Metric, NeighborSet};

#[derive(Debug, Clone)]
struct KdNode {
    start: usize,
    end: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    children: Option<(usize, usize)>,
}

/// Axis-aligned tree over the training rows, split at the median of the
/// widest dimension.
#[derive(Debug, Clone)]
pub struct KdTree {
    order: Vec<usize>,
    nodes: Vec<KdNode>,
}

impl KdTree {
    pub fn build(rows: &[Vec<f64>], leaf_size: usize) -> Self {
        let mut tree = KdTree {
            order: (0..rows.len()).collect(),
            nodes: Vec::new(),
        };
        tree.build_node(rows, 0, rows.len(), leaf_size.max(1));
        tree
    }

    fn build_node(&mut self, rows: &[Vec<f64>], start: usize, end: usize, leaf: usize) -> usize {
        let d = rows[0].len();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &i in &self.order[start..end] {
            for (j, &v) in rows[i].iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let (dim, spread) = (0..d)
            .map(|j| (j, hi[j] - lo[j]))
            .fold((0, 0.0), |best, c| if c.1 > best.1 { c } else { best });
        let slot = self.nodes.len();
        self.nodes.push(KdNode {
            start,
            end,
            lo,
            hi,
            children: None,
        });
        if end - start <= leaf || spread == 0.0 {
            return slot;
        }
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            rows[a][dim].total_cmp(&rows[b][dim]).then(a.cmp(&b))
        });
        let left = self.build_node(rows, start, mid, leaf);
        let right = self.build_node(rows, mid, end, leaf);
        self.nodes[slot].children = Some((left, right));
        slot
    }

    /// Smallest possible distance from `x` to any point inside the node box.
    /// Uses the same per-term function and summation order as the exact
    /// distance, so it never exceeds a computed point distance.
    fn lower_bound(&self, node: usize, x: &[f64], metric: &Metric) -> f64 {
        let n = &self.nodes[node];
        x.iter()
            .zip(n.lo.iter().zip(&n.hi))
            .map(|(&q, (&lo, &hi))| {
                if q < lo {
                    metric.term(lo - q)
                } else if q > hi {
                    metric.term(q - hi)
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn search(&self, rows: &[Vec<f64>], x: &[f64], metric: &Metric, set: &mut NeighborSet) {
        let bound = self.lower_bound(0, x, metric);
        self.visit(0, bound, rows, x, metric, set);
    }

    fn visit(
        &self,
        node: usize,
        bound: f64,
        rows: &[Vec<f64>],
        x: &[f64],
        metric: &Metric,
        set: &mut NeighborSet,
    ) {
        if bound > set.worst() {
            return;
        }
        let n = &self.nodes[node];
        match n.children {
            None => {
                for &i in &self.order[n.start..n.end] {
                    set.offer(metric.pow_dist(&rows[i], x), i);
                }
            }
            Some((l, r)) => {
                let bl = self.lower_bound(l, x, metric);
                let br = self.lower_bound(r, x, metric);
                let (first, second) = if br < bl {
                    ((r, br), (l, bl))
                } else {
                    ((l, bl), (r, br))
                };
                self.visit(first.0, first.1, rows, x, metric, set);
                self.visit(second.0, second.1, rows, x, metric, set);
            }
        }
    }
}
