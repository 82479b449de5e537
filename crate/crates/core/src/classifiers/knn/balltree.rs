use super::{Metric, NeighborSet};

/// Relative and absolute slack on the triangle-inequality bound, covering
/// rounding in the root and centroid distances.
const REL_SLACK: f64 = 1e-9;
const ABS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
struct BallNode {
    start: usize,
    end: usize,
    centroid: Vec<f64>,
    radius: f64,
    children: Option<(usize, usize)>,
}

/// Metric tree of nested balls around centroids.
#[derive(Debug, Clone)]
pub struct BallTree {
    order: Vec<usize>,
    nodes: Vec<BallNode>,
}

impl BallTree {
    pub fn build(rows: &[Vec<f64>], leaf_size: usize, metric: Metric) -> Self {
        let mut tree = BallTree {
            order: (0..rows.len()).collect(),
            nodes: Vec::new(),
        };
        tree.build_node(rows, 0, rows.len(), leaf_size.max(1), &metric);
        tree
    }

    fn build_node(
        &mut self,
        rows: &[Vec<f64>],
        start: usize,
        end: usize,
        leaf: usize,
        metric: &Metric,
    ) -> usize {
        let d = rows[0].len();
        let count = (end - start) as f64;
        let mut centroid = vec![0.0; d];
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &i in &self.order[start..end] {
            for (j, &v) in rows[i].iter().enumerate() {
                centroid[j] += v;
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        centroid.iter_mut().for_each(|c| *c /= count);
        let radius = self.order[start..end]
            .iter()
            .map(|&i| metric.root(metric.pow_dist(&rows[i], &centroid)))
            .fold(0.0, f64::max);
        let (dim, spread) = (0..d)
            .map(|j| (j, hi[j] - lo[j]))
            .fold((0, 0.0), |best, c| if c.1 > best.1 { c } else { best });
        let slot = self.nodes.len();
        self.nodes.push(BallNode {
            start,
            end,
            centroid,
            radius,
            children: None,
        });
        if end - start <= leaf || spread == 0.0 {
            return slot;
        }
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            rows[a][dim].total_cmp(&rows[b][dim]).then(a.cmp(&b))
        });
        let left = self.build_node(rows, start, mid, leaf, metric);
        let right = self.build_node(rows, mid, end, leaf, metric);
        self.nodes[slot].children = Some((left, right));
        slot
    }

    /// Lower bound on the root distance from `x` to the ball.
    fn lower_bound(&self, node: usize, x: &[f64], metric: &Metric) -> f64 {
        let n = &self.nodes[node];
        metric.root(metric.pow_dist(x, &n.centroid)) - n.radius
    }

    fn prunable(bound: f64, set: &NeighborSet, metric: &Metric) -> bool {
        let worst = set.worst();
        worst.is_finite() && bound > metric.root(worst) * (1.0 + REL_SLACK) + ABS_SLACK
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
        if Self::prunable(bound, set, metric) {
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
