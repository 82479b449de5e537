//! k-nearest neighbours with brute-force, kd-tree and ball-tree search.
//!
//! All backends rank candidates by `(distance, training index)` and work on
//! the Minkowski sum `Σ|xᵢ − yᵢ|ᵖ` without the final root, so the tree
//! searches return exactly the neighbour set of the brute scan.

use super::spec::ParamReader;
use super::{ClassifierError, Family, RowPredictor};
use crate::label::TransmitterLabel;
use crate::preprocess::FeatureMatrix;

mod balltree;
mod kdtree;

pub use balltree::BallTree;
pub use kdtree::KdTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Auto,
    BallTree,
    KdTree,
    Brute,
}

/// Dimension up to which `auto` selects the kd-tree.
pub const AUTO_KD_MAX_DIM: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct KnnSettings {
    pub n_neighbors: usize,
    pub algorithm: Algorithm,
    pub leaf_size: usize,
    pub p: f64,
}

impl KnnSettings {
    pub(crate) fn read(r: &ParamReader<'_>) -> Result<Self, ClassifierError> {
        let invalid = |key: &str, expected: &str| ClassifierError::InvalidParam {
            family: Family::KNeighbors,
            key: key.into(),
            value: r.raw(key).unwrap_or("").into(),
            expected: expected.into(),
        };
        let n_neighbors = r.usize("n_neighbors", 5)?;
        if n_neighbors == 0 {
            return Err(invalid("n_neighbors", "at least 1"));
        }
        let leaf_size = r.usize("leaf_size", 30)?;
        if leaf_size == 0 {
            return Err(invalid("leaf_size", "at least 1"));
        }
        let p = r.f64("p", 2.0)?;
        if p < 1.0 {
            return Err(invalid("p", "a value >= 1"));
        }
        Ok(Self {
            n_neighbors,
            algorithm: r.choice(
                "algorithm",
                &[
                    ("auto", Algorithm::Auto),
                    ("ball_tree", Algorithm::BallTree),
                    ("kd_tree", Algorithm::KdTree),
                    ("brute", Algorithm::Brute),
                ],
                Algorithm::Auto,
            )?,
            leaf_size,
            p,
        })
    }
}

/// Minkowski metric of order `p`, evaluated without the final root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    p: f64,
    int_p: Option<i32>,
}

impl Metric {
    pub fn new(p: f64) -> Self {
        let int_p = (p.fract() == 0.0 && p <= 64.0).then_some(p as i32);
        Self { p, int_p }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn term(&self, diff: f64) -> f64 {
        let a = diff.abs();
        match self.int_p {
            Some(1) => a,
            Some(k) => a.powi(k),
            None => a.powf(self.p),
        }
    }

    #[inline]
    pub fn pow_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| self.term(x - y)).sum()
    }

    pub fn root(&self, pow: f64) -> f64 {
        match self.int_p {
            Some(1) => pow,
            Some(2) => pow.sqrt(),
            _ => pow.powf(1.0 / self.p),
        }
    }
}

/// The k best candidates so far, sorted by `(distance, index)`.
#[derive(Debug, Clone)]
pub struct NeighborSet {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl NeighborSet {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    /// Distance a candidate must not exceed to enter the set.
    pub fn worst(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.k - 1].0
        }
    }

    pub fn offer(&mut self, dist: f64, index: usize) {
        let key = (dist, index);
        if self.items.len() == self.k {
            let last = self.items[self.k - 1];
            if (key.0, key.1) >= (last.0, last.1) {
                return;
            }
        }
        let pos = self
            .items
            .partition_point(|&(d, i)| (d, i) < (key.0, key.1));
        self.items.insert(pos, key);
        self.items.truncate(self.k);
    }

    pub fn indices(&self) -> Vec<usize> {
        self.items.iter().map(|&(_, i)| i).collect()
    }
}

#[derive(Debug, Clone)]
enum Index {
    Brute,
    Kd(KdTree),
    Ball(BallTree),
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    rows: Vec<Vec<f64>>,
    labels: Vec<TransmitterLabel>,
    k: usize,
    metric: Metric,
    index: Index,
}

impl KnnModel {
    pub fn fit(train: &FeatureMatrix, settings: &KnnSettings) -> Result<Self, ClassifierError> {
        super::check_training(train)?;
        let n = train.len();
        if settings.n_neighbors > n {
            return Err(ClassifierError::TooManyNeighbors {
                k: settings.n_neighbors,
                n,
            });
        }
        let metric = Metric::new(settings.p);
        let algorithm = match settings.algorithm {
            Algorithm::Auto if train.feature_dim <= AUTO_KD_MAX_DIM => Algorithm::KdTree,
            Algorithm::Auto => Algorithm::Brute,
            other => other,
        };
        let index = match algorithm {
            Algorithm::KdTree => Index::Kd(KdTree::build(&train.rows, settings.leaf_size)),
            Algorithm::BallTree => {
                Index::Ball(BallTree::build(&train.rows, settings.leaf_size, metric))
            }
            _ => Index::Brute,
        };
        Ok(Self {
            rows: train.rows.clone(),
            labels: train.labels.clone(),
            k: settings.n_neighbors,
            metric,
            index,
        })
    }

    /// Indices of the k nearest training rows, nearest first.
    pub fn neighbors(&self, x: &[f64]) -> Vec<usize> {
        let mut set = NeighborSet::new(self.k);
        match &self.index {
            Index::Brute => brute_search(&self.rows, x, &self.metric, &mut set),
            Index::Kd(t) => t.search(&self.rows, x, &self.metric, &mut set),
            Index::Ball(t) => t.search(&self.rows, x, &self.metric, &mut set),
        }
        set.indices()
    }
}

pub fn brute_search(rows: &[Vec<f64>], x: &[f64], metric: &Metric, set: &mut NeighborSet) {
    for (i, r) in rows.iter().enumerate() {
        set.offer(metric.pow_dist(r, x), i);
    }
}

impl RowPredictor for KnnModel {
    fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    fn predict_row(&self, x: &[f64]) -> TransmitterLabel {
        let nn = self.neighbors(x);
        let eve = nn.iter().filter(|&&i| self.labels[i].is_eve()).count();
        if 2 * eve > nn.len() {
            TransmitterLabel::Eve
        } else {
            TransmitterLabel::Bob
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{fit, predict, ClassifierSpec, FittedModel};
    use crate::label::TransmitterLabel::{Bob as B, Eve as E};
    use crate::rng::stream_rng;
    use rand::Rng;

    fn random_matrix(seed: u64, n: usize, d: usize, grid: bool) -> FeatureMatrix {
        let mut rng = stream_rng(seed, 0);
        let rows = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        if grid {
                            rng.random_range(0..4) as f64
                        } else {
                            rng.random_range(-1.0..1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let mut labels: Vec<_> = (0..n)
            .map(|_| if rng.random_bool(0.5) { E } else { B })
            .collect();
        labels[0] = B;
        labels[1] = E;
        FeatureMatrix::new(rows, labels).unwrap()
    }

    fn model(train: &FeatureMatrix, k: usize, algorithm: &str, p: f64, leaf: usize) -> KnnModel {
        let spec = ClassifierSpec::new(Family::KNeighbors)
            .with("n_neighbors", k)
            .with("algorithm", algorithm)
            .with("p", p)
            .with("leaf_size", leaf);
        match fit(&spec, train, 0).unwrap() {
            FittedModel::Knn(m) => m,
            _ => unreachable!(),
        }
    }

    #[test]
    fn query_on_training_point_returns_its_label() {
        let train = random_matrix(1, 30, 3, false);
        for alg in ["brute", "kd_tree", "ball_tree"] {
            let m = model(&train, 1, alg, 2.0, 4);
            for (r, &l) in train.rows.iter().zip(&train.labels) {
                assert_eq!(m.predict_row(r), l);
            }
        }
    }

    #[test]
    fn trees_match_brute_neighbor_lists() {
        for (case, p) in [1.0, 2.0, 3.0, 4.0, 5.0, 1.5].into_iter().enumerate() {
            for grid in [false, true] {
                let train = random_matrix(case as u64 * 7 + grid as u64, 200, 3, grid);
                let queries = random_matrix(99 + case as u64, 50, 3, grid);
                let brute = model(&train, 5, "brute", p, 1);
                for leaf in [1, 4, 30] {
                    let kd = model(&train, 5, "kd_tree", p, leaf);
                    let ball = model(&train, 5, "ball_tree", p, leaf);
                    for q in queries.rows.iter().chain(&train.rows) {
                        let want = brute.neighbors(q);
                        assert_eq!(kd.neighbors(q), want, "kd p={p} leaf={leaf}");
                        assert_eq!(ball.neighbors(q), want, "ball p={p} leaf={leaf}");
                    }
                }
            }
        }
    }

    #[test]
    fn distance_ties_prefer_lower_index() {
        let train =
            FeatureMatrix::new(vec![vec![1.0], vec![-1.0], vec![1.0]], vec![E, B, E]).unwrap();
        for alg in ["brute", "kd_tree", "ball_tree"] {
            let m = model(&train, 2, alg, 2.0, 1);
            assert_eq!(m.neighbors(&[0.0]), vec![0, 1]);
            // One vote each: the tie goes to Bob.
            assert_eq!(m.predict_row(&[0.0]), B);
        }
    }

    #[test]
    fn too_many_neighbors_is_rejected() {
        let train = FeatureMatrix::new(vec![vec![0.0], vec![1.0]], vec![B, E]).unwrap();
        let spec = ClassifierSpec::new(Family::KNeighbors).with("n_neighbors", 3);
        assert_eq!(
            fit(&spec, &train, 0).unwrap_err(),
            ClassifierError::TooManyNeighbors { k: 3, n: 2 }
        );
        assert!(ClassifierSpec::new(Family::KNeighbors)
            .with("p", 0.5)
            .validate()
            .is_err());
    }

    #[test]
    fn auto_switches_on_dimension() {
        let low = random_matrix(3, 20, AUTO_KD_MAX_DIM, false);
        let high = random_matrix(3, 20, AUTO_KD_MAX_DIM + 1, false);
        assert!(matches!(
            model(&low, 2, "auto", 2.0, 10).index,
            Index::Kd(_)
        ));
        assert!(matches!(
            model(&high, 2, "auto", 2.0, 10).index,
            Index::Brute
        ));
        let m = FittedModel::Knn(model(&high, 2, "auto", 2.0, 10));
        assert_eq!(predict(&m, &high).unwrap().len(), 20);
    }

    #[test]
    fn neighbor_set_keeps_k_best() {
        let mut s = NeighborSet::new(2);
        assert_eq!(s.worst(), f64::INFINITY);
        for (d, i) in [(3.0, 0), (1.0, 1), (2.0, 2), (1.0, 3)] {
            s.offer(d, i);
        }
        assert_eq!(s.indices(), vec![1, 3]);
        assert_eq!(s.worst(), 1.0);
    }
}
