//! Random forest of CART trees grown on bootstrap resamples.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::spec::ParamReader;
use super::{ClassifierError, RowPredictor};
use crate::label::TransmitterLabel;
use crate::preprocess::FeatureMatrix;
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Gini,
    Entropy,
}

impl Criterion {
    /// Impurity of a node holding `bob` and `eve` samples.
    pub fn impurity(self, bob: usize, eve: usize) -> f64 {
        let n = (bob + eve) as f64;
        if n == 0.0 {
            return 0.0;
        }
        let (pb, pe) = (bob as f64 / n, eve as f64 / n);
        match self {
            Criterion::Gini => 1.0 - pb * pb - pe * pe,
            Criterion::Entropy => {
                let h = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
                h(pb) + h(pe)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxFeatures {
    All,
    Sqrt,
    Log2,
}

impl MaxFeatures {
    pub fn count(self, d: usize) -> usize {
        let d_f = d as f64;
        let n = match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => d_f.sqrt().ceil() as usize,
            MaxFeatures::Log2 => d_f.log2().ceil() as usize,
        };
        n.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestSettings {
    pub n_estimators: usize,
    pub criterion: Criterion,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl ForestSettings {
    pub(crate) fn read(r: &ParamReader<'_>) -> Result<Self, ClassifierError> {
        let invalid = |key: &str, expected: &str| ClassifierError::InvalidParam {
            family: super::Family::RandomForest,
            key: key.into(),
            value: r.raw(key).unwrap_or("").into(),
            expected: expected.into(),
        };
        let n_estimators = r.usize("n_estimators", 100)?;
        if n_estimators == 0 {
            return Err(invalid("n_estimators", "at least 1"));
        }
        let min_samples_leaf = r.usize("min_samples_leaf", 1)?;
        if min_samples_leaf == 0 {
            return Err(invalid("min_samples_leaf", "at least 1"));
        }
        let mut min_samples_split = r.usize("min_samples_split", 2)?;
        if min_samples_split < 2 {
            log::warn!(
                "min_samples_split={min_samples_split} is below 2 for a CART split; using 2"
            );
            min_samples_split = 2;
        }
        Ok(Self {
            n_estimators,
            criterion: r.choice(
                "criterion",
                &[("gini", Criterion::Gini), ("entropy", Criterion::Entropy)],
                Criterion::Gini,
            )?,
            min_samples_split,
            min_samples_leaf,
            max_features: r.choice(
                "max_features",
                &[
                    ("none", MaxFeatures::All),
                    ("auto", MaxFeatures::Sqrt),
                    ("sqrt", MaxFeatures::Sqrt),
                    ("log2", MaxFeatures::Log2),
                ],
                MaxFeatures::Sqrt,
            )?,
            bootstrap: r.bool("bootstrap", true)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        label: TransmitterLabel,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> TransmitterLabel {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { label } => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Best {
    feature: usize,
    threshold: f64,
    position: usize,
    score: f64,
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [TransmitterLabel],
    settings: &'a ForestSettings,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn counts(&self, idx: &[usize]) -> (usize, usize) {
        let eve = idx.iter().filter(|&&i| self.y[i].is_eve()).count();
        (idx.len() - eve, eve)
    }

    fn leaf(&mut self, bob: usize, eve: usize) -> usize {
        let label = if eve > bob {
            TransmitterLabel::Eve
        } else {
            TransmitterLabel::Bob
        };
        self.nodes.push(Node::Leaf { label });
        self.nodes.len() - 1
    }

    /// Best split over a random feature subset; `idx` is left sorted by the
    /// winning feature when a split is returned.
    fn best_split(&mut self, idx: &mut [usize], bob: usize, eve: usize) -> Option<Best> {
        let n = idx.len();
        let min_leaf = self.settings.min_samples_leaf;
        let criterion = self.settings.criterion;
        let parent = criterion.impurity(bob, eve);
        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(&mut self.rng);

        let mut best: Option<Best> = None;
        let mut visited = 0;
        for f in features {
            if visited == self.mtry {
                break;
            }
            let x = self.x;
            idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            if x[idx[0]][f] == x[idx[n - 1]][f] {
                continue;
            }
            visited += 1;
            let (mut lb, mut le) = (0usize, 0usize);
            for pos in 1..n {
                if self.y[idx[pos - 1]].is_eve() {
                    le += 1;
                } else {
                    lb += 1;
                }
                let (lo, hi) = (x[idx[pos - 1]][f], x[idx[pos]][f]);
                if lo == hi || pos < min_leaf || n - pos < min_leaf {
                    continue;
                }
                let (rb, re) = (bob - lb, eve - le);
                let weighted = (pos as f64 * criterion.impurity(lb, le)
                    + (n - pos) as f64 * criterion.impurity(rb, re))
                    / n as f64;
                let score = parent - weighted;
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Best {
                        feature: f,
                        threshold,
                        position: pos,
                        score,
                    });
                }
            }
        }
        if let Some(b) = &best {
            let x = self.x;
            let f = b.feature;
            idx.sort_by(|&a, &c| x[a][f].total_cmp(&x[c][f]).then(a.cmp(&c)));
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize]) -> usize {
        let (bob, eve) = self.counts(idx);
        let n = idx.len();
        if bob == 0
            || eve == 0
            || n < self.settings.min_samples_split
            || n < 2 * self.settings.min_samples_leaf
        {
            return self.leaf(bob, eve);
        }
        let Some(split) = self.best_split(idx, bob, eve) else {
            return self.leaf(bob, eve);
        };
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf {
            label: TransmitterLabel::Bob,
        });
        let (left_idx, right_idx) = idx.split_at_mut(split.position);
        let left = self.grow(left_idx);
        let right = self.grow(right_idx);
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        slot
    }
}

/// Grows one tree on `sample` (indices into the training rows, repeats allowed).
pub fn grow_tree(
    train: &FeatureMatrix,
    sample: &mut [usize],
    settings: &ForestSettings,
    rng: ChaCha8Rng,
) -> Tree {
    let mut builder = TreeBuilder {
        x: &train.rows,
        y: &train.labels,
        settings,
        mtry: settings.max_features.count(train.feature_dim),
        rng,
        nodes: Vec::new(),
    };
    builder.grow(sample);
    Tree {
        nodes: builder.nodes,
    }
}

#[derive(Debug, Clone)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    dim: usize,
}

impl RowPredictor for ForestModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_row(&self, x: &[f64]) -> TransmitterLabel {
        let eve = self.trees.iter().filter(|t| t.predict(x).is_eve()).count();
        if 2 * eve > self.trees.len() {
            TransmitterLabel::Eve
        } else {
            TransmitterLabel::Bob
        }
    }
}

pub fn train_forest(
    train: &FeatureMatrix,
    settings: &ForestSettings,
    seed: u64,
) -> Result<ForestModel, ClassifierError> {
    super::check_training(train)?;
    let n = train.len();
    let trees = (0..settings.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let mut sample: Vec<usize> = if settings.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(train, &mut sample, settings, rng)
        })
        .collect();
    Ok(ForestModel {
        trees,
        dim: train.feature_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{fit, predict, ClassifierSpec, Family, FittedModel};
    use crate::label::TransmitterLabel::{Bob as B, Eve as E};

    fn settings() -> ForestSettings {
        ForestSettings {
            n_estimators: 1,
            criterion: Criterion::Gini,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            bootstrap: false,
        }
    }

    #[test]
    fn impurity_closed_forms() {
        assert_eq!(Criterion::Gini.impurity(5, 5), 0.5);
        assert_eq!(Criterion::Entropy.impurity(5, 5), 1.0);
        assert_eq!(Criterion::Gini.impurity(4, 0), 0.0);
        assert_eq!(Criterion::Entropy.impurity(0, 4), 0.0);
    }

    #[test]
    fn pure_node_is_a_leaf() {
        let train =
            FeatureMatrix::new(vec![vec![1.0], vec![2.0], vec![3.0]], vec![E, E, E]).unwrap();
        let mut idx = vec![0, 1, 2];
        let tree = grow_tree(&train, &mut idx, &settings(), stream_rng(0, 0));
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.predict(&[100.0]), E);
    }

    #[test]
    fn single_tree_memorizes_random_points() {
        use rand::Rng;
        let mut rng = stream_rng(11, 0);
        for criterion in ["gini", "entropy"] {
            let rows: Vec<Vec<f64>> = (0..50)
                .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let labels = (0..50)
                .map(|_| if rng.random_bool(0.4) { E } else { B })
                .collect::<Vec<_>>();
            let mut labels = labels;
            labels[0] = B;
            labels[1] = E;
            let train = FeatureMatrix::new(rows, labels).unwrap();
            let spec = ClassifierSpec::new(Family::RandomForest)
                .with("n_estimators", 1)
                .with("bootstrap", false)
                .with("max_features", "none")
                .with("criterion", criterion);
            let model = fit(&spec, &train, 5).unwrap();
            assert_eq!(predict(&model, &train).unwrap(), train.labels);
        }
    }

    #[test]
    fn split_below_two_is_clamped() {
        let spec = ClassifierSpec::new(Family::RandomForest).with("min_samples_split", 1);
        let train = FeatureMatrix::new(vec![vec![0.0], vec![1.0]], vec![B, E]).unwrap();
        assert!(fit(&spec, &train, 0).is_ok());
    }

    #[test]
    fn seeded_forest_is_reproducible() {
        let train = crate::classifiers::tests::separable_20();
        let spec = ClassifierSpec::new(Family::RandomForest).with("n_estimators", 25);
        let trees = |seed| match fit(&spec, &train, seed).unwrap() {
            FittedModel::Forest(f) => f.trees,
            _ => unreachable!(),
        };
        assert_eq!(trees(4), trees(4));
    }

    #[test]
    fn max_features_counts() {
        assert_eq!(MaxFeatures::All.count(288), 288);
        assert_eq!(MaxFeatures::Sqrt.count(288), 17);
        assert_eq!(MaxFeatures::Log2.count(288), 9);
        assert_eq!(MaxFeatures::Log2.count(1), 1);
    }

    #[test]
    fn vote_ties_go_to_bob() {
        let leaf = |label| Tree {
            nodes: vec![Node::Leaf { label }],
        };
        let forest = ForestModel {
            trees: vec![leaf(B), leaf(E)],
            dim: 1,
        };
        assert_eq!(forest.predict_row(&[0.0]), B);
    }
}
