//! Binary Bob/Eve classifiers behind one fit/predict contract.
//!
//! Every family is implemented here rather than wrapped: SGD-trained linear
//! models (plus the perceptron and passive-aggressive variants), CART random
//! forests, k-nearest neighbours with kd-tree/ball-tree/brute backends, an
//! SMO-trained support vector classifier, linear discriminant analysis and
//! Gaussian naive Bayes. Labels are encoded Bob = -1, Eve = +1, and every
//! tie resolves to Bob.

use thiserror::Error;

use crate::label::{has_both_classes, TransmitterLabel};
use crate::preprocess::FeatureMatrix;

pub mod forest;
pub mod gnb;
pub mod knn;
pub mod lda;
pub mod linear;
mod spec;
pub mod svc;

pub use spec::{ClassifierSpec, Family};

use spec::ParamReader;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("unknown classifier family {0:?}")]
    UnknownFamily(String),
    #[error("{0}")]
    InvalidSpec(String),
    #[error("{family} has no parameter {key:?}")]
    UnknownParam { family: Family, key: String },
    #[error("{family}: invalid value {value:?} for {key}, expected {expected}")]
    InvalidParam {
        family: Family,
        key: String,
        value: String,
        expected: String,
    },
    #[error("training data must contain both Bob and Eve samples")]
    SingleClass,
    #[error("training data is empty")]
    EmptyTraining,
    #[error("training features contain non-finite values")]
    NonFiniteFeatures,
    #[error("feature dimension mismatch: model expects {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("n_neighbors={k} exceeds the {n} training samples")]
    TooManyNeighbors { k: usize, n: usize },
    #[error("covariance is singular (rank {rank} of {dim}); use shrinkage=auto or the svd solver")]
    SingularCovariance { rank: usize, dim: usize },
    #[error("optimization diverged to non-finite weights")]
    Diverged,
}

/// Anything that labels the rows of a feature matrix.
pub trait Classifier: Send + Sync {
    fn predict(&self, eval: &FeatureMatrix) -> Result<Vec<TransmitterLabel>, ClassifierError>;
}

/// Per-row decision shared by all fitted models.
pub(crate) trait RowPredictor {
    fn dim(&self) -> usize;
    fn predict_row(&self, x: &[f64]) -> TransmitterLabel;
}

/// Typed, validated parameters of one spec.
#[derive(Debug, Clone)]
pub(crate) enum Settings {
    Sgd(linear::SgdSettings),
    PassiveAggressive(linear::PaSettings),
    Forest(forest::ForestSettings),
    Knn(knn::KnnSettings),
    Svc(svc::SvcSettings),
    Lda(lda::LdaSettings),
    Gnb(gnb::GnbSettings),
}

impl Settings {
    pub(crate) fn from_spec(spec: &ClassifierSpec, dim: usize) -> Result<Self, ClassifierError> {
        let reader = ParamReader::new(spec)?;
        Ok(match spec.family {
            Family::Sgd => Settings::Sgd(linear::SgdSettings::read(&reader)?),
            Family::Perceptron => Settings::Sgd(linear::SgdSettings::perceptron(&reader)?),
            Family::PassiveAggressive => {
                Settings::PassiveAggressive(linear::PaSettings::read(&reader)?)
            }
            Family::RandomForest => Settings::Forest(forest::ForestSettings::read(&reader)?),
            Family::KNeighbors => Settings::Knn(knn::KnnSettings::read(&reader)?),
            Family::Svc => Settings::Svc(svc::SvcSettings::read(&reader, dim)?),
            Family::Lda => Settings::Lda(lda::LdaSettings::read(&reader)?),
            Family::Gnb => Settings::Gnb(gnb::GnbSettings::read(&reader)?),
        })
    }
}

#[derive(Debug, Clone)]
pub enum FittedModel {
    Linear(linear::LinearModel),
    Forest(forest::ForestModel),
    Knn(knn::KnnModel),
    Svc(svc::SvcModel),
    Lda(lda::LdaModel),
    Gnb(gnb::GnbModel),
}

impl FittedModel {
    fn row_predictor(&self) -> &dyn RowPredictor {
        match self {
            FittedModel::Linear(m) => m,
            FittedModel::Forest(m) => m,
            FittedModel::Knn(m) => m,
            FittedModel::Svc(m) => m,
            FittedModel::Lda(m) => m,
            FittedModel::Gnb(m) => m,
        }
    }

    pub fn dim(&self) -> usize {
        self.row_predictor().dim()
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<TransmitterLabel, ClassifierError> {
        let model = self.row_predictor();
        if x.len() != model.dim() {
            return Err(ClassifierError::DimensionMismatch {
                expected: model.dim(),
                found: x.len(),
            });
        }
        Ok(model.predict_row(x))
    }
}

impl Classifier for FittedModel {
    fn predict(&self, eval: &FeatureMatrix) -> Result<Vec<TransmitterLabel>, ClassifierError> {
        predict(self, eval)
    }
}

/// Checks the common training preconditions.
pub(crate) fn check_training(train: &FeatureMatrix) -> Result<(), ClassifierError> {
    if train.is_empty() {
        return Err(ClassifierError::EmptyTraining);
    }
    if train.rows.iter().any(|r| r.len() != train.feature_dim) {
        return Err(ClassifierError::DimensionMismatch {
            expected: train.feature_dim,
            found: train
                .rows
                .iter()
                .map(Vec::len)
                .find(|&l| l != train.feature_dim)
                .unwrap_or(0),
        });
    }
    if !train.is_finite() {
        return Err(ClassifierError::NonFiniteFeatures);
    }
    if !has_both_classes(&train.labels) {
        return Err(ClassifierError::SingleClass);
    }
    Ok(())
}

/// Fits the model described by `spec`. `seed` drives every random choice
/// (bootstrap draws, feature subsets).
pub fn fit(
    spec: &ClassifierSpec,
    train: &FeatureMatrix,
    seed: u64,
) -> Result<FittedModel, ClassifierError> {
    check_training(train)?;
    let settings = Settings::from_spec(spec, train.feature_dim)?;
    Ok(match settings {
        Settings::Sgd(s) => FittedModel::Linear(linear::train_sgd(train, &s)?),
        Settings::PassiveAggressive(s) => {
            FittedModel::Linear(linear::train_passive_aggressive(train, &s)?)
        }
        Settings::Forest(s) => FittedModel::Forest(forest::train_forest(train, &s, seed)?),
        Settings::Knn(s) => FittedModel::Knn(knn::KnnModel::fit(train, &s)?),
        Settings::Svc(s) => FittedModel::Svc(svc::train_svc(train, &s)?.0),
        Settings::Lda(s) => FittedModel::Lda(lda::train_lda(train, &s)?),
        Settings::Gnb(s) => FittedModel::Gnb(gnb::train_gnb(train, &s)?),
    })
}

/// One label per row of `eval`.
pub fn predict(
    model: &FittedModel,
    eval: &FeatureMatrix,
) -> Result<Vec<TransmitterLabel>, ClassifierError> {
    if eval.is_empty() {
        return Ok(Vec::new());
    }
    let inner = model.row_predictor();
    if let Some(row) = eval.rows.iter().find(|r| r.len() != inner.dim()) {
        return Err(ClassifierError::DimensionMismatch {
            expected: inner.dim(),
            found: row.len(),
        });
    }
    Ok(eval.rows.iter().map(|r| inner.predict_row(r)).collect())
}

/// Tuned reference configurations, plus Gaussian naive Bayes with
/// defaults. LDA uses the lsqr solver, the one compatible with automatic
/// shrinkage.
pub fn reference_specs() -> Vec<ClassifierSpec> {
    [
        "SGD loss=log penalty=elasticnet alpha=1e-2 l1_ratio=1 max_iter=10000 tol=1e-5 learning_rate=adaptive eta0=0.5",
        "PassiveAggressive C=0.1 max_iter=1 tol=1e-5 loss=hinge",
        "RandomForest n_estimators=100 criterion=entropy min_samples_split=3 min_samples_leaf=1 max_features=log2",
        "KNeighbors n_neighbors=2 algorithm=auto leaf_size=10 p=2",
        "SVC C=0.1 kernel=linear degree=1 tol=1e-5 max_iter=10",
        "LDA solver=lsqr tol=1e-5 shrinkage=auto",
        "GNB",
    ]
    .iter()
    .map(|s| s.parse().expect("reference specs parse"))
    .collect()
}
