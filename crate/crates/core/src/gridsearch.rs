//! Exhaustive hyperparameter search scored by mean validation accuracy.

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::classifiers::{self, Classifier, ClassifierError, ClassifierSpec, Family};
use crate::label::TransmitterLabel;
use crate::preprocess::{
    run_pipeline, FeatureMatrix, PipelineOutput, PreprocessConfig, PreprocessError,
};
use crate::rng::derive_seed;
use crate::trace::TraceDataset;

/// Score assigned to a configuration that failed on any validation dataset.
pub const DISQUALIFIED: f64 = -1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid axis {0:?} has no options")]
    EmptyAxis(String),
    #[error("grid axis {0:?} appears twice")]
    DuplicateAxis(String),
    #[error("{family} has no parameter {key:?}")]
    UnknownAxis { family: Family, key: String },
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("accuracy of an empty label vector is undefined")]
    EmptyLabels,
    #[error("no validation datasets")]
    NoValidation,
    #[error("no configurations to search")]
    NoConfigs,
    #[error("every configuration failed; first error: {0}")]
    AllDisqualified(String),
}

/// Ordered parameter axes of one classifier family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperGrid {
    pub family: Family,
    pub axes: Vec<(String, Vec<String>)>,
}

fn strings(values: &[&str]) -> Vec<String> {
    values.iter().map(|s| s.to_string()).collect()
}

impl HyperGrid {
    pub fn new(family: Family, axes: Vec<(String, Vec<String>)>) -> Result<Self, GridError> {
        let grid = Self { family, axes };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        for (i, (name, options)) in self.axes.iter().enumerate() {
            if options.is_empty() {
                return Err(GridError::EmptyAxis(name.clone()));
            }
            if self.axes[..i].iter().any(|(n, _)| n == name) {
                return Err(GridError::DuplicateAxis(name.clone()));
            }
            if !self.family.param_names().contains(&name.as_str()) {
                return Err(GridError::UnknownAxis {
                    family: self.family,
                    key: name.clone(),
                });
            }
        }
        Ok(())
    }

    /// The reference parameter space of `family`. GNB has no grid and
    /// searches its single default configuration.
    pub fn default_for(family: Family) -> Self {
        let pow10 = ["1e-6", "1e-5", "1e-4", "1e-3", "1e-2"];
        let tol = ["1e-5", "1e-4", "1e-3", "1e-2", "1e-1"];
        let iters = ["1", "10", "100", "1000", "10000"];
        let c = ["0.01", "0.1", "1", "10", "100"];
        let penalty = ["none", "l2", "l1", "elasticnet"];
        let axes: Vec<(&str, Vec<&str>)> = match family {
            Family::Sgd => vec![
                (
                    "loss",
                    vec![
                        "hinge",
                        "log",
                        "modified_huber",
                        "squared_hinge",
                        "perceptron",
                    ],
                ),
                ("penalty", penalty.to_vec()),
                ("alpha", pow10.to_vec()),
                ("l1_ratio", vec!["0", "0.25", "0.5", "0.75", "1"]),
                ("max_iter", iters.to_vec()),
                ("tol", tol.to_vec()),
                (
                    "learning_rate",
                    vec!["constant", "optimal", "invscaling", "adaptive"],
                ),
                ("eta0", vec!["0.25", "0.5", "0.75", "1"]),
            ],
            Family::Perceptron => vec![
                ("penalty", penalty.to_vec()),
                ("alpha", pow10.to_vec()),
                ("max_iter", iters.to_vec()),
                ("tol", tol.to_vec()),
            ],
            Family::PassiveAggressive => vec![
                ("C", c.to_vec()),
                ("max_iter", iters.to_vec()),
                ("tol", tol.to_vec()),
                ("loss", vec!["hinge", "squared_hinge"]),
            ],
            Family::RandomForest => vec![
                ("n_estimators", iters.to_vec()),
                ("criterion", vec!["gini", "entropy"]),
                ("min_samples_split", vec!["1", "2", "3", "4", "5"]),
                ("min_samples_leaf", vec!["1", "2", "3", "4", "5"]),
                ("max_features", vec!["none", "auto", "sqrt", "log2"]),
            ],
            Family::KNeighbors => vec![
                ("n_neighbors", vec!["2", "4", "6", "8", "10"]),
                ("algorithm", vec!["auto", "ball_tree", "kd_tree", "brute"]),
                ("leaf_size", vec!["10", "20", "30", "40", "50"]),
                ("p", vec!["1", "2", "3", "4", "5"]),
            ],
            Family::Svc => vec![
                ("C", c.to_vec()),
                ("kernel", vec!["linear", "poly", "rbf", "sigmoid"]),
                ("degree", vec!["1", "2", "3", "4", "5"]),
                ("tol", tol.to_vec()),
                ("max_iter", iters.to_vec()),
            ],
            Family::Lda => vec![
                ("solver", vec!["svd", "lsqr"]),
                ("tol", tol.to_vec()),
                ("shrinkage", vec!["none", "auto"]),
            ],
            Family::Gnb => vec![],
        };
        Self {
            family,
            axes: axes
                .into_iter()
                .map(|(k, v)| (k.to_string(), strings(&v)))
                .collect(),
        }
    }

    /// Number of configurations in the Cartesian product.
    pub fn size(&self) -> usize {
        self.axes.iter().map(|(_, o)| o.len()).product()
    }

    pub fn axis_names(&self) -> Vec<&str> {
        self.axes.iter().map(|(n, _)| n.as_str()).collect()
    }
}

/// Cartesian product of the axes, last axis fastest.
pub fn enumerate_grid(grid: &HyperGrid) -> Result<Vec<ClassifierSpec>, GridError> {
    grid.validate()?;
    let total = grid.size();
    let mut specs = Vec::with_capacity(total);
    let mut digits = vec![0usize; grid.axes.len()];
    for _ in 0..total {
        let mut spec = ClassifierSpec::new(grid.family);
        for ((name, options), &d) in grid.axes.iter().zip(&digits) {
            spec = spec.with(name, &options[d]);
        }
        specs.push(spec);
        for (pos, (_, options)) in grid.axes.iter().enumerate().rev() {
            digits[pos] += 1;
            if digits[pos] < options.len() {
                break;
            }
            digits[pos] = 0;
        }
    }
    Ok(specs)
}

/// Every `⌊len/n⌋`-th spec, starting with the first; `n >= len` keeps all.
pub fn subsample(specs: Vec<ClassifierSpec>, n: usize) -> Vec<ClassifierSpec> {
    if n == 0 || n >= specs.len() {
        return specs;
    }
    let stride = specs.len() / n;
    specs.into_iter().step_by(stride).take(n).collect()
}

/// Fraction of positions where the predicted label equals the true one.
pub fn accuracy(pred: &[TransmitterLabel], truth: &[TransmitterLabel]) -> Result<f64, GridError> {
    if pred.len() != truth.len() {
        return Err(GridError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(GridError::EmptyLabels);
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Builds a fitted classifier from a spec, training rows and seed.
pub type Fitter<'a> = dyn Fn(&ClassifierSpec, &FeatureMatrix, u64) -> Result<Box<dyn Classifier>, ClassifierError>
    + Sync
    + 'a;

pub fn default_fitter(
    spec: &ClassifierSpec,
    train: &FeatureMatrix,
    seed: u64,
) -> Result<Box<dyn Classifier>, ClassifierError> {
    Ok(Box::new(classifiers::fit(spec, train, seed)?))
}

/// Runs the preprocessing pipeline once per validation dataset.
pub fn prepare(
    validation: &[TraceDataset],
    ppcfg: &PreprocessConfig,
) -> Vec<Result<PipelineOutput, PreprocessError>> {
    validation
        .iter()
        .map(|ds| run_pipeline(ds, ppcfg))
        .collect()
}

/// Mean accuracy over prepared datasets, or the error that disqualified it.
pub fn score_prepared(
    spec: &ClassifierSpec,
    prepared: &[Result<PipelineOutput, PreprocessError>],
    seed: u64,
    fitter: &Fitter<'_>,
) -> Result<f64, String> {
    if prepared.is_empty() {
        return Err(GridError::NoValidation.to_string());
    }
    let mut total = 0.0;
    for (i, p) in prepared.iter().enumerate() {
        let p = p.as_ref().map_err(|e| e.to_string())?;
        let model =
            fitter(spec, &p.train, derive_seed(seed, i as u64)).map_err(|e| e.to_string())?;
        let pred = model.predict(&p.eval).map_err(|e| e.to_string())?;
        total += accuracy(&pred, &p.eval.labels).map_err(|e| e.to_string())?;
    }
    Ok(total / prepared.len() as f64)
}

/// Mean validation accuracy of `spec`; failures score [`DISQUALIFIED`].
pub fn score_config(
    spec: &ClassifierSpec,
    validation: &[TraceDataset],
    ppcfg: &PreprocessConfig,
    seed: u64,
) -> f64 {
    score_prepared(spec, &prepare(validation, ppcfg), seed, &default_fitter).unwrap_or(DISQUALIFIED)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_spec: ClassifierSpec,
    pub best_score: f64,
    /// Every scored spec in enumeration order.
    pub scores: Vec<(ClassifierSpec, f64)>,
}

impl SearchResult {
    /// `family,<params...>,score`, one row per configuration. Columns follow
    /// the first-seen order of parameter names.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut names: Vec<&str> = Vec::new();
        for (spec, _) in &self.scores {
            for (k, _) in &spec.params {
                if !names.contains(&k.as_str()) {
                    names.push(k);
                }
            }
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["family"];
        header.extend(&names);
        header.push("score");
        w.write_record(&header)?;
        for (spec, score) in &self.scores {
            let mut row = vec![spec.family.name().to_string()];
            row.extend(names.iter().map(|n| spec.get(n).unwrap_or("").to_string()));
            row.push(score.to_string());
            w.write_record(&row)?;
        }
        w.flush()
    }

    pub fn write_summary<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "family={}", self.best_spec.family)?;
        writeln!(out, "spec={}", self.best_spec)?;
        writeln!(out, "score={}", self.best_score)?;
        writeln!(out, "configs={}", self.scores.len())
    }
}

/// Scores every spec in parallel; the first maximal score wins.
pub fn grid_search_with(
    specs: &[ClassifierSpec],
    validation: &[TraceDataset],
    ppcfg: &PreprocessConfig,
    seed: u64,
    fitter: &Fitter<'_>,
) -> Result<SearchResult, GridError> {
    if validation.is_empty() {
        return Err(GridError::NoValidation);
    }
    if specs.is_empty() {
        return Err(GridError::NoConfigs);
    }
    let prepared = prepare(validation, ppcfg);
    let outcomes: Vec<Result<f64, String>> = specs
        .par_iter()
        .map(|spec| score_prepared(spec, &prepared, seed, fitter))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if let Ok(s) = o {
            if best.is_none_or(|(_, b)| *s > b) {
                best = Some((i, *s));
            }
        }
    }
    let Some((best_idx, best_score)) = best else {
        let first = outcomes
            .into_iter()
            .find_map(Result::err)
            .unwrap_or_default();
        return Err(GridError::AllDisqualified(first));
    };
    Ok(SearchResult {
        best_spec: specs[best_idx].clone(),
        best_score,
        scores: specs
            .iter()
            .cloned()
            .zip(outcomes.into_iter().map(|o| o.unwrap_or(DISQUALIFIED)))
            .collect(),
    })
}

pub fn grid_search(
    grid: &HyperGrid,
    validation: &[TraceDataset],
    ppcfg: &PreprocessConfig,
    seed: u64,
) -> Result<SearchResult, GridError> {
    grid_search_with(
        &enumerate_grid(grid)?,
        validation,
        ppcfg,
        seed,
        &default_fitter,
    )
}
