//! Accuracy sweeps over one experiment knob at a time.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{synthesize_trace, ChannelError, ScenarioConfig};
use crate::classifiers::{self, ClassifierSpec};
use crate::gridsearch::accuracy;
use crate::preprocess::{run_pipeline, PreprocessConfig};
use crate::rng::derive_seed;
use crate::trace::TraceDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SweepVariable {
    AttackIntensity,
    FeatureDim,
    TrainSize,
    WindowSize,
}

impl SweepVariable {
    pub const ALL: [SweepVariable; 4] = [
        SweepVariable::AttackIntensity,
        SweepVariable::FeatureDim,
        SweepVariable::TrainSize,
        SweepVariable::WindowSize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::AttackIntensity => "AttackIntensity",
            SweepVariable::FeatureDim => "FeatureDim",
            SweepVariable::TrainSize => "TrainSize",
            SweepVariable::WindowSize => "WindowSize",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepVariable::AttackIntensity => vec![0.05, 0.10, 0.15, 0.20, 0.25],
            SweepVariable::FeatureDim => crate::preprocess::DEFAULT_REDUCTIONS
                .iter()
                .map(|&m| m as f64)
                .collect(),
            SweepVariable::TrainSize => vec![2.0, 4.0, 6.0, 8.0, 10.0],
            SweepVariable::WindowSize => vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
        }
    }

    /// Whether a point of this sweep changes the generated traces.
    pub fn is_generative(self) -> bool {
        self == SweepVariable::AttackIntensity
    }

    pub fn check_value(self, value: f64) -> Result<(), SweepError> {
        let ok = match self {
            SweepVariable::AttackIntensity => value > 0.0 && value < 1.0,
            SweepVariable::FeatureDim => value >= 1.0 && value.fract() == 0.0,
            SweepVariable::TrainSize => value >= 2.0 && value.fract() == 0.0,
            SweepVariable::WindowSize => value >= 0.0 && value.fract() == 0.0,
        };
        if ok && value.is_finite() {
            Ok(())
        } else {
            Err(SweepError::IllegalValue {
                variable: self,
                value,
            })
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| *c != '_')
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "attackintensity" | "pai" => Ok(SweepVariable::AttackIntensity),
            "featuredim" | "mred" => Ok(SweepVariable::FeatureDim),
            "trainsize" | "ntrain" => Ok(SweepVariable::TrainSize),
            "windowsize" | "window" => Ok(SweepVariable::WindowSize),
            _ => Err(format!("unknown sweep variable {s:?}")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("{variable} sweep has no values")]
    NoValues { variable: SweepVariable },
    #[error("illegal {variable} value {value}")]
    IllegalValue { variable: SweepVariable, value: f64 },
    #[error("sweep has no classifiers")]
    NoClassifiers,
    #[error("sweep has no datasets")]
    NoDatasets,
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("{0} sweeps regenerate traces and need scenario templates")]
    NeedsScenario(SweepVariable),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    /// Settings of every knob not under sweep.
    pub preprocess: PreprocessConfig,
    pub classifiers: Vec<ClassifierSpec>,
    pub repetitions: usize,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.values.is_empty() {
            return Err(SweepError::NoValues {
                variable: self.variable,
            });
        }
        for &v in &self.values {
            self.variable.check_value(v)?;
        }
        if self.classifiers.is_empty() {
            return Err(SweepError::NoClassifiers);
        }
        if self.repetitions == 0 {
            return Err(SweepError::NoRepetitions);
        }
        Ok(())
    }

    pub fn repetition_seed(&self, rep: usize) -> u64 {
        derive_seed(self.seed, rep as u64)
    }

    fn preprocess_at(&self, value: f64) -> PreprocessConfig {
        let mut p = self.preprocess;
        match self.variable {
            SweepVariable::AttackIntensity => {}
            SweepVariable::FeatureDim => p.m_red = value as usize,
            SweepVariable::TrainSize => p.n_train = value as usize,
            SweepVariable::WindowSize => p.window = value as usize,
        }
        p
    }
}

/// Where the traces of a sweep come from.
#[derive(Debug, Clone)]
pub enum SweepSource {
    /// Fixed recorded traces; repetitions only reseed the classifiers.
    Traces(Vec<TraceDataset>),
    /// Templates synthesized afresh for every repetition (and, for attack
    /// intensity, for every value).
    Scenarios(Vec<ScenarioConfig>),
}

impl SweepSource {
    fn len(&self) -> usize {
        match self {
            SweepSource::Traces(t) => t.len(),
            SweepSource::Scenarios(s) => s.len(),
        }
    }
}

/// One accuracy measurement. A failed point has no accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variable: String,
    pub value: f64,
    pub classifier: String,
    pub dataset: usize,
    pub seed: u64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

/// Column labels: the family name, or the full spec when a family repeats.
pub fn classifier_labels(specs: &[ClassifierSpec]) -> Vec<String> {
    specs
        .iter()
        .map(|s| {
            let shared = specs.iter().filter(|o| o.family == s.family).count() > 1;
            if shared {
                s.to_string()
            } else {
                s.family.name().to_string()
            }
        })
        .collect()
}

/// Scenario realized for one point of the sweep.
pub fn point_scenario(
    template: &ScenarioConfig,
    variable: SweepVariable,
    value: f64,
    rep: usize,
) -> ScenarioConfig {
    let mut s = template.clone();
    s.seed = derive_seed(template.seed, rep as u64);
    if variable.is_generative() {
        s.attack_intensity = value;
        s.seed = derive_seed(s.seed, value.to_bits());
    }
    s
}

/// Accuracy of every classifier on one trace under one preprocessing setup.
fn evaluate(
    trace: &TraceDataset,
    preprocess: &PreprocessConfig,
    specs: &[ClassifierSpec],
    fit_seed: u64,
) -> Vec<Option<f64>> {
    let prepared = match run_pipeline(trace, preprocess) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("preprocessing failed: {e}");
            return vec![None; specs.len()];
        }
    };
    specs
        .iter()
        .enumerate()
        .map(|(c, spec)| {
            let outcome = classifiers::fit(spec, &prepared.train, derive_seed(fit_seed, c as u64))
                .and_then(|m| classifiers::predict(&m, &prepared.eval));
            match outcome {
                Ok(pred) => accuracy(&pred, &prepared.eval.labels).ok(),
                Err(e) => {
                    log::warn!("{spec}: {e}");
                    None
                }
            }
        })
        .collect()
}

/// Runs every (value, dataset, repetition) point. Rows come out ordered by
/// value, classifier, dataset and repetition whatever the thread schedule.
pub fn run_sweep(cfg: &SweepConfig, source: &SweepSource) -> Result<SweepReport, SweepError> {
    cfg.validate()?;
    let n_data = source.len();
    if n_data == 0 {
        return Err(SweepError::NoDatasets);
    }
    if cfg.variable.is_generative() && matches!(source, SweepSource::Traces(_)) {
        return Err(SweepError::NeedsScenario(cfg.variable));
    }
    let reps = cfg.repetitions;

    // Traces that do not depend on the swept value are built once.
    let shared: Vec<TraceDataset> = match source {
        SweepSource::Scenarios(templates) if !cfg.variable.is_generative() => (0..n_data * reps)
            .into_par_iter()
            .map(|k| {
                synthesize_trace(&point_scenario(
                    &templates[k / reps],
                    cfg.variable,
                    0.0,
                    k % reps,
                ))
            })
            .collect::<Result<_, _>>()?,
        _ => Vec::new(),
    };

    let tasks: Vec<(usize, usize, usize)> = (0..cfg.values.len())
        .flat_map(|v| (0..n_data).flat_map(move |d| (0..reps).map(move |r| (v, d, r))))
        .collect();
    let results: Vec<Vec<Option<f64>>> = tasks
        .par_iter()
        .map(|&(v, d, r)| {
            let value = cfg.values[v];
            let fit_seed = derive_seed(cfg.repetition_seed(r), d as u64);
            let preprocess = cfg.preprocess_at(value);
            let synthesized;
            let trace = match source {
                SweepSource::Traces(t) => &t[d],
                SweepSource::Scenarios(templates) if cfg.variable.is_generative() => {
                    match synthesize_trace(&point_scenario(&templates[d], cfg.variable, value, r)) {
                        Ok(t) => {
                            synthesized = t;
                            &synthesized
                        }
                        Err(e) => {
                            log::warn!("synthesis failed: {e}");
                            return vec![None; cfg.classifiers.len()];
                        }
                    }
                }
                SweepSource::Scenarios(_) => &shared[d * reps + r],
            };
            evaluate(trace, &preprocess, &cfg.classifiers, fit_seed)
        })
        .collect();

    let labels = classifier_labels(&cfg.classifiers);
    let mut rows = Vec::with_capacity(tasks.len() * labels.len());
    for v in 0..cfg.values.len() {
        for (c, label) in labels.iter().enumerate() {
            for d in 0..n_data {
                for r in 0..reps {
                    let task = (v * n_data + d) * reps + r;
                    rows.push(SweepRow {
                        variable: cfg.variable.name().to_string(),
                        value: cfg.values[v],
                        classifier: label.clone(),
                        dataset: d,
                        seed: cfg.repetition_seed(r),
                        accuracy: results[task][c],
                    });
                }
            }
        }
    }
    Ok(SweepReport { rows })
}

/// Summary of one (value, classifier) point over datasets and repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub variable: String,
    pub value: f64,
    pub classifier: String,
    pub count: usize,
    pub failures: usize,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

/// Mean, min and max per (variable, value, classifier), sorted by those keys.
/// Accuracies are summed in sorted order, so row order never matters.
pub fn aggregate(rows: &[SweepRow]) -> Vec<AggregateRow> {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    let key_cmp = |a: &SweepRow, b: &SweepRow| {
        a.variable
            .cmp(&b.variable)
            .then(a.value.total_cmp(&b.value))
            .then(a.classifier.cmp(&b.classifier))
    };
    sorted.sort_by(|a, b| {
        key_cmp(a, b).then_with(|| match (a.accuracy, b.accuracy) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (x, y) => x.is_some().cmp(&y.is_some()),
        })
    });
    let mut out = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && key_cmp(sorted[start], sorted[end]) == Ordering::Equal {
            end += 1;
        }
        let group = &sorted[start..end];
        let acc: Vec<f64> = group.iter().filter_map(|r| r.accuracy).collect();
        let first = group[0];
        out.push(AggregateRow {
            variable: first.variable.clone(),
            value: first.value,
            classifier: first.classifier.clone(),
            count: group.len(),
            failures: group.len() - acc.len(),
            mean: (!acc.is_empty()).then(|| acc.iter().sum::<f64>() / acc.len() as f64),
            min: acc.first().copied(),
            max: acc.last().copied(),
        });
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::TrainGuard;

    fn row(value: f64, classifier: &str, accuracy: Option<f64>) -> SweepRow {
        SweepRow {
            variable: "TrainSize".into(),
            value,
            classifier: classifier.into(),
            dataset: 0,
            seed: 0,
            accuracy,
        }
    }

    fn templates(n: usize) -> Vec<ScenarioConfig> {
        (0..n)
            .map(|i| ScenarioConfig {
                n_packets: 300,
                seed: 40 + i as u64,
                train_guards: vec![
                    TrainGuard { offset: 5, len: 2 },
                    TrainGuard { offset: 5, len: 10 },
                ],
                ..ScenarioConfig::default()
            })
            .collect()
    }

    fn config(variable: SweepVariable, values: Vec<f64>) -> SweepConfig {
        SweepConfig {
            variable,
            values,
            preprocess: PreprocessConfig::default(),
            classifiers: vec![
                "GNB".parse().unwrap(),
                "LDA solver=lsqr shrinkage=auto".parse().unwrap(),
            ],
            repetitions: 2,
            seed: 3,
        }
    }

    #[test]
    fn aggregate_basics() {
        let one = aggregate(&[row(2.0, "GNB", Some(0.8))]);
        assert_eq!(
            (one[0].mean, one[0].min, one[0].max),
            (Some(0.8), Some(0.8), Some(0.8))
        );
        let two = aggregate(&[row(2.0, "GNB", Some(0.8)), row(2.0, "GNB", Some(1.0))]);
        assert!((two[0].mean.unwrap() - 0.9).abs() < 1e-15);
        let failed = aggregate(&[row(2.0, "GNB", None), row(2.0, "GNB", Some(0.5))]);
        assert_eq!(failed[0].failures, 1);
        assert_eq!(failed[0].mean, Some(0.5));
    }

    #[test]
    fn aggregate_ignores_row_order() {
        let rows: Vec<SweepRow> = (0..30)
            .map(|i| {
                row(
                    (i % 3) as f64,
                    ["GNB", "SVC"][i % 2],
                    Some(0.1 + 0.37 * i as f64 % 0.9),
                )
            })
            .collect();
        let mut reversed = rows.clone();
        reversed.reverse();
        reversed.swap(3, 17);
        assert_eq!(aggregate(&rows), aggregate(&reversed));
        assert_eq!(aggregate(&rows).len(), 6);
    }

    #[test]
    fn every_combination_present_once() {
        let cfg = config(SweepVariable::TrainSize, vec![2.0, 10.0]);
        let report = run_sweep(&cfg, &SweepSource::Scenarios(templates(3))).unwrap();
        assert_eq!(report.rows.len(), 2 * 2 * 3 * 2);
        let mut keys: Vec<_> = report
            .rows
            .iter()
            .map(|r| (r.value.to_bits(), r.classifier.clone(), r.dataset, r.seed))
            .collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), report.rows.len());
        assert!(report.rows.iter().all(|r| r.accuracy.is_some()));
        assert_eq!(
            report,
            run_sweep(&cfg, &SweepSource::Scenarios(templates(3))).unwrap()
        );
    }

    #[test]
    fn points_are_reproducible_in_isolation() {
        let full = config(SweepVariable::AttackIntensity, vec![0.1, 0.25]);
        let report = run_sweep(&full, &SweepSource::Scenarios(templates(2))).unwrap();
        let single = config(SweepVariable::AttackIntensity, vec![0.25]);
        let alone = run_sweep(&single, &SweepSource::Scenarios(templates(2))).unwrap();
        let subset: Vec<_> = report
            .rows
            .iter()
            .filter(|r| r.value == 0.25)
            .cloned()
            .collect();
        assert_eq!(subset, alone.rows);
    }

    #[test]
    fn synthesized_attack_fraction_is_plausible() {
        for p in [0.05, 0.15, 0.25] {
            for rep in 0..3 {
                let template = ScenarioConfig {
                    n_packets: 5000,
                    ..templates(1).remove(0)
                };
                let s = point_scenario(&template, SweepVariable::AttackIntensity, p, rep);
                let t = synthesize_trace(&s).unwrap();
                // Binomial 99.9% interval: |f - p| <= 3.29 sqrt(p(1-p)/n).
                let half = 3.29 * (p * (1.0 - p) / 5000.0).sqrt();
                assert!(
                    (t.eve_fraction() - p).abs() <= half,
                    "p={p} got {}",
                    t.eve_fraction()
                );
            }
        }
    }

    #[test]
    fn illegal_points_become_failure_rows() {
        let cfg = config(SweepVariable::FeatureDim, vec![5.0, 48.0]);
        let report = run_sweep(&cfg, &SweepSource::Scenarios(templates(1))).unwrap();
        assert!(report
            .rows
            .iter()
            .filter(|r| r.value == 5.0)
            .all(|r| r.accuracy.is_none()));
        assert!(report
            .rows
            .iter()
            .filter(|r| r.value == 48.0)
            .all(|r| r.accuracy.is_some()));
        assert!(matches!(
            run_sweep(
                &config(SweepVariable::TrainSize, vec![2.5]),
                &SweepSource::Scenarios(templates(1))
            ),
            Err(SweepError::IllegalValue { .. })
        ));
        let traces = vec![synthesize_trace(&templates(1)[0]).unwrap()];
        assert_eq!(
            run_sweep(
                &config(SweepVariable::AttackIntensity, vec![0.1]),
                &SweepSource::Traces(traces)
            ),
            Err(SweepError::NeedsScenario(SweepVariable::AttackIntensity))
        );
    }

    #[test]
    fn variable_names_parse() {
        for v in SweepVariable::ALL {
            assert_eq!(v.name().parse::<SweepVariable>().unwrap(), v);
        }
        assert_eq!(
            "train_size".parse::<SweepVariable>().unwrap(),
            SweepVariable::TrainSize
        );
        assert!("Temperature".parse::<SweepVariable>().is_err());
    }
}
