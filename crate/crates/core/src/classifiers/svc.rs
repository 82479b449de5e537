//! Soft-margin support vector classifier trained by SMO on the dual.
//!
//! Working-set selection picks the maximal violating pair; the solver stops
//! once the violation drops below `tol` or the update budget is spent.

use super::spec::ParamReader;
use super::{ClassifierError, Family, RowPredictor};
use crate::label::TransmitterLabel;
use crate::preprocess::FeatureMatrix;

/// Update budget used when `max_iter=-1`.
pub const UNLIMITED_UPDATES: usize = 10_000_000;
const MIN_CURVATURE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    Linear,
    Poly,
    Rbf,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub kind: KernelKind,
    pub degree: i32,
    pub gamma: f64,
    pub coef0: f64,
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => super::linear::dot(a, b),
            KernelKind::Poly => {
                (self.gamma * super::linear::dot(a, b) + self.coef0).powi(self.degree)
            }
            KernelKind::Rbf => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-self.gamma * sq).exp()
            }
            KernelKind::Sigmoid => (self.gamma * super::linear::dot(a, b) + self.coef0).tanh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvcSettings {
    pub c: f64,
    pub kernel: Kernel,
    pub tol: f64,
    /// Passes over the training set, each worth `n` pair updates.
    pub max_iter: Option<usize>,
}

impl SvcSettings {
    pub(crate) fn read(r: &ParamReader<'_>, dim: usize) -> Result<Self, ClassifierError> {
        let invalid = |key: &str, expected: &str| ClassifierError::InvalidParam {
            family: Family::Svc,
            key: key.into(),
            value: r.raw(key).unwrap_or("").into(),
            expected: expected.into(),
        };
        let c = r.f64("C", 1.0)?;
        if c <= 0.0 {
            return Err(invalid("C", "a value > 0"));
        }
        let tol = r.f64("tol", 1e-3)?;
        if tol <= 0.0 {
            return Err(invalid("tol", "a value > 0"));
        }
        let degree = r.usize("degree", 3)?;
        if degree > 64 {
            return Err(invalid("degree", "at most 64"));
        }
        let max_iter = match r.raw("max_iter").map(str::trim) {
            None | Some("-1") => None,
            Some(_) => match r.usize("max_iter", 0)? {
                0 => return Err(invalid("max_iter", "a positive integer or -1")),
                m => Some(m),
            },
        };
        let kind = r.choice(
            "kernel",
            &[
                ("linear", KernelKind::Linear),
                ("poly", KernelKind::Poly),
                ("rbf", KernelKind::Rbf),
                ("sigmoid", KernelKind::Sigmoid),
            ],
            KernelKind::Rbf,
        )?;
        Ok(Self {
            c,
            kernel: Kernel {
                kind,
                degree: degree as i32,
                gamma: 1.0 / dim.max(1) as f64,
                coef0: 0.0,
            },
            tol,
            max_iter,
        })
    }
}

/// Solver diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SmoTrace {
    /// Dual objective after every pair update, starting from α = 0.
    pub objective: Vec<f64>,
    /// Maximal KKT violation when the solver stopped.
    pub final_violation: f64,
    pub converged: bool,
}

impl SmoTrace {
    pub fn updates(&self) -> usize {
        self.objective.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone)]
pub struct SvcModel {
    pub support: Vec<Vec<f64>>,
    /// α_t·y_t for each support vector.
    pub dual_coef: Vec<f64>,
    pub rho: f64,
    pub kernel: Kernel,
    dim: usize,
}

impl SvcModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.dual_coef)
            .map(|(s, &c)| c * self.kernel.eval(s, x))
            .sum::<f64>()
            - self.rho
    }
}

impl RowPredictor for SvcModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_row(&self, x: &[f64]) -> TransmitterLabel {
        TransmitterLabel::from_decision(self.decision(x))
    }
}

fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    -0.5 * alpha
        .iter()
        .zip(grad)
        .map(|(a, g)| a * (g - 1.0))
        .sum::<f64>()
}

pub fn train_svc(
    train: &FeatureMatrix,
    settings: &SvcSettings,
) -> Result<(SvcModel, SmoTrace), ClassifierError> {
    super::check_training(train)?;
    let n = train.len();
    let c = settings.c;
    let y: Vec<f64> = train.labels.iter().map(|l| l.sign()).collect();
    let kernel = settings.kernel;
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| kernel.eval(&train.rows[i], &train.rows[j]))
                .collect()
        })
        .collect();

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let budget = settings.max_iter.map_or(UNLIMITED_UPDATES, |m| {
        m.saturating_mul(n).min(UNLIMITED_UPDATES)
    });
    let mut trace = SmoTrace {
        objective: vec![0.0],
        ..SmoTrace::default()
    };

    loop {
        let mut i = None;
        let mut j = None;
        let (mut m, mut big_m) = (f64::NEG_INFINITY, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * grad[t];
            let up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if up && v > m {
                m = v;
                i = Some(t);
            }
            if low && v < big_m {
                big_m = v;
                j = Some(t);
            }
        }
        let violation = if i.is_some() && j.is_some() {
            m - big_m
        } else {
            0.0
        };
        trace.final_violation = violation.max(0.0);
        if violation < settings.tol {
            trace.converged = true;
            break;
        }
        if trace.updates() >= budget {
            break;
        }
        let (i, j) = (i.unwrap(), j.unwrap());
        let eta = (gram[i][i] + gram[j][j] - 2.0 * gram[i][j]).max(MIN_CURVATURE);
        let cap_i = if y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let cap_j = if y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        let delta = ((m - big_m) / eta).min(cap_i).min(cap_j);
        alpha[i] = (alpha[i] + y[i] * delta).clamp(0.0, c);
        alpha[j] = (alpha[j] - y[j] * delta).clamp(0.0, c);
        for t in 0..n {
            grad[t] += y[t] * delta * (gram[t][i] - gram[t][j]);
        }
        trace.objective.push(dual_objective(&alpha, &grad));
    }

    let rho = compute_rho(&alpha, &grad, &y, c);
    let mut support = Vec::new();
    let mut dual_coef = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support.push(train.rows[t].clone());
            dual_coef.push(alpha[t] * y[t]);
        }
    }
    Ok((
        SvcModel {
            support,
            dual_coef,
            rho,
            kernel,
            dim: train.feature_dim,
        },
        trace,
    ))
}

/// Offset from free vectors, or the midpoint of the feasible interval when
/// every α sits at a bound.
fn compute_rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::ClassifierSpec;
    use crate::label::TransmitterLabel::{Bob as B, Eve as E};
    use crate::rng::stream_rng;
    use rand::Rng;

    fn settings(spec: &str, dim: usize) -> SvcSettings {
        let spec: ClassifierSpec = spec.parse().unwrap();
        SvcSettings::read(&ParamReader::new(&spec).unwrap(), dim).unwrap()
    }

    fn noisy(seed: u64, n: usize, d: usize) -> FeatureMatrix {
        let mut rng = stream_rng(seed, 0);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let eve = i % 2 == 1;
            let shift = if eve { 0.5 } else { -0.5 };
            rows.push(
                (0..d)
                    .map(|_| shift + rng.random_range(-1.0..1.0))
                    .collect(),
            );
            labels.push(if eve { E } else { B });
        }
        FeatureMatrix::new(rows, labels).unwrap()
    }

    #[test]
    fn symmetric_pair_has_boundary_at_zero() {
        let train = FeatureMatrix::new(vec![vec![-1.0], vec![1.0]], vec![B, E]).unwrap();
        let (model, trace) = train_svc(&train, &settings("SVC C=1000 kernel=linear", 1)).unwrap();
        assert!(trace.converged);
        assert_eq!(model.support.len(), 2);
        assert!(model.decision(&[0.0]).abs() < 1e-12);
        assert!((model.decision(&[1.0]) - 1.0).abs() < 1e-12);
        assert!((model.decision(&[-1.0]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rbf_of_identical_points_is_one() {
        let k = settings("SVC kernel=rbf", 3).kernel;
        assert_eq!(k.eval(&[1.0, -2.0, 0.5], &[1.0, -2.0, 0.5]), 1.0);
        assert!((k.gamma - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn dual_objective_never_decreases() {
        for (seed, kernel) in [(1, "linear"), (2, "rbf"), (3, "poly")] {
            let train = noisy(seed, 40, 4);
            let s = settings(&format!("SVC C=1 kernel={kernel} degree=2 tol=1e-6"), 4);
            let (_, trace) = train_svc(&train, &s).unwrap();
            assert!(trace.updates() > 5);
            for w in trace.objective.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "{kernel}: {} -> {}", w[0], w[1]);
            }
            assert!(trace.converged);
            assert!(trace.final_violation < 1e-6);
        }
    }

    #[test]
    fn budget_limits_updates() {
        let train = noisy(4, 30, 3);
        let (_, trace) = train_svc(&train, &settings("SVC C=10 max_iter=1 tol=1e-9", 3)).unwrap();
        assert!(trace.updates() <= 30);
        assert!(settings("SVC max_iter=-1", 3).max_iter.is_none());
        let spec: ClassifierSpec = "SVC C=0".parse().unwrap();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn dual_variables_stay_in_box() {
        let train = noisy(5, 30, 2);
        let s = settings("SVC C=0.1 kernel=linear", 2);
        let (model, _) = train_svc(&train, &s).unwrap();
        let sum: f64 = model.dual_coef.iter().sum();
        assert!(sum.abs() < 1e-9);
        assert!(model.dual_coef.iter().all(|a| a.abs() <= 0.1 + 1e-12));
    }
}
