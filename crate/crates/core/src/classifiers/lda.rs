//! Two-class linear discriminant analysis with a pooled covariance.

use nalgebra::{DMatrix, DVector};

use super::spec::ParamReader;
use super::{ClassifierError, RowPredictor};
use crate::label::TransmitterLabel;
use crate::preprocess::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Svd,
    Lsqr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shrinkage {
    None,
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaSettings {
    pub solver: Solver,
    pub tol: f64,
    /// Only the lsqr solver shrinks; svd ignores this setting.
    pub shrinkage: Shrinkage,
}

impl LdaSettings {
    pub(crate) fn read(r: &ParamReader<'_>) -> Result<Self, ClassifierError> {
        let tol = r.non_negative("tol", 1e-4)?;
        Ok(Self {
            solver: r.choice(
                "solver",
                &[("svd", Solver::Svd), ("lsqr", Solver::Lsqr)],
                Solver::Svd,
            )?,
            tol,
            shrinkage: r.choice(
                "shrinkage",
                &[("none", Shrinkage::None), ("auto", Shrinkage::Auto)],
                Shrinkage::None,
            )?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LdaModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LdaModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        super::linear::dot(&self.weights, x) + self.bias
    }
}

impl RowPredictor for LdaModel {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn predict_row(&self, x: &[f64]) -> TransmitterLabel {
        TransmitterLabel::from_decision(self.decision(x))
    }
}

/// Class means, within-class centred rows and class counts.
struct Centered {
    mean: [DVector<f64>; 2],
    count: [usize; 2],
    xc: DMatrix<f64>,
}

fn center(train: &FeatureMatrix) -> Centered {
    let (n, d) = (train.len(), train.feature_dim);
    let mut mean = [DVector::zeros(d), DVector::zeros(d)];
    let mut count = [0usize; 2];
    for (row, label) in train.rows.iter().zip(&train.labels) {
        let c = label.is_eve() as usize;
        count[c] += 1;
        mean[c] += DVector::from_column_slice(row);
    }
    for c in 0..2 {
        mean[c] /= count[c] as f64;
    }
    let xc = DMatrix::from_fn(n, d, |i, j| {
        train.rows[i][j] - mean[train.labels[i].is_eve() as usize][j]
    });
    Centered { mean, count, xc }
}

/// Population standard deviation per column; zero columns map to 1.
fn column_scale(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_fn(x.ncols(), |j, _| {
        let col = x.column(j);
        let m = col.sum() / n;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        if var > 0.0 {
            var.sqrt()
        } else {
            1.0
        }
    })
}

/// Ledoit-Wolf shrinkage intensity for centred data `z`.
pub fn ledoit_wolf_intensity(z: &DMatrix<f64>) -> f64 {
    let (n, d) = (z.nrows() as f64, z.ncols() as f64);
    let s = z.transpose() * z / n;
    let mu = s.trace() / d;
    let fourth: f64 = z.row_iter().map(|r| r.norm_squared().powi(2)).sum();
    let beta = (fourth - n * s.norm_squared()) / (d * n * n);
    let mut target = s.clone();
    for i in 0..z.ncols() {
        target[(i, i)] -= mu;
    }
    let delta = target.norm_squared() / d;
    let beta = beta.min(delta);
    if beta <= 0.0 || delta == 0.0 {
        0.0
    } else {
        beta / delta
    }
}

/// Pooled covariance with Ledoit-Wolf shrinkage, computed on standardized
/// data and rescaled.
fn shrunk_covariance(xc: &DMatrix<f64>) -> DMatrix<f64> {
    let n = xc.nrows() as f64;
    let d = xc.ncols();
    let scale = column_scale(xc);
    let mean = DVector::from_fn(d, |j, _| xc.column(j).sum() / n);
    let z = DMatrix::from_fn(xc.nrows(), d, |i, j| (xc[(i, j)] - mean[j]) / scale[j]);
    let s = z.transpose() * &z / n;
    let shrink = ledoit_wolf_intensity(&z);
    let mu = s.trace() / d as f64;
    let mut cov = s * (1.0 - shrink);
    for i in 0..d {
        cov[(i, i)] += shrink * mu;
    }
    DMatrix::from_fn(d, d, |i, j| scale[i] * cov[(i, j)] * scale[j])
}

fn lsqr_weights(c: &Centered, s: &LdaSettings) -> Result<DVector<f64>, ClassifierError> {
    let n = c.xc.nrows() as f64;
    let d = c.xc.ncols();
    let cov = match s.shrinkage {
        Shrinkage::None => c.xc.transpose() * &c.xc / n,
        Shrinkage::Auto => shrunk_covariance(&c.xc),
    };
    let svd = cov.svd(true, true);
    let s_max = svd.singular_values.max();
    let cutoff = match s.shrinkage {
        Shrinkage::None => s.tol * s_max,
        Shrinkage::Auto => f64::EPSILON * d as f64 * s_max,
    };
    let rank = svd.singular_values.iter().filter(|&&v| v > cutoff).count();
    // With shrinkage a zero covariance yields the minimum-norm solution w = 0.
    if s.shrinkage == Shrinkage::None && rank < d {
        return Err(ClassifierError::SingularCovariance { rank, dim: d });
    }
    let diff = &c.mean[1] - &c.mean[0];
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut w = DVector::zeros(d);
    for (k, &sv) in svd.singular_values.iter().enumerate() {
        if sv > cutoff {
            let coef = u.column(k).dot(&diff) / sv;
            w += v_t.row(k).transpose() * coef;
        }
    }
    Ok(w)
}

fn svd_weights(c: &Centered, s: &LdaSettings) -> Result<DVector<f64>, ClassifierError> {
    let n = c.xc.nrows() as f64;
    let d = c.xc.ncols();
    let scale = column_scale(&c.xc);
    let xs = DMatrix::from_fn(c.xc.nrows(), d, |i, j| c.xc[(i, j)] / scale[j] / n.sqrt());
    let svd = xs.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let rank = svd.singular_values.iter().filter(|&&v| v > s.tol).count();
    if rank == 0 {
        return Err(ClassifierError::SingularCovariance { rank, dim: d });
    }
    let diff = (&c.mean[1] - &c.mean[0]).component_div(&scale);
    let mut w = DVector::zeros(d);
    for (k, &sv) in svd.singular_values.iter().enumerate() {
        if sv > s.tol {
            let v = v_t.row(k).transpose();
            w += &v * (v.dot(&diff) / (sv * sv));
        }
    }
    Ok(w.component_div(&scale))
}

pub fn train_lda(
    train: &FeatureMatrix,
    settings: &LdaSettings,
) -> Result<LdaModel, ClassifierError> {
    super::check_training(train)?;
    let c = center(train);
    let w = match settings.solver {
        Solver::Lsqr => lsqr_weights(&c, settings)?,
        Solver::Svd => svd_weights(&c, settings)?,
    };
    let prior_ratio = (c.count[1] as f64 / c.count[0] as f64).ln();
    let bias = -0.5 * w.dot(&(&c.mean[0] + &c.mean[1])) + prior_ratio;
    if !bias.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(ClassifierError::Diverged);
    }
    Ok(LdaModel {
        weights: w.iter().copied().collect(),
        bias,
    })
}
