//! Gaussian naive Bayes.

use super::spec::ParamReader;
use super::{ClassifierError, RowPredictor};
use crate::label::TransmitterLabel;
use crate::preprocess::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct GnbSettings {
    pub var_smoothing: f64,
}

impl GnbSettings {
    pub(crate) fn read(r: &ParamReader<'_>) -> Result<Self, ClassifierError> {
        Ok(Self {
            var_smoothing: r.non_negative("var_smoothing", 1e-9)?,
        })
    }
}

/// Per-class feature means, variances and log priors, indexed Bob = 0, Eve = 1.
#[derive(Debug, Clone)]
pub struct GnbModel {
    pub means: [Vec<f64>; 2],
    pub vars: [Vec<f64>; 2],
    pub log_priors: [f64; 2],
}

fn mean_var(rows: &[&Vec<f64>], d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        mean.iter_mut().zip(r.iter()).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            var[j] += (r[j] - mean[j]).powi(2);
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    (mean, var)
}

impl GnbModel {
    /// Joint log-likelihood of each class.
    pub fn joint_log_likelihood(&self, x: &[f64]) -> [f64; 2] {
        let mut out = self.log_priors;
        for (c, o) in out.iter_mut().enumerate() {
            for (j, &v) in x.iter().enumerate() {
                let var = self.vars[c][j];
                *o -= 0.5 * (2.0 * std::f64::consts::PI * var).ln()
                    + 0.5 * (v - self.means[c][j]).powi(2) / var;
            }
        }
        out
    }

    /// Posterior `[P(Bob|x), P(Eve|x)]`.
    pub fn predict_proba(&self, x: &[f64]) -> [f64; 2] {
        let jll = self.joint_log_likelihood(x);
        let m = jll[0].max(jll[1]);
        let lse = m + ((jll[0] - m).exp() + (jll[1] - m).exp()).ln();
        [(jll[0] - lse).exp(), (jll[1] - lse).exp()]
    }
}

impl RowPredictor for GnbModel {
    fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn predict_row(&self, x: &[f64]) -> TransmitterLabel {
        let jll = self.joint_log_likelihood(x);
        if jll[1] > jll[0] {
            TransmitterLabel::Eve
        } else {
            TransmitterLabel::Bob
        }
    }
}

pub fn train_gnb(
    train: &FeatureMatrix,
    settings: &GnbSettings,
) -> Result<GnbModel, ClassifierError> {
    super::check_training(train)?;
    let d = train.feature_dim;
    let all: Vec<&Vec<f64>> = train.rows.iter().collect();
    let (_, total_var) = mean_var(&all, d);
    let max_var = total_var.iter().copied().fold(0.0, f64::max);
    let epsilon = if max_var > 0.0 {
        settings.var_smoothing * max_var
    } else {
        settings.var_smoothing
    };
    // A zero floor with a zero variance would divide by zero.
    let epsilon = if epsilon > 0.0 {
        epsilon
    } else {
        f64::MIN_POSITIVE
    };
    let n = train.len() as f64;
    let fit_class = |eve: bool| {
        let rows: Vec<&Vec<f64>> = train
            .rows
            .iter()
            .zip(&train.labels)
            .filter(|(_, l)| l.is_eve() == eve)
            .map(|(r, _)| r)
            .collect();
        let (mean, mut var) = mean_var(&rows, d);
        var.iter_mut().for_each(|v| *v += epsilon);
        (mean, var, (rows.len() as f64 / n).ln())
    };
    let (m0, v0, p0) = fit_class(false);
    let (m1, v1, p1) = fit_class(true);
    Ok(GnbModel {
        means: [m0, m1],
        vars: [v0, v1],
        log_priors: [p0, p1],
    })
}
