//! Linear models `f(x) = w.x + b` trained online.
//!
//! SGD minimizes the regularized training error `mean L(y, f(x)) + alpha R(w)`
//! with one stochastic (sub)gradient step per sample, in training order. The
//! L2 part of the penalty is applied as multiplicative weight decay before the
//! loss step and the L1 part as a soft-threshold after it.

use super::spec::ParamReader;
use super::{ClassifierError, RowPredictor};
use crate::label::TransmitterLabel;
use crate::preprocess::FeatureMatrix;

/// Adaptive schedules stop once the step size decays below this.
const MIN_ADAPTIVE_ETA: f64 = 1e-6;
const DLOSS_CLIP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Hinge,
    Log,
    ModifiedHuber,
    SquaredHinge,
    Perceptron,
}

impl Loss {
    /// Loss value at margin `z = y f(x)`.
    pub fn value(self, z: f64) -> f64 {
        match self {
            Loss::Hinge => (1.0 - z).max(0.0),
            Loss::Log => {
                // ln(1 + e^{-z}) without overflow.
                if z > 18.0 {
                    (-z).exp()
                } else if z < -18.0 {
                    -z
                } else {
                    (-z).exp().ln_1p()
                }
            }
            Loss::ModifiedHuber => {
                if z >= 1.0 {
                    0.0
                } else if z >= -1.0 {
                    (1.0 - z) * (1.0 - z)
                } else {
                    -4.0 * z
                }
            }
            Loss::SquaredHinge => {
                let h = (1.0 - z).max(0.0);
                h * h
            }
            Loss::Perceptron => (-z).max(0.0),
        }
    }

    /// Derivative of the loss with respect to `f(x)`.
    pub fn dloss(self, y: f64, p: f64) -> f64 {
        let z = y * p;
        match self {
            Loss::Hinge => {
                if z < 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            Loss::Log => {
                if z > 18.0 {
                    -y * (-z).exp()
                } else if z < -18.0 {
                    -y
                } else {
                    -y / (z.exp() + 1.0)
                }
            }
            Loss::ModifiedHuber => {
                if z >= 1.0 {
                    0.0
                } else if z >= -1.0 {
                    -2.0 * (1.0 - z) * y
                } else {
                    -4.0 * y
                }
            }
            Loss::SquaredHinge => {
                if z < 1.0 {
                    -2.0 * (1.0 - z) * y
                } else {
                    0.0
                }
            }
            Loss::Perceptron => {
                if z <= 0.0 {
                    -y
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Penalty {
    None,
    L2,
    L1,
    ElasticNet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearningRate {
    Constant,
    Optimal,
    InvScaling,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdSettings {
    pub loss: Loss,
    pub penalty: Penalty,
    pub alpha: f64,
    pub l1_ratio: f64,
    pub max_iter: usize,
    /// Minimum per-epoch objective improvement; `None` runs all epochs.
    pub tol: Option<f64>,
    pub learning_rate: LearningRate,
    pub eta0: f64,
}

const LOSSES: [(&str, Loss); 5] = [
    ("hinge", Loss::Hinge),
    ("log", Loss::Log),
    ("log_loss", Loss::Log),
    ("modified_huber", Loss::ModifiedHuber),
    ("squared_hinge", Loss::SquaredHinge),
];

const PENALTIES: [(&str, Penalty); 4] = [
    ("none", Penalty::None),
    ("l2", Penalty::L2),
    ("l1", Penalty::L1),
    ("elasticnet", Penalty::ElasticNet),
];

impl SgdSettings {
    pub(crate) fn read(r: &ParamReader<'_>) -> Result<Self, ClassifierError> {
        let mut losses = LOSSES.to_vec();
        losses.push(("perceptron", Loss::Perceptron));
        let settings = Self {
            loss: r.choice("loss", &losses, Loss::Hinge)?,
            penalty: r.choice("penalty", &PENALTIES, Penalty::L2)?,
            alpha: r.non_negative("alpha", 1e-4)?,
            l1_ratio: r.non_negative("l1_ratio", 0.15)?,
            max_iter: r.usize("max_iter", 1000)?,
            tol: r.optional_f64("tol", Some(1e-3))?,
            learning_rate: r.choice(
                "learning_rate",
                &[
                    ("constant", LearningRate::Constant),
                    ("optimal", LearningRate::Optimal),
                    ("invscaling", LearningRate::InvScaling),
                    ("adaptive", LearningRate::Adaptive),
                ],
                LearningRate::Optimal,
            )?,
            eta0: r.non_negative("eta0", 0.01)?,
        };
        settings.check(r)?;
        Ok(settings)
    }

    /// Perceptron: perceptron loss, constant unit step, same penalty options.
    pub(crate) fn perceptron(r: &ParamReader<'_>) -> Result<Self, ClassifierError> {
        let settings = Self {
            loss: Loss::Perceptron,
            penalty: r.choice("penalty", &PENALTIES, Penalty::None)?,
            alpha: r.non_negative("alpha", 1e-4)?,
            l1_ratio: r.non_negative("l1_ratio", 0.15)?,
            max_iter: r.usize("max_iter", 1000)?,
            tol: r.optional_f64("tol", Some(1e-3))?,
            learning_rate: LearningRate::Constant,
            eta0: 1.0,
        };
        settings.check(r)?;
        Ok(settings)
    }

    fn check(&self, r: &ParamReader<'_>) -> Result<(), ClassifierError> {
        let invalid = |key: &str, expected: &str| ClassifierError::InvalidParam {
            family: super::Family::Sgd,
            key: key.into(),
            value: r.raw(key).unwrap_or("default").into(),
            expected: expected.into(),
        };
        if self.l1_ratio > 1.0 {
            return Err(invalid("l1_ratio", "a value in [0, 1]"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "at least 1"));
        }
        if self.learning_rate == LearningRate::Optimal && self.alpha == 0.0 {
            return Err(invalid("alpha", "alpha > 0 for the optimal schedule"));
        }
        if self.learning_rate != LearningRate::Optimal && self.eta0 <= 0.0 {
            return Err(invalid("eta0", "eta0 > 0 for this schedule"));
        }
        Ok(())
    }

    /// Share of the penalty that is L1.
    fn l1_share(&self) -> f64 {
        match self.penalty {
            Penalty::None | Penalty::L2 => 0.0,
            Penalty::L1 => 1.0,
            Penalty::ElasticNet => self.l1_ratio,
        }
    }

    fn effective_alpha(&self) -> f64 {
        if self.penalty == Penalty::None {
            0.0
        } else {
            self.alpha
        }
    }

    /// `R(w)`: `(1 - r)/2 |w|^2 + r |w|_1` with `r` the L1 share.
    pub fn regularizer(&self, w: &[f64]) -> f64 {
        let r = self.l1_share();
        let l2: f64 = w.iter().map(|x| x * x).sum();
        let l1: f64 = w.iter().map(|x| x.abs()).sum();
        0.5 * (1.0 - r) * l2 + r * l1
    }

    /// Training objective `mean L + alpha R(w)`.
    pub fn objective(&self, model: &LinearModel, train: &FeatureMatrix) -> f64 {
        let loss: f64 = train
            .rows
            .iter()
            .zip(&train.labels)
            .map(|(x, y)| self.loss.value(y.sign() * model.decision(x)))
            .sum();
        loss / train.len() as f64 + self.effective_alpha() * self.regularizer(&model.weights)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

impl RowPredictor for LinearModel {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn predict_row(&self, x: &[f64]) -> TransmitterLabel {
        TransmitterLabel::from_decision(self.decision(x))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Step-size bookkeeping across samples and epochs.
struct Schedule {
    kind: LearningRate,
    eta0: f64,
    alpha: f64,
    /// Offset of the `optimal` schedule.
    t0: f64,
    adaptive_eta: f64,
}

impl Schedule {
    fn new(s: &SgdSettings) -> Self {
        let t0 = if s.learning_rate == LearningRate::Optimal {
            // Start so that the first step roughly matches a weight of typical
            // size 1/sqrt(sqrt(alpha)).
            let typw = (1.0 / s.alpha.sqrt()).sqrt();
            let initial_eta = typw / s.loss.dloss(1.0, -typw).abs().max(1.0);
            1.0 / (initial_eta * s.alpha)
        } else {
            0.0
        };
        Self {
            kind: s.learning_rate,
            eta0: s.eta0,
            alpha: s.alpha,
            t0,
            adaptive_eta: s.eta0,
        }
    }

    /// Step size for global sample counter `t`, starting at 1.
    fn eta(&self, t: f64) -> f64 {
        match self.kind {
            LearningRate::Constant => self.eta0,
            LearningRate::InvScaling => self.eta0 / t.sqrt(),
            LearningRate::Optimal => 1.0 / (self.alpha * (self.t0 + t - 1.0)),
            LearningRate::Adaptive => self.adaptive_eta,
        }
    }
}

pub fn train_sgd(train: &FeatureMatrix, s: &SgdSettings) -> Result<LinearModel, ClassifierError> {
    super::check_training(train)?;
    let mut model = LinearModel::zeros(train.feature_dim);
    let mut schedule = Schedule::new(s);
    let alpha = s.effective_alpha();
    let l1 = s.l1_share();
    let mut t = 1.0;
    let mut previous = f64::INFINITY;

    for _epoch in 0..s.max_iter {
        for (x, label) in train.rows.iter().zip(&train.labels) {
            let y = label.sign();
            let eta = schedule.eta(t);
            let p = model.decision(x);
            let g = s.loss.dloss(y, p).clamp(-DLOSS_CLIP, DLOSS_CLIP);
            if alpha > 0.0 && l1 < 1.0 {
                let decay = (1.0 - (1.0 - l1) * eta * alpha).max(0.0);
                model.weights.iter_mut().for_each(|w| *w *= decay);
            }
            if g != 0.0 {
                for (w, xi) in model.weights.iter_mut().zip(x) {
                    *w -= eta * g * xi;
                }
                model.bias -= eta * g;
            }
            if alpha > 0.0 && l1 > 0.0 {
                let threshold = eta * alpha * l1;
                for w in model.weights.iter_mut() {
                    *w = w.signum() * (w.abs() - threshold).max(0.0);
                }
            }
            t += 1.0;
        }
        if !model.is_finite() {
            return Err(ClassifierError::Diverged);
        }
        let objective = s.objective(&model, train);
        if let Some(tol) = s.tol {
            if previous - objective < tol {
                if s.learning_rate == LearningRate::Adaptive {
                    schedule.adaptive_eta /= 5.0;
                    if schedule.adaptive_eta < MIN_ADAPTIVE_ETA {
                        break;
                    }
                } else {
                    break;
                }
            }
        }
        previous = previous.min(objective);
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaLoss {
    /// PA-I: step `min(C, l / |x|^2)`.
    Hinge,
    /// PA-II: step `l / (|x|^2 + 1/(2C))`.
    SquaredHinge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaSettings {
    pub c: f64,
    pub max_iter: usize,
    pub tol: Option<f64>,
    pub loss: PaLoss,
}

impl PaSettings {
    pub(crate) fn read(r: &ParamReader<'_>) -> Result<Self, ClassifierError> {
        let max_iter = r.usize("max_iter", 1000)?;
        if max_iter == 0 {
            return Err(ClassifierError::InvalidParam {
                family: super::Family::PassiveAggressive,
                key: "max_iter".into(),
                value: "0".into(),
                expected: "at least 1".into(),
            });
        }
        Ok(Self {
            c: r.non_negative("C", 1.0)?,
            max_iter,
            tol: r.optional_f64("tol", Some(1e-3))?,
            loss: r.choice(
                "loss",
                &[
                    ("hinge", PaLoss::Hinge),
                    ("squared_hinge", PaLoss::SquaredHinge),
                ],
                PaLoss::Hinge,
            )?,
        })
    }
}

/// Online passive-aggressive updates. The intercept is treated as an extra
/// constant-one feature, so `|x|^2` in the step size includes it.
pub fn train_passive_aggressive(
    train: &FeatureMatrix,
    s: &PaSettings,
) -> Result<LinearModel, ClassifierError> {
    super::check_training(train)?;
    let mut model = LinearModel::zeros(train.feature_dim);
    let mut previous = f64::INFINITY;
    for _epoch in 0..s.max_iter {
        for (x, label) in train.rows.iter().zip(&train.labels) {
            pa_step(&mut model, x, label.sign(), s);
        }
        if !model.is_finite() {
            return Err(ClassifierError::Diverged);
        }
        let objective = train
            .rows
            .iter()
            .zip(&train.labels)
            .map(|(x, y)| Loss::Hinge.value(y.sign() * model.decision(x)))
            .sum::<f64>()
            / train.len() as f64;
        if let Some(tol) = s.tol {
            if previous - objective < tol {
                break;
            }
        }
        previous = previous.min(objective);
    }
    Ok(model)
}

pub(crate) fn pa_step(model: &mut LinearModel, x: &[f64], y: f64, s: &PaSettings) {
    let loss = (1.0 - y * model.decision(x)).max(0.0);
    if loss == 0.0 || s.c == 0.0 {
        return;
    }
    let sq_norm = dot(x, x) + 1.0;
    let tau = match s.loss {
        PaLoss::Hinge => s.c.min(loss / sq_norm),
        PaLoss::SquaredHinge => loss / (sq_norm + 1.0 / (2.0 * s.c)),
    };
    for (w, xi) in model.weights.iter_mut().zip(x) {
        *w += tau * y * xi;
    }
    model.bias += tau * y;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{fit, ClassifierSpec, Family, FittedModel};
    use crate::label::TransmitterLabel::{Bob as B, Eve as E};

    fn two_points() -> FeatureMatrix {
        FeatureMatrix::new(vec![vec![-1.0], vec![1.0]], vec![B, E]).unwrap()
    }

    fn linear(model: FittedModel) -> LinearModel {
        match model {
            FittedModel::Linear(m) => m,
            other => panic!("expected a linear model, got {other:?}"),
        }
    }

    fn noisy_data(n: usize, seed: u64) -> FeatureMatrix {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(seed, 1);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = if i % 3 == 0 { E } else { B };
            let shift = if label.is_eve() { 0.4 } else { -0.4 };
            rows.push(
                (0..4)
                    .map(|_| shift + rng.random_range(-1.0..1.0))
                    .collect(),
            );
            labels.push(label);
        }
        FeatureMatrix::new(rows, labels).unwrap()
    }

    #[test]
    fn hinge_separates_two_points() {
        let spec = ClassifierSpec::new(Family::Sgd)
            .with("loss", "hinge")
            .with("penalty", "none")
            .with("learning_rate", "constant")
            .with("eta0", 0.5);
        let train = two_points();
        let m = fit(&spec, &train, 0).unwrap();
        assert_eq!(crate::classifiers::predict(&m, &train).unwrap(), vec![B, E]);
    }

    #[test]
    fn stronger_l2_shrinks_weights() {
        let train = noisy_data(40, 1);
        let norm = |alpha: f64| {
            let spec = ClassifierSpec::new(Family::Sgd)
                .with("penalty", "l2")
                .with("alpha", alpha)
                .with("learning_rate", "constant")
                .with("eta0", 0.001)
                .with("max_iter", 200)
                .with("tol", "none");
            let m = linear(fit(&spec, &train, 0).unwrap());
            dot(&m.weights, &m.weights).sqrt()
        };
        assert!(norm(1e2) < norm(1e-6));
    }

    #[test]
    fn perceptron_equals_sgd_with_perceptron_loss() {
        let train = noisy_data(30, 2);
        let p = fit(
            &ClassifierSpec::new(Family::Perceptron)
                .with("penalty", "l2")
                .with("alpha", 1e-3)
                .with("max_iter", 50),
            &train,
            9,
        )
        .unwrap();
        let s = fit(
            &ClassifierSpec::new(Family::Sgd)
                .with("loss", "perceptron")
                .with("penalty", "l2")
                .with("alpha", 1e-3)
                .with("max_iter", 50)
                .with("learning_rate", "constant")
                .with("eta0", 1),
            &train,
            9,
        )
        .unwrap();
        assert_eq!(linear(p), linear(s));
    }

    #[test]
    fn perceptron_single_epoch_still_returns_model() {
        let train = noisy_data(30, 3);
        let spec = ClassifierSpec::new(Family::Perceptron).with("max_iter", 1);
        assert!(fit(&spec, &train, 0).is_ok());
    }

    #[test]
    fn pa_closed_form_step() {
        let s = PaSettings {
            c: 1e6,
            max_iter: 1,
            tol: None,
            loss: PaLoss::Hinge,
        };
        let x = [0.6, 0.8];
        for y in [-1.0, 1.0] {
            let mut m = LinearModel::zeros(2);
            pa_step(&mut m, &x, y, &s);
            assert!((y * m.decision(&x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pa_with_zero_c_never_moves() {
        let train = noisy_data(20, 4);
        for loss in ["hinge", "squared_hinge"] {
            let spec = ClassifierSpec::new(Family::PassiveAggressive)
                .with("C", 0)
                .with("loss", loss);
            let m = linear(fit(&spec, &train, 0).unwrap());
            assert_eq!(m, LinearModel::zeros(4));
        }
    }

    #[test]
    fn dot_product_oracle_on_three_points() {
        let m = LinearModel {
            weights: vec![0.5, -2.0],
            bias: 0.25,
        };
        // Hand computed: 0.5*1 - 2*0.5 + 0.25 = -0.25; 0.5*2 - 2*0 + 0.25 = 1.25;
        // 0.5*(-1) - 2*(-0.375) + 0.25 = 0.5.
        let cases = [([1.0, 0.5], B), ([2.0, 0.0], E), ([-1.0, -0.375], E)];
        for (x, expected) in cases {
            assert_eq!(m.predict_row(&x), expected);
        }
        assert_eq!(m.predict_row(&[0.0, 0.125]), B);
    }

    #[test]
    fn reference_sgd_spec_is_accepted() {
        let spec: ClassifierSpec = "SGD loss=log penalty=elasticnet alpha=1e-2 l1_ratio=1 max_iter=10000 tol=1e-5 learning_rate=adaptive eta0=0.5"
            .parse()
            .unwrap();
        spec.validate().unwrap();
        let train = noisy_data(20, 5);
        assert!(fit(&spec, &train, 0).is_ok());
    }

    #[test]
    fn loss_derivatives_match_finite_differences() {
        let h = 1e-6;
        for loss in [
            Loss::Hinge,
            Loss::Log,
            Loss::ModifiedHuber,
            Loss::SquaredHinge,
            Loss::Perceptron,
        ] {
            for &y in &[-1.0, 1.0] {
                for &p in &[-2.3, -0.4, 0.37, 1.8] {
                    let fd = (loss.value(y * (p + h)) - loss.value(y * (p - h))) / (2.0 * h);
                    assert!((fd - loss.dloss(y, p)).abs() < 1e-5, "{loss:?} y={y} p={p}");
                }
            }
        }
    }

    #[test]
    fn bad_schedules_rejected() {
        let optimal_no_alpha = ClassifierSpec::new(Family::Sgd)
            .with("learning_rate", "optimal")
            .with("alpha", 0);
        assert!(optimal_no_alpha.validate().is_err());
        let constant_no_eta = ClassifierSpec::new(Family::Sgd)
            .with("learning_rate", "constant")
            .with("eta0", 0);
        assert!(constant_no_eta.validate().is_err());
        assert!(ClassifierSpec::new(Family::Sgd)
            .with("l1_ratio", 2)
            .validate()
            .is_err());
    }
}
