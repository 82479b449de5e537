use std::fmt;
use std::str::FromStr;

use super::ClassifierError;

/// Classifier families available to the search and sweep stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Sgd,
    Perceptron,
    PassiveAggressive,
    RandomForest,
    KNeighbors,
    Svc,
    Lda,
    Gnb,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Sgd,
        Family::Perceptron,
        Family::PassiveAggressive,
        Family::RandomForest,
        Family::KNeighbors,
        Family::Svc,
        Family::Lda,
        Family::Gnb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Sgd => "SGD",
            Family::Perceptron => "Perceptron",
            Family::PassiveAggressive => "PassiveAggressive",
            Family::RandomForest => "RandomForest",
            Family::KNeighbors => "KNeighbors",
            Family::Svc => "SVC",
            Family::Lda => "LDA",
            Family::Gnb => "GNB",
        }
    }

    /// Keys a spec of this family may carry.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::Sgd => &[
                "loss",
                "penalty",
                "alpha",
                "l1_ratio",
                "max_iter",
                "tol",
                "learning_rate",
                "eta0",
            ],
            Family::Perceptron => &["penalty", "alpha", "max_iter", "tol", "l1_ratio"],
            Family::PassiveAggressive => &["C", "max_iter", "tol", "loss"],
            Family::RandomForest => &[
                "n_estimators",
                "criterion",
                "min_samples_split",
                "min_samples_leaf",
                "max_features",
                "bootstrap",
            ],
            Family::KNeighbors => &["n_neighbors", "algorithm", "leaf_size", "p"],
            Family::Svc => &["C", "kernel", "degree", "tol", "max_iter"],
            Family::Lda => &["solver", "tol", "shrinkage"],
            Family::Gnb => &["var_smoothing"],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let family = match s {
            "SGD" | "SGDClassifier" | "sgd" => Family::Sgd,
            "Perceptron" | "perceptron" => Family::Perceptron,
            "PassiveAggressive"
            | "PassiveAggressiveClassifier"
            | "PassiveAgressiveClassifier"
            | "PA"
            | "pa" => Family::PassiveAggressive,
            "RandomForest" | "RandomForestClassifier" | "RF" | "rf" => Family::RandomForest,
            "KNeighbors" | "KNeighborsClassifier" | "KNN" | "KN" | "knn" => Family::KNeighbors,
            "SVC" | "svc" => Family::Svc,
            "LDA" | "LinearDiscriminantAnalysis" | "lda" => Family::Lda,
            "GNB" | "GaussianNB" | "gnb" => Family::Gnb,
            other => return Err(ClassifierError::UnknownFamily(other.to_string())),
        };
        Ok(family)
    }
}

/// A family plus one point of its hyperparameter space.
///
/// Values are kept as their textual spellings (`hinge`, `1e-5`, `none`) and
/// parsed when a model is fitted. Parameters not listed fall back to the
/// family defaults.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClassifierSpec {
    pub family: Family,
    pub params: Vec<(String, String)>,
}

impl ClassifierSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            params: Vec::new(),
        }
    }

    /// Sets `key`, replacing an earlier value.
    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        let value = value.to_string();
        match self.params.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.params.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Checks keys and parses every value without fitting anything.
    pub fn validate(&self) -> Result<(), ClassifierError> {
        super::Settings::from_spec(self, 1).map(|_| ())
    }
}

impl fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)?;
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

impl FromStr for ClassifierSpec {
    type Err = ClassifierError;

    /// Parses `Family key=value key=value ...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        let family: Family = parts
            .next()
            .ok_or_else(|| ClassifierError::InvalidSpec("empty classifier spec".into()))?
            .parse()?;
        let mut spec = ClassifierSpec::new(family);
        for part in parts {
            let (k, v) = part.split_once('=').ok_or_else(|| {
                ClassifierError::InvalidSpec(format!("expected key=value, got {part:?}"))
            })?;
            if spec.get(k).is_some() {
                return Err(ClassifierError::InvalidSpec(format!("duplicate key {k:?}")));
            }
            spec = spec.with(k, v);
        }
        Ok(spec)
    }
}

/// Typed access to the textual parameters of a spec.
pub(crate) struct ParamReader<'a> {
    spec: &'a ClassifierSpec,
}

impl<'a> ParamReader<'a> {
    pub(crate) fn new(spec: &'a ClassifierSpec) -> Result<Self, ClassifierError> {
        let allowed = spec.family.param_names();
        if let Some((k, _)) = spec
            .params
            .iter()
            .find(|(k, _)| !allowed.contains(&k.as_str()))
        {
            return Err(ClassifierError::UnknownParam {
                family: spec.family,
                key: k.clone(),
            });
        }
        Ok(Self { spec })
    }

    fn invalid(&self, key: &str, value: &str, expected: &str) -> ClassifierError {
        ClassifierError::InvalidParam {
            family: self.spec.family,
            key: key.to_string(),
            value: value.to_string(),
            expected: expected.to_string(),
        }
    }

    pub(crate) fn f64(&self, key: &str, default: f64) -> Result<f64, ClassifierError> {
        match self.spec.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| self.invalid(key, v, "a finite number")),
        }
    }

    pub(crate) fn non_negative(&self, key: &str, default: f64) -> Result<f64, ClassifierError> {
        let v = self.f64(key, default)?;
        if v < 0.0 {
            return Err(self.invalid(key, &v.to_string(), "a value >= 0"));
        }
        Ok(v)
    }

    /// Optional number; `none` disables the setting.
    pub(crate) fn optional_f64(
        &self,
        key: &str,
        default: Option<f64>,
    ) -> Result<Option<f64>, ClassifierError> {
        match self.spec.get(key) {
            None => Ok(default),
            Some(v) if v.eq_ignore_ascii_case("none") => Ok(None),
            Some(_) => self.non_negative(key, 0.0).map(Some),
        }
    }

    pub(crate) fn usize(&self, key: &str, default: usize) -> Result<usize, ClassifierError> {
        match self.spec.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<usize>()
                .ok()
                .or_else(|| {
                    // Accept integral floats such as `1e4`.
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.fract() == 0.0 && *x >= 0.0 && *x < 1e15)
                        .map(|x| x as usize)
                })
                .ok_or_else(|| self.invalid(key, v, "a non-negative integer")),
        }
    }

    pub(crate) fn bool(&self, key: &str, default: bool) -> Result<bool, ClassifierError> {
        match self.spec.get(key) {
            None => Ok(default),
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(self.invalid(key, v, "true or false")),
            },
        }
    }

    pub(crate) fn choice<T: Copy>(
        &self,
        key: &str,
        options: &[(&str, T)],
        default: T,
    ) -> Result<T, ClassifierError> {
        match self.spec.get(key) {
            None => Ok(default),
            Some(v) => {
                let normalized = v.trim_matches(|c| c == '\'' || c == '"');
                options
                    .iter()
                    .find(|(name, _)| name.eq_ignore_ascii_case(normalized))
                    .map(|&(_, t)| t)
                    .ok_or_else(|| {
                        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                        self.invalid(key, v, &format!("one of {}", names.join(", ")))
                    })
            }
        }
    }

    pub(crate) fn raw(&self, key: &str) -> Option<&str> {
        self.spec.get(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_and_parse_round_trip() {
        let spec = ClassifierSpec::new(Family::Sgd)
            .with("loss", "log")
            .with("alpha", "1e-2");
        let text = spec.to_string();
        assert_eq!(text, "SGD loss=log alpha=1e-2");
        assert_eq!(text.parse::<ClassifierSpec>().unwrap(), spec);
        assert_eq!(
            "PassiveAgressiveClassifier C=0.1"
                .parse::<ClassifierSpec>()
                .unwrap()
                .family,
            Family::PassiveAggressive
        );
    }

    #[test]
    fn rejects_bad_specs() {
        assert!("".parse::<ClassifierSpec>().is_err());
        assert!("Boosting n=3".parse::<ClassifierSpec>().is_err());
        assert!("SGD loss".parse::<ClassifierSpec>().is_err());
        assert!("SGD loss=log loss=hinge".parse::<ClassifierSpec>().is_err());
        let unknown = ClassifierSpec::new(Family::Lda).with("kernel", "rbf");
        assert!(matches!(
            unknown.validate(),
            Err(ClassifierError::UnknownParam { .. })
        ));
        let bad_value = ClassifierSpec::new(Family::Sgd).with("loss", "cubic");
        assert!(matches!(
            bad_value.validate(),
            Err(ClassifierError::InvalidParam { .. })
        ));
    }

    #[test]
    fn with_replaces_existing_key() {
        let spec = ClassifierSpec::new(Family::Svc).with("C", 1).with("C", 10);
        assert_eq!(spec.params.len(), 1);
        assert_eq!(spec.get("C"), Some("10"));
    }
}
