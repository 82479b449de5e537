//! Feature extraction: magnitudes, dimension reduction, sliding windows,
//! train/eval split and normalization with training statistics.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::label::{has_both_classes, TransmitterLabel};
use crate::trace::TraceDataset;

/// Reduced dimensions admitted for the 48-subcarrier layout.
pub const DEFAULT_REDUCTIONS: [usize; 10] = [1, 2, 3, 4, 6, 8, 12, 16, 24, 48];

/// Standard deviations below this are treated as zero and replaced by one.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("reduced dimension {m_red} does not divide feature dimension {m}")]
    NotADivisor { m_red: usize, m: usize },
    #[error("window {window} needs more than {rows} rows")]
    WindowTooLarge { window: usize, rows: usize },
    #[error("training size {n_train} must be at least 2 and below the {rows} windowed rows")]
    BadTrainSize { n_train: usize, rows: usize },
    #[error("training rows contain only {0} samples")]
    SingleClassTraining(TransmitterLabel),
    #[error("normalization needs at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("ragged feature rows")]
    Ragged,
    #[error("unknown reduction method {0:?}")]
    UnknownReduction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Sample,
    Mean,
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reduction::Sample => "sample",
            Reduction::Mean => "mean",
        })
    }
}

impl FromStr for Reduction {
    type Err = PreprocessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sample" | "sampling" => Ok(Reduction::Sample),
            "mean" => Ok(Reduction::Mean),
            _ => Err(PreprocessError::UnknownReduction(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub m_red: usize,
    pub reduction: Reduction,
    /// Number of previous packets appended to each row.
    pub window: usize,
    /// Training rows, counted after windowing.
    pub n_train: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            m_red: 48,
            reduction: Reduction::Mean,
            window: 5,
            n_train: 10,
        }
    }
}

/// Windowed feature rows with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<TransmitterLabel>,
    pub feature_dim: usize,
}

impl FeatureMatrix {
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<TransmitterLabel>,
    ) -> Result<Self, PreprocessError> {
        if rows.len() != labels.len() {
            return Err(PreprocessError::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        let feature_dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != feature_dim) {
            return Err(PreprocessError::Ragged);
        }
        Ok(Self {
            rows,
            labels,
            feature_dim,
        })
    }

    /// Empty matrix with a declared width.
    pub fn empty(feature_dim: usize) -> Self {
        Self {
            rows: Vec::new(),
            labels: Vec::new(),
            feature_dim,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }
}

/// Per-record magnitudes of the complex gains, one row per packet.
pub fn magnitude(ds: &TraceDataset) -> Vec<Vec<f64>> {
    ds.records
        .iter()
        .map(|r| r.gains.iter().map(|g| g.norm()).collect())
        .collect()
}

fn block_size(m: usize, m_red: usize) -> Result<usize, PreprocessError> {
    if m_red == 0 || m == 0 || !m.is_multiple_of(m_red) {
        return Err(PreprocessError::NotADivisor { m_red, m });
    }
    Ok(m / m_red)
}

fn row_width(rows: &[Vec<f64>]) -> Result<usize, PreprocessError> {
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PreprocessError::Ragged);
    }
    Ok(m)
}

/// Keeps every `M / m_red`-th feature, starting with the first.
pub fn reduce_sample(rows: &[Vec<f64>], m_red: usize) -> Result<Vec<Vec<f64>>, PreprocessError> {
    let m = row_width(rows)?;
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let step = block_size(m, m_red)?;
    Ok(rows
        .iter()
        .map(|r| r.iter().step_by(step).copied().collect())
        .collect())
}

/// Averages contiguous blocks of `M / m_red` features.
pub fn reduce_mean(rows: &[Vec<f64>], m_red: usize) -> Result<Vec<Vec<f64>>, PreprocessError> {
    let m = row_width(rows)?;
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let step = block_size(m, m_red)?;
    let scale = m_red as f64 / m as f64;
    Ok(rows
        .iter()
        .map(|r| {
            r.chunks_exact(step)
                .map(|block| scale * block.iter().sum::<f64>())
                .collect()
        })
        .collect())
}

pub fn reduce(
    rows: &[Vec<f64>],
    m_red: usize,
    method: Reduction,
) -> Result<Vec<Vec<f64>>, PreprocessError> {
    match method {
        Reduction::Sample => reduce_sample(rows, m_red),
        Reduction::Mean => reduce_mean(rows, m_red),
    }
}

/// Row `k` becomes `[F(k), F(k-1), ..., F(k-W)]`, labeled with the label at
/// time `k`. The first `W` rows have no full history and are dropped.
pub fn windowize(
    rows: &[Vec<f64>],
    labels: &[TransmitterLabel],
    window: usize,
) -> Result<FeatureMatrix, PreprocessError> {
    if rows.len() != labels.len() {
        return Err(PreprocessError::DimensionMismatch {
            expected: rows.len(),
            found: labels.len(),
        });
    }
    let width = row_width(rows)?;
    if window >= rows.len() {
        return Err(PreprocessError::WindowTooLarge {
            window,
            rows: rows.len(),
        });
    }
    let out_rows = (window..rows.len())
        .map(|k| {
            let mut row = Vec::with_capacity(width * (window + 1));
            for lag in 0..=window {
                row.extend_from_slice(&rows[k - lag]);
            }
            row
        })
        .collect();
    Ok(FeatureMatrix {
        rows: out_rows,
        labels: labels[window..].to_vec(),
        feature_dim: width * (window + 1),
    })
}

/// First `n_train` rows train, the rest evaluate.
pub fn split_train_eval(
    fm: &FeatureMatrix,
    n_train: usize,
) -> Result<(FeatureMatrix, FeatureMatrix), PreprocessError> {
    if n_train < 2 || n_train >= fm.len() {
        return Err(PreprocessError::BadTrainSize {
            n_train,
            rows: fm.len(),
        });
    }
    let train_labels = &fm.labels[..n_train];
    if !has_both_classes(train_labels) {
        return Err(PreprocessError::SingleClassTraining(train_labels[0]));
    }
    let train = FeatureMatrix {
        rows: fm.rows[..n_train].to_vec(),
        labels: train_labels.to_vec(),
        feature_dim: fm.feature_dim,
    };
    let eval = FeatureMatrix {
        rows: fm.rows[n_train..].to_vec(),
        labels: fm.labels[n_train..].to_vec(),
        feature_dim: fm.feature_dim,
    };
    Ok((train, eval))
}

/// Per-feature mean and population standard deviation of the training rows.
pub fn fit_norm(train: &FeatureMatrix) -> Result<NormStats, PreprocessError> {
    let n = train.len();
    if n < 2 {
        return Err(PreprocessError::TooFewRows(n));
    }
    let d = train.feature_dim;
    let mut mean = vec![0.0; d];
    for row in &train.rows {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for row in &train.rows {
        for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var
        .into_iter()
        .map(|v| {
            let s = (v / n as f64).sqrt();
            if s < STD_FLOOR {
                1.0
            } else {
                s
            }
        })
        .collect();
    Ok(NormStats { mean, std })
}

pub fn apply_norm(fm: &FeatureMatrix, stats: &NormStats) -> Result<FeatureMatrix, PreprocessError> {
    if stats.mean.len() != fm.feature_dim || stats.std.len() != fm.feature_dim {
        return Err(PreprocessError::DimensionMismatch {
            expected: fm.feature_dim,
            found: stats.mean.len(),
        });
    }
    let rows = fm
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .zip(stats.mean.iter().zip(&stats.std))
                .map(|(x, (m, s))| (x - m) / s)
                .collect()
        })
        .collect();
    Ok(FeatureMatrix {
        rows,
        labels: fm.labels.clone(),
        feature_dim: fm.feature_dim,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub train: FeatureMatrix,
    pub eval: FeatureMatrix,
    pub stats: NormStats,
}

/// magnitude, reduce, windowize, split, normalize.
pub fn run_pipeline(
    ds: &TraceDataset,
    cfg: &PreprocessConfig,
) -> Result<PipelineOutput, PreprocessError> {
    let magnitudes = magnitude(ds);
    if !ds.m.is_multiple_of(cfg.m_red.max(1)) || cfg.m_red == 0 {
        return Err(PreprocessError::NotADivisor {
            m_red: cfg.m_red,
            m: ds.m,
        });
    }
    let reduced = reduce(&magnitudes, cfg.m_red, cfg.reduction)?;
    let windowed = windowize(&reduced, &ds.labels(), cfg.window)?;
    let (train, eval) = split_train_eval(&windowed, cfg.n_train)?;
    let stats = fit_norm(&train)?;
    Ok(PipelineOutput {
        train: apply_norm(&train, &stats)?,
        eval: apply_norm(&eval, &stats)?,
        stats,
    })
}
