//! Persistence and partitioning of channel-estimate traces.
//!
//! On-disk layout, one trace per file:
//!
//! ```text
//! #m=48
//! #scenario=office-a
//! 0,B,<re_0>,<im_0>,...,<re_47>,<im_47>
//! 1,E,...
//! ```
//!
//! The first line must be `#m=<int>`; further `#key=value` lines carry
//! free-form metadata and are written in key order. Floats are written with
//! 17 significant digits so a load reproduces every bit.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use thiserror::Error;

use crate::label::TransmitterLabel;
use crate::rng::stream_rng;

mod partition;

pub use partition::{partition_collection, PartitionPolicy, TraceCollection};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: unknown transmitter label {token:?}")]
    UnknownLabel { line: usize, token: String },
    #[error("line {line}: could not parse number {token:?}")]
    BadNumber { line: usize, token: String },
    #[error("line {line}: non-finite channel gain")]
    NonFinite { line: usize },
    #[error("line {line}: expected packet index {expected}, found {found}")]
    BadIndex {
        line: usize,
        expected: usize,
        found: String,
    },
    #[error("record {index} has {found} gains, dataset width is {expected}")]
    WidthMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid metadata entry {key:?}: {reason}")]
    BadMetadata { key: String, reason: String },
    #[error("cannot partition {total} datasets with {l_valid} for validation")]
    BadPartition { l_valid: usize, total: usize },
}

impl TraceError {
    fn io(path: &Path, source: io::Error) -> Self {
        TraceError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub label: TransmitterLabel,
    pub gains: Vec<Complex64>,
}

/// Time-ordered channel estimates of one measurement position. The packet
/// index of a record is its position in `records`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceDataset {
    pub m: usize,
    pub records: Vec<TraceRecord>,
    pub metadata: BTreeMap<String, String>,
}

impl TraceDataset {
    pub fn from_parts(
        m: usize,
        records: Vec<TraceRecord>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self, TraceError> {
        let ds = Self {
            m,
            records,
            metadata,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<TransmitterLabel> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn eve_fraction(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.label.is_eve()).count() as f64 / self.len() as f64
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        for (index, r) in self.records.iter().enumerate() {
            if r.gains.len() != self.m {
                return Err(TraceError::WidthMismatch {
                    index,
                    expected: self.m,
                    found: r.gains.len(),
                });
            }
            if r.gains
                .iter()
                .any(|g| !g.re.is_finite() || !g.im.is_finite())
            {
                return Err(TraceError::NonFinite { line: index });
            }
        }
        for (key, value) in &self.metadata {
            let reason = if key.is_empty() {
                Some("empty key")
            } else if key == "m" {
                Some("reserved key")
            } else if key.contains('=') || key.contains('\n') || key.contains('\r') {
                Some("key contains '=' or a line break")
            } else if value.contains('\n') || value.contains('\r') {
                Some("value contains a line break")
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(TraceError::BadMetadata {
                    key: key.clone(),
                    reason: reason.into(),
                });
            }
        }
        Ok(())
    }

    /// Writes the dataset in the trace format.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "#m={}", self.m)?;
        for (key, value) in &self.metadata {
            writeln!(out, "#{key}={value}")?;
        }
        let mut line = String::with_capacity(48 * self.m + 16);
        for (k, r) in self.records.iter().enumerate() {
            use std::fmt::Write as _;
            line.clear();
            let _ = write!(line, "{k},{}", r.label.token());
            for g in &r.gains {
                let _ = write!(line, ",{:.16e},{:.16e}", g.re, g.im);
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        out.flush()
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self, TraceError> {
        let mut lines = input.lines().enumerate();
        let read_err = |e: io::Error| TraceError::io(Path::new("<stream>"), e);

        let (_, first) = lines.next().ok_or(TraceError::MalformedHeader {
            line: 1,
            reason: "empty file".into(),
        })?;
        let first = first.map_err(read_err)?;
        let m = first
            .strip_prefix("#m=")
            .and_then(|v| v.trim().parse::<usize>().ok())
            .ok_or_else(|| TraceError::MalformedHeader {
                line: 1,
                reason: format!("first line must be #m=<int>, got {first:?}"),
            })?;

        let mut metadata = BTreeMap::new();
        let mut records = Vec::new();
        let expected_fields = 2 + 2 * m;
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.map_err(read_err)?;
            if line.is_empty() {
                continue;
            }
            if let Some(entry) = line.strip_prefix('#') {
                if !records.is_empty() {
                    return Err(TraceError::MalformedHeader {
                        line: line_no,
                        reason: "header line after records".into(),
                    });
                }
                let (key, value) =
                    entry
                        .split_once('=')
                        .ok_or_else(|| TraceError::MalformedHeader {
                            line: line_no,
                            reason: format!("expected #key=value, got {line:?}"),
                        })?;
                if key.is_empty() || key == "m" {
                    return Err(TraceError::MalformedHeader {
                        line: line_no,
                        reason: format!("invalid metadata key {key:?}"),
                    });
                }
                metadata.insert(key.to_string(), value.to_string());
                continue;
            }

            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != expected_fields {
                return Err(TraceError::RaggedRow {
                    line: line_no,
                    expected: expected_fields,
                    found: fields.len(),
                });
            }
            let expected_index = records.len();
            if fields[0].parse::<usize>().ok() != Some(expected_index) {
                return Err(TraceError::BadIndex {
                    line: line_no,
                    expected: expected_index,
                    found: fields[0].to_string(),
                });
            }
            let label = TransmitterLabel::from_token(fields[1]).ok_or_else(|| {
                TraceError::UnknownLabel {
                    line: line_no,
                    token: fields[1].to_string(),
                }
            })?;
            let mut gains = Vec::with_capacity(m);
            for pair in fields[2..].chunks_exact(2) {
                let parse = |tok: &str| -> Result<f64, TraceError> {
                    let v = tok.parse::<f64>().map_err(|_| TraceError::BadNumber {
                        line: line_no,
                        token: tok.to_string(),
                    })?;
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(TraceError::NonFinite { line: line_no })
                    }
                };
                gains.push(Complex64::new(parse(pair[0])?, parse(pair[1])?));
            }
            records.push(TraceRecord { label, gains });
        }
        Ok(Self {
            m,
            records,
            metadata,
        })
    }
}

/// Saves `ds` to `path`, refusing datasets that break their own invariants.
pub fn save_trace(ds: &TraceDataset, path: &Path) -> Result<(), TraceError> {
    ds.validate()?;
    let file = fs::File::create(path).map_err(|e| TraceError::io(path, e))?;
    ds.write_to(BufWriter::new(file))
        .map_err(|e| TraceError::io(path, e))
}

pub fn load_trace(path: &Path) -> Result<TraceDataset, TraceError> {
    let file = fs::File::open(path).map_err(|e| TraceError::io(path, e))?;
    TraceDataset::read_from(BufReader::new(file)).map_err(|e| match e {
        TraceError::Io { source, .. } => TraceError::io(path, source),
        other => other,
    })
}

/// Trace files (`*.csv`) under `dir`, in lexicographic order.
pub fn list_trace_files(dir: &Path) -> Result<Vec<PathBuf>, TraceError> {
    let entries = fs::read_dir(dir).map_err(|e| TraceError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| TraceError::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every trace file in `dir`; dataset order follows file-name order.
pub fn load_trace_dir(dir: &Path) -> Result<Vec<TraceDataset>, TraceError> {
    list_trace_files(dir)?
        .iter()
        .map(|p| load_trace(p))
        .collect()
}

fn shuffled_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, 0x5417));
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_dataset() -> TraceDataset {
        let records = vec![
            TraceRecord {
                label: TransmitterLabel::Bob,
                gains: vec![
                    Complex64::new(0.1, -0.2),
                    Complex64::new(1.0 / 3.0, 2.5e-12),
                ],
            },
            TraceRecord {
                label: TransmitterLabel::Eve,
                gains: vec![
                    Complex64::new(-7.0, 0.0),
                    Complex64::new(f64::MIN_POSITIVE, -1e300),
                ],
            },
            TraceRecord {
                label: TransmitterLabel::Bob,
                gains: vec![
                    Complex64::new(0.0, -0.0),
                    Complex64::new(std::f64::consts::PI, 1.0),
                ],
            },
        ];
        let mut meta = BTreeMap::new();
        meta.insert("scenario".to_string(), "lab".to_string());
        meta.insert("seed".to_string(), "5".to_string());
        TraceDataset::from_parts(2, records, meta).unwrap()
    }

    fn to_bytes(ds: &TraceDataset) -> Vec<u8> {
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        buf
    }

    fn parse(text: &str) -> Result<TraceDataset, TraceError> {
        TraceDataset::read_from(text.as_bytes())
    }

    #[test]
    fn round_trip_is_exact() {
        let ds = small_dataset();
        let bytes = to_bytes(&ds);
        let back = TraceDataset::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(to_bytes(&back), bytes);
        assert_eq!(back.len(), 3);
    }

    #[test]
    fn empty_dataset_is_header_only() {
        let ds = TraceDataset::from_parts(48, vec![], BTreeMap::new()).unwrap();
        assert_eq!(String::from_utf8(to_bytes(&ds)).unwrap(), "#m=48\n");
        assert_eq!(parse("#m=48\n").unwrap(), ds);
    }

    #[test]
    fn save_refuses_width_mismatch() {
        let mut ds = small_dataset();
        ds.records[1].gains.pop();
        let dir = tempfile::tempdir().unwrap();
        let err = save_trace(&ds, &dir.path().join("x.csv")).unwrap_err();
        assert!(matches!(err, TraceError::WidthMismatch { index: 1, .. }));
    }

    #[test]
    fn rejects_malformed_inputs() {
        assert!(matches!(parse(""), Err(TraceError::MalformedHeader { .. })));
        assert!(matches!(
            parse("#scenario=x\n#m=1\n"),
            Err(TraceError::MalformedHeader { .. })
        ));
        assert!(matches!(
            parse("#m=2\n0,B,1,2,3\n"),
            Err(TraceError::RaggedRow {
                line: 2,
                expected: 6,
                found: 5
            })
        ));
        assert!(matches!(
            parse("#m=1\n0,Mallory,1,2\n"),
            Err(TraceError::UnknownLabel { .. })
        ));
        assert!(matches!(
            parse("#m=1\n0,B,inf,2\n"),
            Err(TraceError::NonFinite { .. })
        ));
        assert!(matches!(
            parse("#m=1\n0,B,NaN,2\n"),
            Err(TraceError::NonFinite { .. })
        ));
        assert!(matches!(
            parse("#m=1\n0,B,x,2\n"),
            Err(TraceError::BadNumber { .. })
        ));
        assert!(matches!(
            parse("#m=1\n1,B,1,2\n"),
            Err(TraceError::BadIndex { .. })
        ));
    }

    #[test]
    fn well_formed_three_records() {
        let ds = parse("#m=1\n#note=a=b\n0,B,1,2\n1,E,3,4\n2,B,-1e-3,0\n").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.metadata["note"], "a=b");
        assert_eq!(ds.records[1].label, TransmitterLabel::Eve);
        assert_eq!(ds.records[2].gains[0], Complex64::new(-1e-3, 0.0));
    }

    #[test]
    fn directory_loading_uses_name_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = small_dataset();
        a.metadata.insert("id".into(), "a".into());
        let mut b = small_dataset();
        b.metadata.insert("id".into(), "b".into());
        save_trace(&b, &dir.path().join("trace_01.csv")).unwrap();
        save_trace(&a, &dir.path().join("trace_00.csv")).unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let loaded = load_trace_dir(dir.path()).unwrap();
        assert_eq!(loaded, vec![a, b]);
    }
}
