//! Tidy CSV files for sweep results.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use super::sweep::{AggregateRow, SweepRow};

pub const ROW_HEADER: [&str; 6] = [
    "variable",
    "value",
    "classifier",
    "dataset",
    "seed",
    "accuracy",
];
pub const AGGREGATE_HEADER: [&str; 8] = [
    "variable",
    "value",
    "classifier",
    "count",
    "failures",
    "mean",
    "min",
    "max",
];

fn to_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn write_records<W: Write, T: serde::Serialize>(
    out: W,
    header: &[&str],
    rows: &[T],
) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(header).map_err(to_io)?;
    for r in rows {
        w.serialize(r).map_err(to_io)?;
    }
    w.flush()
}

/// One line per measurement; failed points leave `accuracy` empty.
pub fn write_rows<W: Write>(out: W, rows: &[SweepRow]) -> io::Result<()> {
    write_records(out, &ROW_HEADER, rows)
}

pub fn write_aggregate<W: Write>(out: W, rows: &[AggregateRow]) -> io::Result<()> {
    write_records(out, &AGGREGATE_HEADER, rows)
}

pub fn read_rows<R: Read>(input: R) -> io::Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(to_io)?.clone();
    if header.iter().ne(ROW_HEADER) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!(
                "unexpected sweep header {:?}",
                header.iter().collect::<Vec<_>>()
            ),
        ));
    }
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
}

pub fn save_rows(path: &Path, rows: &[SweepRow]) -> io::Result<()> {
    write_rows(io::BufWriter::new(File::create(path)?), rows)
}

pub fn save_aggregate(path: &Path, rows: &[AggregateRow]) -> io::Result<()> {
    write_aggregate(io::BufWriter::new(File::create(path)?), rows)
}

pub fn load_rows(path: &Path) -> io::Result<Vec<SweepRow>> {
    read_rows(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sweep::aggregate;

    fn rows() -> Vec<SweepRow> {
        vec![
            SweepRow {
                variable: "FeatureDim".into(),
                value: 16.0,
                classifier: "SGD".into(),
                dataset: 2,
                seed: u64::MAX,
                accuracy: Some(0.9871794871794872),
            },
            SweepRow {
                variable: "FeatureDim".into(),
                value: 5.0,
                classifier: "LDA solver=lsqr".into(),
                dataset: 3,
                seed: 17,
                accuracy: None,
            },
        ]
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut buf = Vec::new();
        write_rows(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "variable,value,classifier,dataset,seed,accuracy\n"
        );
    }

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.contains("FeatureDim,5.0,LDA solver=lsqr,3,17,\n"),
            "{text}"
        );
        assert_eq!(read_rows(buf.as_slice()).unwrap(), rows());
    }

    #[test]
    fn aggregate_file_has_expected_columns() {
        let mut buf = Vec::new();
        write_aggregate(&mut buf, &aggregate(&rows())).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("variable,value,classifier,count,failures,mean,min,max")
        );
        assert_eq!(lines.next(), Some("FeatureDim,5.0,LDA solver=lsqr,1,1,,,"));
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_rows("a,b\n1,2\n".as_bytes()).is_err());
    }
}
