//! CSV ingestion and export.
//!
//! Files are UTF-8, comma-separated, with a mandatory header row. One
//! column holds the label; a column named [`CLEAN_LABEL_COLUMN`], when
//! present, is read as the clean-label sidecar; every other column is a
//! numeric feature.
//!
//! Labels that all parse as non-negative integers are used as class
//! indices. Otherwise distinct label strings are mapped to classes in
//! lexicographic order.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

use super::Dataset;

pub const LABEL_COLUMN: &str = "label";
pub const CLEAN_LABEL_COLUMN: &str = "clean_label";

/// Label column selector: header name or 0-based index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name(LABEL_COLUMN.to_string())
    }
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Name(n) => f.write_str(n),
            LabelColumn::Index(i) => write!(f, "{i}"),
        }
    }
}

struct RawLabel {
    text: String,
    line: u64,
}

/// Reads a dataset. Features are returned unscaled; standardize after
/// splitting with [`super::Standardizer`].
pub fn load_csv<T: Scalar>(
    path: impl AsRef<Path>,
    label_column: &LabelColumn,
    class_count: Option<usize>,
) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let parse_err = |line: u64, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(1, 0, format!("{other:?}")),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, 0, e.to_string()))?
        .clone();
    if headers.is_empty() {
        return Err(parse_err(1, 0, "missing header row".to_string()));
    }

    let label_idx = match label_column {
        LabelColumn::Index(i) if *i < headers.len() => *i,
        LabelColumn::Index(i) => {
            return Err(parse_err(
                1,
                0,
                format!("label column index {i} out of range ({} columns)", headers.len()),
            ))
        }
        LabelColumn::Name(name) => headers.iter().position(|h| h == name).ok_or_else(|| {
            parse_err(1, 0, format!("no column named `{name}` in header"))
        })?,
    };
    let clean_idx = headers
        .iter()
        .position(|h| h == CLEAN_LABEL_COLUMN)
        .filter(|&i| i != label_idx);
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != label_idx && Some(i) != clean_idx)
        .collect();
    if feature_cols.is_empty() {
        return Err(parse_err(1, 0, "no feature columns".to_string()));
    }

    let mut data: Vec<T> = Vec::new();
    let mut labels: Vec<RawLabel> = Vec::new();
    let mut clean: Vec<RawLabel> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, 0, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for &c in &feature_cols {
            let cell = &record[c];
            let value = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    parse_err(
                        line,
                        c + 1,
                        format!("non-numeric value `{cell}` in column `{}`", &headers[c]),
                    )
                })?;
            data.push(T::lit(value));
        }
        labels.push(RawLabel {
            text: record[label_idx].to_string(),
            line,
        });
        if let Some(ci) = clean_idx {
            clean.push(RawLabel {
                text: record[ci].to_string(),
                line,
            });
        }
    }
    if labels.is_empty() {
        return Err(parse_err(2, 0, "no data rows".to_string()));
    }

    let all_numeric = labels
        .iter()
        .chain(&clean)
        .all(|l| l.text.parse::<usize>().is_ok());
    let label_col_no = label_idx + 1;
    let (mapped, mapped_clean, classes) = if all_numeric {
        let value = |l: &RawLabel| l.text.parse::<usize>().expect("checked numeric");
        let max = labels.iter().chain(&clean).map(value).max().unwrap_or(0);
        let classes = class_count.unwrap_or(max + 1);
        let check = |l: &RawLabel, col: usize| {
            let v = value(l);
            if v >= classes {
                Err(parse_err(
                    l.line,
                    col,
                    format!("unseen label `{}` (class count is {classes})", l.text),
                ))
            } else {
                Ok(v)
            }
        };
        let mapped = labels
            .iter()
            .map(|l| check(l, label_col_no))
            .collect::<Result<Vec<_>>>()?;
        let clean_col = clean_idx.map_or(0, |c| c + 1);
        let mapped_clean = clean
            .iter()
            .map(|l| check(l, clean_col))
            .collect::<Result<Vec<_>>>()?;
        (mapped, mapped_clean, classes)
    } else {
        let names: BTreeSet<&str> = labels.iter().chain(&clean).map(|l| l.text.as_str()).collect();
        let names: Vec<&str> = names.into_iter().collect();
        let classes = class_count.unwrap_or(names.len());
        let lookup = |l: &RawLabel, col: usize| {
            let rank = names.binary_search(&l.text.as_str()).expect("label collected");
            if rank >= classes {
                Err(parse_err(
                    l.line,
                    col,
                    format!("unseen label `{}` (class count is {classes})", l.text),
                ))
            } else {
                Ok(rank)
            }
        };
        let mapped = labels
            .iter()
            .map(|l| lookup(l, label_col_no))
            .collect::<Result<Vec<_>>>()?;
        let clean_col = clean_idx.map_or(0, |c| c + 1);
        let mapped_clean = clean
            .iter()
            .map(|l| lookup(l, clean_col))
            .collect::<Result<Vec<_>>>()?;
        (mapped, mapped_clean, classes)
    };

    let features = DenseMatrix::new(mapped.len(), feature_cols.len(), data)?;
    let dataset = Dataset::new(features, mapped, classes)?;
    if clean_idx.is_some() {
        dataset.with_clean_labels(mapped_clean)
    } else {
        Ok(dataset)
    }
}

/// Writes `x0..x{d-1}`, `label` and, when present, `clean_label` columns.
/// Values use the shortest representation that reads back exactly.
pub fn write_csv<T: Scalar>(dataset: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let to_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::invalid(format!("writing {}: {other:?}", path.display())),
    };
    let mut writer = csv::Writer::from_path(path).map_err(to_err)?;
    let mut header: Vec<String> = (0..dataset.feature_count()).map(|j| format!("x{j}")).collect();
    header.push(LABEL_COLUMN.to_string());
    if dataset.clean_labels().is_some() {
        header.push(CLEAN_LABEL_COLUMN.to_string());
    }
    writer.write_record(&header).map_err(to_err)?;
    for (i, row) in dataset.features().iter_rows().enumerate() {
        let mut record: Vec<String> = row.iter().map(|v| v.as_f64().to_string()).collect();
        record.push(dataset.labels()[i].to_string());
        if let Some(clean) = dataset.clean_labels() {
            record.push(clean[i].to_string());
        }
        writer.write_record(&record).map_err(to_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn fixture(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_hand_written_fixture() {
        let f = fixture("a,b,label\n1.5,-2,1\n0,3.25,0\n7,8,1\n");
        let d: Dataset<f64> = load_csv(f.path(), &LabelColumn::default(), None).unwrap();
        assert_eq!(d.features().as_slice(), &[1.5, -2.0, 0.0, 3.25, 7.0, 8.0]);
        assert_eq!(d.labels(), &[1, 0, 1]);
        assert_eq!(d.class_count(), 2);
        assert!(d.clean_labels().is_none());
    }

    #[test]
    fn label_by_name_or_index_agree() {
        let f = fixture("a,diagnosis,b\n1,MCI,2\n3,HC,4\n5,MCI,6\n");
        let by_name: Dataset<f64> =
            load_csv(f.path(), &LabelColumn::Name("diagnosis".into()), None).unwrap();
        let by_index: Dataset<f64> = load_csv(f.path(), &"1".parse().unwrap(), None).unwrap();
        assert_eq!(by_name, by_index);
        // lexicographic: HC → 0, MCI → 1
        assert_eq!(by_name.labels(), &[1, 0, 1]);
        assert_eq!(by_name.features().as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn reports_non_numeric_cell_position() {
        let f = fixture("a,b,label\n1,2,0\n3,oops,1\n");
        let err = load_csv::<f64>(f.path(), &LabelColumn::default(), None).unwrap_err();
        match err {
            Error::Parse { line, column, message, .. } => {
                assert_eq!((line, column), (3, 2));
                assert!(message.contains("oops"));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn rejects_unseen_label() {
        let f = fixture("a,label\n1,0\n2,3\n");
        let err = load_csv::<f64>(f.path(), &LabelColumn::default(), Some(2)).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, column: 2, .. }), "{err}");
    }

    #[test]
    fn missing_file_and_column() {
        assert!(matches!(
            load_csv::<f64>("/nonexistent/x.csv", &LabelColumn::default(), None),
            Err(Error::Io { .. })
        ));
        let f = fixture("a,b\n1,2\n");
        assert!(load_csv::<f64>(f.path(), &LabelColumn::default(), None).is_err());
    }

    #[test]
    fn export_round_trips_with_sidecar() {
        let x = DenseMatrix::from_rows(&[vec![0.1, -1e-7], vec![1.0 / 3.0, 2.5e10]]).unwrap();
        let d = Dataset::new(x, vec![1, 0], 2)
            .unwrap()
            .with_clean_labels(vec![1, 1])
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_csv(&d, &path).unwrap();
        let back: Dataset<f64> = load_csv(&path, &LabelColumn::default(), Some(2)).unwrap();
        assert_eq!(back, d);
    }
}
