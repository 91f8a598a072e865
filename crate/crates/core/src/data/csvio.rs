use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TimeSeries;
use crate::error::{Error, Result};

/// Column mapping for telemetry CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    #[serde(default = "CsvSchema::default_timestamp")]
    pub timestamp_column: String,
    /// Value columns in order; `None` takes every other column.
    #[serde(default)]
    pub value_columns: Option<Vec<String>>,
    #[serde(default = "CsvSchema::default_label")]
    pub label_column: String,
}

impl CsvSchema {
    fn default_timestamp() -> String {
        "timestamp".into()
    }

    fn default_label() -> String {
        "label".into()
    }
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            timestamp_column: Self::default_timestamp(),
            value_columns: None,
            label_column: Self::default_label(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<TimeSeries> {
    read_csv(File::open(path)?, schema)
}

struct Row {
    line: u64,
    timestamp: f64,
    values: Vec<Option<f64>>,
    label: u8,
}

fn parse_value(field: &str) -> Option<f64> {
    let f = field.trim();
    if f.is_empty() || f.eq_ignore_ascii_case("nan") {
        None
    } else {
        f.parse().ok()
    }
}

/// Reads a telemetry CSV. Rows are sorted by timestamp, gaps are forward
/// filled (leading gaps back filled) and a missing label column means all
/// labels are 0.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Empty("csv file has no header".into()));
    }
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let ts_idx = find(&schema.timestamp_column).ok_or_else(|| Error::MalformedRow {
        line: 1,
        message: format!("missing timestamp column `{}`", schema.timestamp_column),
    })?;
    let label_idx = find(&schema.label_column);
    let value_idx: Vec<usize> = match &schema.value_columns {
        Some(cols) => cols
            .iter()
            .map(|c| {
                find(c).ok_or_else(|| Error::MalformedRow {
                    line: 1,
                    message: format!("missing value column `{c}`"),
                })
            })
            .collect::<Result<_>>()?,
        None => (0..headers.len())
            .filter(|&i| i != ts_idx && Some(i) != label_idx)
            .collect(),
    };
    if value_idx.is_empty() {
        return Err(Error::MalformedRow {
            line: 1,
            message: "no value columns".into(),
        });
    }
    let names: Vec<String> = value_idx
        .iter()
        .map(|&i| headers[i].trim().to_string())
        .collect();

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let timestamp = parse_value(&record[ts_idx])
            .filter(|t| t.is_finite())
            .ok_or_else(|| Error::MalformedRow {
                line,
                message: format!("invalid timestamp `{}`", &record[ts_idx]),
            })?;
        let mut values = Vec::with_capacity(value_idx.len());
        for &i in &value_idx {
            let field = record[i].trim();
            let v = parse_value(field);
            if v.is_none() && !(field.is_empty() || field.eq_ignore_ascii_case("nan")) {
                return Err(Error::MalformedRow {
                    line,
                    message: format!("invalid number `{field}` in column `{}`", &headers[i]),
                });
            }
            if v.is_some_and(|x| !x.is_finite()) {
                return Err(Error::MalformedRow {
                    line,
                    message: format!("non-finite value in column `{}`", &headers[i]),
                });
            }
            values.push(v);
        }
        let label = match label_idx.map(|i| record[i].trim()) {
            None | Some("") | Some("0") => 0,
            Some("1") => 1,
            Some(other) => {
                return Err(Error::MalformedRow {
                    line,
                    message: format!("label `{other}` is not 0 or 1"),
                })
            }
        };
        rows.push(Row {
            line,
            timestamp,
            values,
            label,
        });
    }
    if rows.is_empty() {
        return Err(Error::Empty("csv file has no data rows".into()));
    }

    rows.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    if let Some(w) = rows.windows(2).find(|w| w[0].timestamp == w[1].timestamp) {
        return Err(Error::DuplicateTimestamp {
            line: w[0].line.max(w[1].line),
            timestamp: w[1].timestamp,
        });
    }

    let n = rows.len();
    let c = names.len();
    let mut values = vec![0.0; n * c];
    for j in 0..c {
        let first = rows
            .iter()
            .find_map(|r| r.values[j])
            .ok_or_else(|| Error::Empty(format!("column `{}` has no values", names[j])))?;
        let mut last = first;
        for (i, r) in rows.iter().enumerate() {
            if let Some(v) = r.values[j] {
                last = v;
            }
            values[i * c + j] = last;
        }
    }
    let timestamps = rows.iter().map(|r| r.timestamp).collect();
    let labels = rows.iter().map(|r| r.label).collect();
    TimeSeries::new(names, timestamps, values, labels)
}

/// Writes `timestamp,<channels...>,label` with shortest round-trip float
/// formatting.
pub fn write_csv_to<W: Write>(series: &TimeSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["timestamp".to_string()];
    header.extend(series.channel_names().iter().cloned());
    header.push("label".into());
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..series.len() {
        record.clear();
        record.push(series.timestamps()[i].to_string());
        record.extend(series.row(i).iter().map(|v| v.to_string()));
        record.push(series.labels()[i].to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    write_csv_to(series, std::io::BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn read(text: &str) -> Result<TimeSeries> {
        read_csv(text.as_bytes(), &CsvSchema::default())
    }

    #[test]
    fn missing_labels_default_to_zero() {
        let s = read("timestamp,v\n0,1.0\n1,2.0\n2,3.0\n").unwrap();
        assert_eq!(s.labels(), &[0, 0, 0]);
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn gaps_are_forward_filled() {
        let s = read("timestamp,v\n0,1.0\n1,\n2,3.0\n").unwrap();
        assert_eq!(s.values(), &[1.0, 1.0, 3.0]);
    }

    #[test]
    fn leading_gaps_are_back_filled() {
        let s = read("timestamp,a,b\n0,,5\n1,2,\n2,3,6\n").unwrap();
        assert_eq!(s.column(0), vec![2.0, 2.0, 3.0]);
        assert_eq!(s.column(1), vec![5.0, 5.0, 6.0]);
    }

    #[test]
    fn duplicate_timestamp_names_line() {
        let err = read("timestamp,v\n4,1\n5,2\n5,3\n").unwrap_err();
        match err {
            Error::DuplicateTimestamp { line, timestamp } => {
                assert_eq!(line, 4);
                assert_eq!(timestamp, 5.0);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rows_are_sorted() {
        let s = read("timestamp,v,label\n2,3,1\n0,1,0\n1,2,0\n").unwrap();
        assert_eq!(s.timestamps(), &[0.0, 1.0, 2.0]);
        assert_eq!(s.labels(), &[0, 0, 1]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = read("timestamp,v\n0,1\n1,abc\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err}");
        let err = read("timestamp,v\n0,1\n1,2,3\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err}");
    }

    #[test]
    fn empty_file_is_rejected() {
        assert!(matches!(read(""), Err(Error::Empty(_))));
        assert!(matches!(read("timestamp,v\n"), Err(Error::Empty(_))));
    }

    #[test]
    fn explicit_schema_selects_columns() {
        let schema = CsvSchema {
            timestamp_column: "t".into(),
            value_columns: Some(vec!["b".into()]),
            label_column: "anomaly".into(),
        };
        let s = read_csv("t,a,b,anomaly\n0,1,2,1\n".as_bytes(), &schema).unwrap();
        assert_eq!(s.channel_names(), &["b".to_string()]);
        assert_eq!(s.values(), &[2.0]);
        assert_eq!(s.labels(), &[1]);
    }

    proptest! {
        #[test]
        fn csv_round_trip(
            rows in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6, 0u8..2), 1..50),
            step in 1e-3f64..100.0,
        ) {
            let n = rows.len();
            let ts: Vec<f64> = (0..n).map(|i| i as f64 * step + 0.125).collect();
            let values = rows.iter().flat_map(|r| [r.0, r.1]).collect();
            let labels = rows.iter().map(|r| r.2).collect();
            let s = TimeSeries::new(vec!["x".into(), "y".into()], ts, values, labels).unwrap();
            let mut buf = Vec::new();
            write_csv_to(&s, &mut buf).unwrap();
            let back = read_csv(buf.as_slice(), &CsvSchema::default()).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
