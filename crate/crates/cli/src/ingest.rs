//! M4-style CSV input: one row per series, `"<id>",v1,v2,...`, ragged rows
//! padded with trailing empty cells.

use std::io::Read;
use std::path::{Path, PathBuf};

use thiserror::Error;
use xirpgan_core::series::{Frequency, TimeSeries};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub id: String,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub series: Vec<TimeSeries>,
    /// Rows shorter than the minimum length.
    pub skipped: Vec<Skipped>,
}

/// Reads a file; see [`read_m4`].
pub fn ingest_m4_csv(path: &Path, frequency: Frequency, keep_last: usize, min_length: usize) -> Result<Ingested, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IngestError::FileNotFound(path.into()),
        _ => IngestError::Io(e),
    })?;
    read_m4(file, frequency, keep_last, min_length)
}

/// Parses rows into series truncated to their last `keep_last` values
/// (0 keeps everything). A first row without any numeric cell is treated as
/// a header. Row numbers in errors count from 0 over all physical rows.
pub fn read_m4<R: Read>(reader: R, frequency: Frequency, keep_last: usize, min_length: usize) -> Result<Ingested, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut out = Ingested { series: Vec::new(), skipped: Vec::new() };
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let Some(id) = rec.get(0).filter(|s| !s.is_empty()) else {
            if rec.iter().all(str::is_empty) {
                continue;
            }
            return Err(IngestError::MalformedRow { row, reason: "missing id".into() });
        };
        let cells: Vec<&str> = rec.iter().skip(1).collect();
        let used = cells.iter().rposition(|c| !c.is_empty()).map_or(0, |p| p + 1);
        let cells = &cells[..used];
        if row == 0 && !cells.is_empty() && cells.iter().all(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        let mut values = Vec::with_capacity(cells.len());
        for (k, c) in cells.iter().enumerate() {
            if c.is_empty() {
                return Err(IngestError::MalformedRow { row, reason: format!("gap at value {}", k + 1) });
            }
            let v: f64 = c.parse().map_err(|_| IngestError::MalformedRow { row, reason: format!("value {} `{c}` is not a number", k + 1) })?;
            if !v.is_finite() {
                return Err(IngestError::MalformedRow { row, reason: format!("value {} is not finite", k + 1) });
            }
            values.push(v);
        }
        if keep_last > 0 && values.len() > keep_last {
            values.drain(..values.len() - keep_last);
        }
        if values.len() < min_length.max(2) {
            log::warn!("skipping {id}: {} values, need at least {}", values.len(), min_length.max(2));
            out.skipped.push(Skipped { id: id.to_string(), length: values.len() });
            continue;
        }
        let ts = TimeSeries::new(id, frequency, values).map_err(|e| IngestError::MalformedRow { row, reason: e.to_string() })?;
        out.series.push(ts);
    }
    Ok(out)
}

/// Writes series back in the same layout, values in shortest round-trip form.
pub fn write_m4(series: &[TimeSeries]) -> String {
    let mut s = String::new();
    for ts in series {
        s.push('"');
        s.push_str(&ts.id().replace('"', "\"\""));
        s.push('"');
        for v in ts.values() {
            s.push(',');
            s.push_str(&v.to_string());
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, keep: usize, min: usize) -> Result<Ingested, IngestError> {
        read_m4(text.as_bytes(), Frequency::Daily, keep, min)
    }

    #[test]
    fn direct_parse_and_ragged_rows() {
        let got = read("\"V1\",\"V2\",\"V3\",\"V4\"\n\"D1\",1,2,3\n\"D2\",4,5,,\n", 0, 2).unwrap();
        assert_eq!(got.series.len(), 2);
        assert_eq!(got.series[0].id(), "D1");
        assert_eq!(got.series[0].values(), &[1.0, 2.0, 3.0]);
        assert_eq!(got.series[1].values(), &[4.0, 5.0]);
    }

    #[test]
    fn keeps_the_tail() {
        let row: Vec<String> = (0..1200).map(|i| i.to_string()).collect();
        let got = read(&format!("\"D9\",{}\n", row.join(",")), 1000, 2).unwrap();
        assert_eq!(got.series[0].len(), 1000);
        assert_eq!(got.series[0].values()[0], 200.0);
        assert_eq!(*got.series[0].values().last().unwrap(), 1199.0);
    }

    #[test]
    fn gaps_are_malformed() {
        match read("\"D1\",1,2\n\"D2\",1,,3\n", 0, 2) {
            Err(IngestError::MalformedRow { row, .. }) => assert_eq!(row, 1),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read("\"D1\",1,x\n", 0, 2), Err(IngestError::MalformedRow { row: 0, .. })));
    }

    #[test]
    fn short_rows_are_skipped() {
        let got = read("\"A\",1,2,3\n\"B\",1,2,3,4,5\n", 0, 5).unwrap();
        assert_eq!(got.series.len(), 1);
        assert_eq!(got.skipped, vec![Skipped { id: "A".into(), length: 3 }]);
    }

    #[test]
    fn missing_file() {
        assert!(matches!(ingest_m4_csv(Path::new("/nonexistent/x.csv"), Frequency::Daily, 0, 2), Err(IngestError::FileNotFound(_))));
    }

    #[test]
    fn write_round_trip() {
        let ts = vec![TimeSeries::new("a,b", Frequency::Daily, vec![0.1, 2.5e-7, 3.0]).unwrap()];
        let back = read(&write_m4(&ts), 0, 2).unwrap();
        assert_eq!(back.series, ts);
    }
}
