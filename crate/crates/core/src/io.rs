//! CSV dataset input and annotated CSV output.
//!
//! Output files start with a block of `# key: value` comment lines followed
//! by a header row. Input files may carry the same comment block.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::data::{FlopDataset, PopulationDataset, PopulationPoint, ProbeKind};

/// Version of the column layout of every emitted table.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: row {row}: {reason}")]
    Parse {
        path: String,
        row: u64,
        reason: String,
    },
    #[error("{path}: {reason}")]
    Schema { path: String, reason: String },
}

/// A table with its leading metadata block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest representation that reads back to the same value.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:e}")
    }
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.metadata.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}").unwrap();
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).unwrap();
        for row in &self.rows {
            w.write_record(row).unwrap();
        }
        out.push_str(std::str::from_utf8(&w.into_inner().unwrap()).unwrap());
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CsvError> {
        std::fs::write(path, self.to_csv_string()).map_err(|source| CsvError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Parsed input: metadata comments plus named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTable {
    pub path: String,
    pub metadata: BTreeMap<String, String>,
    pub header: Vec<String>,
    /// (line number, fields)
    pub rows: Vec<(u64, Vec<String>)>,
}

impl InputTable {
    pub fn read(path: &Path) -> Result<Self, CsvError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| CsvError::Io {
            path: name.clone(),
            source,
        })?;
        Self::parse(&name, &text)
    }

    pub fn parse(path: &str, text: &str) -> Result<Self, CsvError> {
        let metadata = text
            .lines()
            .filter_map(|l| l.trim_start().strip_prefix('#'))
            .filter_map(|l| l.split_once(':'))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| CsvError::Parse {
                path: path.into(),
                row: 1,
                reason: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        if header.iter().all(|h| h.is_empty()) {
            return Err(CsvError::Schema {
                path: path.into(),
                reason: "file has no header row".into(),
            });
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| CsvError::Parse {
                path: path.into(),
                row: e.position().map_or(0, |p| p.line()),
                reason: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        if rows.is_empty() {
            return Err(CsvError::Schema {
                path: path.into(),
                reason: "no data rows".into(),
            });
        }
        Ok(Self {
            path: path.into(),
            metadata,
            header,
            rows,
        })
    }

    pub fn has(&self, column: &str) -> bool {
        self.header.iter().any(|h| h == column)
    }

    fn index(&self, column: &str) -> Result<usize, CsvError> {
        self.header
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| CsvError::Schema {
                path: self.path.clone(),
                reason: format!(
                    "missing column `{column}` (have: {})",
                    self.header.join(", ")
                ),
            })
    }

    /// Column `column` parsed as `T`, with the offending row on failure.
    pub fn column<T: std::str::FromStr>(&self, column: &str) -> Result<Vec<T>, CsvError> {
        let i = self.index(column)?;
        self.rows
            .iter()
            .map(|(line, row)| {
                row[i].parse().map_err(|_| CsvError::Parse {
                    path: self.path.clone(),
                    row: *line,
                    reason: format!("`{}` is not a valid {column}", row[i]),
                })
            })
            .collect()
    }

    fn invalid(&self, reason: impl ToString) -> CsvError {
        CsvError::Schema {
            path: self.path.clone(),
            reason: reason.to_string(),
        }
    }

    /// `time_s, counts, shots` as a flop record.
    pub fn flop_dataset(&self, kind: ProbeKind) -> Result<FlopDataset, CsvError> {
        let t = self.column::<f64>("time_s")?;
        let k = self.column::<u64>("counts")?;
        let n = self.column::<u64>("shots")?;
        FlopDataset::new(t, k, n, kind).map_err(|e| self.invalid(e))
    }

    /// `time_s, counts, shots, level` or `time_s, level, population, std_err`.
    pub fn population_dataset(&self) -> Result<PopulationDataset, CsvError> {
        let t = self.column::<f64>("time_s")?;
        let level = self.column::<usize>("level")?;
        let points = if self.has("counts") {
            let k = self.column::<u64>("counts")?;
            let n = self.column::<u64>("shots")?;
            (0..t.len())
                .map(|i| PopulationPoint::from_counts(t[i], level[i], k[i], n[i]))
                .collect::<crate::Result<Vec<_>>>()
                .map_err(|e| self.invalid(e))?
        } else {
            let p = self.column::<f64>("population")?;
            let s = self.column::<f64>("std_err")?;
            (0..t.len())
                .map(|i| PopulationPoint {
                    time: t[i],
                    level: level[i],
                    population: p[i],
                    std_err: s[i],
                })
                .collect()
        };
        PopulationDataset::new(points).map_err(|e| self.invalid(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_layout() {
        let mut t = Table::new(["time_s", "value"]);
        t.meta("seed", 3);
        t.push(vec![fmt_f64(0.5), fmt_f64(1e-7)]);
        assert_eq!(t.to_csv_string(), "# seed: 3\ntime_s,value\n5e-1,1e-7\n");
    }

    #[test]
    fn reads_flop_file_with_comments() {
        let text = "# delay_s: 1e-3\ntime_s,counts,shots\n0,0,500\n1e-5, 40, 500\n";
        let t = InputTable::parse("x.csv", text).unwrap();
        assert_eq!(t.metadata["delay_s"], "1e-3");
        let d = t.flop_dataset(ProbeKind::BlueSideband).unwrap();
        assert_eq!(d.counts, vec![0, 40]);
    }

    #[test]
    fn reports_bad_row() {
        let text = "time_s,counts,shots\n0,0,500\n1e-5,abc,500\n";
        let t = InputTable::parse("x.csv", text).unwrap();
        match t.flop_dataset(ProbeKind::Carrier) {
            Err(CsvError::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(InputTable::parse("x.csv", "").is_err());
        assert!(InputTable::parse("x.csv", "time_s,counts,shots\n").is_err());
    }

    #[test]
    fn population_schemas() {
        let a = "time_s,counts,shots,level\n0,490,500,0\n1e-3,300,500,0\n";
        let b = "time_s,level,population,std_err\n0,0,0.98,0.01\n";
        assert_eq!(
            InputTable::parse("a", a)
                .unwrap()
                .population_dataset()
                .unwrap()
                .points
                .len(),
            2
        );
        assert_eq!(
            InputTable::parse("b", b)
                .unwrap()
                .population_dataset()
                .unwrap()
                .points[0]
                .population,
            0.98
        );
    }
}
