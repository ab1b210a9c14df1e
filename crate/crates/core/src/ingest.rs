//! CSV input and output.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::data::{Dataset, DatasetError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("file contains no data rows")]
    EmptyFile,
    #[error("target column {0} not found")]
    MissingTarget(String),
    #[error("headerless input needs an index-based target selector")]
    NamedTargetWithoutHeader,
    #[error("row {row} has {got} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("row {row}, column `{column}`: `{value}` is not a number")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: non-finite value `{value}`")]
    NonFiniteCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("invalid dataset: {0}")]
    Invalid(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetSelector {
    Name(String),
    Index(usize),
}

impl TargetSelector {
    /// A bare non-negative integer selects by zero-based index; anything else
    /// is a column name.
    pub fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => Self::Index(i),
            Err(_) => Self::Name(s.to_string()),
        }
    }
}

impl std::fmt::Display for TargetSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Name(n) => write!(f, "`{n}`"),
            Self::Index(i) => write!(f, "#{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub delimiter: u8,
    pub has_header: bool,
    pub target: TargetSelector,
}

impl CsvSchema {
    pub fn new(target: TargetSelector) -> Self {
        Self {
            delimiter: b',',
            has_header: true,
            target,
        }
    }

    pub fn target_name(name: impl Into<String>) -> Self {
        Self::new(TargetSelector::Name(name.into()))
    }
}

pub fn read_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset, IngestError> {
    read_csv_from(File::open(path)?, schema)
}

/// Parses a CSV stream. Every non-target column becomes a feature, in file
/// order. Row numbers in errors are 1-based data rows (header excluded).
pub fn read_csv_from<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset, IngestError> {
    let table = read_table_from(reader, schema.delimiter, schema.has_header)?;
    let target_idx = table.column_index(&schema.target, schema.has_header)?;
    let width = table.width();
    let mut features = Vec::with_capacity(table.values.len());
    let mut target = Vec::with_capacity(table.n_rows());
    for row in table.values.chunks_exact(width) {
        for (j, &v) in row.iter().enumerate() {
            if j == target_idx {
                target.push(v);
            } else {
                features.push(v);
            }
        }
    }
    let mut feature_names = table.names;
    let target_name = feature_names.remove(target_idx);
    let d = feature_names.len();
    if d == 0 {
        return Err(DatasetError::NoFeatures.into());
    }
    Ok(Dataset::new(
        features,
        d,
        target,
        feature_names,
        target_name,
    )?)
}

/// A rectangular all-numeric CSV, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl Table {
    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.width()
    }

    pub fn column_index(
        &self,
        sel: &TargetSelector,
        has_header: bool,
    ) -> Result<usize, IngestError> {
        match sel {
            TargetSelector::Index(i) if *i < self.width() => Ok(*i),
            TargetSelector::Index(_) => Err(IngestError::MissingTarget(sel.to_string())),
            TargetSelector::Name(_) if !has_header => Err(IngestError::NamedTargetWithoutHeader),
            TargetSelector::Name(n) => self
                .names
                .iter()
                .position(|c| c == n)
                .ok_or_else(|| IngestError::MissingTarget(sel.to_string())),
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values
            .chunks_exact(self.width())
            .map(|r| r[j])
            .collect()
    }
}

pub fn read_table(
    path: impl AsRef<Path>,
    delimiter: u8,
    has_header: bool,
) -> Result<Table, IngestError> {
    read_table_from(File::open(path)?, delimiter, has_header)
}

/// Reads every cell as a finite float. Headerless files get names `col0`,
/// `col1`, ...
pub fn read_table_from<R: Read>(
    reader: R,
    delimiter: u8,
    has_header: bool,
) -> Result<Table, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .flexible(true)
        .from_reader(reader);

    let header: Option<Vec<String>> = if has_header {
        let h = rdr.headers()?;
        if h.is_empty() {
            return Err(IngestError::EmptyFile);
        }
        Some(h.iter().map(|s| s.trim().to_string()).collect())
    } else {
        None
    };

    let mut records = rdr.records();
    let first = match records.next() {
        Some(r) => r?,
        None => return Err(IngestError::EmptyFile),
    };
    let width = header.as_ref().map_or(first.len(), Vec::len);
    let names: Vec<String> = match header {
        Some(h) => h,
        None => (0..width).map(|i| format!("col{i}")).collect(),
    };

    let mut values = Vec::new();
    let mut push = |rec: &csv::StringRecord, row: usize| -> Result<(), IngestError> {
        if rec.len() != width {
            return Err(IngestError::RaggedRow {
                row,
                expected: width,
                got: rec.len(),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| IngestError::NonNumericCell {
                row,
                column: names[j].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(IngestError::NonFiniteCell {
                    row,
                    column: names[j].clone(),
                    value: cell.to_string(),
                });
            }
            values.push(v);
        }
        Ok(())
    };
    push(&first, 1)?;
    for (i, rec) in records.enumerate() {
        push(&rec?, i + 2)?;
    }
    Ok(Table { names, values })
}

pub const SYNTHETIC_COLUMN: &str = "synthetic";

pub fn write_csv(
    dataset: &Dataset,
    path: impl AsRef<Path>,
    mark_synthetic: bool,
) -> Result<(), IngestError> {
    let file = File::create(path)?;
    write_csv_to(dataset, std::io::BufWriter::new(file), mark_synthetic)
}

/// Writes features then target (plus an optional 0/1 `synthetic` column).
/// Floats use the shortest representation that parses back to the same bits.
pub fn write_csv_to<W: Write>(
    dataset: &Dataset,
    writer: W,
    mark_synthetic: bool,
) -> Result<(), IngestError> {
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    let mut header: Vec<&str> = dataset.feature_names().iter().map(String::as_str).collect();
    header.push(dataset.target_name());
    if mark_synthetic {
        header.push(SYNTHETIC_COLUMN);
    }
    wtr.write_record(&header)?;

    let mut buf: Vec<String> = Vec::with_capacity(header.len());
    for (i, (x, y)) in dataset.rows().zip(dataset.target()).enumerate() {
        buf.clear();
        buf.extend(x.iter().map(format_f64));
        buf.push(format_f64(y));
        if mark_synthetic {
            buf.push(
                if dataset.synthetic_mask()[i] {
                    "1"
                } else {
                    "0"
                }
                .to_string(),
            );
        }
        wtr.write_record(&buf)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Round-trip-exact decimal form of `v`.
pub fn format_f64(v: &f64) -> String {
    // `Display` for f64 emits the shortest digit string that parses back to
    // the identical value (at most 17 significant digits).
    v.to_string()
}
