use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::LabeledSample;
use crate::error::{Error, Result};
use crate::harness::format_real;

/// Which columns of a CSV file hold features, label and domain tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub label: String,
    /// `None` takes every column except the label and domain columns, in file order.
    pub features: Option<Vec<String>>,
    pub domain: Option<String>,
}

impl CsvSchema {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            features: None,
            domain: None,
        }
    }

    pub fn with_domain(mut self, column: impl Into<String>) -> Self {
        self.domain = Some(column.into());
        self
    }

    pub fn with_features(mut self, columns: Vec<String>) -> Self {
        self.features = Some(columns);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub sample: LabeledSample,
    pub feature_names: Vec<String>,
    /// Per-row domain tags when the schema names a domain column.
    pub is_target: Option<Vec<bool>>,
}

fn parse_domain(cell: &str) -> Option<bool> {
    match cell.trim().to_ascii_lowercase().as_str() {
        "target" | "tgt" | "1" | "true" => Some(true),
        "source" | "src" | "0" | "false" => Some(false),
        _ => None,
    }
}

/// Parses a header-first, comma-separated numeric table.
///
/// Row numbers in errors count data rows from 1 (the header is not counted).
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<CsvData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::MalformedCsv {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptySample);
    }
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };

    let label_col = position(&schema.label)?;
    let domain_col = schema.domain.as_deref().map(position).transpose()?;
    let feature_cols: Vec<usize> = match &schema.features {
        Some(names) => names.iter().map(|n| position(n)).collect::<Result<_>>()?,
        None => (0..headers.len())
            .filter(|&c| c != label_col && Some(c) != domain_col)
            .collect(),
    };
    if feature_cols.is_empty() {
        return Err(Error::invalid("no feature columns"));
    }
    let feature_names: Vec<String> = feature_cols.iter().map(|&c| headers[c].to_owned()).collect();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut tags = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| Error::MalformedCsv {
            row,
            message: e.to_string(),
        })?;
        let number = |col: usize| -> Result<f64> {
            let cell = &record[col];
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::NonNumeric {
                    row,
                    column: headers[col].to_owned(),
                    value: cell.to_owned(),
                }),
            }
        };
        for &c in &feature_cols {
            values.push(number(c)?);
        }
        labels.push(number(label_col)?);
        if let Some(c) = domain_col {
            let tag = parse_domain(&record[c]).ok_or_else(|| Error::NonNumeric {
                row,
                column: headers[c].to_owned(),
                value: record[c].to_owned(),
            })?;
            tags.push(tag);
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptySample);
    }
    let x = Array2::from_shape_vec((labels.len(), feature_cols.len()), values)
        .expect("row-major values match the shape");
    Ok(CsvData {
        sample: LabeledSample::new(x, Array1::from(labels))?,
        feature_names,
        is_target: domain_col.map(|_| tags),
    })
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<CsvData> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Writes features, label and an optional domain column with 17 significant digits.
pub fn write_csv<W: Write>(
    writer: W,
    sample: &LabeledSample,
    feature_names: &[String],
    label_name: &str,
    is_target: Option<&[bool]>,
) -> Result<()> {
    if feature_names.len() != sample.dim() {
        return Err(Error::invalid("one feature name per column is required"));
    }
    if let Some(tags) = is_target {
        if tags.len() != sample.len() {
            return Err(Error::invalid("one domain tag per row is required"));
        }
    }
    let to_err = |e: csv::Error| Error::invalid(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = feature_names.iter().map(String::as_str).collect();
    header.push(label_name);
    if is_target.is_some() {
        header.push("domain");
    }
    w.write_record(&header).map_err(to_err)?;
    for i in 0..sample.len() {
        let mut cells: Vec<String> = sample.x.row(i).iter().map(|v| format_real(*v)).collect();
        cells.push(format_real(sample.y[i]));
        if let Some(tags) = is_target {
            cells.push(if tags[i] { "target" } else { "source" }.to_owned());
        }
        w.write_record(&cells).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(())
}
