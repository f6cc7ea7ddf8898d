//! CSV ingestion with per-column type inference.

use std::collections::HashMap;

use super::arff::parse_number;
use super::{AttributeKind, Cell, ClassAttribute, Dataset, DatasetError, Row};

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Name of the class column; the last column when unset.
    pub class_column: Option<String>,
    pub source_name: Option<String>,
}

fn is_missing(value: &str) -> bool {
    value.is_empty() || value == "?"
}

/// Parses RFC-4180 CSV with a header row.
///
/// A column whose non-missing values all parse as finite numbers is numeric;
/// any other column is nominal with labels in first-appearance order. The
/// class column is always nominal; when all of its values are numbers the
/// labels are ordered numerically so that `0`/`1` classes keep their indices.
pub fn parse_csv(input: &[u8], options: &CsvOptions) -> Result<Dataset, DatasetError> {
    if input.iter().all(u8::is_ascii_whitespace) {
        return Err(DatasetError::EmptyInput);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .iter()
        .map(str::to_string)
        .collect();
    let width = headers.len();

    let mut records: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_error(e, line))?;
        let line = record.position().map_or(line, |p| p.line() as usize);
        if record.len() != width {
            return Err(DatasetError::Arity {
                line,
                expected: width,
                found: record.len(),
            });
        }
        records.push(record.iter().map(str::to_string).collect());
    }
    if records.is_empty() {
        return Err(DatasetError::EmptyData);
    }

    let class_pos = match &options.class_column {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::ClassNotFound(name.clone()))?,
        None => width - 1,
    };

    let mut attributes = Vec::with_capacity(width - 1);
    let mut columns: Vec<Vec<Cell>> = Vec::with_capacity(width - 1);
    for col in (0..width).filter(|&c| c != class_pos) {
        let numeric = records
            .iter()
            .map(|r| r[col].as_str())
            .filter(|v| !is_missing(v))
            .all(|v| parse_number(v).is_ok());
        if numeric {
            let cells = records
                .iter()
                .map(|r| {
                    let v = r[col].as_str();
                    if is_missing(v) {
                        Cell::Missing
                    } else {
                        Cell::Numeric(parse_number(v).expect("checked above"))
                    }
                })
                .collect();
            attributes.push((headers[col].clone(), AttributeKind::Numeric));
            columns.push(cells);
        } else {
            let mut labels: Vec<String> = Vec::new();
            let mut lookup: HashMap<String, u32> = HashMap::new();
            let cells = records
                .iter()
                .map(|r| {
                    let v = r[col].as_str();
                    if is_missing(v) {
                        return Cell::Missing;
                    }
                    let next = labels.len() as u32;
                    Cell::Nominal(*lookup.entry(v.to_string()).or_insert_with(|| {
                        labels.push(v.to_string());
                        next
                    }))
                })
                .collect();
            attributes.push((headers[col].clone(), AttributeKind::Nominal(labels)));
            columns.push(cells);
        }
    }

    let mut class_labels: Vec<String> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let v = &r[class_pos];
        if is_missing(v) {
            return Err(DatasetError::Parse {
                line: i + 2,
                message: "class value is missing".into(),
            });
        }
        if !class_labels.contains(v) {
            class_labels.push(v.clone());
        }
    }
    if class_labels.iter().all(|l| parse_number(l).is_ok()) {
        class_labels.sort_by(|a, b| {
            let (x, y) = (parse_number(a).unwrap(), parse_number(b).unwrap());
            x.total_cmp(&y)
        });
    }
    let class_lookup: HashMap<&str, u32> = class_labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i as u32))
        .collect();

    let rows = records
        .iter()
        .enumerate()
        .map(|(i, r)| Row {
            cells: columns.iter().map(|c| c[i]).collect(),
            class: class_lookup[r[class_pos].as_str()],
        })
        .collect();
    let class = ClassAttribute {
        name: headers[class_pos].clone(),
        labels: class_labels,
        declared_numeric: false,
    };
    Ok(Dataset::new(
        options.source_name.clone().unwrap_or_else(|| "csv".into()),
        attributes,
        class,
        rows,
    ))
}

fn csv_error(e: csv::Error, line: usize) -> DatasetError {
    let line = e.position().map_or(line, |p| p.line() as usize);
    DatasetError::Parse {
        line,
        message: e.to_string(),
    }
}
