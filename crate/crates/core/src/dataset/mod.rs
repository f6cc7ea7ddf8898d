//! Tabular datasets: parsing, validation, cleaning, projection and sampling.
//!
//! Attributes are numbered serially from 1 in file order; the class attribute
//! is held apart and never counted among them.

mod arff;
mod clean;
mod delimited;

use std::collections::HashSet;
use std::fmt;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decimal;
use crate::putmodel::AttributeSet;
use crate::seed;

pub use arff::{parse_arff, parse_arff_with, write_arff, ArffOptions};
pub use clean::{clean, CleanOptions, CleanReport, DedupeStrategy, MissingStrategy};
pub use delimited::{parse_csv, CsvOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("input is empty")]
    EmptyInput,
    #[error("no data rows after the header")]
    EmptyData,
    #[error("line {line}: expected {expected} fields, found {found}")]
    Arity { line: usize, expected: usize, found: usize },
    #[error("class attribute `{0}` not found")]
    ClassNotFound(String),
    #[error("every row was removed by cleaning")]
    EmptyAfterClean,
    #[error("attribute index {index} is outside 1..={n}")]
    OutOfRange { index: u32, n: usize },
    #[error("horizontal expense {0} is outside (0, 1]")]
    BadFraction(f64),
    #[error("unsupported input: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    /// Ordered, unique value labels.
    Nominal(Vec<String>),
    Numeric,
}

impl AttributeKind {
    pub fn is_nominal(&self) -> bool {
        matches!(self, AttributeKind::Nominal(_))
    }

    pub fn labels(&self) -> &[String] {
        match self {
            AttributeKind::Nominal(labels) => labels,
            AttributeKind::Numeric => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeMeta {
    pub name: String,
    pub kind: AttributeKind,
    /// 1-based position among the non-class attributes.
    pub index: u32,
}

/// The class attribute. A class declared numeric is still carried (its
/// distinct values become labels) so that validation can report it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAttribute {
    pub name: String,
    pub labels: Vec<String>,
    pub declared_numeric: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Nominal(u32),
    Numeric(f64),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub cells: Vec<Cell>,
    pub class: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub source_name: String,
    pub attributes: Vec<AttributeMeta>,
    pub class: ClassAttribute,
    pub rows: Vec<Row>,
    /// Original 1-based index of each attribute, in attribute order.
    pub provenance: Vec<u32>,
}

impl Dataset {
    /// Builds a dataset, numbering attributes serially and starting with an
    /// identity provenance.
    pub fn new(
        source_name: impl Into<String>,
        attributes: Vec<(String, AttributeKind)>,
        class: ClassAttribute,
        rows: Vec<Row>,
    ) -> Self {
        let attributes: Vec<AttributeMeta> = attributes
            .into_iter()
            .enumerate()
            .map(|(i, (name, kind))| AttributeMeta {
                name,
                kind,
                index: i as u32 + 1,
            })
            .collect();
        let provenance = (1..=attributes.len() as u32).collect();
        Dataset {
            source_name: source_name.into(),
            attributes,
            class,
            rows,
            provenance,
        }
    }

    /// Number of non-class attributes.
    pub fn n(&self) -> usize {
        self.attributes.len()
    }

    /// Number of rows.
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn class_count(&self) -> usize {
        self.class.labels.len()
    }

    /// Row count per class label.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_count()];
        for row in &self.rows {
            counts[row.class as usize] += 1;
        }
        counts
    }

    pub fn has_missing(&self) -> bool {
        self.rows.iter().any(|r| r.cells.iter().any(Cell::is_missing))
    }

    /// Keeps only the attributes in `attrs`, renumbered serially. The class
    /// column and row count are unchanged; provenance maps each new index to
    /// the index in the root dataset.
    pub fn project(&self, attrs: &AttributeSet) -> Result<Dataset, DatasetError> {
        let n = self.n();
        let positions: Vec<usize> = attrs
            .iter()
            .map(|i| {
                if i == 0 || i as usize > n {
                    Err(DatasetError::OutOfRange { index: i, n })
                } else {
                    Ok(i as usize - 1)
                }
            })
            .collect::<Result<_, _>>()?;
        let attributes = positions
            .iter()
            .enumerate()
            .map(|(new, &old)| AttributeMeta {
                name: self.attributes[old].name.clone(),
                kind: self.attributes[old].kind.clone(),
                index: new as u32 + 1,
            })
            .collect();
        let rows = self
            .rows
            .iter()
            .map(|row| Row {
                cells: positions.iter().map(|&p| row.cells[p]).collect(),
                class: row.class,
            })
            .collect();
        Ok(Dataset {
            source_name: self.source_name.clone(),
            attributes,
            class: self.class.clone(),
            rows,
            provenance: positions.iter().map(|&p| self.provenance[p]).collect(),
        })
    }

    /// Draws `ceil(h * m)` rows uniformly without replacement, keeping their
    /// original relative order. `h == 1.0` returns the dataset unchanged.
    pub fn sample_rows(&self, h: f64, seed: u64) -> Result<Dataset, DatasetError> {
        let picked = self.sample_indices(h, seed)?;
        if picked.len() == self.m() {
            return Ok(self.clone());
        }
        Ok(Dataset {
            source_name: self.source_name.clone(),
            attributes: self.attributes.clone(),
            class: self.class.clone(),
            rows: picked.into_iter().map(|i| self.rows[i].clone()).collect(),
            provenance: self.provenance.clone(),
        })
    }

    /// Row positions chosen by [`Dataset::sample_rows`], ascending.
    pub fn sample_indices(&self, h: f64, seed: u64) -> Result<Vec<usize>, DatasetError> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(DatasetError::BadFraction(h));
        }
        let m = self.m();
        let count = sample_size(m, h);
        if count >= m {
            return Ok((0..m).collect());
        }
        let mut rng = seed::rng(seed);
        let mut picked = index::sample(&mut rng, m, count).into_vec();
        picked.sort_unstable();
        Ok(picked)
    }

    /// Attributes addressed by their original (root) index.
    pub fn original_index(&self, position: usize) -> u32 {
        self.provenance[position]
    }
}

/// `ceil(h * m)` with `h` read as an exact decimal.
pub fn sample_size(m: usize, h: f64) -> usize {
    let scaled = decimal::ceil_scaled(&(m as u64).into(), h);
    decimal::biguint_to_u64_saturating(&scaled) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    NonNominalClass,
    DegenerateClass,
    NoAttributes,
    NoRows,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            ViolationCode::NonNominalClass => "NonNominalClass",
            ViolationCode::DegenerateClass => "DegenerateClass",
            ViolationCode::NoAttributes => "NoAttributes",
            ViolationCode::NoRows => "NoRows",
        };
        f.write_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

/// Checks the preconditions for running an experiment on `ds`.
pub fn validate(ds: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    if ds.class.declared_numeric {
        out.push(Violation {
            code: ViolationCode::NonNominalClass,
            message: format!("class attribute `{}` is numeric, not nominal", ds.class.name),
        });
    }
    if ds.n() == 0 {
        out.push(Violation {
            code: ViolationCode::NoAttributes,
            message: "dataset has no attributes besides the class".into(),
        });
    }
    if ds.m() == 0 {
        out.push(Violation {
            code: ViolationCode::NoRows,
            message: "dataset has no rows".into(),
        });
    }
    let observed: HashSet<u32> = ds.rows.iter().map(|r| r.class).collect();
    if ds.m() > 0 && observed.len() < 2 {
        out.push(Violation {
            code: ViolationCode::DegenerateClass,
            message: format!("only {} class label observed", observed.len()),
        });
    }
    out
}
