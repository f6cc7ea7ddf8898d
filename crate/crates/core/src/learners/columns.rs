//! Column-major view of a dataset for training.

use crate::dataset::{AttributeKind, Cell, Dataset};

/// Marker for a missing nominal value.
pub(crate) const MISSING: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub enum Column {
    /// Label indices, [`MISSING`] for missing cells.
    Nominal { values: Vec<u32>, arity: u32 },
    /// NaN for missing cells.
    Numeric { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Value {
    Nominal(u32),
    Numeric(f64),
    Missing,
}

impl Column {
    pub(crate) fn value(&self, row: usize) -> Value {
        match self {
            Column::Nominal { values, .. } => match values[row] {
                MISSING => Value::Missing,
                v => Value::Nominal(v),
            },
            Column::Numeric { values } => {
                let v = values[row];
                if v.is_nan() {
                    Value::Missing
                } else {
                    Value::Numeric(v)
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Columns {
    pub columns: Vec<Column>,
    pub classes: Vec<u32>,
    pub class_count: usize,
}

impl Columns {
    pub fn from_dataset(ds: &Dataset) -> Self {
        let positions: Vec<usize> = (0..ds.n()).collect();
        let rows: Vec<usize> = (0..ds.m()).collect();
        Columns::select(ds, &positions, &rows)
    }

    /// The attributes at 0-based `positions` over the rows at `rows`, in the
    /// order given.
    pub fn select(ds: &Dataset, positions: &[usize], rows: &[usize]) -> Self {
        let columns = positions
            .iter()
            .map(|&p| match &ds.attributes[p].kind {
                AttributeKind::Nominal(labels) => Column::Nominal {
                    values: rows
                        .iter()
                        .map(|&r| match ds.rows[r].cells[p] {
                            Cell::Nominal(v) => v,
                            _ => MISSING,
                        })
                        .collect(),
                    arity: labels.len() as u32,
                },
                AttributeKind::Numeric => Column::Numeric {
                    values: rows
                        .iter()
                        .map(|&r| match ds.rows[r].cells[p] {
                            Cell::Numeric(v) => v,
                            _ => f64::NAN,
                        })
                        .collect(),
                },
            })
            .collect();
        Columns {
            columns,
            classes: rows.iter().map(|&r| ds.rows[r].class).collect(),
            class_count: ds.class_count(),
        }
    }

    pub fn rows(&self) -> usize {
        self.classes.len()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }
}

/// Read access to one instance's attribute values.
pub(crate) trait Instance {
    fn value(&self, attr: usize) -> Value;
}

pub(crate) struct ColumnRow<'a> {
    pub columns: &'a Columns,
    pub row: usize,
}

impl Instance for ColumnRow<'_> {
    fn value(&self, attr: usize) -> Value {
        self.columns.columns[attr].value(self.row)
    }
}

impl Instance for [Cell] {
    fn value(&self, attr: usize) -> Value {
        match self[attr] {
            Cell::Nominal(v) => Value::Nominal(v),
            Cell::Numeric(v) => Value::Numeric(v),
            Cell::Missing => Value::Missing,
        }
    }
}
