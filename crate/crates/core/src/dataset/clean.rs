//! Missing-value handling and duplicate/conflict removal.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{AttributeKind, Cell, Dataset, DatasetError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingStrategy {
    /// Leave missing cells in place; learners skip them.
    #[default]
    Keep,
    RemoveRows,
    /// Numeric cells get the column mean, nominal cells the column mode.
    Impute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DedupeStrategy {
    #[default]
    Keep,
    /// Rows equal in every attribute and the class keep their first
    /// occurrence; rows equal in every attribute but differing in class are
    /// all removed.
    RemoveDuplicatesAndConflicts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CleanOptions {
    #[serde(default)]
    pub missing: MissingStrategy,
    #[serde(default)]
    pub dedupe: DedupeStrategy,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub rows_in: usize,
    pub rows_out: usize,
    pub missing_rows_removed: usize,
    pub cells_imputed: usize,
    pub duplicates_removed: usize,
    pub conflicts_removed: usize,
}

impl CleanReport {
    /// Every removed row is attributed to exactly one reason.
    pub fn accounts_for_all_rows(&self) -> bool {
        self.rows_in == self.rows_out + self.missing_rows_removed + self.duplicates_removed + self.conflicts_removed
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report always serializes")
    }
}

#[derive(Hash, PartialEq, Eq)]
enum CellKey {
    Nominal(u32),
    Numeric(u64),
    Missing,
}

fn key_of(cells: &[Cell]) -> Vec<CellKey> {
    cells
        .iter()
        .map(|c| match *c {
            Cell::Nominal(i) => CellKey::Nominal(i),
            // +0.0 and -0.0 compare equal as values.
            Cell::Numeric(v) => CellKey::Numeric(if v == 0.0 { 0 } else { v.to_bits() }),
            Cell::Missing => CellKey::Missing,
        })
        .collect()
}

pub fn clean(ds: &Dataset, options: CleanOptions) -> Result<(Dataset, CleanReport), DatasetError> {
    let mut report = CleanReport {
        rows_in: ds.m(),
        ..Default::default()
    };
    let mut out = ds.clone();

    match options.missing {
        MissingStrategy::Keep => {}
        MissingStrategy::RemoveRows => {
            let before = out.rows.len();
            out.rows.retain(|r| !r.cells.iter().any(Cell::is_missing));
            report.missing_rows_removed = before - out.rows.len();
        }
        MissingStrategy::Impute => {
            report.cells_imputed = impute(&mut out);
        }
    }

    if options.dedupe == DedupeStrategy::RemoveDuplicatesAndConflicts {
        struct Group {
            first_class: u32,
            conflicting: bool,
            size: usize,
        }
        let keys: Vec<Vec<CellKey>> = out.rows.iter().map(|r| key_of(&r.cells)).collect();
        let mut groups: HashMap<&[CellKey], Group> = HashMap::with_capacity(keys.len());
        for (key, row) in keys.iter().zip(&out.rows) {
            let g = groups.entry(key.as_slice()).or_insert(Group {
                first_class: row.class,
                conflicting: false,
                size: 0,
            });
            g.size += 1;
            g.conflicting |= g.first_class != row.class;
        }
        let mut kept_first: HashMap<&[CellKey], bool> = HashMap::new();
        let mut keep = Vec::with_capacity(out.rows.len());
        for key in &keys {
            let g = &groups[key.as_slice()];
            if g.conflicting {
                keep.push(false);
                continue;
            }
            let seen = kept_first.entry(key.as_slice()).or_insert(false);
            keep.push(!*seen);
            *seen = true;
        }
        for g in groups.values() {
            if g.conflicting {
                report.conflicts_removed += g.size;
            } else {
                report.duplicates_removed += g.size - 1;
            }
        }
        let mut flags = keep.into_iter();
        out.rows.retain(|_| flags.next().unwrap_or(false));
    }

    report.rows_out = out.rows.len();
    if out.rows.is_empty() && report.rows_in > 0 {
        return Err(DatasetError::EmptyAfterClean);
    }
    Ok((out, report))
}

fn impute(ds: &mut Dataset) -> usize {
    let mut imputed = 0;
    for (col, attr) in ds.attributes.iter().enumerate() {
        let fill = match &attr.kind {
            AttributeKind::Numeric => {
                let values: Vec<f64> = ds
                    .rows
                    .iter()
                    .filter_map(|r| match r.cells[col] {
                        Cell::Numeric(v) => Some(v),
                        _ => None,
                    })
                    .collect();
                Cell::Numeric(two_pass_mean(&values))
            }
            AttributeKind::Nominal(labels) => {
                let mut counts = vec![0usize; labels.len()];
                for r in &ds.rows {
                    if let Cell::Nominal(i) = r.cells[col] {
                        counts[i as usize] += 1;
                    }
                }
                // Ties go to the lowest label index.
                let mode = counts
                    .iter()
                    .enumerate()
                    .fold((0usize, 0usize), |best, (i, &c)| if c > best.1 { (i, c) } else { best })
                    .0;
                Cell::Nominal(mode as u32)
            }
        };
        for r in &mut ds.rows {
            if r.cells[col].is_missing() {
                r.cells[col] = fill;
                imputed += 1;
            }
        }
    }
    imputed
}

/// Population mean with a correction pass over the residuals. An empty
/// column imputes to 0.
fn two_pass_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let first = values.iter().sum::<f64>() / n;
    first + values.iter().map(|v| v - first).sum::<f64>() / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ClassAttribute, Row};

    fn make(rows: Vec<(Cell, Cell, u32)>) -> Dataset {
        Dataset::new(
            "t",
            vec![
                ("a".into(), AttributeKind::Nominal(vec!["a".into(), "b".into()])),
                ("n".into(), AttributeKind::Numeric),
            ],
            ClassAttribute {
                name: "class".into(),
                labels: vec!["c0".into(), "c1".into()],
                declared_numeric: false,
            },
            rows.into_iter()
                .map(|(x, y, c)| Row {
                    cells: vec![x, y],
                    class: c,
                })
                .collect(),
        )
    }

    const DEDUPE: CleanOptions = CleanOptions {
        missing: MissingStrategy::Keep,
        dedupe: DedupeStrategy::RemoveDuplicatesAndConflicts,
    };

    #[test]
    fn duplicates_keep_first() {
        let a1 = (Cell::Nominal(0), Cell::Numeric(1.0), 0);
        let ds = make(vec![a1, a1]);
        let (out, report) = clean(&ds, DEDUPE).unwrap();
        assert_eq!(out.m(), 1);
        assert_eq!(report.duplicates_removed, 1);
        assert!(report.accounts_for_all_rows());
    }

    #[test]
    fn conflicts_remove_whole_group() {
        let ds = make(vec![
            (Cell::Nominal(0), Cell::Numeric(1.0), 0),
            (Cell::Nominal(0), Cell::Numeric(1.0), 1),
        ]);
        assert_eq!(clean(&ds, DEDUPE), Err(DatasetError::EmptyAfterClean));
        let ds = make(vec![
            (Cell::Nominal(0), Cell::Numeric(1.0), 0),
            (Cell::Nominal(0), Cell::Numeric(1.0), 1),
            (Cell::Nominal(0), Cell::Numeric(1.0), 0),
            (Cell::Nominal(1), Cell::Numeric(1.0), 0),
        ]);
        let (out, report) = clean(&ds, DEDUPE).unwrap();
        assert_eq!(out.m(), 1);
        assert_eq!(report.conflicts_removed, 3);
        assert!(report.accounts_for_all_rows());
    }

    #[test]
    fn impute_mean_and_mode() {
        let ds = make(vec![
            (Cell::Nominal(1), Cell::Numeric(1.0), 0),
            (Cell::Missing, Cell::Numeric(2.0), 0),
            (Cell::Nominal(0), Cell::Missing, 1),
            (Cell::Nominal(1), Cell::Numeric(6.0), 1),
        ]);
        let opts = CleanOptions {
            missing: MissingStrategy::Impute,
            dedupe: DedupeStrategy::Keep,
        };
        let (out, report) = clean(&ds, opts).unwrap();
        assert_eq!(report.cells_imputed, 2);
        assert_eq!(out.rows[1].cells[0], Cell::Nominal(1));
        assert_eq!(out.rows[2].cells[1], Cell::Numeric(3.0));
        assert!(!out.has_missing());
    }

    #[test]
    fn mode_tie_takes_lowest_label() {
        let ds = make(vec![
            (Cell::Nominal(1), Cell::Numeric(1.0), 0),
            (Cell::Nominal(0), Cell::Numeric(1.0), 1),
            (Cell::Missing, Cell::Numeric(1.0), 1),
        ]);
        let opts = CleanOptions {
            missing: MissingStrategy::Impute,
            dedupe: DedupeStrategy::Keep,
        };
        let (out, _) = clean(&ds, opts).unwrap();
        assert_eq!(out.rows[2].cells[0], Cell::Nominal(0));
    }

    #[test]
    fn remove_rows_and_report_json() {
        let ds = make(vec![
            (Cell::Nominal(1), Cell::Missing, 0),
            (Cell::Nominal(0), Cell::Numeric(2.0), 1),
        ]);
        let opts = CleanOptions {
            missing: MissingStrategy::RemoveRows,
            dedupe: DedupeStrategy::Keep,
        };
        let (out, report) = clean(&ds, opts).unwrap();
        assert_eq!(out.m(), 1);
        assert_eq!(report.missing_rows_removed, 1);
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["missing_rows_removed"], 1);
        assert_eq!(json["rows_out"], 1);
    }
}
