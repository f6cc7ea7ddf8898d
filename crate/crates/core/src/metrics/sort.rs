//! Field addressing and stable multi-key ordering of result rows.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{MetricsError, TaskResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassField {
    Tp,
    Fp,
    Fn,
    Precision,
    Recall,
    Aroc,
    Apr,
}

impl ClassField {
    pub const ALL: [ClassField; 7] = [
        ClassField::Tp,
        ClassField::Fp,
        ClassField::Fn,
        ClassField::Precision,
        ClassField::Recall,
        ClassField::Aroc,
        ClassField::Apr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassField::Tp => "tp",
            ClassField::Fp => "fp",
            ClassField::Fn => "fn",
            ClassField::Precision => "precision",
            ClassField::Recall => "recall",
            ClassField::Aroc => "aroc",
            ClassField::Apr => "apr",
        }
    }
}

/// A numeric column of the result table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    TimeTaken,
    Accuracy,
    /// Number of attributes in the set.
    Size,
    Class(usize, ClassField),
}

impl Field {
    pub fn value(&self, r: &TaskResult) -> Option<f64> {
        match *self {
            Field::TimeTaken => Some(r.time_taken_s),
            Field::Accuracy => Some(r.accuracy_pct),
            Field::Size => Some(r.attribute_set.len() as f64),
            Field::Class(i, f) => {
                let m = r.classes.get(i)?;
                match f {
                    ClassField::Tp => m.tp,
                    ClassField::Fp => m.fp,
                    ClassField::Fn => m.fn_rate,
                    ClassField::Precision => Some(m.precision),
                    ClassField::Recall => m.recall,
                    ClassField::Aroc => m.aroc,
                    ClassField::Apr => m.apr,
                }
            }
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::TimeTaken => f.write_str("time_taken"),
            Field::Accuracy => f.write_str("accuracy"),
            Field::Size => f.write_str("size"),
            Field::Class(i, c) => write!(f, "{}_{i}", c.name()),
        }
    }
}

impl FromStr for Field {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "time_taken" => return Ok(Field::TimeTaken),
            "accuracy" => return Ok(Field::Accuracy),
            "size" => return Ok(Field::Size),
            _ => {}
        }
        let unknown = || MetricsError::UnknownField(s.to_string());
        let (name, index) = s.rsplit_once('_').ok_or_else(unknown)?;
        let index: usize = index.parse().map_err(|_| unknown())?;
        let field = ClassField::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(unknown)?;
        Ok(Field::Class(index, field))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Asc,
    Desc,
}

/// Ordered sort keys, e.g. `apr_1:desc,aroc_1:desc,accuracy:desc`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortCriteria(pub Vec<(Field, Direction)>);

impl Default for SortCriteria {
    /// Best first by PR area of class 1, then ROC area, then accuracy.
    fn default() -> Self {
        SortCriteria(vec![
            (Field::Class(1, ClassField::Apr), Direction::Desc),
            (Field::Class(1, ClassField::Aroc), Direction::Desc),
            (Field::Accuracy, Direction::Desc),
        ])
    }
}

impl FromStr for SortCriteria {
    type Err = MetricsError;

    /// Keys are comma-separated `field[:asc|:desc]`; the direction defaults
    /// to ascending.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let keys = s
            .split(',')
            .map(str::trim)
            .filter(|k| !k.is_empty())
            .map(|key| {
                let (name, dir) = key.split_once(':').unwrap_or((key, "asc"));
                let dir = match dir.trim() {
                    "asc" => Direction::Asc,
                    "desc" => Direction::Desc,
                    _ => return Err(MetricsError::BadCriteria(key.to_string())),
                };
                Ok((name.trim().parse()?, dir))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if keys.is_empty() {
            return Err(MetricsError::BadCriteria(s.to_string()));
        }
        Ok(SortCriteria(keys))
    }
}

impl fmt::Display for SortCriteria {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (field, dir)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            let d = match dir {
                Direction::Asc => "asc",
                Direction::Desc => "desc",
            };
            write!(f, "{field}:{d}")?;
        }
        Ok(())
    }
}

impl SortCriteria {
    /// Undefined values order after every defined one, in either direction.
    pub fn compare(&self, a: &TaskResult, b: &TaskResult) -> Ordering {
        for (field, dir) in &self.0 {
            let ord = match (field.value(a), field.value(b)) {
                (None, None) => Ordering::Equal,
                (None, Some(_)) => Ordering::Greater,
                (Some(_), None) => Ordering::Less,
                (Some(x), Some(y)) => {
                    let o = x.total_cmp(&y);
                    match dir {
                        Direction::Asc => o,
                        Direction::Desc => o.reverse(),
                    }
                }
            };
            if ord != Ordering::Equal {
                return ord;
            }
        }
        Ordering::Equal
    }
}

/// Stable multi-key sort.
pub fn sort_results(rows: &mut [TaskResult], criteria: &SortCriteria) {
    rows.sort_by(|a, b| criteria.compare(a, b));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ClassMetrics;
    use crate::putmodel::AttributeSet;

    fn row(set: u32, acc: f64, aroc1: f64, apr1: Option<f64>) -> TaskResult {
        let m = |aroc, apr| ClassMetrics {
            tp: Some(0.5),
            fp: Some(0.1),
            fn_rate: Some(0.5),
            precision: 0.4,
            recall: Some(0.5),
            aroc: Some(aroc),
            apr,
        };
        TaskResult {
            attribute_set: AttributeSet::new([set]).unwrap(),
            time_taken_s: 0.0,
            accuracy_pct: acc,
            classes: vec![m(aroc1, Some(0.9)), m(aroc1, apr1)],
        }
    }

    fn order(rows: &[TaskResult]) -> Vec<u32> {
        rows.iter().map(|r| r.attribute_set.max_index()).collect()
    }

    #[test]
    fn default_order_best_first() {
        let printed = [
            (
                "{1, 2, 5, 8, 10, 11, 14, 15, 16, 17, 21, 25, 26, 28, 29}",
                99.95841,
                0.89360,
                0.76068,
            ),
            (
                "{1, 4, 5, 7, 10, 11, 13, 14, 15, 16, 17, 21, 25, 29, 30}",
                99.95136,
                0.87870,
                0.75866,
            ),
            (
                "{1, 2, 4, 5, 6, 7, 14, 17, 18, 19, 22, 27, 28, 29, 30}",
                99.95136,
                0.87207,
                0.75325,
            ),
            (
                "{3, 4, 5, 6, 7, 8, 10, 14, 16, 17, 19, 26, 27, 28, 30}",
                99.95523,
                0.88925,
                0.75057,
            ),
            (
                "{2, 5, 6, 10, 13, 14, 15, 16, 17, 19, 21, 22, 25, 26, 30}",
                99.95206,
                0.88382,
                0.75031,
            ),
        ];
        let mut rows: Vec<TaskResult> = [3, 0, 4, 2, 1]
            .iter()
            .map(|&i| {
                let (set, acc, aroc, apr) = printed[i];
                let mut r = row(1, acc, aroc, Some(apr));
                r.attribute_set = set.parse().unwrap();
                r
            })
            .collect();
        sort_results(&mut rows, &SortCriteria::default());
        let got: Vec<String> = rows.iter().map(|r| r.attribute_set.to_string()).collect();
        let want: Vec<String> = printed.iter().map(|p| p.0.to_string()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn undefined_last_and_stable() {
        let mut rows = vec![
            row(1, 90.0, 0.5, None),
            row(2, 90.0, 0.5, Some(0.3)),
            row(3, 90.0, 0.5, Some(0.3)),
            row(4, 95.0, 0.5, Some(0.1)),
        ];
        sort_results(&mut rows, &SortCriteria::default());
        assert_eq!(order(&rows), [2, 3, 4, 1]);
        let asc: SortCriteria = "apr_1:asc".parse().unwrap();
        sort_results(&mut rows, &asc);
        assert_eq!(order(&rows), [4, 2, 3, 1]);
    }

    #[test]
    fn parse_fields() {
        assert_eq!("fn_0".parse::<Field>().unwrap(), Field::Class(0, ClassField::Fn));
        assert!("bogus".parse::<Field>().is_err());
        assert!("apr_x".parse::<Field>().is_err());
        assert!("apr_1:up".parse::<SortCriteria>().is_err());
        let c = SortCriteria::default();
        assert_eq!(c.to_string(), "apr_1:desc,aroc_1:desc,accuracy:desc");
        assert_eq!(c.to_string().parse::<SortCriteria>().unwrap(), c);
    }
}
