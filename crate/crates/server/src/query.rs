//! Result queries: sort, metric ranges, attribute membership, paging.

use std::collections::HashMap;

use putwb_core::engine::TaskRecord;
use putwb_core::metrics::{Field, SortCriteria};

pub const MAX_LIMIT: usize = 10_000;
const DEFAULT_LIMIT: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct RangeFilter {
    pub field: Field,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultQuery {
    /// Task order when unset.
    pub sort: Option<SortCriteria>,
    pub ranges: Vec<RangeFilter>,
    pub contains: Vec<u32>,
    pub excludes: Vec<u32>,
    pub offset: usize,
    pub limit: usize,
    /// Committed-result count the page is computed over.
    pub snapshot: Option<usize>,
}

fn indices(s: &str) -> Result<Vec<u32>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| format!("`{t}` is not an attribute index")))
        .collect()
}

fn bound(s: &str) -> Result<Option<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|_| format!("`{s}` is not a number"))
    }
}

impl ResultQuery {
    /// Reads `sort`, `range` (`field:min:max`, several joined by `;`,
    /// either bound may be empty), `contains`, `excludes`, `offset`,
    /// `limit` and `snapshot`.
    pub fn from_params(p: &HashMap<String, String>) -> Result<Self, String> {
        let mut q = ResultQuery {
            limit: DEFAULT_LIMIT,
            ..Default::default()
        };
        for (key, value) in p {
            match key.as_str() {
                "sort" => {
                    q.sort = Some(
                        value
                            .parse()
                            .map_err(|e: putwb_core::metrics::MetricsError| e.to_string())?,
                    )
                }
                "range" => {
                    for part in value.split(';').filter(|s| !s.trim().is_empty()) {
                        let bits: Vec<&str> = part.split(':').collect();
                        if bits.len() != 3 {
                            return Err(format!("range `{part}` is not field:min:max"));
                        }
                        q.ranges.push(RangeFilter {
                            field: bits[0]
                                .trim()
                                .parse()
                                .map_err(|e: putwb_core::metrics::MetricsError| e.to_string())?,
                            min: bound(bits[1])?,
                            max: bound(bits[2])?,
                        });
                    }
                }
                "contains" => q.contains = indices(value)?,
                "excludes" => q.excludes = indices(value)?,
                "offset" => q.offset = value.parse().map_err(|_| format!("bad offset `{value}`"))?,
                "limit" => {
                    q.limit = value.parse().map_err(|_| format!("bad limit `{value}`"))?;
                    if q.limit > MAX_LIMIT {
                        return Err(format!("limit {} exceeds {MAX_LIMIT}", q.limit));
                    }
                }
                "snapshot" => q.snapshot = Some(value.parse().map_err(|_| format!("bad snapshot `{value}`"))?),
                other => return Err(format!("unknown query parameter `{other}`")),
            }
        }
        Ok(q)
    }

    pub fn matches(&self, r: &TaskRecord) -> bool {
        let set = &r.result.attribute_set;
        if !self.contains.iter().all(|&i| set.contains(i)) || self.excludes.iter().any(|&i| set.contains(i)) {
            return false;
        }
        self.ranges.iter().all(|f| match f.field.value(&r.result) {
            None => false,
            Some(v) => f.min.is_none_or(|lo| v >= lo) && f.max.is_none_or(|hi| v <= hi),
        })
    }

    /// Filtered count and the requested page.
    pub fn apply<'a>(&self, records: &'a [TaskRecord]) -> (usize, Vec<&'a TaskRecord>) {
        let mut hits: Vec<&TaskRecord> = records.iter().filter(|r| self.matches(r)).collect();
        if let Some(c) = &self.sort {
            hits.sort_by(|a, b| c.compare(&a.result, &b.result));
        }
        let total = hits.len();
        let page = hits.into_iter().skip(self.offset).take(self.limit).collect();
        (total, page)
    }
}
