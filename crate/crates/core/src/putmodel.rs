//! Model parameters: partition size and the PUT-number scale, exceptions,
//! expenses, generation method and task budgets.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decimal;
use crate::learners::LearnerKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PutModelError {
    #[error("PUT number {0} is outside [-1, 1]")]
    PutNumberOutOfRange(f64),
    #[error("partition size {k} is outside 1..={n}")]
    OutOfRange { k: usize, n: usize },
    #[error("attribute set is empty")]
    EmptySet,
    #[error("attribute index 0 is not valid; indices start at 1")]
    ZeroIndex,
    #[error("attribute index {0} appears more than once")]
    DuplicateIndex(u32),
    #[error("cannot parse attribute set `{0}`")]
    BadSetLiteral(String),
    #[error("{name} must be in (0, 1], got {value}")]
    BadExpense { name: &'static str, value: f64 },
    #[error("folds must be at least 2, got {0}")]
    BadFolds(usize),
    #[error("exactly one of partition_size and put_number must be given")]
    SizeSpecConflict,
    #[error("invalid learner parameters: {0}")]
    BadLearner(String),
}

/// A sorted, duplicate-free, non-empty set of 1-based attribute indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct AttributeSet(Vec<u32>);

impl AttributeSet {
    pub fn new(indices: impl IntoIterator<Item = u32>) -> Result<Self, PutModelError> {
        let mut v: Vec<u32> = indices.into_iter().collect();
        if v.is_empty() {
            return Err(PutModelError::EmptySet);
        }
        v.sort_unstable();
        if v[0] == 0 {
            return Err(PutModelError::ZeroIndex);
        }
        if let Some(w) = v.windows(2).find(|w| w[0] == w[1]) {
            return Err(PutModelError::DuplicateIndex(w[0]));
        }
        Ok(AttributeSet(v))
    }

    /// Wraps indices already known to be strictly increasing and 1-based.
    pub(crate) fn from_sorted(v: Vec<u32>) -> Self {
        debug_assert!(!v.is_empty() && v[0] > 0 && v.windows(2).all(|w| w[0] < w[1]));
        AttributeSet(v)
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_index(&self) -> u32 {
        *self.0.last().expect("attribute sets are non-empty")
    }

    pub fn contains(&self, index: u32) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    /// True when every index of `self` is in `other`.
    pub fn is_subset_of(&self, other: &AttributeSet) -> bool {
        let mut it = other.0.iter();
        self.0.iter().all(|x| it.by_ref().any(|y| y == x))
    }
}

impl fmt::Display for AttributeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{x}")?;
        }
        f.write_str("}")
    }
}

/// Accepts `{1, 2, 5}` as well as bare `1,2,5`.
impl FromStr for AttributeSet {
    type Err = PutModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let inner = t.strip_prefix('{').and_then(|r| r.strip_suffix('}')).unwrap_or(t);
        let indices = inner
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| PutModelError::BadSetLiteral(s.to_string()))?;
        AttributeSet::new(indices)
    }
}

impl<'de> Deserialize<'de> for AttributeSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            List(Vec<u32>),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::List(v) => AttributeSet::new(v),
            Repr::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Parses `1,3;2,5` into two sets. Empty input yields no sets.
pub fn parse_set_list(s: &str) -> Result<Vec<AttributeSet>, PutModelError> {
    s.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeSpec {
    PartitionSize(usize),
    PutNumber(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMethod {
    #[default]
    Dictionary,
    Random,
}

impl FromStr for GenerationMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dictionary" | "dict" => Ok(GenerationMethod::Dictionary),
            "random" => Ok(GenerationMethod::Random),
            other => Err(format!("unknown generation method `{other}`")),
        }
    }
}

/// Everything that shapes which partitions are evaluated and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PutConfigDoc", into = "PutConfigDoc")]
pub struct PutConfig {
    pub size: SizeSpec,
    pub learner: LearnerKind,
    pub privacy_exceptions: Vec<AttributeSet>,
    pub utility_exceptions: Vec<AttributeSet>,
    pub vertical_expense: f64,
    pub horizontal_expense: f64,
    pub generation: GenerationMethod,
    pub seed: u64,
    pub folds: usize,
}

impl PutConfig {
    pub fn new(size: SizeSpec, learner: LearnerKind) -> Self {
        PutConfig {
            size,
            learner,
            privacy_exceptions: Vec::new(),
            utility_exceptions: Vec::new(),
            vertical_expense: 1.0,
            horizontal_expense: 1.0,
            generation: GenerationMethod::Dictionary,
            seed: 1,
            folds: 5,
        }
    }

    pub fn validate(&self) -> Result<(), PutModelError> {
        for (name, value) in [
            ("vertical_expense", self.vertical_expense),
            ("horizontal_expense", self.horizontal_expense),
        ] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(PutModelError::BadExpense { name, value });
            }
        }
        if self.folds < 2 {
            return Err(PutModelError::BadFolds(self.folds));
        }
        if let SizeSpec::PutNumber(p) = self.size {
            if !(-1.0..=1.0).contains(&p) {
                return Err(PutModelError::PutNumberOutOfRange(p));
            }
        }
        self.learner.validate()
    }
}

/// JSON shape of [`PutConfig`]: the size is given by exactly one of
/// `partition_size` or `put_number`.
#[derive(Serialize, Deserialize)]
struct PutConfigDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    partition_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    put_number: Option<f64>,
    learner: LearnerKind,
    #[serde(default)]
    privacy_exceptions: Vec<AttributeSet>,
    #[serde(default)]
    utility_exceptions: Vec<AttributeSet>,
    #[serde(default = "one")]
    vertical_expense: f64,
    #[serde(default = "one")]
    horizontal_expense: f64,
    #[serde(default)]
    generation: GenerationMethod,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_folds")]
    folds: usize,
}

fn one() -> f64 {
    1.0
}
fn default_seed() -> u64 {
    1
}
fn default_folds() -> usize {
    5
}

impl TryFrom<PutConfigDoc> for PutConfig {
    type Error = PutModelError;

    fn try_from(doc: PutConfigDoc) -> Result<Self, Self::Error> {
        let size = match (doc.partition_size, doc.put_number) {
            (Some(k), None) => SizeSpec::PartitionSize(k),
            (None, Some(p)) => SizeSpec::PutNumber(p),
            _ => return Err(PutModelError::SizeSpecConflict),
        };
        let cfg = PutConfig {
            size,
            learner: doc.learner,
            privacy_exceptions: doc.privacy_exceptions,
            utility_exceptions: doc.utility_exceptions,
            vertical_expense: doc.vertical_expense,
            horizontal_expense: doc.horizontal_expense,
            generation: doc.generation,
            seed: doc.seed,
            folds: doc.folds,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<PutConfig> for PutConfigDoc {
    fn from(cfg: PutConfig) -> Self {
        let (partition_size, put_number) = match cfg.size {
            SizeSpec::PartitionSize(k) => (Some(k), None),
            SizeSpec::PutNumber(p) => (None, Some(p)),
        };
        PutConfigDoc {
            partition_size,
            put_number,
            learner: cfg.learner,
            privacy_exceptions: cfg.privacy_exceptions,
            utility_exceptions: cfg.utility_exceptions,
            vertical_expense: cfg.vertical_expense,
            horizontal_expense: cfg.horizontal_expense,
            generation: cfg.generation,
            seed: cfg.seed,
            folds: cfg.folds,
        }
    }
}

/// Maps a PUT number to a partition size.
///
/// `-1` is size 1, `0` is `ceil(n/2)` and `1` is `n`; values in between are
/// interpolated linearly on each side of the midpoint and rounded to the
/// nearest integer, exact halves rounding down.
pub fn put_to_partition_size(p: f64, n: usize) -> Result<usize, PutModelError> {
    if !(-1.0..=1.0).contains(&p) {
        return Err(PutModelError::PutNumberOutOfRange(p));
    }
    if n == 0 {
        return Err(PutModelError::OutOfRange { k: 0, n });
    }
    let mid = n.div_ceil(2) as u64;
    let span = if p >= 0.0 { n as u64 - mid } else { mid - 1 };
    let k = decimal::round_half_down_affine(mid, p, span);
    let k = k.to_i64().unwrap_or(0).clamp(1, n as i64);
    Ok(k as usize)
}

pub fn resolve_partition_size(size: SizeSpec, n: usize) -> Result<usize, PutModelError> {
    match size {
        SizeSpec::PartitionSize(k) if (1..=n).contains(&k) => Ok(k),
        SizeSpec::PartitionSize(k) => Err(PutModelError::OutOfRange { k, n }),
        SizeSpec::PutNumber(p) => put_to_partition_size(p, n),
    }
}

/// Exact binomial coefficient.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::ZERO;
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Default ceiling on tasks per experiment.
pub const DEFAULT_BUDGET_CAP: u64 = 10_000_000;

/// `ceil(v * C(n, k))`, exact.
pub fn task_budget_exact(n: usize, k: usize, v: f64) -> BigUint {
    decimal::ceil_scaled(&binomial(n, k), v)
}

/// `ceil(v * C(n, k))` saturating at `cap` (no cap when `None`), along with
/// whether the cap was hit.
pub fn task_budget(n: usize, k: usize, v: f64, cap: Option<u64>) -> (u64, bool) {
    let exact = task_budget_exact(n, k, v);
    let value = decimal::biguint_to_u64_saturating(&exact);
    match cap {
        Some(c) if value > c => (c, true),
        _ => (value, exact > BigUint::from(u64::MAX)),
    }
}

/// True when some exception is contained in `set`.
pub fn violates_privacy(set: &AttributeSet, exceptions: &[AttributeSet]) -> bool {
    exceptions.iter().any(|e| e.is_subset_of(set))
}

/// True when some utility exception is contained in `set`. Precedence of
/// privacy over utility is applied by the generator, not here.
pub fn boosts_utility(set: &AttributeSet, exceptions: &[AttributeSet]) -> bool {
    exceptions.iter().any(|e| e.is_subset_of(set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(v: &[u32]) -> AttributeSet {
        AttributeSet::new(v.iter().copied()).unwrap()
    }

    #[test]
    fn mapping_matches_reported_sizes() {
        let cases = [
            (-1.0, 1),
            (-0.75, 4),
            (-0.5, 8),
            (-0.25, 11),
            (0.0, 15),
            (0.25, 19),
            (0.5, 22),
            (0.75, 26),
            (1.0, 30),
        ];
        for (p, k) in cases {
            assert_eq!(put_to_partition_size(p, 30).unwrap(), k, "p = {p}");
        }
        assert!(put_to_partition_size(1.01, 30).is_err());
        assert!(put_to_partition_size(-1.5, 30).is_err());
    }

    #[test]
    fn resolve_sizes() {
        assert_eq!(resolve_partition_size(SizeSpec::PartitionSize(8), 8), Ok(8));
        assert_eq!(resolve_partition_size(SizeSpec::PutNumber(0.0), 8), Ok(4));
        assert_eq!(
            resolve_partition_size(SizeSpec::PartitionSize(0), 8),
            Err(PutModelError::OutOfRange { k: 0, n: 8 })
        );
    }

    #[test]
    fn budgets() {
        assert_eq!(task_budget(5, 2, 1.0, None), (10, false));
        assert_eq!(task_budget(8, 3, 0.25, None), (14, false));
        assert_eq!(task_budget(30, 15, 1.0, None), (155_117_520, false));
        assert_eq!(
            task_budget(30, 15, 1.0, Some(DEFAULT_BUDGET_CAP)),
            (DEFAULT_BUDGET_CAP, true)
        );
    }

    #[test]
    fn exception_predicates() {
        assert!(violates_privacy(&set(&[1, 2, 3]), &[set(&[1, 3])]));
        assert!(!violates_privacy(&set(&[1, 2, 3]), &[set(&[1, 4])]));
        assert!(!violates_privacy(&set(&[1, 2, 3]), &[]));
        assert!(boosts_utility(&set(&[2, 5, 7]), &[set(&[5, 7])]));
        assert!(!boosts_utility(&set(&[2, 5, 7]), &[set(&[5, 8])]));
        let s = set(&[1, 2, 5]);
        assert!(violates_privacy(&s, &[set(&[1])]) && boosts_utility(&s, &[set(&[5])]));
    }

    #[test]
    fn set_literals() {
        assert_eq!("{5, 1, 2}".parse::<AttributeSet>().unwrap().to_string(), "{1, 2, 5}");
        assert_eq!(parse_set_list("1,3;2,5").unwrap(), vec![set(&[1, 3]), set(&[2, 5])]);
        assert!(parse_set_list("").unwrap().is_empty());
        assert!("1,1".parse::<AttributeSet>().is_err());
        assert!("0,2".parse::<AttributeSet>().is_err());
        assert!("a".parse::<AttributeSet>().is_err());
    }

    #[test]
    fn config_json_shape() {
        let json = r#"{"put_number": 0, "learner": "tree", "privacy_exceptions": [[1,3]], "seed": 7}"#;
        let cfg: PutConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.size, SizeSpec::PutNumber(0.0));
        assert_eq!(cfg.folds, 5);
        assert_eq!(cfg.vertical_expense, 1.0);
        assert_eq!(cfg.generation, GenerationMethod::Dictionary);
        let back: PutConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let both = r#"{"put_number": 0, "partition_size": 3, "learner": "tree"}"#;
        assert!(serde_json::from_str::<PutConfig>(both).is_err());
        let bad_v = r#"{"partition_size": 3, "learner": "naive_bayes", "vertical_expense": 0}"#;
        assert!(serde_json::from_str::<PutConfig>(bad_v).is_err());
    }

    proptest! {
        #[test]
        fn mapping_is_monotone_with_fixed_anchors(n in 1usize..200, a in -1.0f64..=1.0, b in -1.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(put_to_partition_size(lo, n).unwrap() <= put_to_partition_size(hi, n).unwrap());
            prop_assert_eq!(put_to_partition_size(-1.0, n).unwrap(), 1);
            prop_assert_eq!(put_to_partition_size(1.0, n).unwrap(), n);
            prop_assert_eq!(put_to_partition_size(0.0, n).unwrap(), n.div_ceil(2));
        }

        #[test]
        fn privacy_is_monotone_under_growth(base in proptest::collection::btree_set(1u32..12, 1..6),
                                            extra in proptest::collection::btree_set(1u32..12, 0..6),
                                            exc in proptest::collection::btree_set(1u32..12, 1..3)) {
            let s = AttributeSet::new(base.iter().copied()).unwrap();
            let grown = AttributeSet::new(base.union(&extra).copied()).unwrap();
            let e = vec![AttributeSet::new(exc).unwrap()];
            if violates_privacy(&s, &e) {
                prop_assert!(violates_privacy(&grown, &e));
            }
        }
    }
}
