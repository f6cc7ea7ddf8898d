//! Stream of attribute sets to evaluate.
//!
//! A [`PlanStream`] walks a candidate order (lexicographic or seeded random),
//! drops every set containing a privacy exception, and when utility
//! exceptions are given, emits boosted sets before the rest. Privacy
//! filtering happens before the budget is applied, so the number of emitted
//! sets is `min(budget, viable)`.

mod combinatorics;
mod order;

use num_bigint::{BigInt, BigUint, Sign};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use combinatorics::{
    binomial_u64, dictionary_stream, next_combination, rank, unrank, BinomialTable, DictionaryStream,
};
pub use order::{random_stream, RandomOrder, DEDUP_LIMIT};

use crate::decimal::biguint_to_u64_saturating;
use crate::digest::json_digest;
use crate::putmodel::{
    binomial, boosts_utility, resolve_partition_size, task_budget, violates_privacy, AttributeSet, GenerationMethod,
    PutConfig, PutModelError,
};
use crate::seed;
use order::CandidateOrder;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GensetError {
    #[error("every candidate attribute set contains a privacy exception")]
    NoViablePartitions,
    #[error("cursor belongs to a different generation plan")]
    ForeignCursor,
    #[error("cursor does not match the replayed stream: {0}")]
    CorruptCursor(String),
    #[error("invalid generation plan: {0}")]
    BadPlan(String),
    #[error(transparent)]
    Model(#[from] PutModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPlan {
    pub n: usize,
    pub k: usize,
    pub method: GenerationMethod,
    pub budget: u64,
    pub privacy_exceptions: Vec<AttributeSet>,
    pub utility_exceptions: Vec<AttributeSet>,
    pub seed: u64,
}

impl GenerationPlan {
    pub fn validate(&self) -> Result<(), GensetError> {
        if self.k == 0 || self.k > self.n {
            return Err(PutModelError::OutOfRange { k: self.k, n: self.n }.into());
        }
        if self.budget == 0 {
            return Err(GensetError::BadPlan("budget must be at least 1".into()));
        }
        for e in self.privacy_exceptions.iter().chain(&self.utility_exceptions) {
            if e.max_index() as usize > self.n {
                return Err(GensetError::BadPlan(format!(
                    "exception {e} refers past attribute {}",
                    self.n
                )));
            }
        }
        Ok(())
    }

    /// Builds the plan an experiment config implies for `n` attributes.
    pub fn from_config(cfg: &PutConfig, n: usize, budget_cap: Option<u64>) -> Result<Self, GensetError> {
        let k = resolve_partition_size(cfg.size, n)?;
        let (budget, _) = task_budget(n, k, cfg.vertical_expense, budget_cap);
        let plan = GenerationPlan {
            n,
            k,
            method: cfg.generation,
            budget: budget.max(1),
            privacy_exceptions: cfg.privacy_exceptions.clone(),
            utility_exceptions: cfg.utility_exceptions.clone(),
            seed: cfg.seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn digest(&self) -> String {
        json_digest(self)
    }

    /// Candidates examined by the boosted pass before it gives up.
    pub fn scan_cap(&self) -> u64 {
        self.budget.saturating_mul(16).max(1 << 20)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanReport {
    /// `C(n, k)` as a decimal string.
    pub candidates: String,
    pub budget: u64,
    /// k-subsets free of privacy exceptions; `None` when too costly to count.
    pub viable: Option<u64>,
    /// Viable sets that also contain a utility exception.
    pub boosted_viable: Option<u64>,
    /// Sets the stream will emit unless the order ends first.
    pub planned: u64,
    /// Distinct candidate positions examined.
    pub generated: u64,
    pub excluded_privacy: u64,
    pub boosted_kept: u64,
    pub emitted: u64,
    /// Viable sets left out by the budget.
    pub truncated: Option<u64>,
    pub dedup_abandoned: bool,
    pub priority_scan_capped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Phase {
    Single,
    Boosted,
    Fill,
    Done,
}

/// Resumable position in a plan stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCursor {
    pub plan_digest: String,
    pub emitted: u64,
    phase: Phase,
    position: u64,
    phase1_scanned: u64,
    boosted_emitted: u64,
    /// Running hash of every emitted set, checked when a random stream is
    /// replayed.
    filter_digest: u64,
    /// Dictionary only: the next candidate the order will produce.
    next_candidate: Option<Vec<u32>>,
    report: PlanReport,
}

impl GeneratorCursor {
    /// Generation counters as of this position.
    pub fn report(&self) -> &PlanReport {
        &self.report
    }
}

#[derive(Debug, Clone)]
pub struct PlanStream {
    plan: GenerationPlan,
    digest: String,
    order: CandidateOrder,
    phase: Phase,
    position: u64,
    phase1_scanned: u64,
    boosted_emitted: u64,
    filter_digest: u64,
    report: PlanReport,
}

impl PlanStream {
    pub fn new(plan: GenerationPlan) -> Result<Self, GensetError> {
        plan.validate()?;
        let viable = count_avoiding(plan.n, plan.k, &plan.privacy_exceptions).map(|c| biguint_to_u64_saturating(&c));
        if viable == Some(0) {
            return Err(GensetError::NoViablePartitions);
        }
        let boosted_viable = if plan.utility_exceptions.is_empty() {
            Some(0)
        } else {
            let all: Vec<AttributeSet> = plan
                .privacy_exceptions
                .iter()
                .chain(&plan.utility_exceptions)
                .cloned()
                .collect();
            match (viable, count_avoiding(plan.n, plan.k, &all)) {
                (Some(v), Some(rest)) => Some(v - biguint_to_u64_saturating(&rest)),
                _ => None,
            }
        };
        let planned = viable.map_or(plan.budget, |v| v.min(plan.budget));
        let report = PlanReport {
            candidates: binomial(plan.n, plan.k).to_string(),
            budget: plan.budget,
            viable,
            boosted_viable,
            planned,
            truncated: viable.map(|v| v - planned),
            ..Default::default()
        };
        let phase = if plan.utility_exceptions.is_empty() {
            Phase::Single
        } else {
            Phase::Boosted
        };
        Ok(PlanStream {
            digest: plan.digest(),
            order: CandidateOrder::new(plan.method, plan.n, plan.k, plan.seed),
            plan,
            phase,
            position: 0,
            phase1_scanned: 0,
            boosted_emitted: 0,
            filter_digest: 0,
            report,
        })
    }

    /// Continues a stream from `cursor`. Dictionary streams restore their
    /// state directly; random streams replay from the seed and must land on
    /// the recorded position and filter digest.
    pub fn resume(plan: GenerationPlan, cursor: &GeneratorCursor) -> Result<Self, GensetError> {
        let mut stream = PlanStream::new(plan)?;
        if cursor.plan_digest != stream.digest {
            return Err(GensetError::ForeignCursor);
        }
        match stream.plan.method {
            GenerationMethod::Dictionary => {
                stream.order = CandidateOrder::Dictionary(DictionaryStream::starting_at(
                    stream.plan.n,
                    cursor.next_candidate.clone(),
                ));
                stream.phase = cursor.phase;
                stream.position = cursor.position;
                stream.phase1_scanned = cursor.phase1_scanned;
                stream.boosted_emitted = cursor.boosted_emitted;
                stream.filter_digest = cursor.filter_digest;
                stream.report = cursor.report.clone();
            }
            GenerationMethod::Random => {
                for _ in 0..cursor.emitted {
                    if stream.next().is_none() {
                        return Err(GensetError::CorruptCursor(format!(
                            "stream ended before {} sets",
                            cursor.emitted
                        )));
                    }
                }
                // A stream that has emitted its last set may not yet know
                // it is done.
                if cursor.phase == Phase::Done && stream.phase != Phase::Done {
                    stream.next();
                }
                if stream.filter_digest != cursor.filter_digest
                    || stream.position != cursor.position
                    || stream.phase != cursor.phase
                {
                    return Err(GensetError::CorruptCursor("replay diverged".into()));
                }
            }
        }
        Ok(stream)
    }

    pub fn plan(&self) -> &GenerationPlan {
        &self.plan
    }

    pub fn plan_digest(&self) -> &str {
        &self.digest
    }

    pub fn report(&self) -> PlanReport {
        let mut r = self.report.clone();
        r.dedup_abandoned |= self.order.dedup_abandoned();
        r
    }

    /// Sets this stream will emit if the order does not run dry first.
    pub fn planned(&self) -> u64 {
        self.report.planned
    }

    pub fn emitted(&self) -> u64 {
        self.report.emitted
    }

    pub fn cursor(&self) -> GeneratorCursor {
        let next_candidate = match &self.order {
            CandidateOrder::Dictionary(d) => d.peek().map(<[u32]>::to_vec),
            CandidateOrder::Random(_) => None,
        };
        GeneratorCursor {
            plan_digest: self.digest.clone(),
            emitted: self.report.emitted,
            phase: self.phase,
            position: self.position,
            phase1_scanned: self.phase1_scanned,
            boosted_emitted: self.boosted_emitted,
            filter_digest: self.filter_digest,
            next_candidate,
            report: self.report(),
        }
    }

    fn restart_order(&mut self) {
        self.phase1_scanned = self.position;
        self.position = 0;
        self.order = CandidateOrder::new(self.plan.method, self.plan.n, self.plan.k, self.plan.seed);
        self.report.dedup_abandoned |= self.order.dedup_abandoned();
        self.phase = Phase::Fill;
    }

    fn emit(&mut self, raw: Vec<u32>, boosted: bool) -> AttributeSet {
        self.report.emitted += 1;
        if boosted {
            self.report.boosted_kept += 1;
        }
        let h = raw.iter().fold(raw.len() as u64, |acc, &x| seed::mix(acc ^ x as u64));
        self.filter_digest = seed::mix(self.filter_digest ^ h);
        AttributeSet::from_sorted(raw)
    }
}

impl Iterator for PlanStream {
    type Item = AttributeSet;

    fn next(&mut self) -> Option<AttributeSet> {
        loop {
            if self.report.emitted >= self.report.planned {
                self.phase = Phase::Done;
            }
            match self.phase {
                Phase::Done => return None,
                Phase::Single => {
                    let Some(raw) = self.order.next_candidate() else {
                        self.phase = Phase::Done;
                        continue;
                    };
                    self.position += 1;
                    self.report.generated += 1;
                    let set = AttributeSet::from_sorted(raw);
                    if violates_privacy(&set, &self.plan.privacy_exceptions) {
                        self.report.excluded_privacy += 1;
                        continue;
                    }
                    let boosted = boosts_utility(&set, &self.plan.utility_exceptions);
                    return Some(self.emit(set.indices().to_vec(), boosted));
                }
                Phase::Boosted => {
                    if Some(self.boosted_emitted) == self.report.boosted_viable {
                        self.restart_order();
                        continue;
                    }
                    if self.position >= self.plan.scan_cap() {
                        self.report.priority_scan_capped = true;
                        self.restart_order();
                        continue;
                    }
                    let Some(raw) = self.order.next_candidate() else {
                        self.restart_order();
                        continue;
                    };
                    self.position += 1;
                    self.report.generated += 1;
                    let set = AttributeSet::from_sorted(raw);
                    if violates_privacy(&set, &self.plan.privacy_exceptions) {
                        self.report.excluded_privacy += 1;
                        continue;
                    }
                    if boosts_utility(&set, &self.plan.utility_exceptions) {
                        self.boosted_emitted += 1;
                        return Some(self.emit(set.indices().to_vec(), true));
                    }
                }
                Phase::Fill => {
                    let Some(raw) = self.order.next_candidate() else {
                        self.phase = Phase::Done;
                        continue;
                    };
                    self.position += 1;
                    let set = AttributeSet::from_sorted(raw);
                    let seen_before = self.position <= self.phase1_scanned;
                    if !seen_before {
                        self.report.generated += 1;
                    }
                    if violates_privacy(&set, &self.plan.privacy_exceptions) {
                        if !seen_before {
                            self.report.excluded_privacy += 1;
                        }
                        continue;
                    }
                    let boosted = boosts_utility(&set, &self.plan.utility_exceptions);
                    if seen_before && boosted {
                        continue;
                    }
                    return Some(self.emit(set.indices().to_vec(), boosted));
                }
            }
        }
    }
}

/// Largest number of inclusion-exclusion terms visited before giving up.
const COUNT_NODE_LIMIT: u64 = 1 << 20;

/// Number of k-subsets of `{1..n}` containing none of `exceptions`, by
/// inclusion-exclusion over exception unions. `None` when the term count
/// exceeds [`COUNT_NODE_LIMIT`].
pub fn count_avoiding(n: usize, k: usize, exceptions: &[AttributeSet]) -> Option<BigUint> {
    // An exception containing another one is implied by it.
    let mut minimal: Vec<&AttributeSet> = Vec::new();
    let mut sorted: Vec<&AttributeSet> = exceptions.iter().filter(|e| e.max_index() as usize <= n).collect();
    sorted.sort_by_key(|e| e.len());
    sorted.dedup();
    for e in sorted {
        if !minimal.iter().any(|m| m.is_subset_of(e)) {
            minimal.push(e);
        }
    }
    let words = n.div_ceil(64).max(1);
    let masks: Vec<Vec<u64>> = minimal
        .iter()
        .map(|e| {
            let mut m = vec![0u64; words];
            for x in e.iter() {
                let b = x as usize - 1;
                m[b / 64] |= 1 << (b % 64);
            }
            m
        })
        .collect();

    struct Walk<'a> {
        n: usize,
        k: usize,
        masks: &'a [Vec<u64>],
        nodes: u64,
        total: BigInt,
    }
    impl Walk<'_> {
        fn visit(&mut self, start: usize, union: &[u64], odd: bool) -> bool {
            for i in start..self.masks.len() {
                self.nodes += 1;
                if self.nodes > COUNT_NODE_LIMIT {
                    return false;
                }
                let merged: Vec<u64> = union.iter().zip(&self.masks[i]).map(|(a, b)| a | b).collect();
                let sz = merged.iter().map(|w| w.count_ones() as usize).sum::<usize>();
                if sz > self.k {
                    continue;
                }
                let term = BigInt::from_biguint(Sign::Plus, binomial(self.n - sz, self.k - sz));
                if odd {
                    self.total += term;
                } else {
                    self.total -= term;
                }
                if !self.visit(i + 1, &merged, !odd) {
                    return false;
                }
            }
            true
        }
    }
    let mut walk = Walk {
        n,
        k,
        masks: &masks,
        nodes: 0,
        total: BigInt::ZERO,
    };
    if !walk.visit(0, &vec![0u64; words], true) {
        return None;
    }
    // `total` is the count of sets containing at least one exception.
    let containing = walk
        .total
        .to_biguint()
        .expect("inclusion-exclusion count is non-negative");
    Some(binomial(n, k) - containing)
}
