//! Candidate orders: the raw sequence of k-subsets a plan filters and
//! budgets. Dictionary is lexicographic; Random is a seeded shuffle.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::combinatorics::{binomial_u64, unrank, BinomialTable, DictionaryStream};
use crate::putmodel::{AttributeSet, GenerationMethod};
use crate::seed;

/// Draws after which the random order stops guaranteeing distinctness.
pub const DEDUP_LIMIT: u64 = 1 << 22;

#[derive(Debug, Clone)]
pub(crate) enum CandidateOrder {
    Dictionary(DictionaryStream),
    Random(RandomOrder),
}

impl CandidateOrder {
    pub fn new(method: GenerationMethod, n: usize, k: usize, seed: u64) -> Self {
        match method {
            GenerationMethod::Dictionary => CandidateOrder::Dictionary(DictionaryStream::new(n, k)),
            GenerationMethod::Random => CandidateOrder::Random(RandomOrder::new(n, k, seed)),
        }
    }

    pub fn next_candidate(&mut self) -> Option<Vec<u32>> {
        match self {
            CandidateOrder::Dictionary(d) => d.next_raw(),
            CandidateOrder::Random(r) => r.next_raw(),
        }
    }

    pub fn dedup_abandoned(&self) -> bool {
        match self {
            CandidateOrder::Dictionary(_) => false,
            CandidateOrder::Random(r) => r.dedup_abandoned,
        }
    }
}

/// Seeded uniform order over k-subsets without repetition.
///
/// When `C(n, k)` fits in a `u64` this is a lazily materialized
/// Fisher-Yates shuffle of combination ranks, so it is a permutation of the
/// whole space. Otherwise subsets are drawn directly (Floyd's algorithm)
/// and duplicates are rejected against a seen-set. Past [`DEDUP_LIMIT`]
/// draws either mode falls back to independent draws.
#[derive(Debug, Clone)]
pub struct RandomOrder {
    n: usize,
    k: usize,
    rng: ChaCha8Rng,
    drawn: u64,
    mode: Mode,
    pub(crate) dedup_abandoned: bool,
}

#[derive(Debug, Clone)]
enum Mode {
    Ranked {
        total: u64,
        table: BinomialTable,
        displaced: HashMap<u64, u64>,
    },
    Direct {
        seen: HashSet<Vec<u32>>,
    },
}

impl RandomOrder {
    pub fn new(n: usize, k: usize, base_seed: u64) -> Self {
        let rng = seed::rng(seed::derive(base_seed, seed::GENERATION_STREAM, 0));
        let mode = match binomial_u64(n, k) {
            Some(total) => Mode::Ranked {
                total,
                table: BinomialTable::new(n, k),
                displaced: HashMap::new(),
            },
            None => Mode::Direct { seen: HashSet::new() },
        };
        RandomOrder {
            n,
            k,
            rng,
            drawn: 0,
            mode,
            dedup_abandoned: false,
        }
    }

    fn next_raw(&mut self) -> Option<Vec<u32>> {
        if self.k == 0 || self.k > self.n {
            return None;
        }
        let i = self.drawn;
        let out = match &mut self.mode {
            Mode::Ranked {
                total,
                table,
                displaced,
            } => {
                if i >= *total && !self.dedup_abandoned {
                    return None;
                }
                let r = if i < DEDUP_LIMIT {
                    let j = self.rng.random_range(i..*total);
                    let at_j = displaced.get(&j).copied().unwrap_or(j);
                    let at_i = displaced.remove(&i).unwrap_or(i);
                    if j != i {
                        displaced.insert(j, at_i);
                    }
                    at_j
                } else {
                    if !self.dedup_abandoned {
                        self.dedup_abandoned = true;
                        displaced.clear();
                    }
                    self.rng.random_range(0..*total)
                };
                unrank(table, r, self.n, self.k)
            }
            Mode::Direct { seen } => loop {
                let c = floyd_sample(&mut self.rng, self.n, self.k);
                if i >= DEDUP_LIMIT {
                    if !self.dedup_abandoned {
                        self.dedup_abandoned = true;
                        seen.clear();
                    }
                    break c;
                }
                if seen.insert(c.clone()) {
                    break c;
                }
            },
        };
        self.drawn += 1;
        Some(out)
    }
}

/// A uniform k-subset of `{1..n}`, sorted.
fn floyd_sample(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<u32> {
    let mut chosen: Vec<u32> = Vec::with_capacity(k);
    for j in (n - k + 1)..=n {
        let t = rng.random_range(1..=j as u32);
        if chosen.contains(&t) {
            chosen.push(j as u32);
        } else {
            chosen.push(t);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// `budget` distinct sets in seeded random order (fewer if the space is
/// smaller).
pub fn random_stream(n: usize, k: usize, seed: u64, budget: u64) -> impl Iterator<Item = AttributeSet> {
    let mut order = RandomOrder::new(n, k, seed);
    std::iter::from_fn(move || order.next_raw().map(AttributeSet::from_sorted)).take(budget as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genset::dictionary_stream;
    use std::collections::BTreeSet;

    #[test]
    fn exhausts_small_space_exactly_once() {
        let got: Vec<AttributeSet> = random_stream(5, 2, 11, 10).collect();
        let unique: BTreeSet<_> = got.iter().cloned().collect();
        let all: BTreeSet<_> = dictionary_stream(5, 2).collect();
        assert_eq!(got.len(), 10);
        assert_eq!(unique, all);
        assert_eq!(random_stream(5, 2, 11, 100).count(), 10);
    }

    #[test]
    fn deterministic_per_seed() {
        let a: Vec<_> = random_stream(20, 6, 3, 50).collect();
        let b: Vec<_> = random_stream(20, 6, 3, 50).collect();
        let c: Vec<_> = random_stream(20, 6, 4, 50).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn large_space_distinct() {
        let got: Vec<AttributeSet> = random_stream(30, 15, 9, 1000).collect();
        let unique: BTreeSet<_> = got.iter().collect();
        assert_eq!(unique.len(), 1000);
        assert!(got.iter().all(|s| s.len() == 15 && s.max_index() <= 30));
    }

    #[test]
    fn huge_space_uses_direct_sampling() {
        let mut order = RandomOrder::new(80, 40, 1);
        assert!(matches!(order.mode, Mode::Direct { .. }));
        let a = order.next_raw().unwrap();
        assert_eq!(a.len(), 40);
        assert!(a.windows(2).all(|w| w[0] < w[1]) && a[39] <= 80);
    }

    #[test]
    fn floyd_is_roughly_uniform() {
        let mut rng = seed::rng(5);
        let mut counts = [0usize; 6];
        for _ in 0..6000 {
            for x in floyd_sample(&mut rng, 6, 2) {
                counts[x as usize - 1] += 1;
            }
        }
        // Each element is in 1/3 of 2-subsets of 6 → expected 2000.
        assert!(counts.iter().all(|&c| (1800..2200).contains(&c)), "{counts:?}");
    }
}
