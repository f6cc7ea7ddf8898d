//! k-subsets of `{1..n}`: lexicographic successor, ranking and unranking.

use crate::putmodel::AttributeSet;

/// `C(n, k)` if it fits in a `u64`.
pub fn binomial_u64(n: usize, k: usize) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is exact at every step; u128 avoids
        // intermediate overflow for any result that fits in u64.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Advances `comb` (strictly increasing, values in `1..=n`) to its
/// lexicographic successor. Returns false when `comb` is the last one.
pub fn next_combination(comb: &mut [u32], n: u32) -> bool {
    let k = comb.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] < n - (k - 1 - i) as u32 {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Binomials `C(a, b)` for `a <= n`, `b <= k`, saturating at `u64::MAX`.
#[derive(Debug, Clone)]
pub struct BinomialTable {
    k: usize,
    rows: Vec<u64>,
}

impl BinomialTable {
    pub fn new(n: usize, k: usize) -> Self {
        let w = k + 1;
        let mut rows = vec![0u64; (n + 1) * w];
        for a in 0..=n {
            rows[a * w] = 1;
            for b in 1..=k.min(a) {
                let up = rows[(a - 1) * w + b - 1];
                let left = if b < a { rows[(a - 1) * w + b] } else { 0 };
                rows[a * w + b] = up.saturating_add(left);
            }
        }
        BinomialTable { k, rows }
    }

    pub fn get(&self, a: usize, b: usize) -> u64 {
        if b > self.k || b > a {
            return 0;
        }
        self.rows[a * (self.k + 1) + b]
    }
}

/// The combination at lexicographic position `rank` among the k-subsets of
/// `{1..n}`. Requires `rank < C(n, k)`, with `C(n, k)` fitting in a `u64`.
pub fn unrank(table: &BinomialTable, mut rank: u64, n: usize, k: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(k);
    let mut x = 1usize;
    for slot in 0..k {
        loop {
            // Combinations whose `slot`-th element is `x`.
            let count = table.get(n - x, k - slot - 1);
            if rank < count {
                break;
            }
            rank -= count;
            x += 1;
        }
        out.push(x as u32);
        x += 1;
    }
    out
}

/// Inverse of [`unrank`].
pub fn rank(table: &BinomialTable, comb: &[u32], n: usize) -> u64 {
    let k = comb.len();
    let mut r = 0u64;
    let mut prev = 0usize;
    for (slot, &c) in comb.iter().enumerate() {
        for x in prev + 1..c as usize {
            r += table.get(n - x, k - slot - 1);
        }
        prev = c as usize;
    }
    r
}

/// All k-subsets of `{1..n}` in lexicographic order.
#[derive(Debug, Clone)]
pub struct DictionaryStream {
    n: u32,
    current: Option<Vec<u32>>,
}

impl DictionaryStream {
    pub fn new(n: usize, k: usize) -> Self {
        let current = (k >= 1 && k <= n).then(|| (1..=k as u32).collect());
        DictionaryStream { n: n as u32, current }
    }

    /// Resumes at `next`, the first combination still to be produced.
    pub(crate) fn starting_at(n: usize, next: Option<Vec<u32>>) -> Self {
        DictionaryStream {
            n: n as u32,
            current: next,
        }
    }

    pub(crate) fn peek(&self) -> Option<&[u32]> {
        self.current.as_deref()
    }

    pub(crate) fn next_raw(&mut self) -> Option<Vec<u32>> {
        let cur = self.current.take()?;
        let mut succ = cur.clone();
        if next_combination(&mut succ, self.n) {
            self.current = Some(succ);
        }
        Some(cur)
    }
}

impl Iterator for DictionaryStream {
    type Item = AttributeSet;

    fn next(&mut self) -> Option<AttributeSet> {
        self.next_raw().map(AttributeSet::from_sorted)
    }
}

pub fn dictionary_stream(n: usize, k: usize) -> DictionaryStream {
    DictionaryStream::new(n, k)
}
