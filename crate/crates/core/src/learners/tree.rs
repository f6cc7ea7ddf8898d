//! C4.5-style decision tree: gain-ratio splits, multiway on nominal
//! attributes, binary thresholds on numeric ones, pessimistic pruning.
//!
//! Nodes live in an arena and are built and pruned without recursion, so
//! deep trees on large samples do not exhaust the stack.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::columns::{Column, Columns, Instance, Value, MISSING};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub min_leaf: usize,
    pub confidence: f64,
    pub use_pruning: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_leaf: 2,
            confidence: 0.25,
            use_pruning: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Test {
    Nominal,
    /// `value <= threshold` goes to child 0.
    Threshold(f64),
}

#[derive(Debug, Clone)]
enum Kind {
    Leaf {
        dist: Vec<f64>,
    },
    Split {
        attr: usize,
        test: Test,
        children: Vec<usize>,
        /// Branch for missing or unknown values: the one that received the
        /// most training rows.
        default: usize,
    },
}

#[derive(Debug, Clone)]
struct Node {
    /// Training rows per class reaching this node.
    counts: Vec<usize>,
    kind: Kind,
}

#[derive(Debug, Clone)]
pub struct TreeModel {
    nodes: Vec<Node>,
}

fn laplace(counts: &[usize]) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    let denom = (total + counts.len()) as f64;
    counts.iter().map(|&c| (c as f64 + 1.0) / denom).collect()
}

fn xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// Entropy in bits of a count vector.
fn info(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    (xlog2x(t) - counts.iter().map(|&c| xlog2x(c as f64)).sum::<f64>()) / t
}

/// Split information of branch sizes, a missing bucket included.
fn split_info(sizes: &[usize]) -> f64 {
    info(sizes)
}

struct Candidate {
    attr: usize,
    test: Test,
    gain: f64,
    ratio: f64,
}

impl TreeModel {
    pub fn train(cols: &Columns, rows: &[u32], params: &TreeParams) -> Self {
        let builder = Builder { cols, params };
        let mut nodes: Vec<Node> = Vec::new();
        nodes.push(Node {
            counts: Vec::new(),
            kind: Kind::Leaf { dist: Vec::new() },
        });
        let mut work: Vec<(usize, Vec<u32>, Vec<usize>)> = vec![(0, rows.to_vec(), Vec::new())];
        while let Some((id, rows, parent_counts)) = work.pop() {
            let counts = builder.class_counts(&rows);
            let leaf_dist = if rows.is_empty() {
                laplace(&parent_counts)
            } else {
                laplace(&counts)
            };
            let split = if rows.is_empty() {
                None
            } else {
                builder.choose(&rows, &counts)
            };
            match split {
                None => {
                    nodes[id] = Node {
                        counts,
                        kind: Kind::Leaf { dist: leaf_dist },
                    };
                }
                Some(c) => {
                    let branches = builder.partition(&rows, c.attr, &c.test);
                    let default = largest(&branches);
                    let mut children = Vec::with_capacity(branches.len());
                    for branch in branches {
                        let child = nodes.len();
                        nodes.push(Node {
                            counts: Vec::new(),
                            kind: Kind::Leaf { dist: Vec::new() },
                        });
                        children.push(child);
                        work.push((child, branch, counts.clone()));
                    }
                    nodes[id] = Node {
                        counts,
                        kind: Kind::Split {
                            attr: c.attr,
                            test: c.test,
                            children,
                            default,
                        },
                    };
                }
            }
        }
        let mut model = TreeModel { nodes };
        if params.use_pruning {
            model.prune(params.confidence);
        }
        model
    }

    /// Subtree replacement by the C4.5 pessimistic error estimate.
    fn prune(&mut self, confidence: f64) {
        let z = Normal::new(0.0, 1.0)
            .expect("standard normal")
            .inverse_cdf(1.0 - confidence);
        let mut estimate = vec![0.0f64; self.nodes.len()];
        // Children are always allocated after their parent, so a reverse
        // scan visits every subtree before its root.
        for id in (0..self.nodes.len()).rev() {
            let node = &self.nodes[id];
            let n: usize = node.counts.iter().sum();
            let errors = n - node.counts.iter().copied().max().unwrap_or(0);
            let as_leaf = errors as f64 + add_errors(n as f64, errors as f64, confidence, z);
            match &node.kind {
                Kind::Leaf { .. } => estimate[id] = as_leaf,
                Kind::Split { children, .. } => {
                    let subtree: f64 = children.iter().map(|&c| estimate[c]).sum();
                    if as_leaf <= subtree + 0.1 {
                        let dist = laplace(&node.counts);
                        self.nodes[id].kind = Kind::Leaf { dist };
                        estimate[id] = as_leaf;
                    } else {
                        estimate[id] = subtree;
                    }
                }
            }
        }
        self.compact();
    }

    /// Drops nodes no longer reachable from the root.
    fn compact(&mut self) {
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut order = Vec::new();
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            remap[id] = order.len();
            order.push(id);
            if let Kind::Split { children, .. } = &self.nodes[id].kind {
                stack.extend(children.iter().rev());
            }
        }
        let mut nodes: Vec<Node> = order.iter().map(|&id| self.nodes[id].clone()).collect();
        for node in &mut nodes {
            if let Kind::Split { children, .. } = &mut node.kind {
                for c in children.iter_mut() {
                    *c = remap[*c];
                }
            }
        }
        self.nodes = nodes;
    }

    pub(crate) fn scores<I: Instance + ?Sized>(&self, row: &I) -> Vec<f64> {
        let mut id = 0;
        loop {
            match &self.nodes[id].kind {
                Kind::Leaf { dist } => return dist.clone(),
                Kind::Split {
                    attr,
                    test,
                    children,
                    default,
                } => {
                    let branch = match (test, row.value(*attr)) {
                        (Test::Nominal, Value::Nominal(v)) if (v as usize) < children.len() => v as usize,
                        (Test::Threshold(t), Value::Numeric(x)) => usize::from(x > *t),
                        _ => *default,
                    };
                    id = children[branch];
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Longest root-to-leaf path, in splits.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, d)) = stack.pop() {
            match &self.nodes[id].kind {
                Kind::Leaf { .. } => best = best.max(d),
                Kind::Split { children, .. } => stack.extend(children.iter().map(|&c| (c, d + 1))),
            }
        }
        best
    }

    /// The root split, as `(attribute position, threshold)` for numeric
    /// tests and `(attribute position, None)` for nominal ones.
    pub fn root_split(&self) -> Option<(usize, Option<f64>)> {
        match &self.nodes[0].kind {
            Kind::Leaf { .. } => None,
            Kind::Split { attr, test, .. } => Some((
                *attr,
                match test {
                    Test::Nominal => None,
                    Test::Threshold(t) => Some(*t),
                },
            )),
        }
    }
}

fn largest(branches: &[Vec<u32>]) -> usize {
    let mut best = 0;
    for (i, b) in branches.iter().enumerate() {
        if b.len() > branches[best].len() {
            best = i;
        }
    }
    best
}

/// Extra errors above `e` observed in `n` rows at the upper confidence
/// limit `cf`; `z` is the matching standard normal quantile.
fn add_errors(n: f64, e: f64, cf: f64, z: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    if e < 1.0 {
        let base = n * (1.0 - cf.powf(1.0 / n));
        if e == 0.0 {
            return base;
        }
        return base + e * (add_errors(n, 1.0, cf, z) - base);
    }
    if e + 0.5 >= n {
        return (n - e).max(0.0);
    }
    let f = (e + 0.5) / n;
    let z2 = z * z;
    let r = (f + z2 / (2.0 * n) + z * (f / n - f * f / n + z2 / (4.0 * n * n)).sqrt()) / (1.0 + z2 / n);
    r * n - e
}

struct Builder<'a> {
    cols: &'a Columns,
    params: &'a TreeParams,
}

impl Builder<'_> {
    fn class_counts(&self, rows: &[u32]) -> Vec<usize> {
        let mut counts = vec![0usize; self.cols.class_count];
        for &r in rows {
            counts[self.cols.classes[r as usize] as usize] += 1;
        }
        counts
    }

    fn choose(&self, rows: &[u32], counts: &[usize]) -> Option<Candidate> {
        let min_leaf = self.params.min_leaf.max(1);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || rows.len() < 2 * min_leaf {
            return None;
        }
        let candidates: Vec<Candidate> = (0..self.cols.width())
            .filter_map(|a| match &self.cols.columns[a] {
                Column::Nominal { values, arity } => self.nominal_split(a, values, *arity, rows),
                Column::Numeric { values } => self.numeric_split(a, values, rows),
            })
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let average = candidates.iter().map(|c| c.gain).sum::<f64>() / candidates.len() as f64;
        let mut best: Option<Candidate> = None;
        for c in candidates {
            if c.gain < average - 1e-9 {
                continue;
            }
            if best.as_ref().is_none_or(|b| c.ratio > b.ratio) {
                best = Some(c);
            }
        }
        best
    }

    fn nominal_split(&self, attr: usize, values: &[u32], arity: u32, rows: &[u32]) -> Option<Candidate> {
        let c = self.cols.class_count;
        let v = arity as usize;
        let mut table = vec![0usize; v * c];
        let mut missing = 0usize;
        for &r in rows {
            let x = values[r as usize];
            if x == MISSING {
                missing += 1;
            } else {
                table[x as usize * c + self.cols.classes[r as usize] as usize] += 1;
            }
        }
        let sizes: Vec<usize> = table.chunks(c).map(|row| row.iter().sum()).collect();
        let min_leaf = self.params.min_leaf.max(1);
        if sizes.iter().filter(|&&s| s >= min_leaf).count() < 2 {
            return None;
        }
        let known = rows.len() - missing;
        let mut known_counts = vec![0usize; c];
        for row in table.chunks(c) {
            for (k, &x) in known_counts.iter_mut().zip(row) {
                *k += x;
            }
        }
        let conditional: f64 = table
            .chunks(c)
            .zip(&sizes)
            .map(|(row, &s)| s as f64 / known as f64 * info(row))
            .sum();
        let raw = info(&known_counts) - conditional;
        // Identical class proportions in every branch give zero gain up to
        // rounding.
        let raw = if raw.abs() < 1e-12 { 0.0 } else { raw };
        if raw < 0.0 {
            return None;
        }
        let gain = known as f64 / rows.len() as f64 * raw;
        let mut buckets = sizes;
        buckets.push(missing);
        let si = split_info(&buckets);
        Some(Candidate {
            attr,
            test: Test::Nominal,
            gain,
            ratio: if si > 0.0 { gain / si } else { 0.0 },
        })
    }

    fn numeric_split(&self, attr: usize, values: &[f64], rows: &[u32]) -> Option<Candidate> {
        let c = self.cols.class_count;
        let min_leaf = self.params.min_leaf.max(1);
        let mut known: Vec<(f64, u32)> = rows
            .iter()
            .filter_map(|&r| {
                let x = values[r as usize];
                (!x.is_nan()).then(|| (x, self.cols.classes[r as usize]))
            })
            .collect();
        let k = known.len();
        if k < 2 * min_leaf {
            return None;
        }
        known.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        // Runs of equal values, each with its class when pure.
        let mut groups: Vec<(usize, Option<u32>)> = Vec::new();
        let mut start = 0;
        for i in 1..=k {
            if i == k || known[i].0 != known[start].0 {
                let cls = known[start].1;
                let pure = known[start..i].iter().all(|p| p.1 == cls);
                groups.push((i, pure.then_some(cls)));
                start = i;
            }
        }
        if groups.len() < 2 {
            return None;
        }
        let mut total = vec![0usize; c];
        for p in &known {
            total[p.1 as usize] += 1;
        }
        let base = info(&total);
        let mut left = vec![0usize; c];
        let mut right = total.clone();
        let mut consumed = 0;
        let mut best: Option<(f64, usize)> = None;
        for g in 0..groups.len() - 1 {
            let end = groups[g].0;
            for p in &known[consumed..end] {
                left[p.1 as usize] += 1;
                right[p.1 as usize] -= 1;
            }
            consumed = end;
            if end < min_leaf || k - end < min_leaf {
                continue;
            }
            // A cut between two runs of the same single class cannot be
            // optimal.
            if let (Some(a), Some(b)) = (groups[g].1, groups[g + 1].1) {
                if a == b {
                    continue;
                }
            }
            let cond = (end as f64 * info(&left) + (k - end) as f64 * info(&right)) / k as f64;
            let gain = base - cond;
            if best.is_none_or(|(g0, _)| gain > g0) {
                best = Some((gain, end));
            }
        }
        let (raw, end) = best?;
        let penalty = ((groups.len() - 1) as f64).log2() / k as f64;
        let gain = k as f64 / rows.len() as f64 * raw - penalty;
        if gain <= 0.0 {
            return None;
        }
        let (lo, hi) = (known[end - 1].0, known[end].0);
        let mut threshold = lo + (hi - lo) / 2.0;
        if threshold >= hi {
            threshold = lo;
        }
        let si = split_info(&[end, k - end, rows.len() - k]);
        Some(Candidate {
            attr,
            test: Test::Threshold(threshold),
            gain,
            ratio: gain / si,
        })
    }

    fn partition(&self, rows: &[u32], attr: usize, test: &Test) -> Vec<Vec<u32>> {
        let col = &self.cols.columns[attr];
        let arity = match (col, test) {
            (Column::Nominal { arity, .. }, Test::Nominal) => *arity as usize,
            _ => 2,
        };
        let mut branches: Vec<Vec<u32>> = vec![Vec::new(); arity];
        let mut missing = Vec::new();
        for &r in rows {
            match (test, col.value(r as usize)) {
                (Test::Nominal, Value::Nominal(v)) => branches[v as usize].push(r),
                (Test::Threshold(t), Value::Numeric(x)) => branches[usize::from(x > *t)].push(r),
                _ => missing.push(r),
            }
        }
        if !missing.is_empty() {
            let target = largest(&branches);
            branches[target].extend(missing);
            branches[target].sort_unstable();
        }
        branches
    }
}
