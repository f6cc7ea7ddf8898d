#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;

/// A deterministic mixed-type ARFF: attributes 1..=n alternate nominal
/// (3 values) and numeric; the class depends on attributes 1, 2 and 4
/// plus noise.
pub fn toy_arff(n: usize, m: usize, seed: u64) -> String {
    let mut rng = putwb_core::seed::rng(seed);
    let mut out = String::from("@relation toy\n");
    for a in 1..=n {
        if a % 2 == 1 {
            writeln!(out, "@attribute a{a} {{x,y,z}}").unwrap();
        } else {
            writeln!(out, "@attribute a{a} numeric").unwrap();
        }
    }
    out.push_str("@attribute class {no,yes}\n@data\n");
    let labels = ["x", "y", "z"];
    for _ in 0..m {
        let mut cells = Vec::with_capacity(n + 1);
        let mut score = 0.0;
        for a in 1..=n {
            if a % 2 == 1 {
                let v = rng.random_range(0..3usize);
                if a == 1 && v == 0 {
                    score += 1.0;
                }
                cells.push(labels[v].to_string());
            } else {
                let v: f64 = (rng.random_range(0.0..10.0f64) * 100.0).round() / 100.0;
                if a == 2 && v > 6.0 {
                    score += 1.0;
                }
                if a == 4 && v < 3.0 {
                    score += 0.7;
                }
                cells.push(format!("{v}"));
            }
        }
        let yes = score + rng.random_range(-0.5..0.5) > 0.9;
        cells.push(if yes { "yes" } else { "no" }.into());
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_toy(dir: &Path, n: usize, m: usize, seed: u64) -> PathBuf {
    let p = dir.join("toy.arff");
    std::fs::write(&p, toy_arff(n, m, seed)).unwrap();
    p
}

/// An `m`-row, `n`-attribute numeric dataset with a binary class, built in
/// memory; for checks that depend only on shape.
pub fn shaped(m: usize, n: usize) -> putwb_core::Dataset {
    use putwb_core::dataset::ClassAttribute;
    use putwb_core::{AttributeKind, Cell, Dataset, Row};
    let attrs = (1..=n).map(|i| (format!("a{i}"), AttributeKind::Numeric)).collect();
    let rows = (0..m)
        .map(|r| Row {
            cells: (0..n).map(|c| Cell::Numeric(((r * 31 + c * 7) % 97) as f64)).collect(),
            class: (r % 3 == 0) as u32,
        })
        .collect();
    Dataset::new(
        "shaped",
        attrs,
        ClassAttribute {
            name: "class".into(),
            labels: vec!["0".into(), "1".into()],
            declared_numeric: false,
        },
        rows,
    )
}
