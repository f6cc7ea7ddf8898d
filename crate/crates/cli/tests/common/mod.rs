#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// A deterministic ARFF with `n` attributes, alternating nominal and
/// numeric, whose class leans on the first two.
pub fn toy_arff(n: usize, m: usize) -> String {
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut out = String::from("@relation toy\n");
    for a in 1..=n {
        if a % 2 == 1 {
            writeln!(out, "@attribute a{a} {{x,y,z}}").unwrap();
        } else {
            writeln!(out, "@attribute a{a} numeric").unwrap();
        }
    }
    out.push_str("@attribute class {no,yes}\n@data\n");
    for _ in 0..m {
        let mut cells = Vec::new();
        let mut score = 0.0;
        for a in 1..=n {
            if a % 2 == 1 {
                let v = (next() % 3) as usize;
                if a == 1 && v == 0 {
                    score += 1.0;
                }
                cells.push(["x", "y", "z"][v].to_string());
            } else {
                let v = (next() % 1000) as f64 / 100.0;
                if a == 2 && v > 6.0 {
                    score += 1.0;
                }
                cells.push(format!("{v}"));
            }
        }
        let noise = (next() % 1000) as f64 / 1000.0 - 0.5;
        cells.push(if score + noise > 0.9 { "yes" } else { "no" }.into());
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_toy(dir: &Path, n: usize, m: usize) -> PathBuf {
    let p = dir.join("toy.arff");
    std::fs::write(&p, toy_arff(n, m)).unwrap();
    p
}

pub fn putwb() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_putwb"));
    c.env_remove("PUTWB_WORKERS").env_remove("PUTWB_TOKEN");
    c
}

pub fn run(args: &[&str]) -> Output {
    putwb().args(args).output().unwrap()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
