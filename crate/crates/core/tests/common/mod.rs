//! Brute-force oracles shared by the integration tests. None of these call
//! into the code paths they check.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use quorum_allpairs::ElementTable;

/// Does `set` realize every nonzero residue mod `p` as a difference?
pub fn covers(p: usize, set: &[usize]) -> bool {
    let mut seen = vec![false; p];
    for &a in set {
        for &b in set {
            seen[(a + p - b) % p] = true;
        }
    }
    seen.iter().skip(1).all(|&s| s)
}

/// Every unordered element pair `(x, y)`, `x < y`, of `0..n`.
pub fn all_element_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for x in 0..n {
        for y in x + 1..n {
            out.push((x, y));
        }
    }
    out
}

/// Multiset of pairs as counts.
pub fn pair_counts(pairs: impl IntoIterator<Item = (usize, usize)>) -> BTreeMap<(usize, usize), usize> {
    let mut m = BTreeMap::new();
    for (x, y) in pairs {
        *m.entry((x.min(y), x.max(y))).or_insert(0) += 1;
    }
    m
}

/// Textbook two-pass sample correlation.
pub fn oracle_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..x.len() {
        num += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
    }
    if vx == 0.0 || vy == 0.0 {
        None
    } else {
        Some(num / (vx.sqrt() * vy.sqrt()))
    }
}

pub fn oracle_sad(x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        s += (x[i] - y[i]).abs();
    }
    s
}

/// Relative error, treating two exact zeros as equal.
pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Deterministic synthetic feature matrix.
pub fn synthetic(n: usize, dim: usize, seed: u64) -> ElementTable {
    let mut rng = StdRng::seed_from_u64(seed);
    let values = (0..n * dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
    ElementTable::from_rows(dim, values).unwrap()
}
