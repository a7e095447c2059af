#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use somrst::table::{AttributeSpec, GranularTable};

pub fn names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("a{i}")).collect()
}

pub fn build(m: usize, rows: Vec<Vec<u32>>) -> GranularTable {
    let mut specs: Vec<AttributeSpec> = names(m).into_iter().map(AttributeSpec::condition).collect();
    specs.push(AttributeSpec::decision("d"));
    GranularTable::from_labels(specs, rows.into_iter().map(|r| r.into_iter().map(Some).collect()).collect()).unwrap()
}

/// Label tables with up to `max_n` objects, `max_m` conditions and labels in
/// `1..=max_g`, plus a decision column.
pub fn tables(max_n: usize, max_m: usize, max_g: u32) -> impl Strategy<Value = (usize, GranularTable)> {
    (1..=max_n, 1..=max_m, 1..=max_g, 1..=max_g).prop_flat_map(|(n, m, g, gd)| {
        let row = (proptest::collection::vec(1..=g, m), 1..=gd).prop_map(|(mut r, d)| {
            r.push(d);
            r
        });
        proptest::collection::vec(row, n).prop_map(move |rows| (m, build(m, rows)))
    })
}

pub fn random_table(rng: &mut impl Rng, max_n: usize, max_m: usize, max_g: u32) -> (usize, GranularTable) {
    let n = rng.gen_range(1..=max_n);
    let m = rng.gen_range(1..=max_m);
    let g = rng.gen_range(1..=max_g);
    let gd = rng.gen_range(1..=max_g);
    let rows = (0..n)
        .map(|_| {
            let mut r: Vec<u32> = (0..m).map(|_| rng.gen_range(1..=g)).collect();
            r.push(rng.gen_range(1..=gd));
            r
        })
        .collect();
    (m, build(m, rows))
}

/// Labels of the least-squares three-way split of `vals` into contiguous
/// groups, high group labelled 1.
pub fn optimal_three_way(vals: &[f64]) -> Vec<u32> {
    let mut s: Vec<f64> = vals.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    let sse = |g: Vec<f64>| {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        g.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 1..s.len() {
        for j in i + 1..s.len() {
            let (a, b) = (s[i], s[j]);
            let low = vals.iter().copied().filter(|v| *v < a).collect();
            let mid = vals.iter().copied().filter(|v| *v >= a && *v < b).collect();
            let high = vals.iter().copied().filter(|v| *v >= b).collect();
            let total = sse(low) + sse(mid) + sse(high);
            if total < best.0 - 1e-12 {
                best = (total, a, b);
            }
        }
    }
    vals.iter().map(|v| if *v >= best.2 { 1 } else if *v >= best.1 { 2 } else { 3 }).collect()
}
