mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use quorum_allpairs::diffset::search_minimal;
use quorum_allpairs::engine::{self, for_each_element_pair, KernelResult};
use quorum_allpairs::{
    AllPairs, ElementTable, Kernel, Partition, Policy, QuorumSystem, RunOptions, Schedule,
};

fn system(p: usize) -> QuorumSystem {
    QuorumSystem::generate(&search_minimal(p, None).unwrap()).unwrap()
}

#[test]
fn all_pairs_holds_for_every_small_p() {
    for p in 1..=40 {
        let q = system(p);
        let report = q.verify_quorum_properties();
        assert!(report.all_hold(), "p={p}: {report:?}");
        assert!(report.pairwise_intersection);
    }
}

#[test]
fn witnesses_are_consistent_and_cyclic() {
    for p in 1..=40 {
        let q = system(p);
        let k = q.k();
        let AllPairs::Covered(w) = q.verify_all_pairs() else {
            panic!("p={p} uncovered");
        };
        let mut by_difference: BTreeMap<usize, usize> = BTreeMap::new();
        for ((j, kk), ws) in w.iter() {
            assert!(!ws.is_empty());
            for &i in ws {
                assert!(q.quorum(i).contains(&j) && q.quorum(i).contains(&kk), "p={p}");
            }
            let count = *by_difference.entry(kk - j).or_insert(ws.len());
            assert_eq!(count, ws.len(), "p={p}: pair ({j},{kk})");
            if j == kk {
                assert_eq!(ws.len(), k, "p={p}: self pair {j}");
            }
        }
    }
}

#[test]
fn schedules_are_total_and_feasible() {
    for p in 1..=40 {
        let q = system(p);
        let part = Partition::split(3 * p + 1, p).unwrap();
        for policy in [Policy::FirstWitness, Policy::Balanced] {
            let s = Schedule::build(&q, &part, policy).unwrap();
            let assigned: Vec<_> = s.assignments().collect();
            assert_eq!(assigned.len(), p * (p + 1) / 2);
            for (j, k, i) in assigned {
                assert!(j <= k);
                assert!(q.contains(i, j) && q.contains(i, k), "p={p} {policy}");
                if j == k {
                    assert_eq!(i, j);
                }
            }
            assert_eq!(Schedule::build(&q, &part, policy).unwrap(), s);
        }
    }
}

#[test]
fn balanced_not_worse_than_first_witness() {
    // Reported, not a theorem; holds on this matrix.
    for p in [4, 7, 13, 16, 20, 31] {
        let q = system(p);
        let part = Partition::split(100 * p + 3, p).unwrap();
        let fw = Schedule::build(&q, &part, Policy::FirstWitness).unwrap().balance_report();
        let bal = Schedule::build(&q, &part, Policy::Balanced).unwrap().balance_report();
        assert!(bal.costs.iter().max() <= fw.costs.iter().max(), "p={p}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn element_pairs_are_covered_exactly_once(p in 1usize..24, extra in 0usize..40, balanced in any::<bool>()) {
        let n = p + extra;
        let q = system(p);
        let part = Partition::split(n, p).unwrap();
        let policy = if balanced { Policy::Balanced } else { Policy::FirstWitness };
        let s = Schedule::build(&q, &part, policy).unwrap();
        let mut pairs = Vec::new();
        for (j, k, _) in s.assignments() {
            for_each_element_pair(&part, j, k, |x, y| pairs.push((x, y)));
        }
        let got = common::pair_counts(pairs);
        let want = common::pair_counts(common::all_element_pairs(n));
        prop_assert_eq!(got, want);
    }
}

#[test]
fn engine_matches_brute_force() {
    for (n, p) in [(10, 4), (23, 7), (64, 13), (100, 16), (31, 31), (5, 1)] {
        let q = system(p);
        let part = Partition::split(n, p).unwrap();
        let s = Schedule::build(&q, &part, Policy::Balanced).unwrap();
        let table = common::synthetic(n, 6, n as u64);

        let count = engine::run(&table, &q, &s, Kernel::HandshakeCount, RunOptions::default()).unwrap();
        assert_eq!(count.result, KernelResult::Count((n * (n - 1) / 2) as u64));

        for kernel in [Kernel::Pearson, Kernel::SumAbsDiff] {
            let out = engine::run(&table, &q, &s, kernel, RunOptions::default()).unwrap();
            for (x, y) in common::all_element_pairs(n) {
                let want = match kernel {
                    Kernel::Pearson => common::oracle_pearson(table.row(x), table.row(y)).unwrap(),
                    _ => common::oracle_sad(table.row(x), table.row(y)),
                };
                let got = out.result.get(x, y).unwrap();
                assert!(common::rel_err(got, want) <= 1e-12, "{kernel} n={n} p={p} ({x},{y}): {got} vs {want}");
                assert_eq!(out.result.get(y, x), Some(got));
            }
        }
    }
}

#[test]
fn workers_read_only_their_quorum() {
    for (n, p) in [(23, 7), (64, 13), (50, 20)] {
        let q = system(p);
        let part = Partition::split(n, p).unwrap();
        let s = Schedule::build(&q, &part, Policy::Balanced).unwrap();
        let table = common::synthetic(n, 4, 7);
        let opts = RunOptions { workers: 3, instrument: true };
        let out = engine::run(&table, &q, &s, Kernel::SumAbsDiff, opts).unwrap();
        let traces = out.traces.unwrap();
        let k = q.k();
        let cap = k * n.div_ceil(p);
        for (i, t) in traces.iter().enumerate() {
            let expected: Vec<usize> = q.quorum(i).iter().flat_map(|&b| part.block(b)).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
            assert_eq!(t.materialized, expected, "worker {i}");
            assert!(t.touched.iter().all(|x| t.materialized.binary_search(x).is_ok()));
            assert!(t.materialized.len() <= cap);
            assert_eq!(out.report.per_worker[i].elements_held, t.materialized.len());
            assert_eq!(out.report.per_worker[i].element_pairs as usize, t.pairs.len());
        }
        let total: u64 = out.report.per_worker.iter().map(|w| w.element_pairs).sum();
        assert_eq!(total as usize, n * (n - 1) / 2);
    }
}

#[test]
fn output_independent_of_thread_count() {
    let (n, p) = (100, 7);
    let q = system(p);
    let part = Partition::split(n, p).unwrap();
    let s = Schedule::build(&q, &part, Policy::Balanced).unwrap();
    let table = common::synthetic(n, 9, 3);
    let runs: Vec<KernelResult> = [1, 2, 7, 7]
        .iter()
        .map(|&w| {
            engine::run(&table, &q, &s, Kernel::Pearson, RunOptions { workers: w, instrument: false })
                .unwrap()
                .result
        })
        .collect();
    let bits = |r: &KernelResult| match r {
        KernelResult::Matrix { values, .. } => values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        _ => unreachable!(),
    };
    for r in &runs[1..] {
        assert_eq!(bits(r), bits(&runs[0]));
    }
}

#[test]
fn result_files_round_trip_through_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let q = system(4);
    let table = common::synthetic(12, 3, 11);
    let s = Schedule::build(&q, &Partition::split(12, 4).unwrap(), Policy::Balanced).unwrap();
    let out = engine::run(&table, &q, &s, Kernel::SumAbsDiff, RunOptions::default()).unwrap();
    let path = dir.path().join("sad.bin");
    out.result.write_file(&path).unwrap();
    let back = ElementTable::ingest(&path, quorum_allpairs::Format::Bin).unwrap();
    assert_eq!((back.n(), back.dim()), (12, 12));
    for x in 0..12 {
        for y in 0..12 {
            assert_eq!(back.row(x)[y], out.result.get(x, y).unwrap());
        }
    }
}
