//! Relaxed difference sets modulo `p`.
//!
//! A set `A = {a_1, .., a_k}` of residues mod `p` is a relaxed difference set
//! when every nonzero residue `d` can be written as `a_i - a_j (mod p)` for
//! some pair of members. Unlike perfect difference sets, a residue may be
//! realized more than once.

mod cache;
mod search;

use std::fmt;

use crate::error::{Error, Result};

pub use cache::DiffsetCache;
pub use search::{search_minimal, DEFAULT_BUDGET};

/// A candidate relaxed `(p, k)` difference set in canonical form: sorted,
/// distinct residues in `0..p` with `elements[0] == 0`.
///
/// Construction only enforces the structural invariants. Whether the set
/// actually covers every difference is answered by [`DifferenceSet::verify`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DifferenceSet {
    p: usize,
    elements: Vec<usize>,
}

impl DifferenceSet {
    /// Builds a set from residues that already contain 0.
    pub fn new(p: usize, elements: impl Into<Vec<usize>>) -> Result<Self> {
        let mut elements = elements.into();
        check_structure(p, &elements)?;
        elements.sort_unstable();
        if elements[0] != 0 {
            return Err(Error::InvalidInput(format!(
                "difference set mod {p} must contain 0 (got {elements:?})"
            )));
        }
        Ok(Self { p, elements })
    }

    /// Builds a set from arbitrary residues, translating so that the smallest
    /// residue becomes 0.
    pub fn canonical(p: usize, residues: &[usize]) -> Result<Self> {
        check_structure(p, residues)?;
        let shift = *residues.iter().min().expect("non-empty after check");
        let mut elements: Vec<usize> = residues.iter().map(|&a| a - shift).collect();
        elements.sort_unstable();
        Ok(Self { p, elements })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Cardinality `k` of the set.
    pub fn k(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    /// True iff every nonzero residue mod `p` is a difference of two members.
    pub fn verify(&self) -> bool {
        covers_all_differences(self.p, &self.elements)
    }

    /// Returns `{(a + t) mod p}` for every member `a`, sorted. The result
    /// generally does not contain 0.
    pub fn translate(&self, t: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.elements.iter().map(|&a| (a + t) % self.p).collect();
        out.sort_unstable();
        out
    }
}

impl fmt::Display for DifferenceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.elements.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

fn check_structure(p: usize, residues: &[usize]) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidInput("modulus p must be at least 1".into()));
    }
    if residues.is_empty() {
        return Err(Error::InvalidInput("difference set must be non-empty".into()));
    }
    let mut seen = vec![false; p];
    for &a in residues {
        if a >= p {
            return Err(Error::InvalidInput(format!(
                "element {a} out of range 0..{p}"
            )));
        }
        if std::mem::replace(&mut seen[a], true) {
            return Err(Error::InvalidInput(format!("duplicate element {a}")));
        }
    }
    Ok(())
}

/// Checks an arbitrary residue list for full difference coverage.
///
/// Structural problems (out of range, duplicates, empty) are reported as
/// errors, never as a `false` verification result. The check is
/// translation-invariant, so the residues need not contain 0.
pub fn verify_residues(p: usize, residues: &[usize]) -> Result<bool> {
    check_structure(p, residues)?;
    Ok(covers_all_differences(p, residues))
}

fn covers_all_differences(p: usize, residues: &[usize]) -> bool {
    let mut covered = vec![false; p];
    let mut missing = p - 1;
    for &a in residues {
        for &b in residues {
            if a == b {
                continue;
            }
            let d = (a + p - b) % p;
            if !std::mem::replace(&mut covered[d], true) {
                missing -= 1;
            }
        }
    }
    missing == 0
}

/// Smallest `k` with `k(k-1) + 1 >= p`.
///
/// Every relaxed difference set mod `p` has at least this many elements,
/// since `k` members produce at most `k(k-1)` ordered nonzero differences.
/// It is a bound only; some `p` need more.
pub fn minimal_k_lower_bound(p: usize) -> usize {
    let mut k = 1;
    while k * (k - 1) + 1 < p {
        k += 1;
    }
    k
}

/// The consecutive run `{0, 1, .., floor(p/2)}`.
///
/// Always a valid (usually far from minimal) difference set, for use when the
/// search budget is too small to find an optimal one.
pub fn fallback_consecutive(p: usize) -> DifferenceSet {
    assert!(p >= 1, "p must be at least 1");
    let m = p / 2 + 1;
    DifferenceSet {
        p,
        elements: (0..m.min(p)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: tabulate every ordered difference.
    fn difference_table(p: usize, set: &[usize]) -> Vec<usize> {
        let mut diffs: Vec<usize> = set
            .iter()
            .flat_map(|&a| set.iter().map(move |&b| (a as i64 - b as i64).rem_euclid(p as i64) as usize))
            .filter(|&d| d != 0)
            .collect();
        diffs.sort_unstable();
        diffs.dedup();
        diffs
    }

    #[test]
    fn lower_bound_examples() {
        assert_eq!(minimal_k_lower_bound(7), 3);
        assert_eq!(minimal_k_lower_bound(1), 1);
        assert_eq!(minimal_k_lower_bound(16), 5);
    }

    #[test]
    fn lower_bound_matches_enumeration() {
        for p in 1..200 {
            let k = (1..).find(|&k: &usize| k * (k - 1) + 1 >= p).unwrap();
            assert_eq!(minimal_k_lower_bound(p), k, "p={p}");
        }
    }

    #[test]
    fn verify_examples() {
        assert_eq!(difference_table(7, &[0, 1, 3]), vec![1, 2, 3, 4, 5, 6]);
        assert!(DifferenceSet::new(7, vec![0, 1, 3]).unwrap().verify());

        assert_eq!(difference_table(5, &[0, 1]), vec![1, 4]);
        assert!(!DifferenceSet::new(5, vec![0, 1]).unwrap().verify());

        assert!(DifferenceSet::new(2, vec![0, 1]).unwrap().verify());
        assert!(DifferenceSet::new(1, vec![0]).unwrap().verify());
    }

    #[test]
    fn structural_violations_are_errors() {
        assert!(matches!(verify_residues(7, &[0, 7]), Err(Error::InvalidInput(_))));
        assert!(matches!(verify_residues(7, &[0, 3, 3]), Err(Error::InvalidInput(_))));
        assert!(matches!(verify_residues(7, &[]), Err(Error::InvalidInput(_))));
        assert!(matches!(verify_residues(0, &[0]), Err(Error::InvalidInput(_))));
        assert!(DifferenceSet::new(7, vec![1, 3]).is_err());
    }

    #[test]
    fn canonical_translates_to_zero() {
        let s = DifferenceSet::canonical(7, &[4, 2, 5]).unwrap();
        assert_eq!(s.elements(), &[0, 2, 3]);
        assert!(s.verify());
    }

    #[test]
    fn fallback_examples() {
        assert_eq!(fallback_consecutive(7).elements(), &[0, 1, 2, 3]);
        assert_eq!(fallback_consecutive(2).elements(), &[0, 1]);
        assert_eq!(fallback_consecutive(4).elements(), &[0, 1, 2]);
        assert_eq!(fallback_consecutive(1).elements(), &[0]);
        for p in 1..300 {
            let f = fallback_consecutive(p);
            assert!(f.verify(), "p={p}");
            assert_eq!(difference_table(p, f.elements()).len(), p - 1);
        }
    }

    #[test]
    fn display_lists_elements() {
        assert_eq!(DifferenceSet::new(7, vec![3, 0, 1]).unwrap().to_string(), "{0,1,3}");
    }

    mod props {
        use super::super::*;
        use super::difference_table;
        use proptest::prelude::*;

        fn residue_set() -> impl Strategy<Value = (usize, Vec<usize>)> {
            (1usize..48).prop_flat_map(|p| {
                (Just(p), proptest::sample::subsequence((0..p).collect::<Vec<_>>(), 1..=p.min(9)))
            })
        }

        proptest! {
            #[test]
            fn verifier_agrees_with_difference_table((p, set) in residue_set()) {
                let expected = difference_table(p, &set).len() == p - 1;
                prop_assert_eq!(verify_residues(p, &set).unwrap(), expected);
            }

            #[test]
            fn verifier_is_translation_invariant((p, set) in residue_set(), t in 0usize..64) {
                let shifted: Vec<usize> = set.iter().map(|&a| (a + t) % p).collect();
                prop_assert_eq!(
                    verify_residues(p, &set).unwrap(),
                    verify_residues(p, &shifted).unwrap()
                );
            }
        }
    }
}
