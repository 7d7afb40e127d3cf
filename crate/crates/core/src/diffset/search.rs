use super::{minimal_k_lower_bound, DifferenceSet};
use crate::error::{Error, Result};

/// Step budget used by the command line when none is given. Enough for every
/// `p <= 64` to finish in a few seconds.
pub const DEFAULT_BUDGET: u64 = 2_000_000_000;

/// Finds a difference set of minimum cardinality for `p`.
///
/// Sizes are tried upward from [`minimal_k_lower_bound`]. For each size an
/// existence search runs first, restricted to translates whose widest cyclic
/// gap wraps around to 0 (every set has such a translate). Once a size
/// succeeds, a plain lexicographic search at that size returns the smallest
/// set containing 0. The result is therefore deterministic and every smaller
/// size has been ruled out exhaustively.
///
/// One step is one candidate-prefix extension. With `budget = None` the search
/// is unbounded.
pub fn search_minimal(p: usize, budget: Option<u64>) -> Result<DifferenceSet> {
    if p == 0 {
        return Err(Error::InvalidInput("modulus p must be at least 1".into()));
    }
    let budget = budget.unwrap_or(u64::MAX);
    let mut steps = 0u64;
    let mut k = minimal_k_lower_bound(p);
    loop {
        let mut search = Search::new(p, k, budget, steps);
        let found = search.run(true);
        steps = search.steps;
        match found {
            Err(Exhausted) => return Err(Error::BudgetExceeded { p, last_k: k, budget }),
            Ok(false) => k += 1,
            Ok(true) => {
                let mut lex = Search::new(p, k, budget, steps);
                return match lex.run(false) {
                    Ok(true) => Ok(DifferenceSet {
                        p,
                        elements: lex.elements,
                    }),
                    Ok(false) => unreachable!("lexicographic search missed an existing set"),
                    Err(Exhausted) => Err(Error::BudgetExceeded { p, last_k: k, budget }),
                };
            }
        }
        // {0..=p/2} always works, so k never passes it.
        debug_assert!(k <= p / 2 + 1);
    }
}

struct Exhausted;

/// Depth-first extension of a sorted prefix starting at 0.
///
/// Differences `d` and `p - d` are realized together, so coverage is tracked
/// per class `min(d, p - d)`.
struct Search {
    p: usize,
    k: usize,
    budget: u64,
    steps: u64,
    elements: Vec<usize>,
    class_hits: Vec<u32>,
    uncovered: usize,
}

impl Search {
    fn new(p: usize, k: usize, budget: u64, steps: u64) -> Self {
        let classes = p / 2;
        let mut elements = Vec::with_capacity(k);
        elements.push(0);
        Self {
            p,
            k,
            budget,
            steps,
            elements,
            class_hits: vec![0; classes + 1],
            uncovered: classes,
        }
    }

    fn class(&self, d: usize) -> usize {
        d.min(self.p - d)
    }

    fn push(&mut self, x: usize) {
        for i in 0..self.elements.len() {
            let c = self.class(x - self.elements[i]);
            if self.class_hits[c] == 0 {
                self.uncovered -= 1;
            }
            self.class_hits[c] += 1;
        }
        self.elements.push(x);
    }

    fn pop(&mut self) {
        let x = self.elements.pop().expect("never pops the fixed 0");
        for i in 0..self.elements.len() {
            let c = self.class(x - self.elements[i]);
            self.class_hits[c] -= 1;
            if self.class_hits[c] == 0 {
                self.uncovered += 1;
            }
        }
    }

    fn run(&mut self, widest_gap_last: bool) -> Result<bool, Exhausted> {
        if widest_gap_last {
            self.extend_canonical(0)
        } else {
            self.extend_lex()
        }
    }

    /// `r` more elements alongside `m` existing ones add at most
    /// `C(r, 2) + r * m` new difference classes.
    fn hopeless(&self) -> bool {
        let m = self.elements.len();
        let r = self.k - m;
        self.uncovered > r * (r.saturating_sub(1)) / 2 + r * m
    }

    fn tick(&mut self) -> Result<(), Exhausted> {
        self.steps += 1;
        if self.steps > self.budget {
            Err(Exhausted)
        } else {
            Ok(())
        }
    }

    fn extend_lex(&mut self) -> Result<bool, Exhausted> {
        let m = self.elements.len();
        if m == self.k {
            return Ok(self.uncovered == 0);
        }
        if self.hopeless() {
            return Ok(false);
        }
        let r = self.k - m;
        let last = self.elements[m - 1];
        for x in last + 1..=self.p - r {
            self.tick()?;
            self.push(x);
            if self.extend_lex()? {
                return Ok(true);
            }
            self.pop();
        }
        Ok(false)
    }

    /// Like [`Self::extend_lex`] but only visits sets where the wrap-around
    /// gap `p - a_k` is at least every internal gap. `widest` is the widest
    /// internal gap of the current prefix.
    fn extend_canonical(&mut self, widest: usize) -> Result<bool, Exhausted> {
        let m = self.elements.len();
        if m == self.k {
            return Ok(self.uncovered == 0);
        }
        if self.hopeless() {
            return Ok(false);
        }
        let r = self.k - m;
        let last = self.elements[m - 1];
        for x in last + 1..=self.p - r {
            // The final element is at least x + r - 1, so the wrap gap is at
            // most p - x - r + 1. Both sides are monotone in x.
            let wrap_max = self.p - x - (r - 1);
            let widest = widest.max(x - last);
            if widest > wrap_max {
                break;
            }
            self.tick()?;
            self.push(x);
            if self.extend_canonical(widest)? {
                return Ok(true);
            }
            self.pop();
        }
        Ok(false)
    }
}
