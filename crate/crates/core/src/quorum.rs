//! Cyclic quorum systems and their verifiers.
//!
//! Quorum `i` of a cyclic system is the base difference set translated by
//! `i` modulo `p`. Every block then sits in exactly `k` quorums, every two
//! quorums intersect, and every pair of blocks appears together in at least
//! one quorum (the all-pairs property). The verifiers here check all of that
//! directly, and also accept arbitrary imported systems so that broken ones
//! can be diagnosed.

use serde::{Deserialize, Serialize};

use crate::diffset::DifferenceSet;
use crate::error::{Error, Result};
use crate::{block_pair_count, tri_index};

/// `p` blocks covered by a family of quorums.
///
/// Quorums are stored sorted. `base` is the generating set for cyclic
/// systems and may be empty for imported non-cyclic ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawQuorumSystem")]
pub struct QuorumSystem {
    p: usize,
    base: Vec<usize>,
    quorums: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct RawQuorumSystem {
    p: usize,
    #[serde(default)]
    base: Vec<usize>,
    quorums: Vec<Vec<usize>>,
}

impl TryFrom<RawQuorumSystem> for QuorumSystem {
    type Error = Error;

    fn try_from(raw: RawQuorumSystem) -> Result<Self> {
        QuorumSystem::from_parts(raw.p, raw.base, raw.quorums)
    }
}

impl QuorumSystem {
    /// The `p` cyclic translates of a verified difference set.
    pub fn generate(base: &DifferenceSet) -> Result<Self> {
        if !base.verify() {
            return Err(Error::InvalidInput(format!(
                "{base} is not a difference set mod {}",
                base.p()
            )));
        }
        let p = base.p();
        let quorums = (0..p).map(|i| base.translate(i)).collect();
        Ok(Self {
            p,
            base: base.elements().to_vec(),
            quorums,
        })
    }

    /// An arbitrary system, checked only for structure: `p >= 1`, members in
    /// range, no duplicates within a quorum, and a well-formed base.
    pub fn from_parts(p: usize, base: Vec<usize>, quorums: Vec<Vec<usize>>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidInput("p must be at least 1".into()));
        }
        if base.iter().any(|&b| b >= p) {
            return Err(Error::InvalidInput(format!("base element out of range 0..{p}")));
        }
        let mut sorted = Vec::with_capacity(quorums.len());
        for (i, mut q) in quorums.into_iter().enumerate() {
            q.sort_unstable();
            if let Some(&b) = q.iter().find(|&&b| b >= p) {
                return Err(Error::InvalidInput(format!(
                    "quorum {i} holds block {b}, outside 0..{p}"
                )));
            }
            if q.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInput(format!("quorum {i} repeats a block")));
            }
            sorted.push(q);
        }
        Ok(Self {
            p,
            base,
            quorums: sorted,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn base(&self) -> &[usize] {
        &self.base
    }

    pub fn quorums(&self) -> &[Vec<usize>] {
        &self.quorums
    }

    pub fn quorum(&self, i: usize) -> &[usize] {
        &self.quorums[i]
    }

    /// Largest quorum size; equals `|base|` for generated systems.
    pub fn k(&self) -> usize {
        self.quorums.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn contains(&self, quorum: usize, block: usize) -> bool {
        self.quorums[quorum].binary_search(&block).is_ok()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks that every unordered block pair `(j, k)`, `j <= k`, lies in
    /// some quorum, collecting every containing quorum on success.
    pub fn verify_all_pairs(&self) -> AllPairs {
        let p = self.p;
        let mut witnesses = vec![Vec::new(); block_pair_count(p)];
        for (i, q) in self.quorums.iter().enumerate() {
            for (x, &a) in q.iter().enumerate() {
                for &b in &q[x..] {
                    witnesses[tri_index(p, a, b)].push(i);
                }
            }
        }
        for j in 0..p {
            for k in j..p {
                if witnesses[tri_index(p, j, k)].is_empty() {
                    return AllPairs::Uncovered { pair: (j, k) };
                }
            }
        }
        AllPairs::Covered(WitnessMap { p, witnesses })
    }

    pub fn verify_quorum_properties(&self) -> PropertyReport {
        let p = self.p;

        let mut hits = vec![0usize; p];
        for q in &self.quorums {
            for &b in q {
                hits[b] += 1;
            }
        }
        let coverage = hits.iter().all(|&h| h > 0);

        let membership: Vec<Vec<bool>> = self
            .quorums
            .iter()
            .map(|q| {
                let mut m = vec![false; p];
                q.iter().for_each(|&b| m[b] = true);
                m
            })
            .collect();
        let pairwise_intersection = self.quorums.iter().enumerate().all(|(i, qi)| {
            membership[i + 1..]
                .iter()
                .all(|mj| qi.iter().any(|&b| mj[b]))
        });

        let size = self.quorums.first().map_or(0, Vec::len);
        let equal_size = self.quorums.iter().all(|q| q.len() == size);
        let equal_responsibility = size > 0 && hits.iter().all(|&h| h == size);

        let counterexample = match self.verify_all_pairs() {
            AllPairs::Covered(_) => None,
            AllPairs::Uncovered { pair } => Some(pair),
        };

        PropertyReport {
            coverage,
            pairwise_intersection,
            equal_size,
            equal_responsibility,
            all_pairs: counterexample.is_none(),
            counterexample,
        }
    }
}

/// Outcome of [`QuorumSystem::verify_all_pairs`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AllPairs {
    Covered(WitnessMap),
    /// First uncovered pair in lexicographic order.
    Uncovered { pair: (usize, usize) },
}

impl AllPairs {
    pub fn holds(&self) -> bool {
        matches!(self, AllPairs::Covered(_))
    }

    pub fn into_result(self) -> Result<WitnessMap> {
        match self {
            AllPairs::Covered(w) => Ok(w),
            AllPairs::Uncovered { pair: (j, k) } => Err(Error::Uncovered(j, k)),
        }
    }
}

/// For each unordered block pair, the ascending list of quorums holding both.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessMap {
    p: usize,
    witnesses: Vec<Vec<usize>>,
}

impl WitnessMap {
    pub fn p(&self) -> usize {
        self.p
    }

    /// Quorums containing blocks `j` and `k`, in either argument order.
    pub fn get(&self, j: usize, k: usize) -> &[usize] {
        let (j, k) = if j <= k { (j, k) } else { (k, j) };
        &self.witnesses[tri_index(self.p, j, k)]
    }

    /// All pairs `(j, k)`, `j <= k`, in lexicographic order with witnesses.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &[usize])> + '_ {
        let p = self.p;
        (0..p)
            .flat_map(move |j| (j..p).map(move |k| (j, k)))
            .map(move |(j, k)| ((j, k), self.get(j, k)))
    }
}

/// One flag per quorum property plus the all-pairs result.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PropertyReport {
    /// Union of all quorums is every block.
    pub coverage: bool,
    /// Every two quorums share a block.
    pub pairwise_intersection: bool,
    /// All quorums have the same size `k`.
    pub equal_size: bool,
    /// Every block is in exactly `k` quorums.
    pub equal_responsibility: bool,
    pub all_pairs: bool,
    pub counterexample: Option<(usize, usize)>,
}

impl PropertyReport {
    pub fn all_hold(&self) -> bool {
        self.coverage
            && self.pairwise_intersection
            && self.equal_size
            && self.equal_responsibility
            && self.all_pairs
    }
}
