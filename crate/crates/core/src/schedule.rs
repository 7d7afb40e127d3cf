//! Static assignment of block pairs to workers.
//!
//! Worker `i` holds the blocks of quorum `i`. Each unordered block pair
//! `(j, k)`, `j <= k`, goes to exactly one worker whose quorum contains both
//! blocks, so every element pair is computed once and only from local data.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::quorum::QuorumSystem;
use crate::{block_pair_count, tri_index};

/// How to pick among several quorums that contain a block pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Lowest-index containing quorum.
    FirstWitness,
    /// Greedy least-loaded candidate, heaviest pairs first.
    #[default]
    Balanced,
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first-witness" => Ok(Policy::FirstWitness),
            "balanced" => Ok(Policy::Balanced),
            other => Err(Error::Config(format!(
                "unknown policy {other:?} (first-witness|balanced)"
            ))),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::FirstWitness => "first-witness",
            Policy::Balanced => "balanced",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    p: usize,
    policy: Policy,
    /// Owner per block pair, indexed by `tri_index`.
    owner: Vec<usize>,
    /// Element-pair cost accumulated per worker.
    workload: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleFile {
    p: usize,
    policy: Policy,
    owner: Vec<[usize; 3]>,
}

impl Schedule {
    /// Assigns every block pair to one worker.
    ///
    /// Self-pairs `(i, i)` always go to worker `i`. The remaining pairs follow
    /// `policy`. Under [`Policy::Balanced`] they are visited in descending
    /// element-pair cost, ties in lexicographic pair order, and each goes to
    /// the least-loaded candidate, ties to the lowest worker index.
    pub fn build(q: &QuorumSystem, part: &Partition, policy: Policy) -> Result<Self> {
        let p = q.p();
        check_shapes(q, part)?;
        let witnesses = q.verify_all_pairs().into_result()?;

        let mut owner = vec![usize::MAX; block_pair_count(p)];
        let mut workload = vec![0u64; p];
        for i in 0..p {
            let candidates = witnesses.get(i, i);
            let w = if candidates.contains(&i) { i } else { candidates[0] };
            owner[tri_index(p, i, i)] = w;
            workload[w] += part.pair_cost(i, i);
        }

        let mut cross: Vec<(usize, usize)> = (0..p)
            .flat_map(|j| (j + 1..p).map(move |k| (j, k)))
            .collect();
        match policy {
            Policy::FirstWitness => {
                for (j, k) in cross {
                    let w = witnesses.get(j, k)[0];
                    owner[tri_index(p, j, k)] = w;
                    workload[w] += part.pair_cost(j, k);
                }
            }
            Policy::Balanced => {
                // Stable sort keeps lexicographic order among equal costs.
                cross.sort_by_key(|&(j, k)| std::cmp::Reverse(part.pair_cost(j, k)));
                for (j, k) in cross {
                    let w = *witnesses
                        .get(j, k)
                        .iter()
                        .min_by_key(|&&w| (workload[w], w))
                        .expect("covered pairs have a witness");
                    owner[tri_index(p, j, k)] = w;
                    workload[w] += part.pair_cost(j, k);
                }
            }
        }
        Ok(Self {
            p,
            policy,
            owner,
            workload,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn owner(&self, j: usize, k: usize) -> usize {
        let (j, k) = if j <= k { (j, k) } else { (k, j) };
        self.owner[tri_index(self.p, j, k)]
    }

    /// Element-pair cost per worker.
    pub fn workload(&self) -> &[u64] {
        &self.workload
    }

    /// Every `(j, k, owner)` in lexicographic pair order.
    pub fn assignments(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let p = self.p;
        (0..p)
            .flat_map(move |j| (j..p).map(move |k| (j, k)))
            .map(move |(j, k)| (j, k, self.owner[tri_index(p, j, k)]))
    }

    /// Block pairs owned by `worker`, in lexicographic order.
    pub fn owned_pairs(&self, worker: usize) -> Vec<(usize, usize)> {
        self.assignments()
            .filter(|&(_, _, w)| w == worker)
            .map(|(j, k, _)| (j, k))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = ScheduleFile {
            p: self.p,
            policy: self.policy,
            owner: self.assignments().map(|(j, k, i)| [j, k, i]).collect(),
        };
        serde_json::to_string_pretty(&file).expect("plain data serializes")
    }

    /// Reads an exported schedule and re-checks it against the quorum system
    /// and partition it will run on.
    pub fn from_json(text: &str, q: &QuorumSystem, part: &Partition) -> Result<Self> {
        let file: ScheduleFile = serde_json::from_str(text)?;
        let p = file.p;
        if p != q.p() {
            return Err(Error::Config(format!(
                "schedule is for p={p}, quorum system has p={}",
                q.p()
            )));
        }
        check_shapes(q, part)?;
        let mut owner = vec![usize::MAX; block_pair_count(p)];
        let mut workload = vec![0u64; p];
        for [j, k, i] in file.owner {
            if j > k || k >= p || i >= p {
                return Err(Error::InvalidInput(format!("bad assignment [{j},{k},{i}]")));
            }
            if !(q.contains(i, j) && q.contains(i, k)) {
                return Err(Error::InvalidInput(format!(
                    "worker {i} does not hold both blocks of ({j},{k})"
                )));
            }
            if j == k && i != j && q.contains(j, j) {
                return Err(Error::InvalidInput(format!(
                    "self-pair ({j},{j}) must be owned by worker {j}"
                )));
            }
            let slot = &mut owner[tri_index(p, j, k)];
            if *slot != usize::MAX {
                return Err(Error::InvalidInput(format!("pair ({j},{k}) assigned twice")));
            }
            *slot = i;
            workload[i] += part.pair_cost(j, k);
        }
        if let Some(t) = owner.iter().position(|&o| o == usize::MAX) {
            let (j, k) = (0..p)
                .flat_map(|j| (j..p).map(move |k| (j, k)))
                .nth(t)
                .expect("index in range");
            return Err(Error::InvalidInput(format!("pair ({j},{k}) has no owner")));
        }
        Ok(Self {
            p,
            policy: file.policy,
            owner,
            workload,
        })
    }

    pub fn balance_report(&self) -> BalanceReport {
        let mut block_pairs = vec![0usize; self.p];
        for &w in &self.owner {
            block_pairs[w] += 1;
        }
        let costs = self.workload.clone();
        let total: u64 = costs.iter().sum();
        let max = costs.iter().copied().max().unwrap_or(0);
        let min = costs.iter().copied().min().unwrap_or(0);
        let mean = total as f64 / self.p as f64;
        let max_over_mean = if total == 0 { 1.0 } else { max as f64 / mean };
        let max_over_min = if max == 0 {
            Some(1.0)
        } else if min == 0 {
            None
        } else {
            Some(max as f64 / min as f64)
        };
        BalanceReport {
            policy: self.policy,
            block_pairs,
            costs,
            total_cost: total,
            max_over_mean,
            max_over_min,
        }
    }
}

fn check_shapes(q: &QuorumSystem, part: &Partition) -> Result<()> {
    if part.p() != q.p() {
        return Err(Error::Config(format!(
            "partition has {} blocks, quorum system has p={}",
            part.p(),
            q.p()
        )));
    }
    if q.quorums().len() != q.p() {
        return Err(Error::Config(format!(
            "need one quorum per worker: {} quorums for p={}",
            q.quorums().len(),
            q.p()
        )));
    }
    Ok(())
}

/// Per-worker load under a schedule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BalanceReport {
    pub policy: Policy,
    pub block_pairs: Vec<usize>,
    pub costs: Vec<u64>,
    pub total_cost: u64,
    pub max_over_mean: f64,
    /// `None` when some worker has no element pairs at all.
    pub max_over_min: Option<f64>,
}
