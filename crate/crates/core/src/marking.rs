//! Node-marking policies: the initial descriptor of every product node
//! `(S, v)`, derived from how `v` relates to `S`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coarsen::CoarsePartition;
use crate::error::{Error, Result};
use crate::graph::SpdMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkingKind {
    Simple,
    NodeSize,
    MinDistance,
    LearnedDistance,
}

impl fmt::Display for MarkingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarkingKind::Simple => "simple",
            MarkingKind::NodeSize => "node_size",
            MarkingKind::MinDistance => "min_distance",
            MarkingKind::LearnedDistance => "learned_distance",
        })
    }
}

impl FromStr for MarkingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "simple" | "pi_s" => MarkingKind::Simple,
            "node_size" | "pi_ss" => MarkingKind::NodeSize,
            "min_distance" | "pi_md" => MarkingKind::MinDistance,
            "learned_distance" | "pi_ld" => MarkingKind::LearnedDistance,
            other => return Err(Error::contract(format!("unknown marking '{other}'"))),
        })
    }
}

/// Marking policy. `spd_dim` bounds how many distances the learned-distance
/// policy keeps; `None` keeps all of them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkingSpec {
    pub kind: MarkingKind,
    pub spd_dim: Option<usize>,
}

impl MarkingSpec {
    pub fn new(kind: MarkingKind, spd_dim: Option<usize>) -> Result<Self> {
        if kind == MarkingKind::LearnedDistance && spd_dim == Some(0) {
            return Err(Error::contract("spd_dim must be at least 1"));
        }
        Ok(Self { kind, spd_dim })
    }

    pub fn simple() -> Self {
        Self { kind: MarkingKind::Simple, spd_dim: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mark {
    Simple(bool),
    NodeSize { member: bool, size: usize },
    MinDistance(u32),
    /// Ascending distances from `v` to the kept members of `S`.
    Distances(Vec<u32>),
}

impl Mark {
    /// `max` over the distance multiset; `None` for the other policies.
    pub fn max_distance(&self) -> Option<u32> {
        match self {
            Mark::Distances(d) => d.last().copied(),
            _ => None,
        }
    }
}

/// One [`Mark`] per product node, indexed `super_idx * n + v`.
pub fn mark(cp: &CoarsePartition, spec: MarkingSpec, spd: &SpdMatrix) -> Result<Vec<Mark>> {
    let n = cp.source_n();
    if spd.num_nodes() != n {
        return Err(Error::contract("distance matrix does not match the coarsening"));
    }
    let mut out = Vec::with_capacity(cp.num_supers() * n);
    for s in cp.super_nodes() {
        for v in 0..n {
            let member = s.binary_search(&v).is_ok();
            out.push(match spec.kind {
                MarkingKind::Simple => Mark::Simple(member),
                MarkingKind::NodeSize => Mark::NodeSize { member, size: s.len() },
                MarkingKind::MinDistance => Mark::MinDistance(
                    s.iter().map(|&u| spd.get(v, u)).min().expect("super-nodes are non-empty"),
                ),
                MarkingKind::LearnedDistance => Mark::Distances(distance_multiset(s, v, spd, spec.spd_dim)),
            });
        }
    }
    Ok(out)
}

/// Distances from `v` to the members of `s`, ascending; when truncated the
/// smallest `limit` are kept, ties broken by member id.
pub fn distance_multiset(s: &[usize], v: usize, spd: &SpdMatrix, limit: Option<usize>) -> Vec<u32> {
    let mut by_member: Vec<(u32, usize)> = s.iter().map(|&u| (spd.get(v, u), u)).collect();
    by_member.sort_unstable();
    if let Some(k) = limit {
        by_member.truncate(k);
    }
    by_member.into_iter().map(|(d, _)| d).collect()
}

/// `Σ_{S, v} max_{u ∈ S} d(v, u)` over the untruncated multisets.
pub fn max_distance_sum(cp: &CoarsePartition, spd: &SpdMatrix) -> u64 {
    let n = cp.source_n();
    cp.super_nodes()
        .iter()
        .flat_map(|s| (0..n).map(move |v| (s, v)))
        .map(|(s, v)| s.iter().map(|&u| spd.get(v, u)).max().unwrap_or(0) as u64)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarsen::CoarsePartition;
    use crate::graph::{all_pairs_spd, Graph};

    #[test]
    fn path_distances_to_set() {
        let g = Graph::path(4);
        let cp = CoarsePartition::from_supers(&g, vec![vec![0, 3]]).unwrap();
        let spd = all_pairs_spd(&g);
        let md = mark(&cp, MarkingSpec { kind: MarkingKind::MinDistance, spd_dim: None }, &spd).unwrap();
        assert_eq!(md[1], Mark::MinDistance(1));
        let ld = mark(&cp, MarkingSpec { kind: MarkingKind::LearnedDistance, spd_dim: None }, &spd).unwrap();
        assert_eq!(ld[1], Mark::Distances(vec![1, 2]));
        let ld1 = mark(&cp, MarkingSpec { kind: MarkingKind::LearnedDistance, spd_dim: Some(1) }, &spd).unwrap();
        assert_eq!(ld1[1], Mark::Distances(vec![1]));
    }

    #[test]
    fn members_are_marked() {
        let g = Graph::cycle(5);
        let cp = CoarsePartition::from_supers(&g, vec![vec![1, 2], vec![0, 3, 4]]).unwrap();
        let spd = all_pairs_spd(&g);
        let s = mark(&cp, MarkingSpec::simple(), &spd).unwrap();
        let md = mark(&cp, MarkingSpec { kind: MarkingKind::MinDistance, spd_dim: None }, &spd).unwrap();
        assert_eq!(s[2], Mark::Simple(true));
        assert_eq!(md[2], Mark::MinDistance(0));
        assert_eq!(s[5 + 1], Mark::Simple(false));
    }

    #[test]
    fn rejects_zero_spd_dim() {
        assert!(MarkingSpec::new(MarkingKind::LearnedDistance, Some(0)).is_err());
        assert!(MarkingSpec::new(MarkingKind::Simple, Some(0)).is_ok());
    }

    #[test]
    fn parses_names() {
        assert_eq!("pi_ld".parse::<MarkingKind>().unwrap(), MarkingKind::LearnedDistance);
        assert_eq!("node_size".parse::<MarkingKind>().unwrap(), MarkingKind::NodeSize);
        assert!("nope".parse::<MarkingKind>().is_err());
    }
}
