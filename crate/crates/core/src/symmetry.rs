//! Orbits of the symmetric group acting on `(set, index)` pairs and on
//! quadruples `(S1, i1, S2, i2)`.
//!
//! A pair orbit is fixed by `|S|` and whether `i ∈ S`. A quadruple orbit is
//! fixed by six conditions: whether `i1 = i2`, `|S1|`, `|S2|`, `|S1 ∩ S2|`,
//! the two "same side" memberships `(i1 ∈ S1, i2 ∈ S2)` and the two "cross"
//! memberships `(i1 ∈ S2, i2 ∈ S1)`. Not every tuple of conditions is
//! realisable for a given `n`; [`QuadOrbit::witness`] decides by building
//! a concrete representative.
//!
//! [`brute_force_orbits`] computes the same partitions independently by
//! applying every permutation of `[n]` to the index space.

use std::collections::HashMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Orbit of a pair `(S, i)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairOrbit {
    pub size: usize,
    pub member: bool,
}

impl PairOrbit {
    /// `'-'` for members, `'+'` for non-members.
    pub fn sign(&self) -> char {
        if self.member { '-' } else { '+' }
    }

    pub fn is_realizable(&self, n: usize) -> bool {
        self.size >= 1 && self.size <= n && (self.member || self.size < n)
    }
}

impl fmt::Display for PairOrbit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gamma^{}{}", self.size, self.sign())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IndexRelation {
    Equal,
    Distinct,
}

/// Orbit of a quadruple `(S1, i1, S2, i2)` given by its six conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuadOrbit {
    pub rel: IndexRelation,
    pub k1: usize,
    pub k2: usize,
    pub k_cap: usize,
    /// `(i1 ∈ S1, i2 ∈ S2)`
    pub same: (bool, bool),
    /// `(i1 ∈ S2, i2 ∈ S1)`
    pub diff: (bool, bool),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Region {
    OnlyFirst,
    Both,
    OnlySecond,
    Outside,
}

fn region(in_first: bool, in_second: bool) -> Region {
    match (in_first, in_second) {
        (true, true) => Region::Both,
        (true, false) => Region::OnlyFirst,
        (false, true) => Region::OnlySecond,
        (false, false) => Region::Outside,
    }
}

impl QuadOrbit {
    /// A concrete quadruple in this orbit over `[n]`, or `None` when the
    /// conditions are inconsistent or do not fit in `n` nodes.
    ///
    /// Nodes are laid out as `S1 \ S2`, `S1 ∩ S2`, `S2 \ S1`, rest; each
    /// index is placed in the region its memberships demand.
    pub fn witness(&self, n: usize) -> Option<(Vec<usize>, usize, Vec<usize>, usize)> {
        let (i1, i2) = self.locate(n)?;
        let only_first = self.k1 - self.k_cap;
        let s1: Vec<usize> = (0..self.k1).collect();
        let s2: Vec<usize> = (only_first..only_first + self.k2).collect();
        Some((s1, i1, s2, i2))
    }

    fn locate(&self, n: usize) -> Option<(usize, usize)> {
        let (k1, k2, kc) = (self.k1, self.k2, self.k_cap);
        if k1 == 0 || k2 == 0 || kc > k1.min(k2) || k1 + k2 - kc > n {
            return None;
        }
        let sizes = [k1 - kc, kc, k2 - kc, n - (k1 + k2 - kc)];
        let starts = [0, sizes[0], sizes[0] + sizes[1], sizes[0] + sizes[1] + sizes[2]];
        let slot = |r: Region| match r {
            Region::OnlyFirst => 0,
            Region::Both => 1,
            Region::OnlySecond => 2,
            Region::Outside => 3,
        };
        let r1 = slot(region(self.same.0, self.diff.0));
        let r2 = slot(region(self.diff.1, self.same.1));
        match self.rel {
            IndexRelation::Equal => {
                (r1 == r2 && sizes[r1] > 0).then_some((starts[r1], starts[r1]))
            }
            IndexRelation::Distinct if r1 == r2 => {
                (sizes[r1] >= 2).then_some((starts[r1], starts[r1] + 1))
            }
            IndexRelation::Distinct => {
                (sizes[r1] > 0 && sizes[r2] > 0).then_some((starts[r1], starts[r2]))
            }
        }
    }

    /// Whether some quadruple over `[n]` satisfies all six conditions.
    pub fn is_realizable(&self, n: usize) -> bool {
        self.locate(n).is_some()
    }

    /// Orbits that can label an edge of the two pointwise adjacencies: the
    /// source index lies in its own set, and either the two indices coincide
    /// or the two sets do.
    pub fn is_pointwise(&self) -> bool {
        self.same.1
            && (self.rel == IndexRelation::Equal || (self.k1 == self.k2 && self.k2 == self.k_cap))
    }
}

impl fmt::Display for QuadOrbit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = |x: bool| if x { 1 } else { 0 };
        write!(
            f,
            "Gamma[{};{};{};{};same={}{};diff={}{}]",
            match self.rel {
                IndexRelation::Equal => "=",
                IndexRelation::Distinct => "!=",
            },
            self.k1,
            self.k2,
            self.k_cap,
            b(self.same.0),
            b(self.same.1),
            b(self.diff.0),
            b(self.diff.1)
        )
    }
}

pub fn classify_pair(s: &[usize], i: usize) -> PairOrbit {
    PairOrbit { size: s.len(), member: s.contains(&i) }
}

pub fn classify_quad(s1: &[usize], i1: usize, s2: &[usize], i2: usize) -> QuadOrbit {
    let k_cap = s1.iter().filter(|v| s2.contains(v)).count();
    QuadOrbit {
        rel: if i1 == i2 { IndexRelation::Equal } else { IndexRelation::Distinct },
        k1: s1.len(),
        k2: s2.len(),
        k_cap,
        same: (s1.contains(&i1), s2.contains(&i2)),
        diff: (s2.contains(&i1), s1.contains(&i2)),
    }
}

/// Dense id of a quadruple orbit within an [`OrbitTable`]. Codes are only
/// meaningful together with the table (and hence the `n`) that issued them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrbitCode(pub u32);

/// Realisable quadruple orbits for a fixed `n`, numbered in lexicographic
/// order of their condition tuples.
#[derive(Clone, Debug)]
pub struct OrbitTable {
    n: usize,
    orbits: Vec<QuadOrbit>,
    index: HashMap<QuadOrbit, OrbitCode>,
}

impl OrbitTable {
    pub fn new(n: usize) -> Self {
        Self::with_filter(n, |_| true)
    }

    /// Only the orbits accepted by `keep`, numbered densely in the same
    /// lexicographic order.
    pub fn with_filter(n: usize, keep: impl Fn(&QuadOrbit) -> bool) -> Self {
        let mut orbits = Vec::new();
        for rel in [IndexRelation::Equal, IndexRelation::Distinct] {
            for k1 in 1..=n {
                for k2 in 1..=n {
                    for k_cap in 0..=k1.min(k2) {
                        for bits in 0u8..16 {
                            let o = QuadOrbit {
                                rel,
                                k1,
                                k2,
                                k_cap,
                                same: (bits & 8 != 0, bits & 4 != 0),
                                diff: (bits & 2 != 0, bits & 1 != 0),
                            };
                            if keep(&o) && o.is_realizable(n) {
                                orbits.push(o);
                            }
                        }
                    }
                }
            }
        }
        debug_assert!(orbits.windows(2).all(|w| w[0] < w[1]));
        let index = orbits.iter().enumerate().map(|(c, &o)| (o, OrbitCode(c as u32))).collect();
        Self { n, orbits, index }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.orbits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbits.is_empty()
    }

    pub fn orbits(&self) -> &[QuadOrbit] {
        &self.orbits
    }

    pub fn code(&self, orbit: &QuadOrbit) -> Option<OrbitCode> {
        self.index.get(orbit).copied()
    }

    pub fn orbit(&self, code: OrbitCode) -> QuadOrbit {
        self.orbits[code.0 as usize]
    }
}

/// Shared full orbit table for `n`, built on first use.
pub fn orbit_table(n: usize) -> Arc<OrbitTable> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<OrbitTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("orbit table cache poisoned");
    guard.entry(n).or_insert_with(|| Arc::new(OrbitTable::new(n))).clone()
}

/// Realisable pair orbits for `n`, ordered by size then membership.
pub fn pair_orbits(n: usize) -> Vec<PairOrbit> {
    (1..=n)
        .flat_map(|size| [false, true].map(|member| PairOrbit { size, member }))
        .filter(|o| o.is_realizable(n))
        .collect()
}

/// Number of parameters the 3-IGN layer needs for the same index block.
pub const THREE_IGN_PARAMS: usize = 203;

/// `(orbits of the |S1| = |S2| = 2 block, 3-IGN reference count)`.
pub fn param_count_comparison(n: usize) -> (usize, usize) {
    let block = OrbitTable::with_filter(n, |o| o.k1 == 2 && o.k2 == 2).len();
    (block, THREE_IGN_PARAMS)
}

/// Number of pair orbits whose set has exactly `size` elements.
pub fn pair_block_count(n: usize, size: usize) -> usize {
    pair_orbits(n).iter().filter(|o| o.size == size).count()
}

pub const ORACLE_MAX_N: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMode {
    Pair,
    Quad,
}

/// A partition of an index space into orbits, as computed by the oracle.
/// Sets are bit masks over `[n]`.
#[derive(Clone, Debug)]
pub struct OrbitPartition {
    pub n: usize,
    pub pairs: Vec<(u32, usize)>,
    /// For `Pair` mode one label per pair; for `Quad` mode one label per
    /// ordered pair of pairs, row-major over `pairs`.
    pub labels: Vec<usize>,
    pub num_orbits: usize,
}

pub fn mask_members(mask: u32) -> Vec<usize> {
    (0..32).filter(|b| mask & (1 << b) != 0).collect()
}

fn permute_mask(mask: u32, perm: &[usize]) -> u32 {
    let mut out = 0;
    for (b, &p) in perm.iter().enumerate() {
        if mask & (1 << b) != 0 {
            out |= 1 << p;
        }
    }
    out
}

/// Calls `f` with every permutation of `0..n` (lexicographic order).
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        f(&p);
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            return;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).expect("successor exists");
        p.swap(i - 1, j);
        p[i..].reverse();
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Orbits of `S_n` on the pair (or quadruple) index space, restricted to
/// sets whose size lies in `set_sizes`, computed by applying all `n!`
/// permutations and merging each index with its image.
pub fn brute_force_orbits(
    n: usize,
    mode: OracleMode,
    set_sizes: RangeInclusive<usize>,
) -> Result<OrbitPartition> {
    if n > ORACLE_MAX_N {
        return Err(Error::OracleTooLarge { n, limit: ORACLE_MAX_N });
    }
    let masks: Vec<u32> = (1u32..(1 << n))
        .filter(|m| set_sizes.contains(&(m.count_ones() as usize)))
        .collect();
    let pairs: Vec<(u32, usize)> =
        masks.iter().flat_map(|&m| (0..n).map(move |i| (m, i))).collect();
    let pair_id: HashMap<(u32, usize), usize> =
        pairs.iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let np = pairs.len();
    let size = match mode {
        OracleMode::Pair => np,
        OracleMode::Quad => np * np,
    };
    let mut uf = UnionFind::new(size);
    let mut image = vec![0usize; np];
    for_each_permutation(n, |perm| {
        for (k, &(m, i)) in pairs.iter().enumerate() {
            image[k] = pair_id[&(permute_mask(m, perm), perm[i])];
        }
        match mode {
            OracleMode::Pair => {
                for k in 0..np {
                    uf.union(k, image[k]);
                }
            }
            OracleMode::Quad => {
                for a in 0..np {
                    for b in 0..np {
                        uf.union(a * np + b, image[a] * np + image[b]);
                    }
                }
            }
        }
    });
    let mut relabel = HashMap::new();
    let mut labels = Vec::with_capacity(size);
    for x in 0..size {
        let r = uf.find(x);
        let next = relabel.len();
        labels.push(*relabel.entry(r).or_insert(next));
    }
    Ok(OrbitPartition { n, pairs, labels, num_orbits: relabel.len() })
}

impl OrbitPartition {
    /// True when `key` is constant on every oracle orbit and takes
    /// different values on different orbits.
    pub fn agrees_with<K: Eq + std::hash::Hash + Clone>(&self, mut key: impl FnMut(usize) -> K) -> bool {
        let mut fwd: HashMap<usize, K> = HashMap::new();
        let mut back: HashMap<K, usize> = HashMap::new();
        for (x, &label) in self.labels.iter().enumerate() {
            let k = key(x);
            if let Some(prev) = fwd.get(&label) {
                if *prev != k {
                    return false;
                }
            } else {
                fwd.insert(label, k.clone());
            }
            if let Some(&prev) = back.get(&k) {
                if prev != label {
                    return false;
                }
            } else {
                back.insert(k, label);
            }
        }
        true
    }

    pub fn pair_classifier_agrees(&self) -> bool {
        self.agrees_with(|x| {
            let (m, i) = self.pairs[x];
            classify_pair(&mask_members(m), i)
        })
    }

    pub fn quad_classifier_agrees(&self) -> bool {
        let np = self.pairs.len();
        let members: Vec<Vec<usize>> = self.pairs.iter().map(|&(m, _)| mask_members(m)).collect();
        self.agrees_with(|x| {
            let (a, b) = (x / np, x % np);
            classify_quad(&members[a], self.pairs[a].1, &members[b], self.pairs[b].1)
        })
    }
}

/// Position of `(S, i)` in the dense pair index space, where non-empty
/// sets are enumerated by mask value.
pub fn pair_index(mask: u32, i: usize, n: usize) -> usize {
    (mask as usize - 1) * n + i
}

/// Indicator of a pair orbit over the `(2^n - 1) * n` non-empty index
/// space.
pub fn pair_basis_tensor(orbit: PairOrbit, n: usize) -> Result<Vec<f64>> {
    if n > ORACLE_MAX_N {
        return Err(Error::OracleTooLarge { n, limit: ORACLE_MAX_N });
    }
    let mut t = vec![0.0; ((1usize << n) - 1) * n];
    for mask in 1u32..(1 << n) {
        let members = mask_members(mask);
        for i in 0..n {
            if classify_pair(&members, i) == orbit {
                t[pair_index(mask, i, n)] = 1.0;
            }
        }
    }
    Ok(t)
}

/// Indicator of a quadruple orbit; rows index `(S1, i1)`, columns
/// `(S2, i2)`.
pub fn quad_basis_tensor(orbit: QuadOrbit, n: usize) -> Result<Matrix<f64>> {
    if n > ORACLE_MAX_N {
        return Err(Error::OracleTooLarge { n, limit: ORACLE_MAX_N });
    }
    let dim = ((1usize << n) - 1) * n;
    let mut t = Matrix::zeros(dim, dim);
    let members: Vec<Vec<usize>> = (1u32..(1 << n)).map(mask_members).collect();
    for m1 in 1u32..(1 << n) {
        for i1 in 0..n {
            for m2 in 1u32..(1 << n) {
                for i2 in 0..n {
                    let s1 = &members[m1 as usize - 1];
                    let s2 = &members[m2 as usize - 1];
                    if classify_quad(s1, i1, s2, i2) == orbit {
                        t[(pair_index(m1, i1, n), pair_index(m2, i2, n))] = 1.0;
                    }
                }
            }
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_examples() {
        assert_eq!(classify_pair(&[1], 1), PairOrbit { size: 1, member: true });
        assert_eq!(classify_pair(&[1], 2), PairOrbit { size: 1, member: false });
        assert_eq!(classify_pair(&[1], 1).sign(), '-');
        assert_eq!(pair_orbits(5).len(), 9);
        assert_eq!(pair_orbits(3).len(), 5);
        assert_eq!(pair_orbits(2).len(), 3);
    }

    #[test]
    fn quad_example() {
        let o = classify_quad(&[1], 1, &[1], 1);
        assert_eq!(
            o,
            QuadOrbit {
                rel: IndexRelation::Equal,
                k1: 1,
                k2: 1,
                k_cap: 1,
                same: (true, true),
                diff: (true, true)
            }
        );
    }

    #[test]
    fn size_two_block_counts() {
        assert_eq!(param_count_comparison(6), (35, 203));
        assert_eq!(pair_block_count(6, 2), 2);
    }

    #[test]
    fn table_codes_are_dense_and_sorted() {
        let t = OrbitTable::new(4);
        for (c, o) in t.orbits().iter().enumerate() {
            assert_eq!(t.code(o), Some(OrbitCode(c as u32)));
            assert_eq!(t.orbit(OrbitCode(c as u32)), *o);
        }
        assert!(t.orbits().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn inconsistent_tuples_are_rejected() {
        // i1 = i2 but memberships of the shared index disagree
        let bad = QuadOrbit {
            rel: IndexRelation::Equal,
            k1: 1,
            k2: 1,
            k_cap: 0,
            same: (true, false),
            diff: (false, false),
        };
        assert!(!bad.is_realizable(5));
        // union of the sets does not fit
        let big = QuadOrbit {
            rel: IndexRelation::Distinct,
            k1: 3,
            k2: 3,
            k_cap: 0,
            same: (true, true),
            diff: (false, false),
        };
        assert!(!big.is_realizable(5));
        assert!(big.is_realizable(6));
    }

    #[test]
    fn oracle_small_pairs() {
        let p = brute_force_orbits(2, OracleMode::Pair, 1..=2).unwrap();
        assert_eq!(p.num_orbits, 3);
        let p = brute_force_orbits(3, OracleMode::Pair, 1..=3).unwrap();
        assert_eq!(p.num_orbits, 5);
        assert!(p.pair_classifier_agrees());
        assert!(matches!(
            brute_force_orbits(8, OracleMode::Pair, 1..=8),
            Err(Error::OracleTooLarge { n: 8, .. })
        ));
    }

    #[test]
    fn oracle_n4_quads_small_sets() {
        let p = brute_force_orbits(4, OracleMode::Quad, 1..=2).unwrap();
        assert!(p.quad_classifier_agrees());
        let t = OrbitTable::with_filter(4, |o| o.k1 <= 2 && o.k2 <= 2);
        assert_eq!(p.num_orbits, t.len());
    }

    #[test]
    fn witnesses_classify_back() {
        for n in 1..=6 {
            for o in OrbitTable::new(n).orbits() {
                let (s1, i1, s2, i2) = o.witness(n).unwrap();
                assert_eq!(classify_quad(&s1, i1, &s2, i2), *o);
            }
        }
    }

    #[test]
    fn permutations_enumerated() {
        let mut count = 0;
        for_each_permutation(4, |_| count += 1);
        assert_eq!(count, 24);
    }

    #[test]
    fn pair_basis_partitions_unity() {
        let n = 4;
        let mut total = vec![0.0; 15 * n];
        for o in pair_orbits(n) {
            for (t, b) in total.iter_mut().zip(pair_basis_tensor(o, n).unwrap()) {
                *t += b;
            }
        }
        assert!(total.iter().all(|&x| x == 1.0));
    }
}
