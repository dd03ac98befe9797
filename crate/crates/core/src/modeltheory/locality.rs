use std::collections::VecDeque;
use std::fmt;

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use super::{ModelTheoryError, RelationalStructure, CANONICAL_VERTEX_CAP};

/// Permutations tried by the general canonicalizer before giving up.
const PERMUTATION_CAP: u64 = 2_000_000;

/// Quantifier rank `q`, locality radius `r = (3^q - 1)/2`, extension colors
/// `ell` and neighborhood-type budget `t = 2 * 2^(ell * (2r + 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GameParameters {
    pub q: usize,
    pub r: usize,
    pub ell: usize,
    pub t: u128,
}

impl GameParameters {
    pub fn new(q: usize, ell: usize) -> Self {
        let r = (3usize.pow(q as u32) - 1) / 2;
        let exponent = (ell * (2 * r + 1)) as u32;
        let t = 2u128.saturating_mul(2u128.checked_pow(exponent).unwrap_or(u128::MAX));
        GameParameters { q, r, ell, t }
    }

    /// Minimum cycle length for the edge swap: `(4r + 4) * t`.
    pub fn bound(&self) -> u128 {
        ((4 * self.r + 4) as u128).saturating_mul(self.t)
    }

    /// Minimum cycle distance between the swapped vertices.
    pub fn min_distance(&self) -> usize {
        2 * self.r + 2
    }
}

/// The substructure induced on the ball of radius `r` around `center`;
/// `vertices[i]` is the original id of local vertex `i`, the root is local 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub center: usize,
    pub vertices: Vec<usize>,
    pub distance: Vec<usize>,
    pub structure: RelationalStructure,
}

pub fn r_neighborhood(g: &RelationalStructure, v: usize, r: usize) -> Neighborhood {
    let mut dist = vec![usize::MAX; g.size()];
    dist[v] = 0;
    let mut order = vec![v];
    let mut queue = VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        if dist[u] == r {
            continue;
        }
        for w in g.neighbors(u) {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                order.push(w);
                queue.push_back(w);
            }
        }
    }
    Neighborhood {
        center: v,
        distance: order.iter().map(|&u| dist[u]).collect(),
        structure: g.induced(&order),
        vertices: order,
    }
}

/// Canonical code of a rooted neighborhood: equal codes iff there is an
/// isomorphism of the rooted colored substructures.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TypeCode(Vec<u64>);

impl fmt::Display for TypeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.iter().map(|w| format!("{w:x}")).join("."))
    }
}

/// Vertex label: loop bit plus unary memberships, by sorted relation name.
fn labels(s: &RelationalStructure) -> Vec<u64> {
    let mut names: Vec<(usize, &String)> = s.signature().iter().enumerate().collect();
    names.sort_by(|a, b| a.1.cmp(b.1));
    assert!(names.len() < 64, "at most 63 unary relations");
    (0..s.size())
        .map(|v| {
            let mut bits = u64::from(s.related(v, v));
            for (k, &(i, _)) in names.iter().enumerate() {
                bits |= u64::from(s.unary_at(i).contains(v)) << (k + 1);
            }
            bits
        })
        .collect()
}

const TAG_PATH: u64 = 0;
const TAG_CYCLE: u64 = 1;
const TAG_GENERAL: u64 = 2;

pub fn neighborhood_type(g: &RelationalStructure, v: usize, r: usize) -> Result<TypeCode, ModelTheoryError> {
    let nb = r_neighborhood(g, v, r);
    let s = &nb.structure;
    let label = labels(s);
    let simple = (0..s.size()).all(|a| s.neighbors(a).iter().all(|&b| s.related(a, b) && s.related(b, a)));
    if simple && (0..s.size()).all(|a| s.degree(a) <= 2) {
        return Ok(path_or_cycle_code(s, &label));
    }
    general_code(s, &label, &nb.distance)
}

/// Walks from the root along the neighbor `first`, returning the labels met.
fn walk(s: &RelationalStructure, label: &[u64], first: usize) -> Vec<u64> {
    let mut out = Vec::new();
    let mut prev = 0;
    let mut cur = first;
    loop {
        out.push(label[cur]);
        match s.neighbors(cur).into_iter().find(|&w| w != prev) {
            Some(next) if next != 0 => {
                prev = cur;
                cur = next;
            }
            _ => return out,
        }
    }
}

fn path_or_cycle_code(s: &RelationalStructure, label: &[u64]) -> TypeCode {
    let arms: Vec<Vec<u64>> = s.neighbors(0).into_iter().map(|w| walk(s, label, w)).collect();
    let is_cycle = s.edges().len() == s.size() && s.size() >= 3;
    let mut code = vec![if is_cycle { TAG_CYCLE } else { TAG_PATH }, label[0]];
    if is_cycle {
        // both walks go all the way round; keep the smaller reading
        code.extend(arms.into_iter().min().expect("cycle root has neighbors"));
    } else {
        let mut arms = arms;
        arms.sort();
        code.push(arms.len() as u64);
        for arm in arms {
            code.push(arm.len() as u64);
            code.extend(arm);
        }
    }
    TypeCode(code)
}

fn general_code(s: &RelationalStructure, label: &[u64], distance: &[usize]) -> Result<TypeCode, ModelTheoryError> {
    let n = s.size();
    if n > CANONICAL_VERTEX_CAP {
        return Err(ModelTheoryError::CanonicalizationCap { size: n });
    }
    let invariant = |v: usize| (distance[v], label[v], s.degree(v), s.related(v, 0), s.related(0, v));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| invariant(v));
    let classes: Vec<Vec<usize>> = order
        .iter()
        .copied()
        .chunk_by(|&v| invariant(v))
        .into_iter()
        .map(|(_, group)| group.collect())
        .collect();
    let work: u64 = classes
        .iter()
        .map(|c| (1..=c.len() as u64).product::<u64>())
        .try_fold(1u64, |acc, f| acc.checked_mul(f))
        .unwrap_or(u64::MAX);
    if work > PERMUTATION_CAP {
        return Err(ModelTheoryError::CanonicalizationCap { size: n });
    }
    let mut header = vec![TAG_GENERAL, n as u64];
    for &v in &order {
        let (d, l, deg, _, _) = invariant(v);
        header.extend([d as u64, l, deg as u64]);
    }
    let adjacency = |seq: &[usize]| -> Vec<u64> {
        let mut words = vec![0u64; (n * n).div_ceil(64)];
        for (i, &a) in seq.iter().enumerate() {
            for (j, &b) in seq.iter().enumerate() {
                if s.related(a, b) {
                    let bit = i * n + j;
                    words[bit / 64] |= 1 << (bit % 64);
                }
            }
        }
        words
    };
    let best = classes
        .iter()
        .map(|c| c.iter().copied().permutations(c.len()).collect::<Vec<_>>())
        .multi_cartesian_product()
        .map(|parts| adjacency(&parts.concat()))
        .min()
        .unwrap_or_default();
    header.extend(best);
    Ok(TypeCode(header))
}

/// Type codes of every vertex, computed in parallel.
pub(crate) fn all_types(g: &RelationalStructure, r: usize) -> Result<Vec<TypeCode>, ModelTheoryError> {
    (0..g.size())
        .into_par_iter()
        .map(|v| neighborhood_type(g, v, r))
        .collect()
}

/// A bijection `f` (left element `a` to `f[a]`) preserving `r`-neighborhood
/// types, if the type multisets agree.
pub fn hanf_check(
    left: &RelationalStructure,
    right: &RelationalStructure,
    r: usize,
) -> Result<Option<Vec<usize>>, ModelTheoryError> {
    if left.size() != right.size() {
        return Err(ModelTheoryError::SizeMismatch {
            left: left.size(),
            right: right.size(),
        });
    }
    let mut lnames = left.signature().to_vec();
    let mut rnames = right.signature().to_vec();
    lnames.sort();
    rnames.sort();
    if lnames != rnames {
        return Err(ModelTheoryError::SignatureMismatch {
            left: left.signature().to_vec(),
            right: right.signature().to_vec(),
        });
    }
    let lt = all_types(left, r)?;
    let rt = all_types(right, r)?;
    let mut lidx: Vec<usize> = (0..left.size()).collect();
    let mut ridx: Vec<usize> = (0..right.size()).collect();
    lidx.sort_by(|&a, &b| lt[a].cmp(&lt[b]).then(a.cmp(&b)));
    ridx.sort_by(|&a, &b| rt[a].cmp(&rt[b]).then(a.cmp(&b)));
    if lidx.iter().zip(&ridx).any(|(&a, &b)| lt[a] != rt[b]) {
        return Ok(None);
    }
    let mut f = vec![0; left.size()];
    for (&a, &b) in lidx.iter().zip(&ridx) {
        f[a] = b;
    }
    Ok(Some(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::element_set;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn alternating_cycle(n: usize) -> RelationalStructure {
        let mut c = RelationalStructure::cycle(n);
        c.set_unary("L1", element_set(n, (0..n).step_by(2)));
        c.set_unary("L2", element_set(n, (1..n).step_by(2)));
        c
    }

    #[test]
    fn parameters() {
        let p = GameParameters::new(1, 1);
        assert_eq!((p.r, p.t, p.bound()), (1, 16, 128));
        let p = GameParameters::new(2, 1);
        assert_eq!((p.r, p.t, p.bound()), (4, 1024, 20 * 1024));
        assert_eq!(GameParameters::new(0, 3).r, 0);
        assert_eq!(GameParameters::new(5, 3).bound(), u128::MAX);
    }

    #[test]
    fn ball_of_a_cycle_vertex() {
        let c = RelationalStructure::cycle(10);
        let nb = r_neighborhood(&c, 0, 1);
        assert_eq!(nb.vertices, vec![0, 1, 9]);
        let t = neighborhood_type(&c, 0, 1).unwrap();
        // rooted at the center of a 3-vertex path
        let p = RelationalStructure::path(3);
        assert_eq!(t, neighborhood_type(&p, 1, 1).unwrap());
        assert_ne!(t, neighborhood_type(&p, 0, 1).unwrap());
        assert_eq!(
            neighborhood_type(&c, 3, 4).unwrap(),
            neighborhood_type(&c, 7, 4).unwrap()
        );
        // the whole 5-cycle fits in a radius-2 ball
        let c5 = RelationalStructure::cycle(5);
        assert_ne!(
            neighborhood_type(&c5, 0, 2).unwrap(),
            neighborhood_type(&RelationalStructure::path(5), 2, 2).unwrap()
        );
    }

    #[test]
    fn fast_path_matches_general_canonicalizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(3..12);
            let mut c = if rng.gen_bool(0.5) {
                RelationalStructure::cycle(n)
            } else {
                RelationalStructure::path(n)
            };
            c.set_unary("A1", element_set(n, (0..n).filter(|_| rng.gen_bool(0.5))));
            let v = rng.gen_range(0..n);
            let w = rng.gen_range(0..n);
            let r = rng.gen_range(1..4);
            let fast_v = neighborhood_type(&c, v, r).unwrap();
            let fast_w = neighborhood_type(&c, w, r).unwrap();
            let slow = |x: usize| {
                let nb = r_neighborhood(&c, x, r);
                general_code(&nb.structure, &labels(&nb.structure), &nb.distance).unwrap()
            };
            assert_eq!(fast_v == fast_w, slow(v) == slow(w));
        }
    }

    #[test]
    fn general_canonicalization_is_isomorphism_invariant() {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let n = rng.gen_range(2..8);
            let mut s = RelationalStructure::new(n);
            for a in 0..n {
                for b in 0..n {
                    if rng.gen_bool(0.35) {
                        s.set_related(a, b, true);
                    }
                }
            }
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let t = s.relabel(&perm);
            let v = rng.gen_range(0..n);
            assert_eq!(
                neighborhood_type(&s, v, 2).unwrap(),
                neighborhood_type(&t, perm[v], 2).unwrap()
            );
        }
        let mut k = RelationalStructure::new(14);
        for a in 0..14 {
            for b in a + 1..14 {
                k.add_edge(a, b);
            }
        }
        assert!(matches!(
            neighborhood_type(&k, 0, 1),
            Err(ModelTheoryError::CanonicalizationCap { size: 14 })
        ));
    }

    #[test]
    fn type_count_within_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (q, ell) in [(1, 1), (1, 2), (2, 1)] {
            let p = GameParameters::new(q, ell);
            let n = 2 * (p.min_distance() + rng.gen_range(0..20));
            let mut c = alternating_cycle(n);
            for i in 1..=ell {
                c.set_unary(&format!("A{i}"), element_set(n, (0..n).filter(|_| rng.gen_bool(0.5))));
            }
            let distinct: HashSet<TypeCode> = all_types(&c, p.r).unwrap().into_iter().collect();
            assert!(distinct.len() as u128 <= p.t);
        }
        let c = alternating_cycle(12);
        let distinct: HashSet<TypeCode> = all_types(&c, 1).unwrap().into_iter().collect();
        assert_eq!(distinct.len(), 2);
    }

    #[test]
    fn hanf_examples() {
        let a = RelationalStructure::cycle(12);
        let f = hanf_check(&a, &a, 3).unwrap().unwrap();
        assert_eq!(f, (0..12).collect::<Vec<_>>());
        let b = RelationalStructure::cycle(6).disjoint_union(&RelationalStructure::cycle(6));
        assert!(hanf_check(&a, &b, 2).unwrap().is_some());
        assert!(hanf_check(&a, &b, 3).unwrap().is_none());
        assert!(hanf_check(&a, &RelationalStructure::path(12), 1).unwrap().is_none());
        assert!(matches!(
            hanf_check(&a, &RelationalStructure::cycle(11), 1),
            Err(ModelTheoryError::SizeMismatch { left: 12, right: 11 })
        ));
    }
}
