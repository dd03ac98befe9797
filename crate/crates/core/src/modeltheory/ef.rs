use std::collections::HashMap;
use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::{ModelTheoryError, RelationalStructure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Spoiler,
    Duplicator,
}

impl fmt::Display for Winner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Winner::Spoiler => "Spoiler",
            Winner::Duplicator => "Duplicator",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// One round of a Spoiler winning line. `duplicator` is `None` when no
/// response keeps the picked substructures isomorphic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Round {
    pub side: Side,
    pub spoiler: usize,
    pub duplicator: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EfOutcome {
    pub winner: Winner,
    pub rounds: usize,
    /// For a Spoiler win: a winning line against Duplicator's first legal
    /// responses. Empty for a Duplicator win.
    pub trace: Vec<Round>,
}

/// Whether the exact solver accepts `q` rounds on structures of `size`
/// elements: q <= 1 always, q = 2 up to 300, q = 3 up to 64, larger q up to 12.
pub fn ef_cap(q: usize, size: usize) -> bool {
    match q {
        0 | 1 => true,
        2 => size <= 300,
        3 => size <= 64,
        _ => size <= 12,
    }
}

/// Types are packed into 128 bits.
const TYPE_BITS: usize = 128;

struct Game<'a> {
    left: &'a RelationalStructure,
    right: &'a RelationalStructure,
    /// Unary relation `i` of the left structure is relation `right_unary[i]` on the right.
    right_unary: Vec<usize>,
    memo: HashMap<(Vec<(u32, u32)>, usize), bool>,
}

impl Game<'_> {
    fn unary_label(&self, side: Side, x: usize) -> u128 {
        let (s, idx): (&RelationalStructure, Box<dyn Fn(usize) -> usize>) = match side {
            Side::Left => (self.left, Box::new(|i| i)),
            Side::Right => (self.right, Box::new(|i| self.right_unary[i])),
        };
        let mut bits = u128::from(s.related(x, x));
        for i in 0..self.right_unary.len() {
            bits |= u128::from(s.unary_at(idx(i)).contains(x)) << (i + 1);
        }
        bits
    }

    /// Atomic type of `x` relative to the picked tuple on `side`.
    fn atomic_type(&self, side: Side, x: usize, picked: &[usize]) -> u128 {
        let s = match side {
            Side::Left => self.left,
            Side::Right => self.right,
        };
        let mut bits = self.unary_label(side, x);
        let mut shift = self.right_unary.len() + 1;
        for &c in picked {
            bits |= u128::from(x == c) << shift;
            bits |= u128::from(s.related(x, c)) << (shift + 1);
            bits |= u128::from(s.related(c, x)) << (shift + 2);
            shift += 3;
        }
        bits
    }

    fn consistent(&self, pairs: &[(u32, u32)], a: usize, b: usize) -> bool {
        let lefts: Vec<usize> = pairs.iter().map(|&(c, _)| c as usize).collect();
        let rights: Vec<usize> = pairs.iter().map(|&(_, d)| d as usize).collect();
        self.atomic_type(Side::Left, a, &lefts) == self.atomic_type(Side::Right, b, &rights)
    }

    fn candidates(&self, pairs: &[(u32, u32)], side: Side, x: usize) -> Vec<usize> {
        match side {
            Side::Left => (0..self.right.size())
                .filter(|&b| self.consistent(pairs, x, b))
                .collect(),
            Side::Right => (0..self.left.size())
                .filter(|&a| self.consistent(pairs, a, x))
                .collect(),
        }
    }

    fn extend(pairs: &[(u32, u32)], a: usize, b: usize) -> Vec<(u32, u32)> {
        let mut next = pairs.to_vec();
        next.push((a as u32, b as u32));
        next.sort_unstable();
        next
    }

    /// Spoiler moves worth trying: elements not already picked on that side.
    fn spoiler_moves(&self, pairs: &[(u32, u32)]) -> Vec<(Side, usize)> {
        let left_taken: HashSet<usize> = pairs.iter().map(|&(a, _)| a as usize).collect();
        let right_taken: HashSet<usize> = pairs.iter().map(|&(_, b)| b as usize).collect();
        (0..self.left.size())
            .filter(|a| !left_taken.contains(a))
            .map(|a| (Side::Left, a))
            .chain(
                (0..self.right.size())
                    .filter(|b| !right_taken.contains(b))
                    .map(|b| (Side::Right, b)),
            )
            .collect()
    }

    fn last_round_types(&self, pairs: &[(u32, u32)], side: Side) -> HashSet<u128> {
        let picked: Vec<usize> = pairs
            .iter()
            .map(|&(a, b)| if side == Side::Left { a } else { b } as usize)
            .collect();
        let size = match side {
            Side::Left => self.left.size(),
            Side::Right => self.right.size(),
        };
        (0..size).map(|x| self.atomic_type(side, x, &picked)).collect()
    }

    fn duplicator_wins(&mut self, pairs: &[(u32, u32)], k: usize) -> bool {
        if k == 0 {
            return true;
        }
        if let Some(&v) = self.memo.get(&(pairs.to_vec(), k)) {
            return v;
        }
        let result = if k == 1 {
            self.last_round_types(pairs, Side::Left) == self.last_round_types(pairs, Side::Right)
        } else {
            self.spoiler_moves(pairs).into_iter().all(|(side, x)| {
                self.candidates(pairs, side, x).into_iter().any(|y| {
                    let (a, b) = if side == Side::Left { (x, y) } else { (y, x) };
                    self.duplicator_wins(&Self::extend(pairs, a, b), k - 1)
                })
            })
        };
        self.memo.insert((pairs.to_vec(), k), result);
        result
    }

    /// A Spoiler winning line from a position Spoiler wins.
    fn spoiler_line(&mut self, pairs: &[(u32, u32)], k: usize) -> Vec<Round> {
        debug_assert!(k >= 1);
        for (side, x) in self.spoiler_moves(pairs) {
            let responses = self.candidates(pairs, side, x);
            let mut losing = Vec::new();
            let mut all_lose = true;
            for &y in &responses {
                let (a, b) = if side == Side::Left { (x, y) } else { (y, x) };
                let next = Self::extend(pairs, a, b);
                if self.duplicator_wins(&next, k - 1) {
                    all_lose = false;
                    break;
                }
                losing.push(next);
            }
            if !all_lose {
                continue;
            }
            let mut line = vec![Round {
                side,
                spoiler: x,
                duplicator: responses.first().copied(),
            }];
            if let Some(next) = losing.first() {
                line.extend(self.spoiler_line(next, k - 1));
            }
            return line;
        }
        unreachable!("position is not a Spoiler win")
    }
}

/// Exact solution of the `q`-round Ehrenfeucht-Fraisse game on two
/// structures with the same unary signature.
pub fn ef_game(
    left: &RelationalStructure,
    right: &RelationalStructure,
    q: usize,
) -> Result<EfOutcome, ModelTheoryError> {
    ef_game_with_cap(left, right, q, None)
}

/// As [`ef_game`], with `max_size` replacing the default size cap for `q`.
pub fn ef_game_with_cap(
    left: &RelationalStructure,
    right: &RelationalStructure,
    q: usize,
    max_size: Option<usize>,
) -> Result<EfOutcome, ModelTheoryError> {
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
    let size = left.size().max(right.size());
    let unary = left.signature().len();
    let within = match max_size {
        Some(cap) => size <= cap,
        None => ef_cap(q, size),
    };
    if !within || unary + 1 + 3 * q > TYPE_BITS {
        return Err(ModelTheoryError::EfCapExceeded { q, size });
    }
    let right_unary = left
        .signature()
        .iter()
        .map(|name| right.signature().iter().position(|n| n == name).expect("same names"))
        .collect();
    let mut game = Game {
        left,
        right,
        right_unary,
        memo: HashMap::new(),
    };
    let wins = game.duplicator_wins(&[], q);
    log::debug!("ef game q={q}: {} positions memoized", game.memo.len());
    Ok(if wins {
        EfOutcome {
            winner: Winner::Duplicator,
            rounds: q,
            trace: Vec::new(),
        }
    } else {
        EfOutcome {
            winner: Winner::Spoiler,
            rounds: q,
            trace: game.spoiler_line(&[], q),
        }
    })
}

pub fn q_equivalent(
    left: &RelationalStructure,
    right: &RelationalStructure,
    q: usize,
) -> Result<bool, ModelTheoryError> {
    Ok(ef_game(left, right, q)?.winner == Winner::Duplicator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::{element_set, PartialPreorder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_structure(rng: &mut ChaCha8Rng, n: usize) -> RelationalStructure {
        let mut s = RelationalStructure::new(n);
        for a in 0..n {
            for b in 0..n {
                if rng.gen_bool(0.3) {
                    s.set_related(a, b, true);
                }
            }
        }
        s.set_unary("P", element_set(n, (0..n).filter(|_| rng.gen_bool(0.5))));
        s
    }

    fn shuffled(rng: &mut ChaCha8Rng, s: &RelationalStructure) -> RelationalStructure {
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..s.size()).collect();
        perm.shuffle(rng);
        s.relabel(&perm)
    }

    #[test]
    fn isomorphic_structures_are_equivalent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1, 3, 5, 7] {
            let s = random_structure(&mut rng, n);
            let t = shuffled(&mut rng, &s);
            for q in 0..=3 {
                assert!(q_equivalent(&s, &t, q).unwrap());
            }
        }
    }

    #[test]
    fn six_cycle_against_two_triangles() {
        let c6 = RelationalStructure::cycle(6);
        let two = RelationalStructure::cycle(3).disjoint_union(&RelationalStructure::cycle(3));
        assert_eq!(ef_game(&c6, &two, 2).unwrap().winner, Winner::Duplicator);
        let out = ef_game(&c6, &two, 3).unwrap();
        assert_eq!(out.winner, Winner::Spoiler);
        assert_eq!(out.trace.len(), 3);
        assert_eq!(out.trace[2].duplicator, None);
        assert_eq!(ef_game(&two, &c6, 3).unwrap().winner, Winner::Spoiler);
    }

    #[test]
    fn short_chains() {
        let c2 = RelationalStructure::from_order(&PartialPreorder::chain(2));
        let c3 = RelationalStructure::from_order(&PartialPreorder::chain(3));
        assert!(q_equivalent(&c2, &c3, 1).unwrap());
        let out = ef_game(&c2, &c3, 2).unwrap();
        assert_eq!(out.winner, Winner::Spoiler);
        assert_eq!(
            out.trace[0],
            Round {
                side: Side::Right,
                spoiler: 1,
                duplicator: Some(0)
            }
        );
    }

    #[test]
    fn q0_is_always_duplicator() {
        let a = RelationalStructure::cycle(3);
        let b = RelationalStructure::path(5);
        assert!(q_equivalent(&a, &b, 0).unwrap());
        assert!(!q_equivalent(&a, &RelationalStructure::new(0), 1).unwrap());
    }

    #[test]
    fn caps_and_signatures() {
        let big = RelationalStructure::cycle(65);
        assert!(matches!(
            ef_game(&big, &big, 3),
            Err(ModelTheoryError::EfCapExceeded { q: 3, size: 65 })
        ));
        let huge = RelationalStructure::cycle(301);
        assert!(ef_game(&huge, &huge, 2).is_err());
        assert!(q_equivalent(&huge, &huge, 1).unwrap());
        let mut colored = RelationalStructure::cycle(4);
        colored.set_unary("L1", element_set(4, [0]));
        assert!(matches!(
            ef_game(&colored, &RelationalStructure::cycle(4), 1),
            Err(ModelTheoryError::SignatureMismatch { .. })
        ));
    }

    #[test]
    fn unary_order_does_not_matter() {
        let mut a = RelationalStructure::cycle(4);
        a.set_unary("P", element_set(4, [0]));
        a.set_unary("Q", element_set(4, [1]));
        let mut b = RelationalStructure::cycle(4);
        b.set_unary("Q", element_set(4, [1]));
        b.set_unary("P", element_set(4, [0]));
        assert!(q_equivalent(&a, &b, 3).unwrap());
    }

    #[test]
    fn symmetric_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n1 = rng.gen_range(1..6);
            let n2 = rng.gen_range(1..6);
            let a = random_structure(&mut rng, n1);
            let b = random_structure(&mut rng, n2);
            let mut previous = true;
            for q in 0..=3 {
                let w = q_equivalent(&a, &b, q).unwrap();
                assert_eq!(w, q_equivalent(&b, &a, q).unwrap());
                assert!(previous || !w, "equivalence at q implies it below q");
                previous = w;
            }
        }
    }
}
