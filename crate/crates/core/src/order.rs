//! Finite partial preorders, their comparability graphs, and the regularity
//! properties used to define families of faithful orders.

use std::collections::VecDeque;
use std::fmt::Write as _;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A subset of the elements `0..size` of some order or graph.
pub type ElementSet = FixedBitSet;

pub fn element_set(size: usize, items: impl IntoIterator<Item = usize>) -> ElementSet {
    let mut s = FixedBitSet::with_capacity(size);
    for i in items {
        s.insert(i);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderError {
    #[error("relation matrix is not square (row {row} has {len} entries, expected {size})")]
    NotSquare { row: usize, len: usize, size: usize },
    #[error("not reflexive: {0} <= {0} missing")]
    NotReflexive(usize),
    #[error("not transitive: {a} <= {b} and {b} <= {c} but not {a} <= {c}")]
    NotTransitive { a: usize, b: usize, c: usize },
    #[error("element {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("invalid order JSON: {0}")]
    Json(String),
}

/// A reflexive, transitive relation on `0..size`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartialPreorder {
    size: usize,
    // up[a] = { b : a <= b }, down[a] = { b : b <= a }
    up: Vec<FixedBitSet>,
    down: Vec<FixedBitSet>,
}

impl PartialPreorder {
    fn from_rows_unchecked(up: Vec<FixedBitSet>) -> Self {
        let size = up.len();
        let mut down = vec![FixedBitSet::with_capacity(size); size];
        for (a, row) in up.iter().enumerate() {
            for b in row.ones() {
                down[b].insert(a);
            }
        }
        PartialPreorder { size, up, down }
    }

    fn validate_rows(up: Vec<FixedBitSet>) -> Result<Self, OrderError> {
        for (a, row) in up.iter().enumerate() {
            if !row.contains(a) {
                return Err(OrderError::NotReflexive(a));
            }
        }
        for (a, row) in up.iter().enumerate() {
            for b in row.ones() {
                if let Some(c) = up[b].difference(row).next() {
                    return Err(OrderError::NotTransitive { a, b, c });
                }
            }
        }
        Ok(Self::from_rows_unchecked(up))
    }

    /// Validates a full `leq` matrix. Never repairs; see [`PartialPreorder::closure`].
    pub fn from_matrix(matrix: &[Vec<bool>]) -> Result<Self, OrderError> {
        let size = matrix.len();
        let mut up = Vec::with_capacity(size);
        for (row, entries) in matrix.iter().enumerate() {
            if entries.len() != size {
                return Err(OrderError::NotSquare {
                    row,
                    len: entries.len(),
                    size,
                });
            }
            up.push(element_set(
                size,
                entries.iter().enumerate().filter(|(_, &v)| v).map(|(b, _)| b),
            ));
        }
        Self::validate_rows(up)
    }

    fn rows_from_pairs(
        size: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Vec<FixedBitSet>, OrderError> {
        let mut up: Vec<FixedBitSet> = (0..size).map(|a| element_set(size, [a])).collect();
        for (a, b) in pairs {
            for index in [a, b] {
                if index >= size {
                    return Err(OrderError::IndexOutOfRange { index, size });
                }
            }
            up[a].insert(b);
        }
        Ok(up)
    }

    /// Builds the relation from `a <= b` pairs; the diagonal is implied,
    /// transitivity is checked.
    pub fn from_pairs(size: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, OrderError> {
        Self::validate_rows(Self::rows_from_pairs(size, pairs)?)
    }

    /// Reflexive-transitive closure of the given pairs.
    pub fn closure(size: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, OrderError> {
        let mut up = Self::rows_from_pairs(size, pairs)?;
        // Warshall over rows
        for k in 0..size {
            let row_k = up[k].clone();
            for row in up.iter_mut() {
                if row.contains(k) {
                    row.union_with(&row_k);
                }
            }
        }
        Ok(Self::from_rows_unchecked(up))
    }

    pub fn antichain(size: usize) -> Self {
        Self::from_rows_unchecked((0..size).map(|a| element_set(size, [a])).collect())
    }

    /// `0 < 1 < ... < size-1`.
    pub fn chain(size: usize) -> Self {
        Self::from_rows_unchecked((0..size).map(|a| element_set(size, a..size)).collect())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn all(&self) -> ElementSet {
        element_set(self.size, 0..self.size)
    }

    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.up[a].contains(b)
    }

    /// `a < b`: `a <= b` and not `b <= a`. Panics on out-of-range indices.
    pub fn lt(&self, a: usize, b: usize) -> bool {
        self.leq(a, b) && !self.leq(b, a)
    }

    pub fn check_index(&self, index: usize) -> Result<(), OrderError> {
        if index < self.size {
            Ok(())
        } else {
            Err(OrderError::IndexOutOfRange { index, size: self.size })
        }
    }

    pub fn strict_less(&self, a: usize, b: usize) -> Result<bool, OrderError> {
        self.check_index(a)?;
        self.check_index(b)?;
        Ok(self.lt(a, b))
    }

    pub fn incomparable(&self, a: usize, b: usize) -> Result<bool, OrderError> {
        self.check_index(a)?;
        self.check_index(b)?;
        Ok(!self.leq(a, b) && !self.leq(b, a))
    }

    pub fn is_partial_order(&self) -> bool {
        (0..self.size).all(|a| self.up[a].intersection(&self.down[a]).eq(std::iter::once(a)))
    }

    /// Elements of `subset` with nothing in `subset` strictly below them.
    pub fn minimal_elements(&self, subset: &ElementSet) -> ElementSet {
        let mut out = FixedBitSet::with_capacity(self.size);
        for a in subset.ones() {
            // every b in subset with b <= a must also satisfy a <= b
            let below = self.down[a].intersection(subset);
            if below.into_iter().all(|b| self.up[a].contains(b)) {
                out.insert(a);
            }
        }
        out
    }

    pub fn minimal(&self) -> ElementSet {
        self.minimal_elements(&self.all())
    }

    /// Pairs `(a, b)` with `a <= b` and `a != b`, in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.size)
            .flat_map(|a| self.up[a].ones().filter(move |&b| b != a).map(move |b| (a, b)))
            .collect()
    }

    pub fn comparability_graph(&self) -> Graph {
        let mut g = Graph::new(self.size);
        for (a, b) in self.pairs() {
            g.add_edge(a, b);
        }
        g
    }

    /// Comparability graph keeping only edges inside `subset`; numbering unchanged.
    pub fn restrict_graph(&self, subset: &ElementSet) -> Graph {
        let mut g = Graph::new(self.size);
        for (a, b) in self.pairs() {
            if subset.contains(a) && subset.contains(b) {
                g.add_edge(a, b);
            }
        }
        g
    }

    /// Every minimal element lies strictly below every non-minimal element,
    /// and the size is a power of two.
    pub fn is_regular(&self) -> bool {
        if !self.size.is_power_of_two() {
            return false;
        }
        let minimal = self.minimal();
        let mut rest = self.all();
        rest.difference_with(&minimal);
        minimal.ones().all(|a| rest.ones().all(|b| self.lt(a, b)))
    }

    /// Regular, and the comparability graph without the minimal elements is
    /// disconnected. The empty graph counts as connected.
    pub fn is_regular_disconnected(&self) -> bool {
        if !self.is_regular() {
            return false;
        }
        let mut rest = self.all();
        rest.difference_with(&self.minimal());
        !self.comparability_graph().is_connected_on(&rest)
    }

    /// Restriction to the elements of `subset`, renumbered in ascending order.
    pub fn restrict(&self, subset: &ElementSet) -> PartialPreorder {
        let keep: Vec<usize> = subset.ones().collect();
        let rows = keep
            .iter()
            .map(|&a| {
                element_set(
                    keep.len(),
                    keep.iter().enumerate().filter(|(_, &b)| self.leq(a, b)).map(|(j, _)| j),
                )
            })
            .collect();
        Self::from_rows_unchecked(rows)
    }

    /// Image under the bijection `perm`: `perm[a] <= perm[b]` iff `a <= b`.
    pub fn relabel(&self, perm: &[usize]) -> PartialPreorder {
        assert_eq!(perm.len(), self.size);
        let mut up = vec![FixedBitSet::with_capacity(self.size); self.size];
        for a in 0..self.size {
            for b in self.up[a].ones() {
                up[perm[a]].insert(perm[b]);
            }
        }
        Self::from_rows_unchecked(up)
    }

    /// Disjoint union; elements of `other` are shifted by `self.size()`.
    pub fn disjoint_union(&self, other: &PartialPreorder) -> PartialPreorder {
        let size = self.size + other.size;
        let pairs = self
            .pairs()
            .into_iter()
            .chain(other.pairs().into_iter().map(|(a, b)| (a + self.size, b + self.size)));
        Self::from_pairs(size, pairs).expect("disjoint union of preorders is a preorder")
    }

    /// Appends `k` mutually incomparable elements strictly below every
    /// existing element. New elements are numbered `size..size+k`.
    pub fn extend_with_bottom(&self, k: usize) -> PartialPreorder {
        let size = self.size + k;
        let mut up: Vec<FixedBitSet> = self
            .up
            .iter()
            .map(|row| {
                let mut r = row.clone();
                r.grow(size);
                r
            })
            .collect();
        for bottom in self.size..size {
            let mut row = element_set(size, 0..self.size);
            row.insert(bottom);
            up.push(row);
        }
        Self::from_rows_unchecked(up)
    }

    pub fn to_json(&self) -> OrderJson {
        OrderJson {
            size: self.size,
            leq: self.pairs().into_iter().map(|(a, b)| [a, b]).collect(),
        }
    }

    pub fn from_json(json: &OrderJson) -> Result<Self, OrderError> {
        Self::from_pairs(json.size, json.leq.iter().map(|&[a, b]| (a, b)))
    }

    pub fn from_json_str(text: &str) -> Result<Self, OrderError> {
        let json: OrderJson = serde_json::from_str(text).map_err(|e| OrderError::Json(e.to_string()))?;
        Self::from_json(&json)
    }
}

/// `{"size": m, "leq": [[a, b], ...]}`; diagonal pairs are optional.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderJson {
    pub size: usize,
    pub leq: Vec<[usize; 2]>,
}

/// All partial preorders on `size` labeled elements, by filtering every
/// reflexive relation through the transitivity axiom. Exponential in
/// `size * (size - 1)`; intended for `size <= 4`.
pub fn all_preorders(size: usize) -> Vec<PartialPreorder> {
    assert!(size <= 5, "enumeration is 2^(m(m-1))");
    let off_diagonal: Vec<(usize, usize)> = (0..size)
        .flat_map(|a| (0..size).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << off_diagonal.len()) {
        let pairs = off_diagonal
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &p)| p);
        if let Ok(r) = PartialPreorder::from_pairs(size, pairs) {
            out.push(r);
        }
    }
    out
}

/// Simple undirected graph on `0..size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<FixedBitSet>,
}

impl Graph {
    pub fn new(size: usize) -> Self {
        Graph {
            adj: vec![FixedBitSet::with_capacity(size); size],
        }
    }

    pub fn size(&self) -> usize {
        self.adj.len()
    }

    /// Self-loops are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.adj[a].insert(b);
            self.adj[b].insert(a);
        }
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(b)
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].ones()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].count_ones(..)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.size())
            .flat_map(|a| self.adj[a].ones().filter(move |&b| b > a).map(move |b| (a, b)))
            .collect()
    }

    /// Connected components of the subgraph induced by `vertices`, each
    /// listed in ascending order, components ordered by least vertex.
    pub fn components_on(&self, vertices: &ElementSet) -> Vec<Vec<usize>> {
        let mut seen = FixedBitSet::with_capacity(self.size());
        let mut out = Vec::new();
        for start in vertices.ones() {
            if seen.contains(start) {
                continue;
            }
            seen.insert(start);
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for w in self.adj[v].ones() {
                    if vertices.contains(w) && !seen.contains(w) {
                        seen.insert(w);
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn components(&self) -> Vec<Vec<usize>> {
        self.components_on(&element_set(self.size(), 0..self.size()))
    }

    /// At most one component on `vertices`.
    pub fn is_connected_on(&self, vertices: &ElementSet) -> bool {
        self.components_on(vertices).len() <= 1
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph G {\n");
        for v in 0..self.size() {
            let _ = writeln!(out, "  {v};");
        }
        for (a, b) in self.edges() {
            let _ = writeln!(out, "  {a} -- {b};");
        }
        out.push_str("}\n");
        out
    }
}
