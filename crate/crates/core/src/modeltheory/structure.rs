use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use super::{Crown, ModelTheoryError};
use crate::order::{element_set, ElementSet, Graph, PartialPreorder};

/// A finite structure with one binary relation and named unary relations.
/// Graphs store `E` symmetrically; orders store `<=`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationalStructure {
    size: usize,
    rel: Vec<FixedBitSet>,
    names: Vec<String>,
    unary: Vec<ElementSet>,
}

/// `{"vertices": m, "edges": [[u, v], ...], "colors": {"L1": [...], ...}, "A": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub vertices: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub colors: BTreeMap<String, Vec<usize>>,
    #[serde(default, rename = "A", skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Vec<usize>>,
}

impl RelationalStructure {
    pub fn new(size: usize) -> Self {
        RelationalStructure {
            size,
            rel: vec![FixedBitSet::with_capacity(size); size],
            names: Vec::new(),
            unary: Vec::new(),
        }
    }

    pub fn from_graph(g: &Graph) -> Self {
        let mut s = Self::new(g.size());
        for (a, b) in g.edges() {
            s.add_edge(a, b);
        }
        s
    }

    /// The order as a structure over `<=`.
    pub fn from_order(r: &PartialPreorder) -> Self {
        let mut s = Self::new(r.size());
        for a in 0..r.size() {
            for b in 0..r.size() {
                if r.leq(a, b) {
                    s.rel[a].insert(b);
                }
            }
        }
        s
    }

    /// Undirected cycle `0 - 1 - ... - (n-1) - 0`.
    pub fn cycle(n: usize) -> Self {
        let mut s = Self::new(n);
        for v in 0..n {
            s.add_edge(v, (v + 1) % n);
        }
        s
    }

    /// Undirected path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        let mut s = Self::new(n);
        for v in 1..n {
            s.add_edge(v - 1, v);
        }
        s
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn related(&self, a: usize, b: usize) -> bool {
        self.rel[a].contains(b)
    }

    pub fn set_related(&mut self, a: usize, b: usize, value: bool) {
        self.rel[a].set(b, value);
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        self.rel[a].insert(b);
        self.rel[b].insert(a);
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.rel[a].set(b, false);
        self.rel[b].set(a, false);
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.size).all(|a| self.rel[a].ones().all(|b| self.rel[b].contains(a)))
    }

    /// Neighbors in the Gaifman graph (either direction, no loops).
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.size)
            .filter(|&u| u != v && (self.rel[v].contains(u) || self.rel[u].contains(v)))
            .collect()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors(v).len()
    }

    /// Edges `(a, b)` with `a < b` of the Gaifman graph.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.size)
            .flat_map(|a| {
                self.neighbors(a)
                    .into_iter()
                    .filter(move |&b| b > a)
                    .map(move |b| (a, b))
            })
            .collect()
    }

    pub fn gaifman_graph(&self) -> Graph {
        let mut g = Graph::new(self.size);
        for (a, b) in self.edges() {
            g.add_edge(a, b);
        }
        g
    }

    /// Adds (or replaces) the unary relation `name`.
    pub fn set_unary(&mut self, name: &str, members: ElementSet) {
        assert_eq!(members.len(), self.size, "unary relation over the wrong universe");
        match self.names.iter().position(|n| n == name) {
            Some(i) => self.unary[i] = members,
            None => {
                self.names.push(name.to_string());
                self.unary.push(members);
            }
        }
    }

    pub fn unary(&self, name: &str) -> Option<&ElementSet> {
        self.names.iter().position(|n| n == name).map(|i| &self.unary[i])
    }

    /// Names of the unary relations, in insertion order.
    pub fn signature(&self) -> &[String] {
        &self.names
    }

    pub(crate) fn unary_at(&self, index: usize) -> &ElementSet {
        &self.unary[index]
    }

    /// Adds `A1..Al` from `sets`.
    pub fn with_extension(&self, sets: &[ElementSet]) -> Self {
        let mut s = self.clone();
        for (i, set) in sets.iter().enumerate() {
            s.set_unary(&format!("A{}", i + 1), set.clone());
        }
        s
    }

    /// Drops the unary relations whose names satisfy `drop`.
    pub fn without_unary(&self, drop: impl Fn(&str) -> bool) -> Self {
        let mut s = Self::new(self.size);
        s.rel = self.rel.clone();
        for (name, set) in self.names.iter().zip(&self.unary) {
            if !drop(name) {
                s.set_unary(name, set.clone());
            }
        }
        s
    }

    /// Substructure on `vertices`, renumbered by position in the slice.
    pub fn induced(&self, vertices: &[usize]) -> Self {
        let mut s = Self::new(vertices.len());
        for (i, &a) in vertices.iter().enumerate() {
            for (j, &b) in vertices.iter().enumerate() {
                if self.related(a, b) {
                    s.rel[i].insert(j);
                }
            }
        }
        for (name, set) in self.names.iter().zip(&self.unary) {
            let members = element_set(
                vertices.len(),
                vertices
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| set.contains(v))
                    .map(|(i, _)| i),
            );
            s.set_unary(name, members);
        }
        s
    }

    /// Disjoint union; unary relations are matched by name.
    pub fn disjoint_union(&self, other: &Self) -> Self {
        let n = self.size + other.size;
        let mut s = Self::new(n);
        for a in 0..self.size {
            for b in self.rel[a].ones() {
                s.rel[a].insert(b);
            }
        }
        for a in 0..other.size {
            for b in other.rel[a].ones() {
                s.rel[self.size + a].insert(self.size + b);
            }
        }
        let mut names = self.names.clone();
        for name in &other.names {
            if !names.contains(name) {
                names.push(name.clone());
            }
        }
        for name in names {
            let left = self.unary(&name).into_iter().flat_map(|set| set.ones());
            let right = other
                .unary(&name)
                .into_iter()
                .flat_map(|set| set.ones().map(|v| v + self.size));
            s.set_unary(&name, element_set(n, left.chain(right)));
        }
        s
    }

    /// Renumbers vertex `v` as `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        let mut s = Self::new(self.size);
        for a in 0..self.size {
            for b in self.rel[a].ones() {
                s.rel[perm[a]].insert(perm[b]);
            }
        }
        for (name, set) in self.names.iter().zip(&self.unary) {
            s.set_unary(name, element_set(self.size, set.ones().map(|v| perm[v])));
        }
        s
    }

    /// Graph JSON of a symmetric structure. Unary relations named `A<i>`
    /// become the extension list; all others are colors.
    pub fn to_json(&self) -> GraphJson {
        let mut colors = BTreeMap::new();
        let mut extension = Vec::new();
        for (name, set) in self.names.iter().zip(&self.unary) {
            let members: Vec<usize> = set.ones().collect();
            match crate::syntax::indexed_name(name, "A") {
                Some(_) => extension.push(members),
                None => {
                    colors.insert(name.clone(), members);
                }
            }
        }
        GraphJson {
            vertices: self.size,
            edges: self.edges().into_iter().map(|(a, b)| [a, b]).collect(),
            colors,
            extension,
        }
    }

    pub fn from_json(json: &GraphJson) -> Result<Self, ModelTheoryError> {
        let n = json.vertices;
        let check = |v: usize| {
            if v < n {
                Ok(v)
            } else {
                Err(ModelTheoryError::Json(format!("vertex {v} out of range 0..{n}")))
            }
        };
        let mut s = Self::new(n);
        for &[a, b] in &json.edges {
            s.add_edge(check(a)?, check(b)?);
        }
        for (name, members) in &json.colors {
            let members = members.iter().map(|&v| check(v)).collect::<Result<Vec<_>, _>>()?;
            s.set_unary(name, element_set(n, members));
        }
        for (i, members) in json.extension.iter().enumerate() {
            let members = members.iter().map(|&v| check(v)).collect::<Result<Vec<_>, _>>()?;
            s.set_unary(&format!("A{}", i + 1), element_set(n, members));
        }
        Ok(s)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ModelTheoryError> {
        let json: GraphJson = serde_json::from_str(text).map_err(|e| ModelTheoryError::Json(e.to_string()))?;
        Self::from_json(&json)
    }
}

const COLORS: [&str; 3] = ["L1", "L2", "L3"];

/// Colored comparability graph: `E` is comparability, `L1` the crown tops,
/// `L2` the crown lows, `L3` the bottoms (adjacent to every crown vertex).
pub fn to_colored_graph(m: &Crown) -> RelationalStructure {
    let r = m.order();
    let mut g = RelationalStructure::from_graph(&r.comparability_graph());
    let size = r.size();
    g.set_unary("L1", element_set(size, m.tops().iter().copied()));
    g.set_unary("L2", element_set(size, m.lows().iter().copied()));
    g.set_unary("L3", element_set(size, m.bottoms().iter().copied()));
    g
}

/// Decodes a colored graph: `a < b` iff `E(a, b)` and the colors of `(a, b)`
/// are `(L2, L1)`, `(L3, L2)` or `(L3, L1)`; then closes reflexively and
/// transitively.
pub fn from_colored_graph(g: &RelationalStructure) -> Result<PartialPreorder, ModelTheoryError> {
    let n = g.size();
    let color_sets: Vec<&ElementSet> = COLORS
        .iter()
        .map(|c| g.unary(c).ok_or(ModelTheoryError::ColorsNotPartition(0)))
        .collect::<Result<_, _>>()?;
    let mut color = vec![0; n];
    for (v, slot) in color.iter_mut().enumerate() {
        let owners: Vec<usize> = (0..3).filter(|&c| color_sets[c].contains(v)).collect();
        match owners[..] {
            [c] => *slot = c,
            _ => return Err(ModelTheoryError::ColorsNotPartition(v)),
        }
    }
    let below = |lo: usize, hi: usize| matches!((lo, hi), (1, 0) | (2, 1) | (2, 0));
    let mut pairs = Vec::new();
    for (a, b) in g.edges() {
        if below(color[a], color[b]) {
            pairs.push((a, b));
        } else if below(color[b], color[a]) {
            pairs.push((b, a));
        } else {
            return Err(ModelTheoryError::MiscoloredEdge { a, b });
        }
    }
    let r = PartialPreorder::closure(n, pairs)?;
    if !r.is_partial_order() {
        return Err(ModelTheoryError::NotPartialOrder);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modeltheory::{recognize, CrownSpec};

    fn family_sweep() -> Vec<Crown> {
        let mut out = Vec::new();
        for s in 2..=8 {
            for bottoms in [0, 1, 2, 5, 16] {
                out.push(Crown::build(CrownSpec::single(s, bottoms)).unwrap());
                for s2 in 2..=s {
                    out.push(Crown::build(CrownSpec::double(s, s2, bottoms)).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn colored_graph_examples() {
        let c = Crown::build(CrownSpec::single(3, 2)).unwrap();
        let g = to_colored_graph(&c);
        assert_eq!(g.size(), 8);
        for v in 0..6 {
            assert_eq!(g.degree(v), 4);
        }
        assert!(!g.related(6, 7));
        assert_eq!(g.degree(6), 6);
        let counts: Vec<usize> = ["L1", "L2", "L3"]
            .iter()
            .map(|c| g.unary(c).unwrap().count_ones(..))
            .collect();
        assert_eq!(counts, vec![3, 3, 2]);
    }

    #[test]
    fn round_trip_over_family() {
        for c in family_sweep() {
            let g = to_colored_graph(&c);
            assert_eq!(&from_colored_graph(&g).unwrap(), c.order(), "{}", c.spec());
        }
    }

    #[test]
    fn both_readings_of_the_order_formula_agree_with_the_order() {
        for c in family_sweep() {
            let g = to_colored_graph(&c);
            let has = |name: &str, v: usize| g.unary(name).unwrap().contains(v);
            for a in 0..g.size() {
                for b in 0..g.size() {
                    let e = g.related(a, b);
                    let common = (has("L2", a) && has("L1", b)) || (has("L3", a) && has("L2", b));
                    let conjunctive = e && (common || (has("L3", a) && has("L1", b)));
                    let disjunctive = e && (common || has("L3", a) || has("L1", b));
                    assert_eq!(conjunctive, c.order().lt(a, b));
                    assert_eq!(disjunctive, conjunctive);
                }
            }
        }
    }

    #[test]
    fn miscolored_graphs_are_rejected() {
        let c = Crown::build(CrownSpec::single(3, 2)).unwrap();
        let mut g = to_colored_graph(&c);
        g.add_edge(0, 1);
        assert_eq!(
            from_colored_graph(&g),
            Err(ModelTheoryError::MiscoloredEdge { a: 0, b: 1 })
        );
        let mut g = to_colored_graph(&c);
        let mut l1 = g.unary("L1").unwrap().clone();
        l1.insert(7);
        g.set_unary("L1", l1);
        assert_eq!(from_colored_graph(&g), Err(ModelTheoryError::ColorsNotPartition(7)));
        let bare = RelationalStructure::cycle(4);
        assert!(from_colored_graph(&bare).is_err());
    }

    #[test]
    fn missing_cross_edges_are_closed() {
        let c = Crown::build(CrownSpec::double(3, 3, 4)).unwrap();
        let mut g = to_colored_graph(&c);
        g.remove_edge(12, 0);
        let r = from_colored_graph(&g).unwrap();
        assert_eq!(&r, c.order());
        assert_eq!(recognize(&r).unwrap().spec(), c.spec());
    }

    #[test]
    fn json_round_trip() {
        let c = Crown::build(CrownSpec::single(3, 2)).unwrap();
        let mut set = FixedBitSet::with_capacity(8);
        set.insert(1);
        let g = to_colored_graph(&c).with_extension(&[set]);
        let text = serde_json::to_string(&g.to_json()).unwrap();
        assert!(text.contains("\"A\":[[1]]"));
        let back = RelationalStructure::from_json_str(&text).unwrap();
        assert_eq!(back.to_json(), g.to_json());
        assert!(RelationalStructure::from_json_str(r#"{"vertices": 2, "edges": [[0, 2]]}"#).is_err());
    }

    #[test]
    fn induced_and_union() {
        let c6 = RelationalStructure::cycle(6);
        let two = RelationalStructure::cycle(3).disjoint_union(&RelationalStructure::cycle(3));
        assert_eq!(c6.edges().len(), two.edges().len());
        assert_eq!(two.gaifman_graph().components().len(), 2);
        let p = c6.induced(&[0, 1, 2]);
        assert_eq!(p, RelationalStructure::path(3));
    }
}
