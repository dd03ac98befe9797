//! Faithful structures, revision by minimization, operator tables and the
//! reconstruction of an order from the operator it determines.
//!
//! Elements of an order are kept separate from truth assignments: a
//! [`Labeling`] is the bijection between them. An operator is anything
//! implementing [`Reviser`]; [`OperatorTable`] is the materialized form for
//! `n <= 4`, and a [`FaithfulStructure`] is itself a (computed) operator.

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{check_var_count, LogicError, ModelSet};
use crate::order::{element_set, ElementSet, OrderError, PartialPreorder};

/// Largest `n` for which operator tables (`2^(2^n)` entries) are materialized.
pub const MAX_TABLE_VARS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RevisionError {
    #[error("order has {size} elements, expected 2^{n} = {}", 1usize << n)]
    SizeMismatch { size: usize, n: usize },
    #[error("labeling is not a bijection onto the assignments over {n} variables")]
    NotBijective { n: usize },
    #[error("order is not regular")]
    NotRegular,
    #[error("not faithful: {0}")]
    Unfaithful(Violation),
    #[error("operator tables are only materialized for n <= {MAX_TABLE_VARS} (got n = {0})")]
    TableTooLarge(usize),
    #[error("invalid operator table: {0}")]
    InvalidTable(String),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

/// Bijection between the elements `0..2^n` of an order and the assignments
/// over `n` variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Labeling {
    n: usize,
    to_assignment: Vec<u32>,
    to_element: Vec<usize>,
}

impl Labeling {
    /// `assignments[a]` is the assignment labeling element `a`.
    pub fn new(n: usize, assignments: Vec<u32>) -> Result<Self, RevisionError> {
        check_var_count(n)?;
        let size = 1usize << n;
        if assignments.len() != size {
            return Err(RevisionError::NotBijective { n });
        }
        let mut to_element = vec![usize::MAX; size];
        for (a, &bits) in assignments.iter().enumerate() {
            let slot = to_element
                .get_mut(bits as usize)
                .ok_or(RevisionError::NotBijective { n })?;
            if *slot != usize::MAX {
                return Err(RevisionError::NotBijective { n });
            }
            *slot = a;
        }
        Ok(Labeling {
            n,
            to_assignment: assignments,
            to_element,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, (0..1u32 << n).collect()).expect("identity is a bijection")
    }

    /// Every labeling over `n` variables (`(2^n)!` of them).
    pub fn all(n: usize) -> impl Iterator<Item = Labeling> {
        assert!(n <= 3, "(2^n)! labelings");
        (0..1u32 << n)
            .permutations(1 << n)
            .map(move |p| Labeling::new(n, p).expect("permutation"))
    }

    pub fn vars(&self) -> usize {
        self.n
    }

    pub fn assignment_of(&self, element: usize) -> u32 {
        self.to_assignment[element]
    }

    pub fn element_of(&self, bits: u32) -> usize {
        self.to_element[bits as usize]
    }

    pub fn assignments(&self) -> &[u32] {
        &self.to_assignment
    }

    /// `t^-1(set)`.
    pub fn preimage(&self, set: &ModelSet) -> ElementSet {
        element_set(self.to_element.len(), set.iter().map(|b| self.element_of(b)))
    }

    /// `t(elements)`.
    pub fn image(&self, elements: &ElementSet) -> ModelSet {
        let mut out = ModelSet::empty(self.n);
        for a in elements.ones() {
            out.insert(self.assignment_of(a));
        }
        out
    }
}

/// Why a labeled order is not faithful for a knowledge base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Element is minimal but its assignment is not a model of K.
    MinimalNotModel { element: usize },
    /// Element's assignment is a model of K but the element is not minimal.
    ModelNotMinimal { element: usize },
    /// `model` is labeled by a K-model, `other` by a non-model, yet not `model < other`.
    NotBelow { model: usize, other: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::MinimalNotModel { element } => {
                write!(f, "element {element} is minimal but not labeled by a model of K")
            }
            Violation::ModelNotMinimal { element } => {
                write!(f, "element {element} is labeled by a model of K but is not minimal")
            }
            Violation::NotBelow { model, other } => write!(
                f,
                "K-model element {model} is not strictly below non-model element {other}"
            ),
        }
    }
}

fn check_sizes(order: &PartialPreorder, labeling: &Labeling) -> Result<(), RevisionError> {
    if order.size() != 1 << labeling.vars() {
        return Err(RevisionError::SizeMismatch {
            size: order.size(),
            n: labeling.vars(),
        });
    }
    Ok(())
}

/// Checks both faithfulness conditions; `Ok(Err(v))` names the first
/// violation found.
pub fn check_faithful(
    order: &PartialPreorder,
    labeling: &Labeling,
    kb: &ModelSet,
) -> Result<Result<(), Violation>, RevisionError> {
    check_sizes(order, labeling)?;
    if kb.vars() != labeling.vars() {
        return Err(LogicError::VariableCountMismatch(kb.vars(), labeling.vars()).into());
    }
    let minimal = order.minimal();
    for element in 0..order.size() {
        let is_model = kb.contains(labeling.assignment_of(element));
        match (minimal.contains(element), is_model) {
            (true, false) => return Ok(Err(Violation::MinimalNotModel { element })),
            (false, true) => return Ok(Err(Violation::ModelNotMinimal { element })),
            _ => {}
        }
    }
    for model in 0..order.size() {
        if !kb.contains(labeling.assignment_of(model)) {
            continue;
        }
        for other in 0..order.size() {
            if !kb.contains(labeling.assignment_of(other)) && !order.lt(model, other) {
                return Ok(Err(Violation::NotBelow { model, other }));
            }
        }
    }
    Ok(Ok(()))
}

/// The knowledge base a regular order is faithful for under `labeling`: the
/// labels of its minimal elements.
pub fn knowledge_base_of(order: &PartialPreorder, labeling: &Labeling) -> Result<ModelSet, RevisionError> {
    check_sizes(order, labeling)?;
    if !order.is_regular() {
        return Err(RevisionError::NotRegular);
    }
    Ok(labeling.image(&order.minimal()))
}

/// A revision operator for a fixed knowledge base.
pub trait Reviser: Sync {
    fn vars(&self) -> usize;

    /// The revised knowledge base `K * phi`, as a model set.
    fn revise(&self, phi: &ModelSet) -> ModelSet;
}

/// Wraps a closure as an operator; handy for operators that do not come
/// from minimization.
pub struct FnReviser<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&ModelSet) -> ModelSet + Sync> FnReviser<F> {
    pub fn new(n: usize, f: F) -> Self {
        FnReviser { n, f }
    }
}

impl<F: Fn(&ModelSet) -> ModelSet + Sync> Reviser for FnReviser<F> {
    fn vars(&self) -> usize {
        self.n
    }

    fn revise(&self, phi: &ModelSet) -> ModelSet {
        (self.f)(phi)
    }
}

/// A labeled preorder together with the knowledge base it is faithful for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaithfulStructure {
    order: PartialPreorder,
    labeling: Labeling,
    kb: ModelSet,
}

impl FaithfulStructure {
    pub fn new(order: PartialPreorder, labeling: Labeling, kb: ModelSet) -> Result<Self, RevisionError> {
        check_faithful(&order, &labeling, &kb)?.map_err(RevisionError::Unfaithful)?;
        Ok(FaithfulStructure { order, labeling, kb })
    }

    /// Pairs a regular order with the knowledge base of its minimal elements.
    pub fn from_regular(order: PartialPreorder, labeling: Labeling) -> Result<Self, RevisionError> {
        let kb = knowledge_base_of(&order, &labeling)?;
        Self::new(order, labeling, kb)
    }

    pub fn order(&self) -> &PartialPreorder {
        &self.order
    }

    pub fn labeling(&self) -> &Labeling {
        &self.labeling
    }

    pub fn kb(&self) -> &ModelSet {
        &self.kb
    }
}

impl Reviser for FaithfulStructure {
    fn vars(&self) -> usize {
        self.labeling.vars()
    }

    fn revise(&self, phi: &ModelSet) -> ModelSet {
        revise(self, phi)
    }
}

/// `K *_F phi`: labels of the minimal elements of `t^-1(|phi|)`.
pub fn revise(f: &FaithfulStructure, phi: &ModelSet) -> ModelSet {
    debug_assert_eq!(phi.vars(), f.labeling.vars());
    let preimage = f.labeling.preimage(phi);
    f.labeling.image(&f.order.minimal_elements(&preimage))
}

/// Materialized operator: one entry per model set, indexed by its mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorTable {
    n: usize,
    entries: Vec<ModelSet>,
}

impl OperatorTable {
    pub fn from_reviser(op: &dyn Reviser) -> Result<Self, RevisionError> {
        let n = op.vars();
        if n > MAX_TABLE_VARS {
            return Err(RevisionError::TableTooLarge(n));
        }
        let entries = (0..1u64 << (1 << n))
            .map(|mask| op.revise(&ModelSet::from_mask(n, mask)))
            .collect();
        Ok(OperatorTable { n, entries })
    }

    pub fn from_entries(n: usize, entries: Vec<ModelSet>) -> Result<Self, RevisionError> {
        if n > MAX_TABLE_VARS {
            return Err(RevisionError::TableTooLarge(n));
        }
        check_var_count(n)?;
        if entries.len() != 1 << (1 << n) || entries.iter().any(|e| e.vars() != n) {
            return Err(RevisionError::InvalidTable(
                "entry count or variable count mismatch".into(),
            ));
        }
        Ok(OperatorTable { n, entries })
    }

    pub fn get(&self, phi: &ModelSet) -> &ModelSet {
        let mask = phi.mask().expect("n <= 4");
        &self.entries[mask as usize]
    }

    pub fn entries(&self) -> impl Iterator<Item = (ModelSet, &ModelSet)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .map(|(mask, r)| (ModelSet::from_mask(self.n, mask as u64), r))
    }

    pub fn to_json(&self) -> TableJson {
        TableJson {
            n: self.n,
            entries: self
                .entries()
                .map(|(phi, result)| TableEntry {
                    phi: phi.to_vec(),
                    result: result.to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_json(json: &TableJson) -> Result<Self, RevisionError> {
        let n = json.n;
        check_var_count(n)?;
        if n > MAX_TABLE_VARS {
            return Err(RevisionError::TableTooLarge(n));
        }
        let mut entries: Vec<Option<ModelSet>> = vec![None; 1 << (1 << n)];
        for entry in &json.entries {
            let phi = ModelSet::from_assignments(n, entry.phi.iter().copied())?;
            let result = ModelSet::from_assignments(n, entry.result.iter().copied())?;
            let slot = &mut entries[phi.mask().expect("n <= 4") as usize];
            if slot.is_some() {
                return Err(RevisionError::InvalidTable(format!("duplicate entry for {phi}")));
            }
            *slot = Some(result);
        }
        let entries = entries
            .into_iter()
            .enumerate()
            .map(|(mask, e)| {
                e.ok_or_else(|| {
                    RevisionError::InvalidTable(format!("missing entry for {}", ModelSet::from_mask(n, mask as u64)))
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(OperatorTable { n, entries })
    }
}

impl Reviser for OperatorTable {
    fn vars(&self) -> usize {
        self.n
    }

    fn revise(&self, phi: &ModelSet) -> ModelSet {
        self.get(phi).clone()
    }
}

/// `{"n": n, "entries": [{"phi": [..], "result": [..]}, ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableJson {
    pub n: usize,
    pub entries: Vec<TableEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub phi: Vec<u32>,
    pub result: Vec<u32>,
}

/// Materializes the operator determined by `f` (requires `n <= 4`).
pub fn operator_table(f: &FaithfulStructure) -> Result<OperatorTable, RevisionError> {
    OperatorTable::from_reviser(f)
}

/// Extensional equality on every model set.
pub fn same_operator(a: &dyn Reviser, b: &dyn Reviser) -> Result<bool, RevisionError> {
    if a.vars() != b.vars() {
        return Ok(false);
    }
    let n = a.vars();
    if n > MAX_TABLE_VARS {
        return Err(RevisionError::TableTooLarge(n));
    }
    Ok((0..1u64 << (1 << n)).all(|mask| {
        let phi = ModelSet::from_mask(n, mask);
        a.revise(&phi) == b.revise(&phi)
    }))
}

/// How much of an operator `reconstruct_order` checks against minimization
/// over the reconstructed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verification {
    /// Every model set (`n <= 4`).
    Full,
    /// Singletons and pairs only.
    PairsOnly,
    /// Pairs plus `count` pseudorandom model sets drawn from `seed`.
    Sampled { count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReconstructError {
    #[error("op({{{u}}}) = {result}, expected {{{u}}}")]
    Singleton { u: u32, result: ModelSet },
    #[error("op({{{u}, {v}}}) = {result} is not a non-empty subset of {{{u}, {v}}}")]
    InconsistentPair { u: u32, v: u32, result: ModelSet },
    #[error("pairwise preferences are not transitive: {0}")]
    NotTransitive(OrderError),
    #[error("op({phi}) = {actual} but minimization gives {expected}")]
    TableMismatch {
        phi: ModelSet,
        expected: ModelSet,
        actual: ModelSet,
    },
    #[error("full verification needs n <= {MAX_TABLE_VARS} (got n = {0})")]
    TooLarge(usize),
}

/// Recovers the partial order an operator minimizes over, with elements
/// identified with assignments (identity labeling): `u < v` iff
/// `op({u, v}) = {u}`, incomparable iff `op({u, v}) = {u, v}`.
///
/// Pairwise behavior cannot tell ties from incomparability, so the result
/// is always antisymmetric. An operator over a preorder with ties
/// reconstructs to its strict part, which minimizes identically.
pub fn reconstruct_order(op: &dyn Reviser, verification: Verification) -> Result<PartialPreorder, ReconstructError> {
    let n = op.vars();
    if verification == Verification::Full && n > MAX_TABLE_VARS {
        return Err(ReconstructError::TooLarge(n));
    }
    let size = 1u32 << n;
    let pair_set = |u: u32, v: u32| {
        let mut s = ModelSet::empty(n);
        s.insert(u);
        s.insert(v);
        s
    };
    for u in 0..size {
        let single = pair_set(u, u);
        let result = op.revise(&single);
        if result != single {
            return Err(ReconstructError::Singleton { u, result });
        }
    }
    let mut strict = Vec::new();
    for u in 0..size {
        for v in u + 1..size {
            let both = pair_set(u, v);
            let result = op.revise(&both);
            if result.is_empty() || !result.is_subset(&both) {
                return Err(ReconstructError::InconsistentPair { u, v, result });
            }
            match (result.contains(u), result.contains(v)) {
                (true, false) => strict.push((u as usize, v as usize)),
                (false, true) => strict.push((v as usize, u as usize)),
                _ => {}
            }
        }
    }
    let order = PartialPreorder::from_pairs(size as usize, strict).map_err(ReconstructError::NotTransitive)?;

    let identity = Labeling::identity(n);
    let check = |phi: ModelSet| -> Result<(), ReconstructError> {
        let expected = identity.image(&order.minimal_elements(&identity.preimage(&phi)));
        let actual = op.revise(&phi);
        if expected == actual {
            Ok(())
        } else {
            Err(ReconstructError::TableMismatch { phi, expected, actual })
        }
    };
    match verification {
        Verification::PairsOnly => {}
        Verification::Full => {
            for mask in 0..1u64 << size {
                check(ModelSet::from_mask(n, mask))?;
            }
        }
        Verification::Sampled { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            check(ModelSet::empty(n))?;
            check(ModelSet::full(n))?;
            for _ in 0..count {
                check(ModelSet::random(n, &mut rng))?;
            }
        }
    }
    Ok(order)
}

/// Outcome of asking whether an operator is minimization over a member of
/// a family of orders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Representation {
    Representable(FaithfulStructure),
    /// The unique candidate order exists but is outside the family.
    NotInFamily(PartialPreorder),
    /// The unique candidate order is not regular, so no faithful structure
    /// over it exists.
    NotRegular(PartialPreorder),
    /// No partial order represents the operator by minimization.
    NotMinimization(ReconstructError),
}

impl Representation {
    pub fn structure(&self) -> Option<&FaithfulStructure> {
        match self {
            Representation::Representable(f) => Some(f),
            _ => None,
        }
    }

    pub fn is_representable(&self) -> bool {
        self.structure().is_some()
    }
}

/// Decides representability over a family of partial orders. By the
/// uniqueness of the reconstructed order, a single membership test decides.
pub fn is_representable(
    op: &dyn Reviser,
    family: &dyn Fn(&PartialPreorder) -> bool,
    verification: Verification,
) -> Result<Representation, RevisionError> {
    let order = match reconstruct_order(op, verification) {
        Ok(order) => order,
        Err(ReconstructError::TooLarge(n)) => return Err(RevisionError::TableTooLarge(n)),
        Err(e) => return Ok(Representation::NotMinimization(e)),
    };
    if !order.is_regular() {
        return Ok(Representation::NotRegular(order));
    }
    let n = op.vars();
    let structure = FaithfulStructure::from_regular(order.clone(), Labeling::identity(n))?;
    let full = ModelSet::full(n);
    let actual = op.revise(&full);
    if &actual != structure.kb() {
        return Ok(Representation::NotMinimization(ReconstructError::TableMismatch {
            phi: full,
            expected: structure.kb().clone(),
            actual,
        }));
    }
    if family(&order) {
        Ok(Representation::Representable(structure))
    } else {
        Ok(Representation::NotInFamily(order))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::all_preorders;

    fn ms(n: usize, items: &[u32]) -> ModelSet {
        ModelSet::from_assignments(n, items.iter().copied()).unwrap()
    }

    /// All regular partial orders on 4 elements with every labeling.
    fn regular_structures() -> Vec<FaithfulStructure> {
        let orders: Vec<_> = all_preorders(4)
            .into_iter()
            .filter(|r| r.is_partial_order() && r.is_regular())
            .collect();
        let mut out = Vec::new();
        for r in &orders {
            for t in Labeling::all(2) {
                out.push(FaithfulStructure::from_regular(r.clone(), t).unwrap());
            }
        }
        out
    }

    #[test]
    fn labeling_rejects_non_bijections() {
        assert!(Labeling::new(1, vec![0, 0]).is_err());
        assert!(Labeling::new(1, vec![0]).is_err());
        assert!(Labeling::new(1, vec![0, 2]).is_err());
        assert_eq!(Labeling::all(2).count(), 24);
    }

    #[test]
    fn faithfulness_examples() {
        let chain = PartialPreorder::chain(2);
        let t = Labeling::identity(1);
        assert_eq!(check_faithful(&chain, &t, &ms(1, &[0])).unwrap(), Ok(()));
        assert_eq!(
            check_faithful(&chain, &t, &ms(1, &[1])).unwrap(),
            Err(Violation::MinimalNotModel { element: 0 })
        );
        // a<b, c<d as 0<1, 2<3; K = labels of the minimal elements 0 and 2
        let two_chains = PartialPreorder::from_pairs(4, [(0, 1), (2, 3)]).unwrap();
        let t2 = Labeling::identity(2);
        assert_eq!(
            check_faithful(&two_chains, &t2, &ms(2, &[0, 2])).unwrap(),
            Err(Violation::NotBelow { model: 0, other: 3 })
        );
        assert!(matches!(
            check_faithful(&PartialPreorder::chain(3), &t2, &ms(2, &[0])),
            Err(RevisionError::SizeMismatch { size: 3, n: 2 })
        ));
    }

    #[test]
    fn knowledge_base_examples() {
        let t = Labeling::new(2, vec![3, 1, 0, 2]).unwrap();
        assert_eq!(knowledge_base_of(&PartialPreorder::chain(4), &t).unwrap(), ms(2, &[3]));
        let anti = PartialPreorder::antichain(4);
        let kb = knowledge_base_of(&anti, &t).unwrap();
        assert_eq!(kb, ModelSet::full(2));
        assert!(FaithfulStructure::new(anti, t.clone(), kb).is_ok());
        let two_chains = PartialPreorder::from_pairs(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(knowledge_base_of(&two_chains, &t), Err(RevisionError::NotRegular));
    }

    #[test]
    fn revise_examples() {
        let f = FaithfulStructure::from_regular(PartialPreorder::chain(4), Labeling::identity(2)).unwrap();
        assert_eq!(f.kb(), &ms(2, &[0]));
        assert_eq!(revise(&f, &ms(2, &[2, 3])), ms(2, &[2]));
        assert!(revise(&f, &ModelSet::empty(2)).is_empty());
        assert_eq!(revise(&f, &ms(2, &[0, 3])), ms(2, &[0]));
    }

    #[test]
    fn n1_chain_table() {
        let f = FaithfulStructure::from_regular(PartialPreorder::chain(2), Labeling::identity(1)).unwrap();
        let table = operator_table(&f).unwrap();
        let rows: Vec<(Vec<u32>, Vec<u32>)> = table.entries().map(|(p, r)| (p.to_vec(), r.to_vec())).collect();
        assert_eq!(
            rows,
            vec![
                (vec![], vec![]),
                (vec![0], vec![0]),
                (vec![1], vec![1]),
                (vec![0, 1], vec![0]),
            ]
        );
    }

    #[test]
    fn minimization_invariants_exhaustive_n2() {
        for f in regular_structures() {
            let table = operator_table(&f).unwrap();
            for (phi, result) in table.entries() {
                assert!(result.is_subset(&phi));
                assert_eq!(phi.is_empty(), result.is_empty());
                let meet = phi.intersection(f.kb());
                if !meet.is_empty() {
                    assert_eq!(result, &meet);
                }
            }
        }
    }

    #[test]
    fn reconstruction_is_unique_up_to_labeling() {
        for f in regular_structures() {
            let table = operator_table(&f).unwrap();
            let rebuilt = reconstruct_order(&table, Verification::Full).unwrap();
            let t = f.labeling();
            for a in 0..4 {
                for b in 0..4 {
                    assert_eq!(
                        f.order().leq(a, b),
                        rebuilt.leq(t.assignment_of(a) as usize, t.assignment_of(b) as usize)
                    );
                }
            }
            let again = FaithfulStructure::from_regular(rebuilt, Labeling::identity(2)).unwrap();
            assert!(same_operator(&table, &again).unwrap());
        }
    }

    #[test]
    fn reversed_chain_from_pair_data() {
        // op({u, v}) = larger assignment wins
        let op = FnReviser::new(2, |phi: &ModelSet| {
            let top = phi.iter().max();
            ModelSet::from_assignments(2, top).unwrap()
        });
        let r = reconstruct_order(&op, Verification::Full).unwrap();
        assert_eq!(r, PartialPreorder::chain(4).relabel(&[3, 2, 1, 0]));
    }

    #[test]
    fn cyclic_preference_is_not_transitive() {
        // on n=2: 0 beats 1, 1 beats 2, 2 beats 0; 3 loses to everyone
        let op = FnReviser::new(2, |phi: &ModelSet| {
            let v = phi.to_vec();
            let winner = |a: u32, b: u32| match (a, b) {
                (0, 1) | (1, 0) => 0,
                (1, 2) | (2, 1) => 1,
                (0, 2) | (2, 0) => 2,
                (x, 3) | (3, x) => x,
                _ => a,
            };
            match v.as_slice() {
                [a, b] => ModelSet::from_assignments(2, [winner(*a, *b)]).unwrap(),
                _ => phi.clone(),
            }
        });
        assert!(matches!(
            reconstruct_order(&op, Verification::PairsOnly),
            Err(ReconstructError::NotTransitive(_))
        ));
    }

    #[test]
    fn preorder_ties_reconstruct_to_their_strict_part() {
        // 0 below everything, 1 and 2 tied, both below 3
        let r = PartialPreorder::from_pairs(4, [(0, 1), (0, 2), (0, 3), (1, 2), (2, 1), (1, 3), (2, 3)]).unwrap();
        let f = FaithfulStructure::from_regular(r.clone(), Labeling::identity(2)).unwrap();
        let rebuilt = reconstruct_order(&f, Verification::Full).unwrap();
        assert!(rebuilt.is_partial_order());
        assert_ne!(rebuilt, r);
        assert!(!rebuilt.leq(1, 2) && !rebuilt.leq(2, 1));
        let g = FaithfulStructure::from_regular(rebuilt, Labeling::identity(2)).unwrap();
        assert!(same_operator(&f, &g).unwrap());
    }

    #[test]
    fn table_json_round_trip_and_validation() {
        let f = FaithfulStructure::from_regular(PartialPreorder::chain(4), Labeling::identity(2)).unwrap();
        let table = operator_table(&f).unwrap();
        let json = serde_json::to_string(&table.to_json()).unwrap();
        let back: TableJson = serde_json::from_str(&json).unwrap();
        assert_eq!(OperatorTable::from_json(&back).unwrap(), table);

        let mut missing = table.to_json();
        missing.entries.pop();
        assert!(matches!(
            OperatorTable::from_json(&missing),
            Err(RevisionError::InvalidTable(_))
        ));
        let mut dup = table.to_json();
        dup.entries[1] = dup.entries[0].clone();
        assert!(OperatorTable::from_json(&dup).is_err());
    }

    #[test]
    fn representability_rejects_non_minimization() {
        // result not a subset of the input
        let op = FnReviser::new(2, |_: &ModelSet| ModelSet::full(2));
        let rep = is_representable(&op, &|_| true, Verification::Full).unwrap();
        assert!(matches!(rep, Representation::NotMinimization(_)));
    }

    #[test]
    fn representability_respects_family() {
        let f = FaithfulStructure::from_regular(PartialPreorder::chain(4), Labeling::new(2, vec![2, 0, 3, 1]).unwrap())
            .unwrap();
        let yes = is_representable(&f, &|r| r.is_regular(), Verification::Full).unwrap();
        let g = yes.structure().unwrap();
        assert!(same_operator(&f, g).unwrap());
        let no = is_representable(&f, &|r| r.is_regular_disconnected(), Verification::Full).unwrap();
        assert!(matches!(no, Representation::NotInFamily(_)));
    }

    #[test]
    fn table_too_large() {
        let f = FaithfulStructure::from_regular(PartialPreorder::chain(32), Labeling::identity(5)).unwrap();
        assert_eq!(operator_table(&f), Err(RevisionError::TableTooLarge(5)));
        assert!(reconstruct_order(&f, Verification::PairsOnly).is_ok());
        assert_eq!(
            reconstruct_order(&f, Verification::Full),
            Err(ReconstructError::TooLarge(5))
        );
    }
}
