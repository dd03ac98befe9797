//! Propositional formulas over `n` variables, truth assignments and model sets.
//!
//! An assignment over `n` variables is an integer in `[0, 2^n)`; bit `i - 1`
//! holds the value of `x_i` (so `x1` is the least significant bit). A
//! [`ModelSet`] is a bit vector of length `2^n` indexed by that integer.

use std::fmt;

use fixedbitset::FixedBitSet;
use rand::Rng;
use thiserror::Error;

use crate::syntax::{indexed_name, Cursor, ParseError, Tok};

/// Largest supported variable count.
pub const MAX_VARS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("variable count {0} outside 1..={MAX_VARS}")]
    BadVariableCount(usize),
    #[error("variable x{index} out of range for n = {n} (offset {pos})")]
    VariableOutOfRange { index: usize, n: usize, pos: usize },
    #[error("assignment {bits} out of range for n = {n}")]
    AssignmentOutOfRange { bits: u64, n: usize },
    #[error("variable count mismatch: {0} vs {1}")]
    VariableCountMismatch(usize, usize),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

pub(crate) fn check_var_count(n: usize) -> Result<(), LogicError> {
    if (1..=MAX_VARS).contains(&n) {
        Ok(())
    } else {
        Err(LogicError::BadVariableCount(n))
    }
}

/// A truth assignment to `x1..xn`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    n: u8,
    bits: u32,
}

impl Assignment {
    pub fn new(n: usize, bits: u32) -> Result<Self, LogicError> {
        check_var_count(n)?;
        if u64::from(bits) >= 1u64 << n {
            return Err(LogicError::AssignmentOutOfRange { bits: bits.into(), n });
        }
        Ok(Assignment { n: n as u8, bits })
    }

    pub fn vars(&self) -> usize {
        self.n as usize
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Value of variable `x_var` (1-based).
    pub fn value(&self, var: usize) -> bool {
        debug_assert!(var >= 1 && var <= self.vars());
        self.bits >> (var - 1) & 1 == 1
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // x_n first, x1 last, i.e. the binary numeral of `bits`
        for var in (1..=self.vars()).rev() {
            f.write_str(if self.value(var) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Propositional formula. Variables are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Const(bool),
    Var(usize),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn var(i: usize) -> Self {
        Formula::Var(i)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    /// Largest variable index mentioned, 0 if none.
    pub fn max_var(&self) -> usize {
        match self {
            Formula::Const(_) => 0,
            Formula::Var(i) => *i,
            Formula::Not(f) => f.max_var(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }

    fn eval_bits(&self, bits: u32) -> bool {
        match self {
            Formula::Const(c) => *c,
            Formula::Var(i) => bits >> (i - 1) & 1 == 1,
            Formula::Not(f) => !f.eval_bits(bits),
            Formula::And(a, b) => a.eval_bits(bits) && b.eval_bits(bits),
            Formula::Or(a, b) => a.eval_bits(bits) || b.eval_bits(bits),
            Formula::Implies(a, b) => !a.eval_bits(bits) || b.eval_bits(bits),
            Formula::Iff(a, b) => a.eval_bits(bits) == b.eval_bits(bits),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Iff(..) => 0,
            Formula::Implies(..) => 1,
            Formula::Or(..) => 2,
            Formula::And(..) => 3,
            Formula::Not(_) => 4,
            Formula::Const(_) | Formula::Var(_) => 5,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Formula, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (op, a, b, left_min, right_min) = match self {
            Formula::Const(true) => return f.write_str("true"),
            Formula::Const(false) => return f.write_str("false"),
            Formula::Var(i) => return write!(f, "x{i}"),
            Formula::Not(inner) => {
                f.write_str("!")?;
                return write_child(f, inner, 4);
            }
            Formula::And(a, b) => (" & ", a, b, 3, 4),
            Formula::Or(a, b) => (" | ", a, b, 2, 3),
            Formula::Implies(a, b) => (" -> ", a, b, 2, 1),
            Formula::Iff(a, b) => (" <-> ", a, b, 0, 1),
        };
        write_child(f, a, left_min)?;
        f.write_str(op)?;
        write_child(f, b, right_min)
    }
}

/// Parses the formula DSL: `x1..x16`, `true`, `false`, `!`, `&`, `|`, `->`
/// (right-associative), `<->`, parentheses. Binding strength decreases in
/// that order.
pub fn parse_formula(text: &str, n: usize) -> Result<Formula, LogicError> {
    check_var_count(n)?;
    let mut cur = Cursor::new(text)?;
    let f = parse_iff(&mut cur, n)?;
    cur.expect_end()?;
    Ok(f)
}

fn parse_iff(cur: &mut Cursor, n: usize) -> Result<Formula, LogicError> {
    let mut lhs = parse_implies(cur, n)?;
    while cur.eat(&Tok::DoubleArrow) {
        let rhs = parse_implies(cur, n)?;
        lhs = Formula::iff(lhs, rhs);
    }
    Ok(lhs)
}

fn parse_implies(cur: &mut Cursor, n: usize) -> Result<Formula, LogicError> {
    let lhs = parse_or(cur, n)?;
    if cur.eat(&Tok::Arrow) {
        let rhs = parse_implies(cur, n)?;
        return Ok(Formula::implies(lhs, rhs));
    }
    Ok(lhs)
}

fn parse_or(cur: &mut Cursor, n: usize) -> Result<Formula, LogicError> {
    let mut lhs = parse_and(cur, n)?;
    while cur.eat(&Tok::Pipe) {
        let rhs = parse_and(cur, n)?;
        lhs = Formula::or(lhs, rhs);
    }
    Ok(lhs)
}

fn parse_and(cur: &mut Cursor, n: usize) -> Result<Formula, LogicError> {
    let mut lhs = parse_unary(cur, n)?;
    while cur.eat(&Tok::Amp) {
        let rhs = parse_unary(cur, n)?;
        lhs = Formula::and(lhs, rhs);
    }
    Ok(lhs)
}

fn parse_unary(cur: &mut Cursor, n: usize) -> Result<Formula, LogicError> {
    if cur.eat(&Tok::Bang) {
        return Ok(Formula::not(parse_unary(cur, n)?));
    }
    if cur.eat(&Tok::LParen) {
        let f = parse_iff(cur, n)?;
        cur.expect(&Tok::RParen)?;
        return Ok(f);
    }
    let (name, pos) = cur.expect_ident("a variable, constant or `(`")?;
    match name.as_str() {
        "true" => Ok(Formula::Const(true)),
        "false" => Ok(Formula::Const(false)),
        _ => match indexed_name(&name, "x") {
            Some(index) if index <= n => Ok(Formula::Var(index)),
            Some(index) => Err(LogicError::VariableOutOfRange { index, n, pos }),
            None => Err(ParseError::new(pos, format!("unknown identifier `{name}`")).into()),
        },
    }
}

/// Set of truth assignments over `n` variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelSet {
    n: usize,
    members: FixedBitSet,
}

impl ModelSet {
    pub fn empty(n: usize) -> Self {
        ModelSet {
            n,
            members: FixedBitSet::with_capacity(1 << n),
        }
    }

    pub fn full(n: usize) -> Self {
        let mut s = Self::empty(n);
        s.members.insert_range(..);
        s
    }

    pub fn from_assignments(n: usize, items: impl IntoIterator<Item = u32>) -> Result<Self, LogicError> {
        check_var_count(n)?;
        let mut s = Self::empty(n);
        for bits in items {
            if bits as usize >= s.universe_size() {
                return Err(LogicError::AssignmentOutOfRange { bits: bits.into(), n });
            }
            s.members.insert(bits as usize);
        }
        Ok(s)
    }

    /// Model set whose membership vector is the low `2^n` bits of `mask`
    /// (requires `2^n <= 64`).
    pub fn from_mask(n: usize, mask: u64) -> Self {
        assert!(n <= 6, "mask encoding needs 2^n <= 64");
        let mut s = Self::empty(n);
        for i in 0..s.universe_size() {
            if mask >> i & 1 == 1 {
                s.members.insert(i);
            }
        }
        s
    }

    /// Inverse of [`ModelSet::from_mask`]; `None` when `2^n > 64`.
    pub fn mask(&self) -> Option<u64> {
        if self.n > 6 {
            return None;
        }
        Some(self.members.ones().fold(0u64, |m, i| m | 1 << i))
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut s = Self::empty(n);
        for i in 0..s.universe_size() {
            if rng.gen::<bool>() {
                s.members.insert(i);
            }
        }
        s
    }

    pub fn vars(&self) -> usize {
        self.n
    }

    /// Number of assignments over `n` variables, `2^n`.
    pub fn universe_size(&self) -> usize {
        1 << self.n
    }

    pub fn contains(&self, bits: u32) -> bool {
        self.members.contains(bits as usize)
    }

    pub fn insert(&mut self, bits: u32) {
        self.members.insert(bits as usize);
    }

    pub fn len(&self) -> usize {
        self.members.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_clear()
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.members.ones().map(|i| i as u32)
    }

    pub fn to_vec(&self) -> Vec<u32> {
        self.iter().collect()
    }

    pub fn union(&self, other: &ModelSet) -> ModelSet {
        debug_assert_eq!(self.n, other.n);
        let mut s = self.clone();
        s.members.union_with(&other.members);
        s
    }

    pub fn intersection(&self, other: &ModelSet) -> ModelSet {
        debug_assert_eq!(self.n, other.n);
        let mut s = self.clone();
        s.members.intersect_with(&other.members);
        s
    }

    pub fn complement(&self) -> ModelSet {
        let mut s = self.clone();
        s.members.toggle_range(..);
        s
    }

    pub fn is_subset(&self, other: &ModelSet) -> bool {
        self.members.is_subset(&other.members)
    }
}

impl fmt::Display for ModelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, bits) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{bits}")?;
        }
        f.write_str("}")
    }
}

/// `|phi|`: the assignments over `n` variables satisfying `phi`.
pub fn models(phi: &Formula, n: usize) -> ModelSet {
    assert!(phi.max_var() <= n, "formula mentions x{} but n = {n}", phi.max_var());
    let mut s = ModelSet::empty(n);
    for bits in 0..(1u32 << n) {
        if phi.eval_bits(bits) {
            s.insert(bits);
        }
    }
    s
}

pub fn eval(phi: &Formula, a: Assignment) -> bool {
    debug_assert!(phi.max_var() <= a.vars());
    phi.eval_bits(a.bits())
}

/// Complete conjunction of literals `x1 .. xn` describing one assignment.
pub fn minterm(n: usize, bits: u32) -> Formula {
    (1..=n)
        .map(|i| {
            if bits >> (i - 1) & 1 == 1 {
                Formula::var(i)
            } else {
                Formula::not(Formula::var(i))
            }
        })
        .reduce(Formula::and)
        .expect("n >= 1")
}

/// Canonical formula with model set `set`: the disjunction of minterms in
/// ascending assignment order, or `false` for the empty set.
pub fn formula_of(set: &ModelSet) -> Formula {
    set.iter()
        .map(|bits| minterm(set.vars(), bits))
        .reduce(Formula::or)
        .unwrap_or(Formula::Const(false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn x(i: usize) -> Formula {
        Formula::var(i)
    }

    #[test]
    fn parse_examples() {
        assert_eq!(
            parse_formula("x1 & !x2", 2).unwrap(),
            Formula::and(x(1), Formula::not(x(2)))
        );
        assert_eq!(
            parse_formula("(x1 -> x2) | x1", 2).unwrap(),
            Formula::or(Formula::implies(x(1), x(2)), x(1))
        );
        assert!(matches!(
            parse_formula("x3", 2),
            Err(LogicError::VariableOutOfRange { index: 3, n: 2, .. })
        ));
    }

    #[test]
    fn associativity_and_precedence() {
        assert_eq!(
            parse_formula("x1 -> x2 -> x3", 3).unwrap(),
            Formula::implies(x(1), Formula::implies(x(2), x(3)))
        );
        assert_eq!(
            parse_formula("x1 & x2 & x3", 3).unwrap(),
            Formula::and(Formula::and(x(1), x(2)), x(3))
        );
        assert_eq!(
            parse_formula("x1 <-> x2 | !x3 & x1", 3).unwrap(),
            Formula::iff(x(1), Formula::or(x(2), Formula::and(Formula::not(x(3)), x(1))))
        );
    }

    #[test]
    fn syntax_errors() {
        let err = parse_formula("x1 & ", 2).unwrap_err();
        assert!(matches!(err, LogicError::Parse(ParseError { pos: 5, .. })));
        assert!(parse_formula("(x1", 2).is_err());
        assert!(parse_formula("y1", 2).is_err());
        assert!(parse_formula("x1 x2", 2).is_err());
        assert!(matches!(parse_formula("x1", 17), Err(LogicError::BadVariableCount(17))));
    }

    #[test]
    fn models_examples() {
        let m = models(&parse_formula("x1 & !x2", 2).unwrap(), 2);
        assert_eq!(m.to_vec(), vec![0b01]);
        assert_eq!(models(&parse_formula("x1 | !x1", 1).unwrap(), 1).len(), 2);
        assert!(models(&parse_formula("x1 & !x1", 2).unwrap(), 2).is_empty());
    }

    #[test]
    fn eval_examples() {
        let one = Assignment::new(1, 1).unwrap();
        assert!(eval(&x(1), one));
        assert!(!eval(&Formula::not(x(1)), one));
        let zero = Assignment::new(2, 0).unwrap();
        assert!(eval(&parse_formula("x1 -> x2", 2).unwrap(), zero));
        assert!(Assignment::new(2, 4).is_err());
    }

    #[test]
    fn formula_of_examples() {
        assert_eq!(formula_of(&ModelSet::empty(2)), Formula::Const(false));
        let single = ModelSet::from_assignments(2, [0b01]).unwrap();
        assert_eq!(formula_of(&single).to_string(), "x1 & !x2");
        let two = ModelSet::from_assignments(2, [0, 3]).unwrap();
        assert_eq!(formula_of(&two).to_string(), "!x1 & !x2 | x1 & x2");
    }

    #[test]
    fn formula_of_round_trip_exhaustive() {
        for n in 1..=3 {
            let subsets = 1u64 << (1 << n);
            for mask in 0..subsets {
                let set = ModelSet::from_mask(n, mask);
                assert_eq!(models(&formula_of(&set), n), set);
            }
        }
    }

    #[test]
    fn mask_round_trip() {
        for mask in 0..16u64 {
            assert_eq!(ModelSet::from_mask(2, mask).mask(), Some(mask));
        }
        assert_eq!(ModelSet::empty(7).mask(), None);
    }

    #[test]
    fn assignment_display_is_binary_numeral() {
        assert_eq!(Assignment::new(3, 0b011).unwrap().to_string(), "011");
        assert_eq!(ModelSet::from_assignments(2, [2, 3]).unwrap().to_string(), "{2, 3}");
    }

    fn arb_formula(n: usize) -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![any::<bool>().prop_map(Formula::Const), (1..=n).prop_map(Formula::Var),];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| Formula::iff(a, b)),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_parses_back(f in arb_formula(3)) {
            prop_assert_eq!(parse_formula(&f.to_string(), 3).unwrap(), f);
        }

        #[test]
        fn models_is_a_boolean_homomorphism(a in arb_formula(3), b in arb_formula(3)) {
            let (ma, mb) = (models(&a, 3), models(&b, 3));
            prop_assert_eq!(models(&Formula::and(a.clone(), b.clone()), 3), ma.intersection(&mb));
            prop_assert_eq!(models(&Formula::or(a.clone(), b.clone()), 3), ma.union(&mb));
            prop_assert_eq!(models(&Formula::not(a.clone()), 3), ma.complement());
            for bits in 0..8u32 {
                let asg = Assignment::new(3, bits).unwrap();
                prop_assert_eq!(eval(&a, asg), ma.contains(bits));
            }
        }
    }

    #[test]
    fn random_sets_round_trip_n3() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..256 {
            let set = ModelSet::random(3, &mut rng);
            assert_eq!(models(&formula_of(&set), 3), set);
        }
    }
}
