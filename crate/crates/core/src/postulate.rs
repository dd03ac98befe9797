//! Postulates: first-order sentences over the unary predicates `K`, `p1..pl`
//! and `Kstar[mu]`, evaluated over the set of truth assignments.
//!
//! A postulate is implicitly universally quantified over the model sets of
//! `p1..pl`; [`satisfies`] supplies that quantifier, either exhaustively or
//! by seeded sampling.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::logic::ModelSet;
use crate::revision::Reviser;
use crate::syntax::{indexed_name, is_element_variable, Cursor, ParseError, Tok};

/// Largest formula index accepted by the DSL (`p1..p9`).
pub const MAX_PHI: usize = 9;

/// Exhaustive checks enumerate at most `2^24` tuples.
pub const EXHAUSTIVE_LOG2_LIMIT: u32 = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PostulateError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("free variable `{0}` in postulate body")]
    FreeVariable(String),
    #[error("starred argument at offset {pos} must be a boolean combination of p1..p{MAX_PHI}")]
    NestedStar { pos: usize },
    #[error("postulate has {expected} formula symbols but {got} model sets were supplied")]
    ArityMismatch { expected: usize, got: usize },
    #[error("model sets over {got} variables, operator over {expected}")]
    VariableMismatch { expected: usize, got: usize },
    #[error("exhaustive search needs 2^{log2} tuples (limit 2^{EXHAUSTIVE_LOG2_LIMIT}); use sampling")]
    SearchSpaceTooLarge { log2: u64 },
    #[error("unknown built-in postulate `{0}`")]
    UnknownBuiltin(String),
}

/// Boolean combination of the formula symbols `p1..pl`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Mu {
    Const(bool),
    Phi(usize),
    Not(Box<Mu>),
    And(Box<Mu>, Box<Mu>),
    Or(Box<Mu>, Box<Mu>),
    Implies(Box<Mu>, Box<Mu>),
    Iff(Box<Mu>, Box<Mu>),
}

impl Mu {
    pub fn max_phi(&self) -> usize {
        match self {
            Mu::Const(_) => 0,
            Mu::Phi(i) => *i,
            Mu::Not(m) => m.max_phi(),
            Mu::And(a, b) | Mu::Or(a, b) | Mu::Implies(a, b) | Mu::Iff(a, b) => a.max_phi().max(b.max_phi()),
        }
    }

    /// Truth value at an assignment, given membership of that assignment in
    /// each `|p_i|` (`member(i)` is 1-based).
    pub fn holds(&self, member: &dyn Fn(usize) -> bool) -> bool {
        match self {
            Mu::Const(c) => *c,
            Mu::Phi(i) => member(*i),
            Mu::Not(m) => !m.holds(member),
            Mu::And(a, b) => a.holds(member) && b.holds(member),
            Mu::Or(a, b) => a.holds(member) || b.holds(member),
            Mu::Implies(a, b) => !a.holds(member) || b.holds(member),
            Mu::Iff(a, b) => a.holds(member) == b.holds(member),
        }
    }

    /// The model set of this combination over `n` variables under `phis`.
    pub fn model_set(&self, n: usize, phis: &[ModelSet]) -> ModelSet {
        let mut out = ModelSet::empty(n);
        for bits in 0..1u32 << n {
            if self.holds(&|i| phis[i - 1].contains(bits)) {
                out.insert(bits);
            }
        }
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            Mu::Iff(..) => 1,
            Mu::Implies(..) => 2,
            Mu::Or(..) => 3,
            Mu::And(..) => 4,
            Mu::Not(_) => 5,
            Mu::Const(_) | Mu::Phi(_) => 6,
        }
    }
}

impl fmt::Display for Mu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, m: &Mu, min: u8| {
            if m.precedence() < min {
                write!(f, "({m})")
            } else {
                write!(f, "{m}")
            }
        };
        let (op, a, b, lmin, rmin) = match self {
            Mu::Const(true) => return f.write_str("true"),
            Mu::Const(false) => return f.write_str("false"),
            Mu::Phi(i) => return write!(f, "p{i}"),
            Mu::Not(m) => {
                f.write_str("!")?;
                return child(f, m, 5);
            }
            Mu::And(a, b) => (" & ", a, b, 4, 5),
            Mu::Or(a, b) => (" | ", a, b, 3, 4),
            Mu::Implies(a, b) => (" -> ", a, b, 3, 2),
            Mu::Iff(a, b) => (" <-> ", a, b, 1, 2),
        };
        child(f, a, lmin)?;
        f.write_str(op)?;
        child(f, b, rmin)
    }
}

/// Body of a postulate. `Star(j, v)` refers to the `j`-th (0-based) starred
/// combination of the enclosing [`Postulate`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PostFormula {
    Const(bool),
    Eq(String, String),
    K(String),
    Phi(usize, String),
    Star(usize, String),
    Not(Box<PostFormula>),
    And(Box<PostFormula>, Box<PostFormula>),
    Or(Box<PostFormula>, Box<PostFormula>),
    Implies(Box<PostFormula>, Box<PostFormula>),
    Iff(Box<PostFormula>, Box<PostFormula>),
    Forall(String, Box<PostFormula>),
    Exists(String, Box<PostFormula>),
}

impl PostFormula {
    fn free_vars_into(&self, bound: &mut Vec<String>, out: &mut Vec<String>) {
        let mut note = |v: &String, bound: &Vec<String>| {
            if !bound.contains(v) && !out.contains(v) {
                out.push(v.clone());
            }
        };
        match self {
            PostFormula::Const(_) => {}
            PostFormula::Eq(a, b) => {
                note(a, bound);
                note(b, bound);
            }
            PostFormula::K(v) | PostFormula::Phi(_, v) | PostFormula::Star(_, v) => note(v, bound),
            PostFormula::Not(f) => f.free_vars_into(bound, out),
            PostFormula::And(a, b) | PostFormula::Or(a, b) | PostFormula::Implies(a, b) | PostFormula::Iff(a, b) => {
                a.free_vars_into(bound, out);
                b.free_vars_into(bound, out);
            }
            PostFormula::Forall(v, f) | PostFormula::Exists(v, f) => {
                bound.push(v.clone());
                f.free_vars_into(bound, out);
                bound.pop();
            }
        }
    }

    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.free_vars_into(&mut Vec::new(), &mut out);
        out
    }

    fn max_phi(&self) -> usize {
        match self {
            PostFormula::Phi(i, _) => *i,
            PostFormula::Not(f) | PostFormula::Forall(_, f) | PostFormula::Exists(_, f) => f.max_phi(),
            PostFormula::And(a, b) | PostFormula::Or(a, b) | PostFormula::Implies(a, b) | PostFormula::Iff(a, b) => {
                a.max_phi().max(b.max_phi())
            }
            _ => 0,
        }
    }

    fn max_star(&self) -> Option<usize> {
        match self {
            PostFormula::Star(j, _) => Some(*j),
            PostFormula::Not(f) | PostFormula::Forall(_, f) | PostFormula::Exists(_, f) => f.max_star(),
            PostFormula::And(a, b) | PostFormula::Or(a, b) | PostFormula::Implies(a, b) | PostFormula::Iff(a, b) => {
                a.max_star().max(b.max_star())
            }
            _ => None,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            PostFormula::Forall(..) | PostFormula::Exists(..) => 0,
            PostFormula::Iff(..) => 1,
            PostFormula::Implies(..) => 2,
            PostFormula::Or(..) => 3,
            PostFormula::And(..) => 4,
            PostFormula::Not(_) => 5,
            _ => 6,
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: PostFormula) -> Self {
        PostFormula::Not(Box::new(f))
    }
}

/// A closed postulate with `ell` formula symbols and its distinct starred
/// combinations `mus`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Postulate {
    ell: usize,
    mus: Vec<Mu>,
    body: PostFormula,
}

impl Postulate {
    /// Checks closedness and star indices; `ell` is the largest `p` index used.
    pub fn new(mus: Vec<Mu>, body: PostFormula) -> Result<Self, PostulateError> {
        if let Some(v) = body.free_vars().into_iter().next() {
            return Err(PostulateError::FreeVariable(v));
        }
        assert!(body.max_star().is_none_or(|j| j < mus.len()), "star index out of range");
        let ell = mus.iter().map(Mu::max_phi).chain([body.max_phi()]).max().unwrap_or(0);
        Ok(Postulate { ell, mus, body })
    }

    /// Number of formula symbols `p1..pl`.
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Distinct starred combinations, in order of first occurrence.
    pub fn mus(&self) -> &[Mu] {
        &self.mus
    }

    pub fn body(&self) -> &PostFormula {
        &self.body
    }

    fn write_formula(&self, f: &mut fmt::Formatter<'_>, p: &PostFormula) -> fmt::Result {
        let (op, a, b, lmin, rmin) = match p {
            PostFormula::Const(true) => return f.write_str("true"),
            PostFormula::Const(false) => return f.write_str("false"),
            PostFormula::Eq(a, b) => return write!(f, "{a} = {b}"),
            PostFormula::K(v) => return write!(f, "K({v})"),
            PostFormula::Phi(i, v) => return write!(f, "p{i}({v})"),
            PostFormula::Star(j, v) => return write!(f, "Kstar[{}]({v})", self.mus[*j]),
            PostFormula::Not(inner) => {
                f.write_str("!")?;
                return self.write_child(f, inner, 5);
            }
            PostFormula::Forall(v, body) => {
                write!(f, "forall {v}. ")?;
                return self.write_formula(f, body);
            }
            PostFormula::Exists(v, body) => {
                write!(f, "exists {v}. ")?;
                return self.write_formula(f, body);
            }
            PostFormula::And(a, b) => (" & ", a, b, 4, 5),
            PostFormula::Or(a, b) => (" | ", a, b, 3, 4),
            PostFormula::Implies(a, b) => (" -> ", a, b, 3, 2),
            PostFormula::Iff(a, b) => (" <-> ", a, b, 1, 2),
        };
        self.write_child(f, a, lmin)?;
        f.write_str(op)?;
        self.write_child(f, b, rmin)
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, p: &PostFormula, min: u8) -> fmt::Result {
        if p.precedence() < min {
            f.write_str("(")?;
            self.write_formula(f, p)?;
            f.write_str(")")
        } else {
            self.write_formula(f, p)
        }
    }
}

impl fmt::Display for Postulate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_formula(f, &self.body)
    }
}

/// Interns starred combinations by syntactic equality.
#[derive(Default)]
pub struct StarTable {
    mus: Vec<Mu>,
}

impl StarTable {
    pub fn intern(&mut self, mu: Mu) -> usize {
        if let Some(j) = self.mus.iter().position(|m| *m == mu) {
            return j;
        }
        self.mus.push(mu);
        self.mus.len() - 1
    }

    pub fn into_mus(self) -> Vec<Mu> {
        self.mus
    }
}

/// AGM success: `(exists x. K(x)) -> (exists x. Kstar[p1](x))`.
pub const AGM_SUCCESS: &str = "(exists x. K(x)) -> (exists x. Kstar[p1](x))";

/// AGM subexpansion with `phi = p1`, `psi = p2`.
pub const AGM_SUBEXPANSION: &str = "(exists x. (Kstar[p1](x) & p2(x))) -> \
     (forall y. (Kstar[p1 & p2](y) -> (Kstar[p1](y) & p2(y))))";

pub fn builtin(name: &str) -> Result<Postulate, PostulateError> {
    let text = match name {
        "agm-success" => AGM_SUCCESS,
        "agm-subexpansion" => AGM_SUBEXPANSION,
        _ => return Err(PostulateError::UnknownBuiltin(name.to_string())),
    };
    parse_postulate(text)
}

/// A built-in name, or else postulate DSL text.
pub fn resolve(name_or_text: &str) -> Result<Postulate, PostulateError> {
    match builtin(name_or_text) {
        Err(PostulateError::UnknownBuiltin(_)) => parse_postulate(name_or_text),
        other => other,
    }
}

pub fn parse_postulate(text: &str) -> Result<Postulate, PostulateError> {
    let mut parser = PostulateParser {
        cur: Cursor::new(text)?,
        stars: StarTable::default(),
    };
    let body = parser.iff()?;
    parser.cur.expect_end()?;
    Postulate::new(parser.stars.into_mus(), body)
}

struct PostulateParser {
    cur: Cursor,
    stars: StarTable,
}

fn bin(ctor: fn(Box<PostFormula>, Box<PostFormula>) -> PostFormula, a: PostFormula, b: PostFormula) -> PostFormula {
    ctor(Box::new(a), Box::new(b))
}

impl PostulateParser {
    fn iff(&mut self) -> Result<PostFormula, PostulateError> {
        let mut lhs = self.implies()?;
        while self.cur.eat(&Tok::DoubleArrow) {
            lhs = bin(PostFormula::Iff, lhs, self.implies()?);
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<PostFormula, PostulateError> {
        let lhs = self.or()?;
        if self.cur.eat(&Tok::Arrow) {
            return Ok(bin(PostFormula::Implies, lhs, self.implies()?));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<PostFormula, PostulateError> {
        let mut lhs = self.and()?;
        while self.cur.eat(&Tok::Pipe) {
            lhs = bin(PostFormula::Or, lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<PostFormula, PostulateError> {
        let mut lhs = self.unary()?;
        while self.cur.eat(&Tok::Amp) {
            lhs = bin(PostFormula::And, lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn variable_arg(&mut self) -> Result<String, PostulateError> {
        self.cur.expect(&Tok::LParen)?;
        let v = self.variable()?;
        self.cur.expect(&Tok::RParen)?;
        Ok(v)
    }

    fn variable(&mut self) -> Result<String, PostulateError> {
        let (name, pos) = self.cur.expect_ident("a variable")?;
        if !is_element_variable(&name) || indexed_name(&name, "p").is_some() {
            return Err(ParseError::new(pos, format!("`{name}` is not a variable name")).into());
        }
        Ok(name)
    }

    fn unary(&mut self) -> Result<PostFormula, PostulateError> {
        if self.cur.eat(&Tok::Bang) {
            return Ok(PostFormula::not(self.unary()?));
        }
        if self.cur.eat(&Tok::LParen) {
            let f = self.iff()?;
            self.cur.expect(&Tok::RParen)?;
            return Ok(f);
        }
        let pos = self.cur.pos();
        let name = match self.cur.peek() {
            Tok::Ident(name) => name.clone(),
            _ => return Err(self.cur.unexpected("a formula").into()),
        };
        match name.as_str() {
            "forall" | "exists" => {
                self.cur.bump();
                let v = self.variable()?;
                self.cur.expect(&Tok::Dot)?;
                let body = Box::new(self.iff()?);
                Ok(if name == "forall" {
                    PostFormula::Forall(v, body)
                } else {
                    PostFormula::Exists(v, body)
                })
            }
            "true" | "false" => {
                self.cur.bump();
                Ok(PostFormula::Const(name == "true"))
            }
            "K" => {
                self.cur.bump();
                Ok(PostFormula::K(self.variable_arg()?))
            }
            "Kstar" => {
                self.cur.bump();
                self.cur.expect(&Tok::LBrack)?;
                let mu = self.mu_iff()?;
                self.cur.expect(&Tok::RBrack)?;
                let j = self.stars.intern(mu);
                Ok(PostFormula::Star(j, self.variable_arg()?))
            }
            _ => {
                if let Some(i) = phi_index(&name) {
                    self.cur.bump();
                    return Ok(PostFormula::Phi(i, self.variable_arg()?));
                }
                if *self.cur.peek_at(1) == Tok::Eq {
                    let a = self.variable()?;
                    self.cur.expect(&Tok::Eq)?;
                    let b = self.variable()?;
                    return Ok(PostFormula::Eq(a, b));
                }
                Err(ParseError::new(pos, format!("unknown atom `{name}`")).into())
            }
        }
    }

    fn mu_iff(&mut self) -> Result<Mu, PostulateError> {
        let mut lhs = self.mu_implies()?;
        while self.cur.eat(&Tok::DoubleArrow) {
            lhs = Mu::Iff(Box::new(lhs), Box::new(self.mu_implies()?));
        }
        Ok(lhs)
    }

    fn mu_implies(&mut self) -> Result<Mu, PostulateError> {
        let lhs = self.mu_or()?;
        if self.cur.eat(&Tok::Arrow) {
            return Ok(Mu::Implies(Box::new(lhs), Box::new(self.mu_implies()?)));
        }
        Ok(lhs)
    }

    fn mu_or(&mut self) -> Result<Mu, PostulateError> {
        let mut lhs = self.mu_and()?;
        while self.cur.eat(&Tok::Pipe) {
            lhs = Mu::Or(Box::new(lhs), Box::new(self.mu_and()?));
        }
        Ok(lhs)
    }

    fn mu_and(&mut self) -> Result<Mu, PostulateError> {
        let mut lhs = self.mu_unary()?;
        while self.cur.eat(&Tok::Amp) {
            lhs = Mu::And(Box::new(lhs), Box::new(self.mu_unary()?));
        }
        Ok(lhs)
    }

    fn mu_unary(&mut self) -> Result<Mu, PostulateError> {
        if self.cur.eat(&Tok::Bang) {
            return Ok(Mu::Not(Box::new(self.mu_unary()?)));
        }
        if self.cur.eat(&Tok::LParen) {
            let m = self.mu_iff()?;
            self.cur.expect(&Tok::RParen)?;
            return Ok(m);
        }
        let (name, pos) = self.cur.expect_ident("p1..p9, `!` or `(`")?;
        match name.as_str() {
            "true" => Ok(Mu::Const(true)),
            "false" => Ok(Mu::Const(false)),
            "K" | "Kstar" => Err(PostulateError::NestedStar { pos }),
            _ => phi_index(&name)
                .map(Mu::Phi)
                .ok_or_else(|| ParseError::new(pos, format!("unknown formula symbol `{name}`")).into()),
        }
    }
}

fn phi_index(name: &str) -> Option<usize> {
    indexed_name(name, "p").filter(|i| (1..=MAX_PHI).contains(i))
}

/// The model sets the predicates of a postulate denote for one instance.
struct Interpretation<'a> {
    kb: &'a ModelSet,
    phis: &'a [ModelSet],
    stars: Vec<ModelSet>,
}

impl Interpretation<'_> {
    fn eval(&self, f: &PostFormula, env: &mut Vec<(String, u32)>) -> bool {
        let lookup = |env: &Vec<(String, u32)>, v: &str| {
            env.iter()
                .rev()
                .find(|(name, _)| name == v)
                .map(|&(_, a)| a)
                .expect("closed formula")
        };
        match f {
            PostFormula::Const(c) => *c,
            PostFormula::Eq(a, b) => lookup(env, a) == lookup(env, b),
            PostFormula::K(v) => self.kb.contains(lookup(env, v)),
            PostFormula::Phi(i, v) => self.phis[i - 1].contains(lookup(env, v)),
            PostFormula::Star(j, v) => self.stars[*j].contains(lookup(env, v)),
            PostFormula::Not(g) => !self.eval(g, env),
            PostFormula::And(a, b) => self.eval(a, env) && self.eval(b, env),
            PostFormula::Or(a, b) => self.eval(a, env) || self.eval(b, env),
            PostFormula::Implies(a, b) => !self.eval(a, env) || self.eval(b, env),
            PostFormula::Iff(a, b) => self.eval(a, env) == self.eval(b, env),
            PostFormula::Forall(v, g) | PostFormula::Exists(v, g) => {
                let universal = matches!(f, PostFormula::Forall(..));
                let domain = 1u32 << self.kb.vars();
                for a in 0..domain {
                    env.push((v.clone(), a));
                    let value = self.eval(g, env);
                    env.pop();
                    if value != universal {
                        return !universal;
                    }
                }
                universal
            }
        }
    }
}

/// Evaluates one instance of `postulate` with `p_i` interpreted as `phis[i-1]`.
pub fn eval_instance(
    op: &dyn Reviser,
    kb: &ModelSet,
    postulate: &Postulate,
    phis: &[ModelSet],
) -> Result<bool, PostulateError> {
    if phis.len() != postulate.ell() {
        return Err(PostulateError::ArityMismatch {
            expected: postulate.ell(),
            got: phis.len(),
        });
    }
    let n = op.vars();
    for got in phis.iter().map(ModelSet::vars).chain([kb.vars()]) {
        if got != n {
            return Err(PostulateError::VariableMismatch { expected: n, got });
        }
    }
    let stars = postulate
        .mus()
        .iter()
        .map(|mu| op.revise(&mu.model_set(n, phis)))
        .collect();
    let interp = Interpretation { kb, phis, stars };
    Ok(interp.eval(postulate.body(), &mut Vec::new()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Exhaustive,
    Sample { count: usize, seed: u64 },
}

/// Result of checking a universally quantified statement over tuples of sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict<W> {
    pub holds: bool,
    /// Tuples examined (for exhaustive searches that fail: up to and
    /// including the counterexample).
    pub checked: u64,
    pub counterexample: Option<W>,
}

/// log2 of the number of `ell`-tuples of subsets of a `universe`-element set.
pub(crate) fn tuple_space_log2(universe: usize, ell: usize) -> u64 {
    universe as u64 * ell as u64
}

/// Decodes tuple number `index` into `ell` subset masks, first component
/// most significant (so tuple numbers run in lexicographic order).
pub(crate) fn decode_tuple(index: u64, universe: usize, ell: usize) -> Vec<u64> {
    let digit_mask = if universe == 64 {
        u64::MAX
    } else {
        (1u64 << universe) - 1
    };
    (0..ell)
        .map(|j| (index >> (universe * (ell - 1 - j))) & digit_mask)
        .collect()
}

/// Scans tuple numbers `0..total` and returns the first failing one.
pub(crate) fn first_failure(total: u64, holds: impl Fn(u64) -> bool + Sync) -> Option<u64> {
    (0..total).into_par_iter().find_first(|&i| !holds(i))
}

/// Whether `op` satisfies `postulate` for `kb`: the instance holds for every
/// `ell`-tuple of model sets (exhaustive) or for `count` sampled tuples.
/// The reported counterexample is the lexicographically first failing tuple.
pub fn satisfies(
    op: &dyn Reviser,
    kb: &ModelSet,
    postulate: &Postulate,
    mode: SearchMode,
) -> Result<Verdict<Vec<ModelSet>>, PostulateError> {
    let n = op.vars();
    let ell = postulate.ell();
    // surface arity/variable errors once, up front
    eval_instance(op, kb, postulate, &vec![ModelSet::empty(n); ell])?;
    match mode {
        SearchMode::Exhaustive => {
            let universe = 1usize << n;
            let log2 = tuple_space_log2(universe, ell);
            if log2 > u64::from(EXHAUSTIVE_LOG2_LIMIT) {
                return Err(PostulateError::SearchSpaceTooLarge { log2 });
            }
            let tuple = |i: u64| -> Vec<ModelSet> {
                decode_tuple(i, universe, ell)
                    .into_iter()
                    .map(|m| ModelSet::from_mask(n, m))
                    .collect()
            };
            let total = 1u64 << log2;
            let failure = first_failure(total, |i| {
                eval_instance(op, kb, postulate, &tuple(i)).expect("validated")
            });
            Ok(match failure {
                None => Verdict {
                    holds: true,
                    checked: total,
                    counterexample: None,
                },
                Some(i) => Verdict {
                    holds: false,
                    checked: i + 1,
                    counterexample: Some(tuple(i)),
                },
            })
        }
        SearchMode::Sample { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tuples: Vec<Vec<ModelSet>> = (0..count)
                .map(|_| (0..ell).map(|_| ModelSet::random(n, &mut rng)).collect())
                .collect();
            let failure = tuples
                .par_iter()
                .position_first(|phis| !eval_instance(op, kb, postulate, phis).expect("validated"));
            Ok(match failure {
                None => Verdict {
                    holds: true,
                    checked: count as u64,
                    counterexample: None,
                },
                Some(i) => Verdict {
                    holds: false,
                    checked: i as u64 + 1,
                    counterexample: Some(tuples[i].clone()),
                },
            })
        }
    }
}

fn random_mu<R: Rng + ?Sized>(rng: &mut R, ell: usize, depth: usize) -> Mu {
    if depth == 0 || rng.gen_bool(0.4) {
        return if rng.gen_bool(0.1) {
            Mu::Const(rng.gen())
        } else {
            Mu::Phi(rng.gen_range(1..=ell))
        };
    }
    let a = Box::new(random_mu(rng, ell, depth - 1));
    match rng.gen_range(0..4) {
        0 => Mu::Not(a),
        1 => Mu::And(a, Box::new(random_mu(rng, ell, depth - 1))),
        2 => Mu::Or(a, Box::new(random_mu(rng, ell, depth - 1))),
        _ => Mu::Implies(a, Box::new(random_mu(rng, ell, depth - 1))),
    }
}

const VAR_NAMES: &[&str] = &["x", "y", "z", "w"];

fn random_body<R: Rng + ?Sized>(
    rng: &mut R,
    ell: usize,
    depth: usize,
    scope: &mut Vec<String>,
    stars: &mut StarTable,
) -> PostFormula {
    let leaf = depth == 0 || rng.gen_bool(0.25);
    if leaf && !scope.is_empty() {
        let v = scope.choose(rng).expect("non-empty").clone();
        return match rng.gen_range(0..5) {
            0 => PostFormula::K(v),
            1 => PostFormula::Phi(rng.gen_range(1..=ell), v),
            2 => PostFormula::Eq(v, scope.choose(rng).expect("non-empty").clone()),
            _ => PostFormula::Star(stars.intern(random_mu(rng, ell, 2)), v),
        };
    }
    if depth == 0 {
        return PostFormula::Const(rng.gen());
    }
    let choice = if scope.is_empty() {
        rng.gen_range(5..7)
    } else {
        rng.gen_range(0..7)
    };
    let mut sub = |rng: &mut R, scope: &mut Vec<String>| Box::new(random_body(rng, ell, depth - 1, scope, stars));
    match choice {
        0 => PostFormula::Not(sub(rng, scope)),
        1 => PostFormula::And(sub(rng, scope), sub(rng, scope)),
        2 => PostFormula::Or(sub(rng, scope), sub(rng, scope)),
        3 => PostFormula::Implies(sub(rng, scope), sub(rng, scope)),
        4 => PostFormula::Iff(sub(rng, scope), sub(rng, scope)),
        _ => {
            // occasionally shadow an existing name
            let name = VAR_NAMES[rng.gen_range(0..VAR_NAMES.len())].to_string();
            scope.push(name.clone());
            let body = sub(rng, scope);
            scope.pop();
            if choice == 5 {
                PostFormula::Forall(name, body)
            } else {
                PostFormula::Exists(name, body)
            }
        }
    }
}

/// A pseudorandom closed postulate over `p1..p_ell` with nesting depth at
/// most `depth`. Every `p_i` need not occur; `ell` of the result is the
/// largest index that does.
pub fn random_postulate<R: Rng + ?Sized>(rng: &mut R, ell: usize, depth: usize) -> Postulate {
    assert!(ell >= 1);
    let mut stars = StarTable::default();
    let body = random_body(rng, ell, depth, &mut Vec::new(), &mut stars);
    Postulate::new(stars.into_mus(), body).expect("generator produces sentences")
}

/// Renames every bound variable to a fresh name; the result is alpha-equivalent.
pub fn alpha_rename(p: &Postulate) -> Postulate {
    fn go(f: &PostFormula, map: &mut Vec<(String, String)>, counter: &mut usize) -> PostFormula {
        let sub = |v: &String, map: &Vec<(String, String)>| {
            map.iter()
                .rev()
                .find(|(old, _)| old == v)
                .map(|(_, new)| new.clone())
                .unwrap_or_else(|| v.clone())
        };
        match f {
            PostFormula::Const(c) => PostFormula::Const(*c),
            PostFormula::Eq(a, b) => PostFormula::Eq(sub(a, map), sub(b, map)),
            PostFormula::K(v) => PostFormula::K(sub(v, map)),
            PostFormula::Phi(i, v) => PostFormula::Phi(*i, sub(v, map)),
            PostFormula::Star(j, v) => PostFormula::Star(*j, sub(v, map)),
            PostFormula::Not(g) => PostFormula::not(go(g, map, counter)),
            PostFormula::And(a, b) => bin(PostFormula::And, go(a, map, counter), go(b, map, counter)),
            PostFormula::Or(a, b) => bin(PostFormula::Or, go(a, map, counter), go(b, map, counter)),
            PostFormula::Implies(a, b) => bin(PostFormula::Implies, go(a, map, counter), go(b, map, counter)),
            PostFormula::Iff(a, b) => bin(PostFormula::Iff, go(a, map, counter), go(b, map, counter)),
            PostFormula::Forall(v, g) | PostFormula::Exists(v, g) => {
                *counter += 1;
                let fresh = format!("v{counter}");
                map.push((v.clone(), fresh.clone()));
                let body = Box::new(go(g, map, counter));
                map.pop();
                if matches!(f, PostFormula::Forall(..)) {
                    PostFormula::Forall(fresh, body)
                } else {
                    PostFormula::Exists(fresh, body)
                }
            }
        }
    }
    let body = go(&p.body, &mut Vec::new(), &mut 0);
    Postulate {
        ell: p.ell,
        mus: p.mus.clone(),
        body,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::{all_preorders, PartialPreorder};
    use crate::revision::{FaithfulStructure, FnReviser, Labeling};
    use std::collections::HashSet;

    fn distinct_mus(p: &Postulate) -> bool {
        p.mus().iter().collect::<HashSet<_>>().len() == p.mus().len()
    }

    fn ms(n: usize, items: &[u32]) -> ModelSet {
        ModelSet::from_assignments(n, items.iter().copied()).unwrap()
    }

    /// Independent evaluator: re-derives every starred set at each atom.
    fn naive_eval(
        op: &dyn Reviser,
        kb: &ModelSet,
        p: &Postulate,
        phis: &[ModelSet],
        f: &PostFormula,
        env: &mut Vec<(String, u32)>,
    ) -> bool {
        let n = kb.vars();
        let val = |env: &Vec<(String, u32)>, v: &str| env.iter().rev().find(|(k, _)| k == v).unwrap().1;
        match f {
            PostFormula::Const(c) => *c,
            PostFormula::Eq(a, b) => val(env, a) == val(env, b),
            PostFormula::K(v) => kb.contains(val(env, v)),
            PostFormula::Phi(i, v) => phis[i - 1].contains(val(env, v)),
            PostFormula::Star(j, v) => {
                let mu = &p.mus()[*j];
                let arg =
                    ModelSet::from_assignments(n, (0..1u32 << n).filter(|&b| mu.holds(&|i| phis[i - 1].contains(b))))
                        .unwrap();
                op.revise(&arg).contains(val(env, v))
            }
            PostFormula::Not(g) => !naive_eval(op, kb, p, phis, g, env),
            PostFormula::And(a, b) => {
                let x = naive_eval(op, kb, p, phis, a, env);
                let y = naive_eval(op, kb, p, phis, b, env);
                x && y
            }
            PostFormula::Or(a, b) => {
                let x = naive_eval(op, kb, p, phis, a, env);
                let y = naive_eval(op, kb, p, phis, b, env);
                x || y
            }
            PostFormula::Implies(a, b) => {
                let x = naive_eval(op, kb, p, phis, a, env);
                let y = naive_eval(op, kb, p, phis, b, env);
                !x || y
            }
            PostFormula::Iff(a, b) => naive_eval(op, kb, p, phis, a, env) == naive_eval(op, kb, p, phis, b, env),
            PostFormula::Forall(v, g) => (0..1u32 << n).all(|a| {
                env.push((v.clone(), a));
                let r = naive_eval(op, kb, p, phis, g, env);
                env.pop();
                r
            }),
            PostFormula::Exists(v, g) => (0..1u32 << n).any(|a| {
                env.push((v.clone(), a));
                let r = naive_eval(op, kb, p, phis, g, env);
                env.pop();
                r
            }),
        }
    }

    fn regular_structures() -> Vec<FaithfulStructure> {
        all_preorders(4)
            .into_iter()
            .filter(PartialPreorder::is_regular)
            .flat_map(|r| Labeling::all(2).map(move |t| FaithfulStructure::from_regular(r.clone(), t).unwrap()))
            .collect()
    }

    #[test]
    fn parse_builtins() {
        let success = builtin("agm-success").unwrap();
        assert_eq!((success.ell(), success.mus().len()), (1, 1));
        let sub = builtin("agm-subexpansion").unwrap();
        assert_eq!(sub.ell(), 2);
        assert_eq!(
            sub.mus(),
            &[Mu::Phi(1), Mu::And(Box::new(Mu::Phi(1)), Box::new(Mu::Phi(2)))]
        );
        assert_eq!(parse_postulate(&sub.to_string()).unwrap(), sub);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_postulate("forall x. Kstar[Kstar[p1]](x)"),
            Err(PostulateError::NestedStar { pos: 16 })
        ));
        assert!(matches!(
            parse_postulate("forall x. Kstar[K](x)"),
            Err(PostulateError::NestedStar { .. })
        ));
        assert_eq!(parse_postulate("K(x)"), Err(PostulateError::FreeVariable("x".into())));
        assert!(matches!(
            parse_postulate("forall x. Q(x)"),
            Err(PostulateError::Parse(_))
        ));
        assert!(matches!(
            parse_postulate("forall x K(x)"),
            Err(PostulateError::Parse(_))
        ));
        assert!(matches!(
            parse_postulate("forall x. p10(x)"),
            Err(PostulateError::Parse(_))
        ));
        assert!(matches!(builtin("agm-nope"), Err(PostulateError::UnknownBuiltin(_))));
    }

    #[test]
    fn equality_and_scoping() {
        let p = parse_postulate("forall x. exists y. x = y & (forall x. x = x)").unwrap();
        assert_eq!(p.ell(), 0);
        let op = FnReviser::new(1, |phi: &ModelSet| phi.clone());
        assert!(eval_instance(&op, &ModelSet::full(1), &p, &[]).unwrap());
        // syntactic dedup of starred arguments
        let q = parse_postulate("forall x. Kstar[p1 & p2](x) -> Kstar[p1 & p2](x) | Kstar[p2 & p1](x)").unwrap();
        assert_eq!(q.mus().len(), 2);
    }

    #[test]
    fn eval_examples() {
        let success = builtin("agm-success").unwrap();
        let sub = builtin("agm-subexpansion").unwrap();
        let f = FaithfulStructure::from_regular(PartialPreorder::chain(4), Labeling::identity(2)).unwrap();
        for mask in 1..16 {
            let phi = ModelSet::from_mask(2, mask);
            assert!(eval_instance(&f, f.kb(), &success, &[phi]).unwrap());
        }
        let empty_op = FnReviser::new(2, |_: &ModelSet| ModelSet::empty(2));
        assert!(!eval_instance(&empty_op, &ms(2, &[0]), &success, &[ms(2, &[1])]).unwrap());
        // op(|p1|) = {0} misses |p1| & |p2| = {1}: antecedent false
        let phis = [ms(2, &[0, 1]), ms(2, &[1])];
        assert_eq!(f.revise(&phis[0]), ms(2, &[0]));
        assert!(eval_instance(&f, f.kb(), &sub, &phis).unwrap());
        assert!(matches!(
            eval_instance(&f, f.kb(), &sub, &phis[..1]),
            Err(PostulateError::ArityMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn minimization_and_builtins_exhaustively() {
        let success = builtin("agm-success").unwrap();
        let consistent_success =
            parse_postulate("(exists x. K(x)) & (exists x. p1(x)) -> (exists x. Kstar[p1](x))").unwrap();
        let sub = builtin("agm-subexpansion").unwrap();
        for f in regular_structures() {
            // revising by an unsatisfiable formula yields the empty set
            let v1 = satisfies(&f, f.kb(), &success, SearchMode::Exhaustive).unwrap();
            assert!(!v1.holds);
            assert_eq!(v1.checked, 1);
            assert_eq!(v1.counterexample, Some(vec![ModelSet::empty(2)]));
            let v2 = satisfies(&f, f.kb(), &consistent_success, SearchMode::Exhaustive).unwrap();
            assert!(v2.holds);
            assert_eq!(v2.checked, 16);
            let total = (0..4).all(|a| (0..4).all(|b| f.order().leq(a, b) || f.order().leq(b, a)));
            if total {
                let v4 = satisfies(&f, f.kb(), &sub, SearchMode::Exhaustive).unwrap();
                assert!(v4.holds);
                assert_eq!(v4.checked, 256);
            }
        }
    }

    #[test]
    fn subexpansion_fails_over_incomparable_elements() {
        // 0 below everything, 3 < 2, 1 incomparable to 2 and 3
        let r = PartialPreorder::from_pairs(4, [(0, 1), (0, 2), (0, 3), (3, 2)]).unwrap();
        let f = FaithfulStructure::from_regular(r, Labeling::identity(2)).unwrap();
        let sub = builtin("agm-subexpansion").unwrap();
        let phis = [ms(2, &[1, 2, 3]), ms(2, &[1, 2])];
        assert_eq!(f.revise(&phis[0]), ms(2, &[1, 3]));
        assert_eq!(f.revise(&ms(2, &[1, 2])), ms(2, &[1, 2]));
        assert!(!eval_instance(&f, f.kb(), &sub, &phis).unwrap());
        assert!(!satisfies(&f, f.kb(), &sub, SearchMode::Exhaustive).unwrap().holds);
    }

    #[test]
    fn identity_operator_counterexample() {
        let kb = ms(2, &[0]);
        let identity = FnReviser::new(2, |phi: &ModelSet| phi.clone());
        let sub = builtin("agm-subexpansion").unwrap();
        assert!(satisfies(&identity, &kb, &sub, SearchMode::Exhaustive).unwrap().holds);
        let probe = parse_postulate("forall x. Kstar[true](x) <-> K(x)").unwrap();
        assert_eq!(probe.ell(), 0);
        let v = satisfies(&identity, &kb, &probe, SearchMode::Exhaustive).unwrap();
        assert!(!v.holds);
        assert_eq!(v.counterexample, Some(vec![]));
        // with a symbol: first failing tuple in lexicographic mask order
        let probe1 = parse_postulate("forall x. Kstar[p1](x) -> K(x)").unwrap();
        let v = satisfies(&identity, &kb, &probe1, SearchMode::Exhaustive).unwrap();
        assert_eq!(v.counterexample, Some(vec![ModelSet::from_mask(2, 2)]));
        assert_eq!(v.checked, 3);
    }

    #[test]
    fn search_space_limit() {
        let p = parse_postulate("forall x. p1(x) | p2(x)").unwrap();
        let f = FaithfulStructure::from_regular(PartialPreorder::chain(16), Labeling::identity(4)).unwrap();
        assert!(matches!(
            satisfies(&f, f.kb(), &p, SearchMode::Exhaustive),
            Err(PostulateError::SearchSpaceTooLarge { log2: 32 })
        ));
        let v = satisfies(&f, f.kb(), &p, SearchMode::Sample { count: 50, seed: 3 }).unwrap();
        assert!(!v.holds);
        let again = satisfies(&f, f.kb(), &p, SearchMode::Sample { count: 50, seed: 3 }).unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn tuple_decoding_is_lexicographic() {
        assert_eq!(decode_tuple(0x12, 4, 2), vec![1, 2]);
        assert_eq!(decode_tuple(0x3f, 4, 2), vec![3, 15]);
        assert_eq!(decode_tuple(5, 4, 0), Vec::<u64>::new());
    }

    #[test]
    fn agrees_with_naive_evaluator_on_random_postulates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let structures = regular_structures();
        let weird = FnReviser::new(2, |phi: &ModelSet| {
            ModelSet::from_mask(2, phi.mask().unwrap().rotate_left(1) & 0xf)
        });
        for round in 0..300 {
            let p = random_postulate(&mut rng, 2, 4);
            assert!(distinct_mus(&p));
            let f = &structures[rng.gen_range(0..structures.len())];
            let op: &dyn Reviser = if round % 3 == 0 { &weird } else { f };
            let kb = f.kb();
            let ell = p.ell();
            for _ in 0..4 {
                let phis: Vec<ModelSet> = (0..ell).map(|_| ModelSet::random(2, &mut rng)).collect();
                let fast = eval_instance(op, kb, &p, &phis).unwrap();
                let slow = naive_eval(op, kb, &p, &phis, p.body(), &mut Vec::new());
                assert_eq!(fast, slow, "{p}");
                let renamed = alpha_rename(&p);
                assert_eq!(eval_instance(op, kb, &renamed, &phis).unwrap(), fast);
                let doubled =
                    Postulate::new(p.mus().to_vec(), PostFormula::not(PostFormula::not(p.body().clone()))).unwrap();
                assert_eq!(eval_instance(op, kb, &doubled, &phis).unwrap(), fast);
            }
            assert_eq!(parse_postulate(&p.to_string()).unwrap(), p, "{p}");
        }
    }

    #[test]
    fn exhaustive_verdict_matches_naive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let structures = regular_structures();
        for _ in 0..40 {
            let p = random_postulate(&mut rng, 2, 3);
            let f = &structures[rng.gen_range(0..structures.len())];
            let verdict = satisfies(f, f.kb(), &p, SearchMode::Exhaustive).unwrap();
            let ell = p.ell();
            let mut first = None;
            for i in 0..1u64 << (4 * ell) {
                let phis: Vec<ModelSet> = decode_tuple(i, 4, ell)
                    .into_iter()
                    .map(|m| ModelSet::from_mask(2, m))
                    .collect();
                if !naive_eval(f, f.kb(), &p, &phis, p.body(), &mut Vec::new()) {
                    first = Some(phis);
                    break;
                }
            }
            assert_eq!(verdict.holds, first.is_none());
            assert_eq!(verdict.counterexample, first);
        }
    }
}
