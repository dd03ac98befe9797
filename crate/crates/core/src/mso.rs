//! First-order formulas over `<=`, `=` and unary set symbols `A1..Al`, the
//! translation of postulates into them, and brute-force universal MSO
//! evaluation over finite partial preorders.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::logic::ModelSet;
use crate::order::{ElementSet, PartialPreorder};
use crate::postulate::{
    decode_tuple, eval_instance, first_failure, tuple_space_log2, Mu, PostFormula, Postulate, PostulateError,
    SearchMode, Verdict, EXHAUSTIVE_LOG2_LIMIT,
};
use crate::revision::{operator_table, FaithfulStructure, RevisionError};
use crate::syntax::{indexed_name, is_element_variable, Cursor, ParseError, Tok};

/// Placeholder variable of a set-valued `min[...]` argument written with bare
/// set symbols, e.g. `min[A1 & A2](y)`.
pub const HOLE: &str = "_";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MsoError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("free variable `{0}` in sentence")]
    FreeVariable(String),
    #[error("set symbol A{index} exceeds the {ell} declared set variables")]
    SetIndexOutOfRange { index: usize, ell: usize },
    #[error("formula uses {needed} sets but the structure interprets {got}")]
    ArityMismatch { needed: usize, got: usize },
    #[error("argument of min[...] has free variables other than `{0}`")]
    BadMinArgument(String),
    #[error("exhaustive search needs 2^{log2} tuples (limit 2^{EXHAUSTIVE_LOG2_LIMIT}); use sampling")]
    SearchSpaceTooLarge { log2: u64 },
    #[error("set {index} has capacity {got}, structure has {expected} elements")]
    SetOutOfRange { index: usize, expected: usize, got: usize },
    #[error(transparent)]
    Postulate(#[from] PostulateError),
    #[error(transparent)]
    Revision(#[from] RevisionError),
}

/// FO formula. `Lt`, `Min` and `MinOf` are macros; [`FoFormula::expand`]
/// rewrites them into `Leq`, connectives and quantifiers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FoFormula {
    Const(bool),
    Leq(String, String),
    Lt(String, String),
    Eq(String, String),
    Set(usize, String),
    /// `min(x)`: no element is strictly below `x`.
    Min(String),
    /// `min[nu](arg)`: `arg` is a minimal element among those satisfying `nu`,
    /// a formula in the single free variable `var`.
    MinOf {
        var: String,
        nu: Box<FoFormula>,
        arg: String,
    },
    Not(Box<FoFormula>),
    And(Box<FoFormula>, Box<FoFormula>),
    Or(Box<FoFormula>, Box<FoFormula>),
    Implies(Box<FoFormula>, Box<FoFormula>),
    Iff(Box<FoFormula>, Box<FoFormula>),
    Forall(String, Box<FoFormula>),
    Exists(String, Box<FoFormula>),
}

fn boxed(ctor: fn(Box<FoFormula>, Box<FoFormula>) -> FoFormula, a: FoFormula, b: FoFormula) -> FoFormula {
    ctor(Box::new(a), Box::new(b))
}

impl FoFormula {
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: FoFormula) -> Self {
        FoFormula::Not(Box::new(f))
    }

    pub fn and(a: FoFormula, b: FoFormula) -> Self {
        boxed(FoFormula::And, a, b)
    }

    pub fn implies(a: FoFormula, b: FoFormula) -> Self {
        boxed(FoFormula::Implies, a, b)
    }

    pub fn forall(v: &str, body: FoFormula) -> Self {
        FoFormula::Forall(v.to_string(), Box::new(body))
    }

    pub fn exists(v: &str, body: FoFormula) -> Self {
        FoFormula::Exists(v.to_string(), Box::new(body))
    }

    pub fn leq(a: &str, b: &str) -> Self {
        FoFormula::Leq(a.to_string(), b.to_string())
    }

    pub fn set(i: usize, v: &str) -> Self {
        FoFormula::Set(i, v.to_string())
    }

    fn children(&self) -> Vec<&FoFormula> {
        match self {
            FoFormula::Not(f) | FoFormula::Forall(_, f) | FoFormula::Exists(_, f) => vec![f],
            FoFormula::MinOf { nu, .. } => vec![nu],
            FoFormula::And(a, b) | FoFormula::Or(a, b) | FoFormula::Implies(a, b) | FoFormula::Iff(a, b) => vec![a, b],
            _ => vec![],
        }
    }

    /// Largest set index used (0 if none).
    pub fn max_set(&self) -> usize {
        match self {
            FoFormula::Set(i, _) => *i,
            _ => self.children().into_iter().map(FoFormula::max_set).max().unwrap_or(0),
        }
    }

    /// Free variables in order of first occurrence.
    pub fn free_vars(&self) -> Vec<String> {
        fn go(f: &FoFormula, bound: &mut Vec<String>, out: &mut Vec<String>) {
            let mut note = |v: &String, bound: &Vec<String>| {
                if !bound.contains(v) && !out.contains(v) {
                    out.push(v.clone());
                }
            };
            match f {
                FoFormula::Const(_) => {}
                FoFormula::Leq(a, b) | FoFormula::Lt(a, b) | FoFormula::Eq(a, b) => {
                    note(a, bound);
                    note(b, bound);
                }
                FoFormula::Set(_, v) | FoFormula::Min(v) => note(v, bound),
                FoFormula::MinOf { var, nu, arg } => {
                    note(arg, bound);
                    bound.push(var.clone());
                    go(nu, bound, out);
                    bound.pop();
                }
                FoFormula::Forall(v, body) | FoFormula::Exists(v, body) => {
                    bound.push(v.clone());
                    go(body, bound, out);
                    bound.pop();
                }
                _ => {
                    for c in f.children() {
                        go(c, bound, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Every variable name occurring anywhere, free or bound.
    fn all_vars(&self, out: &mut Vec<String>) {
        let mut note = |v: &String| {
            if !out.contains(v) {
                out.push(v.clone());
            }
        };
        match self {
            FoFormula::Leq(a, b) | FoFormula::Lt(a, b) | FoFormula::Eq(a, b) => {
                note(a);
                note(b);
            }
            FoFormula::Set(_, v) | FoFormula::Min(v) => note(v),
            FoFormula::MinOf { var, arg, .. } => {
                note(var);
                note(arg);
            }
            FoFormula::Forall(v, _) | FoFormula::Exists(v, _) => note(v),
            _ => {}
        }
        for c in self.children() {
            c.all_vars(out);
        }
    }

    /// Capture-avoiding substitution of variable `to` for free `from`.
    pub fn substitute(&self, from: &str, to: &str) -> FoFormula {
        let rename = |v: &String| if v == from { to.to_string() } else { v.clone() };
        match self {
            FoFormula::Const(c) => FoFormula::Const(*c),
            FoFormula::Leq(a, b) => FoFormula::Leq(rename(a), rename(b)),
            FoFormula::Lt(a, b) => FoFormula::Lt(rename(a), rename(b)),
            FoFormula::Eq(a, b) => FoFormula::Eq(rename(a), rename(b)),
            FoFormula::Set(i, v) => FoFormula::Set(*i, rename(v)),
            FoFormula::Min(v) => FoFormula::Min(rename(v)),
            FoFormula::Not(f) => FoFormula::not(f.substitute(from, to)),
            FoFormula::And(a, b) => boxed(FoFormula::And, a.substitute(from, to), b.substitute(from, to)),
            FoFormula::Or(a, b) => boxed(FoFormula::Or, a.substitute(from, to), b.substitute(from, to)),
            FoFormula::Implies(a, b) => boxed(FoFormula::Implies, a.substitute(from, to), b.substitute(from, to)),
            FoFormula::Iff(a, b) => boxed(FoFormula::Iff, a.substitute(from, to), b.substitute(from, to)),
            FoFormula::MinOf { var, nu, arg } => {
                let (var, nu) = self.bind_avoiding(var, nu, from, to);
                FoFormula::MinOf {
                    var,
                    nu: Box::new(nu),
                    arg: rename(arg),
                }
            }
            FoFormula::Forall(v, body) | FoFormula::Exists(v, body) => {
                let (v, body) = self.bind_avoiding(v, body, from, to);
                if matches!(self, FoFormula::Forall(..)) {
                    FoFormula::Forall(v, Box::new(body))
                } else {
                    FoFormula::Exists(v, Box::new(body))
                }
            }
        }
    }

    /// Substitutes under a binder of `v`, renaming `v` if it would capture `to`.
    fn bind_avoiding(&self, v: &str, body: &FoFormula, from: &str, to: &str) -> (String, FoFormula) {
        if v == from {
            return (v.to_string(), body.clone());
        }
        if v == to && body.free_vars().iter().any(|w| w == from) {
            let mut taken = Vec::new();
            body.all_vars(&mut taken);
            taken.push(to.to_string());
            taken.push(from.to_string());
            let fresh = fresh_variable(&taken);
            let body = body.substitute(v, &fresh).substitute(from, to);
            return (fresh, body);
        }
        (v.to_string(), body.substitute(from, to))
    }

    /// Rewrites `<`, `min` and `min[...]` into primitive syntax.
    pub fn expand(&self) -> FoFormula {
        match self {
            FoFormula::Lt(a, b) => FoFormula::and(FoFormula::leq(a, b), FoFormula::not(FoFormula::leq(b, a))),
            FoFormula::Min(x) => {
                let y = fresh_variable(std::slice::from_ref(x));
                FoFormula::forall(&y, FoFormula::not(FoFormula::Lt(y.clone(), x.clone()).expand()))
            }
            FoFormula::MinOf { var, nu, arg } => {
                let nu = nu.expand();
                let mut taken = vec![arg.clone(), var.clone()];
                nu.all_vars(&mut taken);
                let y = fresh_variable(&taken);
                FoFormula::and(
                    nu.substitute(var, arg),
                    FoFormula::forall(
                        &y,
                        FoFormula::implies(
                            nu.substitute(var, &y),
                            FoFormula::not(FoFormula::Lt(y.clone(), arg.clone()).expand()),
                        ),
                    ),
                )
            }
            FoFormula::Const(_) | FoFormula::Leq(..) | FoFormula::Eq(..) | FoFormula::Set(..) => self.clone(),
            FoFormula::Not(f) => FoFormula::not(f.expand()),
            FoFormula::And(a, b) => boxed(FoFormula::And, a.expand(), b.expand()),
            FoFormula::Or(a, b) => boxed(FoFormula::Or, a.expand(), b.expand()),
            FoFormula::Implies(a, b) => boxed(FoFormula::Implies, a.expand(), b.expand()),
            FoFormula::Iff(a, b) => boxed(FoFormula::Iff, a.expand(), b.expand()),
            FoFormula::Forall(v, f) => FoFormula::Forall(v.clone(), Box::new(f.expand())),
            FoFormula::Exists(v, f) => FoFormula::Exists(v.clone(), Box::new(f.expand())),
        }
    }

    pub fn has_macros(&self) -> bool {
        matches!(self, FoFormula::Lt(..) | FoFormula::Min(_) | FoFormula::MinOf { .. })
            || self.children().into_iter().any(FoFormula::has_macros)
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, top: bool) -> fmt::Result {
        let (open, close) = if top { ("", "") } else { ("(", ")") };
        let hole_name = |v: &String| v == HOLE;
        match self {
            FoFormula::Const(true) => f.write_str("true"),
            FoFormula::Const(false) => f.write_str("false"),
            FoFormula::Leq(a, b) => write!(f, "{open}{a} <= {b}{close}"),
            FoFormula::Lt(a, b) => write!(f, "{open}{a} < {b}{close}"),
            FoFormula::Eq(a, b) => write!(f, "{open}{a} = {b}{close}"),
            FoFormula::Set(i, v) if hole_name(v) => write!(f, "A{i}"),
            FoFormula::Set(i, v) => write!(f, "A{i}({v})"),
            FoFormula::Min(v) => write!(f, "min({v})"),
            FoFormula::MinOf { var, nu, arg } => {
                f.write_str("min[")?;
                if !hole_name(var) {
                    write!(f, "{var}. ")?;
                }
                nu.write(f, true)?;
                write!(f, "]({arg})")
            }
            FoFormula::Not(inner) => {
                f.write_str("!")?;
                inner.write(f, false)
            }
            FoFormula::Forall(v, body) | FoFormula::Exists(v, body) => {
                let q = if matches!(self, FoFormula::Forall(..)) {
                    "forall"
                } else {
                    "exists"
                };
                write!(f, "{open}{q} {v}. ")?;
                body.write(f, false)?;
                f.write_str(close)
            }
            FoFormula::And(a, b) | FoFormula::Or(a, b) | FoFormula::Implies(a, b) | FoFormula::Iff(a, b) => {
                let op = match self {
                    FoFormula::And(..) => "&",
                    FoFormula::Or(..) => "|",
                    FoFormula::Implies(..) => "->",
                    _ => "<->",
                };
                f.write_str(open)?;
                a.write(f, false)?;
                write!(f, " {op} ")?;
                b.write(f, false)?;
                f.write_str(close)
            }
        }
    }
}

/// Fully parenthesized except at the outermost level; re-parses to the same tree.
impl fmt::Display for FoFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, true)
    }
}

/// First of `y, z, u, v, w, y1, y2, ...` not in `taken`.
pub fn fresh_variable(taken: &[String]) -> String {
    ["y", "z", "u", "v", "w"]
        .iter()
        .map(|s| s.to_string())
        .chain((1..).map(|i| format!("y{i}")))
        .find(|c| !taken.contains(c))
        .expect("infinite supply")
}

/// A closed FO sentence over `<=`, `=` and `A1..Al`, stored macro-expanded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoSentence {
    ell: usize,
    formula: FoFormula,
}

impl FoSentence {
    pub fn new(ell: usize, formula: &FoFormula) -> Result<Self, MsoError> {
        check_min_arguments(formula)?;
        if let Some(v) = formula.free_vars().into_iter().next() {
            return Err(MsoError::FreeVariable(v));
        }
        let index = formula.max_set();
        if index > ell {
            return Err(MsoError::SetIndexOutOfRange { index, ell });
        }
        Ok(FoSentence {
            ell,
            formula: formula.expand(),
        })
    }

    /// Like [`FoSentence::new`] with `ell` the largest set index used.
    pub fn from_formula(formula: &FoFormula) -> Result<Self, MsoError> {
        Self::new(formula.max_set(), formula)
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn formula(&self) -> &FoFormula {
        &self.formula
    }
}

impl fmt::Display for FoSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.formula.fmt(f)
    }
}

fn check_min_arguments(f: &FoFormula) -> Result<(), MsoError> {
    if let FoFormula::MinOf { var, nu, .. } = f {
        if nu.free_vars().iter().any(|v| v != var) {
            return Err(MsoError::BadMinArgument(var.clone()));
        }
    }
    f.children().into_iter().try_for_each(check_min_arguments)
}

/// `min[nu](x)` expanded: `nu(x) & forall y. (nu(y) -> !(y < x))`.
pub fn min_macro(var: &str, nu: &FoFormula, arg: &str) -> Result<FoFormula, MsoError> {
    let f = FoFormula::MinOf {
        var: var.to_string(),
        nu: Box::new(nu.clone()),
        arg: arg.to_string(),
    };
    check_min_arguments(&f)?;
    Ok(f.expand())
}

/// `forall A1 ... Al. body`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UmsoSentence {
    ell: usize,
    body: FoSentence,
}

impl UmsoSentence {
    pub fn new(ell: usize, body: &FoFormula) -> Result<Self, MsoError> {
        Ok(UmsoSentence {
            ell,
            body: FoSentence::new(ell, body)?,
        })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn body(&self) -> &FoSentence {
        &self.body
    }

    /// The body negated, for reading `exists A. psi` as `!forall A. !psi`.
    pub fn negated(&self) -> UmsoSentence {
        UmsoSentence {
            ell: self.ell,
            body: FoSentence {
                ell: self.ell,
                formula: FoFormula::not(self.body.formula.clone()),
            },
        }
    }
}

impl fmt::Display for UmsoSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("forallsets")?;
        for i in 1..=self.ell {
            write!(f, " A{i}")?;
        }
        write!(f, ". {}", self.body)
    }
}

pub fn parse_fo(text: &str) -> Result<FoFormula, MsoError> {
    let mut p = FoParser {
        cur: Cursor::new(text)?,
        hole: false,
    };
    let f = p.iff()?;
    p.cur.expect_end()?;
    Ok(f)
}

/// Parses `forallsets A1 A2. body` (also `A1, A2` or `A1..A2`), or a plain FO
/// sentence as the case `l = 0`.
pub fn parse_umso(text: &str) -> Result<UmsoSentence, MsoError> {
    let mut p = FoParser {
        cur: Cursor::new(text)?,
        hole: false,
    };
    let mut ell = 0;
    if *p.cur.peek() == Tok::Ident("forallsets".into()) {
        p.cur.bump();
        loop {
            let (name, pos) = p.cur.expect_ident("a set variable A1, A2, ...")?;
            let first =
                set_index(&name).ok_or_else(|| ParseError::new(pos, format!("`{name}` is not a set variable")))?;
            let last = if *p.cur.peek() == Tok::Dot && *p.cur.peek_at(1) == Tok::Dot {
                p.cur.bump();
                p.cur.bump();
                let (name, pos) = p.cur.expect_ident("a set variable")?;
                set_index(&name).ok_or_else(|| ParseError::new(pos, format!("`{name}` is not a set variable")))?
            } else {
                first
            };
            if first != ell + 1 || last < first {
                return Err(ParseError::new(pos, "set variables must be A1, A2, ... in order").into());
            }
            ell = last;
            p.cur.eat(&Tok::Comma);
            if p.cur.eat(&Tok::Dot) {
                break;
            }
        }
    }
    let body = p.iff()?;
    p.cur.expect_end()?;
    UmsoSentence::new(ell, &body)
}

fn set_index(name: &str) -> Option<usize> {
    indexed_name(name, "A")
}

struct FoParser {
    cur: Cursor,
    /// Inside `min[...]`: bare `Ai` means `Ai` of the placeholder variable.
    hole: bool,
}

impl FoParser {
    fn iff(&mut self) -> Result<FoFormula, MsoError> {
        let mut lhs = self.implies()?;
        while self.cur.eat(&Tok::DoubleArrow) {
            lhs = boxed(FoFormula::Iff, lhs, self.implies()?);
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<FoFormula, MsoError> {
        let lhs = self.or()?;
        if self.cur.eat(&Tok::Arrow) {
            return Ok(boxed(FoFormula::Implies, lhs, self.implies()?));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<FoFormula, MsoError> {
        let mut lhs = self.and()?;
        while self.cur.eat(&Tok::Pipe) {
            lhs = boxed(FoFormula::Or, lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<FoFormula, MsoError> {
        let mut lhs = self.unary()?;
        while self.cur.eat(&Tok::Amp) {
            lhs = boxed(FoFormula::And, lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn variable(&mut self) -> Result<String, MsoError> {
        let (name, pos) = self.cur.expect_ident("a variable")?;
        if !is_element_variable(&name) || name == "min" {
            return Err(ParseError::new(pos, format!("`{name}` is not a variable name")).into());
        }
        Ok(name)
    }

    fn variable_arg(&mut self) -> Result<String, MsoError> {
        self.cur.expect(&Tok::LParen)?;
        let v = self.variable()?;
        self.cur.expect(&Tok::RParen)?;
        Ok(v)
    }

    fn unary(&mut self) -> Result<FoFormula, MsoError> {
        if self.cur.eat(&Tok::Bang) {
            return Ok(FoFormula::not(self.unary()?));
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
                    FoFormula::Forall(v, body)
                } else {
                    FoFormula::Exists(v, body)
                })
            }
            "true" | "false" => {
                self.cur.bump();
                Ok(FoFormula::Const(name == "true"))
            }
            "min" => {
                self.cur.bump();
                if !self.cur.eat(&Tok::LBrack) {
                    return Ok(FoFormula::Min(self.variable_arg()?));
                }
                let lambda = matches!(self.cur.peek(), Tok::Ident(v) if is_element_variable(v) && v != "min")
                    && *self.cur.peek_at(1) == Tok::Dot;
                let var = if lambda {
                    let v = self.variable()?;
                    self.cur.bump();
                    v
                } else {
                    HOLE.to_string()
                };
                let saved = self.hole;
                self.hole = !lambda;
                let nu = self.iff()?;
                self.hole = saved;
                self.cur.expect(&Tok::RBrack)?;
                Ok(FoFormula::MinOf {
                    var,
                    nu: Box::new(nu),
                    arg: self.variable_arg()?,
                })
            }
            _ => {
                if let Some(i) = set_index(&name) {
                    self.cur.bump();
                    if self.hole && *self.cur.peek() != Tok::LParen {
                        return Ok(FoFormula::Set(i, HOLE.to_string()));
                    }
                    return Ok(FoFormula::Set(i, self.variable_arg()?));
                }
                if !is_element_variable(&name) {
                    return Err(ParseError::new(pos, format!("unknown atom `{name}`")).into());
                }
                let a = self.variable()?;
                let ctor = match self.cur.bump() {
                    Tok::Le => FoFormula::Leq,
                    Tok::Lt => FoFormula::Lt,
                    Tok::Eq => FoFormula::Eq,
                    _ => return Err(ParseError::new(pos, "expected `<=`, `<` or `=` after a variable").into()),
                };
                Ok(ctor(a, self.variable()?))
            }
        }
    }
}

/// A finite structure for FO evaluation: a binary relation read as `<=`
/// and unary relations read as `A1..Ak`.
pub trait FoModel {
    fn size(&self) -> usize;
    fn leq(&self, a: usize, b: usize) -> bool;
    fn set_count(&self) -> usize;
    /// Membership of `a` in `A_index` (1-based).
    fn in_set(&self, index: usize, a: usize) -> bool;
}

/// A partial preorder with subsets `A1..Al` of its elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedStructure {
    order: PartialPreorder,
    sets: Vec<ElementSet>,
}

impl ExtendedStructure {
    pub fn new(order: PartialPreorder, sets: Vec<ElementSet>) -> Result<Self, MsoError> {
        for (i, s) in sets.iter().enumerate() {
            if s.len() != order.size() {
                return Err(MsoError::SetOutOfRange {
                    index: i + 1,
                    expected: order.size(),
                    got: s.len(),
                });
            }
        }
        Ok(ExtendedStructure { order, sets })
    }

    pub fn order(&self) -> &PartialPreorder {
        &self.order
    }

    pub fn sets(&self) -> &[ElementSet] {
        &self.sets
    }
}

impl FoModel for ExtendedStructure {
    fn size(&self) -> usize {
        self.order.size()
    }

    fn leq(&self, a: usize, b: usize) -> bool {
        self.order.leq(a, b)
    }

    fn set_count(&self) -> usize {
        self.sets.len()
    }

    fn in_set(&self, index: usize, a: usize) -> bool {
        self.sets[index - 1].contains(a)
    }
}

/// A preorder with borrowed sets, for tuple scans without cloning the order.
struct BorrowedStructure<'a> {
    order: &'a PartialPreorder,
    sets: &'a [ElementSet],
}

impl FoModel for BorrowedStructure<'_> {
    fn size(&self) -> usize {
        self.order.size()
    }

    fn leq(&self, a: usize, b: usize) -> bool {
        self.order.leq(a, b)
    }

    fn set_count(&self) -> usize {
        self.sets.len()
    }

    fn in_set(&self, index: usize, a: usize) -> bool {
        self.sets[index - 1].contains(a)
    }
}

/// Evaluates any formula, macros included, under `env` (innermost binding last).
pub fn eval_formula(m: &dyn FoModel, f: &FoFormula, env: &mut Vec<(String, usize)>) -> bool {
    let val = |env: &Vec<(String, usize)>, v: &str| {
        env.iter()
            .rev()
            .find(|(name, _)| name == v)
            .map(|&(_, a)| a)
            .unwrap_or_else(|| panic!("unbound variable `{v}`"))
    };
    let lt = |a: usize, b: usize| m.leq(a, b) && !m.leq(b, a);
    match f {
        FoFormula::Const(c) => *c,
        FoFormula::Leq(a, b) => m.leq(val(env, a), val(env, b)),
        FoFormula::Lt(a, b) => lt(val(env, a), val(env, b)),
        FoFormula::Eq(a, b) => val(env, a) == val(env, b),
        FoFormula::Set(i, v) => m.in_set(*i, val(env, v)),
        FoFormula::Min(v) => {
            let x = val(env, v);
            (0..m.size()).all(|y| !lt(y, x))
        }
        FoFormula::MinOf { var, nu, arg } => {
            let x = val(env, arg);
            let holds_at = |a: usize, env: &mut Vec<(String, usize)>| {
                env.push((var.clone(), a));
                let r = eval_formula(m, nu, env);
                env.pop();
                r
            };
            holds_at(x, env) && (0..m.size()).all(|y| !(holds_at(y, env) && lt(y, x)))
        }
        FoFormula::Not(g) => !eval_formula(m, g, env),
        FoFormula::And(a, b) => eval_formula(m, a, env) && eval_formula(m, b, env),
        FoFormula::Or(a, b) => eval_formula(m, a, env) || eval_formula(m, b, env),
        FoFormula::Implies(a, b) => !eval_formula(m, a, env) || eval_formula(m, b, env),
        FoFormula::Iff(a, b) => eval_formula(m, a, env) == eval_formula(m, b, env),
        FoFormula::Forall(v, g) | FoFormula::Exists(v, g) => {
            let universal = matches!(f, FoFormula::Forall(..));
            for a in 0..m.size() {
                env.push((v.clone(), a));
                let r = eval_formula(m, g, env);
                env.pop();
                if r != universal {
                    return !universal;
                }
            }
            universal
        }
    }
}

pub fn eval_fo(m: &dyn FoModel, psi: &FoSentence) -> Result<bool, MsoError> {
    if psi.ell() > m.set_count() {
        return Err(MsoError::ArityMismatch {
            needed: psi.ell(),
            got: m.set_count(),
        });
    }
    Ok(eval_formula(m, psi.formula(), &mut Vec::new()))
}

fn hat(mu: &Mu) -> FoFormula {
    match mu {
        Mu::Const(c) => FoFormula::Const(*c),
        Mu::Phi(i) => FoFormula::set(*i, HOLE),
        Mu::Not(m) => FoFormula::not(hat(m)),
        Mu::And(a, b) => boxed(FoFormula::And, hat(a), hat(b)),
        Mu::Or(a, b) => boxed(FoFormula::Or, hat(a), hat(b)),
        Mu::Implies(a, b) => boxed(FoFormula::Implies, hat(a), hat(b)),
        Mu::Iff(a, b) => boxed(FoFormula::Iff, hat(a), hat(b)),
    }
}

/// The translated postulate before macro expansion: `K` becomes `min`, `p_i`
/// becomes `A_i` and `Kstar[mu]` becomes `min[mu with A_i for p_i]`.
pub fn translate_macros(p: &Postulate) -> FoFormula {
    fn go(p: &Postulate, f: &PostFormula) -> FoFormula {
        let rec = |g: &PostFormula| go(p, g);
        match f {
            PostFormula::Const(c) => FoFormula::Const(*c),
            PostFormula::Eq(a, b) => FoFormula::Eq(a.clone(), b.clone()),
            PostFormula::K(v) => FoFormula::Min(v.clone()),
            PostFormula::Phi(i, v) => FoFormula::Set(*i, v.clone()),
            PostFormula::Star(j, v) => FoFormula::MinOf {
                var: HOLE.to_string(),
                nu: Box::new(hat(&p.mus()[*j])),
                arg: v.clone(),
            },
            PostFormula::Not(g) => FoFormula::not(rec(g)),
            PostFormula::And(a, b) => boxed(FoFormula::And, rec(a), rec(b)),
            PostFormula::Or(a, b) => boxed(FoFormula::Or, rec(a), rec(b)),
            PostFormula::Implies(a, b) => boxed(FoFormula::Implies, rec(a), rec(b)),
            PostFormula::Iff(a, b) => boxed(FoFormula::Iff, rec(a), rec(b)),
            PostFormula::Forall(v, g) => FoFormula::Forall(v.clone(), Box::new(rec(g))),
            PostFormula::Exists(v, g) => FoFormula::Exists(v.clone(), Box::new(rec(g))),
        }
    }
    go(p, p.body())
}

/// The translated postulate over `<=, =, A1..Al`, macro-expanded.
pub fn translate(p: &Postulate) -> FoSentence {
    FoSentence::new(p.ell(), &translate_macros(p)).expect("translation of a sentence is a sentence")
}

/// `forall A1..Al. translate(p)`.
pub fn umso_of(p: &Postulate) -> UmsoSentence {
    UmsoSentence {
        ell: p.ell(),
        body: translate(p),
    }
}

/// The structure of `f` with `A_i` the preimage of `phis[i-1]`.
pub fn extension_of(f: &FaithfulStructure, phis: &[ModelSet]) -> Result<ExtendedStructure, MsoError> {
    let n = f.labeling().vars();
    for phi in phis {
        if phi.vars() != n {
            return Err(PostulateError::VariableMismatch {
                expected: n,
                got: phi.vars(),
            }
            .into());
        }
    }
    let sets = phis.iter().map(|phi| f.labeling().preimage(phi)).collect();
    ExtendedStructure::new(f.order().clone(), sets)
}

/// Whether the postulate instance and its translation on the extension agree.
pub fn check_translation_agreement(f: &FaithfulStructure, p: &Postulate, phis: &[ModelSet]) -> Result<bool, MsoError> {
    let table = operator_table(f)?;
    let direct = eval_instance(&table, f.kb(), p, phis)?;
    let translated = eval_fo(&extension_of(f, phis)?, &translate(p))?;
    Ok(direct == translated)
}

fn subset_from_mask(size: usize, mask: u64) -> ElementSet {
    let mut s = ElementSet::with_capacity(size);
    for a in 0..size {
        if mask >> a & 1 == 1 {
            s.insert(a);
        }
    }
    s
}

/// Universal MSO check: the body holds for every `l`-tuple of subsets
/// (exhaustive) or for `count` sampled tuples. The witness is the first
/// falsifying tuple in lexicographic bitmask order (bit `a` = element `a`).
pub fn eval_umso(
    order: &PartialPreorder,
    phi: &UmsoSentence,
    mode: SearchMode,
) -> Result<Verdict<Vec<ElementSet>>, MsoError> {
    let m = order.size();
    let ell = phi.ell();
    let body = phi.body().formula();
    let holds = |sets: &[ElementSet]| eval_formula(&BorrowedStructure { order, sets }, body, &mut Vec::new());
    match mode {
        SearchMode::Exhaustive => {
            let log2 = tuple_space_log2(m, ell);
            if log2 > u64::from(EXHAUSTIVE_LOG2_LIMIT) {
                return Err(MsoError::SearchSpaceTooLarge { log2 });
            }
            let tuple = |i: u64| -> Vec<ElementSet> {
                decode_tuple(i, m, ell)
                    .into_iter()
                    .map(|mask| subset_from_mask(m, mask))
                    .collect()
            };
            let total = 1u64 << log2;
            Ok(match first_failure(total, |i| holds(&tuple(i))) {
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
            for k in 0..count {
                let sets: Vec<ElementSet> = (0..ell)
                    .map(|_| {
                        let mut s = ElementSet::with_capacity(m);
                        for a in 0..m {
                            s.set(a, rng.gen_bool(0.5));
                        }
                        s
                    })
                    .collect();
                if !holds(&sets) {
                    return Ok(Verdict {
                        holds: false,
                        checked: k as u64 + 1,
                        counterexample: Some(sets),
                    });
                }
            }
            Ok(Verdict {
                holds: true,
                checked: count as u64,
                counterexample: None,
            })
        }
    }
}

/// Existential dual: subsets `A1..Al` making the body true, if any, found as
/// the falsifying tuple of the negated universal sentence.
pub fn find_sets(
    order: &PartialPreorder,
    phi: &UmsoSentence,
    mode: SearchMode,
) -> Result<Option<Vec<ElementSet>>, MsoError> {
    Ok(eval_umso(order, &phi.negated(), mode)?.counterexample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::{all_preorders, element_set};
    use crate::postulate::{builtin, parse_postulate, random_postulate, satisfies};
    use crate::revision::Labeling;

    const GOLDEN_SUBEXPANSION: &str = "(exists x. ((A1(x) & (forall y. (A1(y) -> !((y <= x) & !(x <= y))))) & A2(x))) -> (forall y. (((A1(y) & A2(y)) & (forall z. ((A1(z) & A2(z)) -> !((z <= y) & !(y <= z))))) -> ((A1(y) & (forall z. (A1(z) -> !((z <= y) & !(y <= z))))) & A2(y))))";

    fn structure(order: PartialPreorder, sets: &[&[usize]]) -> ExtendedStructure {
        let m = order.size();
        let sets = sets.iter().map(|s| element_set(m, s.iter().copied())).collect();
        ExtendedStructure::new(order, sets).unwrap()
    }

    fn holds(s: &ExtendedStructure, text: &str) -> bool {
        eval_fo(s, &FoSentence::from_formula(&parse_fo(text).unwrap()).unwrap()).unwrap()
    }

    /// Every subset tuple of every preorder on up to `max` elements.
    fn small_structures(max: usize, ell: usize) -> Vec<ExtendedStructure> {
        let mut out = Vec::new();
        for m in 1..=max {
            for r in all_preorders(m) {
                for i in 0..1u64 << (m * ell) {
                    let sets = decode_tuple(i, m, ell)
                        .into_iter()
                        .map(|mask| subset_from_mask(m, mask))
                        .collect();
                    out.push(ExtendedStructure::new(r.clone(), sets).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn min_macro_examples() {
        let nu = FoFormula::set(1, HOLE);
        let expanded = min_macro(HOLE, &nu, "x").unwrap();
        assert_eq!(
            expanded.to_string(),
            "A1(x) & (forall y. (A1(y) -> !((y <= x) & !(x <= y))))"
        );
        assert!(matches!(
            min_macro("v", &parse_fo("v <= w").unwrap(), "x"),
            Err(MsoError::BadMinArgument(_))
        ));
        // x occurs in nu: the fresh variable skips it
        let nu = parse_fo("v = v & A1(v)").unwrap();
        let e = min_macro("v", &nu, "y").unwrap();
        assert_eq!(
            e.to_string(),
            "((y = y) & A1(y)) & (forall z. (((z = z) & A1(z)) -> !((z <= y) & !(y <= z))))"
        );
    }

    #[test]
    fn substitution_avoids_capture() {
        let f = parse_fo("exists y. x <= y").unwrap();
        let g = f.substitute("x", "y");
        assert_eq!(g.to_string(), "exists z. (y <= z)");
        assert_eq!(f.substitute("y", "x"), f);
    }

    #[test]
    fn min_of_true_and_false() {
        for s in small_structures(4, 0) {
            let f = &mut Vec::new();
            for x in 0..s.size() {
                f.push(("x".to_string(), x));
                let plain = eval_formula(&s, &FoFormula::Min("x".into()), f);
                let top = min_macro(HOLE, &FoFormula::Const(true), "x").unwrap();
                let bottom = min_macro(HOLE, &FoFormula::Const(false), "x").unwrap();
                assert_eq!(eval_formula(&s, &top, f), plain);
                assert!(!eval_formula(&s, &bottom, f));
                f.pop();
            }
        }
    }

    #[test]
    fn expansion_matches_direct_interpretation() {
        let texts = [
            "exists x. min(x) & A1(x)",
            "forall x. min[A1](x) -> exists y. y < x | x = y",
            "forall x. min[A1 & !A2](x) <-> min[z. A1(z) & !A2(z)](x)",
        ];
        let structures = small_structures(3, 2);
        for text in texts {
            let f = parse_fo(text).unwrap();
            let e = f.expand();
            assert!(!e.has_macros());
            assert_eq!(e.expand(), e);
            assert_eq!(parse_fo(&f.to_string()).unwrap(), f);
            assert_eq!(parse_fo(&e.to_string()).unwrap(), e);
            for s in &structures {
                assert_eq!(
                    eval_formula(s, &f, &mut Vec::new()),
                    eval_formula(s, &e, &mut Vec::new()),
                    "{text}"
                );
            }
        }
        let nested = parse_fo("exists x. min[z. min[A2](z)](x)").unwrap();
        for s in &structures {
            assert_eq!(
                eval_formula(s, &nested, &mut Vec::new()),
                eval_formula(s, &nested.expand(), &mut Vec::new())
            );
        }
    }

    #[test]
    fn eval_examples() {
        let chain = structure(PartialPreorder::chain(3), &[]);
        assert!(holds(&chain, "exists x. min(x)"));
        assert!(!holds(&chain, "forall x. min(x)"));
        assert!(holds(
            &structure(PartialPreorder::antichain(3), &[]),
            "forall x. min(x)"
        ));
        // crown on a1 a2 b1 b2 (a_i above b_i and b_{i+1})
        let crown = PartialPreorder::from_pairs(4, [(2, 0), (3, 0), (2, 1), (3, 1)]).unwrap();
        let s = structure(crown, &[]);
        assert!(holds(&s, "exists x. exists y. !(x = y) & min(x) & min(y)"));
        assert!(!holds(
            &s,
            "exists x. exists y. exists z. !(x = y) & !(y = z) & !(x = z) & min(x) & min(y) & min(z)"
        ));
        assert!(matches!(
            eval_fo(
                &s,
                &FoSentence::from_formula(&parse_fo("exists x. A1(x)").unwrap()).unwrap()
            ),
            Err(MsoError::ArityMismatch { needed: 1, got: 0 })
        ));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            FoSentence::from_formula(&parse_fo("x <= y").unwrap()),
            Err(MsoError::FreeVariable(_))
        ));
        assert!(matches!(parse_fo("exists x. x ~ x"), Err(MsoError::Parse(_))));
        assert!(matches!(parse_fo("exists x. A1"), Err(MsoError::Parse(_))));
        assert!(matches!(parse_umso("forallsets A2. true"), Err(MsoError::Parse(_))));
        assert!(matches!(
            parse_umso("forallsets A1. exists x. A2(x)"),
            Err(MsoError::SetIndexOutOfRange { index: 2, ell: 1 })
        ));
        assert_eq!(parse_umso("forallsets A1..A3. true").unwrap().ell(), 3);
        assert_eq!(parse_umso("forallsets A1, A2. true").unwrap().ell(), 2);
        let u = parse_umso("forallsets A1 A2. exists x. A1(x) | A2(x)").unwrap();
        assert_eq!(parse_umso(&u.to_string()).unwrap(), u);
    }

    #[test]
    fn translation_examples() {
        let sub = builtin("agm-subexpansion").unwrap();
        assert_eq!(
            translate_macros(&sub).to_string(),
            "(exists x. (min[A1](x) & A2(x))) -> (forall y. (min[A1 & A2](y) -> (min[A1](y) & A2(y))))"
        );
        let t = translate(&sub);
        assert_eq!(t.ell(), 2);
        assert_eq!(t.formula(), &parse_fo(GOLDEN_SUBEXPANSION).unwrap());
        assert_eq!(t.to_string(), GOLDEN_SUBEXPANSION);

        let success = builtin("agm-success").unwrap();
        assert_eq!(
            translate_macros(&success).to_string(),
            "(exists x. min(x)) -> (exists x. min[A1](x))"
        );
        let plain = parse_postulate("forall x. p1(x) -> p2(x) | x = x").unwrap();
        assert_eq!(
            translate_macros(&plain).to_string(),
            "forall x. (A1(x) -> (A2(x) | (x = x)))"
        );
        assert!(!translate_macros(&plain).has_macros());
    }

    #[test]
    fn extension_examples() {
        let f = FaithfulStructure::from_regular(PartialPreorder::chain(4), Labeling::new(2, vec![3, 1, 0, 2]).unwrap())
            .unwrap();
        let e = extension_of(&f, &[ModelSet::empty(2), ModelSet::full(2)]).unwrap();
        assert_eq!(e.sets()[0].count_ones(..), 0);
        assert_eq!(e.sets()[1].count_ones(..), 4);
        let phi = ModelSet::from_assignments(2, [2, 3]).unwrap();
        let e = extension_of(&f, &[phi]).unwrap();
        assert_eq!(e.sets()[0].ones().collect::<Vec<_>>(), vec![0, 3]);
        assert!(extension_of(&f, &[ModelSet::empty(3)]).is_err());
    }

    #[test]
    fn translation_agrees_with_direct_evaluation() {
        let sub = builtin("agm-subexpansion").unwrap();
        let success = builtin("agm-success").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let regular: Vec<PartialPreorder> = all_preorders(4)
            .into_iter()
            .filter(PartialPreorder::is_regular)
            .collect();
        for r in &regular {
            let t = Labeling::all(2).nth(rng.gen_range(0..24)).unwrap();
            let f = FaithfulStructure::from_regular(r.clone(), t).unwrap();
            for mask in 0..16 {
                assert!(check_translation_agreement(&f, &success, &[ModelSet::from_mask(2, mask)]).unwrap());
            }
            for i in 0..256 {
                let phis: Vec<ModelSet> = decode_tuple(i, 4, 2)
                    .into_iter()
                    .map(|m| ModelSet::from_mask(2, m))
                    .collect();
                assert!(check_translation_agreement(&f, &sub, &phis).unwrap());
            }
        }
        for _ in 0..200 {
            let p = random_postulate(&mut rng, 2, 4);
            let r = &regular[rng.gen_range(0..regular.len())];
            let t = Labeling::all(2).nth(rng.gen_range(0..24)).unwrap();
            let f = FaithfulStructure::from_regular(r.clone(), t).unwrap();
            let phis: Vec<ModelSet> = (0..p.ell()).map(|_| ModelSet::random(2, &mut rng)).collect();
            assert!(check_translation_agreement(&f, &p, &phis).unwrap(), "{p}");
        }
    }

    #[test]
    fn umso_matches_operator_satisfaction_for_every_labeling() {
        let regular: Vec<PartialPreorder> = all_preorders(4)
            .into_iter()
            .filter(|r| r.is_partial_order() && r.is_regular())
            .collect();
        for p in [builtin("agm-success").unwrap(), builtin("agm-subexpansion").unwrap()] {
            let phi = umso_of(&p);
            for r in &regular {
                let expected = eval_umso(r, &phi, SearchMode::Exhaustive).unwrap().holds;
                for t in Labeling::all(2) {
                    let f = FaithfulStructure::from_regular(r.clone(), t).unwrap();
                    let v = satisfies(&f, f.kb(), &p, SearchMode::Exhaustive).unwrap();
                    assert_eq!(v.holds, expected);
                }
            }
        }
    }

    #[test]
    fn umso_examples() {
        let chain = PartialPreorder::chain(3);
        assert!(
            eval_umso(
                &chain,
                &parse_umso("forallsets A1 A2. true").unwrap(),
                SearchMode::Exhaustive
            )
            .unwrap()
            .holds
        );
        let v = eval_umso(
            &chain,
            &parse_umso("forallsets A1. exists x. A1(x)").unwrap(),
            SearchMode::Exhaustive,
        )
        .unwrap();
        assert!(!v.holds);
        assert_eq!(v.counterexample.unwrap()[0].count_ones(..), 0);
        let found = find_sets(
            &chain,
            &parse_umso("forallsets A1. exists x. A1(x) & !min(x) & forall y. A1(y) -> y = x").unwrap(),
            SearchMode::Exhaustive,
        )
        .unwrap()
        .unwrap();
        assert_eq!(found[0].ones().collect::<Vec<_>>(), vec![1]);
        let big = PartialPreorder::chain(13);
        let two = parse_umso("forallsets A1 A2. true").unwrap();
        assert!(matches!(
            eval_umso(&big, &two, SearchMode::Exhaustive),
            Err(MsoError::SearchSpaceTooLarge { log2: 26 })
        ));
        let sampled = eval_umso(&big, &two, SearchMode::Sample { count: 10, seed: 1 }).unwrap();
        assert_eq!((sampled.holds, sampled.checked), (true, 10));
        // success postulate holds exactly when every subset tuple is non-empty: it is not
        let v = eval_umso(
            &PartialPreorder::chain(4),
            &umso_of(&builtin("agm-success").unwrap()),
            SearchMode::Exhaustive,
        )
        .unwrap();
        assert_eq!(v.counterexample.unwrap()[0].count_ones(..), 0);
    }
}
