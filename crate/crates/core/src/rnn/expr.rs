//! Transition expressions: trees of ReLU, product and reciprocal over
//! weighted sums of node references and constants.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest expression depth accepted by graph validation.
pub const MAX_EXPR_DEPTH: usize = 512;

/// `bias + Σ w·e`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub bias: f64,
    pub terms: Vec<(f64, Expr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Node(usize),
    Const(f64),
    /// Identity of a weighted sum.
    Sum(Affine),
    /// `max(0, ·)` of a weighted sum.
    Relu(Affine),
    /// `1 / ·` of a weighted sum; a zero denominator is a runtime fault.
    Recip(Affine),
    Prod(Vec<Expr>),
}

/// Raised when a reciprocal denominator is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReciprocalFault;

impl Affine {
    pub fn new(bias: f64, terms: Vec<(f64, Expr)>) -> Self {
        Affine { bias, terms }
    }

    fn eval(&self, vals: &[f64]) -> std::result::Result<f64, ReciprocalFault> {
        let mut acc = self.bias;
        for (w, e) in &self.terms {
            acc += w * e.eval(vals)?;
        }
        Ok(acc)
    }
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn node(id: usize) -> Self {
        Expr::Node(id)
    }

    pub fn constant(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn sum(bias: f64, terms: Vec<(f64, Expr)>) -> Self {
        Expr::Sum(Affine::new(bias, terms))
    }

    pub fn relu(bias: f64, terms: Vec<(f64, Expr)>) -> Self {
        Expr::Relu(Affine::new(bias, terms))
    }

    pub fn recip(bias: f64, terms: Vec<(f64, Expr)>) -> Self {
        Expr::Recip(Affine::new(bias, terms))
    }

    pub fn prod(factors: Vec<Expr>) -> Self {
        Expr::Prod(factors)
    }

    /// `a + b`.
    pub fn add(a: Expr, b: Expr) -> Self {
        Expr::sum(0.0, vec![(1.0, a), (1.0, b)])
    }

    /// `a − b`.
    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::sum(0.0, vec![(1.0, a), (-1.0, b)])
    }

    /// `w·a`.
    pub fn scale(w: f64, a: Expr) -> Self {
        Expr::sum(0.0, vec![(w, a)])
    }

    /// `1 − a`.
    pub fn one_minus(a: Expr) -> Self {
        Expr::sum(1.0, vec![(-1.0, a)])
    }

    /// `a · b`.
    pub fn mul(a: Expr, b: Expr) -> Self {
        Expr::Prod(vec![a, b])
    }

    /// `Σ terms`, with an empty sum giving the constant zero.
    pub fn total(terms: Vec<Expr>) -> Self {
        if terms.is_empty() {
            return Expr::Const(0.0);
        }
        Expr::sum(0.0, terms.into_iter().map(|e| (1.0, e)).collect())
    }

    pub fn eval(&self, vals: &[f64]) -> std::result::Result<f64, ReciprocalFault> {
        match self {
            Expr::Node(i) => Ok(vals[*i]),
            Expr::Const(v) => Ok(*v),
            Expr::Sum(a) => a.eval(vals),
            Expr::Relu(a) => Ok(a.eval(vals)?.max(0.0)),
            Expr::Recip(a) => {
                let d = a.eval(vals)?;
                if d == 0.0 {
                    Err(ReciprocalFault)
                } else {
                    Ok(1.0 / d)
                }
            }
            Expr::Prod(fs) => {
                let mut acc = 1.0;
                for f in fs {
                    acc *= f.eval(vals)?;
                }
                Ok(acc)
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Node(_) | Expr::Const(_) => 1,
            Expr::Sum(a) | Expr::Relu(a) | Expr::Recip(a) => {
                1 + a.terms.iter().map(|(_, e)| e.depth()).max().unwrap_or(0)
            }
            Expr::Prod(fs) => 1 + fs.iter().map(Expr::depth).max().unwrap_or(0),
        }
    }

    /// Number of operator and leaf occurrences.
    pub fn op_count(&self) -> usize {
        match self {
            Expr::Node(_) | Expr::Const(_) => 1,
            Expr::Sum(a) | Expr::Relu(a) | Expr::Recip(a) => {
                1 + a.terms.iter().map(|(_, e)| e.op_count()).sum::<usize>()
            }
            Expr::Prod(fs) => 1 + fs.iter().map(Expr::op_count).sum::<usize>(),
        }
    }

    /// Node ids referenced by leaves.
    pub fn leaves(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut BTreeSet<usize>) {
        match self {
            Expr::Node(i) => {
                out.insert(*i);
            }
            Expr::Const(_) => {}
            Expr::Sum(a) | Expr::Relu(a) | Expr::Recip(a) => {
                a.terms.iter().for_each(|(_, e)| e.collect_leaves(out))
            }
            Expr::Prod(fs) => fs.iter().for_each(|e| e.collect_leaves(out)),
        }
    }

    /// Replaces every leaf `Node(i)` by `f(i)`.
    pub fn map_leaves(&self, f: &mut impl FnMut(usize) -> Expr) -> Expr {
        match self {
            Expr::Node(i) => f(*i),
            Expr::Const(v) => Expr::Const(*v),
            Expr::Sum(a) => Expr::Sum(a.map_leaves(f)),
            Expr::Relu(a) => Expr::Relu(a.map_leaves(f)),
            Expr::Recip(a) => Expr::Recip(a.map_leaves(f)),
            Expr::Prod(fs) => Expr::Prod(fs.iter().map(|e| e.map_leaves(f)).collect()),
        }
    }

    /// Renumbers leaves through `map`.
    pub fn remap(&self, map: &[usize]) -> Expr {
        self.map_leaves(&mut |i| Expr::Node(map[i]))
    }

    pub fn to_sexpr(&self) -> String {
        let mut s = String::new();
        self.write_sexpr(&mut s);
        s
    }

    fn write_sexpr(&self, s: &mut String) {
        use std::fmt::Write;
        match self {
            Expr::Node(i) => {
                let _ = write!(s, "(node {i})");
            }
            Expr::Const(v) => {
                let _ = write!(s, "(const {v:?})");
            }
            Expr::Sum(a) => a.write_sexpr("sum", s),
            Expr::Relu(a) => a.write_sexpr("relu", s),
            Expr::Recip(a) => a.write_sexpr("recip", s),
            Expr::Prod(fs) => {
                s.push_str("(prod");
                for f in fs {
                    s.push(' ');
                    f.write_sexpr(s);
                }
                s.push(')');
            }
        }
    }
}

impl Affine {
    fn map_leaves(&self, f: &mut impl FnMut(usize) -> Expr) -> Affine {
        Affine {
            bias: self.bias,
            terms: self
                .terms
                .iter()
                .map(|(w, e)| (*w, e.map_leaves(f)))
                .collect(),
        }
    }

    fn write_sexpr(&self, head: &str, s: &mut String) {
        use std::fmt::Write;
        let _ = write!(s, "({head} {:?}", self.bias);
        for (w, e) in &self.terms {
            let _ = write!(s, " ({w:?} ");
            e.write_sexpr(s);
            s.push(')');
        }
        s.push(')');
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sexpr())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Atom(String),
}

fn tokenize(s: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' | ')' | ' ' | '\t' | '\n' | '\r' => {
                if !cur.is_empty() {
                    out.push(Tok::Atom(std::mem::take(&mut cur)));
                }
                match ch {
                    '(' => out.push(Tok::Open),
                    ')' => out.push(Tok::Close),
                    _ => {}
                }
            }
            _ => cur.push(ch),
        }
    }
    if !cur.is_empty() {
        out.push(Tok::Atom(cur));
    }
    out
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Domain(format!("s-expression token {}: {}", self.pos, msg.into()))
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.next() {
            Some(x) if x == t => Ok(()),
            other => Err(self.err(format!("expected {t:?}, found {other:?}"))),
        }
    }

    fn atom(&mut self) -> Result<String> {
        match self.next() {
            Some(Tok::Atom(a)) => Ok(a),
            other => Err(self.err(format!("expected atom, found {other:?}"))),
        }
    }

    fn number(&mut self) -> Result<f64> {
        let a = self.atom()?;
        let v: f64 = a.parse().map_err(|_| self.err(format!("bad number {a}")))?;
        if !v.is_finite() {
            return Err(self.err("non-finite constant"));
        }
        Ok(v)
    }

    fn expr(&mut self, depth: usize) -> Result<Expr> {
        if depth > MAX_EXPR_DEPTH {
            return Err(self.err("expression too deep"));
        }
        self.expect(Tok::Open)?;
        let head = self.atom()?;
        let e = match head.as_str() {
            "node" => {
                let a = self.atom()?;
                Expr::Node(
                    a.parse()
                        .map_err(|_| self.err(format!("bad node id {a}")))?,
                )
            }
            "const" => Expr::Const(self.number()?),
            "sum" | "relu" | "recip" => {
                let bias = self.number()?;
                let mut terms = Vec::new();
                while self.toks.get(self.pos) == Some(&Tok::Open) {
                    self.pos += 1;
                    let w = self.number()?;
                    let e = self.expr(depth + 1)?;
                    self.expect(Tok::Close)?;
                    terms.push((w, e));
                }
                let a = Affine { bias, terms };
                match head.as_str() {
                    "sum" => Expr::Sum(a),
                    "relu" => Expr::Relu(a),
                    _ => Expr::Recip(a),
                }
            }
            "prod" => {
                let mut fs = Vec::new();
                while self.toks.get(self.pos) == Some(&Tok::Open) {
                    fs.push(self.expr(depth + 1)?);
                }
                Expr::Prod(fs)
            }
            other => return Err(self.err(format!("unknown operator {other}"))),
        };
        self.expect(Tok::Close)?;
        Ok(e)
    }
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser {
            toks: tokenize(s),
            pos: 0,
        };
        let e = p.expr(0)?;
        if p.pos != p.toks.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }
}
