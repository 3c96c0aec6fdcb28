//! Table-driven graphs for language models and distinguishers, and the
//! reverse direction: reading conditionals back out of a graph.
//!
//! Strings are tracked by the bijective base-`|Σ|` code
//! `code(ε) = 0`, `code(s·y) = |Σ|·code(s) + y + 1`.

use super::expr::Expr;
use super::graph::{Executor, Node, RnnGraph};
use super::library::{ind_eq, ind_ge, ind_le};
use crate::dist::{decode, Alphabet, LanguageModel, Token};
use crate::distinguisher::Distinguisher;
use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointFormat;

/// Largest `|Σ|ⁿ` accepted by the table compilers.
pub const MAX_TABLE_STRINGS: usize = 1 << 16;

pub fn bijective_code(s: &[Token], base: usize) -> usize {
    s.iter().fold(0, |c, &t| c * base + t as usize + 1)
}

/// Number of strings shorter than `n`, i.e. the code of `0ⁿ`.
fn shorter_than(base: usize, n: usize) -> usize {
    (0..n).map(|l| base.pow(l as u32)).sum()
}

fn check_table(alphabet: Alphabet, n: usize) -> Result<()> {
    let need = (alphabet.size() as u128).saturating_pow(n as u32);
    if need > MAX_TABLE_STRINGS as u128 {
        return Err(Error::Sizing {
            what: "table graph strings".into(),
            needed: need,
            cap: MAX_TABLE_STRINGS as u128,
        });
    }
    Ok(())
}

/// `|Σ|·c + x + 1`.
fn extend_code(c: Expr, x: Expr, base: usize) -> Expr {
    Expr::sum(1.0, vec![(base as f64, c), (1.0, x)])
}

/// Three-node graph realizing `lm` with `𝒯 = 1`: input `x`, hidden code `c`
/// of the tokens read so far (frozen after `n`), and the output
/// `q(x | s)` looked up by `(c, x)`, uniform beyond position `n`.
pub fn lm_table_graph(lm: &LanguageModel) -> Result<RnnGraph> {
    let alphabet = lm.alphabet();
    let (a, n) = (alphabet.size(), lm.n());
    check_table(alphabet, n)?;
    let thr = shorter_than(a, n) as f64;
    let (x, c) = (Expr::node(0), Expr::node(1));
    let grow = Expr::mul(
        ind_le(c.clone(), thr - 1.0),
        Expr::sum(1.0, vec![((a - 1) as f64, c.clone()), (1.0, x.clone())]),
    );
    let c_next = Expr::add(c.clone(), grow);
    let mut terms = Vec::new();
    for len in 0..n {
        for code in 0..alphabet.pow(len) {
            let s = decode(code, len, a);
            let row = lm.row(len, code);
            let picks: Vec<Expr> = row
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != 0.0)
                .map(|(y, &p)| Expr::scale(p, ind_eq(x.clone(), y as f64)))
                .collect();
            if !picks.is_empty() {
                terms.push(Expr::mul(
                    ind_eq(c.clone(), bijective_code(&s, a) as f64),
                    Expr::total(picks),
                ));
            }
        }
    }
    terms.push(Expr::scale(1.0 / a as f64, ind_ge(c, thr)));
    let nodes = vec![
        Node::input("x"),
        Node::new("code", 0.0, c_next),
        Node::new("q", 0.0, Expr::total(terms)),
    ];
    RnnGraph::new(nodes, vec![0], 2, vec![1], 1)
}

/// Two-node graph emitting `1/|Σ|` at every step.
pub fn constant_lm_graph(alphabet: Alphabet) -> Result<RnnGraph> {
    let u = 1.0 / alphabet.size() as f64;
    let nodes = vec![Node::input("x"), Node::new("q", u, Expr::constant(u))];
    RnnGraph::new(nodes, vec![0], 1, vec![], 1)
}

/// Four-node graph realizing a table distinguisher with `𝒯 = 1`.
///
/// After `m` tokens the output is `d(m−k+1, ·)` on the window ending at
/// `min(m, n)`; tokens past `n` are ignored. Nodes: input, token count
/// (saturating at `n+k`), code of the first `n` tokens, output.
pub fn distinguisher_table_graph(d: &Distinguisher) -> Result<RnnGraph> {
    let alphabet = d.alphabet();
    let (a, n, k) = (alphabet.size(), d.n(), d.k());
    check_table(alphabet, n)?;
    let (x, m, c) = (Expr::node(0), Expr::node(1), Expr::node(2));
    let m_next = Expr::add(m.clone(), ind_le(m.clone(), (n + k) as f64 - 1.0));
    let c_next = Expr::add(
        c.clone(),
        Expr::mul(
            ind_le(m.clone(), n as f64 - 1.0),
            Expr::sum(1.0, vec![((a - 1) as f64, c.clone()), (1.0, x.clone())]),
        ),
    );
    let mut terms = Vec::new();
    for i in 1..=n {
        let len = d.window_end(i);
        let code_now = if i + k - 1 <= n {
            extend_code(c.clone(), x.clone(), a)
        } else {
            c.clone()
        };
        let ones: Vec<Expr> = d
            .table(i)
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(idx, _)| {
                ind_eq(
                    code_now.clone(),
                    bijective_code(&decode(idx, len, a), a) as f64,
                )
            })
            .collect();
        if !ones.is_empty() {
            terms.push(Expr::mul(
                ind_eq(m.clone(), (i + k - 2) as f64),
                Expr::total(ones),
            ));
        }
    }
    let nodes = vec![
        Node::input("x"),
        Node::new("count", 0.0, m_next),
        Node::new("code", 0.0, c_next),
        Node::new("d", 0.0, Expr::total(terms)),
    ];
    RnnGraph::new(nodes, vec![0], 3, vec![1, 2], 1)
}

/// Calls `f` once for every nonempty prefix of length at most `n`, with an
/// executor that has consumed exactly that prefix.
pub fn for_each_prefix<'g>(
    graph: &'g RnnGraph,
    base: usize,
    n: usize,
    format: Option<FixedPointFormat>,
    f: &mut impl FnMut(&[Token], &Executor<'g>) -> Result<()>,
) -> Result<()> {
    fn rec<'g>(
        ex: &Executor<'g>,
        prefix: &mut Vec<Token>,
        base: usize,
        n: usize,
        f: &mut impl FnMut(&[Token], &Executor<'g>) -> Result<()>,
    ) -> Result<()> {
        for y in 0..base as Token {
            let mut next = ex.clone();
            next.feed(y)?;
            prefix.push(y);
            f(prefix, &next)?;
            if prefix.len() < n {
                rec(&next, prefix, base, n, f)?;
            }
            prefix.pop();
        }
        Ok(())
    }
    rec(&Executor::new(graph, format), &mut Vec::new(), base, n, f)
}

/// Raw conditionals `q(y | s)` read at the end of each token, laid out like
/// [`LanguageModel::tables`].
pub fn graph_conditionals(
    graph: &RnnGraph,
    alphabet: Alphabet,
    n: usize,
    format: Option<FixedPointFormat>,
) -> Result<Vec<Vec<f64>>> {
    alphabet.count(n)?;
    let a = alphabet.size();
    let mut tables: Vec<Vec<f64>> = (0..n).map(|l| vec![0.0; alphabet.pow(l + 1)]).collect();
    for_each_prefix(graph, a, n, format, &mut |prefix, ex| {
        let l = prefix.len() - 1;
        let code = crate::dist::encode(prefix, a);
        tables[l][code] = ex.output();
        Ok(())
    })?;
    Ok(tables)
}

/// The language model realized by `graph`; rows must be normalized.
pub fn lm_from_graph(graph: &RnnGraph, alphabet: Alphabet, n: usize) -> Result<LanguageModel> {
    LanguageModel::from_tables(alphabet, n, graph_conditionals(graph, alphabet, n, None)?)
}

/// Tabulates a distinguisher graph: `d(i, x)` is the output after `i+k−1`
/// tokens of `x_{:min(i+k,n+1)}` padded with token 0.
pub fn distinguisher_from_graph(
    graph: &RnnGraph,
    alphabet: Alphabet,
    n: usize,
    k: usize,
) -> Result<Distinguisher> {
    let mut err = None;
    let d = Distinguisher::from_fn(alphabet, n, k, |i, window| {
        let mut stream = window.to_vec();
        stream.resize(i + k - 1, 0);
        let mut ex = Executor::new(graph, None);
        let mut out = 0.0;
        for &t in &stream {
            if let Err(e) = ex.feed(t) {
                err.get_or_insert(e);
                return false;
            }
            out = ex.output();
        }
        if out != 0.0 && out != 1.0 {
            err.get_or_insert(Error::Domain(format!(
                "distinguisher output {out} at position {i} is not binary"
            )));
        }
        out == 1.0
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(d.with_graph(graph.clone())),
    }
}
