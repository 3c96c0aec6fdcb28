//! Compilation of a boosted model into a single recurrent graph.
//!
//! Each input token occupies `𝒯_U = (|Σ|ᵏ+1)·k·τ` steps. The first
//! `|Σ|ᵏ·k·τ` steps enumerate every `z ∈ Σᵏ` (string `j` is the base-`|Σ|`
//! expansion of `j−1`, most significant digit first), feeding `z_r` to a
//! replica of the base graph for `τ` steps per slot `r`. The last `k·τ`
//! steps advance the persistent copy of the base graph's hidden state by
//! the block just completed. Positions `i ≤ i₀*` bypass the enumeration and
//! run the replica once on the current token.
//!
//! Step `t` has local index `λ = (t−1) mod 𝒯_U + 1`, sub-step
//! `s = (t−1) mod τ + 1` and slot `r = ⌊(t−1)/τ⌋ mod k + 1`.

use serde::{Deserialize, Serialize};

use crate::dist::{Alphabet, LanguageModel};
use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointFormat;
use crate::rnn::library::{base_c_increment, exp_binary, ind_between, ind_eq, ind_ge, ind_le};
use crate::rnn::{graph_conditionals, Expr, Node, RnnGraph, Schedule};

/// Largest `|Σ|ᵏ` the constructions accept.
pub const MAX_ENUMERATED: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub built_size: usize,
    pub built_hidden: usize,
    pub built_time: u64,
    pub formula_size: usize,
    pub formula_hidden: usize,
    pub formula_time: u64,
    pub tau: u64,
    pub equivalence_checked: bool,
}

impl ConstructionReport {
    pub fn accounting_matches(&self) -> bool {
        self.built_size == self.formula_size
            && self.built_hidden == self.formula_hidden
            && self.built_time == self.formula_time
    }
}

/// `|Q|+|H_Q|+|D|+|H_D|+7k+25`.
pub fn boosted_size(
    q_size: usize,
    q_hidden: usize,
    d_size: usize,
    d_hidden: usize,
    k: usize,
) -> usize {
    q_size + q_hidden + d_size + d_hidden + 7 * k + 25
}

/// `|H_Q|+|H_D|+6k+17`.
pub fn boosted_hidden(q_hidden: usize, d_hidden: usize, k: usize) -> usize {
    q_hidden + d_hidden + 6 * k + 17
}

/// `(|Σ|ᵏ+1)·k·τ`.
pub fn enumerator_time(alphabet: Alphabet, k: usize, tau: u64) -> u64 {
    (alphabet.pow(k) as u64 + 1) * k as u64 * tau
}

/// `(|Σ|ᵏ+1)·k·(max{𝒯_Q, 𝒯_D}+4)`.
pub fn boosted_time(alphabet: Alphabet, k: usize, t_q: u64, t_d: u64) -> u64 {
    enumerator_time(alphabet, k, t_q.max(t_d) + 4)
}

/// `|Q|+|H_Q|+2k+6` and `|H_Q|+2k+6`.
pub fn enumerator_size(q_size: usize, q_hidden: usize, k: usize) -> (usize, usize) {
    (q_size + q_hidden + 2 * k + 6, q_hidden + 2 * k + 6)
}

/// `3k+8` and `2k+5`.
pub fn indicator_size(k: usize) -> (usize, usize) {
    (3 * k + 8, 2 * k + 5)
}

#[derive(Debug, Clone, Copy)]
struct Params {
    a: usize,
    k: usize,
    tau: u64,
    t_u: u64,
    enum_len: u64,
    i0: usize,
}

impl Params {
    fn new(alphabet: Alphabet, k: usize, i0: usize, tau: u64) -> Result<Self> {
        if alphabet.size() < 2 {
            return Err(Error::Domain("the enumerator needs |Σ| ≥ 2".into()));
        }
        if k == 0 || i0 >= k {
            return Err(Error::Domain(format!(
                "need k ≥ 1 and 0 ≤ i₀* < k, got k={k}, i₀*={i0}"
            )));
        }
        let strings = (alphabet.size() as u128).saturating_pow(k as u32);
        if strings > MAX_ENUMERATED as u128 {
            return Err(Error::Sizing {
                what: "enumerated strings |Σ|^k".into(),
                needed: strings,
                cap: MAX_ENUMERATED as u128,
            });
        }
        let enum_len = strings as u64 * k as u64 * tau;
        Ok(Params {
            a: alphabet.size(),
            k,
            tau,
            t_u: enum_len + k as u64 * tau,
            enum_len,
            i0,
        })
    }

    /// Sampling offsets `jkτ − 1` for every enumerated string `j`.
    fn block_offsets(&self) -> Vec<u64> {
        (1..=self.a.pow(self.k as u32) as u64)
            .map(|j| j * self.k as u64 * self.tau - 1)
            .collect()
    }

    /// Sampling offsets `(j−1)kτ + rτ − 1` for every string `j` and slot `r`.
    fn slot_offsets(&self) -> Vec<u64> {
        let (k, tau) = (self.k as u64, self.tau);
        (1..=self.a.pow(self.k as u32) as u64)
            .flat_map(|j| (1..=k).map(move |r| (j - 1) * k * tau + r * tau - 1))
            .collect()
    }
}

fn check_base(g: &RnnGraph, what: &str) -> Result<()> {
    if !g.reset_on_input.is_empty() {
        return Err(Error::Domain(format!(
            "{what} graph must not reset nodes on input"
        )));
    }
    if g.schedule != Schedule::TokenEnd {
        return Err(Error::Domain(format!(
            "{what} graph must be sampled at token ends"
        )));
    }
    if g.is_input(g.output_id) {
        return Err(Error::Domain(format!(
            "{what} output must not be an input node"
        )));
    }
    Ok(())
}

fn check_tau(tau: u64, need: u64, what: &str) -> Result<()> {
    if tau < need {
        return Err(Error::Precondition(format!(
            "{what} needs τ ≥ {need}, got τ={tau}"
        )));
    }
    Ok(())
}

#[derive(Default)]
struct Builder {
    nodes: Vec<Node>,
    inputs: Vec<usize>,
    hidden: Vec<usize>,
}

impl Builder {
    fn input(&mut self, name: String) -> usize {
        self.nodes.push(Node::input(name));
        self.inputs.push(self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    fn alloc(&mut self, name: String, init: f64, hidden: bool) -> usize {
        self.nodes.push(Node::new(name, init, Expr::constant(0.0)));
        let id = self.nodes.len() - 1;
        if hidden {
            self.hidden.push(id);
        }
        id
    }

    fn set(&mut self, id: usize, e: Expr) {
        self.nodes[id].expr = Some(e);
    }

    fn finish(self, output: usize, rnn_time: u64) -> Result<RnnGraph> {
        RnnGraph::new(self.nodes, self.inputs, output, self.hidden, rnn_time)
    }
}

fn n(id: usize) -> Expr {
    Expr::node(id)
}

fn eq(id: usize, c: u64) -> Expr {
    ind_eq(n(id), c as f64)
}

fn prod(xs: Vec<Expr>) -> Expr {
    Expr::prod(xs)
}

/// `keep·self + Σ gateᵢ·valueᵢ` with `keep = 1 − Σ gateᵢ`.
fn gated(self_id: usize, branches: Vec<(Expr, Expr)>) -> Expr {
    let gates = Expr::total(branches.iter().map(|(g, _)| g.clone()).collect());
    let mut terms: Vec<Expr> = branches.into_iter().map(|(g, v)| Expr::mul(g, v)).collect();
    terms.push(Expr::mul(Expr::one_minus(gates), n(self_id)));
    Expr::total(terms)
}

/// Step counters `w₀, u₀, w, u` and, when tracking the initial tokens, `v_c`.
#[derive(Debug, Clone, Copy)]
struct Counters {
    w0: usize,
    u0: usize,
    w: usize,
    u: usize,
    vc: Option<usize>,
    p: Params,
}

impl Counters {
    fn add(b: &mut Builder, pre: &str, p: Params, with_vc: bool) -> Self {
        let (k, t_u, tau) = (p.k as u64, p.t_u, p.tau);
        let w0 = b.alloc(format!("{pre}w0"), t_u as f64, true);
        let u0 = b.alloc(format!("{pre}u0"), ((p.k - p.i0) % p.k + 1) as f64, true);
        let w = b.alloc(format!("{pre}w"), tau as f64, true);
        let u = b.alloc(format!("{pre}u"), 1.0, true);
        let vc = with_vc.then(|| b.alloc(format!("{pre}vc"), 1.0, true));
        b.set(
            w0,
            Expr::sum(1.0, vec![(1.0, n(w0)), (-(t_u as f64), eq(w0, t_u))]),
        );
        b.set(
            w,
            Expr::sum(1.0, vec![(1.0, n(w)), (-(tau as f64), eq(w, tau))]),
        );
        b.set(
            u,
            Expr::add(
                n(u),
                Expr::mul(
                    eq(w, tau - 1),
                    Expr::sum(1.0, vec![(-(k as f64), eq(u, k))]),
                ),
            ),
        );
        b.set(
            u0,
            Expr::add(
                n(u0),
                Expr::mul(
                    eq(w0, t_u - 1),
                    Expr::sum(1.0, vec![(-(k as f64), eq(u0, k))]),
                ),
            ),
        );
        if let Some(vc) = vc {
            b.set(
                vc,
                Expr::add(
                    n(vc),
                    Expr::mul(eq(w0, t_u - 1), ind_le(n(vc), p.i0 as f64)),
                ),
            );
        }
        Counters {
            w0,
            u0,
            w,
            u,
            vc,
            p,
        }
    }

    /// Current token lies among the first `i₀*`.
    fn p_init(&self) -> Expr {
        match self.vc {
            Some(vc) => ind_le(n(vc), self.p.i0 as f64),
            None => Expr::constant(0.0),
        }
    }

    fn not_init(&self) -> Expr {
        Expr::one_minus(self.p_init())
    }

    /// Current step lies in the enumeration phase, `λ ≤ |Σ|ᵏkτ`.
    fn p_enum(&self) -> Expr {
        Expr::add(
            ind_le(n(self.w0), (self.p.enum_len - 1) as f64),
            eq(self.w0, self.p.t_u),
        )
    }

    /// Enumeration phase and not an initial token.
    fn enumerating(&self) -> Expr {
        Expr::mul(self.not_init(), self.p_enum())
    }

    /// Final phase and not an initial token.
    fn finishing(&self) -> Expr {
        Expr::mul(self.not_init(), Expr::one_minus(self.p_enum()))
    }
}

/// Block storage `Y`, enumerated digits `z` and the enumerator output `v_e`.
struct Storage {
    y: Vec<usize>,
    z: Vec<usize>,
    ve: usize,
}

fn add_storage(b: &mut Builder, pre: &str, c: &Counters, x: usize) -> Storage {
    let p = c.p;
    let y: Vec<usize> = (1..=p.k)
        .map(|j| b.alloc(format!("{pre}y{j}"), 0.0, true))
        .collect();
    let z: Vec<usize> = (1..=p.k)
        .map(|j| b.alloc(format!("{pre}z{j}"), 0.0, true))
        .collect();
    let ve = b.alloc(format!("{pre}ve"), 0.0, true);
    let first_step = eq(c.w0, p.t_u);
    for (j, &yj) in y.iter().enumerate() {
        let j = j as u64 + 1;
        let load = Expr::mul(eq(c.u0, j), Expr::sub(n(x), n(yj)));
        let delta = if j == 1 {
            load
        } else {
            Expr::sub(load, Expr::mul(eq(c.u0, 1), n(yj)))
        };
        b.set(yj, Expr::add(n(yj), Expr::mul(first_step.clone(), delta)));
    }
    let rev: Vec<Expr> = z.iter().rev().map(|&d| n(d)).collect();
    let inc: Vec<Expr> = base_c_increment(&rev, p.a as u32)
        .into_iter()
        .rev()
        .collect();
    let fire = prod(vec![eq(c.w, p.tau - 1), eq(c.u, p.k as u64), c.p_enum()]);
    for (&zr, next) in z.iter().zip(inc) {
        b.set(
            zr,
            Expr::add(n(zr), Expr::mul(fire.clone(), Expr::sub(next, n(zr)))),
        );
    }
    let select = |ids: &[usize]| {
        Expr::total(
            ids.iter()
                .enumerate()
                .map(|(r, &id)| Expr::mul(eq(c.u, r as u64 + 1), n(id)))
                .collect(),
        )
    };
    let p_enum = c.p_enum();
    let block = Expr::add(
        Expr::mul(p_enum.clone(), select(&z)),
        Expr::mul(Expr::one_minus(p_enum), select(&y)),
    );
    let ve_expr = match c.vc {
        Some(_) => Expr::add(Expr::mul(c.p_init(), n(x)), Expr::mul(c.not_init(), block)),
        None => block,
    };
    b.set(ve, ve_expr);
    Storage { y, z, ve }
}

/// Persistent hidden copy `H`, working copy `H̃` and workspace `R` of a base graph.
struct Replica {
    out: usize,
    out_expr: Expr,
}

fn add_replica(
    b: &mut Builder,
    pre: &str,
    c: &Counters,
    ve: usize,
    g: &RnnGraph,
    hidden: &[usize],
) -> Result<Replica> {
    let p = c.p;
    let t_g = g.rnn_time;
    let is_hidden = |i: usize| hidden.contains(&i);
    let mut h = vec![usize::MAX; g.size()];
    let mut ht = vec![usize::MAX; g.size()];
    let mut r = vec![usize::MAX; g.size()];
    for &i in hidden {
        h[i] = b.alloc(format!("{pre}h.{}", g.nodes[i].name), g.nodes[i].init, true);
    }
    for &i in hidden {
        ht[i] = b.alloc(
            format!("{pre}ht.{}", g.nodes[i].name),
            g.nodes[i].init,
            false,
        );
    }
    for i in (0..g.size()).filter(|&i| !g.is_input(i) && !is_hidden(i)) {
        r[i] = b.alloc(
            format!("{pre}r.{}", g.nodes[i].name),
            g.nodes[i].init,
            false,
        );
    }
    let map_with = |state: &[usize]| -> Vec<usize> {
        (0..g.size())
            .map(|i| {
                if g.is_input(i) {
                    ve
                } else if is_hidden(i) {
                    state[i]
                } else {
                    r[i]
                }
            })
            .collect()
    };
    let (map_h, map_run) = (map_with(&h), map_with(&ht));
    let bad = map_h.contains(&usize::MAX) || map_run.contains(&usize::MAX);
    if bad {
        return Err(Error::Invariant("replica map is incomplete".into()));
    }
    let p_init = c.p_init();
    let advance = Expr::add(
        Expr::mul(p_init.clone(), ind_between(n(c.w0), 1.0, t_g as f64)),
        prod(vec![
            c.finishing(),
            eq(c.u0, p.k as u64),
            ind_le(n(c.w), t_g as f64),
        ]),
    );
    for &i in hidden {
        let f = g.nodes[i]
            .expr
            .as_ref()
            .expect("hidden nodes have transitions");
        if f.leaves().iter().any(|&u| !g.is_input(u) && !is_hidden(u)) {
            return Err(Error::Invariant(format!(
                "hidden node {i} reads outside the hidden set"
            )));
        }
        b.set(h[i], gated(h[i], vec![(advance.clone(), f.remap(&map_h))]));
    }
    let opening = Expr::mul(c.enumerating(), Expr::mul(eq(c.w, 1), eq(c.u, 1)));
    let first = Expr::add(opening.clone(), Expr::mul(p_init.clone(), eq(c.w0, 1)));
    let run = Expr::add(
        Expr::sub(
            Expr::mul(c.enumerating(), ind_le(n(c.w), t_g as f64)),
            opening,
        ),
        Expr::mul(p_init, ind_between(n(c.w0), 2.0, t_g as f64)),
    );
    let mut out_expr = None;
    for i in (0..g.size()).filter(|&i| !g.is_input(i)) {
        let f = g.nodes[i]
            .expr
            .as_ref()
            .expect("non-input nodes have transitions");
        let id = if is_hidden(i) { ht[i] } else { r[i] };
        let e = gated(
            id,
            vec![
                (first.clone(), f.remap(&map_h)),
                (run.clone(), f.remap(&map_run)),
            ],
        );
        if i == g.output_id {
            out_expr = Some(e.clone());
        }
        b.set(id, e);
    }
    let out = if is_hidden(g.output_id) {
        ht[g.output_id]
    } else {
        r[g.output_id]
    };
    Ok(Replica {
        out,
        out_expr: out_expr.expect("output is a non-input node"),
    })
}

struct Enumerator {
    c: Counters,
    st: Storage,
    rep: Replica,
}

fn add_enumerator(
    b: &mut Builder,
    pre: &str,
    g: &RnnGraph,
    hidden: &[usize],
    p: Params,
) -> Result<Enumerator> {
    let xs: Vec<usize> = g
        .input_ids
        .iter()
        .map(|&i| b.input(format!("{pre}{}", g.nodes[i].name)))
        .collect();
    let c = Counters::add(b, pre, p, true);
    let st = add_storage(b, pre, &c, xs[0]);
    let rep = add_replica(b, pre, &c, st.ve, g, hidden)?;
    Ok(Enumerator { c, st, rep })
}

fn offsets_schedule(mut v: Vec<u64>) -> Schedule {
    v.sort_unstable();
    v.dedup();
    Schedule::Offsets(v)
}

/// The synchronized enumerator `U` over base graph `q`.
///
/// Sampled at `(j−1)kτ + rτ − 1` the output is `g_Q(x_{:i₀(i)+1}·z^{(j)}_{:r+1})`
/// for `i > i₀*`; at `𝒯_U − 1` it is `g_Q(x_{:i+1})` for `i ≤ i₀*`.
pub fn build_sync_enumerator(
    q: &RnnGraph,
    alphabet: Alphabet,
    k: usize,
    i0: usize,
    tau: u64,
) -> Result<RnnGraph> {
    check_base(q, "base")?;
    check_tau(tau, q.rnn_time + 2, "the enumerator")?;
    let p = Params::new(alphabet, k, i0, tau)?;
    let mut b = Builder::default();
    let e = add_enumerator(&mut b, "", q, &q.hidden_ids, p)?;
    let mut g = b.finish(e.rep.out, p.t_u)?;
    let mut offs = p.slot_offsets();
    offs.push(p.t_u - 1);
    g.schedule = offsets_schedule(offs);
    g.aux_outputs.insert("ve".into(), e.st.ve);
    Ok(g)
}

fn add_f1(
    b: &mut Builder,
    pre: &str,
    q: &RnnGraph,
    hidden: &[usize],
    p: Params,
) -> Result<(Enumerator, usize)> {
    let e = add_enumerator(b, pre, q, hidden, p)?;
    let c = e.c;
    let acc = b.alloc(format!("{pre}acc"), 0.0, false);
    let vq = n(e.rep.out);
    let late = eq(c.w, p.tau - 2);
    let first_slot = eq(c.u, 1);
    let start = prod(vec![c.enumerating(), late.clone(), first_slot.clone()]);
    let extend = prod(vec![c.enumerating(), late, Expr::one_minus(first_slot)]);
    let init = Expr::mul(c.p_init(), eq(c.w0, p.t_u - 2));
    let expr = gated(
        acc,
        vec![
            (start, vq.clone()),
            (extend, Expr::mul(n(acc), vq.clone())),
            (init, vq),
        ],
    );
    b.set(acc, expr);
    Ok((e, acc))
}

/// `f₁`: at `(j−1)kτ + kτ − 1` the output is `q(z^{(j)} | x_{:i₀(i)+1})`;
/// at `𝒯_U − 1` for `i ≤ i₀*` it is `q(x_i | x_{:i})`.
pub fn build_f1(
    q: &RnnGraph,
    alphabet: Alphabet,
    k: usize,
    i0: usize,
    tau: u64,
) -> Result<RnnGraph> {
    check_base(q, "model")?;
    check_tau(tau, q.rnn_time + 4, "f1")?;
    let p = Params::new(alphabet, k, i0, tau)?;
    let mut b = Builder::default();
    let (_, acc) = add_f1(&mut b, "", q, &q.hidden_ids, p)?;
    let mut g = b.finish(acc, p.t_u)?;
    let mut offs = p.block_offsets();
    offs.push(p.t_u - 1);
    g.schedule = offsets_schedule(offs);
    Ok(g)
}

fn add_f2(
    b: &mut Builder,
    pre: &str,
    d: &RnnGraph,
    hidden: &[usize],
    alpha: f64,
    p: Params,
) -> Result<(Enumerator, usize)> {
    let e = add_enumerator(b, pre, d, hidden, p)?;
    let ex = b.alloc(format!("{pre}exp"), 1.0, false);
    b.set(ex, exp_binary(e.rep.out_expr.clone(), -alpha));
    Ok((e, ex))
}

/// `f₂`: at `(j−1)kτ + kτ − 1` the output is `exp(−α·d(i₀(i)+1, x_{:i₀(i)+1}·z^{(j)}))`.
pub fn build_f2(
    d: &RnnGraph,
    alphabet: Alphabet,
    k: usize,
    i0: usize,
    alpha: f64,
    tau: u64,
) -> Result<RnnGraph> {
    check_base(d, "distinguisher")?;
    check_tau(tau, d.rnn_time + 2, "f2")?;
    if !alpha.is_finite() {
        return Err(Error::Domain("α must be finite".into()));
    }
    let p = Params::new(alphabet, k, i0, tau)?;
    let mut b = Builder::default();
    let (_, ex) = add_f2(&mut b, "", d, &d.hidden_ids, alpha, p)?;
    let mut g = b.finish(ex, p.t_u)?;
    g.schedule = offsets_schedule(p.block_offsets());
    Ok(g)
}

fn add_g(b: &mut Builder, pre: &str, p: Params) -> (usize, usize) {
    let x = b.input(format!("{pre}x"));
    let c = Counters::add(b, pre, p, false);
    let st = add_storage(b, pre, &c, x);
    let wl: Vec<usize> = (1..=p.k)
        .map(|l| b.alloc(format!("{pre}m{l}"), 0.0, false))
        .collect();
    for (l, &id) in wl.iter().enumerate() {
        b.set(id, ind_eq(Expr::sub(n(st.y[l]), n(st.z[l])), 0.0));
    }
    let v1 = b.alloc(format!("{pre}g1"), 0.0, false);
    let v2 = b.alloc(format!("{pre}g2"), 0.0, false);
    let matches = |shift: f64| {
        let mut terms: Vec<(f64, Expr)> = wl
            .iter()
            .enumerate()
            .map(|(l, &id)| {
                (
                    1.0,
                    Expr::mul(
                        n(id),
                        ind_ge(Expr::sum(-shift, vec![(1.0, n(c.u0))]), l as f64 + 1.0),
                    ),
                )
            })
            .collect();
        terms.push((-1.0, n(c.u0)));
        ind_ge(Expr::sum(shift, terms), 0.0)
    };
    b.set(v1, matches(0.0));
    b.set(v2, matches(1.0));
    (v1, v2)
}

/// The indicator component: at `(j−1)kτ + kτ − 1` the output is
/// `𝟙{z^{(j)}_{:i−i₀(i)+1} = x_{i₀(i)+1:i+1}}` and aux output `g2` is
/// `𝟙{z^{(j)}_{:i−i₀(i)} = x_{i₀(i)+1:i}}`.
pub fn build_g(alphabet: Alphabet, k: usize, i0: usize, tau: u64) -> Result<RnnGraph> {
    check_tau(tau, 4, "the indicator component")?;
    let p = Params::new(alphabet, k, i0, tau)?;
    let mut b = Builder::default();
    let (v1, v2) = add_g(&mut b, "", p);
    let mut g = b.finish(v1, p.t_u)?;
    g.schedule = offsets_schedule(p.block_offsets());
    g.aux_outputs.insert("g2".into(), v2);
    Ok(g)
}

fn assemble(
    q: &RnnGraph,
    d: &RnnGraph,
    alphabet: Alphabet,
    k: usize,
    alpha: f64,
    i0: usize,
    simple: bool,
) -> Result<(RnnGraph, u64)> {
    check_base(q, "model")?;
    check_base(d, "distinguisher")?;
    if !alpha.is_finite() {
        return Err(Error::Domain("α must be finite".into()));
    }
    let tau = q.rnn_time.max(d.rnn_time) + 4;
    let p = Params::new(alphabet, k, i0, tau)?;
    let (hq, hd) = if simple {
        (q.non_input_ids(), d.non_input_ids())
    } else {
        (q.hidden_ids.clone(), d.hidden_ids.clone())
    };
    let mut b = Builder::default();
    let (e1, acc) = add_f1(&mut b, "f1.", q, &hq, p)?;
    let (_, ex) = add_f2(&mut b, "f2.", d, &hd, alpha, p)?;
    let (v1, v2) = add_g(&mut b, "g.", p);
    let c = e1.c;
    let w1 = b.alloc("w1".into(), 0.0, false);
    let w2 = b.alloc("w2".into(), 0.0, false);
    let out = b.alloc("q".into(), 0.0, false);
    let acc_first = Expr::mul(c.not_init(), eq(c.w0, p.k as u64 * p.tau - 1));
    let acc_any = prod(vec![
        c.enumerating(),
        eq(c.w, p.tau - 1),
        eq(c.u, p.k as u64),
    ]);
    for (w, v) in [(w1, v1), (w2, v2)] {
        let term = prod(vec![n(acc), n(ex), n(v)]);
        b.set(
            w,
            Expr::add(
                Expr::mul(Expr::one_minus(acc_first.clone()), n(w)),
                Expr::mul(acc_any.clone(), term),
            ),
        );
    }
    let den = Expr::recip(
        1.0,
        vec![
            (1.0, Expr::relu(0.0, vec![(1.0, n(w2))])),
            (-1.0, c.finishing()),
        ],
    );
    b.set(
        out,
        Expr::add(
            Expr::mul(c.p_init(), n(acc)),
            prod(vec![c.not_init(), n(w1), den]),
        ),
    );
    let g = b.finish(out, p.t_u)?;
    Ok((g, tau))
}

/// The boosted graph `Q′`: its output at step `i·𝒯` is the boosted
/// conditional `q′(x_i | x_{:i})`.
pub fn build_boosted_rnn(
    q: &RnnGraph,
    d: &RnnGraph,
    alphabet: Alphabet,
    k: usize,
    alpha: f64,
    i0: usize,
) -> Result<(RnnGraph, ConstructionReport)> {
    let (g, tau) = assemble(q, d, alphabet, k, alpha, i0, false)?;
    let report = ConstructionReport {
        built_size: g.size(),
        built_hidden: g.hidden_size(),
        built_time: g.rnn_time,
        formula_size: boosted_size(q.size(), q.hidden_size(), d.size(), d.hidden_size(), k),
        formula_hidden: boosted_hidden(q.hidden_size(), d.hidden_size(), k),
        formula_time: boosted_time(alphabet, k, q.rnn_time, d.rnn_time),
        tau,
        equivalence_checked: false,
    };
    Ok((g, report))
}

/// The same assembly with every non-input node of `Q` and `D` copied, so
/// the persistent copies carry the full state.
pub fn build_boosted_rnn_simple(
    q: &RnnGraph,
    d: &RnnGraph,
    alphabet: Alphabet,
    k: usize,
    alpha: f64,
    i0: usize,
) -> Result<RnnGraph> {
    Ok(assemble(q, d, alphabet, k, alpha, i0, true)?.0)
}

/// Largest `|graph(y|s) − expected(y|s)|` over all prefixes of length below `n`.
pub fn max_conditional_error(
    graph: &RnnGraph,
    expected: &LanguageModel,
    format: Option<FixedPointFormat>,
) -> Result<f64> {
    let got = graph_conditionals(graph, expected.alphabet(), expected.n(), format)?;
    Ok(got
        .iter()
        .flatten()
        .zip(expected.tables().iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Builds `Q′`, checks it against `expected` within `tol` and marks the report.
pub fn build_and_check(
    q: &RnnGraph,
    d: &RnnGraph,
    k: usize,
    alpha: f64,
    i0: usize,
    expected: &LanguageModel,
    tol: f64,
) -> Result<(RnnGraph, ConstructionReport, f64)> {
    let (g, mut report) = build_boosted_rnn(q, d, expected.alphabet(), k, alpha, i0)?;
    let err = max_conditional_error(&g, expected, None)?;
    if err > tol {
        return Err(Error::Invariant(format!(
            "compiled conditionals deviate by {err:e} > {tol:e}"
        )));
    }
    report.equivalence_checked = true;
    Ok((g, report, err))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_formulas() {
        assert_eq!(boosted_size(10, 3, 5, 2, 2), 59);
        assert_eq!(boosted_hidden(3, 2, 2), 34);
        assert_eq!(boosted_time(Alphabet::binary(), 2, 3, 1), 70);
        assert_eq!(enumerator_size(10, 3, 2).0 + 1, 24);
        assert_eq!(indicator_size(2), (14, 9));
    }

    #[test]
    fn offsets() {
        let p = Params::new(Alphabet::binary(), 2, 0, 5).unwrap();
        assert_eq!(p.t_u, 50);
        assert_eq!(p.block_offsets(), vec![9, 19, 29, 39]);
        assert_eq!(&p.slot_offsets()[..3], &[4, 9, 14]);
        assert!(Params::new(Alphabet::binary(), 2, 2, 5).is_err());
        assert!(Params::new(Alphabet::binary(), 13, 0, 5).is_err());
    }
}
