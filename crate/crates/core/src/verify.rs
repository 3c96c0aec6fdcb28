//! Brute-force oracle suite: every check compares a library result with an
//! independent computation from document probabilities or direct evaluation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boosting::{
    boost_text, boosted_next_token, components_f_g, normalization_z, BoostSummary,
};
use crate::construction::{
    build_boosted_rnn, build_boosted_rnn_simple, build_sync_enumerator, max_conditional_error,
};
use crate::dist::{
    decode, entropy, kl, lm_to_text, next_token_loss, text_to_lm, tv, Alphabet, LanguageModel,
    TextDistribution, Token,
};
use crate::distinguisher::{
    advantage, max_advantage_oracle, offset_decomposition, pinsker_bound, Distinguisher, Family,
};
use crate::fixedpoint::{
    boosted_lower_bound_check, build_boosted_rnn_quantized, ceil_log2, fraction_error_bound,
    log_likelihood_gap, minimal_fraction_bits, minimal_integer_bits, product_error_bound,
    quantized_loss_gap, FixedPointFormat, QuantizedParams,
};
use crate::random::{
    dyadic_lm, peaked_text, random_lm, random_table_distinguisher, random_text, rng, InstanceRng,
};
use crate::rnn::compile::distinguisher_from_graph;
use crate::rnn::{
    distinguisher_table_graph, embed_into_universal, graph_conditionals, lm_table_graph,
    verify_hidden_sufficiency, Expr, Node, RnnGraph,
};
use crate::selfboost::{bad_set_bound, empirical_bad_set, make_schedule, run_from_index, Variant};

/// Outcome of one oracle check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

type Outcome = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s(e: crate::error::Error) -> String {
    e.to_string()
}

fn bin() -> Alphabet {
    Alphabet::binary()
}

/// `Σ_{x : x_{:|s|} = s} p(x)` by scanning every document.
pub fn brute_marginal(p: &TextDistribution, s: &[Token]) -> f64 {
    let (a, n) = (p.alphabet().size(), p.n());
    p.probs()
        .iter()
        .enumerate()
        .filter(|(i, _)| decode(*i, n, a)[..s.len()] == *s)
        .map(|(_, v)| v)
        .sum()
}

/// `Π q(x_i | x_{:i})` by direct multiplication.
pub fn brute_text_prob(lm: &LanguageModel, x: &[Token]) -> f64 {
    (0..x.len()).map(|i| lm.cond(&x[..i], x[i])).product()
}

/// `Σ p log(p/q)` over the documents with `p > 0`.
pub fn brute_kl(p: &TextDistribution, q: &TextDistribution) -> f64 {
    p.probs()
        .iter()
        .zip(q.probs())
        .filter(|(&x, _)| x > 0.0)
        .map(|(&x, &y)| x * (x / y).ln())
        .sum()
}

/// Signed advantage by enumerating every `(y, x)` pair of documents.
pub fn brute_advantage(d: &Distinguisher, p: &TextDistribution, q: &TextDistribution) -> f64 {
    let (a, n, k) = (p.alphabet().size(), p.n(), d.k());
    let qlm = text_to_lm(q);
    let mut total = 0.0;
    for i in 1..=n {
        for (xi, &px) in p.probs().iter().enumerate() {
            let x = decode(xi, n, a);
            let m = k.min(n - i + 1);
            let mut model = 0.0;
            for wc in 0..a.pow(m as u32) {
                let w = decode(wc, m, a);
                let mut y = x[..i - 1].to_vec();
                y.extend_from_slice(&w);
                model += qlm.block_prob(&x[..i - 1], &w) * d.eval(i, &y) as f64;
            }
            total += px * (model - d.eval(i, &x) as f64);
        }
    }
    total / n as f64
}

fn all_streams(a: usize, n: usize) -> Vec<Vec<Token>> {
    (0..a.pow(n as u32)).map(|c| decode(c, n, a)).collect()
}

fn pair(r: &mut InstanceRng, n: usize) -> (TextDistribution, TextDistribution) {
    (
        random_text(bin(), n, 0.05, r).unwrap(),
        random_text(bin(), n, 0.05, r).unwrap(),
    )
}

fn chain_rule(r: &mut InstanceRng) -> Outcome {
    let lm = random_lm(bin(), 4, 0.05, r).map_err(e2s)?;
    let t = lm_to_text(&lm).map_err(e2s)?;
    for x in all_streams(2, 4) {
        let want = brute_text_prob(&lm, &x);
        ensure((t.prob(&x) - want).abs() < 1e-15, || {
            format!("document {x:?}")
        })?;
    }
    Ok("16 documents".into())
}

fn conditionals_ratio(r: &mut InstanceRng) -> Outcome {
    let t = random_text(bin(), 3, 0.05, r).map_err(e2s)?;
    let lm = text_to_lm(&t);
    let mut count = 0;
    for len in 0..3 {
        for s in all_streams(2, len) {
            for y in 0..2 {
                let mut sy = s.clone();
                sy.push(y);
                let want = brute_marginal(&t, &sy) / brute_marginal(&t, &s);
                ensure((lm.cond(&s, y) - want).abs() < 1e-12, || {
                    format!("prefix {s:?} token {y}")
                })?;
                count += 1;
            }
        }
    }
    Ok(format!("{count} conditionals"))
}

fn marginals_and_blocks(r: &mut InstanceRng) -> Outcome {
    let t = random_text(bin(), 4, 0.05, r).map_err(e2s)?;
    for s in all_streams(2, 2) {
        let m = t.marginal(&s).map_err(e2s)?;
        ensure((m - brute_marginal(&t, &s)).abs() < 1e-15, || {
            format!("marginal {s:?}")
        })?;
        for z in all_streams(2, 2) {
            let sz: Vec<Token> = s.iter().chain(&z).copied().collect();
            let want = brute_marginal(&t, &sz) / brute_marginal(&t, &s);
            ensure(
                (t.block_conditional(&s, &z).map_err(e2s)? - want).abs() < 1e-12,
                || format!("block {s:?}|{z:?}"),
            )?;
        }
    }
    Ok("4 prefixes × 4 blocks".into())
}

fn loss_entropy_tv(r: &mut InstanceRng) -> Outcome {
    let (p, q) = pair(r, 4);
    let lm = text_to_lm(&q);
    let want = -p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(&x, &y)| x * y.ln())
        .sum::<f64>()
        / 4.0;
    let loss = next_token_loss(&p, &lm).map_err(e2s)?;
    ensure((loss - want).abs() < 1e-12, || {
        format!("loss {loss} vs {want}")
    })?;
    let h = -p.probs().iter().map(|&x| x * x.ln()).sum::<f64>();
    ensure((entropy(&p) - h).abs() < 1e-12, || "entropy".into())?;
    let k = kl(&p, &q).map_err(e2s)?;
    let t = tv(&p, &q).map_err(e2s)?;
    ensure(t <= (k / 2.0).sqrt() + 1e-15, || {
        format!("TV {t} above √(KL/2)")
    })?;
    Ok(format!(
        "loss {loss:.6}, TV {t:.4} ≤ {:.4}",
        (k / 2.0).sqrt()
    ))
}

fn advantage_enumeration(r: &mut InstanceRng) -> Outcome {
    let (p, q) = pair(r, 4);
    let d = random_table_distinguisher(bin(), 4, 2, r).map_err(e2s)?;
    let got = advantage(&d, &p, &q).map_err(e2s)?;
    let want = brute_advantage(&d, &p, &q);
    ensure((got - want).abs() < 1e-12, || format!("{got} vs {want}"))?;
    let rep = offset_decomposition(&d, &p, &q).map_err(e2s)?;
    ensure((rep.reconstruct(4) - got).abs() < 1e-12, || {
        "offset decomposition".into()
    })?;
    Ok(format!("advantage {got:.6}"))
}

/// Per-position extremes over every subset of windows.
fn subset_extremes(p: &TextDistribution, q: &TextDistribution, k: usize) -> (f64, f64) {
    let (a, n) = (p.alphabet().size(), p.n());
    let qlm = text_to_lm(q);
    let (mut hi, mut lo) = (0.0, 0.0);
    for i in 1..=n {
        let len = (i + k - 1).min(n);
        let coefs: Vec<f64> = (0..a.pow(len as u32))
            .map(|c| {
                let x = decode(c, len, a);
                let s = &x[..i - 1];
                brute_marginal(p, s) * qlm.block_prob(s, &x[i - 1..]) - brute_marginal(p, &x)
            })
            .collect();
        let (mut h, mut l) = (f64::NEG_INFINITY, f64::INFINITY);
        for mask in 0u32..1 << coefs.len() {
            let v: f64 = coefs
                .iter()
                .enumerate()
                .filter(|(j, _)| mask >> j & 1 == 1)
                .map(|(_, c)| c)
                .sum();
            h = h.max(v);
            l = l.min(v);
        }
        hi += h;
        lo += l;
    }
    (hi / n as f64, lo / n as f64)
}

fn advantage_bound(r: &mut InstanceRng) -> Outcome {
    let mut ratio: f64 = 0.0;
    for k in 1..=2 {
        let p = peaked_text(bin(), 4, 2, r).map_err(e2s)?;
        let q = random_text(bin(), 4, 0.05, r).map_err(e2s)?;
        let (hi, lo) = subset_extremes(&p, &q, k);
        let best = hi.max(-lo);
        let (_, closed) =
            max_advantage_oracle(&p, &q, k, &Family::WindowPredicates).map_err(e2s)?;
        ensure((closed.abs() - best).abs() < 1e-12, || {
            format!("k={k}: closed form {closed} vs enumeration {best}")
        })?;
        let bound = pinsker_bound(&p, &q, k).map_err(e2s)?;
        ensure(best <= bound + 1e-12, || format!("k={k}: {best} > {bound}"))?;
        ratio = ratio.max(best / bound);
    }
    Ok(format!("max advantage/bound {ratio:.3}"))
}

fn boosting_drop(r: &mut InstanceRng) -> Outcome {
    let (p, q) = pair(r, 4);
    let d = random_table_distinguisher(bin(), 4, 2, r).map_err(e2s)?;
    let res = boost_text(&p, &q, &d).map_err(e2s)?;
    let alpha = brute_advantage(&d, &p, &q).abs();
    let slack = brute_kl(&p, &q) - alpha * alpha * 4.0 / 8.0 - brute_kl(&p, &res.q_boosted);
    ensure(slack >= -1e-9, || format!("drop short by {}", -slack))?;
    Ok(format!("α {alpha:.4}, slack {slack:.3e}"))
}

fn normalization(r: &mut InstanceRng) -> Outcome {
    let q = random_text(bin(), 4, 0.05, r).map_err(e2s)?;
    let d = random_table_distinguisher(bin(), 4, 2, r).map_err(e2s)?;
    let alpha = 0.4;
    for s in all_streams(2, 1) {
        let mut want = 0.0;
        for w in all_streams(2, 2) {
            let sw: Vec<Token> = s.iter().chain(&w).copied().collect();
            want += brute_marginal(&q, &sw) / brute_marginal(&q, &s)
                * (-alpha * d.eval(2, &sw) as f64).exp();
        }
        let got = normalization_z(&q, &d, alpha, &s).map_err(e2s)?;
        ensure((got - want).abs() < 1e-12, || {
            format!("Z({s:?}) {got} vs {want}")
        })?;
    }
    Ok("Z over Σ¹".into())
}

fn next_token_vs_text(r: &mut InstanceRng) -> Outcome {
    let (p, q) = pair(r, 4);
    let d = random_table_distinguisher(bin(), 4, 2, r).map_err(e2s)?;
    let res = boost_text(&p, &q, &d).map_err(e2s)?;
    let mut worst: f64 = 0.0;
    for len in 0..4 {
        for s in all_streams(2, len) {
            let m = brute_marginal(&res.q_boosted, &s);
            for y in 0..2 {
                let mut sy = s.clone();
                sy.push(y);
                let want = brute_marginal(&res.q_boosted, &sy) / m;
                let got = boosted_next_token(&q, &res.applied, res.alpha, res.offset, &s, y)
                    .map_err(e2s)?;
                worst = worst.max((got - want).abs());
            }
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:.3e}"))?;
    let block = |i: usize, s: &[Token], x: &[Token]| {
        components_f_g(&q, &res.applied, res.alpha, res.offset, i, s, x)
    };
    for x in all_streams(2, 4) {
        for i in res.offset + 1..=4 {
            let b = res.offset + (i - 1 - res.offset) / 2 * 2;
            for s in all_streams(2, 2) {
                let (f1, _, _, _) = block(i, &s, &x).map_err(e2s)?;
                let m = 2.min(4 - b);
                let want = if brute_marginal(&q, &x[..b]) > 0.0 {
                    let sw: Vec<Token> = x[..b].iter().chain(&s[..m]).copied().collect();
                    brute_marginal(&q, &sw) / brute_marginal(&q, &x[..b])
                        * 0.5f64.powi((2 - m) as i32)
                } else {
                    0.25
                };
                ensure((f1 - want).abs() < 1e-12, || {
                    format!("f1 at i={i} x={x:?} s={s:?}: {f1} vs {want}")
                })?;
            }
        }
    }
    Ok(format!("max deviation {worst:.3e}"))
}

fn graph_realizes_lm(r: &mut InstanceRng) -> Outcome {
    let lm = random_lm(bin(), 3, 0.05, r).map_err(e2s)?;
    let g = lm_table_graph(&lm).map_err(e2s)?;
    let got = graph_conditionals(&g, bin(), 3, None).map_err(e2s)?;
    ensure(got == lm.tables(), || "conditionals differ".into())?;
    let d = random_table_distinguisher(bin(), 4, 2, r).map_err(e2s)?;
    let back = distinguisher_from_graph(&distinguisher_table_graph(&d).map_err(e2s)?, bin(), 4, 2)
        .map_err(e2s)?;
    ensure(back.tables() == d.tables(), || {
        "distinguisher graph differs".into()
    })?;
    Ok("LM graph and distinguisher graph exact".into())
}

fn universal_embedding(r: &mut InstanceRng) -> Outcome {
    let (w1, w2) = (r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
    let (x, c, y) = (Expr::node(0), Expr::node(1), Expr::node(2));
    let nodes = vec![
        Node::input("x"),
        Node::new("count", 0.0, Expr::add(c.clone(), x.clone())),
        Node::new("last", 0.0, x),
        Node::new("out", 0.0, Expr::sum(0.5, vec![(w1, c), (w2, y)])),
    ];
    let g = RnnGraph::new(nodes, vec![0], 3, vec![1, 2], 1).map_err(e2s)?;
    let u = embed_into_universal(&g, 6, 3).map_err(e2s)?;
    for x in all_streams(2, 4) {
        ensure(
            u.token_outputs(&x).map_err(e2s)? == g.token_outputs(&x).map_err(e2s)?,
            || format!("stream {x:?}"),
        )?;
    }
    Ok("16 streams".into())
}

fn construction_chain(r: &mut InstanceRng) -> Outcome {
    let (p, qt) = pair(r, 4);
    let d = random_table_distinguisher(bin(), 4, 2, r).map_err(e2s)?;
    let res = boost_text(&p, &qt, &d).map_err(e2s)?;
    let q = lm_table_graph(&text_to_lm(&qt)).map_err(e2s)?;
    let dg = distinguisher_table_graph(&res.applied).map_err(e2s)?;
    let (g, rep) = build_boosted_rnn(&q, &dg, bin(), 2, res.alpha, res.offset).map_err(e2s)?;
    ensure(rep.accounting_matches(), || format!("{rep:?}"))?;
    let mut expected = Vec::new();
    for len in 0..4 {
        let mut t = Vec::new();
        for s in all_streams(2, len) {
            let m = brute_marginal(&res.q_boosted, &s);
            for y in 0..2 {
                let mut sy = s.clone();
                sy.push(y);
                t.push(brute_marginal(&res.q_boosted, &sy) / m);
            }
        }
        expected.push(t);
    }
    let expected = LanguageModel::from_tables_unnormalized(bin(), 4, expected).map_err(e2s)?;
    let err = max_conditional_error(&g, &expected, None).map_err(e2s)?;
    ensure(err <= 1e-9, || format!("conditional error {err:.3e}"))?;
    let simple = build_boosted_rnn_simple(&q, &dg, bin(), 2, res.alpha, res.offset).map_err(e2s)?;
    for x in all_streams(2, 4) {
        ensure(
            g.token_outputs(&x).map_err(e2s)? == simple.token_outputs(&x).map_err(e2s)?,
            || format!("simple differs on {x:?}"),
        )?;
    }
    let boosted = lm_to_text(&res.lm_boosted).map_err(e2s)?;
    let drop = (next_token_loss(&p, &text_to_lm(&qt)).map_err(e2s)?
        - next_token_loss(&p, &text_to_lm(&boosted)).map_err(e2s)?)
        * 4.0;
    ensure(drop >= res.alpha * res.alpha * 4.0 / 8.0 - 1e-9, || {
        format!("loss drop {drop}")
    })?;
    let u = build_sync_enumerator(&q, bin(), 2, res.offset, q.rnn_time + 2).map_err(e2s)?;
    for graph in [&g, &simple, &u] {
        let s = verify_hidden_sufficiency(graph, 2, 6, 5, r).map_err(e2s)?;
        ensure(s.all_passed(), || {
            format!("scrubbing: {:?}", s.first_divergence)
        })?;
    }
    Ok(format!("error {err:.3e}, {} nodes", g.size()))
}

fn quantized_construction(r: &mut InstanceRng) -> Outcome {
    let (n, k, ell) = (4, 2, 0.125);
    let p = peaked_text(bin(), n, 2, r).map_err(e2s)?;
    let q = dyadic_lm(bin(), n, 8, r).map_err(e2s)?;
    let qt = lm_to_text(&q).map_err(e2s)?;
    let (d, _) = max_advantage_oracle(&p, &qt, k, &Family::WindowPredicates).map_err(e2s)?;
    let res = boost_text(&p, &qt, &d).map_err(e2s)?;
    let dg = distinguisher_table_graph(&res.applied).map_err(e2s)?;
    let d_int = ceil_log2(2u128.pow(n as u32 + 1) + 1);
    let params = QuantizedParams {
        format: FixedPointFormat::new(
            minimal_integer_bits(d_int, bin(), k, 1),
            minimal_fraction_bits(res.alpha, ell, k, 0).map_err(e2s)?,
        ),
        format_d: FixedPointFormat::new(d_int, 0),
        ell,
    };
    let out = build_boosted_rnn_quantized(
        &lm_table_graph(&q).map_err(e2s)?,
        &dg,
        bin(),
        k,
        res.alpha,
        res.offset,
        params,
    )
    .map_err(e2s)?;
    let got = out.conditionals(bin(), n).map_err(e2s)?;
    let exact = text_to_lm(&res.q_boosted);
    let err = got
        .tables()
        .iter()
        .flatten()
        .zip(exact.tables().iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(err <= out.max_output_error, || {
        format!("error {err:.3e} > {:.3e}", out.max_output_error)
    })?;
    ensure(got.min_conditional() >= ell / 4.0, || "lower bound".into())?;
    let gain = log_likelihood_gap(&p, &got, &q).map_err(e2s)?;
    ensure(
        gain >= res.alpha * res.alpha * n as f64 / (8.0 * k as f64),
        || format!("gain {gain}"),
    )?;
    ensure(
        boosted_lower_bound_check(&q, &res.applied, res.alpha, res.offset, ell).map_err(e2s)?,
        || "ℓ/3 bound".into(),
    )?;
    Ok(format!("error {err:.3e} ≤ {:.3e}", out.max_output_error))
}

fn bound_fuzz(r: &mut InstanceRng) -> Outcome {
    for _ in 0..10_000 {
        let m = r.random_range(1..=8usize);
        let delta = r.random_range(1e-6..1.0) / m as f64;
        let xs: Vec<f64> = (0..m).map(|_| r.random_range(0.0..=1.0)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| (x + r.random_range(-delta..=delta)).clamp(0.0, 1.0))
            .collect();
        let gap = (xs.iter().product::<f64>() - ys.iter().product::<f64>()).abs();
        ensure(gap <= product_error_bound(m, delta).map_err(e2s)?, || {
            format!("product m={m} δ={delta}")
        })?;
        let ell = r.random_range(1e-3..=1.0);
        let y = r.random_range(ell..=1.0);
        let x = r.random_range(1e-9..=y);
        let delta = r.random_range(1e-9..ell);
        let v = (x + delta) / (y - delta);
        ensure(
            v <= fraction_error_bound(x, y, delta, ell).map_err(e2s)? * (1.0 + 1e-12),
            || format!("fraction x={x} y={y}"),
        )?;
    }
    for _ in 0..200 {
        let ell = r.random_range(0.05..0.45);
        let delta = r.random_range(0.0..ell * 0.99);
        let p = random_text(bin(), 3, 0.0, r).map_err(e2s)?;
        let base = random_lm(bin(), 3, 0.0, r).map_err(e2s)?;
        let q = LanguageModel::from_tables(
            bin(),
            3,
            base.tables()
                .iter()
                .map(|t| t.iter().map(|&v| ell + (1.0 - 2.0 * ell) * v).collect())
                .collect(),
        )
        .map_err(e2s)?;
        let tilde: Vec<Vec<f64>> = q
            .tables()
            .iter()
            .map(|t| {
                t.iter()
                    .map(|&v| v + r.random_range(-delta..=delta))
                    .collect()
            })
            .collect();
        let tilde = LanguageModel::from_tables_unnormalized(bin(), 3, tilde).map_err(e2s)?;
        let gap = log_likelihood_gap(&p, &q, &tilde).map_err(e2s)?;
        ensure(
            gap <= quantized_loss_gap(&p, &q, &tilde, delta, ell).map_err(e2s)? + 1e-12,
            || "loss gap".into(),
        )?;
        let d = random_table_distinguisher(bin(), 3, 2, r).map_err(e2s)?;
        let alpha = r.random_range(0.0..=1.0);
        ensure(
            boosted_lower_bound_check(&q, &d, alpha, r.random_range(0..2), ell).map_err(e2s)?,
            || "ℓ/3 bound".into(),
        )?;
    }
    Ok("10⁴ product and fraction cases, 200 loss-gap and lower-bound cases".into())
}

fn selfboost_pipeline(r: &mut InstanceRng) -> Outcome {
    let eps = 0.3;
    let p = peaked_text(bin(), 4, 2, r).map_err(e2s)?;
    let sched = make_schedule(Variant::Plain, 4, 2, 1, eps, bin(), 0).map_err(e2s)?;
    let fam = Family::OnePrefixTables;
    let t = run_from_index(&sched, &p, &fam, 1, false).map_err(e2s)?;
    let q = TextDistribution::new(bin(), 4, t.returned_probs.clone()).map_err(e2s)?;
    let (_, adv) = max_advantage_oracle(&p, &q, 2, &fam).map_err(e2s)?;
    ensure(adv.abs() <= eps + 1e-9, || format!("final advantage {adv}"))?;
    let (bad, losses) = empirical_bad_set(&sched, &p, &fam, 1, 20).map_err(e2s)?;
    let bound = bad_set_bound(losses[0], sched.threshold()).map_err(e2s)?;
    ensure(bad.len() as f64 <= bound, || {
        format!("|B| {} > {bound}", bad.len())
    })?;
    ensure(losses.windows(2).all(|w| w[1] <= w[0]), || {
        "losses increase".into()
    })?;
    let pinsker = pinsker_bound(&p, &q, 2).map_err(e2s)?;
    Ok(format!(
        "final advantage {:.4} (Pinsker {pinsker:.4}), |B| = {} ≤ {bound:.1}",
        adv.abs(),
        bad.len()
    ))
}

type CheckFn = fn(&mut InstanceRng) -> Outcome;

const CHECKS: &[(&str, CheckFn)] = &[
    ("chain-rule text table", chain_rule),
    ("conditionals from marginals", conditionals_ratio),
    ("marginals and block conditionals", marginals_and_blocks),
    ("loss, entropy and TV", loss_entropy_tv),
    ("advantage enumeration", advantage_enumeration),
    ("advantage bound and closed form", advantage_bound),
    ("boosting KL drop", boosting_drop),
    ("normalization Z", normalization),
    ("boosted next-token and f1", next_token_vs_text),
    ("table graphs", graph_realizes_lm),
    ("universal embedding", universal_embedding),
    ("boosted graph construction", construction_chain),
    ("quantized construction", quantized_construction),
    ("fixed-point bounds", bound_fuzz),
    ("self-boosting pipeline", selfboost_pipeline),
];

fn run_check(seed: u64, index: usize) -> Check {
    let (name, f) = CHECKS[index];
    let mut r = rng(seed.wrapping_mul(1_000_003).wrapping_add(index as u64));
    let (passed, detail) = match f(&mut r) {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Runs every check on its own thread with a generator derived from `seed`;
/// results come back in a fixed order.
pub fn run_suite(seed: u64) -> Vec<Check> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..CHECKS.len())
            .map(|i| scope.spawn(move || run_check(seed, i)))
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(i, h)| {
                h.join().unwrap_or_else(|_| Check {
                    name: CHECKS[i].0.to_string(),
                    passed: false,
                    detail: "check panicked".into(),
                })
            })
            .collect()
    })
}

/// Names of the checks in suite order.
pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Checks a stored boosting result against the brute-force oracles.
pub fn fixture_checks(
    p: &TextDistribution,
    q: &TextDistribution,
    d: &Distinguisher,
    expected: &BoostSummary,
) -> Vec<Check> {
    let check = |name: &str, out: Outcome| {
        let (passed, detail) = match out {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        Check {
            name: format!("fixture {name}"),
            passed,
            detail,
        }
    };
    let close = |what: &str, got: f64, want: f64| -> std::result::Result<(), String> {
        ensure((got - want).abs() <= 1e-9, || {
            format!("{what}: {got} vs {want}")
        })
    };
    let mut out = vec![check(
        "oracle values",
        (|| {
            let alpha = brute_advantage(d, p, q).abs();
            close("alpha", alpha, expected.alpha)?;
            close("kl_before", brute_kl(p, q), expected.kl_before)?;
            let k = d.k() as f64;
            close(
                "guaranteed_drop",
                alpha * alpha * p.n() as f64 / (4.0 * k),
                expected.guaranteed_drop,
            )?;
            Ok(format!("α {alpha:.6}"))
        })(),
    )];
    out.push(check(
        "boost",
        (|| {
            let res = boost_text(p, q, d).map_err(e2s)?;
            ensure(res.offset == expected.offset, || {
                format!("offset {} vs {}", res.offset, expected.offset)
            })?;
            ensure(res.complemented == expected.complemented, || {
                "complement flag".into()
            })?;
            close("kl_after", brute_kl(p, &res.q_boosted), expected.kl_after)?;
            ensure(
                expected.kl_after <= expected.kl_before - expected.guaranteed_drop + 1e-9,
                || "drop certificate".into(),
            )?;
            Ok(format!(
                "KL {:.6} -> {:.6}",
                expected.kl_before, expected.kl_after
            ))
        })(),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_suite(1) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
