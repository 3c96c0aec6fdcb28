//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::time::{Duration, Instant};

use common::{all_streams, bin, text_prob};
use ntpboost::boosting::{boost_text, boosted_next_token, Booster};
use ntpboost::construction::{
    build_boosted_rnn, build_boosted_rnn_simple, build_f1, build_f2, build_g,
    build_sync_enumerator, max_conditional_error,
};
use ntpboost::dist::{
    decode, lm_to_text, next_token_loss, text_to_lm, Alphabet, LanguageModel, TextDistribution,
};
use ntpboost::distinguisher::{max_advantage_oracle, pinsker_bound, Family};
use ntpboost::fixedpoint::{
    build_boosted_rnn_quantized, ceil_log2, fraction_error_bound, log_likelihood_gap,
    minimal_fraction_bits, minimal_integer_bits, product_error_bound, quantized_loss_gap,
    FixedPointFormat, QuantizedParams,
};
use ntpboost::random::{
    dyadic_lm, peaked_text, random_lm, random_table_distinguisher, random_text, rng,
};
use ntpboost::rnn::library::{
    and, base_c_increment, exp_binary, if_else, ind_between, ind_eq, ind_ge, ind_le, not, or,
};
use ntpboost::rnn::{
    build_transition, distinguisher_table_graph, lm_table_graph, verify_hidden_sufficiency, Expr,
    RnnGraph, TransitionKind,
};
use ntpboost::selfboost::{
    empirical_bad_set, make_schedule, run_algorithm, run_from_index, Variant,
};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("runtime {elapsed:.1?} exceeds {limit:?}")
    })
}

/// Instance shared by criteria 1 and 2.
fn boost_instance(i: u64) -> (TextDistribution, TextDistribution, ntpboost::Distinguisher) {
    let n = 3 + (i % 4) as usize;
    let k = 1 + ((i / 4) % 3) as usize;
    let mut r = rng(1000 + i);
    let p = random_text(bin(), n, 0.05, &mut r).unwrap();
    let q = random_text(bin(), n, 0.05, &mut r).unwrap();
    let d = random_table_distinguisher(bin(), n, k, &mut r).unwrap();
    (p, q, d)
}

fn kl_drop() -> Outcome {
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    for i in 0..200 {
        let (p, q, d) = boost_instance(i);
        let (n, k) = (p.n() as f64, d.k() as f64);
        let res = boost_text(&p, &q, &d).map_err(|e| e.to_string())?;
        let alpha = common::advantage(&d, &p, &q).abs();
        ensure((alpha - res.alpha).abs() < 1e-12, || {
            format!("instance {i}: α {} vs brute {alpha}", res.alpha)
        })?;
        let slack = common::kl(&p, &q) - alpha * alpha * n / (4.0 * k) + 1e-9
            - common::kl(&p, &res.q_boosted);
        ensure(slack >= 0.0, || {
            format!("instance {i}: drop short by {}", -slack)
        })?;
        worst = worst.min(slack);
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("200 instances, min slack {worst:.3e}"))
}

fn next_token_consistency() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let (p, q, d) = boost_instance(i);
        let res = boost_text(&p, &q, &d).map_err(|e| e.to_string())?;
        let (a, n) = (p.alphabet().size(), p.n());
        for (idx, &want) in res.q_boosted.probs().iter().enumerate() {
            let x = decode(idx, n, a);
            let mut got = 1.0;
            for t in 0..n {
                got *= boosted_next_token(&q, &res.applied, res.alpha, res.offset, &x[..t], x[t])
                    .map_err(|e| e.to_string())?;
            }
            worst = worst.max((got - want).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:.3e}"))?;
    Ok(format!("200 instances, max deviation {worst:.3e}"))
}

struct Compiled {
    q: RnnGraph,
    d: RnnGraph,
    g: RnnGraph,
    simple: RnnGraph,
    expected: LanguageModel,
    alphabet: Alphabet,
    n: usize,
    k: usize,
}

fn compiled_instance(s: u64) -> Compiled {
    let (alphabet, n, k) = if s % 5 == 4 {
        (Alphabet::new(3).unwrap(), 3, 1)
    } else {
        (bin(), 3 + (s % 2) as usize, 1 + ((s / 2) % 2) as usize)
    };
    let mut r = rng(2000 + s);
    let p = random_text(alphabet, n, 0.05, &mut r).unwrap();
    let qt = random_text(alphabet, n, 0.05, &mut r).unwrap();
    let d = random_table_distinguisher(alphabet, n, k, &mut r).unwrap();
    let res = boost_text(&p, &qt, &d).unwrap();
    let q = lm_table_graph(&text_to_lm(&qt)).unwrap();
    let dg = distinguisher_table_graph(&res.applied).unwrap();
    let (g, _) = build_boosted_rnn(&q, &dg, alphabet, k, res.alpha, res.offset).unwrap();
    let simple = build_boosted_rnn_simple(&q, &dg, alphabet, k, res.alpha, res.offset).unwrap();
    let expected = common::conditionals(&res.q_boosted);
    Compiled {
        q,
        d: dg,
        g,
        simple,
        expected,
        alphabet,
        n,
        k,
    }
}

fn compilation(instances: &[Compiled]) -> Outcome {
    let mut worst: f64 = 0.0;
    for (s, c) in instances.iter().enumerate() {
        let (q, d, g, k) = (&c.q, &c.d, &c.g, c.k);
        let size = q.size() + q.hidden_size() + d.size() + d.hidden_size() + 7 * k + 25;
        let hidden = q.hidden_size() + d.hidden_size() + 6 * k + 17;
        let time = (c.alphabet.pow(k) as u64 + 1) * k as u64 * (q.rnn_time.max(d.rnn_time) + 4);
        ensure(
            (g.size(), g.hidden_size(), g.rnn_time) == (size, hidden, time),
            || {
                format!(
                    "instance {s}: built ({}, {}, {}) vs formula ({size}, {hidden}, {time})",
                    g.size(),
                    g.hidden_size(),
                    g.rnn_time
                )
            },
        )?;
        let err = max_conditional_error(g, &c.expected, None).map_err(|e| e.to_string())?;
        ensure(err <= 1e-9, || {
            format!("instance {s}: conditional error {err:.3e}")
        })?;
        worst = worst.max(err);
    }
    Ok(format!(
        "{} instances, max conditional error {worst:.3e}",
        instances.len()
    ))
}

fn cross_construction(instances: &[Compiled]) -> Outcome {
    let mut samples = 0;
    for (s, c) in instances.iter().enumerate() {
        for x in all_streams(c.alphabet.size(), c.n) {
            let steps = c.n as u64 * c.g.rnn_time;
            let a = c.g.run(&x, steps).map_err(|e| e.to_string())?.samples;
            let b = c.simple.run(&x, steps).map_err(|e| e.to_string())?.samples;
            ensure(a == b, || format!("instance {s}: stream {x:?} differs"))?;
            samples += a.len();
        }
    }
    Ok(format!(
        "{} instances, {samples} scheduled outputs identical",
        instances.len()
    ))
}

/// Largest and smallest per-position sums over every subset of windows.
fn position_extremes(p: &TextDistribution, q: &TextDistribution, k: usize, i: usize) -> (f64, f64) {
    let (a, n) = (p.alphabet().size(), p.n());
    let len = common::window(n, k, i);
    let coefs: Vec<f64> = (0..a.pow(len as u32))
        .map(|c| common::cell(p, q, i, &decode(c, len, a)))
        .collect();
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for mask in 0u32..1 << coefs.len() {
        let s: f64 = coefs
            .iter()
            .enumerate()
            .filter(|(j, _)| mask >> j & 1 == 1)
            .map(|(_, c)| c)
            .sum();
        hi = hi.max(s);
        lo = lo.min(s);
    }
    (hi, lo)
}

fn pinsker() -> Outcome {
    let n = 4;
    let mut tightest: f64 = 0.0;
    for s in 0..50u64 {
        let k = 1 + (s % 2) as usize;
        let mut r = rng(3000 + s);
        let p = if s % 4 < 2 {
            random_text(bin(), n, 0.0, &mut r)
        } else {
            peaked_text(bin(), n, 2, &mut r)
        }
        .unwrap();
        let q = random_text(bin(), n, 0.05, &mut r).unwrap();
        let (mut hi, mut lo) = (0.0, 0.0);
        for i in 1..=n {
            let (h, l) = position_extremes(&p, &q, k, i);
            hi += h;
            lo += l;
        }
        let best = hi.max(-lo) / n as f64;
        let bound = (k as f64 / (2.0 * n as f64) * common::kl(&p, &q)).sqrt();
        ensure(best <= bound + 1e-12, || {
            format!("pair {s}: advantage {best} exceeds bound {bound}")
        })?;
        let (_, oracle) = max_advantage_oracle(&p, &q, k, &Family::WindowPredicates)
            .map_err(|e| e.to_string())?;
        ensure((oracle.abs() - best).abs() < 1e-9, || {
            format!("pair {s}: closed form {oracle} vs enumeration {best}")
        })?;
        let lib = pinsker_bound(&p, &q, k).map_err(|e| e.to_string())?;
        ensure((lib - bound).abs() < 1e-12, || {
            format!("pair {s}: library bound {lib} vs {bound}")
        })?;
        tightest = tightest.max(best / bound);
    }
    Ok(format!("50 pairs, max advantage/bound ratio {tightest:.3}"))
}

fn loss_identities() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in 0..100u64 {
        let mut r = rng(4000 + s);
        let alphabet = Alphabet::new(2 + (s % 2) as usize).unwrap();
        let n = 2 + (s % 4) as usize;
        let p = random_text(alphabet, n, 0.0, &mut r).unwrap();
        let q = random_lm(alphabet, n, 0.05, &mut r).unwrap();
        let loss = next_token_loss(&p, &q).map_err(|e| e.to_string())?;
        let qbar: Vec<f64> = (0..p.probs().len())
            .map(|i| text_prob(&q, &decode(i, n, alphabet.size())))
            .collect();
        let qbar = TextDistribution::new(alphabet, n, qbar).unwrap();
        let gap = (n as f64 * loss - common::kl(&p, &qbar) - common::entropy(&p)).abs();
        ensure(gap <= 1e-9, || format!("instance {s}: gap {gap:.3e}"))?;
        worst = worst.max(gap);
    }
    Ok(format!("100 instances, max gap {worst:.3e}"))
}

fn selfboost_loop() -> Outcome {
    let start = Instant::now();
    let eps = 0.3;
    let family = Family::OnePrefixTables;
    let (mut runs, mut outside, mut two) = (0, 0, 0);
    for s in 0..6u64 {
        let k = 1 + (s % 2) as usize;
        let p = peaked_text(bin(), 4, 1 + (s % 3) as usize, &mut rng(5000 + s)).unwrap();
        let sched =
            make_schedule(Variant::Plain, 4, k, 1, eps, bin(), 0).map_err(|e| e.to_string())?;
        let round_bound = 4.0 * k as f64 * 2f64.ln() / (eps * eps);
        let (bad, _) = empirical_bad_set(&sched, &p, &family, 1, 40).map_err(|e| e.to_string())?;
        let mut draw = rng(6000 + s);
        let mut traces = Vec::new();
        for j0 in 0..=10 {
            traces.push(run_from_index(&sched, &p, &family, j0, false).map_err(|e| e.to_string())?);
        }
        for _ in 0..3 {
            traces.push(
                run_algorithm(&sched, &p, &family, false, &mut draw).map_err(|e| e.to_string())?,
            );
        }
        for t in &traces {
            runs += 1;
            let last = t.visited.last().unwrap().index;
            ensure(((last - t.j0 - 1) as f64) < round_bound, || {
                format!(
                    "instance {s} j0 {}: {} extra indices",
                    t.j0,
                    last - t.j0 - 1
                )
            })?;
            ensure(t.boosting_rounds() as f64 <= round_bound + 1.0, || {
                format!("instance {s}: {} boosting rounds", t.boosting_rounds())
            })?;
            ensure(t.visited.windows(2).all(|w| w[1].loss <= w[0].loss), || {
                format!("instance {s}: losses increase")
            })?;
            let q = TextDistribution::new(bin(), 4, t.returned_probs.clone())
                .map_err(|e| e.to_string())?;
            let (_, adv) = max_advantage_oracle(&p, &q, k, &family).map_err(|e| e.to_string())?;
            ensure(adv.abs() <= eps + 1e-9, || {
                format!("instance {s} j0 {}: final advantage {adv}", t.j0)
            })?;
            let first = t.j0 + 1;
            let in_bad = if first <= 40 {
                bad.contains(&first)
            } else {
                false
            };
            if !in_bad {
                outside += 1;
                ensure(t.indices_visited() == 2, || {
                    format!(
                        "instance {s} j0 {}: {} indices visited outside B",
                        t.j0,
                        t.indices_visited()
                    )
                })?;
                two += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!(
        "{runs} runs, {two}/{outside} draws outside B visited two indices"
    ))
}

fn quantized() -> Outcome {
    let ell = 0.125;
    let mut cases = 0;
    for s in 0..12u64 {
        let (n, k) = (3 + (s % 2) as usize, 1 + ((s / 2) % 2) as usize);
        let mut r = rng(7000 + s);
        let p = peaked_text(bin(), n, 2, &mut r).unwrap();
        let q = dyadic_lm(bin(), n, 8, &mut r).unwrap();
        let qt = lm_to_text(&q).unwrap();
        let (d, _) = max_advantage_oracle(&p, &qt, k, &Family::WindowPredicates)
            .map_err(|e| e.to_string())?;
        let res = boost_text(&p, &qt, &d).map_err(|e| e.to_string())?;
        if res.alpha == 0.0 {
            continue;
        }
        let dg = distinguisher_table_graph(&res.applied).unwrap();
        let d_int = ceil_log2((n + k).max(2usize.pow(n as u32 + 1)) as u128 + 1);
        let fraction = minimal_fraction_bits(res.alpha, ell, k, 0).map_err(|e| e.to_string())?;
        let params = QuantizedParams {
            format: FixedPointFormat::new(
                minimal_integer_bits(d_int, bin(), k, dg.rnn_time).max(d_int),
                fraction,
            ),
            format_d: FixedPointFormat::new(d_int, 0),
            ell,
        };
        let qg = lm_table_graph(&q).unwrap();
        let out = build_boosted_rnn_quantized(&qg, &dg, bin(), k, res.alpha, res.offset, params)
            .map_err(|e| e.to_string())?;
        let got = out.conditionals(bin(), n).map_err(|e| e.to_string())?;
        let exact = Booster::from_lm(q.clone(), &res.applied, res.alpha, res.offset)
            .unwrap()
            .language_model()
            .unwrap();
        let err = got
            .tables()
            .iter()
            .flatten()
            .zip(exact.tables().iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        ensure(err <= out.max_output_error, || {
            format!(
                "instance {s}: error {err:.3e} > {:.3e}",
                out.max_output_error
            )
        })?;
        ensure(got.min_conditional() >= ell / 4.0, || {
            format!("instance {s}: min conditional {}", got.min_conditional())
        })?;
        let gain = log_likelihood_gap(&p, &got, &q).map_err(|e| e.to_string())?;
        let need = res.alpha * res.alpha * n as f64 / (8.0 * k as f64);
        ensure(gain >= need, || {
            format!("instance {s}: loss drop {gain} < {need}")
        })?;
        cases += 1;
    }
    ensure(cases >= 10, || format!("only {cases} usable instances"))?;
    let mut r = rng(7777);
    for _ in 0..10_000 {
        let m = r.random_range(1..=20usize);
        let delta = r.random_range(1e-6..1.0) / m as f64;
        let xs: Vec<f64> = (0..m).map(|_| r.random_range(0.0..=1.0)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| (x + r.random_range(-delta..=delta)).clamp(0.0, 1.0))
            .collect();
        let gap = (xs.iter().product::<f64>() - ys.iter().product::<f64>()).abs();
        let bound = product_error_bound(m, delta).map_err(|e| e.to_string())?;
        ensure(gap <= bound, || {
            format!("product: m={m} δ={delta} gap {gap} > {bound}")
        })?;
    }
    for _ in 0..10_000 {
        let ell = r.random_range(1e-3..=1.0);
        let y = r.random_range(ell..=1.0);
        let x = r.random_range(1e-9..=y);
        let delta = r.random_range(1e-9..ell);
        let bound = fraction_error_bound(x, y, delta, ell).map_err(|e| e.to_string())?;
        let v = (x + delta) / (y - delta);
        ensure(v <= bound * (1.0 + 1e-12), || {
            format!("fraction: x={x} y={y} δ={delta} ℓ={ell}: {v} > {bound}")
        })?;
    }
    for _ in 0..10_000 {
        let n = r.random_range(1..=3usize);
        let ell = r.random_range(0.05..0.45);
        let delta = r.random_range(0.0..ell * 0.99);
        let p = random_text(bin(), n, 0.0, &mut r).unwrap();
        let q = random_lm(bin(), n, 0.0, &mut r).unwrap();
        let tables: Vec<Vec<f64>> = q
            .tables()
            .iter()
            .map(|t| t.iter().map(|&v| ell + (1.0 - 2.0 * ell) * v).collect())
            .collect();
        let q = LanguageModel::from_tables(bin(), n, tables).unwrap();
        let tilde: Vec<Vec<f64>> = q
            .tables()
            .iter()
            .map(|t| {
                t.iter()
                    .map(|&v| v + r.random_range(-delta..=delta))
                    .collect()
            })
            .collect();
        let tilde = LanguageModel::from_tables_unnormalized(bin(), n, tilde).unwrap();
        let gap = log_likelihood_gap(&p, &q, &tilde).map_err(|e| e.to_string())?;
        let bound = quantized_loss_gap(&p, &q, &tilde, delta, ell).map_err(|e| e.to_string())?;
        ensure(gap <= bound + 1e-12, || {
            format!("loss gap: n={n} ℓ={ell} δ={delta}: {gap} > {bound}")
        })?;
    }
    Ok(format!("{cases} compiled instances; 3×10⁴ fuzz cases"))
}

fn eval(e: &Expr, vals: &[f64]) -> f64 {
    e.eval(vals).expect("no reciprocal in library gadgets")
}

fn transition_library() -> Outcome {
    let mut checks = 0usize;
    let x = Expr::node(0);
    for c in -20..=20 {
        let cf = c as f64;
        let gadgets = [
            ind_eq(x.clone(), cf),
            ind_le(x.clone(), cf),
            ind_ge(x.clone(), cf),
            build_transition(&TransitionKind::IndicatorEq { c: cf }).unwrap(),
            build_transition(&TransitionKind::IndicatorLe { c: cf }).unwrap(),
            build_transition(&TransitionKind::IndicatorGe { c: cf }).unwrap(),
        ];
        for v in -60..=60 {
            let want = [v == c, v <= c, v >= c, v == c, v <= c, v >= c];
            for (g, w) in gadgets.iter().zip(want) {
                ensure(eval(g, &[v as f64]) == w as u8 as f64, || {
                    format!("indicator c={c} x={v}")
                })?;
                checks += 1;
            }
            for hi in c..=c + 3 {
                let got = eval(&ind_between(x.clone(), cf, hi as f64), &[v as f64]);
                ensure(got == (c <= v && v <= hi) as u8 as f64, || {
                    format!("between [{c},{hi}] x={v}")
                })?;
                checks += 1;
            }
        }
    }
    for m in 1..=4usize {
        let leaves: Vec<Expr> = (0..m).map(Expr::node).collect();
        let gadgets = [
            or(leaves.clone()),
            and(leaves.clone()),
            build_transition(&TransitionKind::Or { arity: m }).unwrap(),
            build_transition(&TransitionKind::And { arity: m }).unwrap(),
        ];
        for bits in 0..1u32 << m {
            let vals: Vec<f64> = (0..m).map(|j| (bits >> j & 1) as f64).collect();
            let (any, all) = (bits != 0, bits == (1 << m) - 1);
            for (g, w) in gadgets.iter().zip([any, all, any, all]) {
                ensure(eval(g, &vals) == w as u8 as f64, || {
                    format!("boolean m={m} bits={bits:b}")
                })?;
                checks += 1;
            }
        }
    }
    for b in [0.0, 1.0] {
        ensure(eval(&not(x.clone()), &[b]) == 1.0 - b, || "not".into())?;
        for f1 in [-2.5, 0.0, 3.0] {
            for f2 in [-1.0, 0.5, 7.0] {
                let want = if b == 1.0 { f1 } else { f2 };
                ensure(
                    eval(
                        &if_else(Expr::node(0), Expr::node(1), Expr::node(2)),
                        &[b, f1, f2],
                    ) == want,
                    || "if_else".into(),
                )?;
                ensure(
                    eval(
                        &build_transition(&TransitionKind::IfElse).unwrap(),
                        &[b, f1, f2],
                    ) == want,
                    || "if_else kind".into(),
                )?;
                checks += 2;
            }
        }
    }
    for c in 2..=3u32 {
        for width in 1..=4usize {
            let digits: Vec<Expr> = (0..width).map(Expr::node).collect();
            let inc = base_c_increment(&digits, c);
            let modulus = (c as usize).pow(width as u32);
            for v in 0..modulus {
                let vals: Vec<f64> = (0..width)
                    .map(|j| ((v / (c as usize).pow(j as u32)) % c as usize) as f64)
                    .collect();
                let next = (v + 1) % modulus;
                for (j, g) in inc.iter().enumerate() {
                    let want = ((next / (c as usize).pow(j as u32)) % c as usize) as f64;
                    ensure(eval(g, &vals) == want, || {
                        format!("increment c={c} width={width} v={v} digit {j}")
                    })?;
                    let kind = build_transition(&TransitionKind::BaseCIncrement {
                        base: c,
                        width,
                        digit: j,
                    })
                    .unwrap();
                    ensure(eval(&kind, &vals) == want, || {
                        format!("increment kind c={c} width={width} v={v} digit {j}")
                    })?;
                    checks += 2;
                }
            }
        }
    }
    for alpha in [-1.3f64, -0.25, 0.0, 0.5, 2.0] {
        for b in [0.0, 1.0] {
            let want = (alpha * b).exp();
            ensure(eval(&exp_binary(x.clone(), alpha), &[b]) == want, || {
                format!("exp_binary α={alpha} x={b}")
            })?;
            ensure(
                eval(
                    &build_transition(&TransitionKind::ExpBinary { alpha }).unwrap(),
                    &[b],
                ) == want,
                || "exp kind".into(),
            )?;
            checks += 2;
        }
    }
    Ok(format!("{checks} exact evaluations"))
}

fn scrubbing() -> Outcome {
    let mut graphs = 0;
    for (s, &(k, n)) in [(1usize, 3usize), (2, 4)].iter().enumerate() {
        let mut r = rng(8000 + s as u64);
        let p = random_text(bin(), n, 0.05, &mut r).unwrap();
        let qt = random_text(bin(), n, 0.05, &mut r).unwrap();
        let d = random_table_distinguisher(bin(), n, k, &mut r).unwrap();
        let res = boost_text(&p, &qt, &d).unwrap();
        let q = lm_table_graph(&text_to_lm(&qt)).unwrap();
        let dg = distinguisher_table_graph(&res.applied).unwrap();
        let tau = q.rnn_time.max(dg.rnn_time) + 4;
        for i0 in 0..k {
            let mut built: Vec<(String, RnnGraph)> = vec![
                (
                    "enumerator".into(),
                    build_sync_enumerator(&q, bin(), k, i0, tau).unwrap(),
                ),
                ("f1".into(), build_f1(&q, bin(), k, i0, tau).unwrap()),
                (
                    "f2".into(),
                    build_f2(&dg, bin(), k, i0, res.alpha, tau).unwrap(),
                ),
                ("g".into(), build_g(bin(), k, i0, tau).unwrap()),
            ];
            built.push((
                "boosted".into(),
                build_boosted_rnn(&q, &dg, bin(), k, res.alpha, i0)
                    .unwrap()
                    .0,
            ));
            built.push((
                "simple".into(),
                build_boosted_rnn_simple(&q, &dg, bin(), k, res.alpha, i0).unwrap(),
            ));
            for (name, g) in &built {
                let rep = verify_hidden_sufficiency(g, 2, n + 2, 20, &mut r)
                    .map_err(|e| e.to_string())?;
                ensure(rep.all_passed(), || {
                    format!("{name} (k={k}, i0={i0}): {:?}", rep.first_divergence)
                })?;
                graphs += 1;
            }
        }
    }
    Ok(format!("{graphs} graphs × 20 scrubbed streams"))
}

fn report(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let secs = start.elapsed().as_secs_f64();
    match &outcome {
        Ok(detail) => println!("PASS [{id:>2}] {name}: {detail} ({secs:.1}s)"),
        Err(detail) => println!("FAIL [{id:>2}] {name}: {detail} ({secs:.1}s)"),
    }
    outcome.is_ok()
}

fn main() {
    let mut ok = true;
    ok &= report(1, "boosting KL drop", kl_drop);
    ok &= report(2, "next-token reconstruction", next_token_consistency);
    let mut instances = Vec::new();
    ok &= report(3, "compiled boosted graph", || {
        let start = Instant::now();
        instances = (0..50).map(compiled_instance).collect();
        let out = compilation(&instances)?;
        within(start.elapsed(), Duration::from_secs(300))?;
        Ok(out)
    });
    ok &= report(4, "efficient vs simple construction", || {
        cross_construction(&instances)
    });
    ok &= report(5, "advantage vs KL bound", pinsker);
    ok &= report(6, "loss/KL/entropy identity", loss_identities);
    ok &= report(7, "self-boosting loop", selfboost_loop);
    ok &= report(8, "quantized boosting", quantized);
    ok &= report(9, "transition library", transition_library);
    ok &= report(10, "hidden-set scrubbing", scrubbing);
    if !ok {
        std::process::exit(1);
    }
}
