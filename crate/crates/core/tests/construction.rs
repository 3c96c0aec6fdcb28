use ntpboost::boosting::{block_start_of, boost_text, Booster};
use ntpboost::construction::{
    build_boosted_rnn, build_boosted_rnn_simple, build_f1, build_f2, build_g,
    build_sync_enumerator, max_conditional_error,
};
use ntpboost::dist::{decode, text_to_lm, Alphabet, LanguageModel, Token};
use ntpboost::distinguisher::Distinguisher;
use ntpboost::random::{random_lm, random_table_distinguisher, random_text, rng};
use ntpboost::rnn::{
    distinguisher_table_graph, lm_table_graph, verify_hidden_sufficiency, Executor, RnnGraph,
};

fn bin() -> Alphabet {
    Alphabet::binary()
}

/// Values of `node` at every local offset of every token of `stream`.
fn trace(g: &RnnGraph, stream: &[Token], node: usize) -> Vec<Vec<f64>> {
    let mut ex = Executor::new(g, None);
    stream
        .iter()
        .map(|&x| {
            (0..g.rnn_time)
                .map(|_| {
                    ex.step(x).unwrap();
                    ex.state()[node]
                })
                .collect()
        })
        .collect()
}

fn all_streams(n: usize) -> Vec<Vec<Token>> {
    (0..1 << n).map(|c| decode(c, n, 2)).collect()
}

#[test]
fn enumerator_outputs_match_direct_evaluation() {
    let (n, k) = (4, 2);
    let lm = random_lm(bin(), n, 0.05, &mut rng(11)).unwrap();
    let q = lm_table_graph(&lm).unwrap();
    let tau = q.rnn_time + 2;
    for i0 in 0..k {
        let u = build_sync_enumerator(&q, bin(), k, i0, tau).unwrap();
        assert_eq!(u.size(), q.size() + q.hidden_size() + 2 * k + 6);
        assert_eq!(u.hidden_size(), q.hidden_size() + 2 * k + 6);
        for x in all_streams(n) {
            let tr = trace(&u, &x, u.output_id);
            for i in 1..=n {
                if i <= i0 {
                    let got = tr[i - 1][(u.rnn_time - 2) as usize];
                    assert_eq!(got, lm.cond(&x[..i - 1], x[i - 1]), "init i={i}");
                    continue;
                }
                let b = block_start_of(i, k, i0);
                for j in 0..4usize {
                    let z = decode(j, k, 2);
                    for r in 1..=k {
                        let off = j as u64 * k as u64 * tau + r as u64 * tau - 1;
                        let got = tr[i - 1][(off - 1) as usize];
                        let mut ctx = x[..b].to_vec();
                        ctx.extend_from_slice(&z[..r - 1]);
                        let want = if ctx.len() < n {
                            lm.cond(&ctx, z[r - 1])
                        } else {
                            0.5
                        };
                        assert_eq!(got, want, "i0={i0} x={x:?} i={i} j={j} r={r}");
                    }
                }
            }
        }
    }
}

fn instance(seed: u64, n: usize, k: usize) -> (LanguageModel, Distinguisher, RnnGraph, RnnGraph) {
    let mut r = rng(seed);
    let lm = random_lm(bin(), n, 0.05, &mut r).unwrap();
    let d = random_table_distinguisher(bin(), n, k, &mut r).unwrap();
    let (q, dg) = (
        lm_table_graph(&lm).unwrap(),
        distinguisher_table_graph(&d).unwrap(),
    );
    (lm, d, q, dg)
}

#[test]
fn components_match_analytic_values() {
    let (n, k) = (4, 2);
    for i0 in 0..k {
        let (lm, d, q, dg) = instance(20 + i0 as u64, n, k);
        let tau = q.rnn_time.max(dg.rnn_time) + 4;
        let alpha = 0.3;
        let f1 = build_f1(&q, bin(), k, i0, tau).unwrap();
        let f2 = build_f2(&dg, bin(), k, i0, alpha, tau).unwrap();
        let g = build_g(bin(), k, i0, tau).unwrap();
        assert_eq!(f1.size(), q.size() + q.hidden_size() + 2 * k + 7);
        assert_eq!(f2.size(), dg.size() + dg.hidden_size() + 2 * k + 7);
        assert_eq!((g.size(), g.hidden_size()), (3 * k + 8, 2 * k + 5));
        for x in all_streams(n) {
            let (t1, t2) = (trace(&f1, &x, f1.output_id), trace(&f2, &x, f2.output_id));
            let (tg1, tg2) = (
                trace(&g, &x, g.output_id),
                trace(&g, &x, g.aux_outputs["g2"]),
            );
            for i in i0 + 1..=n {
                let b = block_start_of(i, k, i0);
                let pos = i - b;
                for j in 0..4usize {
                    let z = decode(j, k, 2);
                    let at = ((j as u64 + 1) * k as u64 * tau - 2) as usize;
                    let want1 = lm.block_prob(&x[..b], &z);
                    assert!(
                        (t1[i - 1][at] - want1).abs() < 1e-15,
                        "f1 x={x:?} i={i} j={j}"
                    );
                    let mut ctx = x[..b].to_vec();
                    ctx.extend_from_slice(&z);
                    let want2 = (-alpha * d.eval(b + 1, &ctx) as f64).exp();
                    assert_eq!(t2[i - 1][at], want2, "f2 x={x:?} i={i} j={j}");
                    assert_eq!(
                        tg1[i - 1][at],
                        (z[..pos] == x[b..i]) as u8 as f64,
                        "g1 x={x:?} i={i} j={j}"
                    );
                    assert_eq!(
                        tg2[i - 1][at],
                        (z[..pos - 1] == x[b..i - 1]) as u8 as f64,
                        "g2 x={x:?} i={i} j={j}"
                    );
                }
            }
        }
    }
}

#[test]
fn boosted_graph_matches_analytic_conditionals() {
    let (n, k) = (4, 2);
    for seed in 0..4 {
        let mut r = rng(100 + seed);
        let p = random_text(bin(), n, 0.05, &mut r).unwrap();
        let qt = random_text(bin(), n, 0.05, &mut r).unwrap();
        let d = random_table_distinguisher(bin(), n, k, &mut r).unwrap();
        let res = boost_text(&p, &qt, &d).unwrap();
        let lm = text_to_lm(&qt);
        let q = lm_table_graph(&lm).unwrap();
        let dg = distinguisher_table_graph(&res.applied).unwrap();
        let (g, rep) = build_boosted_rnn(&q, &dg, bin(), k, res.alpha, res.offset).unwrap();
        assert!(rep.accounting_matches(), "{rep:?}");
        let err = max_conditional_error(&g, &res.lm_boosted, None).unwrap();
        assert!(err < 1e-9, "seed {seed}: err {err}");
        let simple = build_boosted_rnn_simple(&q, &dg, bin(), k, res.alpha, res.offset).unwrap();
        for x in all_streams(n) {
            assert_eq!(
                g.token_outputs(&x).unwrap(),
                simple.token_outputs(&x).unwrap()
            );
        }
        let exp = Booster::new(&qt, &res.applied, res.alpha, res.offset)
            .unwrap()
            .language_model()
            .unwrap();
        assert!(max_conditional_error(&g, &exp, None).unwrap() < 1e-9);
        let rep = verify_hidden_sufficiency(&g, 2, 6, 5, &mut rng(seed)).unwrap();
        assert!(rep.all_passed(), "{rep:?}");
    }
}
