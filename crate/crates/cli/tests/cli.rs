use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ntpboost::dist::{Alphabet, LanguageModel};
use ntpboost::io;
use ntpboost::rnn::lm_table_graph;
use serde_json::{json, Value};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ntpboost-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ntpboost"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Path, args: &[&str]) -> Output {
    let o = run(out, args);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn error_of(o: &Output) -> Value {
    assert_eq!(o.status.code(), Some(2));
    serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap()
}

fn f(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Conditionals `q(y | s) = q̄(s·y)/q̄(s)` straight from document probabilities.
fn conditionals_from_probs(probs: &[f64], n: usize) -> Vec<Vec<f64>> {
    let marginal = |len: usize, code: usize| -> f64 {
        let span = 1usize << (n - len);
        probs[code * span..(code + 1) * span].iter().sum()
    };
    (0..n)
        .map(|len| {
            (0..1usize << (len + 1))
                .map(|c| marginal(len + 1, c) / marginal(len, c >> 1))
                .collect()
        })
        .collect()
}

fn fixture_args(cmd: &str) -> Vec<String> {
    let fx = fixtures();
    vec![
        cmd.into(),
        "--distribution".into(),
        f(&fx.join("p.json")).into(),
        "--model".into(),
        f(&fx.join("q.json")).into(),
        "--distinguisher".into(),
        f(&fx.join("d.json")).into(),
    ]
}

#[test]
fn boost_then_simulate_agree() {
    let out = scratch("boost-sim");
    let mut args = fixture_args("boost");
    args.push("--compile".into());
    ok(&out, &args.iter().map(String::as_str).collect::<Vec<_>>());
    let summary = read(&out.join("boost.json"));
    assert_eq!(summary["construction"]["equivalence_checked"], json!(true));
    let boosted = read(&out.join("boosted_distribution.json"));
    let probs: Vec<f64> = serde_json::from_value(boosted["probs"].clone()).unwrap();
    let expected = conditionals_from_probs(&probs, 3);

    ok(
        &out,
        &[
            "simulate",
            "--graph",
            f(&out.join("q_prime.json")),
            "--n",
            "3",
            "--stream",
            "1,1,0",
        ],
    );
    let sim = read(&out.join("simulation.json"));
    let tables: Vec<Vec<f64>> = serde_json::from_value(sim["tables"].clone()).unwrap();
    for (got, want) in tables.iter().flatten().zip(expected.iter().flatten()) {
        assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
    }
    let outputs: Vec<f64> = serde_json::from_value(sim["outputs"].clone()).unwrap();
    let want = [expected[0][1], expected[1][3], expected[2][6]];
    for (got, want) in outputs.iter().zip(want) {
        assert!((got - want).abs() <= 1e-9);
    }
}

#[test]
fn boost_matches_fixture() {
    let out = scratch("boost-fixture");
    ok(
        &out,
        &fixture_args("boost")
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    );
    let got = std::fs::read(out.join("boost.json")).unwrap();
    let want = std::fs::read(fixtures().join("expected_boost.json")).unwrap();
    assert_eq!(got, want);
}

#[test]
fn construct_plain_and_quantized() {
    let out = scratch("construct");
    let lm = LanguageModel::uniform(Alphabet::binary(), 3).unwrap();
    let graph = out.join("q_graph.json");
    io::write_json(&graph, &io::graph_to_json(&lm_table_graph(&lm).unwrap())).unwrap();
    let d = fixtures().join("d.json");
    let args = [
        "construct",
        "--graph",
        f(&graph),
        "--distinguisher",
        f(&d),
        "--k",
        "2",
        "--alpha",
        "0.25",
        "--offset",
        "1",
    ];
    ok(&out, &args);
    let report = read(&out.join("construction.json"));
    assert_eq!(report["accounting_matches"], json!(true));

    let mut q_args = args.to_vec();
    q_args.extend(["--quantized", "--ell", "0.5"]);
    ok(&out, &q_args);
    let report = read(&out.join("construction.json"));
    let bound = report["max_output_error"].as_f64().unwrap();
    let qp = out.join("q_prime.json");
    assert!(read(&qp)["bits"].is_object());
    ok(
        &out,
        &["simulate", "--graph", f(&qp), "--n", "3", "--quantized"],
    );
    let quant: Vec<Vec<f64>> =
        serde_json::from_value(read(&out.join("simulation.json"))["tables"].clone()).unwrap();
    ok(&out, &["simulate", "--graph", f(&qp), "--n", "3"]);
    let exact: Vec<Vec<f64>> =
        serde_json::from_value(read(&out.join("simulation.json"))["tables"].clone()).unwrap();
    for (a, b) in quant.iter().flatten().zip(exact.iter().flatten()) {
        assert!((a - b).abs() <= bound, "{a} vs {b}, bound {bound}");
        assert!(*a >= 0.5 / 4.0);
    }

    let o = run(
        &out,
        &[
            "construct",
            "--graph",
            f(&graph),
            "--distinguisher",
            f(&d),
            "--k",
            "3",
            "--alpha",
            "0.25",
            "--offset",
            "1",
        ],
    );
    assert_eq!(error_of(&o)["kind"], json!("usage"));
}

#[test]
fn runs_are_byte_identical() {
    let cfg = fixtures().join("selfboost.json");
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    for out in [&a, &b] {
        ok(out, &["selfboost", "--config", f(&cfg)]);
        ok(
            out,
            &fixture_args("boost")
                .iter()
                .map(String::as_str)
                .collect::<Vec<_>>(),
        );
        ok(
            out,
            &["report", "--trace", f(&out.join("selfboost_trace.json"))],
        );
    }
    for name in [
        "selfboost_trace.json",
        "selfboost_rounds.csv",
        "selfboost_boosting.csv",
        "boost.json",
        "boosted_distribution.json",
        "report.json",
        "report_rounds.csv",
    ] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let csv = std::fs::read_to_string(a.join("selfboost_rounds.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "round,N_i,H_i,T_i,L_i,KL,alpha"
    );
    let trace = read(&a.join("selfboost_trace.json"));
    assert!(trace["final_max_advantage"].as_f64().unwrap() <= 0.2 + 1e-9);

    let c = scratch("det-c");
    ok(&c, &["--seed", "99", "selfboost", "--config", f(&cfg)]);
    let other = read(&c.join("selfboost_trace.json"));
    let lo = other["j0_range"][0].as_u64().unwrap();
    let hi = other["j0_range"][1].as_u64().unwrap();
    assert!((lo..=hi).contains(&other["j0"].as_u64().unwrap()));
}

#[test]
fn verify_fixtures_all_pass() {
    let out = scratch("verify");
    let o = ok(&out, &["verify", "--fixtures", f(&fixtures())]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
    assert!(text.contains("fixture boost"));
    let matrix = read(&out.join("verify.json"));
    assert_eq!(matrix["all_passed"], json!(true));
}

#[test]
fn errors_are_structured() {
    let out = scratch("errors");
    let bad = out.join("bad.json");
    std::fs::write(
        &bad,
        r#"{"alphabet_size": 2, "n": 1, "probs": [0.49, 0.49]}"#,
    )
    .unwrap();
    let fx = fixtures();
    let args = |p: &Path| {
        vec![
            "boost".to_string(),
            "--distribution".into(),
            f(p).into(),
            "--model".into(),
            f(&fx.join("q.json")).into(),
            "--distinguisher".into(),
            f(&fx.join("d.json")).into(),
        ]
    };
    let o = run(
        &out,
        &args(&bad).iter().map(String::as_str).collect::<Vec<_>>(),
    );
    let e = error_of(&o);
    assert_eq!(e["kind"], json!("normalization"));
    assert!(e["message"].as_str().unwrap().contains("tolerance"));

    std::fs::write(
        &bad,
        r#"{"alphabet_size": 2, "n": 2, "probs": [0.5, "x", 0.25, 0.25]}"#,
    )
    .unwrap();
    let e = error_of(&run(
        &out,
        &args(&bad).iter().map(String::as_str).collect::<Vec<_>>(),
    ));
    assert_eq!(e["kind"], json!("schema"));
    assert_eq!(e["pointer"], json!("/probs/1"));

    let graph = out.join("graph.json");
    std::fs::write(
        &graph,
        r#"{"nodes": [{"id": 0, "expr": null},
                      {"id": 1, "init": 0, "expr": "(relu 0 (1 (node 2)))"},
                      {"id": 2, "init": 0, "expr": "(node 0)"}],
            "input_ids": [0], "output_id": 2, "hidden_ids": [1], "rnn_time": 1}"#,
    )
    .unwrap();
    let e = error_of(&run(&out, &["simulate", "--graph", f(&graph), "--n", "2"]));
    assert_eq!(e["kind"], json!("invariant"));
    assert!(
        e["message"].as_str().unwrap().contains("edge 2 -> 1"),
        "{e}"
    );

    let e = error_of(&run(&out, &["--tolerance", "1e-12", "verify"]));
    assert_eq!(e["kind"], json!("usage"));
    let e = error_of(&run(&out, &["nonsense"]));
    assert_eq!(e["kind"], json!("usage"));
    assert!(!out.join("boost.json").exists());
}
