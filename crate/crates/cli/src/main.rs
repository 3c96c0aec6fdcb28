//! Command-line front end: boosting, construction, simulation, self-boosting,
//! the oracle suite and trace reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use ntpboost::boosting::boost_text;
use ntpboost::construction::{build_and_check, build_boosted_rnn};
use ntpboost::dist::{text_to_lm, Alphabet, Token};
use ntpboost::distinguisher::Distinguisher;
use ntpboost::error::Error;
use ntpboost::fixedpoint::{
    build_boosted_rnn_quantized, ceil_log2, minimal_fraction_bits, minimal_integer_bits,
    FixedPointFormat, QuantizedParams,
};
use ntpboost::io::{self, LOAD_TOL};
use ntpboost::random::rng;
use ntpboost::rnn::{distinguisher_table_graph, graph_conditionals, lm_table_graph, RnnGraph};
use ntpboost::selfboost::{make_schedule, run_algorithm, SelfBoostTrace};
use ntpboost::verify::{fixture_checks, run_suite, Check};

#[derive(Parser)]
#[command(name = "ntpboost", version, about = "Next-token boosting laboratory")]
struct Cli {
    /// Seed for every random choice; self-boosting defaults to the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Normalization and equivalence tolerance (at least 1e-9).
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Boost a model against a distinguisher.
    Boost {
        /// Target distribution file.
        #[arg(long)]
        distribution: PathBuf,
        /// Model distribution file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        distinguisher: PathBuf,
        /// Also compile the boosted graph and check it against the boosted model.
        #[arg(long)]
        compile: bool,
    },
    /// Build the boosted graph from a model graph and a distinguisher.
    Construct {
        /// Model graph file.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        distinguisher: PathBuf,
        /// Window length; must match the distinguisher.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        alpha: f64,
        /// Block alignment `i₀`.
        #[arg(long)]
        offset: usize,
        /// Build the bounded-bit variant.
        #[arg(long)]
        quantized: bool,
        /// Lower bound on the model's conditionals (quantized only).
        #[arg(long)]
        ell: Option<f64>,
    },
    /// Run a graph and report its conditionals.
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        /// Document length.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        alphabet: usize,
        /// Comma-separated tokens whose per-token outputs are reported.
        #[arg(long)]
        stream: Option<String>,
        /// Execute in the graph's fixed-point format.
        #[arg(long)]
        quantized: bool,
    },
    /// Run the self-boosting loop from a config file.
    Selfboost {
        #[arg(long)]
        config: PathBuf,
        /// Compile every boosting round.
        #[arg(long)]
        compile: bool,
    },
    /// Run the brute-force oracle suite.
    Verify {
        /// Fixture directory checked in addition to the suite.
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
    /// Summarize a self-boosting trace as plot-ready CSV.
    Report {
        #[arg(long)]
        trace: PathBuf,
    },
}

fn error_json(e: &anyhow::Error) -> Value {
    match e.downcast_ref::<Error>() {
        Some(err) => {
            let pointer = match err {
                Error::Schema { pointer, .. } => Some(pointer.clone()),
                _ => None,
            };
            json!({"kind": err.kind(), "message": err.to_string(), "pointer": pointer})
        }
        None => json!({"kind": "usage", "message": format!("{e:#}"), "pointer": null}),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let v = json!({"kind": "usage", "message": e.to_string().trim(), "pointer": null});
            eprintln!("{v}");
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(2)
        }
    }
}

fn tolerance(cli: &Cli) -> anyhow::Result<f64> {
    match cli.tolerance {
        None => Ok(LOAD_TOL),
        Some(t) if t >= LOAD_TOL && t.is_finite() => Ok(t),
        Some(t) => bail!("tolerance {t} is below the default {LOAD_TOL}"),
    }
}

/// Writes a line to stdout, ignoring a closed pipe.
fn say(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn pretty(v: &Value) -> anyhow::Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn emit(out: &Path, name: &str, v: &Value) -> anyhow::Result<()> {
    io::write_atomic(&out.join(name), &pretty(v)?)?;
    Ok(())
}

fn distinguisher_graph(d: &Distinguisher) -> anyhow::Result<RnnGraph> {
    Ok(match d.graph() {
        Some(g) => g.clone(),
        None => distinguisher_table_graph(d)?,
    })
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    let tol = tolerance(cli)?;
    std::fs::create_dir_all(&cli.out)
        .map_err(Error::from)
        .with_context(|| format!("creating {}", cli.out.display()))?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Boost {
            distribution,
            model,
            distinguisher,
            compile,
        } => {
            let p = io::load_distribution(distribution, tol)?;
            let q = io::load_distribution(model, tol)?;
            let d = io::load_distinguisher(distinguisher)?;
            let res = boost_text(&p, &q, &d)?;
            let mut summary = serde_json::to_value(res.summary())?;
            summary["certificate_holds"] = json!(res.certificate_holds());
            if *compile {
                let qg = lm_table_graph(&text_to_lm(&q))?;
                let dg = distinguisher_table_graph(&res.applied)?;
                let (g, report, err) =
                    build_and_check(&qg, &dg, d.k(), res.alpha, res.offset, &res.lm_boosted, tol)?;
                emit(out, "q_prime.json", &io::graph_to_json(&g))?;
                summary["construction"] = serde_json::to_value(report)?;
                summary["max_conditional_error"] = json!(err);
            }
            emit(
                out,
                "boosted_distribution.json",
                &io::distribution_to_json(&res.q_boosted),
            )?;
            emit(out, "boost.json", &summary)?;
            say(&serde_json::to_string_pretty(&summary)?);
        }
        Command::Construct {
            graph,
            distinguisher,
            k,
            alpha,
            offset,
            quantized,
            ell,
        } => {
            let q = io::load_graph(graph)?;
            let d = io::load_distinguisher(distinguisher)?;
            if let Some(k) = k {
                if *k != d.k() {
                    bail!("--k {k} does not match the distinguisher window {}", d.k());
                }
            }
            let dg = distinguisher_graph(&d)?;
            let summary = if *quantized {
                let ell = ell.ok_or_else(|| anyhow!("--quantized needs --ell"))?;
                let format_d = dg.bits.unwrap_or_else(|| {
                    let range = (d.n() + d.k()).max(1 << (d.n() + 1)) as u128;
                    FixedPointFormat::new(ceil_log2(range + 1), 0)
                });
                let params = QuantizedParams {
                    format: FixedPointFormat::new(
                        minimal_integer_bits(format_d.integer, d.alphabet(), d.k(), dg.rnn_time),
                        minimal_fraction_bits(*alpha, ell, d.k(), format_d.fraction)?,
                    ),
                    format_d,
                    ell,
                };
                let res = build_boosted_rnn_quantized(
                    &q,
                    &dg,
                    d.alphabet(),
                    d.k(),
                    *alpha,
                    *offset,
                    params,
                )?;
                emit(out, "q_prime.json", &io::graph_to_json(&res.graph))?;
                json!({
                    "construction": res.report,
                    "format": res.format,
                    "loss_drop_certificate": res.loss_drop_certificate,
                    "prob_lower_bound": res.prob_lower_bound,
                    "max_output_error": res.max_output_error,
                })
            } else {
                let (g, report) = build_boosted_rnn(&q, &dg, d.alphabet(), d.k(), *alpha, *offset)?;
                emit(out, "q_prime.json", &io::graph_to_json(&g))?;
                json!({"construction": report, "accounting_matches": report.accounting_matches()})
            };
            emit(out, "construction.json", &summary)?;
            say(&serde_json::to_string_pretty(&summary)?);
        }
        Command::Simulate {
            graph,
            n,
            alphabet,
            stream,
            quantized,
        } => {
            let g = io::load_graph(graph)?;
            let a = Alphabet::new(*alphabet)?;
            let format = if *quantized {
                Some(g.bits.ok_or_else(|| {
                    Error::schema("/bits", "--quantized needs a bits block in the graph")
                })?)
            } else {
                None
            };
            let tables = graph_conditionals(&g, a, *n, format)?;
            let mut v = json!({"alphabet_size": alphabet, "n": n, "quantized": quantized, "tables": tables});
            if let Some(s) = stream {
                let tokens = parse_stream(s, *alphabet)?;
                let steps = tokens.len() as u64 * g.rnn_time;
                let trace = g.run_with_format(&tokens, steps, format)?;
                let outputs: Vec<f64> = trace.samples.iter().map(|s| s.value).collect();
                v["stream"] = json!(tokens);
                v["outputs"] = json!(outputs);
            }
            emit(out, "simulation.json", &v)?;
            say(&serde_json::to_string_pretty(&v)?);
        }
        Command::Selfboost { config, compile } => {
            let cfg = io::load_selfboost_config(config)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let p = io::load_distribution(&base.join(&cfg.distribution_file), tol)?;
            let family = io::load_family(&base.join(&cfg.family_file))?;
            let schedule = make_schedule(
                cfg.variant,
                cfg.d_bound,
                cfg.k,
                cfg.tau,
                cfg.epsilon,
                p.alphabet(),
                cfg.b_d,
            )?;
            let seed = cli.seed.unwrap_or(cfg.seed);
            let trace = run_algorithm(
                &schedule,
                &p,
                &family,
                cfg.compile || *compile,
                &mut rng(seed),
            )?;
            emit(out, "selfboost_trace.json", &serde_json::to_value(&trace)?)?;
            io::write_atomic(&out.join("selfboost_rounds.csv"), &rounds_csv(&trace)?)?;
            io::write_atomic(&out.join("selfboost_boosting.csv"), &boosting_csv(&trace)?)?;
            say(&serde_json::to_string_pretty(&trace_summary(&trace))?);
        }
        Command::Verify { fixtures } => {
            let seed = cli.seed.unwrap_or(0);
            let mut checks = run_suite(seed);
            if let Some(dir) = fixtures {
                checks.extend(fixture_suite(dir, tol)?);
            }
            let all = checks.iter().all(|c| c.passed);
            for c in &checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                say(&format!("{status} {}: {}", c.name, c.detail));
            }
            emit(
                out,
                "verify.json",
                &json!({"seed": seed, "all_passed": all, "checks": checks}),
            )?;
            if !all {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Report { trace } => {
            let v = io::read_json(trace)?;
            let trace: SelfBoostTrace = serde_json::from_value(v)
                .map_err(|e| Error::schema("", format!("not a self-boosting trace: {e}")))?;
            io::write_atomic(&out.join("report_rounds.csv"), &rounds_csv(&trace)?)?;
            let summary = trace_summary(&trace);
            emit(out, "report.json", &summary)?;
            say(&serde_json::to_string_pretty(&summary)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_stream(s: &str, alphabet: usize) -> anyhow::Result<Vec<Token>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let v: Token = t
                .trim()
                .parse()
                .with_context(|| format!("bad token {t:?}"))?;
            if (v as usize) >= alphabet {
                bail!("token {v} outside an alphabet of size {alphabet}");
            }
            Ok(v)
        })
        .collect()
}

fn rounds_csv(trace: &SelfBoostTrace) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["round", "N_i", "H_i", "T_i", "L_i", "KL", "alpha"])?;
    for r in &trace.visited {
        let c = &r.constraints;
        w.write_record([
            r.index.to_string(),
            c.size.to_string(),
            c.hidden.to_string(),
            c.time.map(|t| t.to_string()).unwrap_or_default(),
            r.loss.to_string(),
            r.kl.to_string(),
            r.alpha.to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

fn boosting_csv(trace: &SelfBoostTrace) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "round",
        "size",
        "hidden",
        "time",
        "loss",
        "kl",
        "best_advantage",
        "alpha",
        "offset",
        "compiled",
    ])?;
    for r in &trace.rounds {
        w.write_record([
            r.round.to_string(),
            r.size.to_string(),
            r.hidden.to_string(),
            r.time.map(|t| t.to_string()).unwrap_or_default(),
            r.loss.to_string(),
            r.kl.to_string(),
            r.best_advantage.to_string(),
            r.alpha.to_string(),
            r.offset.to_string(),
            r.compiled.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    Ok(w.into_inner()?)
}

fn trace_summary(t: &SelfBoostTrace) -> Value {
    json!({
        "j0": t.j0,
        "j0_range": t.j0_range,
        "threshold": t.threshold,
        "indices_visited": t.indices_visited(),
        "boosting_rounds": t.boosting_rounds(),
        "returned_index": t.returned_index,
        "final_loss": t.visited.iter().find(|r| r.index == t.returned_index).map(|r| r.loss),
        "final_max_advantage": t.final_max_advantage,
        "certificate_ok": t.certificate_ok,
        "termination": t.termination,
    })
}

fn fixture_suite(dir: &Path, tol: f64) -> anyhow::Result<Vec<Check>> {
    let p = io::load_distribution(&dir.join("p.json"), tol)?;
    let q = io::load_distribution(&dir.join("q.json"), tol)?;
    let d = io::load_distinguisher(&dir.join("d.json"))?;
    let expected = io::read_json(&dir.join("expected_boost.json"))?;
    let expected = serde_json::from_value(expected)
        .map_err(|e| Error::schema("", format!("expected_boost.json: {e}")))?;
    Ok(fixture_checks(&p, &q, &d, &expected))
}
