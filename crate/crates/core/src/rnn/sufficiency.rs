//! Scrubbing harness for the hidden-set property: overwrite every node
//! outside the hidden set with garbage at a token boundary and check that
//! all later sampled outputs are unchanged.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Executor, RnnGraph};
use crate::dist::Token;
use crate::error::Result;

pub const SCRUB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub trial: usize,
    /// Number of tokens consumed before the scrub.
    pub scrub_after_tokens: usize,
    pub step: u64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyReport {
    pub trials: usize,
    pub passed: usize,
    pub first_divergence: Option<Divergence>,
}

impl SufficiencyReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.trials
    }
}

fn observed(graph: &RnnGraph) -> Vec<(String, usize)> {
    let mut out = vec![("output".to_string(), graph.output_id)];
    out.extend(graph.aux_outputs.iter().map(|(k, &v)| (k.clone(), v)));
    out
}

/// Runs `trials` random streams of `stream_len` tokens over `alphabet_size` symbols.
pub fn verify_hidden_sufficiency(
    graph: &RnnGraph,
    alphabet_size: usize,
    stream_len: usize,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<SufficiencyReport> {
    let mut report = SufficiencyReport {
        trials,
        passed: 0,
        first_divergence: None,
    };
    let watch = observed(graph);
    for trial in 0..trials {
        let stream: Vec<Token> = (0..stream_len)
            .map(|_| rng.random_range(0..alphabet_size) as Token)
            .collect();
        let cut = rng.random_range(1..stream_len.max(2));
        let garbage: Vec<f64> = (0..graph.size())
            .map(|_| rng.random_range(-2.0..=2.0))
            .collect();
        match check_stream(graph, &stream, cut, &garbage, &watch)? {
            None => report.passed += 1,
            Some((step, detail)) => {
                if report.first_divergence.is_none() {
                    report.first_divergence = Some(Divergence {
                        trial,
                        scrub_after_tokens: cut,
                        step,
                        detail,
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Compares a clean run against one scrubbed after `cut` tokens.
pub fn check_stream(
    graph: &RnnGraph,
    stream: &[Token],
    cut: usize,
    garbage: &[f64],
    watch: &[(String, usize)],
) -> Result<Option<(u64, String)>> {
    let times = graph.sample_times(stream.len());
    let tau = graph.rnn_time;
    let mut clean = Executor::new(graph, None);
    let mut dirty = Executor::new(graph, None);
    let mut next = times.iter().peekable();
    for (i, &x) in stream.iter().enumerate() {
        if i == cut {
            for id in graph.non_hidden_ids() {
                dirty.state_mut()[id] = garbage[id];
            }
        }
        for _ in 0..tau {
            clean.step(x)?;
            if let Err(e) = dirty.step(x) {
                return Ok(Some((clean.time(), format!("scrubbed run failed: {e}"))));
            }
            let t = clean.time();
            while next.peek().is_some_and(|&&s| s < t) {
                next.next();
            }
            if next.peek() == Some(&&t) && i >= cut {
                for (name, id) in watch {
                    let (a, b) = (clean.state()[*id], dirty.state()[*id]);
                    if (a - b).abs() > SCRUB_TOL * a.abs().max(1.0) {
                        return Ok(Some((
                            t,
                            format!("{name} (node {id}) is {b}, expected {a}"),
                        )));
                    }
                }
            }
        }
    }
    Ok(None)
}
