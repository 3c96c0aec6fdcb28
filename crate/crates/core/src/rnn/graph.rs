//! Recurrent circuit graphs and their synchronous execution.
//!
//! At step `t` (1-based) every input node holds token `x_{⌈t/𝒯⌉}`. Every
//! other node is recomputed from the current input values and the values
//! of all non-input nodes at step `t−1`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::expr::{Expr, MAX_EXPR_DEPTH};
use crate::dist::Token;
use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointFormat;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub init: f64,
    /// `None` exactly for input nodes.
    pub expr: Option<Expr>,
}

impl Node {
    pub fn input(name: impl Into<String>) -> Self {
        Node {
            name: name.into(),
            init: 0.0,
            expr: None,
        }
    }

    pub fn new(name: impl Into<String>, init: f64, expr: Expr) -> Self {
        Node {
            name: name.into(),
            init,
            expr: Some(expr),
        }
    }
}

/// Steps at which the output node is sampled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Step `i·𝒯` for every token `i`.
    TokenEnd,
    /// Steps `(i−1)·𝒯 + o` for every token `i` and offset `o ∈ [1, 𝒯]`.
    Offsets(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnGraph {
    pub nodes: Vec<Node>,
    pub input_ids: Vec<usize>,
    pub output_id: usize,
    pub hidden_ids: Vec<usize>,
    pub rnn_time: u64,
    pub schedule: Schedule,
    pub bits: Option<FixedPointFormat>,
    /// Named secondary nodes reported alongside the output.
    pub aux_outputs: BTreeMap<String, usize>,
    /// Finite value sets enforced after every step.
    pub value_domains: BTreeMap<usize, Vec<f64>>,
    /// Nodes read as zero on the first step of every token.
    pub reset_on_input: Vec<usize>,
}

impl RnnGraph {
    /// A graph with the given nodes and default metadata; call [`RnnGraph::validate`] after editing.
    pub fn new(
        nodes: Vec<Node>,
        input_ids: Vec<usize>,
        output_id: usize,
        hidden_ids: Vec<usize>,
        rnn_time: u64,
    ) -> Result<Self> {
        let g = RnnGraph {
            nodes,
            input_ids,
            output_id,
            hidden_ids,
            rnn_time,
            schedule: Schedule::TokenEnd,
            bits: None,
            aux_outputs: BTreeMap::new(),
            value_domains: BTreeMap::new(),
            reset_on_input: Vec::new(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_ids.len()
    }

    pub fn is_input(&self, id: usize) -> bool {
        self.input_ids.contains(&id)
    }

    /// Directed edges `(source, target)` read off expression leaves.
    pub fn edges(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for (v, node) in self.nodes.iter().enumerate() {
            if let Some(e) = &node.expr {
                for u in e.leaves() {
                    out.insert((u, v));
                }
            }
        }
        out
    }

    pub fn non_input_ids(&self) -> Vec<usize> {
        (0..self.size()).filter(|i| !self.is_input(*i)).collect()
    }

    /// Non-input nodes outside the hidden set.
    pub fn non_hidden_ids(&self) -> Vec<usize> {
        let hidden: BTreeSet<usize> = self.hidden_ids.iter().copied().collect();
        (0..self.size())
            .filter(|i| !self.is_input(*i) && !hidden.contains(i))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        let inv = |m: String| Err(Error::Invariant(m));
        if n == 0 {
            return inv("graph has no nodes".into());
        }
        if self.rnn_time == 0 {
            return inv("rnn_time must be positive".into());
        }
        if self.input_ids.is_empty() {
            return inv("graph has no input node".into());
        }
        let inputs: BTreeSet<usize> = self.input_ids.iter().copied().collect();
        if inputs.len() != self.input_ids.len() {
            return inv("duplicate input id".into());
        }
        let hidden: BTreeSet<usize> = self.hidden_ids.iter().copied().collect();
        if hidden.len() != self.hidden_ids.len() {
            return inv("duplicate hidden id".into());
        }
        for &i in inputs
            .iter()
            .chain(&hidden)
            .chain(std::iter::once(&self.output_id))
        {
            if i >= n {
                return inv(format!("node id {i} out of range"));
            }
        }
        if inputs.contains(&self.output_id) {
            return inv("output node must not be an input node".into());
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if !node.init.is_finite() {
                return inv(format!("node {id} has non-finite initial value"));
            }
            match (&node.expr, inputs.contains(&id)) {
                (Some(_), true) => return inv(format!("input node {id} has a transition")),
                (None, false) => return inv(format!("node {id} has no transition")),
                (Some(e), false) => {
                    if e.depth() > MAX_EXPR_DEPTH {
                        return inv(format!(
                            "node {id} expression depth {} exceeds {MAX_EXPR_DEPTH}",
                            e.depth()
                        ));
                    }
                    for u in e.leaves() {
                        if u >= n {
                            return inv(format!("node {id} reads missing node {u}"));
                        }
                        if hidden.contains(&id) && !hidden.contains(&u) && !inputs.contains(&u) {
                            return inv(format!(
                                "hidden node {id} reads non-hidden node {u} (edge {u} -> {id})"
                            ));
                        }
                    }
                }
                (None, true) => {}
            }
        }
        for &h in &hidden {
            if inputs.contains(&h) {
                return inv(format!("input node {h} listed as hidden"));
            }
        }
        for &r in &self.reset_on_input {
            if r >= n || inputs.contains(&r) {
                return inv(format!("reset node {r} must be a non-input node"));
            }
        }
        if let Schedule::Offsets(os) = &self.schedule {
            if os.iter().any(|&o| o == 0 || o > self.rnn_time) {
                return inv("schedule offsets must lie in [1, rnn_time]".into());
            }
        }
        for (name, &id) in &self.aux_outputs {
            if id >= n {
                return inv(format!("aux output {name} refers to missing node {id}"));
            }
        }
        for &id in self.value_domains.keys() {
            if id >= n {
                return inv(format!("value domain refers to missing node {id}"));
            }
        }
        Ok(())
    }

    /// Sampling steps for a stream of `tokens` tokens.
    pub fn sample_times(&self, tokens: usize) -> Vec<u64> {
        let t = self.rnn_time;
        let mut out = Vec::new();
        for i in 1..=tokens as u64 {
            match &self.schedule {
                Schedule::TokenEnd => out.push(i * t),
                Schedule::Offsets(os) => out.extend(os.iter().map(|o| (i - 1) * t + o)),
            }
        }
        out
    }

    pub fn initial_state(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.init).collect()
    }

    /// Executes `total_steps` steps, recording every snapshot.
    pub fn run(&self, stream: &[Token], total_steps: u64) -> Result<ExecutionTrace> {
        self.run_with_format(stream, total_steps, None)
    }

    pub fn run_with_format(
        &self,
        stream: &[Token],
        total_steps: u64,
        format: Option<FixedPointFormat>,
    ) -> Result<ExecutionTrace> {
        if total_steps > stream.len() as u64 * self.rnn_time {
            return Err(Error::Domain(format!(
                "{total_steps} steps need more than {} tokens",
                stream.len()
            )));
        }
        let mut ex = Executor::new(self, format);
        let mut snapshots = vec![ex.state().to_vec()];
        let mut pointer = Vec::with_capacity(total_steps as usize);
        for t in 1..=total_steps {
            let idx = ((t - 1) / self.rnn_time) as usize;
            ex.step(stream[idx])?;
            snapshots.push(ex.state().to_vec());
            pointer.push(idx + 1);
        }
        let samples = self
            .sample_times(stream.len())
            .into_iter()
            .filter(|&s| s <= total_steps)
            .map(|s| Sample {
                step: s,
                value: snapshots[s as usize][self.output_id],
            })
            .collect();
        Ok(ExecutionTrace {
            snapshots,
            pointer,
            samples,
            saturations: ex.saturations(),
        })
    }

    /// Output value at step `i·𝒯` for every token `i`.
    pub fn token_outputs(&self, stream: &[Token]) -> Result<Vec<f64>> {
        let mut ex = Executor::new(self, self.bits);
        stream
            .iter()
            .map(|&x| {
                ex.feed(x)?;
                Ok(ex.output())
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub step: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    /// `snapshots[t]` is the state after step `t`; `snapshots[0]` is the initial state.
    pub snapshots: Vec<Vec<f64>>,
    /// 1-based token index read at each step.
    pub pointer: Vec<usize>,
    pub samples: Vec<Sample>,
    pub saturations: u64,
}

impl ExecutionTrace {
    pub fn steps(&self) -> usize {
        self.pointer.len()
    }

    pub fn value(&self, step: u64, node: usize) -> f64 {
        self.snapshots[step as usize][node]
    }
}

/// Incremental executor; cloning it forks the computation.
#[derive(Debug, Clone)]
pub struct Executor<'g> {
    graph: &'g RnnGraph,
    state: Vec<f64>,
    buf: Vec<f64>,
    t: u64,
    format: Option<FixedPointFormat>,
    saturations: u64,
}

impl<'g> Executor<'g> {
    pub fn new(graph: &'g RnnGraph, format: Option<FixedPointFormat>) -> Self {
        let state = graph.initial_state();
        Executor {
            graph,
            buf: state.clone(),
            state,
            t: 0,
            format,
            saturations: 0,
        }
    }

    pub fn graph(&self) -> &'g RnnGraph {
        self.graph
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut [f64] {
        &mut self.state
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn output(&self) -> f64 {
        self.state[self.graph.output_id]
    }

    pub fn saturations(&self) -> u64 {
        self.saturations
    }

    /// One synchronous update with `token` on the input nodes.
    pub fn step(&mut self, token: Token) -> Result<()> {
        let g = self.graph;
        let t = self.t + 1;
        self.buf.copy_from_slice(&self.state);
        let x = token as f64;
        for &i in &g.input_ids {
            self.buf[i] = x;
        }
        if (t - 1).is_multiple_of(g.rnn_time) {
            for &r in &g.reset_on_input {
                self.buf[r] = 0.0;
            }
        }
        for (id, node) in g.nodes.iter().enumerate() {
            let v = match &node.expr {
                None => x,
                Some(e) => e
                    .eval(&self.buf)
                    .map_err(|_| Error::ReciprocalByZero { node: id, step: t })?,
            };
            let v = match self.format {
                Some(f) => {
                    let (q, sat) = f.quantize_with_flag(v);
                    self.saturations += sat as u64;
                    q
                }
                None => v,
            };
            self.state[id] = v;
        }
        for (&id, dom) in &g.value_domains {
            let v = self.state[id];
            if !dom.contains(&v) {
                return Err(Error::ValueDomain {
                    node: id,
                    value: v,
                    step: t,
                });
            }
        }
        self.t = t;
        Ok(())
    }

    /// Runs the `𝒯` steps of one token.
    pub fn feed(&mut self, token: Token) -> Result<()> {
        for _ in 0..self.graph.rnn_time {
            self.step(token)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counter(period: f64) -> RnnGraph {
        let w = Expr::sum(
            1.0,
            vec![
                (1.0, Expr::node(1)),
                (
                    -period,
                    super::super::library::ind_eq(Expr::node(1), period),
                ),
            ],
        );
        RnnGraph::new(
            vec![Node::input("x"), Node::new("w0", period, w)],
            vec![0],
            1,
            vec![1],
            1,
        )
        .unwrap()
    }

    #[test]
    fn step_counter_value() {
        let g = counter(6.0);
        let tr = g.run(&[0; 8], 8).unwrap();
        assert_eq!(tr.value(8, 1), 2.0);
        for t in 1..=8u64 {
            assert_eq!(tr.value(t, 1), ((t - 1) % 6 + 1) as f64);
        }
    }

    #[test]
    fn echo_and_constant() {
        let mut nodes = vec![Node::input("x"), Node::new("echo", 0.0, Expr::node(0))];
        nodes.push(Node::new("const", 4.0, Expr::node(2)));
        let g = RnnGraph::new(nodes, vec![0], 1, vec![], 1).unwrap();
        let tr = g.run(&[1, 0, 1, 1], 4).unwrap();
        assert_eq!(
            tr.samples.iter().map(|s| s.value).collect::<Vec<_>>(),
            vec![1.0, 0.0, 1.0, 1.0]
        );
        assert!((0..=4).all(|t| tr.value(t, 2) == 4.0));
    }

    #[test]
    fn product_chain_and_hold_three() {
        let nodes = vec![
            Node::input("x"),
            Node::new("a", 2.0, Expr::sum(1.0, vec![(1.0, Expr::node(1))])),
            Node::new("b", 1.0, Expr::prod(vec![Expr::node(1), Expr::node(2)])),
        ];
        let mut g = RnnGraph::new(nodes, vec![0], 2, vec![1, 2], 3).unwrap();
        let tr = g.run(&[0, 0], 6).unwrap();
        assert_eq!(tr.value(1, 2), 2.0);
        assert_eq!(tr.value(2, 2), 6.0);
        assert_eq!(tr.value(3, 2), 24.0);
        assert_eq!(g.sample_times(2), vec![3, 6]);
        g.schedule = Schedule::Offsets(vec![1, 3]);
        assert_eq!(g.sample_times(2), vec![1, 3, 4, 6]);
    }

    #[test]
    fn reciprocal_fault_names_node_and_step() {
        let nodes = vec![
            Node::input("x"),
            Node::new("r", 1.0, Expr::recip(0.0, vec![(1.0, Expr::node(0))])),
        ];
        let g = RnnGraph::new(nodes, vec![0], 1, vec![], 1).unwrap();
        assert_eq!(
            g.run(&[1, 0], 2),
            Err(Error::ReciprocalByZero { node: 1, step: 2 })
        );
    }

    #[test]
    fn hidden_reading_non_hidden_is_rejected() {
        let nodes = vec![
            Node::input("x"),
            Node::new("h", 0.0, Expr::node(2)),
            Node::new("o", 0.0, Expr::node(0)),
        ];
        let err = RnnGraph::new(nodes, vec![0], 2, vec![1], 1).unwrap_err();
        assert!(err.to_string().contains("edge 2 -> 1"), "{err}");
    }

    #[test]
    fn deterministic_traces() {
        let g = counter(3.0);
        assert_eq!(g.run(&[0, 1, 0], 3).unwrap(), g.run(&[0, 1, 0], 3).unwrap());
    }
}
