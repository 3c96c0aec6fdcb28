//! Gated state updates: a controller graph selects, per step, whether each
//! target node loads an external value, runs its own transition or holds.

use super::expr::Expr;
use super::graph::{Node, RnnGraph};
use super::library::ind_eq;
use crate::error::{Error, Result};

pub const GATE_LOAD: f64 = 0.0;
pub const GATE_RUN: f64 = 1.0;
pub const GATE_HOLD: f64 = 2.0;

/// Where a target node copies from on a LOAD step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateSource {
    Graph(usize),
    Controller(usize),
}

/// Appends `controller` to `graph` and gates every node in `targets`.
///
/// With controller output `c` at the previous step, target `u` becomes
/// `src·𝟙{c=0} + f_u·𝟙{c=1} + u·𝟙{c=2}`. The controller output is
/// constrained to `{0, 1, 2}` at runtime.
pub fn gated_augment(
    graph: &RnnGraph,
    targets: &[usize],
    controller: &RnnGraph,
    sources: &[GateSource],
) -> Result<RnnGraph> {
    if targets.len() != sources.len() {
        return Err(Error::Domain("one source per target is required".into()));
    }
    if controller.rnn_time != graph.rnn_time {
        return Err(Error::Domain(
            "controller must share the graph's rnn_time".into(),
        ));
    }
    let base = graph.size();
    let ctrl = base + controller.output_id;
    let resolve = |s: GateSource| -> Result<usize> {
        match s {
            GateSource::Graph(i) if i < base => Ok(i),
            GateSource::Controller(i) if i < controller.size() => Ok(base + i),
            other => Err(Error::Domain(format!("gate source {other:?} out of range"))),
        }
    };
    let mut nodes = graph.nodes.clone();
    for (&u, &s) in targets.iter().zip(sources) {
        let src = resolve(s)?;
        let f_u = match &nodes.get(u).and_then(|n| n.expr.clone()) {
            Some(e) => e.clone(),
            None => return Err(Error::Domain(format!("target {u} is not a gateable node"))),
        };
        let c = Expr::node(ctrl);
        nodes[u].expr = Some(Expr::total(vec![
            Expr::mul(Expr::node(src), ind_eq(c.clone(), GATE_LOAD)),
            Expr::mul(f_u, ind_eq(c.clone(), GATE_RUN)),
            Expr::mul(Expr::node(u), ind_eq(c, GATE_HOLD)),
        ]));
    }
    let map: Vec<usize> = (0..controller.size()).map(|i| base + i).collect();
    for n in &controller.nodes {
        nodes.push(Node {
            name: format!("ctrl.{}", n.name),
            init: n.init,
            expr: n.expr.as_ref().map(|e| e.remap(&map)),
        });
    }
    let input_ids = graph
        .input_ids
        .iter()
        .copied()
        .chain(controller.input_ids.iter().map(|i| base + i))
        .collect();
    let mut out = RnnGraph::new(
        nodes,
        input_ids,
        graph.output_id,
        Vec::new(),
        graph.rnn_time,
    )?;
    out.hidden_ids = out.non_hidden_ids();
    out.schedule = graph.schedule.clone();
    out.aux_outputs = graph.aux_outputs.clone();
    out.value_domains
        .insert(ctrl, vec![GATE_LOAD, GATE_RUN, GATE_HOLD]);
    out.validate()?;
    Ok(out)
}
