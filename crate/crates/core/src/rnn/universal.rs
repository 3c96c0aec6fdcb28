//! The universal graph: one input node, a fully connected hidden block and a
//! stateless block reset on every new token. Any graph within the size and
//! hidden budgets embeds into it by choosing weights.

use std::collections::BTreeMap;

use super::expr::Expr;
use super::graph::{Node, RnnGraph};
use crate::error::{Error, Result};

/// Universal graph with `n_total` nodes of which `hidden` are hidden.
///
/// Node 0 is the input, nodes `1..=hidden` the hidden block and the rest the
/// stateless block; the output is the last node. Edges: hidden × hidden
/// (with self-loops), input → hidden, and (hidden ∪ stateless) → stateless.
/// All weights are zero.
pub fn universal_graph(n_total: usize, hidden: usize) -> Result<RnnGraph> {
    if hidden == 0 || hidden >= n_total {
        return Err(Error::Domain(format!(
            "need 0 < hidden ({hidden}) < size ({n_total})"
        )));
    }
    let h: Vec<usize> = (1..=hidden).collect();
    let r: Vec<usize> = (hidden + 1..n_total).collect();
    let mut nodes = vec![Node::input("x")];
    for &i in &h {
        let terms = h
            .iter()
            .chain(std::iter::once(&0))
            .map(|&u| (0.0, Expr::node(u)))
            .collect();
        nodes.push(Node::new(format!("h{i}"), 0.0, Expr::sum(0.0, terms)));
    }
    for &i in &r {
        let terms = h.iter().chain(&r).map(|&u| (0.0, Expr::node(u))).collect();
        nodes.push(Node::new(format!("r{i}"), 0.0, Expr::sum(0.0, terms)));
    }
    let mut g = RnnGraph::new(nodes, vec![0], n_total - 1, h, 1)?;
    g.reset_on_input = r;
    Ok(g)
}

/// Places `small` inside `universal_graph(n_total, hidden)`.
///
/// Hidden nodes go to the hidden block in order and the remaining non-input
/// nodes to the stateless block, with `small`'s output placed last. Each
/// transition keeps the universal edge set, adding `small`'s own expression.
pub fn embed_into_universal(small: &RnnGraph, n_total: usize, hidden: usize) -> Result<RnnGraph> {
    if small.input_ids.len() != 1 {
        return Err(Error::Domain("embedding needs a single input node".into()));
    }
    if small.rnn_time != 1 {
        return Err(Error::Domain("embedding needs rnn_time 1".into()));
    }
    let base = universal_graph(n_total, hidden)?;
    let mut rest = small.non_hidden_ids();
    if small.hidden_ids.len() > hidden || rest.len() > n_total - 1 - hidden {
        return Err(Error::Domain("graph exceeds the universal budgets".into()));
    }
    if !rest.contains(&small.output_id) {
        return Err(Error::Domain("embedding needs a non-hidden output".into()));
    }
    rest.retain(|&i| i != small.output_id);
    rest.push(small.output_id);
    let mut map = vec![usize::MAX; small.size()];
    map[small.input_ids[0]] = 0;
    for (slot, &i) in small.hidden_ids.iter().enumerate() {
        map[i] = 1 + slot;
    }
    let r_start = n_total - rest.len();
    for (slot, &i) in rest.iter().enumerate() {
        map[i] = r_start + slot;
    }
    let mut g = base;
    for (i, node) in small.nodes.iter().enumerate() {
        let Some(e) = &node.expr else { continue };
        let target = map[i];
        let remapped = e.remap(&map);
        let allowed = g.nodes[target]
            .expr
            .clone()
            .expect("universal node has a transition");
        for u in remapped.leaves() {
            if !allowed.leaves().contains(&u) {
                return Err(Error::Domain(format!(
                    "edge {u} -> {target} is not in the universal graph"
                )));
            }
        }
        g.nodes[target] = Node::new(node.name.clone(), node.init, Expr::add(allowed, remapped));
    }
    g.output_id = n_total - 1;
    g.aux_outputs = small
        .aux_outputs
        .iter()
        .map(|(k, &v)| (k.clone(), map[v]))
        .collect::<BTreeMap<_, _>>();
    g.validate()?;
    Ok(g)
}
