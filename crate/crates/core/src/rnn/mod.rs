//! Recurrent circuit graphs: expressions, execution, the gadget library,
//! gated updates, the universal graph and the hidden-set scrubbing harness.

pub mod compile;
pub mod expr;
pub mod gated;
pub mod graph;
pub mod library;
pub mod sufficiency;
pub mod universal;

pub use compile::{
    constant_lm_graph, distinguisher_table_graph, graph_conditionals, lm_from_graph, lm_table_graph,
};
pub use expr::{Affine, Expr, ReciprocalFault, MAX_EXPR_DEPTH};
pub use gated::{gated_augment, GateSource, GATE_HOLD, GATE_LOAD, GATE_RUN};
pub use graph::{ExecutionTrace, Executor, Node, RnnGraph, Sample, Schedule};
pub use library::{build_transition, TransitionKind};
pub use sufficiency::{verify_hidden_sufficiency, Divergence, SufficiencyReport};
pub use universal::{embed_into_universal, universal_graph};
