//! Exact, desk-scale implementation of distinguisher-driven boosting of
//! language models, its compilation into recurrent circuit graphs,
//! fixed-point execution, and the self-boosting loss-minimization loop.
//!
//! Every quantity is computed by full enumeration over `Σⁿ`, so the
//! library is meant for small alphabets and short documents.

pub mod boosting;
pub mod construction;
pub mod dist;
pub mod distinguisher;
pub mod error;
pub mod fixedpoint;
pub mod io;
pub mod random;
pub mod rnn;
pub mod selfboost;
pub mod verify;

pub use boosting::{boost_text, BoostResult};
pub use construction::ConstructionReport;
pub use dist::{Alphabet, DivergenceReport, LanguageModel, TextDistribution};
pub use distinguisher::{AdvantageReport, Distinguisher, Family};
pub use error::{Error, Result};
pub use fixedpoint::FixedPointFormat;
pub use rnn::{Expr, RnnGraph};
