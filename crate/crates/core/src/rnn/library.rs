//! Indicator, boolean, counter and exponential gadgets built only from
//! ReLU, product and reciprocal.
//!
//! Indicators are exact on integer-valued arguments of magnitude below
//! [`EXACT_RANGE`]; every gadget below is only applied to such values.

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use crate::error::{Error, Result};

/// Machine precision gap used by the indicator constructions.
pub const EPS_M: f64 = 1.0 / 4_294_967_296.0;
/// Arguments (and thresholds) must stay below this magnitude for exactness.
pub const EXACT_RANGE: f64 = 1_048_576.0;

fn relu_of(bias: f64, x: &Expr, w: f64) -> Expr {
    Expr::relu(bias, vec![(w, x.clone())])
}

/// `𝟙{x = c}` as `ε⁻¹·σ(ε − σ(x−c) − σ(c−x))`.
pub fn ind_eq(x: Expr, c: f64) -> Expr {
    let inner = Expr::relu(
        EPS_M,
        vec![(-1.0, relu_of(-c, &x, 1.0)), (-1.0, relu_of(c, &x, -1.0))],
    );
    Expr::sum(0.0, vec![(1.0 / EPS_M, inner)])
}

/// `𝟙{x ≤ c}` as `ε⁻¹·σ(σ(c+ε−x) − σ(c−x))`.
pub fn ind_le(x: Expr, c: f64) -> Expr {
    let inner = Expr::relu(
        0.0,
        vec![
            (1.0, relu_of(c + EPS_M, &x, -1.0)),
            (-1.0, relu_of(c, &x, -1.0)),
        ],
    );
    Expr::sum(0.0, vec![(1.0 / EPS_M, inner)])
}

/// `𝟙{x ≥ c}` as `ε⁻¹·σ(σ(x−c+ε) − σ(x−c))`.
pub fn ind_ge(x: Expr, c: f64) -> Expr {
    let inner = Expr::relu(
        0.0,
        vec![
            (1.0, relu_of(EPS_M - c, &x, 1.0)),
            (-1.0, relu_of(-c, &x, 1.0)),
        ],
    );
    Expr::sum(0.0, vec![(1.0 / EPS_M, inner)])
}

/// `𝟙{lo ≤ x ≤ hi}`.
pub fn ind_between(x: Expr, lo: f64, hi: f64) -> Expr {
    Expr::mul(ind_ge(x.clone(), lo), ind_le(x, hi))
}

/// `f1·cond + f2·(1 − cond)` for `cond ∈ {0,1}`.
pub fn if_else(cond: Expr, f1: Expr, f2: Expr) -> Expr {
    Expr::add(
        Expr::mul(f1, cond.clone()),
        Expr::mul(f2, Expr::one_minus(cond)),
    )
}

/// `𝟙{Σ xs ≥ 1}` for boolean arguments.
pub fn or(xs: Vec<Expr>) -> Expr {
    ind_ge(Expr::total(xs), 1.0)
}

/// `𝟙{Σ xs ≥ |xs|}` for boolean arguments.
pub fn and(xs: Vec<Expr>) -> Expr {
    let k = xs.len() as f64;
    ind_ge(Expr::total(xs), k)
}

/// `1 − x`.
pub fn not(x: Expr) -> Expr {
    Expr::one_minus(x)
}

/// Digit `i` (0-based, least significant first) of `x + 1` in base `c`, with wrap-around.
///
/// `f_i = σ(x_i + 1 − h₁ + h₂ − c·h₃)` where `h₁ − h₂` is one exactly when
/// some lower digit is below `c−1`, and `h₃` flags overflow out of digit `i`.
pub fn base_c_increment_digit(digits: &[Expr], c: u32, i: usize) -> Expr {
    let cm1 = (c - 1) as f64;
    let lower: Vec<(f64, Expr)> = digits[..i].iter().map(|d| (-1.0, d.clone())).collect();
    let h1 = Expr::relu(i as f64 * cm1, lower.clone());
    let h2 = Expr::relu(i as f64 * cm1 - 1.0, lower);
    let upto: Vec<(f64, Expr)> = digits[..=i].iter().map(|d| (1.0, d.clone())).collect();
    let h3 = Expr::relu(1.0 - (i as f64 + 1.0) * cm1, upto);
    Expr::relu(
        1.0,
        vec![
            (1.0, digits[i].clone()),
            (-1.0, h1),
            (1.0, h2),
            (-(c as f64), h3),
        ],
    )
}

/// All digits of `x + 1` in base `c`.
pub fn base_c_increment(digits: &[Expr], c: u32) -> Vec<Expr> {
    (0..digits.len())
        .map(|i| base_c_increment_digit(digits, c, i))
        .collect()
}

/// `𝟙{x = 0} + e^α·(1 − 𝟙{x = 0})`, equal to `exp(αx)` on `{0, 1}`.
pub fn exp_binary(x: Expr, alpha: f64) -> Expr {
    let z = ind_eq(x, 0.0);
    Expr::sum(
        0.0,
        vec![(1.0, z.clone()), (alpha.exp(), Expr::one_minus(z))],
    )
}

/// Kinds accepted by [`build_transition`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransitionKind {
    IndicatorEq {
        c: f64,
    },
    IndicatorLe {
        c: f64,
    },
    IndicatorGe {
        c: f64,
    },
    /// Reads `(cond, f1, f2)` from nodes 0, 1, 2.
    IfElse,
    Or {
        arity: usize,
    },
    And {
        arity: usize,
    },
    Not,
    /// Digit `digit` of the incremented `width`-digit number on nodes `0..width`.
    BaseCIncrement {
        base: u32,
        width: usize,
        digit: usize,
    },
    ExpBinary {
        alpha: f64,
    },
}

/// Builds a gadget over leaf nodes `0, 1, …`.
pub fn build_transition(kind: &TransitionKind) -> Result<Expr> {
    let leaf = Expr::node;
    let leaves = |m: usize| (0..m).map(leaf).collect::<Vec<_>>();
    let check_c = |c: f64| {
        if !c.is_finite() || c.abs() >= EXACT_RANGE {
            Err(Error::Domain(format!(
                "threshold {c} outside the exact range"
            )))
        } else {
            Ok(())
        }
    };
    Ok(match *kind {
        TransitionKind::IndicatorEq { c } => {
            check_c(c)?;
            ind_eq(leaf(0), c)
        }
        TransitionKind::IndicatorLe { c } => {
            check_c(c)?;
            ind_le(leaf(0), c)
        }
        TransitionKind::IndicatorGe { c } => {
            check_c(c)?;
            ind_ge(leaf(0), c)
        }
        TransitionKind::IfElse => if_else(leaf(0), leaf(1), leaf(2)),
        TransitionKind::Or { arity } if arity > 0 => or(leaves(arity)),
        TransitionKind::And { arity } if arity > 0 => and(leaves(arity)),
        TransitionKind::Not => not(leaf(0)),
        TransitionKind::BaseCIncrement { base, width, digit } if base >= 2 && digit < width => {
            base_c_increment_digit(&leaves(width), base, digit)
        }
        TransitionKind::ExpBinary { alpha } if alpha.is_finite() => exp_binary(leaf(0), alpha),
        ref other => {
            return Err(Error::Domain(format!(
                "unsupported transition parameters {other:?}"
            )))
        }
    })
}
