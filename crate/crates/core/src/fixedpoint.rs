//! Signed fixed-point arithmetic: the quantizer, error-composition bounds,
//! and the bounded-bit boosted construction.

use serde::{Deserialize, Serialize};

use crate::boosting::Booster;
use crate::construction::{build_boosted_rnn, ConstructionReport};
use crate::dist::{Alphabet, LanguageModel, TextDistribution};
use crate::distinguisher::Distinguisher;
use crate::error::{Error, Result};
use crate::rnn::{graph_conditionals, RnnGraph};

/// One sign bit, `integer` integer bits and `fraction` fraction bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedPointFormat {
    pub integer: u32,
    pub fraction: u32,
}

impl FixedPointFormat {
    pub fn new(integer: u32, fraction: u32) -> Self {
        FixedPointFormat { integer, fraction }
    }

    pub fn total_bits(&self) -> u32 {
        1 + self.integer + self.fraction
    }

    /// Grid spacing `2^{−b_F}`.
    pub fn resolution(&self) -> f64 {
        (-(self.fraction as f64)).exp2()
    }

    pub fn integer_cap(&self) -> f64 {
        (self.integer as f64).exp2()
    }

    pub fn quantize(&self, x: f64) -> f64 {
        self.quantize_with_flag(x).0
    }

    /// `sign(x)·2^{−b_F}⌊min(|x|, 2^{b_I})·2^{b_F}⌋` and whether `|x|` exceeded `2^{b_I}`.
    pub fn quantize_with_flag(&self, x: f64) -> (f64, bool) {
        let m = x.abs();
        let cap = self.integer_cap();
        if !m.is_finite() {
            return (cap.copysign(x), true);
        }
        let scale = (self.fraction as f64).exp2();
        let q = (m.min(cap) * scale).floor() / scale;
        let q = if q == 0.0 { 0.0 } else { q.copysign(x) };
        (q, m > cap)
    }
}

/// Integer bits after adding `⌈log₂ 𝒯⌉` for an RNN-time `t`.
pub fn integer_bits_for_time(integer: u32, t: u64) -> u32 {
    integer + ceil_log2(t as u128)
}

pub fn ceil_log2(x: u128) -> u32 {
    if x <= 1 {
        0
    } else {
        128 - (x - 1).leading_zeros()
    }
}

/// `2mδ`, bounding `|∏xᵢ − ∏yᵢ|` for factors in `[0,1]` with `|xᵢ−yᵢ| ≤ δ`.
pub fn product_error_bound(m: usize, delta: f64) -> Result<f64> {
    if m == 0 || !(delta > 0.0 && delta * (m as f64) < 1.0) {
        return Err(Error::Precondition(format!(
            "need m ≥ 1 and 0 < δ < 1/m, got m={m}, δ={delta}"
        )));
    }
    Ok(2.0 * m as f64 * delta)
}

/// `x/y + 2δ/(ℓ−δ)`, bounding `(x+δ)/(y−δ)`.
pub fn fraction_error_bound(x: f64, y: f64, delta: f64, ell: f64) -> Result<f64> {
    let unit = |v: f64| v > 0.0 && v <= 1.0;
    if !(unit(x) && unit(y) && unit(delta) && unit(ell)) || y < x || y < ell || ell <= delta {
        return Err(Error::Precondition(format!(
            "need x,y,δ,ℓ ∈ (0,1], y ≥ x, y ≥ ℓ > δ; got x={x}, y={y}, δ={delta}, ℓ={ell}"
        )));
    }
    Ok(x / y + 2.0 * delta / (ell - delta))
}

/// `E_{x∼p} log(q̄(x)/q̃̄(x))`.
pub fn log_likelihood_gap(
    p: &TextDistribution,
    q: &LanguageModel,
    q_tilde: &LanguageModel,
) -> Result<f64> {
    let (qt, qtt) = (lm_to_text_loose(q)?, lm_to_text_loose(q_tilde)?);
    let mut acc = 0.0;
    for (i, &px) in p.probs().iter().enumerate() {
        if px > 0.0 {
            acc += px * (qt[i].ln() - qtt[i].ln());
        }
    }
    Ok(acc)
}

fn lm_to_text_loose(q: &LanguageModel) -> Result<Vec<f64>> {
    let (a, n) = (q.alphabet().size(), q.n());
    let count = q.alphabet().count(n)?;
    Ok((0..count)
        .map(|idx| {
            let x = crate::dist::decode(idx, n, a);
            (0..n).map(|i| q.cond(&x[..i], x[i])).product()
        })
        .collect())
}

/// `nδ/(ℓ−δ)`, bounding the log-likelihood gap between `q` and a perturbation `q̃`.
pub fn quantized_loss_gap(
    p: &TextDistribution,
    q: &LanguageModel,
    q_tilde: &LanguageModel,
    delta: f64,
    ell: f64,
) -> Result<f64> {
    if q.n() != p.n() || q_tilde.n() != p.n() {
        return Err(Error::Domain("length mismatch".into()));
    }
    if !(delta >= 0.0 && delta < ell) {
        return Err(Error::Precondition(format!(
            "need 0 ≤ δ < ℓ, got δ={delta}, ℓ={ell}"
        )));
    }
    if q.min_conditional() < ell {
        return Err(Error::Precondition(format!(
            "q has a conditional below ℓ={ell}"
        )));
    }
    for (a, b) in q.tables().iter().zip(q_tilde.tables()) {
        if a.iter().zip(b).any(|(x, y)| (x - y).abs() > delta) {
            return Err(Error::Precondition(format!(
                "q and q̃ differ by more than δ={delta}"
            )));
        }
    }
    Ok(p.n() as f64 * delta / (ell - delta))
}

/// Whether every boosted conditional is at least `ℓ/3`.
pub fn boosted_lower_bound_check(
    q: &LanguageModel,
    d: &Distinguisher,
    alpha: f64,
    i0: usize,
    ell: f64,
) -> Result<bool> {
    if q.min_conditional() < ell {
        return Err(Error::Precondition(format!(
            "q has a conditional below ℓ={ell}"
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Precondition(format!("need 0 ≤ α ≤ 1, got {alpha}")));
    }
    let boosted = Booster::from_lm(q.clone(), d, alpha, i0)?.language_model()?;
    Ok(boosted.min_conditional() >= ell / 3.0 - 1e-12)
}

/// Bit budgets for the bounded-bit construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizedParams {
    /// Format `b` of the base model.
    pub format: FixedPointFormat,
    /// Format `b_D` of the distinguisher.
    pub format_d: FixedPointFormat,
    /// Lower bound `ℓ` on the base model's conditionals.
    pub ell: f64,
}

/// Smallest `b_F ≥ b_{D,F}` with `2^{−b_F} ≤ α²ℓ^{k+1}/(1088k²)`.
pub fn minimal_fraction_bits(alpha: f64, ell: f64, k: usize, d_fraction: u32) -> Result<u32> {
    let target = alpha * alpha * ell.powi(k as i32 + 1) / (1088.0 * (k * k) as f64);
    if target.is_nan() || target <= 0.0 {
        return Err(Error::Precondition("α and ℓ must be positive".into()));
    }
    let need = (-target.log2()).ceil().max(0.0) as u32;
    let mut b = need.max(d_fraction);
    while (-(b as f64)).exp2() > target {
        b += 1;
    }
    Ok(b)
}

/// Smallest `b_I` with `b_I ≥ b_{D,I} + k⌈log₂|Σ|⌉ + ⌈log₂(k𝒯_D)⌉ + 1`.
pub fn minimal_integer_bits(d_integer: u32, alphabet: Alphabet, k: usize, t_d: u64) -> u32 {
    d_integer
        + k as u32 * ceil_log2(alphabet.size() as u128)
        + ceil_log2(k as u128 * t_d as u128)
        + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedBoostResult {
    pub graph: RnnGraph,
    pub report: ConstructionReport,
    pub format: FixedPointFormat,
    /// `α²/(8k)`.
    pub loss_drop_certificate: f64,
    /// `ℓ/4`.
    pub prob_lower_bound: f64,
    /// `17k·2^{−b_F}/ℓᵏ`.
    pub max_output_error: f64,
}

impl QuantizedBoostResult {
    /// Conditionals of the quantized graph over `Σ^{<n}`; rows need not sum to 1.
    pub fn conditionals(&self, alphabet: Alphabet, n: usize) -> Result<LanguageModel> {
        let tables = graph_conditionals(&self.graph, alphabet, n, Some(self.format))?;
        LanguageModel::from_tables_unnormalized(alphabet, n, tables)
    }
}

/// Compiles the boosted graph and attaches the widened format
/// `(b_I + ⌈log₂ 𝒯_{Q′}⌉, b_F)` after checking the bit preconditions.
pub fn build_boosted_rnn_quantized(
    q: &RnnGraph,
    d: &RnnGraph,
    alphabet: Alphabet,
    k: usize,
    alpha: f64,
    i0: usize,
    params: QuantizedParams,
) -> Result<QuantizedBoostResult> {
    let QuantizedParams {
        format,
        format_d,
        ell,
    } = params;
    if !(alpha > 0.0 && alpha <= 1.0 && ell > 0.0 && ell <= 1.0) {
        return Err(Error::Precondition(format!(
            "need α, ℓ ∈ (0,1], got α={alpha}, ℓ={ell}"
        )));
    }
    let need_i = minimal_integer_bits(format_d.integer, alphabet, k, d.rnn_time);
    if format.integer < need_i {
        return Err(Error::Precondition(format!(
            "b_I ≥ b_D,I + k·log|Σ| + log(k·T_D) + 1 fails: {} < {need_i}",
            format.integer
        )));
    }
    if format.fraction < format_d.fraction {
        return Err(Error::Precondition(format!(
            "b_F ≥ b_D,F fails: {} < {}",
            format.fraction, format_d.fraction
        )));
    }
    let target = alpha * alpha * ell.powi(k as i32 + 1) / (1088.0 * (k * k) as f64);
    if format.resolution() > target {
        return Err(Error::Precondition(format!(
            "2^-b_F ≤ α²ℓ^(k+1)/(1088k²) fails: {} > {target}",
            format.resolution()
        )));
    }
    let (mut graph, report) = build_boosted_rnn(q, d, alphabet, k, alpha, i0)?;
    let widened = FixedPointFormat::new(
        integer_bits_for_time(format.integer, graph.rnn_time),
        format.fraction,
    );
    graph.bits = Some(widened);
    Ok(QuantizedBoostResult {
        graph,
        report,
        format: widened,
        loss_drop_certificate: alpha * alpha / (8.0 * k as f64),
        prob_lower_bound: ell / 4.0,
        max_output_error: 17.0 * k as f64 * format.resolution() / ell.powi(k as i32),
    })
}
