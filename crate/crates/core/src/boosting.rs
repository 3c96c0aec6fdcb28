//! Boosting a text distribution against a distinguisher: reweight the
//! length-k blocks of one alignment by `e^{−α d}`, renormalize per block,
//! and read off the boosted next-token conditionals.
//!
//! Block starts are 0-based: `b ∈ {i₀, i₀+k, …} ∩ [0, n−1]`, and the block
//! starting at `b` covers tokens `b+1 ..= min(b+k, n)`. For a position
//! `i > i₀`, `i₀(i)` is the start of the block containing token `i`.

use serde::{Deserialize, Serialize};

use crate::dist::{decode, encode, kl, text_to_lm, LanguageModel, TextDistribution, Token};
use crate::distinguisher::{advantage_cells, decompose, AdvantageReport, Distinguisher};
use crate::error::{Error, Result};

pub const CERTIFICATE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BoostResult {
    pub q_boosted: TextDistribution,
    pub lm_boosted: LanguageModel,
    /// Block alignment `i₀*`.
    pub offset: usize,
    /// `|advantage|` of the supplied distinguisher.
    pub alpha: f64,
    /// Whether the complement of the supplied distinguisher was applied.
    pub complemented: bool,
    /// The distinguisher actually applied (complemented when needed).
    pub applied: Distinguisher,
    pub report: AdvantageReport,
    pub kl_before: f64,
    pub kl_after: f64,
    /// `α²n/(4k)`.
    pub guaranteed_drop: f64,
}

impl BoostResult {
    pub fn certificate_holds(&self) -> bool {
        self.kl_after <= self.kl_before - self.guaranteed_drop + CERTIFICATE_SLACK
    }

    pub fn summary(&self) -> BoostSummary {
        BoostSummary {
            offset: self.offset,
            alpha: self.alpha,
            complemented: self.complemented,
            kl_before: self.kl_before,
            kl_after: self.kl_after,
            guaranteed_drop: self.guaranteed_drop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostSummary {
    pub offset: usize,
    pub alpha: f64,
    pub complemented: bool,
    pub kl_before: f64,
    pub kl_after: f64,
    pub guaranteed_drop: f64,
}

/// Block starts `i₀, i₀+k, … ≤ n−1`.
pub fn block_starts(n: usize, k: usize, i0: usize) -> Vec<usize> {
    (i0..n).step_by(k).collect()
}

/// `i₀(i)`: start of the block containing position `i > i₀`.
pub fn block_start_of(i: usize, k: usize, i0: usize) -> usize {
    assert!(i > i0, "position must lie after the offset");
    i0 + (i - 1 - i0) / k * k
}

/// Evaluates the boosted model for a fixed `(q, d, α, i₀)`.
#[derive(Debug, Clone)]
pub struct Booster<'a> {
    qlm: LanguageModel,
    d: &'a Distinguisher,
    alpha: f64,
    i0: usize,
}

impl<'a> Booster<'a> {
    pub fn new(q: &TextDistribution, d: &'a Distinguisher, alpha: f64, i0: usize) -> Result<Self> {
        Self::from_lm(text_to_lm(q), d, alpha, i0)
    }

    pub fn from_lm(
        qlm: LanguageModel,
        d: &'a Distinguisher,
        alpha: f64,
        i0: usize,
    ) -> Result<Self> {
        if qlm.alphabet() != d.alphabet() || qlm.n() != d.n() {
            return Err(Error::Domain(
                "model and distinguisher differ in alphabet or length".into(),
            ));
        }
        if i0 >= d.k() {
            return Err(Error::Domain(format!(
                "offset {i0} must be below k={}",
                d.k()
            )));
        }
        Ok(Booster { qlm, d, alpha, i0 })
    }

    fn k(&self) -> usize {
        self.d.k()
    }

    /// `(f₁, f₂, g₁, g₂)` for position `i > i₀`, string `s ∈ Σᵏ` and context `x` with `|x| ≥ i`.
    pub fn components(&self, i: usize, s: &[Token], x: &[Token]) -> (f64, f64, u8, u8) {
        let b = block_start_of(i, self.k(), self.i0);
        let pos = i - b;
        let f1 = self.qlm.block_prob(&x[..b], s);
        let mut ctx = x[..b].to_vec();
        ctx.extend_from_slice(s);
        let f2 = (-self.alpha * self.d.eval(b + 1, &ctx) as f64).exp();
        let g1 = (s[..pos] == x[b..i]) as u8;
        let g2 = (s[..pos - 1] == x[b..i - 1]) as u8;
        (f1, f2, g1, g2)
    }

    /// `q′(y | prefix)` for every `y`, as a row.
    pub fn next_token_row(&self, prefix: &[Token]) -> Result<Vec<f64>> {
        let a = self.qlm.alphabet().size();
        let i = prefix.len() + 1;
        if prefix.len() >= self.qlm.n() {
            return Err(Error::Domain("prefix must be shorter than n".into()));
        }
        if i <= self.i0 {
            return Ok(self.qlm.row(prefix.len(), encode(prefix, a)).to_vec());
        }
        let k = self.k();
        let b = block_start_of(i, k, self.i0);
        let pos = i - b;
        let mut num = vec![0.0; a];
        let mut den = 0.0;
        let mut ctx = prefix[..b].to_vec();
        for sc in 0..self.qlm.alphabet().pow(k) {
            let s = decode(sc, k, a);
            if s[..pos - 1] != prefix[b..] {
                continue;
            }
            let f1 = self.qlm.block_prob(&prefix[..b], &s);
            ctx.truncate(b);
            ctx.extend_from_slice(&s);
            let f2 = (-self.alpha * self.d.eval(b + 1, &ctx) as f64).exp();
            den += f1 * f2;
            num[s[pos - 1] as usize] += f1 * f2;
        }
        if den <= 0.0 {
            return Err(Error::ZeroMarginal {
                prefix: crate::dist::format_tokens(prefix),
            });
        }
        Ok(num.into_iter().map(|v| v / den).collect())
    }

    /// The boosted model over all prefixes.
    pub fn language_model(&self) -> Result<LanguageModel> {
        let alphabet = self.qlm.alphabet();
        let a = alphabet.size();
        let tables = (0..self.qlm.n())
            .map(|len| {
                let mut t = Vec::with_capacity(alphabet.pow(len + 1));
                for code in 0..alphabet.pow(len) {
                    t.extend(self.next_token_row(&decode(code, len, a))?);
                }
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        LanguageModel::from_tables(alphabet, self.qlm.n(), tables)
    }
}

/// `q′(token | prefix)` from the ratio of block sums.
pub fn boosted_next_token(
    q: &TextDistribution,
    d: &Distinguisher,
    alpha: f64,
    i0: usize,
    prefix: &[Token],
    token: Token,
) -> Result<f64> {
    Ok(Booster::new(q, d, alpha, i0)?.next_token_row(prefix)?[token as usize])
}

/// `(f₁, f₂, g₁, g₂)` at position `i`.
pub fn components_f_g(
    q: &TextDistribution,
    d: &Distinguisher,
    alpha: f64,
    i0: usize,
    i: usize,
    s: &[Token],
    x: &[Token],
) -> Result<(f64, f64, u8, u8)> {
    if s.len() != d.k() || x.len() < i || i <= i0 || i > q.n() {
        return Err(Error::Domain(
            "components need i₀ < i ≤ min(|x|, n) and |s| = k".into(),
        ));
    }
    Ok(Booster::new(q, d, alpha, i0)?.components(i, s, x))
}

/// `Z(s) = E_{x∼q}[e^{−α d_{|s|+1}(x)} | x_{:|s|+1} = s]` over the clipped block.
pub fn normalization_z(
    q: &TextDistribution,
    d: &Distinguisher,
    alpha: f64,
    s: &[Token],
) -> Result<f64> {
    if s.len() >= q.n() {
        return Err(Error::Domain("block start must be below n".into()));
    }
    if q.marginal(s)? <= 0.0 {
        return Err(Error::ZeroMarginal {
            prefix: crate::dist::format_tokens(s),
        });
    }
    Ok(z_value(&text_to_lm(q), d, alpha, s))
}

fn z_value(qlm: &LanguageModel, d: &Distinguisher, alpha: f64, s: &[Token]) -> f64 {
    let (a, n, b) = (qlm.alphabet().size(), qlm.n(), s.len());
    let m = d.k().min(n - b);
    let mut ctx = s.to_vec();
    let mut z = 0.0;
    for wc in 0..qlm.alphabet().pow(m) {
        let w = decode(wc, m, a);
        ctx.truncate(b);
        ctx.extend_from_slice(&w);
        z += qlm.block_prob(s, &w) * (-alpha * d.eval(b + 1, &ctx) as f64).exp();
    }
    z
}

/// Boosts `q` toward `p` with `d`, recomputing `α` and the offset internally.
pub fn boost_text(
    p: &TextDistribution,
    q: &TextDistribution,
    d: &Distinguisher,
) -> Result<BoostResult> {
    let cells = advantage_cells(p, q, d.k())?;
    let signed = cells.advantage(d)?;
    let kl_before = kl(p, q)?;
    let (n, k) = (q.n(), d.k());
    if signed == 0.0 {
        let terms = cells.position_terms(d)?;
        return Ok(BoostResult {
            q_boosted: q.clone(),
            lm_boosted: text_to_lm(q),
            offset: 0,
            alpha: 0.0,
            complemented: false,
            applied: d.clone(),
            report: decompose(&terms, n, k),
            kl_before,
            kl_after: kl_before,
            guaranteed_drop: 0.0,
        });
    }
    let complemented = signed < 0.0;
    let applied = if complemented {
        d.complement()
    } else {
        d.clone()
    };
    let report = decompose(&cells.position_terms(&applied)?, n, k);
    let alpha = signed.abs();
    let i0 = report.best_offset;
    let qlm = text_to_lm(q);
    let a = q.alphabet().size();
    let starts = block_starts(n, k, i0);
    let z_tables: Vec<Vec<f64>> = starts
        .iter()
        .map(|&b| {
            (0..q.alphabet().pow(b))
                .map(|c| z_value(&qlm, &applied, alpha, &decode(c, b, a)))
                .collect()
        })
        .collect();
    let probs: Vec<f64> = q
        .probs()
        .iter()
        .enumerate()
        .map(|(idx, &qx)| {
            if qx == 0.0 {
                return 0.0;
            }
            let x = decode(idx, n, a);
            let mut v = qx;
            for (&b, zt) in starts.iter().zip(&z_tables) {
                v *= (-alpha * applied.eval(b + 1, &x) as f64).exp() / zt[encode(&x[..b], a)];
            }
            v
        })
        .collect();
    let q_boosted = TextDistribution::new(q.alphabet(), n, probs)?;
    let lm_boosted = Booster::from_lm(qlm, &applied, alpha, i0)?.language_model()?;
    let kl_after = kl(p, &q_boosted)?;
    Ok(BoostResult {
        q_boosted,
        lm_boosted,
        offset: i0,
        alpha,
        complemented,
        applied,
        report,
        kl_before,
        kl_after,
        guaranteed_drop: alpha * alpha * n as f64 / (4.0 * k as f64),
    })
}
