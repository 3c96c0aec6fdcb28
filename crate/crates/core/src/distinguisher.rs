//! Next-k-token distinguishers, the advantage functional and its offset
//! decomposition, the Pinsker-style bound and brute-force maximization
//! over finite families.
//!
//! A distinguisher at position `i` sees `x_{:L_i+1}` with
//! `L_i = min(i+k−1, n)`: the prefix and the window `x_{i:i+k}` clipped at `n`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dist::{decode, encode, kl, max_enum, text_to_lm, Alphabet, TextDistribution, Token};
use crate::error::{Error, Result};
use crate::rnn::RnnGraph;

/// A binary predicate `d(i, x)` stored as one table per position.
#[derive(Debug, Clone, PartialEq)]
pub struct Distinguisher {
    alphabet: Alphabet,
    n: usize,
    k: usize,
    /// `tables[i-1]` is indexed by the code of `x_{:L_i+1}`.
    tables: Vec<Vec<u8>>,
    graph: Option<Box<RnnGraph>>,
}

fn check_shape(alphabet: Alphabet, n: usize, k: usize) -> Result<()> {
    if n == 0 || k == 0 {
        return Err(Error::Domain("n and k must be positive".into()));
    }
    if k > n {
        return Err(Error::Domain(format!(
            "window k={k} exceeds document length n={n}"
        )));
    }
    let total: u128 = (1..=n)
        .map(|i| (alphabet.size() as u128).saturating_pow((i + k - 1).min(n) as u32))
        .sum();
    if total > max_enum() as u128 {
        return Err(Error::Sizing {
            what: "distinguisher cells".into(),
            needed: total,
            cap: max_enum() as u128,
        });
    }
    Ok(())
}

impl Distinguisher {
    /// Tabulates `f(i, x_{:L_i+1})` over all positions and prefixes.
    pub fn from_fn(
        alphabet: Alphabet,
        n: usize,
        k: usize,
        mut f: impl FnMut(usize, &[Token]) -> bool,
    ) -> Result<Self> {
        check_shape(alphabet, n, k)?;
        let a = alphabet.size();
        let tables = (1..=n)
            .map(|i| {
                let len = (i + k - 1).min(n);
                (0..alphabet.pow(len))
                    .map(|c| f(i, &decode(c, len, a)) as u8)
                    .collect()
            })
            .collect();
        Ok(Distinguisher {
            alphabet,
            n,
            k,
            tables,
            graph: None,
        })
    }

    pub fn from_tables(
        alphabet: Alphabet,
        n: usize,
        k: usize,
        tables: Vec<Vec<u8>>,
    ) -> Result<Self> {
        check_shape(alphabet, n, k)?;
        if tables.len() != n {
            return Err(Error::Domain(format!(
                "expected {n} position tables, got {}",
                tables.len()
            )));
        }
        for (i, t) in tables.iter().enumerate() {
            let len = (i + k).min(n);
            if t.len() != alphabet.pow(len) {
                return Err(Error::Domain(format!(
                    "table for position {} has {} entries, expected {}",
                    i + 1,
                    t.len(),
                    alphabet.pow(len)
                )));
            }
            if t.iter().any(|&b| b > 1) {
                return Err(Error::Domain(format!(
                    "table for position {} has a non-binary entry",
                    i + 1
                )));
            }
        }
        Ok(Distinguisher {
            alphabet,
            n,
            k,
            tables,
            graph: None,
        })
    }

    pub fn constant(alphabet: Alphabet, n: usize, k: usize, bit: bool) -> Result<Self> {
        Self::from_fn(alphabet, n, k, |_, _| bit)
    }

    /// Attaches an RNN realization, kept for compilation.
    pub fn with_graph(mut self, graph: RnnGraph) -> Self {
        self.graph = Some(Box::new(graph));
        self
    }

    pub fn graph(&self) -> Option<&RnnGraph> {
        self.graph.as_deref()
    }

    /// `1 − d`; an attached graph is complemented at its output node when
    /// no other node reads that output.
    pub fn complement(&self) -> Self {
        let tables = self
            .tables
            .iter()
            .map(|t| t.iter().map(|b| 1 - b).collect())
            .collect();
        let graph = self.graph.as_ref().and_then(|g| {
            let out = g.output_id;
            let read = g.edges().iter().any(|&(u, v)| u == out && v != out);
            if read
                || g.nodes[out]
                    .expr
                    .as_ref()
                    .is_some_and(|e| e.leaves().contains(&out))
            {
                return None;
            }
            let mut g = (**g).clone();
            let e = g.nodes[out].expr.take().expect("output has a transition");
            g.nodes[out].expr = Some(crate::rnn::Expr::one_minus(e));
            g.nodes[out].init = 1.0 - g.nodes[out].init;
            Some(Box::new(g))
        });
        Distinguisher {
            alphabet: self.alphabet,
            n: self.n,
            k: self.k,
            tables,
            graph,
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `L_i = min(i+k−1, n)`.
    pub fn window_end(&self, i: usize) -> usize {
        (i + self.k - 1).min(self.n)
    }

    pub fn table(&self, i: usize) -> &[u8] {
        &self.tables[i - 1]
    }

    pub fn tables(&self) -> &[Vec<u8>] {
        &self.tables
    }

    /// `d(i, x)` for `x` of length at least `L_i`.
    pub fn eval(&self, i: usize, x: &[Token]) -> u8 {
        let len = self.window_end(i);
        self.tables[i - 1][encode(&x[..len], self.alphabet.size())]
    }

    /// Number of table entries; a size proxy for table distinguishers.
    pub fn entry_count(&self) -> usize {
        self.tables.iter().map(Vec::len).sum()
    }
}

/// Per-cell coefficients `p(s)·q^{(m)}(w|s) − p(s·w)` of the (linear) advantage.
///
/// Cells share the layout of distinguisher tables.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageCells {
    pub alphabet: Alphabet,
    pub n: usize,
    pub k: usize,
    pub coefs: Vec<Vec<f64>>,
}

/// Computes the coefficients; `q`'s conditionals use the uniform completion.
pub fn advantage_cells(
    p: &TextDistribution,
    q: &TextDistribution,
    k: usize,
) -> Result<AdvantageCells> {
    if p.alphabet() != q.alphabet() || p.n() != q.n() {
        return Err(Error::Domain("p and q differ in alphabet or length".into()));
    }
    let (alphabet, n) = (p.alphabet(), p.n());
    check_shape(alphabet, n, k)?;
    let a = alphabet.size();
    let qlm = text_to_lm(q);
    let mut coefs = Vec::with_capacity(n);
    for i in 1..=n {
        let m = k.min(n - i + 1);
        let ps = p.marginals(i - 1);
        let psw = p.marginals(i - 1 + m);
        let width = alphabet.pow(m);
        let mut row = Vec::with_capacity(psw.len());
        for (sc, &pm) in ps.iter().enumerate() {
            let s = decode(sc, i - 1, a);
            for wc in 0..width {
                let w = decode(wc, m, a);
                row.push(pm * qlm.block_prob(&s, &w) - psw[sc * width + wc]);
            }
        }
        coefs.push(row);
    }
    Ok(AdvantageCells {
        alphabet,
        n,
        k,
        coefs,
    })
}

impl AdvantageCells {
    /// Per-position sums `Σ_cells d·coef`, evaluated as `(S₁ − S₀)/2` so that
    /// complementing `d` negates the result exactly. Constant positions
    /// contribute exactly zero.
    pub fn position_terms(&self, d: &Distinguisher) -> Result<Vec<f64>> {
        if d.alphabet != self.alphabet || d.n != self.n || d.k != self.k {
            return Err(Error::Domain(
                "distinguisher shape does not match (alphabet, n, k)".into(),
            ));
        }
        Ok(self
            .coefs
            .iter()
            .zip(&d.tables)
            .map(|(c, t)| {
                let (mut s1, mut s0) = (0.0, 0.0);
                let mut ones = 0;
                for (&v, &b) in c.iter().zip(t) {
                    if b == 1 {
                        s1 += v;
                        ones += 1;
                    } else {
                        s0 += v;
                    }
                }
                if ones == 0 || ones == c.len() {
                    0.0
                } else {
                    (s1 - s0) / 2.0
                }
            })
            .collect())
    }

    pub fn advantage(&self, d: &Distinguisher) -> Result<f64> {
        let terms = self.position_terms(d)?;
        Ok(terms.iter().sum::<f64>() / self.n as f64)
    }
}

/// Signed advantage of `d` against `(p, q)`.
pub fn advantage(d: &Distinguisher, p: &TextDistribution, q: &TextDistribution) -> Result<f64> {
    advantage_cells(p, q, d.k)?.advantage(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetTerm {
    pub j: usize,
    pub w: usize,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageReport {
    pub advantage: f64,
    pub offsets: Vec<OffsetTerm>,
    /// Smallest offset attaining the largest `a_j`.
    pub best_offset: usize,
}

impl AdvantageReport {
    /// `Σ_j (w_j/n)·a_j`.
    pub fn reconstruct(&self, n: usize) -> f64 {
        self.offsets
            .iter()
            .map(|o| o.w as f64 / n as f64 * o.a)
            .sum()
    }
}

/// `w_j = 1 + ⌊(n−1−j)/k⌋`: block starts `b ∈ [0, n−1]` with `b ≡ j (mod k)`.
pub fn offset_weight(n: usize, k: usize, j: usize) -> usize {
    1 + (n - 1 - j) / k
}

/// Splits the advantage over block alignments `j ∈ [0, k−1]`.
pub fn offset_decomposition(
    d: &Distinguisher,
    p: &TextDistribution,
    q: &TextDistribution,
) -> Result<AdvantageReport> {
    let cells = advantage_cells(p, q, d.k)?;
    let terms = cells.position_terms(d)?;
    Ok(decompose(&terms, d.n, d.k))
}

pub(crate) fn decompose(terms: &[f64], n: usize, k: usize) -> AdvantageReport {
    let offsets: Vec<OffsetTerm> = (0..k)
        .map(|j| {
            let w = offset_weight(n, k, j);
            let s: f64 = (j..n).step_by(k).map(|b| terms[b]).sum();
            OffsetTerm {
                j,
                w,
                a: s / w as f64,
            }
        })
        .collect();
    let mut best = 0;
    for o in &offsets {
        if o.a > offsets[best].a {
            best = o.j;
        }
    }
    AdvantageReport {
        advantage: terms.iter().sum::<f64>() / n as f64,
        offsets,
        best_offset: best,
    }
}

/// `√(k/(2n)·KL(p‖q))`.
pub fn pinsker_bound(p: &TextDistribution, q: &TextDistribution, k: usize) -> Result<f64> {
    Ok((k as f64 / (2.0 * p.n() as f64) * kl(p, q)?).sqrt())
}

/// Finite distinguisher families searched by [`max_advantage_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Explicit(Vec<Distinguisher>),
    /// Every predicate on `(i, x_{:L_i+1})`.
    WindowPredicates,
    /// Predicates on `(x_{i−1} or start-of-text, clipped window)`, shared across positions.
    OnePrefixTables,
}

/// One bit per family parameter; each cell maps to one parameter.
struct Linear {
    params: usize,
    cell_param: Vec<Vec<usize>>,
}

const BOS: usize = usize::MAX;

fn linear_layout(family: &Family, alphabet: Alphabet, n: usize, k: usize) -> Option<Linear> {
    let a = alphabet.size();
    match family {
        Family::Explicit(_) => None,
        Family::WindowPredicates => {
            let mut next = 0;
            let cell_param = (1..=n)
                .map(|i| {
                    let len = (i + k - 1).min(n);
                    (0..alphabet.pow(len))
                        .map(|_| {
                            next += 1;
                            next - 1
                        })
                        .collect()
                })
                .collect();
            Some(Linear {
                params: next,
                cell_param,
            })
        }
        Family::OnePrefixTables => {
            let mut ids: BTreeMap<(usize, Vec<Token>), usize> = BTreeMap::new();
            let mut cell_param = Vec::with_capacity(n);
            for i in 1..=n {
                let len = (i + k - 1).min(n);
                let row = (0..alphabet.pow(len))
                    .map(|c| {
                        let x = decode(c, len, a);
                        let prev = if i == 1 { BOS } else { x[i - 2] as usize };
                        let key = (prev, x[i - 1..].to_vec());
                        let fresh = ids.len();
                        *ids.entry(key).or_insert(fresh)
                    })
                    .collect();
                cell_param.push(row);
            }
            Some(Linear {
                params: ids.len(),
                cell_param,
            })
        }
    }
}

impl Family {
    /// Number of members, if it fits in `u128`.
    pub fn size(&self, alphabet: Alphabet, n: usize, k: usize) -> Option<u128> {
        match self {
            Family::Explicit(v) => Some(v.len() as u128),
            other => {
                let l = linear_layout(other, alphabet, n, k)?;
                1u128
                    .checked_shl(l.params as u32)
                    .filter(|_| l.params < 128)
            }
        }
    }

    /// Materializes every member in enumeration order.
    pub fn members(&self, alphabet: Alphabet, n: usize, k: usize) -> Result<Vec<Distinguisher>> {
        match self {
            Family::Explicit(v) => Ok(v.clone()),
            other => {
                check_shape(alphabet, n, k)?;
                let l = linear_layout(other, alphabet, n, k).expect("linear family");
                let count = self.size(alphabet, n, k).unwrap_or(u128::MAX);
                if count > max_enum() as u128 {
                    return Err(Error::Sizing {
                        what: "family members".into(),
                        needed: count,
                        cap: max_enum() as u128,
                    });
                }
                Ok((0..count as u64)
                    .map(|idx| {
                        let bits: Vec<u8> = (0..l.params)
                            .map(|p| ((idx >> (l.params - 1 - p)) & 1) as u8)
                            .collect();
                        member_from_bits(&l, &bits, alphabet, n, k)
                    })
                    .collect())
            }
        }
    }
}

/// Member index `Σ_p bit_p·2^{P−1−p}`: the first parameter is the most significant bit.
fn member_from_bits(
    l: &Linear,
    bits: &[u8],
    alphabet: Alphabet,
    n: usize,
    k: usize,
) -> Distinguisher {
    let tables = l
        .cell_param
        .iter()
        .map(|row| row.iter().map(|&p| bits[p]).collect())
        .collect();
    Distinguisher {
        alphabet,
        n,
        k,
        tables,
        graph: None,
    }
}

/// Family member with the largest `|advantage|`, and its signed advantage.
///
/// Ties go to the smallest member index. Linear families are maximized in
/// closed form: the best member sets exactly the parameters with positive
/// (or exactly the negative) aggregated coefficient.
pub fn max_advantage_oracle(
    p: &TextDistribution,
    q: &TextDistribution,
    k: usize,
    family: &Family,
) -> Result<(Distinguisher, f64)> {
    let cells = advantage_cells(p, q, k)?;
    match family {
        Family::Explicit(members) => {
            let mut best: Option<(usize, f64)> = None;
            for (idx, d) in members.iter().enumerate() {
                let adv = cells.advantage(d)?;
                if best.is_none_or(|(_, b)| adv.abs() > b.abs()) {
                    best = Some((idx, adv));
                }
            }
            let (idx, adv) =
                best.ok_or_else(|| Error::Domain("empty distinguisher family".into()))?;
            Ok((members[idx].clone(), adv))
        }
        other => {
            let (alphabet, n) = (p.alphabet(), p.n());
            let l = linear_layout(other, alphabet, n, k).expect("linear family");
            let mut agg = vec![0.0; l.params];
            for (row, params) in cells.coefs.iter().zip(&l.cell_param) {
                for (&c, &pi) in row.iter().zip(params) {
                    agg[pi] += c;
                }
            }
            let pos: Vec<u8> = agg.iter().map(|&c| (c > 0.0) as u8).collect();
            let neg: Vec<u8> = agg.iter().map(|&c| (c < 0.0) as u8).collect();
            let dp = member_from_bits(&l, &pos, alphabet, n, k);
            let dn = member_from_bits(&l, &neg, alphabet, n, k);
            let (ap, an) = (cells.advantage(&dp)?, cells.advantage(&dn)?);
            let pick_neg = an.abs() > ap.abs() || (an.abs() == ap.abs() && neg < pos);
            Ok(if pick_neg { (dn, an) } else { (dp, ap) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_table_distinguisher, random_text, rng};

    fn bin() -> Alphabet {
        Alphabet::binary()
    }

    #[test]
    fn zero_distinguisher_and_equal_distributions() {
        let mut r = rng(4);
        let p = random_text(bin(), 4, 0.05, &mut r).unwrap();
        let q = random_text(bin(), 4, 0.05, &mut r).unwrap();
        let zero = Distinguisher::constant(bin(), 4, 2, false).unwrap();
        assert_eq!(advantage(&zero, &p, &q).unwrap(), 0.0);
        let d = random_table_distinguisher(bin(), 4, 2, &mut r).unwrap();
        assert!(advantage(&d, &p, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn offset_weights() {
        assert_eq!(offset_weight(5, 2, 0), 3);
        assert_eq!(offset_weight(5, 2, 1), 2);
        let mut r = rng(5);
        let p = random_text(bin(), 4, 0.05, &mut r).unwrap();
        let q = random_text(bin(), 4, 0.05, &mut r).unwrap();
        let d = random_table_distinguisher(bin(), 4, 1, &mut r).unwrap();
        let rep = offset_decomposition(&d, &p, &q).unwrap();
        assert_eq!(rep.offsets.len(), 1);
        assert_eq!(rep.offsets[0].w, 4);
        assert!((rep.offsets[0].a - rep.advantage).abs() < 1e-15);
    }

    #[test]
    fn complement_negates_exactly() {
        let mut r = rng(6);
        let p = random_text(bin(), 4, 0.05, &mut r).unwrap();
        let q = random_text(bin(), 4, 0.05, &mut r).unwrap();
        let d = random_table_distinguisher(bin(), 4, 3, &mut r).unwrap();
        assert_eq!(
            advantage(&d, &p, &q).unwrap(),
            -advantage(&d.complement(), &p, &q).unwrap()
        );
    }

    #[test]
    fn one_prefix_family_size() {
        assert_eq!(Family::OnePrefixTables.size(bin(), 4, 2), Some(1 << 16));
        assert_eq!(Family::WindowPredicates.size(bin(), 4, 1), Some(1 << 30));
    }

    #[test]
    fn trivial_family() {
        let mut r = rng(7);
        let p = random_text(bin(), 3, 0.05, &mut r).unwrap();
        let q = random_text(bin(), 3, 0.05, &mut r).unwrap();
        let zero = Distinguisher::constant(bin(), 3, 1, false).unwrap();
        let (d, adv) =
            max_advantage_oracle(&p, &q, 1, &Family::Explicit(vec![zero.clone()])).unwrap();
        assert_eq!((d, adv), (zero, 0.0));
        let (_, adv) = max_advantage_oracle(&p, &p, 1, &Family::WindowPredicates).unwrap();
        assert!(adv.abs() < 1e-15);
    }

    #[test]
    fn rejects_window_longer_than_document() {
        assert!(Distinguisher::constant(bin(), 2, 3, false).is_err());
    }
}
