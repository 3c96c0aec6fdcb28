//! Exact text distributions over `Σⁿ` and next-token language models.
//!
//! Documents are indexed lexicographically with `x_1` most significant.
//! Positions are 1-based: `x_{:i}` is the prefix `x_1 … x_{i-1}`.
//! Logarithms are natural throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Token = u32;

/// Tolerance for the normalization invariants of in-memory values.
pub const NORM_TOL: f64 = 1e-12;
/// Tolerance applied by the file loader.
pub const LOAD_TOL: f64 = 1e-9;
/// Default cap on dense tables and enumerations.
pub const DEFAULT_MAX_ENUM: usize = 1 << 20;
/// Environment variable overriding [`DEFAULT_MAX_ENUM`].
pub const MAX_ENUM_ENV: &str = "NTPBOOST_MAX_ENUM";
/// Printed in place of the empty string.
pub const EMPTY_STRING: &str = "<empty>";

/// Current enumeration cap, honoring `NTPBOOST_MAX_ENUM`.
pub fn max_enum() -> usize {
    std::env::var(MAX_ENUM_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(DEFAULT_MAX_ENUM)
}

/// A finite alphabet `{0, …, size-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Domain("alphabet size must be at least 1".into()));
        }
        Ok(Alphabet { size })
    }

    pub fn binary() -> Self {
        Alphabet { size: 2 }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `|Σ|^len`, or a sizing error when it exceeds the enumeration cap.
    pub fn count(&self, len: usize) -> Result<usize> {
        let cap = max_enum();
        let mut acc: u128 = 1;
        for _ in 0..len {
            acc *= self.size as u128;
            if acc > cap as u128 {
                return Err(Error::Sizing {
                    what: format!("|Σ|^{len} with |Σ|={}", self.size),
                    needed: (self.size as u128).saturating_pow(len as u32),
                    cap: cap as u128,
                });
            }
        }
        Ok(acc as usize)
    }

    /// `|Σ|^len` without the cap (panics on overflow of `usize`).
    pub fn pow(&self, len: usize) -> usize {
        self.size
            .checked_pow(len as u32)
            .expect("alphabet power overflows usize")
    }
}

/// Lexicographic index of `tokens` in `Σ^{|tokens|}`.
pub fn encode(tokens: &[Token], base: usize) -> usize {
    tokens
        .iter()
        .fold(0usize, |acc, &t| acc * base + t as usize)
}

/// Inverse of [`encode`].
pub fn decode(mut index: usize, len: usize, base: usize) -> Vec<Token> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = (index % base) as Token;
        index /= base;
    }
    out
}

/// Human-readable rendering of a token string.
pub fn format_tokens(tokens: &[Token]) -> String {
    if tokens.is_empty() {
        return EMPTY_STRING.to_string();
    }
    if tokens.iter().all(|&t| t < 10) {
        tokens.iter().map(|t| char::from(b'0' + *t as u8)).collect()
    } else {
        tokens
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(".")
    }
}

fn check_tokens(alphabet: Alphabet, tokens: &[Token]) -> Result<()> {
    if let Some(t) = tokens.iter().find(|&&t| t as usize >= alphabet.size()) {
        return Err(Error::Domain(format!(
            "token {t} outside alphabet of size {}",
            alphabet.size()
        )));
    }
    Ok(())
}

/// A probability table over all documents in `Σⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TextDistribution {
    alphabet: Alphabet,
    n: usize,
    probs: Vec<f64>,
}

impl TextDistribution {
    /// Validates nonnegativity and normalization within [`NORM_TOL`].
    pub fn new(alphabet: Alphabet, n: usize, probs: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(alphabet, n, probs, NORM_TOL)
    }

    pub fn with_tolerance(alphabet: Alphabet, n: usize, probs: Vec<f64>, tol: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("document length must be positive".into()));
        }
        let size = alphabet.count(n)?;
        if probs.len() != size {
            return Err(Error::Domain(format!(
                "expected {size} probabilities for |Σ|={} n={n}, got {}",
                alphabet.size(),
                probs.len()
            )));
        }
        if let Some((i, v)) = probs
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::Domain(format!(
                "probability of document {} is {v}",
                format_tokens(&decode(i, n, alphabet.size()))
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::Normalization {
                what: "text distribution".into(),
                sum,
                tolerance: tol,
            });
        }
        Ok(TextDistribution { alphabet, n, probs })
    }

    pub fn uniform(alphabet: Alphabet, n: usize) -> Result<Self> {
        let size = alphabet.count(n)?;
        Self::new(alphabet, n, vec![1.0 / size as f64; size])
    }

    pub fn point_mass(alphabet: Alphabet, doc: &[Token]) -> Result<Self> {
        check_tokens(alphabet, doc)?;
        let size = alphabet.count(doc.len())?;
        let mut probs = vec![0.0; size];
        probs[encode(doc, alphabet.size())] = 1.0;
        Self::new(alphabet, doc.len(), probs)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, doc: &[Token]) -> f64 {
        self.probs[encode(doc, self.alphabet.size())]
    }

    pub fn document(&self, index: usize) -> Vec<Token> {
        decode(index, self.n, self.alphabet.size())
    }

    /// Marginals of every prefix of length `len`, indexed lexicographically.
    pub fn marginals(&self, len: usize) -> Vec<f64> {
        assert!(len <= self.n, "prefix length exceeds n");
        let block = self.alphabet.pow(self.n - len);
        self.probs.chunks(block).map(|c| c.iter().sum()).collect()
    }

    /// `Σ_z text(s·z)`.
    pub fn marginal(&self, s: &[Token]) -> Result<f64> {
        if s.len() > self.n {
            return Err(Error::Domain(format!(
                "prefix length {} exceeds n={}",
                s.len(),
                self.n
            )));
        }
        check_tokens(self.alphabet, s)?;
        let block = self.alphabet.pow(self.n - s.len());
        let start = encode(s, self.alphabet.size()) * block;
        Ok(self.probs[start..start + block].iter().sum())
    }

    /// `marginal(s·z) / marginal(s)`.
    pub fn block_conditional(&self, s: &[Token], z: &[Token]) -> Result<f64> {
        if s.len() + z.len() > self.n {
            return Err(Error::Domain("|s|+|z| exceeds n".into()));
        }
        let ms = self.marginal(s)?;
        if ms <= 0.0 {
            return Err(Error::ZeroMarginal {
                prefix: format_tokens(s),
            });
        }
        let sz: Vec<Token> = s.iter().chain(z).copied().collect();
        Ok(self.marginal(&sz)? / ms)
    }

    fn same_shape(&self, other: &TextDistribution) -> Result<()> {
        if self.alphabet != other.alphabet || self.n != other.n {
            return Err(Error::Domain(
                "distributions differ in alphabet or length".into(),
            ));
        }
        Ok(())
    }
}

/// Next-token conditionals `q(y | s)` for every prefix `s ∈ Σ^{<n}`.
///
/// `tables[l]` holds `|Σ|^{l+1}` entries: row `code(s)` of width `|Σ|`.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageModel {
    alphabet: Alphabet,
    n: usize,
    tables: Vec<Vec<f64>>,
    normalized: bool,
}

impl LanguageModel {
    /// Builds from explicit tables, checking each row sums to one.
    pub fn from_tables(alphabet: Alphabet, n: usize, tables: Vec<Vec<f64>>) -> Result<Self> {
        let lm = Self::from_tables_unnormalized(alphabet, n, tables)?;
        let a = alphabet.size();
        for (len, table) in lm.tables.iter().enumerate() {
            for (code, row) in table.chunks(a).enumerate() {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > NORM_TOL {
                    return Err(Error::Normalization {
                        what: format!(
                            "conditional at prefix {}",
                            format_tokens(&decode(code, len, a))
                        ),
                        sum,
                        tolerance: NORM_TOL,
                    });
                }
            }
        }
        Ok(LanguageModel {
            normalized: true,
            ..lm
        })
    }

    /// Builds from tables whose rows need not sum to one (quantized models).
    pub fn from_tables_unnormalized(
        alphabet: Alphabet,
        n: usize,
        tables: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("document length must be positive".into()));
        }
        alphabet.count(n)?;
        if tables.len() != n {
            return Err(Error::Domain(format!(
                "expected {n} conditional tables, got {}",
                tables.len()
            )));
        }
        for (len, t) in tables.iter().enumerate() {
            if t.len() != alphabet.pow(len + 1) {
                return Err(Error::Domain(format!(
                    "conditional table {len} has wrong size"
                )));
            }
            if let Some(v) = t
                .iter()
                .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0 + NORM_TOL)
            {
                return Err(Error::Domain(format!(
                    "conditional value {v} outside [0,1]"
                )));
            }
        }
        Ok(LanguageModel {
            alphabet,
            n,
            tables,
            normalized: false,
        })
    }

    /// Builds by evaluating `f(prefix, y)` on every prefix.
    pub fn from_fn(
        alphabet: Alphabet,
        n: usize,
        mut f: impl FnMut(&[Token], Token) -> f64,
    ) -> Result<Self> {
        alphabet.count(n)?;
        let a = alphabet.size();
        let tables = (0..n)
            .map(|len| {
                let mut t = Vec::with_capacity(alphabet.pow(len + 1));
                for code in 0..alphabet.pow(len) {
                    let s = decode(code, len, a);
                    for y in 0..a {
                        t.push(f(&s, y as Token));
                    }
                }
                t
            })
            .collect();
        Self::from_tables(alphabet, n, tables)
    }

    pub fn uniform(alphabet: Alphabet, n: usize) -> Result<Self> {
        let u = 1.0 / alphabet.size() as f64;
        Self::from_fn(alphabet, n, |_, _| u)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.tables
    }

    /// `q(y | prefix)` for `|prefix| < n`.
    pub fn cond(&self, prefix: &[Token], y: Token) -> f64 {
        let a = self.alphabet.size();
        self.tables[prefix.len()][encode(prefix, a) * a + y as usize]
    }

    /// Conditional row for the prefix with length `len` and code `code`.
    pub fn row(&self, len: usize, code: usize) -> &[f64] {
        let a = self.alphabet.size();
        &self.tables[len][code * a..(code + 1) * a]
    }

    /// `Π_t q(z_t | s·z_{:t})`, extended by `1/|Σ|` per token beyond position `n`.
    pub fn block_prob(&self, s: &[Token], z: &[Token]) -> f64 {
        let mut buf: Vec<Token> = s.to_vec();
        let mut prob = 1.0;
        for &t in z {
            prob *= if buf.len() < self.n {
                self.cond(&buf, t)
            } else {
                1.0 / self.alphabet.size() as f64
            };
            buf.push(t);
        }
        prob
    }

    pub fn min_conditional(&self) -> f64 {
        self.tables
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// The text distribution induced by the chain rule.
pub fn lm_to_text(lm: &LanguageModel) -> Result<TextDistribution> {
    if !lm.normalized {
        return Err(Error::Normalization {
            what: "language model conditionals".into(),
            sum: f64::NAN,
            tolerance: NORM_TOL,
        });
    }
    let a = lm.alphabet.size();
    let mut level = vec![1.0];
    for len in 0..lm.n {
        let mut next = Vec::with_capacity(level.len() * a);
        for (code, &p) in level.iter().enumerate() {
            for &c in lm.row(len, code) {
                next.push(p * c);
            }
        }
        level = next;
    }
    TextDistribution::new(lm.alphabet, lm.n, level)
}

/// Next-token conditionals of `text`; zero-marginal prefixes get the uniform row.
pub fn text_to_lm(text: &TextDistribution) -> LanguageModel {
    let a = text.alphabet.size();
    let uniform = 1.0 / a as f64;
    let tables = (0..text.n)
        .map(|len| {
            let here = text.marginals(len);
            let next = text.marginals(len + 1);
            let mut t = Vec::with_capacity(next.len());
            for (code, &m) in here.iter().enumerate() {
                for y in 0..a {
                    t.push(if m > 0.0 {
                        next[code * a + y] / m
                    } else {
                        uniform
                    });
                }
            }
            t
        })
        .collect();
    LanguageModel {
        alphabet: text.alphabet,
        n: text.n,
        tables,
        normalized: true,
    }
}

/// `KL(p‖q) = Σ_x p(x) log(p(x)/q(x))`.
pub fn kl(p: &TextDistribution, q: &TextDistribution) -> Result<f64> {
    p.same_shape(q)?;
    let mut acc = 0.0;
    for (i, (&pi, &qi)) in p.probs.iter().zip(&q.probs).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::Support {
                    document: format_tokens(&p.document(i)),
                });
            }
            acc += pi * (pi / qi).ln();
        }
    }
    Ok(acc.max(0.0))
}

/// `-E_{x∼p} (1/n) Σ_i log q(x_i | x_{:i})`.
pub fn next_token_loss(p: &TextDistribution, q: &LanguageModel) -> Result<f64> {
    if p.alphabet != q.alphabet || p.n != q.n {
        return Err(Error::Domain(
            "distribution and model differ in alphabet or length".into(),
        ));
    }
    let a = p.alphabet.size();
    let mut acc = 0.0;
    for len in 0..p.n {
        let next = p.marginals(len + 1);
        for (idx, &m) in next.iter().enumerate() {
            if m > 0.0 {
                let c = q.tables[len][idx];
                if c <= 0.0 {
                    let mut s = decode(idx / a, len, a);
                    s.push((idx % a) as Token);
                    return Err(Error::Support {
                        document: format_tokens(&s),
                    });
                }
                acc -= m * c.ln();
            }
        }
    }
    Ok(acc / p.n as f64)
}

/// `-Σ_x p(x) log p(x)` with `0·log 0 = 0`.
pub fn entropy(p: &TextDistribution) -> f64 {
    -p.probs
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// `(1/2) Σ_x |p(x) − q(x)|`.
pub fn tv(p: &TextDistribution, q: &TextDistribution) -> Result<f64> {
    p.same_shape(q)?;
    Ok(0.5
        * p.probs
            .iter()
            .zip(&q.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// KL, entropy, loss and TV for a data distribution and a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub kl: f64,
    pub entropy_p: f64,
    pub loss_q: f64,
    pub tv: f64,
}

pub fn divergence_report(p: &TextDistribution, q: &LanguageModel) -> Result<DivergenceReport> {
    let qt = lm_to_text(q)?;
    Ok(DivergenceReport {
        kl: kl(p, &qt)?,
        entropy_p: entropy(p),
        loss_q: next_token_loss(p, q)?,
        tv: tv(p, &qt)?,
    })
}
