//! Brute-force oracles computed directly from document probabilities.
#![allow(dead_code)]

use ntpboost::dist::{decode, Alphabet, LanguageModel, TextDistribution, Token};
use ntpboost::distinguisher::Distinguisher;

pub fn all_streams(a: usize, n: usize) -> Vec<Vec<Token>> {
    (0..a.pow(n as u32)).map(|c| decode(c, n, a)).collect()
}

/// `Σ_{x : x_{:|s|} = s} p(x)`.
pub fn marginal(p: &TextDistribution, s: &[Token]) -> f64 {
    let (a, n) = (p.alphabet().size(), p.n());
    (0..p.probs().len())
        .filter(|&i| decode(i, n, a)[..s.len()] == *s)
        .map(|i| p.probs()[i])
        .sum()
}

pub fn kl(p: &TextDistribution, q: &TextDistribution) -> f64 {
    p.probs()
        .iter()
        .zip(q.probs())
        .filter(|(&x, _)| x > 0.0)
        .map(|(&x, &y)| x * (x / y).ln())
        .sum()
}

pub fn entropy(p: &TextDistribution) -> f64 {
    -p.probs()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Chain-rule conditionals `q(x_i | x_{:i}) = q̄(x_{:i+1})/q̄(x_{:i})`, uniform on null prefixes.
pub fn conditionals(q: &TextDistribution) -> LanguageModel {
    let (alphabet, n) = (q.alphabet(), q.n());
    let a = alphabet.size();
    let tables = (0..n)
        .map(|len| {
            let mut t = Vec::new();
            for c in 0..a.pow(len as u32) {
                let s = decode(c, len, a);
                let m = marginal(q, &s);
                for y in 0..a as Token {
                    let mut sy = s.clone();
                    sy.push(y);
                    t.push(if m > 0.0 {
                        marginal(q, &sy) / m
                    } else {
                        1.0 / a as f64
                    });
                }
            }
            t
        })
        .collect();
    LanguageModel::from_tables_unnormalized(alphabet, n, tables).unwrap()
}

/// `q̄(x) = Π q(x_i | x_{:i})`.
pub fn text_prob(lm: &LanguageModel, x: &[Token]) -> f64 {
    (0..x.len()).map(|i| lm.cond(&x[..i], x[i])).product()
}

/// Coefficient `p̄(s)·q̄(w | s) − p̄(s·w)` of window `x = s·w` at position `i` (1-based).
pub fn cell(p: &TextDistribution, q: &TextDistribution, i: usize, x: &[Token]) -> f64 {
    let s = &x[..i - 1];
    let qs = marginal(q, s);
    let qw = if qs > 0.0 {
        marginal(q, x) / qs
    } else {
        (p.alphabet().size() as f64).powi(-((x.len() - s.len()) as i32))
    };
    marginal(p, s) * qw - marginal(p, x)
}

/// Window length at position `i`.
pub fn window(n: usize, k: usize, i: usize) -> usize {
    (i + k - 1).min(n)
}

/// Signed advantage, summing `d·coefficient` over every window.
pub fn advantage(d: &Distinguisher, p: &TextDistribution, q: &TextDistribution) -> f64 {
    let (a, n, k) = (p.alphabet().size(), p.n(), d.k());
    let mut total = 0.0;
    for i in 1..=n {
        let len = window(n, k, i);
        for c in 0..a.pow(len as u32) {
            let x = decode(c, len, a);
            if d.eval(i, &x) == 1 {
                total += cell(p, q, i, &x);
            }
        }
    }
    total / n as f64
}

pub fn bin() -> Alphabet {
    Alphabet::binary()
}
