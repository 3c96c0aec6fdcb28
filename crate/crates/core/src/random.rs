//! Seeded generators for random test instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::{Alphabet, LanguageModel, TextDistribution};
use crate::distinguisher::Distinguisher;
use crate::error::Result;

pub type InstanceRng = ChaCha8Rng;

pub fn rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A full-support distribution with weights drawn from `[floor, 1]` before normalizing.
pub fn random_text(
    alphabet: Alphabet,
    n: usize,
    floor: f64,
    rng: &mut impl Rng,
) -> Result<TextDistribution> {
    let size = alphabet.count(n)?;
    let raw: Vec<f64> = (0..size).map(|_| rng.random_range(floor..=1.0)).collect();
    let sum: f64 = raw.iter().sum();
    TextDistribution::new(alphabet, n, raw.into_iter().map(|v| v / sum).collect())
}

/// A distribution concentrated on a few documents, with small mass elsewhere.
pub fn peaked_text(
    alphabet: Alphabet,
    n: usize,
    peaks: usize,
    rng: &mut impl Rng,
) -> Result<TextDistribution> {
    let size = alphabet.count(n)?;
    let mut raw: Vec<f64> = (0..size).map(|_| rng.random_range(0.001..0.01)).collect();
    for _ in 0..peaks {
        let i = rng.random_range(0..size);
        raw[i] += rng.random_range(0.5..1.0);
    }
    let sum: f64 = raw.iter().sum();
    TextDistribution::new(alphabet, n, raw.into_iter().map(|v| v / sum).collect())
}

/// A full-support language model with every conditional at least `floor / |Σ|`-ish.
pub fn random_lm(
    alphabet: Alphabet,
    n: usize,
    floor: f64,
    rng: &mut impl Rng,
) -> Result<LanguageModel> {
    let a = alphabet.size();
    let mut rows = Vec::new();
    for len in 0..n {
        let mut t = Vec::with_capacity(alphabet.pow(len + 1));
        for _ in 0..alphabet.pow(len) {
            let raw: Vec<f64> = (0..a).map(|_| rng.random_range(floor..=1.0)).collect();
            let sum: f64 = raw.iter().sum();
            let mut row: Vec<f64> = raw.iter().map(|v| v / sum).collect();
            let head: f64 = row[..a - 1].iter().sum();
            row[a - 1] = 1.0 - head;
            t.extend(row);
        }
        rows.push(t);
    }
    LanguageModel::from_tables(alphabet, n, rows)
}

/// A language model whose conditionals are multiples of `1/denom`, each at least `1/denom`.
pub fn dyadic_lm(
    alphabet: Alphabet,
    n: usize,
    denom: u32,
    rng: &mut impl Rng,
) -> Result<LanguageModel> {
    let a = alphabet.size();
    assert!(denom as usize >= a, "denominator smaller than alphabet");
    let mut rows = Vec::new();
    for len in 0..n {
        let mut t = Vec::with_capacity(alphabet.pow(len + 1));
        for _ in 0..alphabet.pow(len) {
            let mut counts = vec![1u32; a];
            for _ in 0..(denom as usize - a) {
                counts[rng.random_range(0..a)] += 1;
            }
            t.extend(counts.iter().map(|&c| c as f64 / denom as f64));
        }
        rows.push(t);
    }
    LanguageModel::from_tables(alphabet, n, rows)
}

/// A table distinguisher with independent fair bits in every cell.
pub fn random_table_distinguisher(
    alphabet: Alphabet,
    n: usize,
    k: usize,
    rng: &mut impl Rng,
) -> Result<Distinguisher> {
    Distinguisher::from_fn(alphabet, n, k, |_, _| rng.random_bool(0.5))
}
