//! The self-boosting loss-minimization loop.
//!
//! Loss minimization under a size schedule is realized constructively: a
//! trajectory of models is grown from the uniform model by repeatedly
//! boosting with the best member of a finite distinguisher family, and the
//! minimizer for a schedule index is the last trajectory model that fits
//! its size, hidden-set and time budgets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boosting::boost_text;
use crate::construction::{
    boosted_hidden, boosted_size, boosted_time, build_boosted_rnn, max_conditional_error,
};
use crate::dist::{kl, next_token_loss, text_to_lm, Alphabet, LanguageModel, TextDistribution};
use crate::distinguisher::{max_advantage_oracle, Family};
use crate::error::{Error, Result};
use crate::rnn::{constant_lm_graph, distinguisher_table_graph, RnnGraph};

/// Size, hidden-set size and RNN-time of a compiled table distinguisher.
pub const TABLE_D: (usize, usize, u64) = (4, 2, 1);
/// Compilation is skipped once the model's RNN-time exceeds this.
pub const COMPILE_TIME_CAP: u64 = 1000;
/// Tolerance for compiled-versus-analytic conditionals.
pub const COMPILE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Plain,
    Bits,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub variant: Variant,
    pub d_bound: usize,
    pub k: usize,
    pub tau: u64,
    pub epsilon: f64,
    pub alphabet: Alphabet,
    /// Distinguisher bit size `b_D` (bits variant).
    pub b_d: u32,
}

/// Budgets of one schedule index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub index: u64,
    pub size: u128,
    pub hidden: u128,
    /// `None` when the value exceeds `u128`.
    pub time: Option<u128>,
    pub time_log2: f64,
    pub bits: Option<f64>,
    pub ell: Option<f64>,
}

pub fn make_schedule(
    variant: Variant,
    d_bound: usize,
    k: usize,
    tau: u64,
    epsilon: f64,
    alphabet: Alphabet,
    b_d: u32,
) -> Result<Schedule> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("ε must lie in (0,1), got {epsilon}")));
    }
    if d_bound == 0 || k == 0 || tau == 0 {
        return Err(Error::Domain("d_bound, k and τ must be positive".into()));
    }
    Ok(Schedule {
        variant,
        d_bound,
        k,
        tau,
        epsilon,
        alphabet,
        b_d,
    })
}

impl Schedule {
    fn dk(&self) -> u128 {
        (self.d_bound + self.k) as u128
    }

    /// `17(𝒹+k)i²`.
    pub fn size(&self, i: u64) -> u128 {
        17 * self.dk() * (i as u128) * (i as u128)
    }

    /// `12(𝒹+k)i`.
    pub fn hidden(&self, i: u64) -> u128 {
        12 * self.dk() * i as u128
    }

    fn growth(&self) -> u128 {
        8 * self.k as u128 * self.alphabet.pow(self.k) as u128
    }

    /// `(8k|Σ|ᵏ)^{i−1}·τ`, or `None` past `u128`.
    pub fn time(&self, i: u64) -> Option<u128> {
        let e = u32::try_from(i.checked_sub(1)?).ok()?;
        self.growth().checked_pow(e)?.checked_mul(self.tau as u128)
    }

    pub fn time_log2(&self, i: u64) -> f64 {
        (i as f64 - 1.0) * (self.growth() as f64).log2() + (self.tau as f64).log2()
    }

    /// `b_D + 3k·log|Σ|·i² + i·log τ + 772(k²/ε²·log|Σ| + log(1/ε))`, logs base 2.
    pub fn bits(&self, i: u64) -> f64 {
        let (k, i, eps) = (self.k as f64, i as f64, self.epsilon);
        let la = (self.alphabet.size() as f64).log2();
        self.b_d as f64
            + 3.0 * k * la * i * i
            + i * (self.tau as f64).log2()
            + 772.0 * (k * k / (eps * eps) * la + (1.0 / eps).log2())
    }

    /// `0.99/(|Σ|·4^{i−1})`.
    pub fn ell(&self, i: u64) -> f64 {
        0.99 / (self.alphabet.size() as f64 * 4f64.powf(i as f64 - 1.0))
    }

    pub fn constraints(&self, i: u64) -> Constraints {
        let bits = self.variant == Variant::Bits;
        Constraints {
            index: i,
            size: self.size(i),
            hidden: self.hidden(i),
            time: self.time(i),
            time_log2: self.time_log2(i),
            bits: bits.then(|| self.bits(i)),
            ell: bits.then(|| self.ell(i)),
        }
    }

    /// Stopping threshold `ε²/4k` (plain) or `ε²/8k` (bits).
    pub fn threshold(&self) -> f64 {
        let c = match self.variant {
            Variant::Plain => 4.0,
            Variant::Bits => 8.0,
        };
        self.epsilon * self.epsilon / (c * self.k as f64)
    }

    /// `[⌈c₁k·ln|Σ|/ε²⌉, ⌊c₂k·ln|Σ|/ε²⌋]` with `(c₁,c₂) = (4,44)` or `(16,176)`.
    pub fn j0_range(&self) -> (u64, u64) {
        j0_range(self.variant, self.k, self.alphabet, self.epsilon)
    }
}

pub fn j0_range(variant: Variant, k: usize, alphabet: Alphabet, epsilon: f64) -> (u64, u64) {
    let (lo, hi) = match variant {
        Variant::Plain => (4.0, 44.0),
        Variant::Bits => (16.0, 176.0),
    };
    let base = k as f64 * (alphabet.size() as f64).ln() / (epsilon * epsilon);
    ((lo * base).ceil() as u64, (hi * base).floor() as u64)
}

/// Uniform draw from [`j0_range`].
pub fn sample_j0(
    variant: Variant,
    k: usize,
    alphabet: Alphabet,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<u64> {
    let (lo, hi) = j0_range(variant, k, alphabet, epsilon);
    if lo > hi {
        return Err(Error::Domain(format!("empty j0 range [{lo}, {hi}]")));
    }
    Ok(rng.random_range(lo..=hi))
}

/// `L₁/ε`.
pub fn bad_set_bound(l1: f64, epsilon: f64) -> Result<f64> {
    if !(l1 >= 0.0 && epsilon > 0.0) {
        return Err(Error::Domain("need L₁ ≥ 0 and ε > 0".into()));
    }
    Ok(l1 / epsilon)
}

/// One model of the boosting trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryModel {
    pub round: usize,
    pub q: TextDistribution,
    pub size: u128,
    pub hidden: u128,
    pub time: Option<u128>,
    pub loss: f64,
    pub kl: f64,
    pub min_conditional: f64,
    /// Signed advantage of the best family member against this model.
    pub best_advantage: f64,
    /// `α` and offset of the boost that produced this model.
    pub alpha: f64,
    pub offset: usize,
    pub drop_certified: bool,
    /// Compiled-graph equivalence; `None` when the round was not compiled.
    pub compiled: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    /// No family member has advantage above `ε`.
    Converged,
    /// The next boosted model exceeds the budgets.
    BudgetExhausted,
}

/// Grows the trajectory lazily and answers constrained minimization queries.
pub struct Trajectory<'a> {
    p: &'a TextDistribution,
    family: &'a Family,
    epsilon: f64,
    k: usize,
    compile: bool,
    max_rounds: usize,
    models: Vec<TrajectoryModel>,
    graph: Option<RnnGraph>,
    done: bool,
}

impl<'a> Trajectory<'a> {
    pub fn new(
        p: &'a TextDistribution,
        family: &'a Family,
        epsilon: f64,
        k: usize,
        compile: bool,
    ) -> Result<Self> {
        let alphabet = p.alphabet();
        let q0 = TextDistribution::uniform(alphabet, p.n())?;
        let lm = text_to_lm(&q0);
        let (_, adv) = max_advantage_oracle(p, &q0, k, family)?;
        let graph = if compile {
            Some(constant_lm_graph(alphabet)?)
        } else {
            None
        };
        let compiled = match &graph {
            Some(g) => Some(max_conditional_error(g, &lm, None)? <= COMPILE_TOL),
            None => None,
        };
        let first = TrajectoryModel {
            round: 0,
            loss: next_token_loss(p, &lm)?,
            kl: kl(p, &q0)?,
            min_conditional: lm.min_conditional(),
            q: q0,
            size: 2,
            hidden: 0,
            time: Some(1),
            best_advantage: adv,
            alpha: 0.0,
            offset: 0,
            drop_certified: true,
            compiled,
        };
        let n_rounds = 4.0 * k as f64 * (alphabet.size() as f64).ln() / (epsilon * epsilon);
        Ok(Trajectory {
            p,
            family,
            epsilon,
            k,
            compile,
            max_rounds: n_rounds.floor() as usize + 1,
            models: vec![first],
            graph,
            done: false,
        })
    }

    pub fn models(&self) -> &[TrajectoryModel] {
        &self.models
    }

    fn last(&self) -> &TrajectoryModel {
        self.models.last().expect("trajectory is never empty")
    }

    /// Appends one boosted model; returns `false` when the trajectory has converged.
    fn grow(&mut self) -> Result<bool> {
        if self.done {
            return Ok(false);
        }
        let cur = self.last().clone();
        if cur.best_advantage.abs() <= self.epsilon {
            self.done = true;
            return Ok(false);
        }
        if cur.round >= self.max_rounds {
            return Err(Error::Invariant(format!(
                "more than {} boosting rounds",
                self.max_rounds
            )));
        }
        let (d, _) = max_advantage_oracle(self.p, &cur.q, self.k, self.family)?;
        let res = boost_text(self.p, &cur.q, &d)?;
        let (ds, dh, dt) = TABLE_D;
        let alphabet = self.p.alphabet();
        let time = cur.time.and_then(|t| {
            let t = u64::try_from(t).ok()?;
            Some(boosted_time(alphabet, self.k, t, dt) as u128)
        });
        let mut compiled = None;
        if self.compile {
            if let (Some(g), Some(t)) = (&self.graph, time) {
                if t <= COMPILE_TIME_CAP as u128 {
                    let dg = distinguisher_table_graph(&res.applied)?;
                    let (next, rep) =
                        build_boosted_rnn(g, &dg, alphabet, self.k, res.alpha, res.offset)?;
                    let err = max_conditional_error(&next, &res.lm_boosted, None)?;
                    compiled = Some(
                        rep.accounting_matches()
                            && err <= COMPILE_TOL
                            && rep.built_time as u128 == t,
                    );
                    self.graph = Some(next);
                } else {
                    self.graph = None;
                }
            }
        }
        let lm = text_to_lm(&res.q_boosted);
        let (_, adv) = max_advantage_oracle(self.p, &res.q_boosted, self.k, self.family)?;
        let next = TrajectoryModel {
            round: cur.round + 1,
            loss: next_token_loss(self.p, &lm)?,
            kl: res.kl_after,
            min_conditional: lm.min_conditional(),
            size: boosted_size(cur.size as usize, cur.hidden as usize, ds, dh, self.k) as u128,
            hidden: boosted_hidden(cur.hidden as usize, dh, self.k) as u128,
            time,
            best_advantage: adv,
            alpha: res.alpha,
            offset: res.offset,
            drop_certified: res.certificate_holds(),
            compiled,
            q: res.q_boosted,
        };
        self.models.push(next);
        Ok(true)
    }

    fn fits(m: &TrajectoryModel, c: &Constraints) -> bool {
        let time_ok = match (m.time, c.time) {
            (_, None) => true,
            (Some(t), Some(ct)) => t <= ct,
            (None, Some(_)) => false,
        };
        let ell_ok = c.ell.is_none_or(|l| m.min_conditional >= l);
        m.size <= c.size && m.hidden <= c.hidden && time_ok && ell_ok
    }

    /// Last trajectory model within `c`, growing the trajectory as needed.
    pub fn minimize(&mut self, c: &Constraints) -> Result<(usize, FitStatus)> {
        loop {
            if !Self::fits(self.last(), c) {
                let idx = self.models.iter().rposition(|m| Self::fits(m, c));
                return match idx {
                    Some(i) => Ok((i, FitStatus::BudgetExhausted)),
                    None => Err(Error::Precondition(format!(
                        "no model fits the budgets of index {}",
                        c.index
                    ))),
                };
            }
            if !self.grow()? {
                return Ok((self.models.len() - 1, FitStatus::Converged));
            }
        }
    }
}

/// Result of a single constrained minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedFit {
    pub model: TrajectoryModel,
    pub lm: LanguageModel,
    pub status: FitStatus,
}

/// The lowest-loss trajectory model within `c`.
pub fn minimize_loss_constrained(
    p: &TextDistribution,
    c: &Constraints,
    family: &Family,
    epsilon: f64,
    k: usize,
) -> Result<ConstrainedFit> {
    let mut tr = Trajectory::new(p, family, epsilon, k, false)?;
    let (idx, status) = tr.minimize(c)?;
    let model = tr.models()[idx].clone();
    Ok(ConstrainedFit {
        lm: text_to_lm(&model.q),
        model,
        status,
    })
}

/// One visited schedule index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub index: u64,
    pub constraints: Constraints,
    pub model_round: usize,
    pub size: u128,
    pub hidden: u128,
    pub time: Option<u128>,
    pub loss: f64,
    pub kl: f64,
    pub alpha: f64,
    pub offset: usize,
    pub status: FitStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub size: u128,
    pub hidden: u128,
    pub time: Option<u128>,
    pub loss: f64,
    pub kl: f64,
    pub best_advantage: f64,
    pub alpha: f64,
    pub offset: usize,
    pub drop_certified: bool,
    pub compiled: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfBoostTrace {
    pub schedule: Schedule,
    pub j0: u64,
    pub j0_range: (u64, u64),
    pub threshold: f64,
    pub visited: Vec<IndexRecord>,
    pub rounds: Vec<RoundRecord>,
    /// Index whose model is returned.
    pub returned_index: u64,
    pub returned_round: usize,
    /// Document probabilities of the returned model in lexicographic order.
    pub returned_probs: Vec<f64>,
    pub termination: String,
    /// Largest `|advantage|` of the family against the returned model.
    pub final_max_advantage: f64,
    pub certificate_ok: bool,
    /// The minimization step is realized by family-driven boosting.
    pub oracle: String,
}

impl SelfBoostTrace {
    pub fn indices_visited(&self) -> usize {
        self.visited.len()
    }

    pub fn boosting_rounds(&self) -> usize {
        self.returned_round
    }
}

fn record(tr: &Trajectory, c: Constraints, idx: usize, status: FitStatus) -> IndexRecord {
    let m = &tr.models()[idx];
    IndexRecord {
        index: c.index,
        constraints: c,
        model_round: idx,
        size: m.size,
        hidden: m.hidden,
        time: m.time,
        loss: m.loss,
        kl: m.kl,
        alpha: m.alpha,
        offset: m.offset,
        status,
    }
}

/// Runs the loop from a given `j₀`: visits `j₀+1, j₀+2, …` and returns at
/// the first `i ≥ j₀+2` with `L_{i−1} − L_i` below the threshold,
/// reporting model `i−1`.
pub fn run_from_index(
    schedule: &Schedule,
    p: &TextDistribution,
    family: &Family,
    j0: u64,
    compile: bool,
) -> Result<SelfBoostTrace> {
    let ds = TABLE_D.0;
    if schedule.d_bound < ds {
        return Err(Error::Precondition(format!(
            "table distinguishers need d_bound ≥ {ds}"
        )));
    }
    if schedule.alphabet != p.alphabet() {
        return Err(Error::Domain(
            "schedule and distribution differ in alphabet".into(),
        ));
    }
    let thr = schedule.threshold();
    let mut tr = Trajectory::new(p, family, schedule.epsilon, schedule.k, compile)?;
    let start = j0 + 1;
    let mut visited = Vec::new();
    let c = schedule.constraints(start);
    let (idx, status) = tr.minimize(&c)?;
    visited.push(record(&tr, c, idx, status));
    let mut i = start;
    let cap = start + tr.max_rounds as u64 + 2;
    loop {
        i += 1;
        if i > cap {
            return Err(Error::Invariant(
                "the loop did not terminate within the round bound".into(),
            ));
        }
        let c = schedule.constraints(i);
        let (idx, status) = tr.minimize(&c)?;
        let rec = record(&tr, c, idx, status);
        let prev_loss = visited
            .last()
            .map(|r: &IndexRecord| r.loss)
            .expect("nonempty");
        let drop = prev_loss - rec.loss;
        visited.push(rec);
        if drop < thr {
            break;
        }
    }
    let ret = visited[visited.len() - 2].clone();
    let model = &tr.models()[ret.model_round];
    let final_adv = model.best_advantage.abs();
    let rounds = tr
        .models()
        .iter()
        .map(|m| RoundRecord {
            round: m.round,
            size: m.size,
            hidden: m.hidden,
            time: m.time,
            loss: m.loss,
            kl: m.kl,
            best_advantage: m.best_advantage,
            alpha: m.alpha,
            offset: m.offset,
            drop_certified: m.drop_certified,
            compiled: m.compiled,
        })
        .collect();
    Ok(SelfBoostTrace {
        schedule: *schedule,
        j0,
        j0_range: schedule.j0_range(),
        threshold: thr,
        termination: format!("L_{} - L_{} < {thr:.6e}", i - 1, i),
        returned_index: ret.index,
        returned_round: ret.model_round,
        returned_probs: model.q.probs().to_vec(),
        final_max_advantage: final_adv,
        certificate_ok: final_adv <= schedule.epsilon + 1e-9,
        oracle: "best-distinguisher boosting over the supplied family".into(),
        visited,
        rounds,
    })
}

/// Samples `j₀` and runs the loop.
pub fn run_algorithm(
    schedule: &Schedule,
    p: &TextDistribution,
    family: &Family,
    compile: bool,
    rng: &mut impl Rng,
) -> Result<SelfBoostTrace> {
    let j0 = sample_j0(
        schedule.variant,
        schedule.k,
        schedule.alphabet,
        schedule.epsilon,
        rng,
    )?;
    run_from_index(schedule, p, family, j0, compile)
}

/// `{j ∈ [lo, hi] : L_j − L_{j+1} ≥ threshold}` with `L_j` the constrained minimum at index `j`.
pub fn empirical_bad_set(
    schedule: &Schedule,
    p: &TextDistribution,
    family: &Family,
    lo: u64,
    hi: u64,
) -> Result<(Vec<u64>, Vec<f64>)> {
    let mut tr = Trajectory::new(p, family, schedule.epsilon, schedule.k, false)?;
    let losses = (lo..=hi + 1)
        .map(|j| {
            let (idx, _) = tr.minimize(&schedule.constraints(j))?;
            Ok(tr.models()[idx].loss)
        })
        .collect::<Result<Vec<f64>>>()?;
    let thr = schedule.threshold();
    let bad = (lo..=hi)
        .filter(|&j| losses[(j - lo) as usize] - losses[(j - lo + 1) as usize] >= thr)
        .collect();
    Ok((bad, losses))
}
