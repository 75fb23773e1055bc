//! Closed-form quantities for the walk on the growing complete graph, plus the
//! recursions they are derived from, evaluated independently so each pair can
//! be checked against the other.
//!
//! Throughout, `k0` is the initial vertex count (at least 3), `lambda` the move
//! rate and `horizon` the number of unit intervals `T`. During the interval
//! `[t-1, t)` the graph has `k0 + t - 1` vertices, so any vertex the walker is
//! not standing on is hit by a move with probability `1 / (k0 + t - 2)`.
//!
//! Exponentials of harmonic sums are always taken of the difference
//! `H(b) - H(a)`, never as a ratio of two exponentials.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{with_harmonics, ModelConfig, VertexId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticError {
    #[error("visit probabilities need a horizon of at least 1 (N_0 is exactly 1)")]
    ZeroHorizon,
    #[error("analytic report requires deterministic insertion")]
    RandomInsertion,
    #[error(transparent)]
    Config(#[from] crate::model::ConfigError),
}

fn check_k0(k0: u32) {
    assert!(k0 >= 3, "k0 must be >= 3, got {k0}");
}

fn check_prob(p: f64) {
    assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
}

/// Probability that vertex `j` has been visited by time `horizon`.
pub fn visit_prob(j: VertexId, horizon: u32, k0: u32, lambda: f64) -> Result<f64, AnalyticError> {
    check_k0(k0);
    if horizon == 0 {
        return Err(AnalyticError::ZeroHorizon);
    }
    assert!(j >= 1, "vertex ids are 1-based");
    let last = k0 + horizon - 2;
    Ok(with_harmonics(last, |h| {
        if j == 1 {
            1.0
        } else if j > last + 1 {
            0.0
        } else {
            let from = if j <= k0 { k0 - 2 } else { j - 2 };
            -(-lambda * (h[last as usize] - h[from as usize])).exp_m1()
        }
    }))
}

/// All visit probabilities `u_2, ..., u_{k0+T-1}` in vertex order.
fn visit_probs(horizon: u32, k0: u32, lambda: f64) -> Vec<f64> {
    (2..k0 + horizon)
        .map(|j| visit_prob(j, horizon, k0, lambda).expect("horizon >= 1"))
        .collect()
}

/// Expected number of covered vertices, `(k0+T-1)` minus the summed
/// non-visit probabilities. `E[N_0] = 1`.
pub fn expected_covered(horizon: u32, k0: u32, lambda: f64) -> f64 {
    check_k0(k0);
    if horizon == 0 {
        return 1.0;
    }
    let last = k0 + horizon - 2;
    with_harmonics(last, |h| {
        let top = h[last as usize];
        let initial = f64::from(k0 - 1) * (-lambda * (top - h[(k0 - 2) as usize])).exp();
        let inserted: f64 = (k0 + 1..k0 + horizon)
            .map(|j| (-lambda * (top - h[(j - 2) as usize])).exp())
            .sum();
        f64::from(k0 + horizon - 1) - (initial + inserted)
    })
}

pub fn expected_covered_asymptote(lambda: f64) -> f64 {
    lambda / (1.0 + lambda)
}

/// `Var(N_T) = Σ u_j (1 - u_j)`; the non-visit events are independent.
pub fn variance_covered(horizon: u32, k0: u32, lambda: f64) -> f64 {
    check_k0(k0);
    if horizon == 0 {
        return 0.0;
    }
    visit_probs(horizon, k0, lambda)
        .into_iter()
        .map(|u| u * (1.0 - u))
        .sum()
}

pub fn variance_covered_asymptote(lambda: f64) -> f64 {
    lambda / ((lambda + 1.0) * (2.0 * lambda + 1.0))
}

/// Bound on `P(|N_T - E[N_T]| >= t)` from bounded differences.
pub fn azuma_tail_bound(t: f64, horizon: u32, k0: u32) -> f64 {
    assert!(t >= 0.0, "deviation must be non-negative");
    (-2.0 * t * t / f64::from(k0 + horizon)).exp()
}

/// Closed form for the probability of no second visit to the start vertex.
///
/// The expression is evaluated exactly as derived. It is not confined to
/// `[0, 1]`: at `lambda = 0` or small rates it exceeds 1.
pub fn no_return_prob(horizon: u32, k0: u32, lambda: f64) -> f64 {
    check_k0(k0);
    if horizon == 0 {
        return 1.0;
    }
    let top = k0 + horizon - 2;
    with_harmonics(top, |h| {
        let mut total = (-lambda * f64::from(horizon)).exp();
        for i in 0..horizon {
            let base = k0 - 2 + i;
            let weight = 1.0 + 1.0 / f64::from(base);
            let tail = h[top as usize] - h[base as usize];
            total += weight * (-lambda * (f64::from(i) + tail)).exp();
        }
        total
    })
}

/// The same quantity through `P(T, k) = e^{-λ} P(T-1, k+1) + (k-1)/(k-2) e^{-λ(H(k+T-2) - H(k-2))}`,
/// iterated upward from `P(0, k0+T) = 1`.
pub fn no_return_prob_recursive(horizon: u32, k0: u32, lambda: f64) -> f64 {
    check_k0(k0);
    let top = k0 + horizon;
    with_harmonics(top, |h| {
        let stay = (-lambda).exp();
        let mut p = 1.0;
        // after step m, p = P(m, k0 + horizon - m)
        for m in 1..=horizon {
            let k = k0 + horizon - m;
            let ratio = f64::from(k - 1) / f64::from(k - 2);
            let spread = h[(k + m - 2) as usize] - h[(k - 2) as usize];
            p = stay * p + ratio * (-lambda * spread).exp();
        }
        p
    })
}

/// Probability of sitting on a designated vertex after `r` uniform moves on a
/// fixed complete graph of `k0` vertices, starting there with probability `p`.
pub fn step_return_prob(r: u32, p: f64, k0: u32) -> f64 {
    check_k0(k0);
    check_prob(p);
    let k = f64::from(k0);
    let contraction = (1.0 / (k - 1.0)).powi(r.min(i32::MAX as u32) as i32);
    let signed = if r.is_multiple_of(2) { contraction } else { -contraction };
    1.0 / k - (1.0 - p * k) / k * signed
}

/// Probability of sitting on the designated vertex after one unit interval on
/// a fixed graph of `k0` vertices.
pub fn unit_time_at_v(p: f64, k0: u32, lambda: f64) -> f64 {
    check_k0(k0);
    check_prob(p);
    let k = f64::from(k0);
    1.0 / k - (1.0 - p * k) / k * (-lambda * k / (k - 1.0)).exp()
}

/// `-λ (k0+i-1)/(k0+i-2)`: log of the chance to keep the interval-`i` excess
/// over the uniform distribution.
fn interval_log_decay(i: u32, k0: u32, lambda: f64) -> f64 {
    let n = f64::from(k0 + i - 1);
    -lambda * n / (n - 1.0)
}

/// Probability that the walker is on the start vertex at integer time `T`,
/// from the product/sum closed form.
///
/// With `D_j = Π_{i<=j} e^{-λ(k0+i-1)/(k0+i-2)}` the closed form is
/// `D_T (1 + Σ_j (1 - e_j) / ((k0+j-1) D_j))`. The leading product is moved
/// inside the sum and evaluated through suffix sums of logarithms so that
/// nothing underflows for long horizons.
pub fn at_start_prob(horizon: u32, k0: u32, lambda: f64) -> f64 {
    check_k0(k0);
    let mut suffix: f64 = 0.0;
    let mut total = 0.0;
    for j in (1..=horizon).rev() {
        let decay = interval_log_decay(j, k0, lambda);
        total += -decay.exp_m1() / f64::from(k0 + j - 1) * suffix.exp();
        suffix += decay;
    }
    suffix.exp() + total
}

/// `Q(0..=T)` through `Q(t) = Q(t-1) e_t + (1 - e_t)/(k0+t-1)` from `Q(0) = 1`.
pub fn at_start_probs(horizon: u32, k0: u32, lambda: f64) -> Vec<f64> {
    check_k0(k0);
    let mut out = Vec::with_capacity(horizon as usize + 1);
    let mut q = 1.0;
    out.push(q);
    for t in 1..=horizon {
        let keep = interval_log_decay(t, k0, lambda).exp();
        q = q * keep + (1.0 - keep) / f64::from(k0 + t - 1);
        out.push(q);
    }
    out
}

pub fn at_start_prob_recursive(horizon: u32, k0: u32, lambda: f64) -> f64 {
    *at_start_probs(horizon, k0, lambda).last().expect("Q(0) always present")
}

/// Expected arrivals at the designated vertex during one unit interval on a
/// fixed graph of `k0` vertices, starting there with probability `p`.
pub fn expected_visits_unit(p: f64, k0: u32, lambda: f64) -> f64 {
    check_k0(k0);
    check_prob(p);
    let k = f64::from(k0);
    lambda / k + (1.0 - p * k) / (k * k) * -(-lambda * k / (k - 1.0)).exp_m1()
}

/// Expected number of returns to the start vertex by time `T`: per-interval
/// expectations with the occupation probabilities `Q(i)` computed once.
pub fn expected_visits(horizon: u32, k0: u32, lambda: f64) -> f64 {
    check_k0(k0);
    let q = at_start_probs(horizon, k0, lambda);
    (0..horizon)
        .map(|i| expected_visits_unit(q[i as usize].clamp(0.0, 1.0), k0 + i, lambda))
        .sum()
}

/// Report keys.
pub mod keys {
    pub const EXPECTED_COVERED: &str = "E[N_T]";
    pub const VARIANCE_COVERED: &str = "Var(N_T)";
    pub const COVERED_RATIO_LIMIT: &str = "E[N_T]/T limit";
    pub const VARIANCE_RATIO_LIMIT: &str = "Var(N_T)/T limit";
    pub const NO_RETURN: &str = "P(T,k0)";
    pub const NO_RETURN_RECURSIVE: &str = "P(T,k0) recursion";
    pub const AT_START: &str = "Q(T,k0)";
    pub const AT_START_RECURSIVE: &str = "Q(T,k0) recursion";
    pub const EXPECTED_VISITS: &str = "E1[T]";
}

/// Evaluated closed forms for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReport {
    pub config: ModelConfig,
    pub values: BTreeMap<String, f64>,
    pub refs: BTreeMap<String, String>,
    /// Entries whose value falls outside the range its name suggests.
    pub flags: Vec<String>,
}

impl AnalyticReport {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    /// Keys holding genuine probabilities, which must lie in `[0, 1]`.
    pub const PROBABILITY_KEYS: [&'static str; 2] = [keys::AT_START, keys::AT_START_RECURSIVE];
}

/// Evaluates every closed form for a validated deterministic-insertion config.
pub fn full_report(config: &ModelConfig) -> Result<AnalyticReport, AnalyticError> {
    let config = config.validate()?;
    if !config.is_deterministic() {
        return Err(AnalyticError::RandomInsertion);
    }
    let (k0, lambda, horizon) = (config.k0, config.lambda, config.horizon);
    let entries: [(&str, f64, &str); 9] = [
        (
            keys::EXPECTED_COVERED,
            expected_covered(horizon, k0, lambda),
            "(k0+T-1) minus the summed probabilities that each vertex stays unvisited",
        ),
        (
            keys::VARIANCE_COVERED,
            variance_covered(horizon, k0, lambda),
            "sum of u_j(1-u_j) over vertices 2..k0+T-1 (independent non-visit events)",
        ),
        (
            keys::COVERED_RATIO_LIMIT,
            expected_covered_asymptote(lambda),
            "lambda/(1+lambda), large-T limit of E[N_T]/T",
        ),
        (
            keys::VARIANCE_RATIO_LIMIT,
            variance_covered_asymptote(lambda),
            "lambda/((lambda+1)(2 lambda+1)), large-T limit of Var(N_T)/T",
        ),
        (
            keys::NO_RETURN,
            no_return_prob(horizon, k0, lambda),
            "closed form for no second visit to v1; not bounded by 1",
        ),
        (
            keys::NO_RETURN_RECURSIVE,
            no_return_prob_recursive(horizon, k0, lambda),
            "first-interval recursion for no second visit to v1",
        ),
        (
            keys::AT_START,
            at_start_prob(horizon, k0, lambda),
            "product/sum closed form for occupying v1 at time T",
        ),
        (
            keys::AT_START_RECURSIVE,
            at_start_prob_recursive(horizon, k0, lambda),
            "one-interval recursion for occupying v1 at time T",
        ),
        (
            keys::EXPECTED_VISITS,
            expected_visits(horizon, k0, lambda),
            "sum over unit intervals of expected arrivals at v1 given Q(i,k0)",
        ),
    ];
    let mut report = AnalyticReport {
        config,
        values: BTreeMap::new(),
        refs: BTreeMap::new(),
        flags: Vec::new(),
    };
    for (key, value, reference) in entries {
        report.values.insert(key.to_owned(), value);
        report.refs.insert(key.to_owned(), reference.to_owned());
    }
    for key in [keys::NO_RETURN, keys::NO_RETURN_RECURSIVE] {
        let value = report.values[key];
        if !(0.0..=1.0).contains(&value) {
            report.flags.push(format!("{key} = {value} lies outside [0, 1]"));
        }
    }
    Ok(report)
}
