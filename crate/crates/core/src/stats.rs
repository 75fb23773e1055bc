//! Monte Carlo aggregation and the statistical checks that pair simulated
//! runs with the closed forms.
//!
//! Every per-run statistic is a non-negative integer, so runs are aggregated
//! into exact histograms. Merging histograms is exact, which makes every
//! estimate independent of thread count and of how runs are partitioned.

use std::collections::BTreeMap;
use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

use crate::analytic::{self, AnalyticError};
use crate::model::{ModelConfig, SimulationSummary};
use crate::simulate::{moves_in_interval, run_walk, run_walk_traced};

/// Two-sided acceptance threshold on `|z|`.
pub const Z_THRESHOLD: f64 = 4.0;
/// Critical normal quantile for the 95% interval.
pub const Z_95: f64 = 1.96;
/// Maximum KS distance accepted by [`clt_check`].
pub const KS_THRESHOLD: f64 = 0.02;
/// Significance level of the Poisson goodness-of-fit test.
pub const CHI_SQUARE_ALPHA: f64 = 1e-3;
/// Largest acceptable cross-interval correlation of move counts.
pub const CORRELATION_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("degenerate variance: Var(N_T) = 0, nothing to standardize")]
    DegenerateVariance,
    #[error("need at least {needed} runs, got {got}")]
    TooFewRuns { needed: u64, got: u64 },
    #[error("this check requires deterministic insertion")]
    RandomInsertion,
    #[error("horizon grid must be increasing and start at 1 or more")]
    BadGrid,
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

/// Monte Carlo estimate of a mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub sample_variance: f64,
    pub stderr: f64,
    pub n_runs: u64,
    pub ci95: (f64, f64),
}

impl McEstimate {
    pub fn new(mean: f64, sample_variance: f64, n_runs: u64) -> Self {
        let sample_variance = sample_variance.max(0.0);
        let stderr = (sample_variance / n_runs as f64).sqrt();
        McEstimate {
            mean,
            sample_variance,
            stderr,
            n_runs,
            ci95: (mean - Z_95 * stderr, mean + Z_95 * stderr),
        }
    }

    pub fn ci_width(&self) -> f64 {
        self.ci95.1 - self.ci95.0
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci95.0 <= value && value <= self.ci95.1
    }
}

/// Exact histogram of an integer-valued per-run statistic.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    counts: BTreeMap<u64, u64>,
}

impl Tally {
    pub fn push(&mut self, value: u64) {
        *self.counts.entry(value).or_insert(0) += 1;
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        for (value, count) in other.counts {
            *self.counts.entry(value).or_insert(0) += count;
        }
        self
    }

    pub fn n(&self) -> u64 {
        self.counts.values().sum()
    }

    /// `(value, count)` pairs in increasing value order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&v, &c)| (v, c))
    }

    /// Exact `(n, Σx, Σx²)`.
    fn power_sums(&self) -> (u128, u128, u128) {
        self.iter().fold((0, 0, 0), |(n, s1, s2), (v, c)| {
            let (v, c) = (u128::from(v), u128::from(c));
            (n + c, s1 + c * v, s2 + c * v * v)
        })
    }

    pub fn mean(&self) -> f64 {
        let (n, s1, _) = self.power_sums();
        s1 as f64 / n as f64
    }

    /// Unbiased sample variance, formed from an exact integer numerator.
    pub fn sample_variance(&self) -> f64 {
        let (n, s1, s2) = self.power_sums();
        if n < 2 {
            return 0.0;
        }
        let numerator = n * s2 - s1 * s1;
        numerator as f64 / (n * (n - 1)) as f64
    }

    pub fn estimate(&self) -> McEstimate {
        McEstimate::new(self.mean(), self.sample_variance(), self.n())
    }

    /// Sample variance with a delete-one jackknife standard error.
    ///
    /// The returned estimate's `mean` is the sample variance and its
    /// `sample_variance` is the variance of the jackknife pseudo-values, so
    /// `stderr` is the jackknife standard error.
    pub fn variance_estimate(&self) -> McEstimate {
        let n = self.n();
        let variance = self.sample_variance();
        if n < 3 {
            return McEstimate::new(variance, 0.0, n.max(1));
        }
        let nf = n as f64;
        let mean = self.mean();
        let m2 = variance * (nf - 1.0);
        let leave_out = |v: u64| {
            let d = v as f64 - mean;
            (m2 - d * d * nf / (nf - 1.0)) / (nf - 2.0)
        };
        let avg = self.iter().map(|(v, c)| c as f64 * leave_out(v)).sum::<f64>() / nf;
        let spread: f64 = self
            .iter()
            .map(|(v, c)| {
                let e = leave_out(v) - avg;
                c as f64 * e * e
            })
            .sum();
        let jack_var = (nf - 1.0) / nf * spread;
        McEstimate::new(variance, jack_var * nf, n)
    }
}

/// Per-run fields that can be estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Covered,
    VisitsToStart,
    AtStartAtT,
    NoSecondVisit,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [
        Statistic::Covered,
        Statistic::VisitsToStart,
        Statistic::AtStartAtT,
        Statistic::NoSecondVisit,
    ];

    pub fn value(self, summary: &SimulationSummary) -> u64 {
        match self {
            Statistic::Covered => u64::from(summary.covered),
            Statistic::VisitsToStart => u64::from(summary.visits_to_start),
            Statistic::AtStartAtT => u64::from(summary.at_start_at_t),
            Statistic::NoSecondVisit => u64::from(summary.no_second_visit),
        }
    }
}

/// Histograms of every statistic over a set of runs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SummaryTally {
    tallies: [Tally; 4],
}

impl SummaryTally {
    pub fn push(&mut self, summary: &SimulationSummary) {
        for (tally, stat) in self.tallies.iter_mut().zip(Statistic::ALL) {
            tally.push(stat.value(summary));
        }
    }

    pub fn merge(self, other: SummaryTally) -> SummaryTally {
        let [a0, a1, a2, a3] = self.tallies;
        let [b0, b1, b2, b3] = other.tallies;
        SummaryTally {
            tallies: [a0.merge(b0), a1.merge(b1), a2.merge(b2), a3.merge(b3)],
        }
    }

    pub fn get(&self, stat: Statistic) -> &Tally {
        let index = Statistic::ALL.iter().position(|&s| s == stat).expect("listed");
        &self.tallies[index]
    }
}

/// Runs `run_indices` through the simulator and tallies every statistic.
pub fn tally_runs(config: &ModelConfig, run_indices: std::ops::Range<u64>) -> SummaryTally {
    run_indices
        .into_par_iter()
        .fold(SummaryTally::default, |mut acc, run| {
            acc.push(&run_walk(config, run));
            acc
        })
        .reduce(SummaryTally::default, SummaryTally::merge)
}

fn require_runs(n_runs: u64, needed: u64) -> Result<(), StatsError> {
    if n_runs < needed {
        return Err(StatsError::TooFewRuns { needed, got: n_runs });
    }
    Ok(())
}

/// Estimates one statistic over runs `0..n_runs`.
pub fn estimate(config: &ModelConfig, statistic: Statistic, n_runs: u64) -> Result<McEstimate, StatsError> {
    require_runs(n_runs, 2)?;
    Ok(tally_runs(config, 0..n_runs).get(statistic).estimate())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    /// Reported only; the pairing of model event and formula is not exact.
    Info,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Info => "info",
        }
    }
}

/// One analytic value paired with its Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub quantity: String,
    pub analytic: f64,
    pub estimate: McEstimate,
    pub z_score: f64,
    pub outcome: Outcome,
}

impl Verdict {
    pub fn new(quantity: &str, analytic: f64, estimate: McEstimate, informational: bool) -> Self {
        let z_score = z_score(estimate.mean, analytic, estimate.stderr);
        let outcome = if informational {
            Outcome::Info
        } else if z_score.abs() <= Z_THRESHOLD {
            Outcome::Pass
        } else {
            Outcome::Fail
        };
        Verdict {
            quantity: quantity.to_owned(),
            analytic,
            estimate,
            z_score,
            outcome,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome != Outcome::Fail
    }
}

/// `(observed - expected) / stderr`, with 0 for an exact match and ±∞ when
/// a zero-error estimate disagrees.
pub fn z_score(observed: f64, expected: f64, stderr: f64) -> f64 {
    let gap = observed - expected;
    if stderr > 0.0 {
        gap / stderr
    } else if gap == 0.0 {
        0.0
    } else {
        gap.signum() * f64::INFINITY
    }
}

/// Pairs each closed form with its simulated counterpart over runs `0..n_runs`.
pub fn verify(config: &ModelConfig, n_runs: u64) -> Result<Vec<Verdict>, StatsError> {
    require_runs(n_runs, 3)?;
    let report = analytic::full_report(config)?;
    let tally = tally_runs(config, 0..n_runs);
    let value = |key: &str| report.get(key).expect("report holds every key");
    use analytic::keys;
    Ok(vec![
        Verdict::new(
            keys::EXPECTED_COVERED,
            value(keys::EXPECTED_COVERED),
            tally.get(Statistic::Covered).estimate(),
            false,
        ),
        Verdict::new(
            keys::VARIANCE_COVERED,
            value(keys::VARIANCE_COVERED),
            tally.get(Statistic::Covered).variance_estimate(),
            false,
        ),
        Verdict::new(
            keys::AT_START,
            value(keys::AT_START),
            tally.get(Statistic::AtStartAtT).estimate(),
            false,
        ),
        Verdict::new(
            keys::EXPECTED_VISITS,
            value(keys::EXPECTED_VISITS),
            tally.get(Statistic::VisitsToStart).estimate(),
            false,
        ),
        Verdict::new(
            keys::NO_RETURN,
            value(keys::NO_RETURN),
            tally.get(Statistic::NoSecondVisit).estimate(),
            true,
        ),
    ])
}

/// Writes `quantity,analytic,mc_mean,stderr,z,pass`.
pub fn write_verdicts_csv<W: io::Write>(verdicts: &[Verdict], out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["quantity", "analytic", "mc_mean", "stderr", "z", "pass"])?;
    for v in verdicts {
        writer.write_record([
            v.quantity.clone(),
            v.analytic.to_string(),
            v.estimate.mean.to_string(),
            v.estimate.stderr.to_string(),
            v.z_score.to_string(),
            v.outcome.as_str().to_owned(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlnPoint {
    pub horizon: u32,
    /// Monte Carlo mean of `N_T / T`.
    pub ratio: f64,
    pub stderr: f64,
    pub limit: f64,
}

/// Mean of `N_T / T` over `n_runs` runs for each horizon in the grid.
pub fn lln_trace(
    k0: u32,
    lambda: f64,
    horizons: &[u32],
    n_runs: u64,
    seed: u64,
) -> Result<Vec<LlnPoint>, StatsError> {
    require_runs(n_runs, 2)?;
    if horizons.first().is_none_or(|&t| t == 0) || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(StatsError::BadGrid);
    }
    horizons
        .iter()
        .map(|&horizon| {
            let config = ModelConfig::new(k0, lambda, horizon)
                .with_seed(seed)
                .validate()
                .map_err(AnalyticError::from)?;
            let est = tally_runs(&config, 0..n_runs).get(Statistic::Covered).estimate();
            let t = f64::from(horizon);
            Ok(LlnPoint {
                horizon,
                ratio: est.mean / t,
                stderr: est.stderr / t,
                limit: analytic::expected_covered_asymptote(lambda),
            })
        })
        .collect()
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Kolmogorov–Smirnov distance between the empirical law of the histogram,
/// mapped through `standardize`, and the standard normal.
pub fn ks_distance_normal(tally: &Tally, standardize: impl Fn(f64) -> f64) -> f64 {
    let normal = standard_normal();
    let n = tally.n() as f64;
    let mut below = 0u64;
    let mut distance: f64 = 0.0;
    for (value, count) in tally.iter() {
        let reference = normal.cdf(standardize(value as f64));
        let before = below as f64 / n;
        below += count;
        let after = below as f64 / n;
        distance = distance.max((reference - before).abs()).max((after - reference).abs());
    }
    distance
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub ks_distance: f64,
    pub pass: bool,
    pub n_runs: u64,
    pub mean: f64,
    pub std_dev: f64,
    /// Half the largest empirical atom: no continuous reference law can come
    /// closer than this to the empirical distribution of an integer statistic.
    pub lattice_floor: f64,
}

/// Standardizes `N_T` with its exact mean and standard deviation and measures
/// the KS distance to the standard normal.
pub fn clt_check(config: &ModelConfig, n_runs: u64) -> Result<CltReport, StatsError> {
    let report = analytic::full_report(config)?;
    let mean = report.get(analytic::keys::EXPECTED_COVERED).expect("present");
    let variance = report.get(analytic::keys::VARIANCE_COVERED).expect("present");
    if variance.is_nan() || variance <= 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    require_runs(n_runs, 2)?;
    let std_dev = variance.sqrt();
    let tally = tally_runs(config, 0..n_runs);
    let covered = tally.get(Statistic::Covered);
    let ks_distance = ks_distance_normal(covered, |x| (x - mean) / std_dev);
    let largest_atom = covered.iter().map(|(_, c)| c).max().unwrap_or(0);
    Ok(CltReport {
        ks_distance,
        pass: ks_distance < KS_THRESHOLD,
        n_runs,
        mean,
        std_dev,
        lattice_floor: largest_atom as f64 / n_runs as f64 / 2.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AzumaPoint {
    pub t: f64,
    pub empirical_tail: f64,
    /// Binomial standard error of the empirical tail frequency.
    pub stderr: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Empirical `P(|N_T - E[N_T]| >= t)` against the bounded-difference bound.
///
/// The centre is the exact mean for deterministic insertion and the sample
/// mean otherwise.
pub fn azuma_check(config: &ModelConfig, n_runs: u64, t_grid: &[f64]) -> Result<Vec<AzumaPoint>, StatsError> {
    require_runs(n_runs, 2)?;
    let config = config.validate().map_err(AnalyticError::from)?;
    let tally = tally_runs(&config, 0..n_runs);
    let covered = tally.get(Statistic::Covered);
    let centre = if config.is_deterministic() {
        analytic::expected_covered(config.horizon, config.k0, config.lambda)
    } else {
        covered.mean()
    };
    let n = n_runs as f64;
    Ok(t_grid
        .iter()
        .map(|&t| {
            assert!(t >= 0.0, "deviation must be non-negative");
            let hits: u64 = covered
                .iter()
                .filter(|&(v, _)| (v as f64 - centre).abs() >= t)
                .map(|(_, c)| c)
                .sum();
            let freq = hits as f64 / n;
            let stderr = (freq * (1.0 - freq) / n).sqrt();
            let bound = analytic::azuma_tail_bound(t, config.horizon, config.k0);
            AzumaPoint {
                t,
                empirical_tail: freq,
                stderr,
                bound,
                pass: freq <= bound + 3.0 * stderr,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareFit {
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
    pub pass: bool,
}

fn poisson_pmf(lambda: f64, m: u32) -> f64 {
    if lambda == 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    let log = -lambda + f64::from(m) * lambda.ln() - statrs::function::gamma::ln_gamma(f64::from(m) + 1.0);
    log.exp()
}

/// Pearson χ² goodness of fit of `counts` to Poisson(`lambda`).
///
/// Cells `0, 1, ..., m` keep an expected count of at least 5; everything above
/// is pooled into one tail cell.
pub fn chi_square_poisson(counts: &[u32], lambda: f64) -> ChiSquareFit {
    let n = counts.len() as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut m = 0u32;
    let mut mass_used = 0.0;
    loop {
        let p = poisson_pmf(lambda, m);
        let tail = 1.0 - mass_used - p;
        if n * p < 5.0 || n * tail < 5.0 {
            break;
        }
        let observed = counts.iter().filter(|&&c| c == m).count() as f64;
        cells.push((observed, n * p));
        mass_used += p;
        m += 1;
    }
    let observed_tail = counts.iter().filter(|&&c| c >= m).count() as f64;
    cells.push((observed_tail, n * (1.0 - mass_used)));

    let statistic: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len().saturating_sub(1) as u32;
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(f64::from(dof)).expect("positive dof").cdf(statistic)
    };
    ChiSquareFit {
        statistic,
        dof,
        p_value,
        pass: p_value >= CHI_SQUARE_ALPHA,
    }
}

/// Pearson sample correlation; 0 when either side is constant.
pub fn correlation(a: &[u32], b: &[u32]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let mean_a = a.iter().map(|&x| f64::from(x)).sum::<f64>() / n;
    let mean_b = b.iter().map(|&x| f64::from(x)).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (f64::from(x) - mean_a, f64::from(y) - mean_b);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalCorrelation {
    pub first: u32,
    pub second: u32,
    pub rho: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonStructure {
    /// Goodness of fit for intervals `1..=T`, in order.
    pub fits: Vec<ChiSquareFit>,
    /// Correlation of every pair of distinct intervals.
    pub correlations: Vec<IntervalCorrelation>,
}

impl PoissonStructure {
    pub fn pass(&self) -> bool {
        self.fits.iter().all(|f| f.pass) && self.correlations.iter().all(|c| c.pass)
    }
}

/// Per-interval move counts of runs `0..n_runs`; `result[t-1][run]`.
pub fn interval_move_counts(config: &ModelConfig, n_runs: u64) -> Result<Vec<Vec<u32>>, StatsError> {
    if !config.is_deterministic() {
        return Err(StatsError::RandomInsertion);
    }
    let per_run: Vec<Vec<u32>> = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let (_, log) = run_walk_traced(config, run);
            (1..=config.horizon)
                .map(|t| moves_in_interval(&log, t).expect("t within horizon"))
                .collect()
        })
        .collect();
    Ok((0..config.horizon as usize)
        .map(|t| per_run.iter().map(|row| row[t]).collect())
        .collect())
}

/// χ² fit of every unit interval to Poisson(λ) and pairwise correlations.
pub fn poisson_structure(config: &ModelConfig, n_runs: u64) -> Result<PoissonStructure, StatsError> {
    require_runs(n_runs, 2)?;
    let counts = interval_move_counts(config, n_runs)?;
    let fits = counts.iter().map(|c| chi_square_poisson(c, config.lambda)).collect();
    let mut correlations = Vec::new();
    for i in 0..counts.len() {
        for j in i + 1..counts.len() {
            let rho = correlation(&counts[i], &counts[j]);
            correlations.push(IntervalCorrelation {
                first: i as u32 + 1,
                second: j as u32 + 1,
                rho,
                pass: rho.abs() < CORRELATION_LIMIT,
            });
        }
    }
    Ok(PoissonStructure { fits, correlations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tally_of(values: &[u64]) -> Tally {
        let mut t = Tally::default();
        values.iter().for_each(|&v| t.push(v));
        t
    }

    #[test]
    fn tally_moments_match_direct_formulas() {
        let values = [3u64, 7, 7, 1, 0, 12, 5, 5, 5];
        let t = tally_of(&values);
        let n = values.len() as f64;
        let mean = values.iter().sum::<u64>() as f64 / n;
        let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert_relative_eq!(t.mean(), mean, max_relative = 1e-15);
        assert_relative_eq!(t.sample_variance(), var, max_relative = 1e-14);
        let est = t.estimate();
        assert_relative_eq!(est.stderr, (var / n).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(est.ci95.1 - est.mean, 1.96 * est.stderr, max_relative = 1e-14);
    }

    #[test]
    fn jackknife_matches_explicit_leave_one_out() {
        let values = [3u64, 7, 7, 1, 0, 12, 5, 5, 5, 2, 9];
        let n = values.len();
        let var_of = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
        };
        let leave: Vec<f64> = (0..n)
            .map(|i| {
                let rest: Vec<f64> = values
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &v)| v as f64)
                    .collect();
                var_of(&rest)
            })
            .collect();
        let avg = leave.iter().sum::<f64>() / n as f64;
        let se = ((n as f64 - 1.0) / n as f64 * leave.iter().map(|v| (v - avg).powi(2)).sum::<f64>()).sqrt();
        let est = tally_of(&values).variance_estimate();
        assert_relative_eq!(est.stderr, se, max_relative = 1e-12);
        let all: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        assert_relative_eq!(est.mean, var_of(&all), max_relative = 1e-14);
    }

    #[test]
    fn constant_sample_has_zero_spread() {
        let t = tally_of(&[4; 100]);
        assert_eq!(t.sample_variance(), 0.0);
        let v = t.variance_estimate();
        assert_eq!((v.mean, v.stderr), (0.0, 0.0));
        assert_eq!(z_score(0.0, 0.0, 0.0), 0.0);
        assert_eq!(z_score(1.0, 0.0, 0.0), f64::INFINITY);
    }

    #[test]
    fn frozen_walker_estimates_are_exact() {
        let cfg = ModelConfig::new(3, 0.0, 10);
        let est = estimate(&cfg, Statistic::Covered, 100).unwrap();
        assert_eq!((est.mean, est.sample_variance), (1.0, 0.0));
        for v in verify(&cfg, 100).unwrap() {
            if v.outcome != Outcome::Info {
                assert_eq!(v.analytic, v.estimate.mean, "{}", v.quantity);
                assert_eq!(v.z_score, 0.0);
                assert_eq!(v.outcome, Outcome::Pass);
            }
        }
        assert!(matches!(estimate(&cfg, Statistic::Covered, 1), Err(StatsError::TooFewRuns { .. })));
    }

    #[test]
    fn clt_refuses_degenerate_variance() {
        let err = clt_check(&ModelConfig::new(3, 0.0, 50), 100).unwrap_err();
        assert_eq!(err, StatsError::DegenerateVariance);
        assert!(err.to_string().contains("degenerate variance"));
    }

    #[test]
    fn ks_distance_of_matching_law_is_small() {
        // a fine lattice approximating a normal with sd 200: lattice floor ~ 0.001
        let normal = standard_normal();
        let mut t = Tally::default();
        let n_cells = 4000u64;
        for v in 0..n_cells {
            let z = (v as f64 - 2000.0) / 200.0;
            let mass = normal.cdf(z + 0.5 / 200.0) - normal.cdf(z - 0.5 / 200.0);
            let count = (mass * 1e6).round() as u64;
            for _ in 0..count {
                t.push(v);
            }
        }
        let d = ks_distance_normal(&t, |x| (x - 2000.0) / 200.0);
        assert!(d < 0.002, "{d}");
        let shifted = ks_distance_normal(&t, |x| (x - 2200.0) / 200.0);
        // sup |Φ(z + 1) - Φ(z)| sits at z = -1/2
        assert_relative_eq!(shifted, 2.0 * normal.cdf(0.5) - 1.0, max_relative = 0.01);
    }

    #[test]
    fn azuma_trivial_points() {
        let cfg = ModelConfig::new(3, 1.0, 20);
        let points = azuma_check(&cfg, 500, &[0.0, 46.0]).unwrap();
        assert_eq!(points[0].bound, 1.0);
        assert_eq!(points[0].empirical_tail, 1.0);
        assert!(points[0].pass);
        assert_eq!(points[1].empirical_tail, 0.0);
    }

    #[test]
    fn chi_square_accepts_exact_poisson_counts() {
        let lambda = 1.3;
        let mut counts = Vec::new();
        for m in 0..20u32 {
            let k = (poisson_pmf(lambda, m) * 100_000.0).round() as usize;
            counts.extend(std::iter::repeat_n(m, k));
        }
        let fit = chi_square_poisson(&counts, lambda);
        assert!(fit.pass && fit.p_value > 0.99, "{fit:?}");
        let shifted: Vec<u32> = counts.iter().map(|&c| c + 1).collect();
        assert!(!chi_square_poisson(&shifted, lambda).pass);
    }

    #[test]
    fn correlation_extremes() {
        let a = [1u32, 2, 3, 4, 5];
        assert_relative_eq!(correlation(&a, &a), 1.0, max_relative = 1e-14);
        let b = [5u32, 4, 3, 2, 1];
        assert_relative_eq!(correlation(&a, &b), -1.0, max_relative = 1e-14);
        assert_eq!(correlation(&a, &[2; 5]), 0.0);
    }

    #[test]
    fn lln_rejects_bad_grid() {
        assert_eq!(lln_trace(3, 1.0, &[0, 10], 10, 0), Err(StatsError::BadGrid));
        assert_eq!(lln_trace(3, 1.0, &[10, 10], 10, 0), Err(StatsError::BadGrid));
        let frozen = lln_trace(3, 0.0, &[1, 4, 10], 10, 0).unwrap();
        for p in frozen {
            assert_eq!(p.ratio, 1.0 / f64::from(p.horizon));
        }
    }
}
