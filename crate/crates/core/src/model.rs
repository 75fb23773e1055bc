//! Domain types shared by the analytic and simulation sides: experiment
//! configuration, event logs, per-run summaries, and harmonic numbers.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 1-based vertex identifier. The walker starts on vertex 1.
pub type VertexId = u32;

/// The starting vertex of every walk.
pub const START_VERTEX: VertexId = 1;

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// How new vertices join the graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Insertion {
    /// One vertex at each integer time `1..=horizon`.
    Deterministic,
    /// Vertices at the arrival times of a Poisson process with the given rate.
    Poisson(f64),
}

impl fmt::Display for Insertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Insertion::Deterministic => f.write_str("deterministic"),
            Insertion::Poisson(beta) => write!(f, "poisson:{beta}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("k0 must be ≥ 3 (got {0})")]
    TooFewVertices(u32),
    #[error("lambda must be a finite non-negative rate (got {0})")]
    InvalidLambda(String),
    #[error("beta must be a finite positive rate (got {0})")]
    InvalidBeta(String),
    #[error("insertion must be `deterministic` or `poisson:<beta>` (got {0:?})")]
    InvalidInsertion(String),
}

/// Full specification of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of vertices present at time 0.
    pub k0: u32,
    /// Move rate of the walker.
    pub lambda: f64,
    /// Number of unit intervals `T`.
    pub horizon: u32,
    pub insertion: Insertion,
    #[serde(default)]
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(k0: u32, lambda: f64, horizon: u32) -> Self {
        ModelConfig {
            k0,
            lambda,
            horizon,
            insertion: Insertion::Deterministic,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_insertion(mut self, insertion: Insertion) -> Self {
        self.insertion = insertion;
        self
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.insertion, Insertion::Deterministic)
    }

    /// Checks every invariant and returns the config unchanged when they hold.
    pub fn validate(self) -> Result<Self, ConfigError> {
        if self.k0 < 3 {
            return Err(ConfigError::TooFewVertices(self.k0));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(ConfigError::InvalidLambda(self.lambda.to_string()));
        }
        if let Insertion::Poisson(beta) = self.insertion {
            if !(beta.is_finite() && beta > 0.0) {
                return Err(ConfigError::InvalidBeta(beta.to_string()));
            }
        }
        Ok(self)
    }
}

/// Parses `deterministic` or `poisson:<beta>`.
pub fn parse_insertion(text: &str) -> Result<Insertion, ConfigError> {
    let trimmed = text.trim();
    if trimmed.eq_ignore_ascii_case("deterministic") {
        return Ok(Insertion::Deterministic);
    }
    if let Some(rate) = trimmed.strip_prefix("poisson:") {
        let beta: f64 = rate
            .trim()
            .parse()
            .map_err(|_| ConfigError::InvalidInsertion(text.to_owned()))?;
        if !(beta.is_finite() && beta > 0.0) {
            return Err(ConfigError::InvalidBeta(rate.trim().to_owned()));
        }
        return Ok(Insertion::Poisson(beta));
    }
    Err(ConfigError::InvalidInsertion(text.to_owned()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EventKind {
    Move { from: VertexId, to: VertexId },
    Insert { vertex: VertexId },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LogError {
    #[error("event {index}: time {time} is not after the previous event")]
    NotIncreasing { index: usize, time: f64 },
    #[error("event {index}: time {time} lies outside [0, {horizon}]")]
    OutOfRange { index: usize, time: f64, horizon: u32 },
    #[error("event {index}: move to vertex {to} but only {present} vertices exist")]
    MissingTarget { index: usize, to: VertexId, present: u32 },
    #[error("event {index}: move from {from} does not start at the walker position {at}")]
    WrongSource { index: usize, from: VertexId, at: VertexId },
    #[error("event {index}: self-move at vertex {vertex}")]
    SelfMove { index: usize, vertex: VertexId },
    #[error("event {index}: inserted vertex {vertex}, expected {expected}")]
    InsertOrder { index: usize, vertex: VertexId, expected: VertexId },
    #[error("event {index}: deterministic insertion of vertex {vertex} at time {time}")]
    InsertTime { index: usize, vertex: VertexId, time: f64 },
    #[error("deterministic log has {got} insertions, expected {expected}")]
    InsertCount { got: u32, expected: u32 },
}

/// Time-ordered record of one realization.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventLog {
    pub k0: u32,
    pub horizon: u32,
    pub deterministic: bool,
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn new(config: &ModelConfig) -> Self {
        EventLog {
            k0: config.k0,
            horizon: config.horizon,
            deterministic: config.is_deterministic(),
            events: Vec::new(),
        }
    }

    pub fn moves(&self) -> impl Iterator<Item = (f64, VertexId, VertexId)> + '_ {
        self.events.iter().filter_map(|e| match e.kind {
            EventKind::Move { from, to } => Some((e.time, from, to)),
            EventKind::Insert { .. } => None,
        })
    }

    /// Replays the log and checks ordering, move legality, and insertion order.
    pub fn check_invariants(&self) -> Result<(), LogError> {
        let mut present = self.k0;
        let mut at = START_VERTEX;
        let mut last = f64::NEG_INFINITY;
        for (index, event) in self.events.iter().enumerate() {
            let time = event.time;
            if time.is_nan() || time <= last {
                return Err(LogError::NotIncreasing { index, time });
            }
            if !(0.0..=f64::from(self.horizon)).contains(&time) {
                return Err(LogError::OutOfRange {
                    index,
                    time,
                    horizon: self.horizon,
                });
            }
            last = time;
            match event.kind {
                EventKind::Move { from, to } => {
                    if from != at {
                        return Err(LogError::WrongSource { index, from, at });
                    }
                    if from == to {
                        return Err(LogError::SelfMove { index, vertex: to });
                    }
                    if to == 0 || to > present {
                        return Err(LogError::MissingTarget { index, to, present });
                    }
                    at = to;
                }
                EventKind::Insert { vertex } => {
                    let expected = present + 1;
                    if vertex != expected {
                        return Err(LogError::InsertOrder {
                            index,
                            vertex,
                            expected,
                        });
                    }
                    if self.deterministic && time != f64::from(vertex - self.k0) {
                        return Err(LogError::InsertTime {
                            index,
                            vertex,
                            time,
                        });
                    }
                    present = vertex;
                }
            }
        }
        if self.deterministic && present != self.k0 + self.horizon {
            return Err(LogError::InsertCount {
                got: present - self.k0,
                expected: self.horizon,
            });
        }
        Ok(())
    }

    /// Writes `time,kind,from,to`; insert rows leave `from` empty and put the new vertex in `to`.
    pub fn write_csv<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "time,kind,from,to")?;
        for event in &self.events {
            match event.kind {
                EventKind::Move { from, to } => writeln!(out, "{},move,{},{}", event.time, from, to)?,
                EventKind::Insert { vertex } => writeln!(out, "{},insert,,{}", event.time, vertex)?,
            }
        }
        Ok(())
    }
}

/// Per-run statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    /// Distinct vertices visited, the start included.
    pub covered: u32,
    /// Moves that landed on the start vertex.
    pub visits_to_start: u32,
    pub at_start_at_t: bool,
    pub no_second_visit: bool,
    pub final_vertex_count: u32,
    /// First arrival time per vertex, recorded only for traced runs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub first_visit_time: Option<BTreeMap<VertexId, f64>>,
}

/// Prefix table of harmonic numbers with the running Kahan compensation.
struct HarmonicCache {
    values: Vec<f64>,
    carry: f64,
}

static HARMONIC: OnceLock<RwLock<HarmonicCache>> = OnceLock::new();

fn harmonic_cache() -> &'static RwLock<HarmonicCache> {
    HARMONIC.get_or_init(|| {
        RwLock::new(HarmonicCache {
            values: vec![0.0],
            carry: 0.0,
        })
    })
}

/// Runs `f` on a slice `h` with `h[i] = H(i)` for every `i <= n`.
///
/// Values are compensated prefix sums taken in ascending order, so `H(i)`
/// does not depend on how large the cache has grown and stays within an ulp
/// or two of the exact sum up to `n = 10^6` and beyond.
pub fn with_harmonics<R>(n: u32, f: impl FnOnce(&[f64]) -> R) -> R {
    let n = n as usize;
    let cache = harmonic_cache();
    {
        let table = cache.read().unwrap_or_else(|e| e.into_inner());
        if table.values.len() > n {
            return f(&table.values[..=n]);
        }
    }
    {
        let mut table = cache.write().unwrap_or_else(|e| e.into_inner());
        let mut sum = *table.values.last().expect("cache holds H(0)");
        let mut carry = table.carry;
        for i in table.values.len()..=n {
            let term = 1.0 / i as f64 - carry;
            let next = sum + term;
            carry = (next - sum) - term;
            sum = next;
            table.values.push(sum);
        }
        table.carry = carry;
    }
    let table = cache.read().unwrap_or_else(|e| e.into_inner());
    f(&table.values[..=n])
}

/// `H(n) = 1 + 1/2 + ... + 1/n`, with `H(0) = 0`.
pub fn harmonic(n: u32) -> f64 {
    with_harmonics(n, |h| h[n as usize])
}

/// Bracket `1/(2(n+1)) + ln n + γ < H(n) < 1/(2n) + ln n + γ`, valid for `n ≥ 1`.
pub fn harmonic_bounds(n: u32) -> (f64, f64) {
    assert!(n >= 1, "harmonic_bounds needs n >= 1");
    let n = f64::from(n);
    let base = n.ln() + EULER_GAMMA;
    (base + 1.0 / (2.0 * (n + 1.0)), base + 1.0 / (2.0 * n))
}
