//! Discrete-event simulation of the walk.
//!
//! Moves arrive as a Poisson process of rate `lambda` on `[0, T)`; each move
//! jumps to a vertex chosen uniformly among the other current vertices.
//! Vertices are inserted at `1, 2, ..., T` or at the arrival times of an
//! independent Poisson process of rate `beta` on `(0, T]`. When a move and an
//! insertion share a timestamp the insertion is processed first.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::model::{
    Event, EventKind, EventLog, Insertion, ModelConfig, SimulationSummary, VertexId, START_VERTEX,
};

/// Deterministic random stream for one run: the master seed picks the key
/// and the run index picks the ChaCha stream, so a run's draws do not depend
/// on which other runs were executed or in what order.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn new(seed: u64, run_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run_index);
        RngStream(rng)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.0
    }
}

/// Mutable state of the walker and the growing vertex set.
#[derive(Debug, Clone)]
pub struct WalkState {
    pub current_vertex: VertexId,
    pub vertex_count: u32,
    pub clock: f64,
    visited: Vec<u64>,
    pub covered: u32,
    pub visits_to_start: u32,
}

impl WalkState {
    pub fn new(k0: u32, capacity: u32) -> Self {
        let words = (capacity.max(k0) as usize + 1).div_ceil(64);
        let mut state = WalkState {
            current_vertex: START_VERTEX,
            vertex_count: k0,
            clock: 0.0,
            visited: vec![0; words],
            covered: 0,
            visits_to_start: 0,
        };
        state.mark(START_VERTEX);
        state
    }

    pub fn is_visited(&self, v: VertexId) -> bool {
        let (word, bit) = (v as usize / 64, v % 64);
        self.visited.get(word).is_some_and(|w| w & (1 << bit) != 0)
    }

    /// Returns true when `v` had not been visited before.
    fn mark(&mut self, v: VertexId) -> bool {
        let (word, bit) = (v as usize / 64, v % 64);
        if word >= self.visited.len() {
            self.visited.resize(word + 1, 0);
        }
        let fresh = self.visited[word] & (1 << bit) == 0;
        self.visited[word] |= 1 << bit;
        if fresh {
            self.covered += 1;
        }
        fresh
    }

    fn insert(&mut self) -> VertexId {
        self.vertex_count += 1;
        self.vertex_count
    }

    /// Uniform jump to one of the other `vertex_count - 1` vertices.
    fn jump<R: Rng>(&mut self, rng: &mut R) -> (VertexId, VertexId, bool) {
        let from = self.current_vertex;
        let mut to = rng.gen_range(1..self.vertex_count);
        if to >= from {
            to += 1;
        }
        self.current_vertex = to;
        if to == START_VERTEX {
            self.visits_to_start += 1;
        }
        let fresh = self.mark(to);
        (from, to, fresh)
    }
}

struct Recorder {
    log: EventLog,
    first_visits: BTreeMap<VertexId, f64>,
}

fn walk(config: &ModelConfig, run_index: u64, mut trace: Option<&mut Recorder>) -> SimulationSummary {
    let mut stream = RngStream::new(config.seed, run_index);
    let rng = stream.rng();
    let horizon = f64::from(config.horizon);
    let capacity = match config.insertion {
        Insertion::Deterministic => config.k0 + config.horizon,
        Insertion::Poisson(_) => config.k0,
    };
    let mut state = WalkState::new(config.k0, capacity);

    let moves = (config.lambda > 0.0).then(|| Exp::new(config.lambda).expect("validated rate"));
    let arrivals = match config.insertion {
        Insertion::Poisson(beta) => Some(Exp::new(beta).expect("validated rate")),
        Insertion::Deterministic => None,
    };
    let mut next_move = moves.map_or(f64::INFINITY, |d| d.sample(rng));
    let mut next_insert = match arrivals {
        Some(d) => d.sample(rng),
        None => 1.0,
    };

    loop {
        if next_insert <= horizon && next_insert <= next_move {
            state.clock = next_insert;
            let vertex = state.insert();
            if let Some(rec) = trace.as_deref_mut() {
                rec.log.events.push(Event {
                    time: next_insert,
                    kind: EventKind::Insert { vertex },
                });
            }
            next_insert = match arrivals {
                Some(d) => next_insert + d.sample(rng),
                None => next_insert + 1.0,
            };
        } else if next_move < horizon {
            state.clock = next_move;
            let (from, to, fresh) = state.jump(rng);
            if let Some(rec) = trace.as_deref_mut() {
                rec.log.events.push(Event {
                    time: next_move,
                    kind: EventKind::Move { from, to },
                });
                if fresh {
                    rec.first_visits.insert(to, next_move);
                }
            }
            next_move += moves.expect("moves only scheduled with a positive rate").sample(rng);
        } else {
            break;
        }
    }
    state.clock = horizon;

    SimulationSummary {
        covered: state.covered,
        visits_to_start: state.visits_to_start,
        at_start_at_t: state.current_vertex == START_VERTEX,
        no_second_visit: state.visits_to_start == 0,
        final_vertex_count: state.vertex_count,
        first_visit_time: None,
    }
}

/// Simulates one realization on `[0, T]` and returns its summary.
pub fn run_walk(config: &ModelConfig, run_index: u64) -> SimulationSummary {
    walk(config, run_index, None)
}

/// Like [`run_walk`], also returning the event log and first-visit times.
/// The summary is identical to the untraced one for the same run.
pub fn run_walk_traced(config: &ModelConfig, run_index: u64) -> (SimulationSummary, EventLog) {
    let mut first_visits = BTreeMap::new();
    first_visits.insert(START_VERTEX, 0.0);
    let mut recorder = Recorder {
        log: EventLog::new(config),
        first_visits,
    };
    let mut summary = walk(config, run_index, Some(&mut recorder));
    summary.first_visit_time = Some(recorder.first_visits);
    (summary, recorder.log)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntervalError {
    #[error("interval {t} outside 1..={horizon}")]
    OutOfRange { t: u32, horizon: u32 },
    #[error("unit intervals are only defined for deterministic insertion")]
    RandomInsertion,
}

/// Number of moves with time in `[t-1, t)`.
pub fn moves_in_interval(log: &EventLog, t: u32) -> Result<u32, IntervalError> {
    if !log.deterministic {
        return Err(IntervalError::RandomInsertion);
    }
    if t == 0 || t > log.horizon {
        return Err(IntervalError::OutOfRange {
            t,
            horizon: log.horizon,
        });
    }
    let (lo, hi) = (f64::from(t - 1), f64::from(t));
    Ok(log.moves().filter(|&(time, _, _)| lo <= time && time < hi).count() as u32)
}

/// Applies the uniform-move kernel of a fixed complete graph `r` times.
pub fn brute_force_step_distribution(p0: &[f64], r: u32) -> Vec<f64> {
    let k = p0.len();
    assert!(k >= 2, "need at least two vertices");
    let share = 1.0 / (k - 1) as f64;
    let mut p = p0.to_vec();
    let mut next = vec![0.0; k];
    for _ in 0..r {
        for (v, slot) in next.iter_mut().enumerate() {
            *slot = p
                .iter()
                .enumerate()
                .filter(|&(u, _)| u != v)
                .map(|(_, &mass)| mass * share)
                .sum();
        }
        std::mem::swap(&mut p, &mut next);
    }
    p
}
