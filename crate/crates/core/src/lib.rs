//! Random walk with Poisson-timed moves on a complete graph that gains a
//! vertex at every integer time (or at Poisson arrival times).
//!
//! [`analytic`] evaluates the closed forms for the number of covered vertices
//! and for returns to the start vertex; [`simulate`] runs the exact
//! discrete-event model; [`stats`] aggregates runs and pairs the two sides.

pub mod analytic;
pub mod model;
pub mod simulate;
pub mod stats;

pub use analytic::{full_report, AnalyticError, AnalyticReport};
pub use model::{
    harmonic, harmonic_bounds, parse_insertion, ConfigError, Event, EventKind, EventLog, Insertion,
    ModelConfig, SimulationSummary, VertexId, START_VERTEX,
};
pub use simulate::{brute_force_step_distribution, moves_in_interval, run_walk, run_walk_traced, RngStream};
pub use stats::{estimate, verify, McEstimate, Outcome, Statistic, StatsError, Tally, Verdict};
