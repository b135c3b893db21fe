//! Multi-robot task assignment and path finding on 4-connected grids.
//!
//! The solver runs a two-stage pipeline: simulated annealing over an
//! open-route multi-depot assignment problem (each robot is a depot, each
//! goal a customer, routes are walked once and not closed), followed by a
//! recurrent conflict-based search that plans collision-free paths one
//! task-completion round at a time.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] — maps, cells, instances, scenario I/O, instance generation
//! * [`dist`] — BFS shortest distances and the assignment cost matrix
//! * [`sa`] — routes, greedy construction, threshold-style annealing
//! * [`cbs`] — single-shot conflict-based search on fixed start/goal pairs
//! * [`recurrent`] — the round loop that re-invokes CBS as tasks finish
//! * [`validate`] — solution checking plus small exhaustive oracles
//! * [`solver`] — the end-to-end pipeline with stage timing
//! * [`bench`] — batch benchmark runner and CSV reporting

use std::time::{Duration, Instant};

pub mod bench;
pub mod cbs;
pub mod dist;
pub mod grid;
pub mod recurrent;
pub mod sa;
pub mod solver;
pub mod validate;

pub use grid::{Cell, GridMap, Instance};
pub use sa::RoutePlan;

/// Everything that can go wrong across the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("map parse error: {0}")]
    MapFormat(String),

    #[error("row width mismatch: row {row} has {got} cells, header says {want}")]
    RowWidthMismatch { row: usize, got: usize, want: usize },

    #[error("insufficient free cells: need {need}, map has {have}")]
    InsufficientFreeCells { need: usize, have: usize },

    #[error("goal resampling budget exhausted after {attempts} attempts")]
    RetryBudgetExhausted { attempts: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("cell {0} is blocked or out of bounds")]
    BadCell(Cell),

    #[error("unreachable goal: robot {robot} cannot reach {goal}")]
    UnreachableGoal { robot: usize, goal: Cell },

    #[error("no feasible insertion: goal {goal} is unreachable from every route")]
    UnreachableInsertion { goal: usize },

    #[error("CBS limit exceeded: generated more than {limit} nodes")]
    CbsLimitExceeded { limit: usize },

    #[error("CBS open list exhausted: no conflict-free solution within the search horizon")]
    CbsExhausted,

    #[error("low-level exhausted: robot {robot} has no constraint-respecting path")]
    LowLevelExhausted { robot: usize },

    #[error("time limit exceeded during {phase}")]
    TimeLimit { phase: &'static str },

    #[error("oracle limits exceeded: {0}")]
    OracleLimits(String),

    #[error("malformed solution: {0}")]
    MalformedSolution(String),

    #[error("solution failed validation:\n{0}")]
    ValidationFailed(String),

    #[error("round budget exceeded: {rounds} rounds for {tasks} tasks")]
    RoundBudgetExceeded { rounds: usize, tasks: usize },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Cooperative wall-clock budget. Long loops poll [`Deadline::exceeded`]
/// between iterations; `Deadline::none()` never fires.
#[derive(Clone, Copy, Debug, Default)]
pub struct Deadline(Option<Instant>);

impl Deadline {
    pub fn none() -> Self {
        Deadline(None)
    }

    pub fn after(budget: Duration) -> Self {
        Deadline(Some(Instant::now() + budget))
    }

    pub fn after_secs(secs: f64) -> Self {
        Deadline(Some(Instant::now() + Duration::from_secs_f64(secs)))
    }

    pub fn exceeded(&self) -> bool {
        match self.0 {
            Some(t) => Instant::now() >= t,
            None => false,
        }
    }
}

/// Cap the rayon thread pool from `MRTAPF_THREADS` (parallel builds only).
/// Unset, empty, or unparsable values leave the default pool alone.
pub fn init_threads_from_env() {
    #[cfg(feature = "parallel")]
    {
        if let Ok(v) = std::env::var("MRTAPF_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n >= 1 {
                    // Ignore the error: the global pool may already be built.
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deadline_none_never_fires() {
        assert!(!Deadline::none().exceeded());
    }

    #[test]
    fn deadline_zero_budget_fires_immediately() {
        let d = Deadline::after(Duration::from_secs(0));
        assert!(d.exceeded());
    }

    #[test]
    fn deadline_far_future_does_not_fire() {
        let d = Deadline::after_secs(3600.0);
        assert!(!d.exceeded());
    }
}
