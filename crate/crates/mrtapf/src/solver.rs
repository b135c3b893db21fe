//! End-to-end pipeline: cost matrix -> greedy seed -> annealing -> round
//! loop -> validation, with wall-clock accounting per stage.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dist::build_cost_matrix;
use crate::grid::{Cell, Instance};
use crate::recurrent::{solve_recurrent, RecurrentSolution};
use crate::sa::{greedy_insertion, simulated_annealing, SaParams, RoutePlan};
use crate::validate::validate;
use crate::{Deadline, Error, Result};

/// Default cap on CBS constraint-tree nodes per round.
pub const DEFAULT_NODE_LIMIT: usize = 100_000;

#[derive(Clone, Copy, Debug)]
pub struct SolveParams {
    pub sa: SaParams,
    pub node_limit: usize,
    /// Overall wall-clock budget in seconds; `None` means unlimited.
    pub time_limit: Option<f64>,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams { sa: SaParams::default(), node_limit: DEFAULT_NODE_LIMIT, time_limit: None }
    }
}

/// A solved instance: the assignment, the executed paths, and timings.
#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub solution: RecurrentSolution,
    pub plan: RoutePlan,
    /// Route cost of `plan` under the distance matrix (the annealer's
    /// objective, not the executed flowtime).
    pub plan_cost: f64,
    /// Assignment stage: cost matrix, greedy seed, annealing.
    pub sa_seconds: f64,
    /// Path-finding stage: the full round loop.
    pub recbs_seconds: f64,
}

/// Run the whole pipeline on one instance. The output is validated before
/// being returned; a validation failure is a solver bug surfaced as an
/// error, never silently returned.
pub fn solve_instance(instance: &Instance, params: &SolveParams) -> Result<SolveOutput> {
    instance.check()?;
    let deadline = match params.time_limit {
        Some(secs) => Deadline::after_secs(secs),
        None => Deadline::none(),
    };

    let t0 = Instant::now();
    let matrix = build_cost_matrix(instance)?;
    let seed_plan = greedy_insertion(&matrix)?;
    let annealed = simulated_annealing(&seed_plan, &matrix, &params.sa, deadline)?;
    let sa_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let solution = solve_recurrent(instance, &annealed.best, params.node_limit, deadline)?;
    let recbs_seconds = t1.elapsed().as_secs_f64();

    let report = validate(instance, &solution, &annealed.best)?;
    if !report.ok() {
        return Err(Error::ValidationFailed(report.to_string()));
    }

    Ok(SolveOutput {
        solution,
        plan: annealed.best,
        plan_cost: annealed.best_cost,
        sa_seconds,
        recbs_seconds,
    })
}

/// The on-disk solution format. Timing fields hold zero when a run is
/// asked for byte-reproducible output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionFile {
    pub flowtime: usize,
    pub per_robot_cost: Vec<usize>,
    pub rounds: usize,
    pub makespan: usize,
    pub assignment: AssignmentDump,
    pub paths: Vec<Vec<Cell>>,
    pub sa_seconds: f64,
    pub recbs_seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssignmentDump {
    pub routes: Vec<Vec<usize>>,
    /// Route cost under the distance matrix.
    pub cost: f64,
}

impl SolutionFile {
    /// `keep_timing: false` zeroes the stage timings so identical runs
    /// serialize to identical bytes.
    pub fn from_output(out: &SolveOutput, keep_timing: bool) -> Self {
        SolutionFile {
            flowtime: out.solution.flowtime,
            per_robot_cost: out.solution.per_robot_cost.clone(),
            rounds: out.solution.rounds,
            makespan: out.solution.makespan,
            assignment: AssignmentDump {
                routes: out.plan.routes.clone(),
                cost: out.plan_cost,
            },
            paths: out.solution.paths.clone(),
            sa_seconds: if keep_timing { out.sa_seconds } else { 0.0 },
            recbs_seconds: if keep_timing { out.recbs_seconds } else { 0.0 },
        }
    }

    /// Split back into the pieces [`validate`] wants.
    pub fn to_parts(&self) -> (RecurrentSolution, RoutePlan) {
        (
            RecurrentSolution {
                paths: self.paths.clone(),
                per_robot_cost: self.per_robot_cost.clone(),
                flowtime: self.flowtime,
                makespan: self.makespan,
                rounds: self.rounds,
            },
            RoutePlan { routes: self.assignment.routes.clone() },
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
