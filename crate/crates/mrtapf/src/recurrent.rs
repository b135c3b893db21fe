//! Recurrent CBS: plan in rounds, one task completion per round.
//!
//! Each round runs CBS from the robots' current cells toward their current
//! goals: the next unvisited goal of their route for working robots, their
//! own current cell for robots that are done. The round's joint plan is cut
//! at the earliest working-robot arrival, everyone executes that slice, the
//! finished robot advances to its next task (or turns done), and the loop
//! repeats. A final all-done round closes the run.
//!
//! Cutting at the earliest arrival keeps every executed prefix of a
//! conflict-free joint plan conflict-free, so concatenating slices yields a
//! sound full-horizon solution.

use crate::cbs::cbs_solve;
use crate::grid::{Cell, Instance};
use crate::sa::RoutePlan;
use crate::{Deadline, Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RobotStatus {
    Working,
    Done,
}

/// Mutable state of the round loop.
///
/// Invariants between rounds:
/// * all `executed[i]` have equal length (the global clock plus one),
/// * `current[i]` is the last cell of `executed[i]` once anything ran,
/// * `status[i] == Done` exactly when robot `i` has no tasks left
///   (`next_task` past the end of its route),
/// * `completed_at[i]` is set for done robots: the global time the robot
///   finished its last task (0 for robots with no tasks).
pub struct RoundState {
    pub current: Vec<Cell>,
    /// 1-based ordinal of the next task in the robot's route;
    /// `route.len() + 1` once the route is exhausted.
    pub next_task: Vec<usize>,
    pub status: Vec<RobotStatus>,
    pub executed: Vec<Vec<Cell>>,
    pub completed_at: Vec<Option<usize>>,
}

impl RoundState {
    fn new(starts: &[Cell]) -> Self {
        let n = starts.len();
        RoundState {
            current: starts.to_vec(),
            next_task: vec![1; n],
            status: vec![RobotStatus::Working; n],
            executed: vec![Vec::new(); n],
            completed_at: vec![None; n],
        }
    }

    /// Global time already executed: length of any executed path minus one,
    /// or zero before the first round commits.
    fn clock(&self) -> usize {
        self.executed[0].len().saturating_sub(1)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RoundOutcome {
    InProgress,
    Finished,
}

/// The assembled output of a run.
#[derive(Clone, Debug)]
pub struct RecurrentSolution {
    /// One padded path per robot, all of equal length.
    pub paths: Vec<Vec<Cell>>,
    /// Arrival time of each robot at the last goal of its route (0 for
    /// robots with no tasks). Trailing idle time waiting for others does
    /// not count.
    pub per_robot_cost: Vec<usize>,
    /// Sum of `per_robot_cost`.
    pub flowtime: usize,
    /// Length of the padded paths minus one.
    pub makespan: usize,
    /// Rounds executed, including the final all-done round.
    pub rounds: usize,
}

/// Run one round against `state`. `Finished` means every robot was already
/// done and the all-done confirmation round ran (robots hold their cells).
pub fn advance_round(
    state: &mut RoundState,
    instance: &Instance,
    plan: &RoutePlan,
    node_limit: usize,
    deadline: Deadline,
) -> Result<RoundOutcome> {
    let n = instance.num_robots();
    let mut temp_goals = vec![Cell::new(0, 0); n];
    for i in 0..n {
        let route = &plan.routes[i];
        if state.next_task[i] > route.len() {
            state.status[i] = RobotStatus::Done;
            // Robots with no tasks at all complete at time zero.
            if state.completed_at[i].is_none() {
                debug_assert!(route.is_empty());
                state.completed_at[i] = Some(0);
            }
            temp_goals[i] = state.current[i];
        } else {
            state.status[i] = RobotStatus::Working;
            temp_goals[i] = instance.goals[plan.routes[i][state.next_task[i] - 1]];
        }
    }

    let paths = cbs_solve(&instance.map, &state.current, &temp_goals, node_limit, deadline)?;
    for (i, p) in paths.iter().enumerate() {
        debug_assert_eq!(p.cells[0], state.current[i]);
        debug_assert_eq!(*p.cells.last().unwrap(), temp_goals[i]);
    }

    if state.status.iter().all(|&s| s == RobotStatus::Done) {
        // All-done round: every query is start == goal, so every path is a
        // single parked cell. Commit the trivial slice and stop.
        for (i, p) in paths.iter().enumerate() {
            debug_assert_eq!(p.cost(), 0);
            if state.executed[i].is_empty() {
                state.executed[i].push(p.cells[0]);
            }
        }
        return Ok(RoundOutcome::Finished);
    }

    // Cut at the earliest working arrival; ties go to the lowest robot
    // index. Done robots may have been pushed on longer dodges; the slice
    // truncates them mid-dodge and the next round replans from wherever
    // they stand.
    let (fastest, cut) = paths
        .iter()
        .enumerate()
        .filter(|(i, _)| state.status[*i] == RobotStatus::Working)
        .map(|(i, p)| (i, p.cost()))
        .min_by_key(|&(i, c)| (c, i))
        .expect("at least one working robot in a non-final round");

    for (i, p) in paths.iter().enumerate() {
        let first_round = state.executed[i].is_empty();
        let from = if first_round { 0 } else { 1 };
        for t in from..=cut {
            state.executed[i].push(p.at(t));
        }
        state.current[i] = *state.executed[i].last().unwrap();
    }
    debug_assert!(
        state.executed.iter().all(|e| e.len() == state.executed[0].len()),
        "executed paths must stay aligned to one global clock"
    );

    let route_len = plan.routes[fastest].len();
    debug_assert_eq!(state.current[fastest], temp_goals[fastest]);
    if state.next_task[fastest] < route_len {
        state.next_task[fastest] += 1;
    } else {
        state.next_task[fastest] = route_len + 1;
        state.status[fastest] = RobotStatus::Done;
        state.completed_at[fastest] = Some(state.clock());
    }
    Ok(RoundOutcome::InProgress)
}

/// Execute the full round loop for `plan` on `instance`.
///
/// Every non-final round completes exactly one task, so the loop runs at
/// most `m + 1` rounds; exceeding that budget means the round mechanics
/// are broken and is reported as an error rather than looped past.
pub fn solve_recurrent(
    instance: &Instance,
    plan: &RoutePlan,
    node_limit: usize,
    deadline: Deadline,
) -> Result<RecurrentSolution> {
    plan.check(instance.num_robots(), instance.num_goals())?;
    instance.check()?;

    let m = instance.num_goals();
    let mut state = RoundState::new(&instance.starts);
    let mut rounds = 0usize;
    loop {
        if rounds > m + 1 {
            return Err(Error::RoundBudgetExceeded { rounds, tasks: m });
        }
        rounds += 1;
        match advance_round(&mut state, instance, plan, node_limit, deadline)? {
            RoundOutcome::Finished => break,
            RoundOutcome::InProgress => {}
        }
    }

    let per_robot_cost: Vec<usize> = state
        .completed_at
        .iter()
        .map(|c| c.expect("every robot is done when the loop finishes"))
        .collect();
    let flowtime = per_robot_cost.iter().sum();
    let makespan = state.clock();
    Ok(RecurrentSolution {
        paths: state.executed,
        per_robot_cost,
        flowtime,
        makespan,
        rounds,
    })
}
