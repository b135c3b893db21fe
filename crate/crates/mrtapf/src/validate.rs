//! Solution validation and small exhaustive oracles.
//!
//! [`validate`] re-derives every property a solution claims, sharing the
//! conflict predicates with the planner but none of its search code. The
//! oracles ([`mapf_optimal_soc`], [`brute_force_optimum`]) solve tiny
//! instances exactly by joint-state Dijkstra so solver outputs can be
//! compared against ground truth in tests.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use crate::cbs::is_swap;
use crate::dist::CostMatrix;
use crate::grid::{Cell, GridMap, Instance};
use crate::recurrent::RecurrentSolution;
use crate::sa::{route_cost, RoutePlan};
use crate::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ViolationKind {
    /// A path teleports or does not begin at the robot's start.
    Continuity,
    /// A path enters a blocked or out-of-bounds cell.
    Obstacle,
    /// Two robots share a cell at the same time.
    VertexCollision,
    /// Two robots swap cells across one step.
    EdgeCollision,
    /// A route goal is never visited in order, or a recorded arrival is
    /// not a true in-order arrival at the robot's final goal.
    GoalMissed,
    /// A goal index is assigned to more than one route, or to none.
    GoalCoverage,
}

#[derive(Clone, Debug)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

/// Outcome of a validation pass. Structurally sound solutions always get a
/// report; a solution passes when `violations` is empty.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, detail: String) {
        self.violations.push(Violation { kind, detail });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            return write!(f, "OK");
        }
        writeln!(f, "{} violation(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  [{:?}] {}", v.kind, v.detail)?;
        }
        Ok(())
    }
}

/// Check a solution against its instance and plan: paths stay on free
/// cells and move by unit steps, start where the robots start, never
/// collide (vertex or swap), visit each route's goals in order, record
/// true final-goal arrivals, and the plan covers every goal exactly once.
///
/// Structural damage (wrong robot count, ragged or empty paths, totals
/// that do not add up) is an error; everything else lands in the report.
pub fn validate(
    instance: &Instance,
    solution: &RecurrentSolution,
    plan: &RoutePlan,
) -> Result<ValidationReport> {
    let n = instance.num_robots();
    let m = instance.num_goals();
    let paths = &solution.paths;

    if paths.len() != n {
        return Err(Error::MalformedSolution(format!("{} paths for {n} robots", paths.len())));
    }
    if plan.routes.len() != n {
        return Err(Error::MalformedSolution(format!(
            "{} routes for {n} robots",
            plan.routes.len()
        )));
    }
    if solution.per_robot_cost.len() != n {
        return Err(Error::MalformedSolution("per-robot cost length mismatch".into()));
    }
    let horizon = match paths.first() {
        None => return Err(Error::MalformedSolution("no paths".into())),
        Some(p) => p.len(),
    };
    if horizon == 0 {
        return Err(Error::MalformedSolution("empty path".into()));
    }
    if paths.iter().any(|p| p.len() != horizon) {
        return Err(Error::MalformedSolution("paths have unequal lengths".into()));
    }
    if solution.makespan != horizon - 1 {
        return Err(Error::MalformedSolution(format!(
            "makespan {} but paths span {} steps",
            solution.makespan,
            horizon - 1
        )));
    }
    let total: usize = solution.per_robot_cost.iter().sum();
    if solution.flowtime != total {
        return Err(Error::MalformedSolution(format!(
            "flowtime {} but per-robot costs sum to {total}",
            solution.flowtime
        )));
    }
    if let Some((i, &arr)) =
        solution.per_robot_cost.iter().enumerate().find(|&(_, &a)| a >= horizon)
    {
        return Err(Error::MalformedSolution(format!(
            "robot {i} records arrival {arr} beyond the horizon"
        )));
    }
    for route in &plan.routes {
        if let Some(&g) = route.iter().find(|&&g| g >= m) {
            return Err(Error::MalformedSolution(format!("route goal index {g} out of range")));
        }
    }

    let mut report = ValidationReport::default();

    // (a) free cells and unit steps, (b) correct starts.
    for (i, path) in paths.iter().enumerate() {
        if path[0] != instance.starts[i] {
            report.push(
                ViolationKind::Continuity,
                format!("robot {i} starts at {} instead of {}", path[0], instance.starts[i]),
            );
        }
        for (t, &c) in path.iter().enumerate() {
            if !instance.map.is_free(c) {
                report.push(
                    ViolationKind::Obstacle,
                    format!("robot {i} occupies blocked cell {c} at t={t}"),
                );
            }
        }
        for (t, w) in path.windows(2).enumerate() {
            if !w[0].adjacent_or_equal(&w[1]) {
                report.push(
                    ViolationKind::Continuity,
                    format!("robot {i} jumps {} -> {} at t={t}", w[0], w[1]),
                );
            }
        }
    }

    // (c) no vertex or edge collisions anywhere on the shared horizon.
    for t in 0..horizon {
        for i in 0..n {
            for j in (i + 1)..n {
                if paths[i][t] == paths[j][t] {
                    report.push(
                        ViolationKind::VertexCollision,
                        format!("robots {i} and {j} share {} at t={t}", paths[i][t]),
                    );
                }
                if t + 1 < horizon
                    && is_swap(paths[i][t], paths[i][t + 1], paths[j][t], paths[j][t + 1])
                {
                    report.push(
                        ViolationKind::EdgeCollision,
                        format!(
                            "robots {i} and {j} swap {} <-> {} at t={t}",
                            paths[i][t],
                            paths[i][t + 1]
                        ),
                    );
                }
            }
        }
    }

    // (d) in-order goal visits and truthful recorded arrivals.
    for (i, route) in plan.routes.iter().enumerate() {
        let path = &paths[i];
        let arr = solution.per_robot_cost[i];
        let mut cursor = 0usize;
        let mut all_visited = true;
        for &g in route {
            let cell = instance.goals[g];
            match (cursor..horizon).find(|&t| path[t] == cell) {
                Some(t) => cursor = t,
                None => {
                    all_visited = false;
                    report.push(
                        ViolationKind::GoalMissed,
                        format!("robot {i} never visits goal {g} at {cell} in order"),
                    );
                }
            }
        }
        if route.is_empty() {
            if arr != 0 {
                report.push(
                    ViolationKind::GoalMissed,
                    format!("robot {i} has no tasks but records arrival {arr}"),
                );
            }
        } else if all_visited {
            let last = instance.goals[*route.last().unwrap()];
            if path[arr] != last {
                report.push(
                    ViolationKind::GoalMissed,
                    format!("robot {i} records arrival {arr} but stands at {}", path[arr]),
                );
            } else if arr < cursor {
                report.push(
                    ViolationKind::GoalMissed,
                    format!(
                        "robot {i} records arrival {arr} before completing its route (earliest {cursor})"
                    ),
                );
            }
        }
    }

    // (e) every goal assigned exactly once across routes.
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, route) in plan.routes.iter().enumerate() {
        for &g in route {
            owners[g].push(i);
        }
    }
    for (g, who) in owners.iter().enumerate() {
        match who.len() {
            0 => report.push(ViolationKind::GoalCoverage, format!("goal {g} is unassigned")),
            1 => {}
            _ => report.push(
                ViolationKind::GoalCoverage,
                format!("goal {g} is assigned to robots {who:?}"),
            ),
        }
    }

    Ok(report)
}

/// Enumerate every route plan for `robots` robots over `goals` goals
/// (assignment and order both vary), visiting each plan exactly once.
/// Goals are inserted in index order, so each plan has one construction.
pub fn for_each_plan<F: FnMut(&RoutePlan)>(robots: usize, goals: usize, mut f: F) {
    fn rec<F: FnMut(&RoutePlan)>(plan: &mut RoutePlan, g: usize, goals: usize, f: &mut F) {
        if g == goals {
            f(plan);
            return;
        }
        for k in 0..plan.routes.len() {
            for p in 0..=plan.routes[k].len() {
                plan.routes[k].insert(p, g);
                rec(plan, g + 1, goals, f);
                plan.routes[k].remove(p);
            }
        }
    }
    let mut plan = RoutePlan::empty(robots);
    rec(&mut plan, 0, goals, &mut f);
}

/// Exhaustive minimum of [`route_cost`] over every plan; infinity when no
/// plan has finite cost. Exponential — test-scale inputs only.
pub fn optimal_route_cost(c: &CostMatrix) -> f64 {
    let mut best = f64::INFINITY;
    for_each_plan(c.depots(), c.goals(), |p| {
        let cost = route_cost(p, c);
        if cost < best {
            best = cost;
        }
    });
    best
}

const SOC_ORACLE_MAX_ROBOTS: usize = 3;
const SOC_ORACLE_MAX_CELLS: usize = 25;

/// Exact minimal sum of individual costs for a fixed multi-robot query
/// under the same semantics as CBS: a robot's cost is the time after which
/// it stays parked on its goal forever, and parked robots still block
/// their cell. `None` means no collision-free solution exists at all.
///
/// Joint-state Dijkstra over `(positions, parked-set)`: a step costs one
/// per unparked robot, and a robot standing on its goal may park for free.
/// Limited to tiny inputs (at most 3 robots, 25 cells).
pub fn mapf_optimal_soc(map: &GridMap, starts: &[Cell], goals: &[Cell]) -> Result<Option<usize>> {
    let n = starts.len();
    if n != goals.len() {
        return Err(Error::InvalidInstance(format!("{n} starts vs {} goals", goals.len())));
    }
    if n == 0 || n > SOC_ORACLE_MAX_ROBOTS {
        return Err(Error::OracleLimits(format!(
            "soc oracle handles 1..={SOC_ORACLE_MAX_ROBOTS} robots, got {n}"
        )));
    }
    let area = map.area();
    if area > SOC_ORACLE_MAX_CELLS {
        return Err(Error::OracleLimits(format!(
            "soc oracle handles maps up to {SOC_ORACLE_MAX_CELLS} cells, got {area}"
        )));
    }
    for &c in starts.iter().chain(goals.iter()) {
        if !map.is_free(c) {
            return Err(Error::BadCell(c));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if starts[i] == starts[j] {
                return Err(Error::InvalidInstance(format!(
                    "robots {i} and {j} share start {}",
                    starts[i]
                )));
            }
        }
    }

    // State: robot cell indices in base `area`, then the parked bitmask.
    let encode = |pos: &[usize], parked: usize| -> usize {
        let mut s = parked;
        for &p in pos.iter().rev() {
            s = s * area + p;
        }
        s
    };
    let full = (1usize << n) - 1;
    let states = area.pow(n as u32) << n;
    let mut dist = vec![u64::MAX; states];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();

    let start_pos: Vec<usize> = starts.iter().map(|&c| map.cell_index(c)).collect();
    let goal_pos: Vec<usize> = goals.iter().map(|&c| map.cell_index(c)).collect();
    let cell_of: Vec<Cell> = {
        let mut v = Vec::with_capacity(area);
        for y in 0..map.height() {
            for x in 0..map.width() {
                v.push(Cell::new(x, y));
            }
        }
        v
    };

    let s0 = encode(&start_pos, 0);
    dist[s0] = 0;
    heap.push(Reverse((0, s0)));

    let mut moves: Vec<Vec<usize>> = Vec::with_capacity(n);
    while let Some(Reverse((d, s))) = heap.pop() {
        if d > dist[s] {
            continue;
        }
        // Decode.
        let mut rem = s;
        let mut pos = vec![0usize; n];
        for p in pos.iter_mut() {
            *p = rem % area;
            rem /= area;
        }
        let parked = rem;
        if parked == full {
            return Ok(Some(d as usize));
        }

        // Free parking for any robot standing on its goal.
        for i in 0..n {
            if parked & (1 << i) == 0 && pos[i] == goal_pos[i] {
                let s2 = encode(&pos, parked | (1 << i));
                if d < dist[s2] {
                    dist[s2] = d;
                    heap.push(Reverse((d, s2)));
                }
            }
        }

        // Joint moves of all unparked robots; parked robots hold their
        // cell. Cost: one per unparked robot.
        let unparked = (n - parked.count_ones() as usize) as u64;
        moves.clear();
        for i in 0..n {
            let mut opts = vec![pos[i]];
            if parked & (1 << i) == 0 {
                opts.extend(map.free_neighbors(cell_of[pos[i]]).map(|c| map.cell_index(c)));
            }
            moves.push(opts);
        }
        let mut pick = vec![0usize; n];
        'combos: loop {
            let next: Vec<usize> = (0..n).map(|i| moves[i][pick[i]]).collect();
            let mut legal = true;
            'pairs: for i in 0..n {
                for j in (i + 1)..n {
                    if next[i] == next[j]
                        || is_swap(cell_of[pos[i]], cell_of[next[i]], cell_of[pos[j]], cell_of[next[j]])
                    {
                        legal = false;
                        break 'pairs;
                    }
                }
            }
            if legal {
                let nd = d + unparked;
                let s2 = encode(&next, parked);
                if nd < dist[s2] {
                    dist[s2] = nd;
                    heap.push(Reverse((nd, s2)));
                }
            }
            // Odometer.
            for i in 0..=n {
                if i == n {
                    break 'combos;
                }
                pick[i] += 1;
                if pick[i] < moves[i].len() {
                    break;
                }
                pick[i] = 0;
            }
        }
    }
    Ok(None)
}

/// Default limits for [`brute_force_optimum`].
#[derive(Clone, Copy, Debug)]
pub struct BruteForceLimits {
    pub max_robots: usize,
    pub max_goals: usize,
    pub max_cells: usize,
}

impl Default for BruteForceLimits {
    fn default() -> Self {
        BruteForceLimits { max_robots: 2, max_goals: 4, max_cells: 25 }
    }
}

/// A ground-truth optimum: the best achievable flowtime and a plan that
/// achieves it.
#[derive(Clone, Debug)]
pub struct BruteForceBest {
    pub flowtime: usize,
    pub plan: RoutePlan,
}

/// Exact minimal flowtime over *every* plan and *every* collision-free
/// motion, by per-plan joint-state Dijkstra over `(positions, per-robot
/// route progress)`. A robot pays one per step until it first completes
/// its route in order; afterwards it moves freely at no cost. `None`
/// means no plan admits any collision-free completion.
///
/// This accounting credits a robot the first moment its route is done, so
/// the value is a true lower bound on the solver's flowtime.
pub fn brute_force_optimum(
    instance: &Instance,
    limits: BruteForceLimits,
) -> Result<Option<BruteForceBest>> {
    let n = instance.num_robots();
    let m = instance.num_goals();
    let area = instance.map.area();
    if n > limits.max_robots || m > limits.max_goals || area > limits.max_cells {
        return Err(Error::OracleLimits(format!(
            "brute force handles up to {} robots, {} goals, {} cells; got {n}/{m}/{area}",
            limits.max_robots, limits.max_goals, limits.max_cells
        )));
    }
    instance.check()?;

    let mut best: Option<BruteForceBest> = None;
    for_each_plan(n, m, |plan| {
        if let Some(cost) = plan_flowtime(instance, plan) {
            if best.as_ref().is_none_or(|b| cost < b.flowtime) {
                best = Some(BruteForceBest { flowtime: cost, plan: plan.clone() });
            }
        }
    });
    Ok(best)
}

/// Minimal flowtime of one fixed plan, or `None` when the plan admits no
/// collision-free completion.
fn plan_flowtime(instance: &Instance, plan: &RoutePlan) -> Option<usize> {
    let map = &instance.map;
    let n = instance.num_robots();
    let area = map.area();
    let route_len: Vec<usize> = plan.routes.iter().map(|r| r.len()).collect();
    // Cell index of each route stop, per robot.
    let stops: Vec<Vec<usize>> = plan
        .routes
        .iter()
        .map(|r| r.iter().map(|&g| map.cell_index(instance.goals[g])).collect())
        .collect();

    let cell_of: Vec<Cell> = {
        let mut v = Vec::with_capacity(area);
        for y in 0..map.height() {
            for x in 0..map.width() {
                v.push(Cell::new(x, y));
            }
        }
        v
    };

    // Mixed-radix state: positions in base `area`, then per-robot progress
    // in base `route_len[i] + 1`.
    let mut radix = vec![area; n];
    radix.extend(route_len.iter().map(|&l| l + 1));
    let states: usize = radix.iter().product();
    let encode = |pos: &[usize], prog: &[usize]| -> usize {
        let mut s = 0usize;
        for i in (0..n).rev() {
            s = s * (route_len[i] + 1) + prog[i];
        }
        for i in (0..n).rev() {
            s = s * area + pos[i];
        }
        s
    };

    let advance = |pos: usize, prog: &mut usize, robot: usize| {
        while *prog < route_len[robot] && stops[robot][*prog] == pos {
            *prog += 1;
        }
    };

    let mut start_pos: Vec<usize> = instance.starts.iter().map(|&c| map.cell_index(c)).collect();
    let mut start_prog = vec![0usize; n];
    for i in 0..n {
        advance(start_pos[i], &mut start_prog[i], i);
    }

    let mut dist = vec![u64::MAX; states];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    let s0 = encode(&start_pos, &start_prog);
    dist[s0] = 0;
    heap.push(Reverse((0, s0)));
    // Reuse the start buffers for decoding.
    let (pos, prog) = (&mut start_pos, &mut start_prog);

    while let Some(Reverse((d, s))) = heap.pop() {
        if d > dist[s] {
            continue;
        }
        let mut rem = s;
        for p in pos.iter_mut() {
            *p = rem % area;
            rem /= area;
        }
        for (i, p) in prog.iter_mut().enumerate() {
            *p = rem % (route_len[i] + 1);
            rem /= route_len[i] + 1;
        }
        if (0..n).all(|i| prog[i] == route_len[i]) {
            return Some(d as usize);
        }
        let unfinished = (0..n).filter(|&i| prog[i] < route_len[i]).count() as u64;

        // All robots move each step (finished ones roam at no cost).
        let moves: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut opts = vec![pos[i]];
                opts.extend(map.free_neighbors(cell_of[pos[i]]).map(|c| map.cell_index(c)));
                opts
            })
            .collect();
        let mut pick = vec![0usize; n];
        'combos: loop {
            let next: Vec<usize> = (0..n).map(|i| moves[i][pick[i]]).collect();
            let mut legal = true;
            'pairs: for i in 0..n {
                for j in (i + 1)..n {
                    if next[i] == next[j]
                        || is_swap(cell_of[pos[i]], cell_of[next[i]], cell_of[pos[j]], cell_of[next[j]])
                    {
                        legal = false;
                        break 'pairs;
                    }
                }
            }
            if legal {
                let mut nprog = prog.clone();
                for i in 0..n {
                    advance(next[i], &mut nprog[i], i);
                }
                let nd = d + unfinished;
                let s2 = encode(&next, &nprog);
                if nd < dist[s2] {
                    dist[s2] = nd;
                    heap.push(Reverse((nd, s2)));
                }
            }
            for i in 0..=n {
                if i == n {
                    break 'combos;
                }
                pick[i] += 1;
                if pick[i] < moves[i].len() {
                    break;
                }
                pick[i] = 0;
            }
        }
    }
    None
}
