//! Conflict-based search for one fixed set of start/goal pairs.
//!
//! Two-level scheme: the high level grows a binary constraint tree, picking
//! the node with the least sum of path costs and splitting on the first
//! conflict; the low level plans one robot through space-time with A*,
//! honouring that robot's constraints.
//!
//! Conflict semantics use padded paths: a robot that has finished parks on
//! its goal forever. A vertex conflict is two robots on one cell at one
//! time; an edge conflict is two robots traversing the same edge in
//! opposite directions in the same step. Same-direction "follow" moves are
//! legal.

use std::collections::{BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;

use crate::grid::{Cell, GridMap};
use crate::dist::{bfs_field, DistField, UNREACHABLE};
use crate::{Deadline, Error, Result};

/// One robot's timed path: `cells[t]` is the location at step `t`. Never
/// empty; `cells[0]` is the start and the last cell is the goal.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Path {
    pub cells: Vec<Cell>,
}

impl Path {
    /// Arrival time at the goal: 0 when the robot starts there.
    pub fn cost(&self) -> usize {
        self.cells.len() - 1
    }

    /// Location at time `t` under the parked-at-goal convention.
    #[inline]
    pub fn at(&self, t: usize) -> Cell {
        if t >= self.cells.len() {
            *self.cells.last().unwrap()
        } else {
            self.cells[t]
        }
    }
}

/// A single forbidden atom for one robot.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Constraint {
    pub robot: usize,
    pub kind: ConstraintKind,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ConstraintKind {
    /// The robot may not occupy `cell` at time `t`.
    Vertex { cell: Cell, t: usize },
    /// The robot may not move `from -> to` departing at time `t`.
    Edge { from: Cell, to: Cell, t: usize },
}

/// A detected collision between two robots (`robots.0 < robots.1`).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Conflict {
    pub robots: (usize, usize),
    pub kind: ConflictKind,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ConflictKind {
    /// Both robots on `cell` at time `t`.
    Vertex { cell: Cell, t: usize },
    /// The robots exchange `from`/`to` between times `t` and `t + 1`
    /// (`from` is the first robot's departure cell).
    Edge { from: Cell, to: Cell, t: usize },
}

/// True when two moves over one step swap cells in opposite directions.
/// Shared by detection, validation, and the exhaustive oracles so all of
/// them agree on what an edge conflict is.
#[inline]
pub fn is_swap(a_from: Cell, a_to: Cell, b_from: Cell, b_to: Cell) -> bool {
    a_from == b_to && a_to == b_from && a_from != a_to
}

/// First conflict in time order over padded paths; at equal time, vertex
/// conflicts win over edge conflicts and robot pairs scan in index order.
/// `None` means the joint plan is collision-free for all time.
pub fn detect_first_conflict(paths: &[Path]) -> Option<Conflict> {
    let horizon = paths.iter().map(|p| p.cells.len()).max()?;
    for t in 0..horizon {
        for i in 0..paths.len() {
            for j in (i + 1)..paths.len() {
                if paths[i].at(t) == paths[j].at(t) {
                    return Some(Conflict {
                        robots: (i, j),
                        kind: ConflictKind::Vertex { cell: paths[i].at(t), t },
                    });
                }
            }
        }
        if t + 1 < horizon {
            for i in 0..paths.len() {
                for j in (i + 1)..paths.len() {
                    if is_swap(paths[i].at(t), paths[i].at(t + 1), paths[j].at(t), paths[j].at(t + 1)) {
                        return Some(Conflict {
                            robots: (i, j),
                            kind: ConflictKind::Edge {
                                from: paths[i].at(t),
                                to: paths[i].at(t + 1),
                                t,
                            },
                        });
                    }
                }
            }
        }
    }
    None
}

/// Count all pairwise conflicts over padded paths (used as a high-level
/// tie-breaker: fewer conflicts first).
fn count_conflicts(paths: &[Path]) -> usize {
    let horizon = match paths.iter().map(|p| p.cells.len()).max() {
        Some(h) => h,
        None => return 0,
    };
    let mut total = 0;
    for t in 0..horizon {
        for i in 0..paths.len() {
            for j in (i + 1)..paths.len() {
                if paths[i].at(t) == paths[j].at(t) {
                    total += 1;
                }
                if t + 1 < horizon
                    && is_swap(paths[i].at(t), paths[i].at(t + 1), paths[j].at(t), paths[j].at(t + 1))
                {
                    total += 1;
                }
            }
        }
    }
    total
}

/// Constraints of one robot, indexed for O(1) lookups in the A* loop.
struct ConstraintIndex {
    vertices: HashSet<(Cell, usize)>,
    edges: HashSet<(Cell, Cell, usize)>,
    /// Earliest time the robot may settle on its goal: one past the latest
    /// vertex constraint on the goal cell, 0 when there is none.
    settle_after: usize,
    /// Latest time any constraint mentions; extends the search horizon.
    max_time: usize,
}

impl ConstraintIndex {
    fn build(robot: usize, goal: Cell, constraints: &[Constraint]) -> Self {
        let mut idx = ConstraintIndex {
            vertices: HashSet::new(),
            edges: HashSet::new(),
            settle_after: 0,
            max_time: 0,
        };
        for c in constraints.iter().filter(|c| c.robot == robot) {
            match c.kind {
                ConstraintKind::Vertex { cell, t } => {
                    idx.vertices.insert((cell, t));
                    if cell == goal {
                        idx.settle_after = idx.settle_after.max(t + 1);
                    }
                    idx.max_time = idx.max_time.max(t);
                }
                ConstraintKind::Edge { from, to, t } => {
                    idx.edges.insert((from, to, t));
                    idx.max_time = idx.max_time.max(t + 1);
                }
            }
        }
        idx
    }
}

/// Space-time A* for one robot: minimal arrival time at `goal` such that no
/// constraint of `robot` is violated and the robot can park on the goal
/// forever after. States are `(cell, t)` with `g = t` and a BFS
/// distance-to-goal heuristic; ties pop in `(f, t, x, y)` order. The search
/// gives up past a horizon of twice the map area plus the largest
/// constraint time.
pub fn low_level_search(
    map: &GridMap,
    robot: usize,
    start: Cell,
    goal: Cell,
    constraints: &[Constraint],
) -> Result<Path> {
    let h_field = bfs_field(map, goal)?;
    if !map.is_free(start) {
        return Err(Error::BadCell(start));
    }
    if h_field.get(start) == UNREACHABLE {
        return Err(Error::LowLevelExhausted { robot });
    }
    let idx = ConstraintIndex::build(robot, goal, constraints);
    low_level_with_index(map, robot, start, goal, &h_field, &idx)
}

fn low_level_with_index(
    map: &GridMap,
    robot: usize,
    start: Cell,
    goal: Cell,
    h_field: &DistField,
    idx: &ConstraintIndex,
) -> Result<Path> {
    let horizon = 2 * map.area() + idx.max_time;

    type Key = (usize, usize, u16, u16); // (f, t, x, y)
    let mut open: BinaryHeap<Reverse<Key>> = BinaryHeap::new();
    let mut parents: HashMap<(Cell, usize), (Cell, usize)> = HashMap::new();
    let mut closed: HashSet<(Cell, usize)> = HashSet::new();

    let h0 = h_field.get(start) as usize;
    open.push(Reverse((h0, 0, start.x, start.y)));
    parents.insert((start, 0), (start, 0));

    while let Some(Reverse((_, t, x, y))) = open.pop() {
        let cell = Cell::new(x, y);
        if !closed.insert((cell, t)) {
            continue;
        }
        if cell == goal && t >= idx.settle_after {
            return Ok(reconstruct(&parents, cell, t));
        }
        if t >= horizon {
            continue;
        }
        let nt = t + 1;
        for next in std::iter::once(cell).chain(map.free_neighbors(cell)) {
            if idx.vertices.contains(&(next, nt)) {
                continue;
            }
            if next != cell && idx.edges.contains(&(cell, next, t)) {
                continue;
            }
            let key = (next, nt);
            if closed.contains(&key) || parents.contains_key(&key) {
                continue;
            }
            let h = h_field.get(next);
            if h == UNREACHABLE {
                continue;
            }
            parents.insert(key, (cell, t));
            open.push(Reverse((nt + h as usize, nt, next.x, next.y)));
        }
    }
    Err(Error::LowLevelExhausted { robot })
}

fn reconstruct(parents: &HashMap<(Cell, usize), (Cell, usize)>, cell: Cell, t: usize) -> Path {
    let mut cells = vec![cell; t + 1];
    let mut cursor = (cell, t);
    while cursor.1 > 0 {
        cursor = parents[&cursor];
        cells[cursor.1] = cursor.0;
    }
    Path { cells }
}

/// A constraint-tree node: its constraint set and the paths planned under
/// it.
struct CtNode {
    constraints: Vec<Constraint>,
    paths: Vec<Path>,
    soc: usize,
    conflicts: usize,
    first_conflict: Option<Conflict>,
}

/// Solve a fixed multi-robot query. Starts must be pairwise distinct free
/// cells; goals must be free (duplicates among goals are the caller's
/// responsibility to avoid — CBS cannot resolve two robots parked on one
/// cell). Optimal in sum of individual costs under the parked-at-goal
/// convention. Fails once more than `node_limit` tree nodes have been
/// generated, when a root path is impossible, or on deadline.
pub fn cbs_solve(
    map: &GridMap,
    starts: &[Cell],
    goals: &[Cell],
    node_limit: usize,
    deadline: Deadline,
) -> Result<Vec<Path>> {
    if starts.len() != goals.len() {
        return Err(Error::InvalidInstance(format!(
            "{} starts vs {} goals",
            starts.len(),
            goals.len()
        )));
    }
    for i in 0..starts.len() {
        for j in (i + 1)..starts.len() {
            if starts[i] == starts[j] {
                return Err(Error::InvalidInstance(format!(
                    "robots {i} and {j} share start {}",
                    starts[i]
                )));
            }
        }
    }

    // One heuristic field per distinct goal, shared across the whole tree.
    let mut h_fields: HashMap<Cell, DistField> = HashMap::new();
    for (i, &g) in goals.iter().enumerate() {
        if !h_fields.contains_key(&g) {
            h_fields.insert(g, bfs_field(map, g)?);
        }
        if h_fields[&g].get(starts[i]) == UNREACHABLE {
            return Err(Error::UnreachableGoal { robot: i, goal: g });
        }
    }

    let plan_robot = |robot: usize, constraints: &[Constraint]| -> Result<Path> {
        let idx = ConstraintIndex::build(robot, goals[robot], constraints);
        low_level_with_index(map, robot, starts[robot], goals[robot], &h_fields[&goals[robot]], &idx)
    };

    let root_paths = (0..starts.len())
        .map(|i| {
            plan_robot(i, &[]).map_err(|e| match e {
                Error::LowLevelExhausted { robot } => {
                    Error::UnreachableGoal { robot, goal: goals[robot] }
                }
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut nodes: Vec<CtNode> = Vec::new();
    // Open entries order by (soc, conflict count, insertion sequence); the
    // sequence number makes expansion order deterministic and FIFO on ties.
    let mut open: BinaryHeap<Reverse<(usize, usize, usize)>> = BinaryHeap::new();

    let root = CtNode {
        constraints: Vec::new(),
        soc: root_paths.iter().map(Path::cost).sum(),
        conflicts: count_conflicts(&root_paths),
        first_conflict: detect_first_conflict(&root_paths),
        paths: root_paths,
    };
    let mut generated = 1usize;
    open.push(Reverse((root.soc, root.conflicts, 0)));
    nodes.push(root);

    while let Some(Reverse((_, _, id))) = open.pop() {
        if deadline.exceeded() {
            return Err(Error::TimeLimit { phase: "path finding" });
        }
        let conflict = match nodes[id].first_conflict {
            None => return Ok(nodes[id].paths.clone()),
            Some(c) => c,
        };

        let (a, b) = conflict.robots;
        let splits: [(usize, ConstraintKind); 2] = match conflict.kind {
            ConflictKind::Vertex { cell, t } => [
                (a, ConstraintKind::Vertex { cell, t }),
                (b, ConstraintKind::Vertex { cell, t }),
            ],
            ConflictKind::Edge { from, to, t } => [
                (a, ConstraintKind::Edge { from, to, t }),
                (b, ConstraintKind::Edge { from: to, to: from, t }),
            ],
        };

        for (robot, kind) in splits {
            let mut constraints = nodes[id].constraints.clone();
            constraints.push(Constraint { robot, kind });
            let path = match plan_robot(robot, &constraints) {
                Ok(p) => p,
                // This branch is a dead end; the sibling may still work.
                Err(Error::LowLevelExhausted { .. }) => continue,
                Err(other) => return Err(other),
            };
            let mut paths = nodes[id].paths.clone();
            let soc = nodes[id].soc - paths[robot].cost() + path.cost();
            debug_assert!(soc >= nodes[id].soc, "constraints never shorten a path");
            paths[robot] = path;

            generated += 1;
            if generated > node_limit {
                return Err(Error::CbsLimitExceeded { limit: node_limit });
            }
            let child = CtNode {
                constraints,
                soc,
                conflicts: count_conflicts(&paths),
                first_conflict: detect_first_conflict(&paths),
                paths,
            };
            open.push(Reverse((child.soc, child.conflicts, nodes.len())));
            nodes.push(child);
        }
    }
    Err(Error::CbsExhausted)
}
