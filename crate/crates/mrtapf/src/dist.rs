//! Shortest grid distances and the assignment cost matrix.
//!
//! Distances are unit-cost BFS over free cells. The cost matrix indexes
//! depots (robot starts) before goals; entries into depot columns are zero,
//! which is what makes open routes out of a classical closed-tour model:
//! returning "home" is free, so tours effectively end at their last goal.

use std::collections::VecDeque;
use std::io::Write;

use crate::grid::{Cell, GridMap, Instance};
use crate::{Error, Result};

/// Sentinel distance for disconnected pairs.
pub const UNREACHABLE: u32 = u32::MAX;

/// Distances from one source cell to every cell of a map.
pub struct DistField {
    width: u16,
    data: Vec<u32>,
}

impl DistField {
    #[inline]
    pub fn get(&self, c: Cell) -> u32 {
        self.data[c.y as usize * self.width as usize + c.x as usize]
    }
}

/// BFS from `source` over free cells. `source` must be free.
pub fn bfs_field(map: &GridMap, source: Cell) -> Result<DistField> {
    if !map.is_free(source) {
        return Err(Error::BadCell(source));
    }
    let mut data = vec![UNREACHABLE; map.area()];
    let mut queue = VecDeque::new();
    data[map.cell_index(source)] = 0;
    queue.push_back(source);
    while let Some(c) = queue.pop_front() {
        let d = data[map.cell_index(c)];
        for n in map.free_neighbors(c) {
            let i = map.cell_index(n);
            if data[i] == UNREACHABLE {
                data[i] = d + 1;
                queue.push_back(n);
            }
        }
    }
    Ok(DistField { width: map.width(), data })
}

/// Shortest distance between two free cells; `None` when disconnected.
/// Errors when either endpoint is blocked or out of bounds.
pub fn shortest_dist(map: &GridMap, from: Cell, to: Cell) -> Result<Option<u32>> {
    if !map.is_free(to) {
        return Err(Error::BadCell(to));
    }
    let field = bfs_field(map, from)?;
    match field.get(to) {
        UNREACHABLE => Ok(None),
        d => Ok(Some(d)),
    }
}

/// Square distance matrix over `depots + goals` locations, row-major.
///
/// Index `i < depots` is robot `i`'s start; index `depots + j` is goal `j`.
/// Invariants: `get(i, i) == 0`; every depot column is all zero; every other
/// entry is the true BFS distance or [`UNREACHABLE`].
#[derive(Clone, PartialEq, Eq)]
pub struct CostMatrix {
    depots: usize,
    goals: usize,
    data: Vec<u32>,
}

impl CostMatrix {
    pub fn depots(&self) -> usize {
        self.depots
    }

    pub fn goals(&self) -> usize {
        self.goals
    }

    pub fn size(&self) -> usize {
        self.depots + self.goals
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> u32 {
        self.data[from * self.size() + to]
    }

    /// Distance from location `from` to goal `j` (convenience for routing
    /// code that works in goal indices).
    #[inline]
    pub fn to_goal(&self, from: usize, j: usize) -> u32 {
        self.get(from, self.depots + j)
    }

    /// Write the matrix as CSV with locations labelled `d0..` and `g0..`;
    /// unreachable entries render as `inf`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let label = |k: usize| {
            if k < self.depots {
                format!("d{k}")
            } else {
                format!("g{}", k - self.depots)
            }
        };
        write!(out, "from")?;
        for j in 0..self.size() {
            write!(out, ",{}", label(j))?;
        }
        writeln!(out)?;
        for i in 0..self.size() {
            write!(out, "{}", label(i))?;
            for j in 0..self.size() {
                let v = self.get(i, j);
                if v == UNREACHABLE {
                    write!(out, ",inf")?;
                } else {
                    write!(out, ",{v}")?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn matrix_row(map: &GridMap, sources: &[Cell], depots: usize, i: usize) -> Result<Vec<u32>> {
    let field = bfs_field(map, sources[i])?;
    let size = sources.len();
    let mut row = vec![0u32; size];
    for (j, slot) in row.iter_mut().enumerate() {
        // Depot columns stay zero: ending a route is free from anywhere.
        if j >= depots {
            *slot = field.get(sources[j]);
        }
    }
    Ok(row)
}

fn assemble(instance: &Instance, rows: Vec<Vec<u32>>) -> CostMatrix {
    CostMatrix {
        depots: instance.num_robots(),
        goals: instance.num_goals(),
        data: rows.into_iter().flatten().collect(),
    }
}

/// One BFS per location, rows built sequentially.
pub fn build_cost_matrix_seq(instance: &Instance) -> Result<CostMatrix> {
    let sources: Vec<Cell> =
        instance.starts.iter().chain(instance.goals.iter()).copied().collect();
    let depots = instance.num_robots();
    let rows = (0..sources.len())
        .map(|i| matrix_row(&instance.map, &sources, depots, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(instance, rows))
}

/// Rows are independent BFS runs, so they parallelize cleanly; the result
/// is assembled in index order and equals the sequential build exactly.
#[cfg(feature = "parallel")]
pub fn build_cost_matrix_par(instance: &Instance) -> Result<CostMatrix> {
    use rayon::prelude::*;
    let sources: Vec<Cell> =
        instance.starts.iter().chain(instance.goals.iter()).copied().collect();
    let depots = instance.num_robots();
    let rows = (0..sources.len())
        .into_par_iter()
        .map(|i| matrix_row(&instance.map, &sources, depots, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(instance, rows))
}

/// Build the cost matrix, using the parallel path when compiled in.
pub fn build_cost_matrix(instance: &Instance) -> Result<CostMatrix> {
    #[cfg(feature = "parallel")]
    {
        build_cost_matrix_par(instance)
    }
    #[cfg(not(feature = "parallel"))]
    {
        build_cost_matrix_seq(instance)
    }
}
