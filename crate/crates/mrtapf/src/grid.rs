//! Grid maps, cells, and problem instances.
//!
//! Coordinates are `(x, y)` with `x` the column and `y` the row; the origin
//! is the top-left corner. Motion is 4-connected (up, down, left, right) on
//! unit-cost edges, plus waiting in place.

use std::fmt;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A grid coordinate. Serialized as a two-element `[x, y]` array.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(u16, u16)", into = "(u16, u16)")]
pub struct Cell {
    pub x: u16,
    pub y: u16,
}

impl Cell {
    pub fn new(x: u16, y: u16) -> Self {
        Cell { x, y }
    }

    /// True when `self` and `other` are the same cell or share a grid edge.
    pub fn adjacent_or_equal(&self, other: &Cell) -> bool {
        let dx = (self.x as i32 - other.x as i32).abs();
        let dy = (self.y as i32 - other.y as i32).abs();
        dx + dy <= 1
    }
}

impl From<(u16, u16)> for Cell {
    fn from((x, y): (u16, u16)) -> Self {
        Cell { x, y }
    }
}

impl From<Cell> for (u16, u16) {
    fn from(c: Cell) -> Self {
        (c.x, c.y)
    }
}

impl fmt::Debug for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Neighbor offsets in fixed order: up, down, left, right. Every routine
/// that enumerates moves uses this order so ties resolve identically
/// everywhere.
const OFFSETS: [(i32, i32); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

/// An occupancy grid. `blocked` is stored row-major (`y * width + x`).
#[derive(Clone, PartialEq, Eq)]
pub struct GridMap {
    width: u16,
    height: u16,
    blocked: Vec<bool>,
}

impl GridMap {
    /// An all-free map. Width and height must both be at least 1.
    pub fn new(width: u16, height: u16) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::MapFormat(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(GridMap {
            width,
            height,
            blocked: vec![false; width as usize * height as usize],
        })
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn area(&self) -> usize {
        self.width as usize * self.height as usize
    }

    #[inline]
    fn idx(&self, c: Cell) -> usize {
        c.y as usize * self.width as usize + c.x as usize
    }

    /// Row-major cell index, used by the exhaustive oracles to pack joint
    /// states into flat arrays.
    pub fn cell_index(&self, c: Cell) -> usize {
        self.idx(c)
    }

    #[inline]
    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    /// In bounds and not an obstacle.
    #[inline]
    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.blocked[self.idx(c)]
    }

    pub fn set_blocked(&mut self, c: Cell, blocked: bool) -> Result<()> {
        if !self.in_bounds(c) {
            return Err(Error::BadCell(c));
        }
        let i = self.idx(c);
        self.blocked[i] = blocked;
        Ok(())
    }

    pub fn count_blocked(&self) -> usize {
        self.blocked.iter().filter(|&&b| b).count()
    }

    pub fn count_free(&self) -> usize {
        self.area() - self.count_blocked()
    }

    /// All free cells in row-major order.
    pub fn free_cells(&self) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.count_free());
        for y in 0..self.height {
            for x in 0..self.width {
                let c = Cell::new(x, y);
                if !self.blocked[self.idx(c)] {
                    out.push(c);
                }
            }
        }
        out
    }

    /// Free neighbors of `c` in up, down, left, right order. Errors when `c`
    /// itself is blocked or out of bounds.
    pub fn neighbors(&self, c: Cell) -> Result<Vec<Cell>> {
        if !self.is_free(c) {
            return Err(Error::BadCell(c));
        }
        Ok(self.free_neighbors(c).collect())
    }

    /// Unchecked variant of [`GridMap::neighbors`] for inner loops; assumes
    /// `c` is a valid free cell.
    #[inline]
    pub fn free_neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        OFFSETS.iter().filter_map(move |&(dx, dy)| {
            let nx = c.x as i32 + dx;
            let ny = c.y as i32 + dy;
            if nx < 0 || ny < 0 {
                return None;
            }
            let n = Cell::new(nx as u16, ny as u16);
            if self.is_free(n) {
                Some(n)
            } else {
                None
            }
        })
    }

    /// Parse the plain-text map format:
    ///
    /// ```text
    /// type octile
    /// height 2
    /// width 3
    /// map
    /// .@.
    /// ...
    /// ```
    ///
    /// `.` is free, `@` is blocked. Exactly `height` rows of exactly `width`
    /// characters must follow the `map` line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let type_line = lines.next().ok_or_else(|| Error::MapFormat("empty input".into()))?;
        if type_line.trim() != "type octile" {
            return Err(Error::MapFormat(format!("expected 'type octile', got '{type_line}'")));
        }
        let height = parse_header_field(lines.next(), "height")?;
        let width = parse_header_field(lines.next(), "width")?;
        let map_line = lines.next().ok_or_else(|| Error::MapFormat("missing 'map' line".into()))?;
        if map_line.trim() != "map" {
            return Err(Error::MapFormat(format!("expected 'map', got '{map_line}'")));
        }
        if width == 0 || height == 0 {
            return Err(Error::MapFormat(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        let mut grid = GridMap::new(width, height)?;
        for y in 0..height {
            let row = lines
                .next()
                .ok_or_else(|| Error::MapFormat(format!("missing row {y}: expected {height} rows")))?;
            let row = row.trim_end_matches(['\r']);
            let got = row.chars().count();
            if got != width as usize {
                return Err(Error::RowWidthMismatch { row: y as usize, got, want: width as usize });
            }
            for (x, ch) in row.chars().enumerate() {
                match ch {
                    '.' => {}
                    '@' => grid.blocked[y as usize * width as usize + x] = true,
                    other => {
                        return Err(Error::MapFormat(format!(
                            "unexpected character '{other}' at ({x}, {y})"
                        )))
                    }
                }
            }
        }
        if let Some(extra) = lines.find(|l| !l.trim().is_empty()) {
            return Err(Error::MapFormat(format!("trailing content after map rows: '{extra}'")));
        }
        Ok(grid)
    }

    /// Inverse of [`GridMap::parse`]; `parse(render(m)) == m`.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.area() + 64);
        out.push_str("type octile\n");
        out.push_str(&format!("height {}\n", self.height));
        out.push_str(&format!("width {}\n", self.width));
        out.push_str("map\n");
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(if self.blocked[self.idx(Cell::new(x, y))] { '@' } else { '.' });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        GridMap::parse(&text)
    }
}

impl fmt::Debug for GridMap {
    // Debug dumps reuse the text format so failing tests print a real map.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

fn parse_header_field(line: Option<&str>, name: &str) -> Result<u16> {
    let line = line.ok_or_else(|| Error::MapFormat(format!("missing '{name}' line")))?;
    let rest = line
        .trim()
        .strip_prefix(name)
        .ok_or_else(|| Error::MapFormat(format!("expected '{name} N', got '{line}'")))?;
    rest.trim()
        .parse::<u16>()
        .map_err(|e| Error::MapFormat(format!("bad {name} value '{}': {e}", rest.trim())))
}

/// A scenario file body. The `map` field is the path of the companion map
/// file, stored verbatim.
#[derive(Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub map: String,
    pub starts: Vec<Cell>,
    pub goals: Vec<Cell>,
    pub seed: u64,
}

/// A full problem: a map, robot start cells (the depots), and goal cells
/// (the tasks).
///
/// Invariants, enforced by [`Instance::check`]:
/// * every start and goal is a free in-bounds cell,
/// * starts are pairwise distinct, goals are pairwise distinct,
/// * no goal equals a start,
/// * at least one robot.
#[derive(Clone, Debug)]
pub struct Instance {
    pub map: GridMap,
    pub starts: Vec<Cell>,
    pub goals: Vec<Cell>,
    pub seed: u64,
}

impl Instance {
    pub fn num_robots(&self) -> usize {
        self.starts.len()
    }

    pub fn num_goals(&self) -> usize {
        self.goals.len()
    }

    pub fn check(&self) -> Result<()> {
        if self.starts.is_empty() {
            return Err(Error::InvalidInstance("no robots".into()));
        }
        for (i, &s) in self.starts.iter().enumerate() {
            if !self.map.is_free(s) {
                return Err(Error::InvalidInstance(format!("start {i} at {s} is not free")));
            }
        }
        for (i, &g) in self.goals.iter().enumerate() {
            if !self.map.is_free(g) {
                return Err(Error::InvalidInstance(format!("goal {i} at {g} is not free")));
            }
        }
        for i in 0..self.starts.len() {
            for j in (i + 1)..self.starts.len() {
                if self.starts[i] == self.starts[j] {
                    return Err(Error::InvalidInstance(format!(
                        "starts {i} and {j} coincide at {}",
                        self.starts[i]
                    )));
                }
            }
        }
        for i in 0..self.goals.len() {
            for j in (i + 1)..self.goals.len() {
                if self.goals[i] == self.goals[j] {
                    return Err(Error::InvalidInstance(format!(
                        "goals {i} and {j} coincide at {}",
                        self.goals[i]
                    )));
                }
            }
        }
        for (i, &g) in self.goals.iter().enumerate() {
            if self.starts.contains(&g) {
                return Err(Error::InvalidInstance(format!("goal {i} at {g} equals a start")));
            }
        }
        Ok(())
    }

    /// Load an instance from a map file and a scenario file. The scenario's
    /// `map` field is informational; the map is read from `map_path`.
    pub fn from_files(map_path: &Path, scen_path: &Path) -> Result<Self> {
        let map = GridMap::from_file(map_path)?;
        let text = std::fs::read_to_string(scen_path)?;
        let scen: Scenario = serde_json::from_str(&text)?;
        let inst = Instance { map, starts: scen.starts, goals: scen.goals, seed: scen.seed };
        inst.check()?;
        Ok(inst)
    }

    pub fn scenario(&self, map_path: &str) -> Scenario {
        Scenario {
            map: map_path.to_string(),
            starts: self.starts.clone(),
            goals: self.goals.clone(),
            seed: self.seed,
        }
    }
}

/// How many times an unreachable goal is redrawn before generation fails.
const GOAL_RESAMPLE_BUDGET: usize = 100;

/// Generate a random instance. Deterministic in `seed`.
///
/// `floor(obstacle_ratio * area)` distinct cells are blocked, then `robots`
/// starts and `goals` goal cells are drawn without replacement from the free
/// cells. Any goal not reachable from some start is redrawn from the unused
/// free cells, up to [`GOAL_RESAMPLE_BUDGET`] draws per goal; running out of
/// draws or of candidate cells fails generation rather than returning a
/// broken instance.
pub fn generate_instance(
    width: u16,
    height: u16,
    obstacle_ratio: f64,
    robots: usize,
    goals: usize,
    seed: u64,
) -> Result<Instance> {
    if !(0.0..=1.0).contains(&obstacle_ratio) {
        return Err(Error::InvalidInstance(format!(
            "obstacle ratio must be in [0, 1], got {obstacle_ratio}"
        )));
    }
    if robots == 0 {
        return Err(Error::InvalidInstance("no robots".into()));
    }
    let mut map = GridMap::new(width, height)?;
    let area = map.area();
    let n_obstacles = (obstacle_ratio * area as f64).floor() as usize;
    let need = robots + goals;
    if area - n_obstacles < need {
        return Err(Error::InsufficientFreeCells { need, have: area - n_obstacles });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in sample(&mut rng, area, n_obstacles) {
        map.blocked[i] = true;
    }

    let free = map.free_cells();
    let picked = sample(&mut rng, free.len(), need);
    let mut taken = vec![false; free.len()];
    for i in picked.iter() {
        taken[i] = true;
    }
    let chosen: Vec<Cell> = picked.iter().map(|i| free[i]).collect();
    let starts: Vec<Cell> = chosen[..robots].to_vec();
    let mut goal_cells: Vec<Cell> = chosen[robots..].to_vec();

    // Unused free cells, row-major; goals that land in unreachable pockets
    // are replaced from this pool.
    let mut pool: Vec<Cell> = free
        .iter()
        .enumerate()
        .filter(|&(i, _)| !taken[i])
        .map(|(_, &c)| c)
        .collect();

    let reach = multi_source_reach(&map, &starts);
    for g in goal_cells.iter_mut() {
        let mut attempts = 0;
        while !reach[map.idx(*g)] {
            attempts += 1;
            if attempts > GOAL_RESAMPLE_BUDGET {
                return Err(Error::RetryBudgetExhausted { attempts: GOAL_RESAMPLE_BUDGET });
            }
            if pool.is_empty() {
                return Err(Error::InsufficientFreeCells { need: 1, have: 0 });
            }
            let k = rng.random_range(0..pool.len());
            *g = pool.swap_remove(k);
        }
    }

    let inst = Instance { map, starts, goals: goal_cells, seed };
    inst.check()?;
    Ok(inst)
}

/// Cells reachable from any of `sources`, as a row-major bitmap.
fn multi_source_reach(map: &GridMap, sources: &[Cell]) -> Vec<bool> {
    let mut seen = vec![false; map.area()];
    let mut queue = std::collections::VecDeque::new();
    for &s in sources {
        let i = map.idx(s);
        if !seen[i] {
            seen[i] = true;
            queue.push_back(s);
        }
    }
    while let Some(c) = queue.pop_front() {
        for n in map.free_neighbors(c) {
            let i = map.idx(n);
            if !seen[i] {
                seen[i] = true;
                queue.push_back(n);
            }
        }
    }
    seen
}
