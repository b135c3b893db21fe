//! Batch benchmark protocol: a grid of (robots, goals) cells, a fixed
//! number of seeded instances per cell, one solve each under a wall-clock
//! budget, reported as CSV rows plus per-cell summary statistics.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::grid::generate_instance;
use crate::sa::SaParams;
use crate::solver::{solve_instance, SolutionFile, SolveParams, DEFAULT_NODE_LIMIT};
use crate::Result;

/// Benchmark configuration, read from JSON. Every field has a default, so
/// a config file may specify only what it overrides.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub robot_counts: Vec<usize>,
    pub goal_counts: Vec<usize>,
    pub instances_per_cell: usize,
    pub map_width: u16,
    pub map_height: u16,
    pub obstacle_ratio: f64,
    pub time_limit_seconds: f64,
    /// Base of the per-instance seed formula
    /// `seed_base + 1_000_000 n + 1_000 m + index` (injective for the
    /// supported scales, so every cell draws distinct instances).
    pub seed_base: u64,
    /// Annealer settings; the seed field is overridden per instance with
    /// that instance's seed.
    pub sa: SaParams,
    pub node_limit: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            robot_counts: vec![5, 10, 20],
            goal_counts: vec![10, 20, 30, 40],
            instances_per_cell: 40,
            map_width: 32,
            map_height: 32,
            obstacle_ratio: 0.40,
            time_limit_seconds: 60.0,
            seed_base: 1,
            sa: SaParams::default(),
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }
}

pub fn instance_seed(seed_base: u64, robots: usize, goals: usize, index: usize) -> u64 {
    seed_base + 1_000_000 * robots as u64 + 1_000 * goals as u64 + index as u64
}

/// One CSV row. `flowtime`/`rounds` are present only for solved rows.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub robots: usize,
    pub goals: usize,
    pub instance: usize,
    pub seed: u64,
    pub solved: bool,
    pub sa_seconds: f64,
    pub recbs_seconds: f64,
    pub total_seconds: f64,
    pub flowtime: Option<usize>,
    pub rounds: Option<usize>,
}

/// Five-number summary (quartiles by linear interpolation over the sorted
/// sample).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiveNum {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn five_num(values: &[f64]) -> Option<FiveNum> {
    if values.is_empty() {
        return None;
    }
    let mut xs = values.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| -> f64 {
        let h = (xs.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        if lo + 1 < xs.len() {
            xs[lo] + frac * (xs[lo + 1] - xs[lo])
        } else {
            xs[lo]
        }
    };
    Some(FiveNum { min: xs[0], q1: q(0.25), median: q(0.5), q3: q(0.75), max: xs[xs.len() - 1] })
}

/// Per-cell aggregate over the rows of one (robots, goals) pair. Timing
/// summaries cover solved rows only and are absent when nothing solved.
#[derive(Clone, Debug)]
pub struct CellSummary {
    pub robots: usize,
    pub goals: usize,
    pub instances: usize,
    pub solved: usize,
    pub success_rate: f64,
    pub sa_stats: Option<FiveNum>,
    pub recbs_stats: Option<FiveNum>,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary: Vec<CellSummary>,
}

fn run_job(
    config: &BenchConfig,
    robots: usize,
    goals: usize,
    index: usize,
    keep_timing: bool,
) -> (BenchRow, Option<SolutionFile>) {
    let seed = instance_seed(config.seed_base, robots, goals, index);
    let mut row = BenchRow {
        robots,
        goals,
        instance: index,
        seed,
        solved: false,
        sa_seconds: 0.0,
        recbs_seconds: 0.0,
        total_seconds: 0.0,
        flowtime: None,
        rounds: None,
    };

    let Ok(instance) = generate_instance(
        config.map_width,
        config.map_height,
        config.obstacle_ratio,
        robots,
        goals,
        seed,
    ) else {
        return (row, None);
    };

    let params = SolveParams {
        sa: SaParams { seed, ..config.sa },
        node_limit: config.node_limit,
        time_limit: Some(config.time_limit_seconds),
    };
    let start = std::time::Instant::now();
    let outcome = solve_instance(&instance, &params);
    let total = start.elapsed().as_secs_f64();

    match outcome {
        Ok(out) if total <= config.time_limit_seconds => {
            row.solved = true;
            row.flowtime = Some(out.solution.flowtime);
            row.rounds = Some(out.solution.rounds);
            if keep_timing {
                row.sa_seconds = out.sa_seconds;
                row.recbs_seconds = out.recbs_seconds;
                row.total_seconds = total;
            }
            (row, Some(SolutionFile::from_output(&out, keep_timing)))
        }
        _ => {
            if keep_timing {
                row.total_seconds = total;
            }
            (row, None)
        }
    }
}

fn summarize(config: &BenchConfig, rows: &[BenchRow]) -> Vec<CellSummary> {
    let mut summary = Vec::new();
    for &n in &config.robot_counts {
        for &m in &config.goal_counts {
            let cell: Vec<&BenchRow> =
                rows.iter().filter(|r| r.robots == n && r.goals == m).collect();
            let solved: Vec<&&BenchRow> = cell.iter().filter(|r| r.solved).collect();
            let sa: Vec<f64> = solved.iter().map(|r| r.sa_seconds).collect();
            let recbs: Vec<f64> = solved.iter().map(|r| r.recbs_seconds).collect();
            summary.push(CellSummary {
                robots: n,
                goals: m,
                instances: cell.len(),
                solved: solved.len(),
                success_rate: if cell.is_empty() {
                    0.0
                } else {
                    solved.len() as f64 / cell.len() as f64
                },
                sa_stats: five_num(&sa),
                recbs_stats: five_num(&recbs),
            });
        }
    }
    summary
}

/// Run the whole protocol. Solved instances' solutions are written under
/// `solutions_dir` (one JSON per instance) when given. `keep_timing:
/// false` zeroes every timing field, making the report and the solution
/// files byte-reproducible.
///
/// Instances are independent, so the parallel build fans them out across
/// the thread pool; rows come back in deterministic (n, m, index) order
/// either way.
pub fn run_bench(
    config: &BenchConfig,
    solutions_dir: Option<&Path>,
    keep_timing: bool,
) -> Result<BenchReport> {
    let mut jobs = Vec::new();
    for &n in &config.robot_counts {
        for &m in &config.goal_counts {
            for i in 0..config.instances_per_cell {
                jobs.push((n, m, i));
            }
        }
    }

    #[cfg(feature = "parallel")]
    let results: Vec<(BenchRow, Option<SolutionFile>)> = {
        use rayon::prelude::*;
        jobs.par_iter().map(|&(n, m, i)| run_job(config, n, m, i, keep_timing)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<(BenchRow, Option<SolutionFile>)> =
        jobs.iter().map(|&(n, m, i)| run_job(config, n, m, i, keep_timing)).collect();

    let mut rows = Vec::with_capacity(results.len());
    for (row, solution) in results {
        if let (Some(dir), Some(sol)) = (solutions_dir, solution.as_ref()) {
            std::fs::create_dir_all(dir)?;
            let name = format!("n{}_m{}_i{}.json", row.robots, row.goals, row.instance);
            std::fs::write(dir.join(name), sol.to_json()?)?;
        }
        rows.push(row);
    }

    let summary = summarize(config, &rows);
    Ok(BenchReport { rows, summary })
}

/// Sequential twin of [`run_bench`] regardless of compiled features; the
/// criterion suite compares the two builds.
pub fn run_bench_seq(
    config: &BenchConfig,
    solutions_dir: Option<&Path>,
    keep_timing: bool,
) -> Result<BenchReport> {
    let mut rows = Vec::new();
    for &n in &config.robot_counts {
        for &m in &config.goal_counts {
            for i in 0..config.instances_per_cell {
                let (row, solution) = run_job(config, n, m, i, keep_timing);
                if let (Some(dir), Some(sol)) = (solutions_dir, solution.as_ref()) {
                    std::fs::create_dir_all(dir)?;
                    let name = format!("n{}_m{}_i{}.json", row.robots, row.goals, row.instance);
                    std::fs::write(dir.join(name), sol.to_json()?)?;
                }
                rows.push(row);
            }
        }
    }
    let summary = summarize(config, &rows);
    Ok(BenchReport { rows, summary })
}

fn fmt_opt_num(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_stat(s: Option<FiveNum>, pick: impl Fn(FiveNum) -> f64) -> String {
    s.map(|v| format!("{:.6}", pick(v))).unwrap_or_default()
}

/// Write the report: a data block, a blank line, then a `summary` block.
pub fn write_csv<W: Write>(report: &BenchReport, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "n,m,instance,seed,solved,sa_seconds,recbs_seconds,total_seconds,flowtime,rounds")?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{:.6},{:.6},{:.6},{},{}",
            r.robots,
            r.goals,
            r.instance,
            r.seed,
            r.solved as u8,
            r.sa_seconds,
            r.recbs_seconds,
            r.total_seconds,
            fmt_opt_num(r.flowtime),
            fmt_opt_num(r.rounds),
        )?;
    }
    writeln!(out)?;
    writeln!(out, "summary")?;
    writeln!(
        out,
        "n,m,instances,solved,success_rate,sa_min,sa_q1,sa_median,sa_q3,sa_max,recbs_min,recbs_q1,recbs_median,recbs_q3,recbs_max"
    )?;
    for c in &report.summary {
        writeln!(
            out,
            "{},{},{},{},{:.6},{},{},{},{},{},{},{},{},{},{}",
            c.robots,
            c.goals,
            c.instances,
            c.solved,
            c.success_rate,
            fmt_stat(c.sa_stats, |s| s.min),
            fmt_stat(c.sa_stats, |s| s.q1),
            fmt_stat(c.sa_stats, |s| s.median),
            fmt_stat(c.sa_stats, |s| s.q3),
            fmt_stat(c.sa_stats, |s| s.max),
            fmt_stat(c.recbs_stats, |s| s.min),
            fmt_stat(c.recbs_stats, |s| s.q1),
            fmt_stat(c.recbs_stats, |s| s.median),
            fmt_stat(c.recbs_stats, |s| s.q3),
            fmt_stat(c.recbs_stats, |s| s.max),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Instance;
    use crate::validate::validate;

    fn tiny_config() -> BenchConfig {
        BenchConfig {
            robot_counts: vec![2],
            goal_counts: vec![3],
            instances_per_cell: 3,
            map_width: 10,
            map_height: 10,
            obstacle_ratio: 0.2,
            time_limit_seconds: 30.0,
            seed_base: 7,
            ..Default::default()
        }
    }

    #[test]
    fn config_defaults_fill_missing_fields() {
        let cfg: BenchConfig = serde_json::from_str(r#"{"instances_per_cell": 2}"#).unwrap();
        assert_eq!(cfg.instances_per_cell, 2);
        assert_eq!(cfg.robot_counts, vec![5, 10, 20]);
        assert_eq!(cfg.goal_counts, vec![10, 20, 30, 40]);
        assert_eq!(cfg.map_width, 32);
        assert_eq!(cfg.obstacle_ratio, 0.40);
        assert_eq!(cfg.time_limit_seconds, 60.0);
    }

    #[test]
    fn five_num_interpolates_quartiles() {
        let s = five_num(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.min, 1.0);
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q3, 3.25);
        assert_eq!(s.max, 4.0);
        assert_eq!(five_num(&[5.0]).unwrap().median, 5.0);
        assert!(five_num(&[]).is_none());
    }

    #[test]
    fn empty_protocol_writes_header_only_data_block() {
        let config = BenchConfig { instances_per_cell: 0, ..tiny_config() };
        let report = run_bench(&config, None, true).unwrap();
        assert!(report.rows.is_empty());
        let mut buf = Vec::new();
        write_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("n,m,instance"));
        assert_eq!(lines.next().unwrap(), "");
        assert_eq!(lines.next().unwrap(), "summary");
        // The lone cell row reports zero instances and empty stats.
        let cell = lines.nth(1).unwrap();
        assert!(cell.starts_with("2,3,0,0,0.000000,"));
    }

    #[test]
    fn rows_come_back_in_protocol_order_with_seed_formula() {
        let report = run_bench(&tiny_config(), None, true).unwrap();
        assert_eq!(report.rows.len(), 3);
        for (i, row) in report.rows.iter().enumerate() {
            assert_eq!(row.instance, i);
            assert_eq!(row.seed, instance_seed(7, 2, 3, i));
            assert!(row.solved, "10x10 at 20% should be easy");
            assert!(row.flowtime.is_some() && row.rounds.is_some());
        }
        assert_eq!(report.summary.len(), 1);
        assert_eq!(report.summary[0].solved, 3);
        assert_eq!(report.summary[0].success_rate, 1.0);
    }

    #[test]
    fn stripped_timing_zeroes_all_timing_fields() {
        let report = run_bench(&tiny_config(), None, false).unwrap();
        for row in &report.rows {
            assert_eq!(row.sa_seconds, 0.0);
            assert_eq!(row.recbs_seconds, 0.0);
            assert_eq!(row.total_seconds, 0.0);
        }
        let s = report.summary[0].sa_stats.unwrap();
        assert_eq!((s.min, s.median, s.max), (0.0, 0.0, 0.0));
    }

    #[test]
    fn retained_solutions_validate_against_regenerated_instances() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config();
        let report = run_bench(&config, Some(dir.path()), true).unwrap();
        for row in report.rows.iter().filter(|r| r.solved) {
            let name = format!("n{}_m{}_i{}.json", row.robots, row.goals, row.instance);
            let file = SolutionFile::from_file(&dir.path().join(name)).unwrap();
            assert_eq!(file.flowtime, row.flowtime.unwrap());
            let inst: Instance = generate_instance(
                config.map_width,
                config.map_height,
                config.obstacle_ratio,
                row.robots,
                row.goals,
                row.seed,
            )
            .unwrap();
            let (sol, plan) = file.to_parts();
            let report = validate(&inst, &sol, &plan).unwrap();
            assert!(report.ok(), "{report}");
        }
    }

    #[test]
    fn identical_configs_produce_identical_stripped_reports() {
        let a = run_bench(&tiny_config(), None, false).unwrap();
        let b = run_bench(&tiny_config(), None, false).unwrap();
        let (mut ta, mut tb) = (Vec::new(), Vec::new());
        write_csv(&a, &mut ta).unwrap();
        write_csv(&b, &mut tb).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(a.rows, b.rows);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_runs_agree_without_timing() {
        let a = run_bench(&tiny_config(), None, false).unwrap();
        let b = run_bench_seq(&tiny_config(), None, false).unwrap();
        assert_eq!(a.rows, b.rows);
    }
}
