//! End-to-end tests of the `mrtapf` binary: exit codes, file outputs, and
//! the gen → solve → validate round trip.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mrtapf"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

/// Generates a small instance in `dir` and returns (map, scen) paths.
fn gen_small(dir: &Path) -> (String, String) {
    let prefix = path_str(&dir.join("small"));
    let out = run(&[
        "gen", "--width", "10", "--height", "10", "--obstacles", "0.1", "--robots", "2",
        "--goals", "3", "--seed", "7", "--out", &prefix,
    ]);
    assert!(out.status.success(), "gen failed: {}", stderr(&out));
    (format!("{prefix}.map"), format!("{prefix}.scen"))
}

#[test]
fn gen_solve_validate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (map, scen) = gen_small(dir.path());
    assert!(Path::new(&map).exists());
    assert!(Path::new(&scen).exists());

    let solution = path_str(&dir.path().join("solution.json"));
    let out = run(&[
        "solve", "--map", &map, "--scen", &scen, "--out", &solution, "--no-timing",
    ]);
    assert!(out.status.success(), "solve failed: {}", stderr(&out));
    assert!(stdout(&out).contains("flowtime"));

    let out = run(&["validate", "--map", &map, "--scen", &scen, "--solution", &solution]);
    assert!(out.status.success(), "validate failed: {}", stderr(&out));
    assert!(stdout(&out).contains("OK"));
}

#[test]
fn solve_writes_cost_matrix_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let (map, scen) = gen_small(dir.path());
    let solution = path_str(&dir.path().join("solution.json"));
    let matrix = path_str(&dir.path().join("matrix.csv"));
    let out = run(&[
        "solve", "--map", &map, "--scen", &scen, "--out", &solution, "--dump-matrix", &matrix,
        "--no-timing",
    ]);
    assert!(out.status.success(), "solve failed: {}", stderr(&out));
    let csv = std::fs::read_to_string(&matrix).unwrap();
    assert!(csv.starts_with("from,d0,d1,g0,g1,g2"), "unexpected header: {csv}");
    // One label row plus one row per location (2 depots + 3 goals).
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn missing_input_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let solution = path_str(&dir.path().join("solution.json"));
    let out = run(&[
        "solve", "--map", "/nonexistent.map", "--scen", "/nonexistent.scen", "--out", &solution,
    ]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("error:"));
}

#[test]
fn malformed_map_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("bad.map");
    std::fs::write(&map, "this is not a map\n").unwrap();
    let scen = dir.path().join("bad.scen");
    std::fs::write(
        &scen,
        r#"{"map": "bad.map", "starts": [[0, 0]], "goals": [[1, 1]], "seed": 0}"#,
    )
    .unwrap();
    let solution = path_str(&dir.path().join("solution.json"));
    let out = run(&[
        "solve", "--map", &path_str(&map), "--scen", &path_str(&scen), "--out", &solution,
    ]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
}

#[test]
fn malformed_scenario_json_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let (map, _) = gen_small(dir.path());
    let scen = dir.path().join("broken.scen");
    std::fs::write(&scen, "{ not json").unwrap();
    let solution = path_str(&dir.path().join("solution.json"));
    let out = run(&[
        "solve", "--map", &map, "--scen", &path_str(&scen), "--out", &solution,
    ]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
}

#[test]
fn unreachable_goal_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("wall.map");
    std::fs::write(&map, "type octile\nheight 3\nwidth 3\nmap\n.@.\n.@.\n.@.\n").unwrap();
    let scen = dir.path().join("wall.scen");
    std::fs::write(
        &scen,
        r#"{"map": "wall.map", "starts": [[0, 0]], "goals": [[2, 0]], "seed": 0}"#,
    )
    .unwrap();
    let solution = path_str(&dir.path().join("solution.json"));
    let out = run(&[
        "solve", "--map", &path_str(&map), "--scen", &path_str(&scen), "--out", &solution,
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(!Path::new(&solution).exists(), "no solution should be written on failure");
}

#[test]
fn infeasible_gen_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = path_str(&dir.path().join("toofull"));
    // 2×2 with no obstacles has 4 free cells; 5 robots cannot be placed.
    let out = run(&[
        "gen", "--width", "2", "--height", "2", "--obstacles", "0.0", "--robots", "5",
        "--goals", "0", "--seed", "1", "--out", &prefix,
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
}

#[test]
fn validate_flags_tampered_solution_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (map, scen) = gen_small(dir.path());
    let solution = path_str(&dir.path().join("solution.json"));
    let out = run(&[
        "solve", "--map", &map, "--scen", &scen, "--out", &solution, "--no-timing",
    ]);
    assert!(out.status.success(), "solve failed: {}", stderr(&out));

    // Teleport the first robot's second step off the map: an off-grid
    // cell is never free and never adjacent to its neighbors, so the
    // report must flag it whatever the instance looks like.
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&solution).unwrap()).unwrap();
    doc["paths"][0][1] = serde_json::json!([100, 100]);
    std::fs::write(&solution, serde_json::to_string_pretty(&doc).unwrap()).unwrap();

    let out = run(&["validate", "--map", &map, "--scen", &scen, "--solution", &solution]);
    assert_eq!(out.status.code(), Some(2), "stdout: {}", stdout(&out));
    assert!(stdout(&out).contains("Obstacle"), "stdout: {}", stdout(&out));
}

#[test]
fn validate_rejects_unparseable_solution_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let (map, scen) = gen_small(dir.path());
    let solution = dir.path().join("garbage.json");
    std::fs::write(&solution, "{{{{").unwrap();
    let out = run(&["validate", "--map", &map, "--scen", &scen, "--solution", &path_str(&solution)]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
}

#[test]
fn bench_writes_csv_and_solutions() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bench.json");
    std::fs::write(
        &config,
        r#"{
            "robot_counts": [2],
            "goal_counts": [2],
            "instances_per_cell": 2,
            "map_width": 8,
            "map_height": 8,
            "obstacle_ratio": 0.1,
            "time_limit_seconds": 30.0
        }"#,
    )
    .unwrap();
    let out_dir = dir.path().join("report");
    let out = run(&[
        "bench", "--config", &path_str(&config), "--out", &path_str(&out_dir), "--no-timing",
    ]);
    assert!(out.status.success(), "bench failed: {}", stderr(&out));

    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert!(csv.starts_with("n,m,instance,seed,solved,"));
    assert!(csv.contains("\nsummary\n"));
    assert!(out_dir.join("solutions").join("n2_m2_i0.json").exists());
    assert!(out_dir.join("solutions").join("n2_m2_i1.json").exists());
}

#[test]
fn help_and_usage_errors() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("gen"));
    assert!(stdout(&out).contains("solve"));

    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}
