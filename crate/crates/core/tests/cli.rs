use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_lwr");

fn lwr(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = "\
[domain]
x_min = -1
x_max = 1
dx = 0.05
lambda = 0.4
horizon = 0.5

[initial]
preset = piecewise
breaks = 0.2
values = 0.7, 0.2

[interface]
id = 1
path = 0:0, 0.5:0.05
constraint = 0:0.5:0.1

[output]
snapshots = 0, 0.5
";

#[test]
fn simulate_check_and_export() {
    let dir = TempDir::new().unwrap();
    let scenario = write(&dir, "small.lwr", SMALL);
    let out = dir.path().join("run");
    let o = lwr(&["simulate", scenario.to_str().unwrap(), "--out", out.to_str().unwrap(), "--strict"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["scenario.lwr", "snapshots.csv", "cells_0.csv", "cells_1.csv", "final.csv", "overlay.csv", "diagnostics.txt"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }

    let o = lwr(&["check", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("archive reproduced"));

    let plot = dir.path().join("plot");
    let o = lwr(&["export", out.to_str().unwrap(), "--out", plot.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(plot.join("snapshot_0.csv").is_file());
    assert!(plot.join("overlay.csv").is_file());
}

#[test]
fn tampered_archive_fails_check() {
    let dir = TempDir::new().unwrap();
    let scenario = write(&dir, "small.lwr", SMALL);
    let out = dir.path().join("run");
    assert_eq!(code(&lwr(&["simulate", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let path = out.join("final.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let row = lines.len() / 2;
    let mut fields: Vec<String> = lines[row].split(',').map(String::from).collect();
    let v: f64 = fields[2].parse().unwrap();
    fields[2] = format!("{:?}", if v > 0.5 { v - 1e-6 } else { v + 1e-6 });
    lines[row] = fields.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let o = lwr(&["check", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("cell values differ"));
}

#[test]
fn invalid_scenarios_exit_with_2() {
    let dir = TempDir::new().unwrap();
    let bad_q = write(&dir, "q.lwr", &SMALL.replace("0:0.5:0.1", "0:0.5:0.3"));
    let o = lwr(&["simulate", bad_q.to_str().unwrap(), "--out", dir.path().join("a").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("interface.1"));

    let syntax = write(&dir, "s.lwr", &SMALL.replace("[initial]", "[initial\n"));
    assert_eq!(code(&lwr(&["simulate", syntax.to_str().unwrap()])), 2);
    assert_eq!(code(&lwr(&["simulate", "/nonexistent/x.lwr"])), 2);
    assert_eq!(code(&lwr(&["check", dir.path().to_str().unwrap()])), 2);
}

#[test]
fn inadmissible_step_average_exits_with_3() {
    // Both segments are admissible, but the step straddling t = 0.5 averages
    // to a constraint above the maximum of the averaged shifted flux.
    let dir = TempDir::new().unwrap();
    let text = "\
[domain]
x_min = -1
x_max = 0.98
dx = 0.03
lambda = 0.3
horizon = 1

[initial]
preset = constant
value = 0.3

[interface]
id = 1
path = 0:0, 0.5:0, 1:0.2
constraint = 0:0.5:0.24, 0.5:1:0.085
";
    let p = write(&dir, "step.lwr", text);
    let o = lwr(&["simulate", p.to_str().unwrap(), "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("inadmissible at step"));
}

#[test]
fn refinement_reports_distance() {
    let dir = TempDir::new().unwrap();
    let scenario = write(&dir, "small.lwr", SMALL);
    let out = dir.path().join("run");
    let o = lwr(&["simulate", scenario.to_str().unwrap(), "--out", out.to_str().unwrap(), "--refine", "2"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("L1 distance between dx and dx/2"));
    assert!(out.join("refined_2").join("final.csv").is_file());
    assert_eq!(code(&lwr(&["simulate", scenario.to_str().unwrap(), "--refine", "1"])), 2);
}

#[test]
fn riemann_prints_the_saturated_fan() {
    let o = lwr(&["riemann", "--s", "0", "--q", "0.1", "--left", "0.5", "--right", "0.5", "--t", "1", "--points", "9"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let rows: Vec<(f64, f64)> = out
        .lines()
        .skip(1)
        .map(|l| {
            let (x, r) = l.split_once(',').unwrap();
            (x.parse().unwrap(), r.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 9);
    let hat = (1.0 + 0.6f64.sqrt()) / 2.0;
    let check = (1.0 - 0.6f64.sqrt()) / 2.0;
    // Shocks leave the interface at speeds ±(√0.6 − 1/2) ≈ ±0.387 and the
    // germ states fill the gap between them.
    let at = |x: f64| rows.iter().find(|r| (r.0 - x).abs() < 1e-12).unwrap().1;
    assert!((at(-0.25) - hat).abs() < 1e-12);
    assert!((at(0.25) - check).abs() < 1e-12);
    assert_eq!(at(-0.5), 0.5);
    assert_eq!(at(0.5), 0.5);

    let bad = lwr(&["riemann", "--s", "-0.2", "--q", "0.1", "--left", "0.5", "--right", "0.5", "--t", "1"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let scenario = corpus("two_interfaces.lwr");
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let o = Command::new(BIN)
            .env("LWR_THREADS", threads)
            .args(["simulate", scenario.to_str().unwrap(), "--out", out.to_str().unwrap(), "--refine", "2"])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        (fs::read_to_string(out.join("final.csv")).unwrap(), stdout(&o))
    };
    let (a, out_a) = run("1", "one");
    let (b, out_b) = run("4", "four");
    assert_eq!(a, b);
    let distance = |s: &str| s.lines().find(|l| l.starts_with("L1 distance")).unwrap().to_string();
    assert_eq!(distance(&out_a), distance(&out_b));
}
