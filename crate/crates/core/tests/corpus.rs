use std::fs;
use std::path::{Path, PathBuf};

use lwr_core::archive::{artifact_regions, read_archive, write_archive};
use lwr_core::diagnostics::{l1_stability_check, RunSummary};
use lwr_core::multi::Simulation;
use lwr_core::run::{run_refinement, run_scenario};
use lwr_core::scenario::{parse_scenario, serialize_scenario, InitialPreset, Scenario};

fn corpus() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "lwr"))
        .collect();
    files.sort();
    assert!(files.len() >= 5);
    files
}

#[test]
fn corpus_files_round_trip() {
    for path in corpus() {
        let text = fs::read_to_string(&path).unwrap();
        let s = parse_scenario(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        s.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let canonical = serialize_scenario(&s);
        assert_eq!(parse_scenario(&canonical).unwrap(), s, "{}", path.display());
    }
}

#[test]
fn corpus_runs_pass_every_check_and_archive_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    for path in corpus() {
        let s = Scenario::load(&path).unwrap();
        let a = run_scenario(&s).unwrap();
        let failures: Vec<_> = a.report.failures().take(5).collect();
        assert!(failures.is_empty(), "{}: {failures:?}", path.display());
        assert_eq!(a.snapshots.len(), s.output.snapshots.len());

        let dir = tmp.path().join(path.file_stem().unwrap());
        write_archive(&a, &dir).unwrap();
        assert_eq!(read_archive(&dir).unwrap(), a, "{}", path.display());
    }
}

#[test]
fn refinement_brings_runs_together() {
    let s = Scenario::load(
        &Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/moving_bottleneck.lwr"),
    )
    .unwrap();
    let mut coarse = s.clone();
    coarse.domain.dx *= 4.0;
    let (_, _, d_coarse) = run_refinement(&coarse, 2).unwrap();
    let mut mid = s;
    mid.domain.dx *= 2.0;
    let (_, _, d_fine) = run_refinement(&mid, 2).unwrap();
    assert!(d_fine < d_coarse, "{d_fine} vs {d_coarse}");
}

#[test]
fn initial_data_stability_on_the_corpus() {
    // Perturbing the datum alone: the constraint term vanishes and the
    // bound reduces to L1 contraction. The outermost states are kept so the
    // boundary inflow is the same for both runs.
    for name in ["moving_bottleneck.lwr", "two_interfaces.lwr", "near_miss.lwr"] {
        let s = Scenario::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name))
            .unwrap();
        let mut t = s.clone();
        t.initial = match &s.initial {
            InitialPreset::Constant(v) => InitialPreset::Constant((v + 0.05).min(1.0)),
            InitialPreset::Indicator { a, b, value } => InitialPreset::Indicator {
                a: *a,
                b: *b,
                value: value * 0.9,
            },
            InitialPreset::Piecewise { breaks, values } => InitialPreset::Piecewise {
                breaks: breaks.clone(),
                values: values
                    .iter()
                    .enumerate()
                    .map(|(k, v)| if k == 0 || k + 1 == values.len() { *v } else { v * 0.9 })
                    .collect(),
            },
        };
        let run = |s: &Scenario| {
            let mut sim = Simulation::new(&s.problem().unwrap()).unwrap();
            let mut summary = RunSummary::default();
            sim.run(&mut [&mut summary]).unwrap();
            summary
        };
        let r = l1_stability_check(&run(&s), &run(&t)).unwrap();
        assert!(r.lhs <= r.rhs + 1e-12, "{name}: {r:?}");
    }
}

#[test]
fn tow_truck_artifact_regions_are_reported() {
    let s = Scenario::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/tow_truck.lwr"))
        .unwrap();
    let a = run_scenario(&s).unwrap();
    let regions = artifact_regions(&a);
    // One region per snapshot taken at or after the crossing time.
    let after = a.snapshots.iter().filter(|p| p.time >= 6.3).count();
    assert!(after >= 3);
    assert_eq!(regions.len(), after);
    assert!(regions.iter().all(|r| (r.x_hi - r.x_lo - 20.0 * s.domain.dx).abs() < 1e-9));
}
