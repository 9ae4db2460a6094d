//! Running a scenario end to end: snapshots, interface overlay and the
//! per-step diagnostics.

use thiserror::Error;

use crate::diagnostics::{
    merge_reports, BoundsMonitor, Check, DiagnosticsReport, EntropyChecker, MassMonitor,
    OslChecker, TraceRecord, TraceRecorder, TvChecker,
};
use crate::mesh::l1_distance;
use crate::multi::{Simulation, StartContext, StepContext, StepObserver};
use crate::scenario::{Scenario, ValidationError};
use crate::scheme::SchemeError;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid scenario: {0}")]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

/// Cell partition and values at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArchive {
    pub scenario: Scenario,
    pub dt: f64,
    pub n_steps: usize,
    /// One per requested snapshot time, in order.
    pub snapshots: Vec<Snapshot>,
    pub final_state: Snapshot,
    /// Interface data at every step, one row per interface cluster.
    pub overlay: Vec<TraceRecord>,
    pub report: DiagnosticsReport,
}

/// Step index closest to `t`.
pub fn snapshot_step(t: f64, dt: f64, n_steps: usize) -> usize {
    ((t / dt).round() as usize).min(n_steps)
}

struct SnapshotRecorder {
    steps: Vec<usize>,
    dt: f64,
    taken: Vec<Snapshot>,
}

impl SnapshotRecorder {
    fn take(&mut self, step: usize, edges: &[f64], values: &[f64]) {
        for _ in self.steps.iter().filter(|&&s| s == step) {
            self.taken.push(Snapshot {
                step,
                time: step as f64 * self.dt,
                edges: edges.to_vec(),
                values: values.to_vec(),
            });
        }
    }
}

impl StepObserver for SnapshotRecorder {
    fn on_start(&mut self, ctx: &StartContext) {
        self.take(0, ctx.edges, ctx.field);
    }

    fn on_step(&mut self, ctx: &StepContext) {
        self.take(ctx.n + 1, ctx.after_edges, ctx.field_after);
    }
}

/// Runs a validated scenario to its horizon.
pub fn run_scenario(scenario: &Scenario) -> Result<RunArchive, RunError> {
    scenario.validate()?;
    let problem = scenario.problem()?;
    let mut sim = Simulation::new(&problem)?;
    let (dt, n_steps) = (sim.dt(), sim.n_steps());
    let wanted = &scenario.output.diagnostics;
    let want = |c: Check| wanted.contains(&c);

    let mut snaps = SnapshotRecorder {
        steps: scenario
            .output
            .snapshots
            .iter()
            .map(|&t| snapshot_step(t, dt, n_steps))
            .collect(),
        dt,
        taken: Vec::new(),
    };
    let mut traces = TraceRecorder::default();
    let mut bounds = BoundsMonitor::default();
    let mut mass = MassMonitor::default();
    let mut entropy = EntropyChecker::default();
    let mut osl = OslChecker::default();
    let mut tv = TvChecker::default();
    {
        let mut observers: Vec<&mut dyn StepObserver> = vec![&mut snaps, &mut traces];
        if want(Check::Bounds) {
            observers.push(&mut bounds);
        }
        if want(Check::Mass) {
            observers.push(&mut mass);
        }
        if want(Check::Entropy) {
            observers.push(&mut entropy);
        }
        if want(Check::OslPsi) || want(Check::OslEnvelope) || want(Check::OslCeiling) {
            observers.push(&mut osl);
        }
        if want(Check::LocalTv) || want(Check::TimeContinuity) {
            observers.push(&mut tv);
        }
        sim.run(&mut observers)?;
    }
    let mut report = merge_reports([
        bounds.report,
        mass.report,
        traces.report,
        entropy.report,
        osl.report,
        tv.report,
    ]);
    report.records.retain(|r| want(r.check));
    Ok(RunArchive {
        scenario: scenario.clone(),
        dt,
        n_steps,
        snapshots: snaps.taken,
        final_state: Snapshot {
            step: n_steps,
            time: n_steps as f64 * dt,
            edges: sim.edges().to_vec(),
            values: sim.field().to_vec(),
        },
        overlay: traces.traces,
        report,
    })
}

/// Runs the scenario at `Δx` and `Δx/factor` in parallel and returns both
/// archives with the L1 distance between their final states.
pub fn run_refinement(
    scenario: &Scenario,
    factor: u32,
) -> Result<(RunArchive, RunArchive, f64), RunError> {
    let fine = scenario.refined(factor);
    let (a, b) = rayon::join(|| run_scenario(scenario), || run_scenario(&fine));
    let (a, b) = (a?, b?);
    let d = l1_distance(
        &a.final_state.edges,
        &a.final_state.values,
        &b.final_state.edges,
        &b.final_state.values,
        (f64::NEG_INFINITY, f64::INFINITY),
    );
    Ok((a, b, d))
}

/// Measure of `{ρ > threshold}` left of `y`.
pub fn queue_length(snapshot_edges: &[f64], values: &[f64], y: f64, threshold: f64) -> f64 {
    values
        .iter()
        .zip(snapshot_edges.windows(2))
        .filter(|(v, w)| **v > threshold && w[0] < y)
        .map(|(_, w)| w[1].min(y) - w[0])
        .fold(0.0, |a, b| a + b)
}

/// Excess variation in `[x_lo, x_hi]`: total variation on each side of
/// `split` minus the net change on that side. Zero for profiles that are
/// monotone on both sides; positive when a bump or dip is present.
pub fn oscillation(edges: &[f64], values: &[f64], x_lo: f64, x_hi: f64, split: f64) -> f64 {
    let side = |a: f64, b: f64| -> f64 {
        let v: Vec<f64> = values
            .iter()
            .zip(edges.windows(2))
            .filter(|(_, w)| w[0] >= a && w[1] <= b)
            .map(|(v, _)| *v)
            .collect();
        if v.len() < 2 {
            return 0.0;
        }
        let tv: f64 = v.windows(2).map(|p| (p[1] - p[0]).abs()).sum();
        tv - (v[v.len() - 1] - v[0]).abs()
    };
    side(x_lo, split) + side(split, x_hi)
}
