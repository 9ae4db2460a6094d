//! Numerical verification instruments.
//!
//! Most checkers are [`StepObserver`]s that record one [`CheckRecord`] per
//! step with the worst value seen in that step.

pub mod entropy;
pub mod osl;
pub mod riemann;
pub mod stability;

use std::fmt;

use crate::flux::GermClass;
use crate::multi::{StepContext, StepObserver, TransitionContext};

pub use entropy::{BumpFamily, ConstraintResidual, EntropyChecker, EntropyResidual};
pub use osl::{osl_decay_envelope, OslChecker, PreconditionError, TvChecker, TvWindow};
pub use riemann::{classical_riemann, exact_constrained_riemann, RiemannProblem};
pub use stability::{l1_stability_check, RunSummary, StabilityError, StabilityReport};

/// Absolute slack on `[0, 1]` for computed densities.
pub const BOUNDS_SLACK: f64 = 1e-12;
/// Allowed mass drift per step or transition.
pub const MASS_TOL: f64 = 1e-10;
/// Slack for discrete inequalities.
pub const INEQ_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Check {
    Bounds,
    Mass,
    InterfaceFlux,
    Entropy,
    OslPsi,
    OslEnvelope,
    OslCeiling,
    LocalTv,
    TimeContinuity,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Bounds => "bounds",
            Check::Mass => "mass",
            Check::InterfaceFlux => "interface_flux",
            Check::Entropy => "entropy",
            Check::OslPsi => "osl_psi",
            Check::OslEnvelope => "osl_envelope",
            Check::OslCeiling => "osl_ceiling",
            Check::LocalTv => "local_tv",
            Check::TimeContinuity => "time_continuity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::all().into_iter().find(|c| c.name() == s)
    }

    pub fn all() -> [Check; 9] {
        [
            Check::Bounds,
            Check::Mass,
            Check::InterfaceFlux,
            Check::Entropy,
            Check::OslPsi,
            Check::OslEnvelope,
            Check::OslCeiling,
            Check::LocalTv,
            Check::TimeContinuity,
        ]
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one check at one step: `value ≤ bound` passes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckRecord {
    pub check: Check,
    pub step: usize,
    pub value: f64,
    pub bound: f64,
}

impl CheckRecord {
    pub fn passed(&self) -> bool {
        self.value <= self.bound
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsReport {
    pub records: Vec<CheckRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckSummary {
    pub check: Check,
    pub count: usize,
    pub failures: usize,
    /// Largest `value − bound` seen.
    pub worst_margin: f64,
}

impl DiagnosticsReport {
    pub fn push(&mut self, check: Check, step: usize, value: f64, bound: f64) {
        self.records.push(CheckRecord {
            check,
            step,
            value,
            bound,
        });
    }

    pub fn extend(&mut self, other: DiagnosticsReport) {
        self.records.extend(other.records);
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.passed())
    }

    pub fn all_passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn summary(&self) -> Vec<CheckSummary> {
        let mut out: Vec<CheckSummary> = Vec::new();
        for r in &self.records {
            let margin = r.value - r.bound;
            match out.iter_mut().find(|s| s.check == r.check) {
                Some(s) => {
                    s.count += 1;
                    s.failures += usize::from(!r.passed());
                    s.worst_margin = s.worst_margin.max(margin);
                }
                None => out.push(CheckSummary {
                    check: r.check,
                    count: 1,
                    failures: usize::from(!r.passed()),
                    worst_margin: margin,
                }),
            }
        }
        out.sort_by_key(|s| s.check);
        out
    }
}

fn mass(edges: &[f64], field: &[f64]) -> f64 {
    field
        .iter()
        .zip(edges.windows(2))
        .map(|(v, w)| v * (w[1] - w[0]))
        .sum()
}

/// Distance of the computed field from `[0, 1]`.
#[derive(Debug, Default)]
pub struct BoundsMonitor {
    pub report: DiagnosticsReport,
}

impl StepObserver for BoundsMonitor {
    fn on_step(&mut self, ctx: &StepContext) {
        let excess = ctx
            .field_after
            .iter()
            .map(|&v| if v.is_finite() { (-v).max(v - 1.0) } else { f64::INFINITY })
            .fold(f64::NEG_INFINITY, f64::max);
        self.report.push(Check::Bounds, ctx.n + 1, excess, BOUNDS_SLACK);
    }
}

/// Mass balance: change of `Σρ·width` against the boundary fluxes.
#[derive(Debug, Default)]
pub struct MassMonitor {
    pub report: DiagnosticsReport,
    pub history: Vec<(usize, f64)>,
}

impl StepObserver for MassMonitor {
    fn on_transition(&mut self, ctx: &TransitionContext) {
        let drift = mass(ctx.after_edges, ctx.field_after) - mass(ctx.before_edges, ctx.field_before);
        self.report.push(Check::Mass, ctx.n, drift.abs(), MASS_TOL);
    }

    fn on_step(&mut self, ctx: &StepContext) {
        let before = mass(ctx.before_edges, ctx.field_before);
        let after = mass(ctx.after_edges, ctx.field_after);
        let (fl, fr) = ctx.output.boundary_fluxes();
        let drift = after - before + (fr - fl) * ctx.dt;
        if self.history.is_empty() {
            self.history.push((ctx.n, before));
        }
        self.history.push((ctx.n + 1, after));
        self.report.push(Check::Mass, ctx.n + 1, drift.abs(), MASS_TOL);
    }
}

/// Discrete interface traces and fluxes.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub n: usize,
    pub t: f64,
    pub members: Vec<u32>,
    pub y: f64,
    pub s: f64,
    pub q: f64,
    pub f_int: f64,
    pub left: f64,
    pub right: f64,
    pub class: GermClass,
}

/// Tolerance used to classify discrete traces.
pub const TRACE_GERM_TOL: f64 = 1e-3;

#[derive(Debug, Default)]
pub struct TraceRecorder {
    pub traces: Vec<TraceRecord>,
    pub report: DiagnosticsReport,
}

impl StepObserver for TraceRecorder {
    fn on_step(&mut self, ctx: &StepContext) {
        for (k, c) in ctx.clusters.iter().enumerate() {
            let fl = &c.flux;
            self.traces.push(TraceRecord {
                n: ctx.n,
                t: ctx.t,
                members: c.members.clone(),
                y: ctx.before.anchors()[k].y,
                s: fl.s,
                q: fl.q,
                f_int: fl.f_int,
                left: fl.left_trace,
                right: fl.right_trace,
                class: ctx.model.classify_germ_with_tol(
                    fl.s,
                    fl.q,
                    fl.left_trace,
                    fl.right_trace,
                    TRACE_GERM_TOL,
                ),
            });
            self.report.push(Check::InterfaceFlux, ctx.n, fl.f_int - fl.q, 0.0);
        }
    }
}

/// Collects several observers' reports.
pub fn merge_reports<I: IntoIterator<Item = DiagnosticsReport>>(reports: I) -> DiagnosticsReport {
    let mut out = DiagnosticsReport::default();
    for r in reports {
        out.extend(r);
    }
    out.records.sort_by(|a, b| a.step.cmp(&b.step).then(a.check.cmp(&b.check)));
    out
}
