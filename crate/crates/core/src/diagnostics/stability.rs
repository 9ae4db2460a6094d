//! L1 stability with respect to initial data and constraints.

use thiserror::Error;

use crate::mesh::l1_distance;
use crate::multi::{StartContext, StepContext, StepObserver};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("runs are not comparable: {0}")]
    ConfigMismatch(String),
}

/// What a paired comparison needs from one run. Fill it by passing it as
/// an observer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub dx: f64,
    pub dt: f64,
    pub initial_edges: Vec<f64>,
    pub initial_field: Vec<f64>,
    pub final_edges: Vec<f64>,
    pub final_field: Vec<f64>,
    /// Interface positions at every step, one row per step.
    pub positions: Vec<Vec<f64>>,
    /// Effective constraint of each interface cluster at every step.
    pub constraints: Vec<Vec<f64>>,
}

impl StepObserver for RunSummary {
    fn on_start(&mut self, ctx: &StartContext) {
        self.dx = ctx.dx;
        self.dt = ctx.dt;
        self.initial_edges = ctx.edges.to_vec();
        self.initial_field = ctx.field.to_vec();
        self.final_edges = ctx.edges.to_vec();
        self.final_field = ctx.field.to_vec();
    }

    fn on_step(&mut self, ctx: &StepContext) {
        self.positions
            .push(ctx.before.anchors().iter().map(|a| a.y).collect());
        self.constraints
            .push(ctx.clusters.iter().map(|c| c.flux.q).collect());
        self.final_edges = ctx.after_edges.to_vec();
        self.final_field = ctx.field_after.to_vec();
    }
}

/// Result of a paired comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    /// `‖ρ_a(T) − ρ_b(T)‖₁`.
    pub lhs: f64,
    /// `‖ρ_a(0) − ρ_b(0)‖₁ + 2 Σ_n Σ_k |q_a − q_b| Δt`.
    pub rhs: f64,
    /// `max(0, lhs − rhs) / (Δx + Δt)`.
    pub constant: f64,
}

pub fn l1_stability_check(a: &RunSummary, b: &RunSummary) -> Result<StabilityReport, StabilityError> {
    let mismatch = |what: &str| Err(StabilityError::ConfigMismatch(what.to_string()));
    if a.dx != b.dx || a.dt != b.dt {
        return mismatch("mesh size or time step differ");
    }
    if a.initial_edges != b.initial_edges || a.final_edges != b.final_edges {
        return mismatch("cell layouts differ");
    }
    if a.positions != b.positions || a.constraints.len() != b.constraints.len() {
        return mismatch("interface paths differ");
    }
    let window = (f64::NEG_INFINITY, f64::INFINITY);
    let lhs = l1_distance(&a.final_edges, &a.final_field, &b.final_edges, &b.final_field, window);
    let mut rhs = l1_distance(
        &a.initial_edges,
        &a.initial_field,
        &b.initial_edges,
        &b.initial_field,
        window,
    );
    for (qa, qb) in a.constraints.iter().zip(&b.constraints) {
        if qa.len() != qb.len() {
            return mismatch("interface clusters differ");
        }
        rhs += 2.0 * a.dt * qa.iter().zip(qb).map(|(x, y)| (x - y).abs()).sum::<f64>();
    }
    Ok(StabilityReport {
        lhs,
        rhs,
        constant: (lhs - rhs).max(0.0) / (a.dx + a.dt),
    })
}
