//! One-sided Lipschitz bounds on downward jumps and the localized total
//! variation and time continuity estimates that follow from them.

use thiserror::Error;

use crate::mesh::l1_distance;
use crate::multi::{StepContext, StepObserver};

use super::{Check, DiagnosticsReport, INEQ_SLACK};

/// `D_j = max(ρ_{j−1} − ρ_j, 0)` on interior edges, zero on the two
/// boundary edges.
pub fn downward_jumps(field: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0; field.len() + 1];
    for j in 1..field.len() {
        d[j] = (field[j - 1] - field[j]).max(0.0);
    }
    d
}

/// `ψ(x) = x − ax²`.
pub fn psi(a: f64, x: f64) -> f64 {
    x - a * x * x
}

/// Cascade bound on `D_j` after `n + 1` steps, for an edge `j` and the
/// interface edge `j_np1` at the new time level. Inside the excluded band
/// `j_np1 − 2 ..= j_np1 + 1` there is no bound and `None` is returned.
pub fn osl_decay_envelope(n: usize, j: usize, j_np1: usize, a: f64) -> Option<f64> {
    let k = cascade_depth(n, j, std::slice::from_ref(&j_np1))?;
    Some(1.0 / (k as f64 * a))
}

/// Number of ψ-iterations that reach edge `j`: limited by the step count
/// and by the distance to the nearest excluded band.
fn cascade_depth(n: usize, j: usize, anchors: &[usize]) -> Option<usize> {
    let mut k = n + 1;
    for &ja in anchors {
        let d = if j + 2 <= ja {
            ja - 2 - j
        } else if j > ja + 1 {
            j - ja - 1
        } else {
            return None;
        };
        k = k.min(d);
    }
    (k > 0).then_some(k)
}

fn excluded(j: usize, anchors: &[usize]) -> bool {
    anchors.iter().any(|&ja| j + 2 >= ja && j <= ja + 1)
}

/// Checks, on every step with only single interfaces, the one-step ψ
/// bound and the cascade envelope away from the interfaces, and on every
/// step the ceiling `D ≤ 1/(λμ)`. The step counter behind the envelope is
/// reset whenever interfaces merge or split.
#[derive(Debug, Default)]
pub struct OslChecker {
    pub report: DiagnosticsReport,
    /// Steps since the last reset.
    steps: usize,
    /// `(step, edge)` pairs where the ψ bound failed.
    pub violations: Vec<(usize, usize)>,
}

impl StepObserver for OslChecker {
    fn on_step(&mut self, ctx: &StepContext) {
        let lambda = ctx.dt / ctx.dx;
        let mu = ctx.model.mu();
        let a = mu * lambda / 4.0;
        let d_n = downward_jumps(ctx.field_before);
        let d_np1 = downward_jumps(ctx.field_after);

        let ceiling = 1.0 / (lambda * mu);
        let top = d_np1.iter().copied().fold(0.0, f64::max);
        self.report.push(Check::OslCeiling, ctx.n + 1, top, ceiling + INEQ_SLACK);

        let merged = ctx.clusters.iter().any(|c| c.is_merged());
        if ctx.regrouped || merged {
            self.steps = 0;
        }
        if merged || d_n.len() != d_np1.len() {
            return;
        }
        let anchors: Vec<usize> = (0..ctx.after.anchors().len())
            .map(|k| ctx.after.anchor_edge(k))
            .collect();
        let last = d_n.len() - 1;
        let mut worst_psi = f64::NEG_INFINITY;
        let mut worst_env = f64::NEG_INFINITY;
        for j in 1..last {
            if excluded(j, &anchors) {
                continue;
            }
            let m = d_n[j - 1].max(d_n[j]).max(d_n[j + 1]);
            let gap = d_np1[j] - psi(a, m);
            if gap > INEQ_SLACK {
                self.violations.push((ctx.n + 1, j));
            }
            worst_psi = worst_psi.max(gap);
            if let Some(k) = cascade_depth(self.steps, j, &anchors) {
                worst_env = worst_env.max(d_np1[j] - 1.0 / (k as f64 * a));
            }
        }
        if worst_psi.is_finite() {
            self.report.push(Check::OslPsi, ctx.n + 1, worst_psi, INEQ_SLACK);
        }
        if worst_env.is_finite() {
            self.report.push(Check::OslEnvelope, ctx.n + 1, worst_env, INEQ_SLACK);
        }
        self.steps += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PreconditionError {
    #[error("window needs 3Δx ≤ ε < X, got ε = {eps}, X = {x_width}, Δx = {dx}")]
    Window { eps: f64, x_width: f64, dx: f64 },
    #[error("time {t} is earlier than ε/(2L) = {min}")]
    TooEarly { t: f64, min: f64 },
}

/// Window parameters `ε` and `X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvWindow {
    pub eps: f64,
    pub width: f64,
}

impl TvWindow {
    /// `ε = max(0.1, 3Δx)`, `X = 1`.
    pub fn default_for(dx: f64) -> Self {
        Self {
            eps: (3.0 * dx).max(0.1),
            width: 1.0,
        }
    }

    /// `Λ = 1 + 6X/(aε)`.
    pub fn lambda_bound(&self, a: f64) -> f64 {
        1.0 + 6.0 * self.width / (a * self.eps)
    }

    pub fn validate(&self, dx: f64, t: f64, lipschitz: f64) -> Result<(), PreconditionError> {
        if !(3.0 * dx <= self.eps && self.eps < self.width) {
            return Err(PreconditionError::Window {
                eps: self.eps,
                x_width: self.width,
                dx,
            });
        }
        let min = self.eps / (2.0 * lipschitz);
        if t < min {
            return Err(PreconditionError::TooEarly { t, min });
        }
        Ok(())
    }

    /// `]y − X, y − ε[` and `]y + ε, y + X[`, each clipped to stay `ε`
    /// away from the neighbouring interfaces and inside the domain.
    pub fn windows(&self, y: f64, lower: f64, upper: f64) -> [(f64, f64); 2] {
        [
            ((y - self.width).max(lower + self.eps), y - self.eps),
            (y + self.eps, (y + self.width).min(upper - self.eps)),
        ]
    }
}

/// Total variation of the cell values whose cells lie inside `window`.
pub fn localized_tv(edges: &[f64], field: &[f64], window: (f64, f64)) -> f64 {
    let inside: Vec<f64> = field
        .iter()
        .zip(edges.windows(2))
        .filter(|(_, w)| w[0] >= window.0 && w[1] <= window.1)
        .map(|(v, _)| *v)
        .collect();
    inside.windows(2).map(|p| (p[1] - p[0]).abs()).sum()
}

/// `2Δx + L(2Λ + 1)Δt`.
pub fn time_continuity_bound(dx: f64, dt: f64, lipschitz: f64, lambda_bound: f64) -> f64 {
    2.0 * dx + lipschitz * (2.0 * lambda_bound + 1.0) * dt
}

/// Localized TV bound and one-step L1 time continuity in windows beside
/// each interface, on every step that meets the window preconditions.
#[derive(Debug)]
pub struct TvChecker {
    pub window: Option<TvWindow>,
    pub report: DiagnosticsReport,
    /// Largest `(tv, Λ)` pair seen.
    pub worst_tv: (f64, f64),
}

impl TvChecker {
    pub fn new(window: Option<TvWindow>) -> Self {
        Self {
            window,
            report: DiagnosticsReport::default(),
            worst_tv: (0.0, 0.0),
        }
    }
}

impl Default for TvChecker {
    fn default() -> Self {
        Self::new(None)
    }
}

impl StepObserver for TvChecker {
    fn on_step(&mut self, ctx: &StepContext) {
        let win = self.window.unwrap_or_else(|| TvWindow::default_for(ctx.dx));
        let lip = ctx.model.lipschitz();
        if win.validate(ctx.dx, ctx.t, lip).is_err() {
            return;
        }
        let a = ctx.model.mu() * ctx.dt / (4.0 * ctx.dx);
        let big = win.lambda_bound(a);
        let tc_bound = time_continuity_bound(ctx.dx, ctx.dt, lip, big);
        let ys: Vec<f64> = ctx.after.anchors().iter().map(|a| a.y).collect();
        let (x_lo, x_hi) = (ctx.before_edges[0], ctx.before_edges[ctx.before_edges.len() - 1]);
        let mut worst_tv = f64::NEG_INFINITY;
        let mut worst_tc = f64::NEG_INFINITY;
        for (k, &y) in ys.iter().enumerate() {
            let lower = if k > 0 { ys[k - 1] } else { x_lo - win.eps };
            let upper = ys.get(k + 1).copied().unwrap_or(x_hi + win.eps);
            for w in win.windows(y, lower, upper) {
                if w.1 <= w.0 {
                    continue;
                }
                let tv = localized_tv(ctx.after_edges, ctx.field_after, w);
                worst_tv = worst_tv.max(tv);
                if tv > self.worst_tv.0 {
                    self.worst_tv = (tv, big);
                }
                let inc = l1_distance(
                    ctx.before_edges,
                    ctx.field_before,
                    ctx.after_edges,
                    ctx.field_after,
                    w,
                );
                worst_tc = worst_tc.max(inc);
            }
        }
        if worst_tv.is_finite() {
            self.report.push(Check::LocalTv, ctx.n + 1, worst_tv, big);
            self.report
                .push(Check::TimeContinuity, ctx.n + 1, worst_tc, tc_bound + INEQ_SLACK);
        }
    }
}
