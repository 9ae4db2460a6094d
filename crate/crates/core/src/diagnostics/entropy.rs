//! Discrete entropy inequalities and the approximate entropy / constraint
//! inequalities tested against smooth bumps.

use crate::flux::FluxModel;
use crate::mesh::CutKind;
use crate::multi::{StartContext, StepContext, StepObserver};

use super::{Check, DiagnosticsReport, INEQ_SLACK};

/// `κ ∈ {0, 0.05, …, 1}`.
pub fn kappa_grid() -> Vec<f64> {
    (0..=20).map(|k| k as f64 * 0.05).collect()
}

/// Checks the cell entropy inequality on every control volume of every
/// step. The recorded value is `−min slack`, so a record passes when the
/// worst slack is at least `−1e-10`.
#[derive(Debug)]
pub struct EntropyChecker {
    pub kappas: Vec<f64>,
    pub report: DiagnosticsReport,
    /// Number of (volume, κ) pairs tested.
    pub tested: usize,
}

impl Default for EntropyChecker {
    fn default() -> Self {
        Self {
            kappas: kappa_grid(),
            report: DiagnosticsReport::default(),
            tested: 0,
        }
    }
}

impl StepObserver for EntropyChecker {
    fn on_step(&mut self, ctx: &StepContext) {
        let m = ctx.model;
        let field = ctx.field_before;
        let last = field.len() - 1;
        let ow: Vec<f64> = ctx.before_edges.windows(2).map(|w| w[1] - w[0]).collect();
        let nw: Vec<f64> = ctx.after_edges.windows(2).map(|w| w[1] - w[0]).collect();
        let mut worst = f64::INFINITY;
        for &kappa in &self.kappas {
            let phi = |kind: CutKind, e: usize| -> (f64, f64) {
                match kind {
                    CutKind::Node(_) => {
                        let a = field[e.saturating_sub(1)];
                        let b = field[e.min(last)];
                        let v = m.engquist_osher(a.max(kappa), b.max(kappa))
                            - m.engquist_osher(a.min(kappa), b.min(kappa));
                        (v, 0.0)
                    }
                    CutKind::Interface(k) => {
                        let f = &ctx.output.interfaces[k];
                        let (a, b) = (f.left_trace, f.right_trace);
                        let v = m.interface_flux(f.s, f.q, a.max(kappa), b.max(kappa))
                            - m.interface_flux(f.s, f.q, a.min(kappa), b.min(kappa));
                        (v, 0.5 * m.remainder(f.s, kappa, f.q))
                    }
                }
            };
            for v in &ctx.output.plan.volumes {
                let (pl, rl) = phi(v.left.kind, v.left.old_edge);
                let (pr, rr) = phi(v.right.kind, v.right.old_edge);
                let before: f64 = v.old.clone().map(|i| (field[i] - kappa).abs() * ow[i]).sum();
                let width: f64 = v.new.clone().map(|i| nw[i]).sum();
                let lhs = (ctx.field_after[v.new.start] - kappa).abs() * width;
                let rhs = before - (pr - pl) * ctx.dt + (rl + rr) * ctx.dt;
                worst = worst.min(rhs - lhs);
                self.tested += 1;
            }
        }
        self.report.push(Check::Entropy, ctx.n, -worst, INEQ_SLACK);
    }
}

/// `b(z) = exp(−1/(1 − z²))` on `]−1, 1[` and its first derivative.
fn bump(z: f64) -> (f64, f64) {
    if z.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let d = 1.0 - z * z;
    let b = (-1.0 / d).exp();
    (b, b * (-2.0 * z / (d * d)))
}

/// Tensor bump `b((x − xc)/rx) · b((t − tc)/rt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub xc: f64,
    pub tc: f64,
    pub rx: f64,
    pub rt: f64,
}

impl Bump {
    /// `(φ, ∂ₜφ, ∂ₓφ)`.
    pub fn eval(&self, x: f64, t: f64) -> (f64, f64, f64) {
        let (bx, dbx) = bump((x - self.xc) / self.rx);
        let (bt, dbt) = bump((t - self.tc) / self.rt);
        (bx * bt, bx * dbt / self.rt, dbx * bt / self.rx)
    }

    pub fn support_x(&self) -> (f64, f64) {
        (self.xc - self.rx, self.xc + self.rx)
    }
}

/// The fixed family of twelve test functions: four centres, three widths.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpFamily {
    pub bumps: Vec<Bump>,
}

impl BumpFamily {
    pub fn new(centres: &[(f64, f64)], widths: &[(f64, f64)]) -> Self {
        let bumps = centres
            .iter()
            .flat_map(|&(xc, tc)| widths.iter().map(move |&(rx, rt)| Bump { xc, tc, rx, rt }))
            .collect();
        Self { bumps }
    }

    /// Four centres spread over the space-time window `[a, b] × ]t0, t1[`,
    /// two of them near the given focus point. Supports are shrunk to stay
    /// inside the window.
    pub fn standard(a: f64, b: f64, time: (f64, f64), focus: f64) -> Self {
        let len = b - a;
        let (t0, t1) = time;
        let at = |r: f64| t0 + r * (t1 - t0);
        let centres = [
            (focus, at(0.5)),
            (focus + 0.05 * len, at(0.4)),
            (a + 0.3 * len, at(0.5)),
            (a + 0.7 * len, at(0.6)),
        ];
        let widths = [
            (0.08 * len, 0.3 * (t1 - t0)),
            (0.15 * len, 0.35 * (t1 - t0)),
            (0.25 * len, 0.45 * (t1 - t0)),
        ];
        let bumps = centres
            .iter()
            .flat_map(|&(xc, tc)| {
                widths.iter().map(move |&(rx, rt)| Bump {
                    xc,
                    tc,
                    rx: rx.min(xc - a).min(b - xc),
                    rt: rt.min(tc - t0).min(t1 - tc),
                })
            })
            .collect();
        Self { bumps }
    }
}

/// Accumulates, for every bump and κ, the discrete counterpart of
/// `∬ |ρ−κ|φₜ + Φ(ρ,κ)φₓ + ∫|ρ₀−κ|φ(·,0) + Σ ∫ R(κ, q) φ(y(t), t) dt`,
/// which should be bounded below by `−C(Δx + Δt)`.
#[derive(Debug, Clone)]
pub struct EntropyResidual {
    pub family: BumpFamily,
    pub kappas: Vec<f64>,
    /// `values[b][k]` for bump `b` and `kappas[k]`.
    pub values: Vec<Vec<f64>>,
    pub dx: f64,
    pub dt: f64,
}

fn entropy_flux(m: &FluxModel, rho: f64, kappa: f64) -> f64 {
    m.entropy_flux(0.0, rho, kappa)
}

impl EntropyResidual {
    pub fn new(family: BumpFamily, kappas: Vec<f64>) -> Self {
        let values = vec![vec![0.0; kappas.len()]; family.bumps.len()];
        Self {
            family,
            kappas,
            values,
            dx: 0.0,
            dt: 0.0,
        }
    }

    /// Most negative value over the family, divided by `Δx + Δt`.
    pub fn constant(&self) -> f64 {
        let worst = self
            .values
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min);
        (-worst).max(0.0) / (self.dx + self.dt)
    }
}

impl StepObserver for EntropyResidual {
    fn on_start(&mut self, ctx: &StartContext) {
        self.dx = ctx.dx;
        self.dt = ctx.dt;
        for (b, bump) in self.family.bumps.iter().enumerate() {
            for (k, &kappa) in self.kappas.iter().enumerate() {
                let mut acc = 0.0;
                for (i, w) in ctx.edges.windows(2).enumerate() {
                    let (phi, _, _) = bump.eval(0.5 * (w[0] + w[1]), 0.0);
                    acc += (ctx.field[i] - kappa).abs() * phi * (w[1] - w[0]);
                }
                self.values[b][k] += acc;
            }
        }
    }

    fn on_step(&mut self, ctx: &StepContext) {
        let tm = ctx.t + 0.5 * ctx.dt;
        let m = ctx.model;
        for (b, bump) in self.family.bumps.iter().enumerate() {
            let (lo, hi) = bump.support_x();
            if ((tm - bump.tc) / bump.rt).abs() >= 1.0 {
                continue;
            }
            let cells: Vec<(usize, f64, f64)> = ctx
                .before_edges
                .windows(2)
                .enumerate()
                .filter(|(_, w)| w[1] > lo && w[0] < hi)
                .map(|(i, w)| (i, 0.5 * (w[0] + w[1]), w[1] - w[0]))
                .collect();
            let ifaces: Vec<(f64, f64, f64)> = ctx
                .clusters
                .iter()
                .map(|c| (0.5 * (c.y_n + c.y_np1), c.flux.s, c.flux.q))
                .collect();
            for (k, &kappa) in self.kappas.iter().enumerate() {
                let mut acc = 0.0;
                for &(i, xm, w) in &cells {
                    let rho = ctx.field_before[i];
                    let (_, pt, px) = bump.eval(xm, tm);
                    acc += ((rho - kappa).abs() * pt + entropy_flux(m, rho, kappa) * px) * w;
                }
                for &(ym, s, q) in &ifaces {
                    let (phi, _, _) = bump.eval(ym, tm);
                    acc += m.remainder(s, kappa, q) * phi;
                }
                self.values[b][k] += acc * ctx.dt;
            }
        }
    }
}

/// Accumulates `−∬_{x > y(t)} (ρφₜ + f(ρ)φₓ) − ∫ q φ(y(t), t) dt` for one
/// interface, which should be at most `C(Δx + Δt)`. Only steps where the
/// interface is alone in its cluster contribute, so the bumps should be
/// supported in such a time range and away from `t = 0`.
#[derive(Debug, Clone)]
pub struct ConstraintResidual {
    pub interface: u32,
    pub family: BumpFamily,
    pub values: Vec<f64>,
    pub dx: f64,
    pub dt: f64,
}

impl ConstraintResidual {
    pub fn new(interface: u32, family: BumpFamily) -> Self {
        let values = vec![0.0; family.bumps.len()];
        Self {
            interface,
            family,
            values,
            dx: 0.0,
            dt: 0.0,
        }
    }

    /// Largest positive value over the family, divided by `Δx + Δt`.
    pub fn constant(&self) -> f64 {
        let worst = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        worst.max(0.0) / (self.dx + self.dt)
    }
}

impl StepObserver for ConstraintResidual {
    fn on_start(&mut self, ctx: &StartContext) {
        self.dx = ctx.dx;
        self.dt = ctx.dt;
    }

    fn on_step(&mut self, ctx: &StepContext) {
        let Some(k) = ctx
            .clusters
            .iter()
            .position(|c| c.members == [self.interface])
        else {
            return;
        };
        let m = ctx.model;
        let c = &ctx.clusters[k];
        let start = ctx.before.anchor_edge(k);
        let end = if k + 1 < ctx.clusters.len() {
            ctx.before.anchor_edge(k + 1)
        } else {
            ctx.before_edges.len() - 1
        };
        let tm = ctx.t + 0.5 * ctx.dt;
        let ym = 0.5 * (c.y_n + c.y_np1);
        for (b, bump) in self.family.bumps.iter().enumerate() {
            if ((tm - bump.tc) / bump.rt).abs() >= 1.0 {
                continue;
            }
            let mut acc = 0.0;
            for i in start..end {
                let (l, r) = (ctx.before_edges[i], ctx.before_edges[i + 1]);
                let rho = ctx.field_before[i];
                let (_, pt, px) = bump.eval(0.5 * (l + r), tm);
                acc -= (rho * pt + m.flux(rho) * px) * (r - l);
            }
            let (phi, _, _) = bump.eval(ym, tm);
            acc -= c.flux.q * phi;
            self.values[b] += acc * ctx.dt;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_derivative_matches_difference() {
        let bp = Bump {
            xc: 0.3,
            tc: 1.0,
            rx: 0.5,
            rt: 0.7,
        };
        let (x, t, h) = (0.45, 1.2, 1e-6);
        let (_, pt, px) = bp.eval(x, t);
        let dx = (bp.eval(x + h, t).0 - bp.eval(x - h, t).0) / (2.0 * h);
        let dt = (bp.eval(x, t + h).0 - bp.eval(x, t - h).0) / (2.0 * h);
        assert!((px - dx).abs() < 1e-8);
        assert!((pt - dt).abs() < 1e-8);
        assert_eq!(bp.eval(0.9, 1.0).0, 0.0);
    }

    #[test]
    fn standard_family_has_twelve_members() {
        assert_eq!(BumpFamily::standard(-1.0, 1.0, (0.0, 2.0), 0.0).bumps.len(), 12);
        assert_eq!(kappa_grid().len(), 21);
    }
}
