//! The marching scheme on interface-fitted meshes.
//!
//! Away from interfaces each cell is updated with the three-point
//! Engquist–Osher formula. Each interface contributes two control volumes
//! whose slanted edge carries the constrained Godunov flux; when the
//! interface crosses a node the left volume spans two cells at the new time
//! level (both receive the same value) and the right volume absorbs the next
//! uniform cell.

use std::fmt;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::flux::FluxModel;
use crate::mesh::{plan_step, CutKind, Layout, MeshError, StepCase, StepPlan};
use crate::trajectory::{DiscreteInterface, TrajectoryError};

/// Margin kept below the CFL limit `2Lλ ≤ 1`.
pub const CFL_MARGIN: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("CFL condition violated: 2·L·λ = {value} > 1")]
    CflViolation { value: f64 },
    #[error("step {n}: {source}")]
    Mesh {
        n: usize,
        #[source]
        source: MeshError,
    },
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("step {n}: interfaces {a} and {b} are within merge distance but were not merged")]
    PhaseInvariantViolation { n: usize, a: u32, b: u32 },
    #[error("field has {got} values, layout has {expected} cells")]
    FieldMismatch { expected: usize, got: usize },
}

/// Grid and time-step parameters shared by all phases of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub dx: f64,
    pub lambda: f64,
    /// `‖f′‖_∞ + max ‖ẏ‖_∞`.
    pub speed_bound: f64,
    pub horizon: f64,
}

impl SchemeConfig {
    pub fn dt(&self) -> f64 {
        self.lambda * self.dx
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        let value = 2.0 * self.speed_bound * self.lambda;
        if !(value <= 1.0 - CFL_MARGIN) || !(self.lambda > 0.0) {
            return Err(SchemeError::CflViolation { value });
        }
        Ok(())
    }
}

/// Initial densities.
#[derive(Clone)]
pub enum InitialDatum {
    Constant(f64),
    /// `value` on `[a, b]`, zero elsewhere.
    Indicator { a: f64, b: f64, value: f64 },
    /// `values[0]` left of `breaks[0]`, `values[k]` on `[breaks[k−1], breaks[k]]`,
    /// and the last value right of the last break.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for InitialDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Self::Indicator { a, b, value } => f
                .debug_struct("Indicator")
                .field("a", a)
                .field("b", b)
                .field("value", value)
                .finish(),
            Self::Piecewise { breaks, values } => f
                .debug_struct("Piecewise")
                .field("breaks", breaks)
                .field("values", values)
                .finish(),
            Self::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl PartialEq for InitialDatum {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Constant(a), Self::Constant(b)) => a == b,
            (
                Self::Indicator { a, b, value },
                Self::Indicator {
                    a: a2,
                    b: b2,
                    value: v2,
                },
            ) => a == a2 && b == b2 && value == v2,
            (
                Self::Piecewise { breaks, values },
                Self::Piecewise {
                    breaks: b2,
                    values: v2,
                },
            ) => breaks == b2 && values == v2,
            _ => false,
        }
    }
}

impl InitialDatum {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Indicator { a, b, value } => {
                if x >= *a && x <= *b {
                    *value
                } else {
                    0.0
                }
            }
            Self::Piecewise { breaks, values } => {
                let k = breaks.iter().take_while(|&&b| b <= x).count();
                values[k]
            }
            Self::Function(g) => g(x),
        }
    }

    /// Mean over `[a, b]`: exact for the piecewise-constant presets,
    /// 16-point Gauss–Legendre otherwise.
    pub fn cell_mean(&self, a: f64, b: f64) -> f64 {
        let w = b - a;
        let overlap = |lo: f64, hi: f64| (hi.min(b) - lo.max(a)).max(0.0);
        let mean = match self {
            Self::Constant(c) => *c,
            Self::Indicator { a: l, b: r, value } => value * overlap(*l, *r) / w,
            Self::Piecewise { breaks, values } => {
                let mut acc = 0.0;
                let mut lo = f64::NEG_INFINITY;
                for (k, v) in values.iter().enumerate() {
                    let hi = breaks.get(k).copied().unwrap_or(f64::INFINITY);
                    acc += v * overlap(lo, hi);
                    lo = hi;
                }
                acc / w
            }
            Self::Function(g) => {
                let (nodes, weights) = gauss_legendre_16();
                let half = 0.5 * w;
                let mid = 0.5 * (a + b);
                nodes
                    .iter()
                    .zip(weights)
                    .map(|(x, wt)| wt * g(mid + half * x))
                    .sum::<f64>()
                    * 0.5
            }
        };
        mean.clamp(0.0, 1.0)
    }

    /// Largest and smallest values taken by a preset (`None` for functions).
    pub fn range(&self) -> Option<(f64, f64)> {
        match self {
            Self::Constant(c) => Some((*c, *c)),
            Self::Indicator { value, .. } => Some((value.min(0.0), value.max(0.0))),
            Self::Piecewise { values, .. } => Some((
                values.iter().copied().fold(f64::INFINITY, f64::min),
                values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )),
            Self::Function(_) => None,
        }
    }
}

fn gauss_legendre_16() -> &'static ([f64; 16], [f64; 16]) {
    static RULE: OnceLock<([f64; 16], [f64; 16])> = OnceLock::new();
    RULE.get_or_init(|| {
        const N: usize = 16;
        let mut x = [0.0; N];
        let mut w = [0.0; N];
        for i in 0..N {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=N {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = N as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    let (mut q0, mut q1) = (1.0, z);
                    for k in 2..=N {
                        let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                        q0 = q1;
                        q1 = q2;
                    }
                    let dq = N as f64 * (z * q1 - q0) / (z * z - 1.0);
                    w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                    break;
                }
            }
            x[i] = z;
        }
        (x, w)
    })
}

/// Cell means of the datum on a layout.
pub fn project_initial(datum: &InitialDatum, layout: &Layout) -> Vec<f64> {
    layout
        .edge_positions()
        .windows(2)
        .map(|w| datum.cell_mean(w[0], w[1]))
        .collect()
}

/// Three-point Engquist–Osher update of a cell away from any interface.
pub fn step_away_from_interface(model: &FluxModel, lambda: f64, l: f64, c: f64, r: f64) -> f64 {
    c - lambda * (model.engquist_osher(c, r) - model.engquist_osher(l, c))
}

/// Geometry of the two interface volumes for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceGeometry {
    pub dx: f64,
    pub dt: f64,
    /// `x_{j−1}`: left end of the left interface cell.
    pub x_left: f64,
    /// `x_{j+2}`: right end of the right interface cell at `tⁿ`.
    pub x_right: f64,
    pub y_n: f64,
    pub y_np1: f64,
    pub case: StepCase,
}

impl InterfaceGeometry {
    pub fn slope(&self) -> f64 {
        (self.y_np1 - self.y_n) / self.dt
    }

    /// Width of the left volume at `tⁿ⁺¹`.
    pub fn left_width_np1(&self) -> f64 {
        self.y_np1 - self.x_left
    }

    /// Width of the right volume at `tⁿ⁺¹`.
    pub fn right_width_np1(&self) -> f64 {
        match self.case {
            StepCase::Stay => self.x_right - self.y_np1,
            StepCase::ShiftRight => self.x_right + self.dx - self.y_np1,
        }
    }
}

/// New value of the left interface volume from `(u, v, w)`: the cell left of
/// it, the left interface cell and the right interface cell.
pub fn step_interface_left(
    model: &FluxModel,
    geo: &InterfaceGeometry,
    q: f64,
    u: f64,
    v: f64,
    w: f64,
) -> f64 {
    let s = geo.slope();
    let f_int = model.interface_flux(s, q, v, w);
    (v * (geo.y_n - geo.x_left) - (f_int - model.engquist_osher(u, v)) * geo.dt)
        / geo.left_width_np1()
}

/// New value of the right interface volume from `(u, v, w, z)`: the two
/// interface cells and the two uniform cells to their right.
pub fn step_interface_right(
    model: &FluxModel,
    geo: &InterfaceGeometry,
    q: f64,
    u: f64,
    v: f64,
    w: f64,
    z: f64,
) -> f64 {
    let s = geo.slope();
    let f_int = model.interface_flux(s, q, u, v);
    let num = match geo.case {
        StepCase::Stay => v * (geo.x_right - geo.y_n) - (model.engquist_osher(v, w) - f_int) * geo.dt,
        StepCase::ShiftRight => {
            v * (geo.x_right - geo.y_n) + w * geo.dx
                - (model.engquist_osher(w, z) - f_int) * geo.dt
        }
    };
    num / geo.right_width_np1()
}

/// Constraint data of one anchor for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceParams {
    /// Slope of the anchor segment `(yⁿ⁺¹ − yⁿ)/Δt` as placed in the mesh.
    pub s: f64,
    pub q: f64,
}

/// Per-anchor flux data of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceFlux {
    pub s: f64,
    pub q: f64,
    pub f_int: f64,
    /// Left interface cell value at `tⁿ`.
    pub left_trace: f64,
    /// Right interface cell value at `tⁿ`.
    pub right_trace: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub plan: StepPlan,
    pub values: Vec<f64>,
    /// Numerical flux on each cut, aligned with `volumes[k].left` for
    /// `k < volumes.len()` and the last volume's right cut at the end.
    pub cut_fluxes: Vec<f64>,
    pub interfaces: Vec<InterfaceFlux>,
}

impl StepOutput {
    pub fn boundary_fluxes(&self) -> (f64, f64) {
        (self.cut_fluxes[0], self.cut_fluxes[self.cut_fluxes.len() - 1])
    }
}

/// Advances `field` from the layout at `tⁿ` to the layout at `tⁿ⁺¹`.
pub fn advance_layout(
    model: &FluxModel,
    before: &Layout,
    after: &Layout,
    field: &[f64],
    params: &[InterfaceParams],
    dt: f64,
) -> Result<StepOutput, MeshError> {
    let plan = plan_step(before, after)?;
    let old_w = before.widths();
    let new_w = after.widths();
    let last = field.len() - 1;
    let mut interfaces = Vec::with_capacity(params.len());
    for (k, p) in params.iter().enumerate() {
        let e = before.anchor_edge(k);
        let (l, r) = (field[e - 1], field[e]);
        interfaces.push(InterfaceFlux {
            s: p.s,
            q: p.q,
            f_int: model.interface_flux(p.s, p.q, l, r),
            left_trace: l,
            right_trace: r,
        });
    }
    let flux_at = |kind: CutKind, e: usize| match kind {
        CutKind::Interface(k) => interfaces[k].f_int,
        CutKind::Node(_) => {
            let l = field[e.saturating_sub(1)];
            let r = field[e.min(last)];
            model.engquist_osher(l, r)
        }
    };
    let mut cut_fluxes = Vec::with_capacity(plan.volumes.len() + 1);
    for v in &plan.volumes {
        cut_fluxes.push(flux_at(v.left.kind, v.left.old_edge));
    }
    let tail = &plan.volumes[plan.volumes.len() - 1].right;
    cut_fluxes.push(flux_at(tail.kind, tail.old_edge));
    let mut values = vec![0.0; after.cell_count()];
    for (k, v) in plan.volumes.iter().enumerate() {
        let mass: f64 = v.old.clone().map(|i| field[i] * old_w[i]).sum();
        let width: f64 = v.new.clone().map(|i| new_w[i]).sum();
        let value = (mass - (cut_fluxes[k + 1] - cut_fluxes[k]) * dt) / width;
        for i in v.new.clone() {
            values[i] = value;
        }
    }
    Ok(StepOutput {
        plan,
        values,
        cut_fluxes,
        interfaces,
    })
}

/// One step of the single-interface scheme.
///
/// When the interface is inactive at step `n` the layout must be uniform and
/// the plain Engquist–Osher scheme is applied.
pub fn advance(
    model: &FluxModel,
    layout: &Layout,
    field: &[f64],
    interface: &DiscreteInterface,
    n: usize,
) -> Result<(Layout, StepOutput), SchemeError> {
    if field.len() != layout.cell_count() {
        return Err(SchemeError::FieldMismatch {
            expected: layout.cell_count(),
            got: field.len(),
        });
    }
    let grid = *layout.grid();
    let mesh_err = |source| SchemeError::Mesh { n, source };
    let dt = interface.dt;
    let (after, params) = if interface.is_active(n) {
        let after = Layout::from_positions(grid, &[interface.y_at(n + 1)]).map_err(mesh_err)?;
        let s = (after.anchors()[0].y - layout.anchors()[0].y) / dt;
        (after, vec![InterfaceParams { s, q: interface.q_at(n) }])
    } else {
        (Layout::uniform(grid), vec![])
    };
    let out = advance_layout(model, layout, &after, field, &params, dt).map_err(mesh_err)?;
    Ok((after, out))
}
