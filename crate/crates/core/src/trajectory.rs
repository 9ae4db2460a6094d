//! Interface trajectories and constraints, their time discretization, and
//! the rule deciding when two nearby interfaces are treated as one.

use crate::flux::FluxModel;
use thiserror::Error;

/// Two interfaces closer than this many cells are merged.
pub const MERGE_CELLS: f64 = 4.0;

const TIME_EPS: f64 = 1e-9;
const EQ_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("interface {id}: {reason}")]
    InvalidSpec { id: u32, reason: String },
    #[error("interface {id}: averaged data (s = {s}, q = {q}) inadmissible at step {n}")]
    InadmissibleStep { id: u32, n: usize, s: f64, q: f64 },
    #[error("merge schedule: {0}")]
    Schedule(String),
}

/// Piecewise-linear trajectory through ordered breakpoints `(t, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    points: Vec<(f64, f64)>,
}

impl Path {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        Self { points }
    }

    pub fn stationary(y: f64, t0: f64, t1: f64) -> Self {
        Self::new(vec![(t0, y), (t1, y)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn start(&self) -> f64 {
        self.points[0].0
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.points.len();
        match self.points[1..n - 1].iter().position(|p| t < p.0) {
            Some(k) => k,
            None => n - 2,
        }
    }

    /// `y(t)`, extended linearly beyond the first and last segments.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.segment(t);
        let (t0, y0) = self.points[k];
        let (t1, y1) = self.points[k + 1];
        y0 + (y1 - y0) * (t - t0) / (t1 - t0)
    }

    pub fn slopes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.points
            .windows(2)
            .map(|w| (w[0].0, w[1].0, (w[1].1 - w[0].1) / (w[1].0 - w[0].0)))
    }

    pub fn max_speed(&self) -> f64 {
        self.slopes().map(|(_, _, s)| s.abs()).fold(0.0, f64::max)
    }
}

/// Piecewise-constant constraint on contiguous segments `(t0, t1, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintProfile {
    segments: Vec<(f64, f64, f64)>,
}

impl ConstraintProfile {
    pub fn new(segments: Vec<(f64, f64, f64)>) -> Self {
        Self { segments }
    }

    pub fn constant(q: f64, t0: f64, t1: f64) -> Self {
        Self::new(vec![(t0, t1, q)])
    }

    pub fn segments(&self) -> &[(f64, f64, f64)] {
        &self.segments
    }

    /// `q(t)`, extended by the nearest segment value outside the support.
    pub fn eval(&self, t: f64) -> f64 {
        for &(_, t1, q) in &self.segments {
            if t < t1 {
                return q;
            }
        }
        self.segments[self.segments.len() - 1].2
    }

    /// Exact integral of the extended profile over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let first = self.segments[0];
        let last = self.segments[self.segments.len() - 1];
        let mut total = 0.0;
        let mut add = |lo: f64, hi: f64, q: f64| {
            let lo = lo.max(a);
            let hi = hi.min(b);
            if hi > lo {
                total += (hi - lo) * q;
            }
        };
        add(f64::NEG_INFINITY, first.0, first.2);
        for &(t0, t1, q) in &self.segments {
            add(t0, t1, q);
        }
        add(last.1, f64::INFINITY, last.2);
        total
    }
}

/// One trajectory with its constraint, alive on `[start, end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceSpec {
    pub id: u32,
    pub path: Path,
    pub constraint: ConstraintProfile,
}

impl InterfaceSpec {
    pub fn new(id: u32, path: Path, constraint: ConstraintProfile) -> Self {
        Self {
            id,
            path,
            constraint,
        }
    }

    pub fn start(&self) -> f64 {
        self.path.start()
    }

    pub fn end(&self) -> f64 {
        self.path.end()
    }

    pub fn validate(&self, model: &FluxModel) -> Result<(), TrajectoryError> {
        let err = |reason: String| TrajectoryError::InvalidSpec {
            id: self.id,
            reason,
        };
        let pts = self.path.points();
        if pts.len() < 2 {
            return Err(err("path needs at least two breakpoints".into()));
        }
        if pts.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
            return Err(err("non-finite path breakpoint".into()));
        }
        if pts[0].0 < 0.0 {
            return Err(err("path starts before t = 0".into()));
        }
        if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(err("path times must be strictly increasing".into()));
        }
        if let Some((t0, _, s)) = self.path.slopes().find(|&(_, _, s)| s < 0.0) {
            return Err(err(format!("decreasing path segment at t = {t0} (slope {s})")));
        }
        let segs = self.constraint.segments();
        if segs.is_empty() {
            return Err(err("missing constraint".into()));
        }
        if segs.iter().any(|(a, b, q)| !(a < b) || !q.is_finite()) {
            return Err(err("constraint segments need t0 < t1 and finite q".into()));
        }
        if segs.windows(2).any(|w| (w[1].0 - w[0].1).abs() > EQ_TOL) {
            return Err(err("constraint segments must be contiguous".into()));
        }
        if (segs[0].0 - self.start()).abs() > EQ_TOL
            || (segs[segs.len() - 1].1 - self.end()).abs() > EQ_TOL
        {
            return Err(err(format!(
                "constraint must cover exactly [{}, {}]",
                self.start(),
                self.end()
            )));
        }
        for (a0, a1, s) in self.path.slopes() {
            for &(b0, b1, q) in segs {
                if a0.max(b0) < a1.min(b1) && !model.constraint_admissible(s, q) {
                    return Err(err(format!(
                        "constraint q = {q} inadmissible for speed {s} on [{}, {}]",
                        a0.max(b0),
                        a1.min(b1)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Interface data sampled on the global time grid `tⁿ = nΔt`.
///
/// The interface is active for steps `n_start ≤ n < n_end`; `y` holds the
/// positions at `n_start..=n_end`, `s` and `q` the step averages.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteInterface {
    pub id: u32,
    pub dt: f64,
    pub n_start: usize,
    pub n_end: usize,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub q: Vec<f64>,
}

impl DiscreteInterface {
    pub fn is_active(&self, n: usize) -> bool {
        self.n_start <= n && n < self.n_end
    }

    pub fn is_empty(&self) -> bool {
        self.n_end <= self.n_start
    }

    /// Position at `tⁿ`, for `n_start ≤ n ≤ n_end`.
    pub fn y_at(&self, n: usize) -> f64 {
        self.y[n - self.n_start]
    }

    pub fn s_at(&self, n: usize) -> f64 {
        self.s[n - self.n_start]
    }

    pub fn q_at(&self, n: usize) -> f64 {
        self.q[n - self.n_start]
    }

    pub fn max_speed(&self) -> f64 {
        self.s.iter().map(|s| s.abs()).fold(0.0, f64::max)
    }
}

/// Number of steps needed to reach `horizon`.
pub fn step_count(dt: f64, horizon: f64) -> usize {
    (horizon / dt - TIME_EPS).ceil().max(0.0) as usize
}

fn grid_index(t: f64, dt: f64) -> usize {
    (t / dt + TIME_EPS).floor().max(0.0) as usize
}

/// Samples an interface on the step grid with exact step averages.
pub fn discretize(
    model: &FluxModel,
    spec: &InterfaceSpec,
    dt: f64,
    horizon: f64,
) -> Result<DiscreteInterface, TrajectoryError> {
    let n_steps = step_count(dt, horizon);
    let n_start = grid_index(spec.start(), dt);
    let n_end = grid_index(spec.end(), dt).min(n_steps).max(n_start);
    let len = n_end - n_start;
    let mut y = Vec::with_capacity(len + 1);
    let mut s = Vec::with_capacity(len);
    let mut q = Vec::with_capacity(len);
    y.push(spec.path.eval(n_start as f64 * dt));
    for k in 0..len {
        let n = n_start + k;
        let (t0, t1) = (n as f64 * dt, (n + 1) as f64 * dt);
        let sn = (spec.path.eval(t1) - spec.path.eval(t0)) / dt;
        let qn = spec.constraint.integral(t0, t1) / dt;
        if !model.constraint_admissible(sn, qn) || sn + qn < 0.0 {
            return Err(TrajectoryError::InadmissibleStep {
                id: spec.id,
                n,
                s: sn,
                q: qn,
            });
        }
        y.push(y[k] + sn * dt);
        s.push(sn);
        q.push(qn);
    }
    Ok(DiscreteInterface {
        id: spec.id,
        dt,
        n_start,
        n_end,
        y,
        s,
        q,
    })
}

/// Mean trajectory and minimum constraint of two interfaces over `range`.
pub fn merged_interface(
    a: &DiscreteInterface,
    b: &DiscreteInterface,
    range: std::ops::Range<usize>,
) -> DiscreteInterface {
    let mut y = vec![0.5 * (a.y_at(range.start) + b.y_at(range.start))];
    let mut s = Vec::new();
    let mut q = Vec::new();
    for n in range.clone() {
        let sn = 0.5 * (a.s_at(n) + b.s_at(n));
        y.push(y[y.len() - 1] + sn * a.dt);
        s.push(sn);
        q.push(a.q_at(n).min(b.q_at(n)));
    }
    DiscreteInterface {
        id: a.id.min(b.id),
        dt: a.dt,
        n_start: range.start,
        n_end: range.end,
        y,
        s,
        q,
    }
}

/// Hysteresis rule for a pair of interfaces separated by `gap`.
pub fn update_link(linked: bool, gap: f64, dx: f64) -> bool {
    let threshold = MERGE_CELLS * dx;
    if linked {
        gap < threshold
    } else {
        gap <= threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    Independent,
    Merged,
}

/// Half-open step range `[n_start, n_end)` with its treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    pub n_start: usize,
    pub n_end: usize,
    pub kind: PhaseKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeSchedule {
    pub phases: Vec<Phase>,
    /// First step of the merged phase.
    pub n1: Option<usize>,
    /// First step after the merged phase.
    pub n2: Option<usize>,
}

/// Independent / merged / independent phases for a pair of interfaces.
///
/// The merged phase starts at the first common step where the gap is at most
/// `4Δx` and ends at the first later step (after `crossing`, if given) where
/// the gap is at least `4Δx`, or when either interface stops.
pub fn build_merge_schedule(
    a: &DiscreteInterface,
    b: &DiscreteInterface,
    dx: f64,
    crossing: Option<usize>,
    n_steps: usize,
) -> Result<MergeSchedule, TrajectoryError> {
    if (a.dt - b.dt).abs() > EQ_TOL * a.dt.max(b.dt) {
        return Err(TrajectoryError::Schedule(format!(
            "interfaces {} and {} use different time steps",
            a.id, b.id
        )));
    }
    let lo = a.n_start.max(b.n_start);
    let hi = a.n_end.min(b.n_end);
    let gap = |n: usize| (a.y_at(n) - b.y_at(n)).abs();
    let n1 = (lo..hi).find(|&n| update_link(false, gap(n), dx));
    let mut phases = Vec::new();
    let mut n2 = None;
    if let Some(n1) = n1 {
        let after = crossing.map_or(n1, |c| c.max(n1));
        let end = (after + 1..hi)
            .find(|&n| !update_link(true, gap(n), dx))
            .unwrap_or(hi);
        if end < hi {
            n2 = Some(end);
        }
        if n1 > 0 {
            phases.push(Phase {
                n_start: 0,
                n_end: n1,
                kind: PhaseKind::Independent,
            });
        }
        phases.push(Phase {
            n_start: n1,
            n_end: end,
            kind: PhaseKind::Merged,
        });
        if end < n_steps {
            phases.push(Phase {
                n_start: end,
                n_end: n_steps,
                kind: PhaseKind::Independent,
            });
        }
    } else {
        phases.push(Phase {
            n_start: 0,
            n_end: n_steps,
            kind: PhaseKind::Independent,
        });
    }
    Ok(MergeSchedule { phases, n1, n2 })
}

/// Rejects pairs of interfaces whose paths cross strictly inside their
/// common lifetime. Crossings must be split into separate interfaces that
/// end and start at the crossing point.
pub fn check_no_transversal_crossing(
    a: &InterfaceSpec,
    b: &InterfaceSpec,
) -> Result<(), TrajectoryError> {
    let lo = a.start().max(b.start());
    let hi = a.end().min(b.end());
    if !(lo < hi) {
        return Ok(());
    }
    let mut times: Vec<f64> = a
        .path
        .points()
        .iter()
        .chain(b.path.points())
        .map(|p| p.0)
        .filter(|&t| t > lo && t < hi)
        .collect();
    times.push(lo);
    times.push(hi);
    let tol = 1e-9;
    let mut pos = false;
    let mut neg = false;
    for t in times {
        let d = a.path.eval(t) - b.path.eval(t);
        pos |= d > tol;
        neg |= d < -tol;
    }
    if pos && neg {
        return Err(TrajectoryError::InvalidSpec {
            id: a.id,
            reason: format!(
                "crosses interface {} without a declared crossing point",
                b.id
            ),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(points: Vec<(f64, f64)>, q: f64) -> InterfaceSpec {
        let (t0, t1) = (points[0].0, points[points.len() - 1].0);
        InterfaceSpec::new(1, Path::new(points), ConstraintProfile::constant(q, t0, t1))
    }

    #[test]
    fn constant_speed_slopes() {
        let m = FluxModel::quadratic();
        let d = discretize(&m, &spec(vec![(0.0, 0.0), (1.0, 0.3)], 0.1), 0.1, 1.0).unwrap();
        assert_eq!(d.s.len(), 10);
        for s in &d.s {
            assert_abs_diff_eq!(*s, 0.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn stationary_path() {
        let m = FluxModel::quadratic();
        let d = discretize(&m, &spec(vec![(0.0, 2.0), (5.0, 2.0)], 0.1), 0.1, 5.0).unwrap();
        assert!(d.s.iter().all(|&s| s == 0.0));
        assert!(d.y.iter().all(|&y| y == 2.0));
    }

    #[test]
    fn breakpoint_mid_step() {
        let m = FluxModel::quadratic();
        let sp = spec(vec![(0.0, 0.0), (0.25, 0.0), (1.0, 0.3)], 0.05);
        let d = discretize(&m, &sp, 0.1, 1.0).unwrap();
        // Step [0.2, 0.3]: slope 0 then 0.4, breakpoint at the midpoint.
        assert_abs_diff_eq!(d.s[2], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn positions_follow_slopes_exactly() {
        let m = FluxModel::quadratic();
        let sp = spec(vec![(0.0, 0.0), (0.33, 0.1), (1.0, 0.3)], 0.05);
        let d = discretize(&m, &sp, 0.07, 1.0).unwrap();
        for k in 0..d.s.len() {
            assert_eq!(d.y[k + 1], d.y[k] + d.s[k] * d.dt);
            assert_abs_diff_eq!(d.y[k], sp.path.eval((d.n_start + k) as f64 * 0.07), epsilon = 1e-12);
        }
    }

    #[test]
    fn constraint_averages() {
        let m = FluxModel::quadratic();
        let sp = InterfaceSpec::new(
            1,
            Path::stationary(0.0, 0.0, 1.0),
            ConstraintProfile::new(vec![(0.0, 0.45, 0.1), (0.45, 1.0, 0.2)]),
        );
        let d = discretize(&m, &sp, 0.1, 1.0).unwrap();
        assert_abs_diff_eq!(d.q[3], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(d.q[4], 0.15, epsilon = 1e-12);
        assert_abs_diff_eq!(d.q[5], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let m = FluxModel::quadratic();
        assert!(spec(vec![(0.0, 1.0), (1.0, 0.5)], 0.1).validate(&m).is_err());
        assert!(spec(vec![(0.0, 1.0), (1.0, 1.0)], 0.3).validate(&m).is_err());
        assert!(spec(vec![(0.0, 1.0), (1.0, 1.0)], 0.1).validate(&m).is_ok());
    }

    #[test]
    fn merged_interface_mean_and_min() {
        let m = FluxModel::quadratic();
        let a = discretize(&m, &spec(vec![(0.0, 0.0), (1.0, 0.0)], 0.125), 0.1, 1.0).unwrap();
        let b = discretize(&m, &spec(vec![(0.0, 0.0), (1.0, 0.4)], 0.05), 0.1, 1.0).unwrap();
        let c = merged_interface(&a, &b, 0..10);
        assert!(c.s.iter().all(|&s| (s - 0.2).abs() < 1e-12));
        assert!(c.q.iter().all(|&q| (q - 0.05).abs() < 1e-15));
        let same = merged_interface(&a, &a, 0..10);
        assert_eq!(same.y, a.y);
        assert_eq!(same.q, a.q);
    }

    #[test]
    fn schedule_parallel_is_single_phase() {
        let m = FluxModel::quadratic();
        let dx = 0.01;
        let a = discretize(&m, &spec(vec![(0.0, 1.0), (1.0, 1.2)], 0.1), 0.004, 1.0).unwrap();
        let b = discretize(&m, &spec(vec![(0.0, 1.1), (1.0, 1.3)], 0.1), 0.004, 1.0).unwrap();
        let s = build_merge_schedule(&a, &b, dx, None, 250).unwrap();
        assert_eq!(s.phases.len(), 1);
        assert_eq!(s.phases[0].kind, PhaseKind::Independent);
    }

    #[test]
    fn schedule_merge_shrinks_with_resolution() {
        let m = FluxModel::quadratic();
        let duration = |dx: f64| {
            let dt = 0.4 * dx;
            let a = discretize(&m, &spec(vec![(0.0, 1.0), (2.0, 1.0)], 0.1), dt, 2.0).unwrap();
            let b = discretize(&m, &spec(vec![(0.0, 0.7), (2.0, 1.3)], 0.1), dt, 2.0).unwrap();
            let crossing = (1.0 / dt).round() as usize;
            let s = build_merge_schedule(&a, &b, dx, Some(crossing), step_count(dt, 2.0)).unwrap();
            let merged = s.phases.iter().find(|p| p.kind == PhaseKind::Merged).unwrap();
            (merged.n_end - merged.n_start) as f64 * dt
        };
        assert!(duration(0.005) < duration(0.01));
    }

    #[test]
    fn transversal_crossing_detected() {
        let a = spec(vec![(0.0, 0.0), (2.0, 0.0)], 0.1);
        let b = spec(vec![(0.0, -0.5), (2.0, 0.5)], 0.1);
        assert!(check_no_transversal_crossing(&a, &b).is_err());
        let c = spec(vec![(0.0, -0.5), (1.0, 0.0)], 0.1);
        assert!(check_no_transversal_crossing(&a, &c).is_ok());
    }
}
