//! Interface-fitted meshes.
//!
//! The background grid is uniform with nodes `x_i = x_min + iΔx`. An
//! interface at `y ∈ ]x_j, x_{j+1}[` removes the nodes `x_j` and `x_{j+1}`
//! and inserts `y`, so the three uniform cells around it become the two
//! interface cells `]x_{j−1}, y[` and `]y, x_{j+2}[`. Cell `k` of a layout is
//! bounded by edges `k` and `k + 1`; an interface is the edge whose index is
//! one past its left cell.

use std::ops::Range;
use thiserror::Error;

/// Relative distance to a node under which an interface is nudged off it.
pub const NUDGE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("interface position {y} too close to the domain boundary")]
    OutOfDomain { y: f64 },
    #[error("interface moved from cell {from} to cell {to} in one step")]
    InvalidStep { from: usize, to: usize },
    #[error("interface neighbourhoods overlap (cells {left} and {right})")]
    Overlap { left: usize, right: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("layouts before and after the step have different interface counts")]
    LayoutMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub x_min: f64,
    pub dx: f64,
    pub cells: usize,
}

impl UniformGrid {
    pub fn new(x_min: f64, x_max: f64, dx: f64) -> Result<Self, MeshError> {
        if !(x_min.is_finite() && x_max.is_finite() && dx.is_finite()) || !(dx > 0.0) {
            return Err(MeshError::InvalidGrid("non-finite bounds or step".into()));
        }
        let len = x_max - x_min;
        if !(len > 0.0) {
            return Err(MeshError::InvalidGrid("x_max must exceed x_min".into()));
        }
        let cells = (len / dx).round();
        if (cells * dx - len).abs() > 1e-9 * len || cells < 8.0 {
            return Err(MeshError::InvalidGrid(format!(
                "domain length {len} is not a multiple of dx = {dx} with at least 8 cells"
            )));
        }
        Ok(Self {
            x_min,
            dx,
            cells: cells as usize,
        })
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.node(self.cells)
    }
}

/// Finds `j` with `y ∈ ]x_j, x_{j+1}[`, nudging `y` off a node if needed.
///
/// Requires `x_min + 2Δx ≤ y ≤ x_max − 3Δx` so that the one-cell shift
/// stencil stays inside the domain.
pub fn locate_interface(grid: &UniformGrid, y: f64) -> Result<(usize, f64), MeshError> {
    if !y.is_finite() {
        return Err(MeshError::OutOfDomain { y });
    }
    let r = (y - grid.x_min) / grid.dx;
    let k = r.round();
    let (j, y) = if (r - k).abs() <= NUDGE {
        (k, grid.node(k.max(0.0) as usize) + NUDGE * grid.dx)
    } else {
        (r.floor(), y)
    };
    if j < 2.0 || j + 3.0 > grid.cells as f64 {
        return Err(MeshError::OutOfDomain { y });
    }
    Ok((j as usize, y))
}

/// An interface placed in the mesh: `y ∈ ]x_j, x_{j+1}[`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub j: usize,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeTag {
    Node(usize),
    Interface(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub x: f64,
    pub tag: EdgeTag,
}

/// The mesh at one time level: the uniform grid plus its anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    grid: UniformGrid,
    anchors: Vec<Anchor>,
}

impl Layout {
    pub fn uniform(grid: UniformGrid) -> Self {
        Self {
            grid,
            anchors: Vec::new(),
        }
    }

    /// Places interfaces at the given positions (ascending).
    pub fn from_positions(grid: UniformGrid, ys: &[f64]) -> Result<Self, MeshError> {
        let anchors = ys
            .iter()
            .map(|&y| locate_interface(&grid, y).map(|(j, y)| Anchor { j, y }))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(grid, anchors)
    }

    pub fn new(grid: UniformGrid, anchors: Vec<Anchor>) -> Result<Self, MeshError> {
        for a in &anchors {
            if a.j < 1 || a.j + 2 > grid.cells || !(a.y > grid.node(a.j) && a.y < grid.node(a.j + 1))
            {
                return Err(MeshError::OutOfDomain { y: a.y });
            }
        }
        for w in anchors.windows(2) {
            if w[1].j < w[0].j + 3 {
                return Err(MeshError::Overlap {
                    left: w[0].j,
                    right: w[1].j,
                });
            }
        }
        Ok(Self { grid, anchors })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn cell_count(&self) -> usize {
        self.grid.cells - self.anchors.len()
    }

    /// Index of the left interface cell of anchor `k`.
    pub fn left_cell(&self, k: usize) -> usize {
        self.anchors[k].j - 1 - k
    }

    /// Edge index of anchor `k` (its position in the χ numbering).
    pub fn anchor_edge(&self, k: usize) -> usize {
        self.left_cell(k) + 1
    }

    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(self.cell_count() + 1);
        let mut next = 0;
        let mut i = 0;
        while i <= self.grid.cells {
            if next < self.anchors.len() && i == self.anchors[next].j {
                out.push(Edge {
                    x: self.anchors[next].y,
                    tag: EdgeTag::Interface(next),
                });
                next += 1;
                i += 2;
                continue;
            }
            out.push(Edge {
                x: self.grid.node(i),
                tag: EdgeTag::Node(i),
            });
            i += 1;
        }
        out
    }

    pub fn edge_positions(&self) -> Vec<f64> {
        self.edges().into_iter().map(|e| e.x).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edge_positions().windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Same anchor cells and positions.
    pub fn same_as(&self, other: &Layout) -> bool {
        self.grid == other.grid && self.anchors == other.anchors
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepCase {
    Stay,
    ShiftRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutKind {
    /// A uniform node shared by both time levels (or a domain boundary).
    Node(usize),
    /// The slanted edge traced by anchor `k`.
    Interface(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cut {
    pub kind: CutKind,
    /// Edge index in the layout at `tⁿ`.
    pub old_edge: usize,
    /// Edge index in the layout at `tⁿ⁺¹`.
    pub new_edge: usize,
}

/// A space-time control volume between two consecutive cuts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlVolume {
    /// Cells at `tⁿ` covered by the volume.
    pub old: Range<usize>,
    /// Cells at `tⁿ⁺¹` covered by the volume; they all get the same value.
    pub new: Range<usize>,
    pub left: Cut,
    pub right: Cut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Rectangle,
    LeftInterfaceParallelogram,
    RightInterfaceParallelogram,
    /// Bounded by interfaces on both sides.
    InterfaceStrip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub left_n: f64,
    pub right_n: f64,
    pub left_np1: f64,
    pub right_np1: f64,
    pub kind: CellKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub volumes: Vec<ControlVolume>,
    pub cases: Vec<StepCase>,
}

impl StepPlan {
    pub fn geometry(&self, before: &[f64], after: &[f64]) -> Vec<CellGeometry> {
        self.volumes
            .iter()
            .map(|v| {
                let li = matches!(v.left.kind, CutKind::Interface(_));
                let ri = matches!(v.right.kind, CutKind::Interface(_));
                CellGeometry {
                    left_n: before[v.left.old_edge],
                    right_n: before[v.right.old_edge],
                    left_np1: after[v.left.new_edge],
                    right_np1: after[v.right.new_edge],
                    kind: match (li, ri) {
                        (false, false) => CellKind::Rectangle,
                        (false, true) => CellKind::LeftInterfaceParallelogram,
                        (true, false) => CellKind::RightInterfaceParallelogram,
                        (true, true) => CellKind::InterfaceStrip,
                    },
                }
            })
            .collect()
    }
}

/// Partitions the strip `[tⁿ, tⁿ⁺¹]` into control volumes.
///
/// Cuts are the uniform nodes present at both time levels and the interface
/// segments joining `yⁿ` to `yⁿ⁺¹`.
pub fn plan_step(before: &Layout, after: &Layout) -> Result<StepPlan, MeshError> {
    if before.grid != after.grid || before.anchors.len() != after.anchors.len() {
        return Err(MeshError::LayoutMismatch);
    }
    let mut cases = Vec::with_capacity(before.anchors.len());
    for (a, b) in before.anchors.iter().zip(&after.anchors) {
        cases.push(match b.j as i64 - a.j as i64 {
            0 => StepCase::Stay,
            1 => StepCase::ShiftRight,
            _ => {
                return Err(MeshError::InvalidStep {
                    from: a.j,
                    to: b.j,
                })
            }
        });
    }
    let new_edges = after.edges();
    let mut node_to_new = vec![usize::MAX; after.grid.cells + 1];
    let mut iface_to_new = vec![usize::MAX; after.anchors.len()];
    for (e, edge) in new_edges.iter().enumerate() {
        match edge.tag {
            EdgeTag::Node(i) => node_to_new[i] = e,
            EdgeTag::Interface(k) => iface_to_new[k] = e,
        }
    }
    let mut cuts = Vec::new();
    for (e, edge) in before.edges().iter().enumerate() {
        match edge.tag {
            EdgeTag::Node(i) if node_to_new[i] != usize::MAX => cuts.push(Cut {
                kind: CutKind::Node(i),
                old_edge: e,
                new_edge: node_to_new[i],
            }),
            EdgeTag::Interface(k) => cuts.push(Cut {
                kind: CutKind::Interface(k),
                old_edge: e,
                new_edge: iface_to_new[k],
            }),
            _ => {}
        }
    }
    let mut volumes = Vec::with_capacity(cuts.len());
    for w in cuts.windows(2) {
        let (l, r) = (w[0], w[1]);
        if r.old_edge <= l.old_edge || r.new_edge <= l.new_edge {
            return Err(MeshError::Overlap {
                left: l.old_edge,
                right: r.old_edge,
            });
        }
        volumes.push(ControlVolume {
            old: l.old_edge..r.old_edge,
            new: l.new_edge..r.new_edge,
            left: l,
            right: r,
        });
    }
    Ok(StepPlan { volumes, cases })
}

/// Single-interface step geometry between `y_n` and `y_np1`.
pub struct StepMesh {
    pub before: Layout,
    pub after: Layout,
    pub case: StepCase,
    pub plan: StepPlan,
    pub geometry: Vec<CellGeometry>,
}

pub fn build_step_mesh(grid: &UniformGrid, y_n: f64, y_np1: f64) -> Result<StepMesh, MeshError> {
    let before = Layout::from_positions(*grid, &[y_n])?;
    let after = Layout::from_positions(*grid, &[y_np1])?;
    let plan = plan_step(&before, &after)?;
    let geometry = plan.geometry(&before.edge_positions(), &after.edge_positions());
    Ok(StepMesh {
        case: plan.cases[0],
        before,
        after,
        plan,
        geometry,
    })
}

/// Conservative transfer of cell averages between two partitions of the
/// same interval.
pub fn reproject(from_edges: &[f64], values: &[f64], to_edges: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(to_edges.len() - 1);
    let mut i = 0;
    for w in to_edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        while i + 1 < values.len() && from_edges[i + 1] <= a {
            i += 1;
        }
        let mut mass = 0.0;
        let mut k = i;
        while k < values.len() && from_edges[k] < b {
            let lo = from_edges[k].max(a);
            let hi = from_edges[k + 1].min(b);
            if hi > lo {
                mass += (hi - lo) * values[k];
            }
            k += 1;
        }
        out.push((mass / (b - a)).clamp(0.0, 1.0));
    }
    out
}

/// `∫_window |u − v|` for piecewise-constant functions on two partitions.
pub fn l1_distance(
    edges_u: &[f64],
    u: &[f64],
    edges_v: &[f64],
    v: &[f64],
    window: (f64, f64),
) -> f64 {
    let mut pts: Vec<f64> = edges_u
        .iter()
        .chain(edges_v)
        .copied()
        .filter(|&x| x > window.0 && x < window.1)
        .collect();
    pts.push(window.0.max(edges_u[0]).max(edges_v[0]));
    pts.push(window.1.min(edges_u[u.len()]).min(edges_v[v.len()]));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = 0.0;
    let (mut iu, mut iv) = (0, 0);
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        while iu + 1 < u.len() && edges_u[iu + 1] <= mid {
            iu += 1;
        }
        while iv + 1 < v.len() && edges_v[iv + 1] <= mid {
            iv += 1;
        }
        total += (b - a) * (u[iu] - v[iv]).abs();
    }
    total
}
