//! Several interfaces on one global mesh.
//!
//! At every step the active interfaces are grouped into clusters: two
//! neighbours are linked once their gap drops to `4Δx` and unlinked once it
//! is back to `4Δx` or more. A cluster of several interfaces is replaced by
//! a single synthetic interface (mean trajectory, minimum constraint, built
//! by pairwise merging in ascending id order). Whenever the cluster set
//! changes, including activation and deactivation at endpoints, the field is
//! transferred conservatively onto the new mesh.

use std::collections::HashMap;

use crate::flux::FluxModel;
use crate::mesh::{reproject, Layout, MeshError, StepCase, UniformGrid};
use crate::scheme::{
    advance_layout, project_initial, InitialDatum, InterfaceFlux, InterfaceParams, SchemeConfig,
    SchemeError, StepOutput,
};
use crate::trajectory::{
    check_no_transversal_crossing, discretize, step_count, update_link, DiscreteInterface,
    InterfaceSpec,
};

/// Everything needed to run the scheme.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: FluxModel,
    pub grid: UniformGrid,
    pub lambda: f64,
    pub horizon: f64,
    pub initial: InitialDatum,
    pub interfaces: Vec<InterfaceSpec>,
}

/// State of one synthetic interface during a step.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterInfo {
    /// Ids of the merged interfaces, ascending.
    pub members: Vec<u32>,
    pub y_n: f64,
    pub y_np1: f64,
    pub case: StepCase,
    pub flux: InterfaceFlux,
}

impl ClusterInfo {
    pub fn is_merged(&self) -> bool {
        self.members.len() > 1
    }
}

pub struct StepContext<'a> {
    pub n: usize,
    /// `tⁿ`.
    pub t: f64,
    pub dt: f64,
    pub dx: f64,
    pub model: &'a FluxModel,
    pub before: &'a Layout,
    pub after: &'a Layout,
    pub before_edges: &'a [f64],
    pub after_edges: &'a [f64],
    pub field_before: &'a [f64],
    pub field_after: &'a [f64],
    pub output: &'a StepOutput,
    /// One entry per anchor of `before`, in position order.
    pub clusters: &'a [ClusterInfo],
    /// The mesh was rebuilt at `tⁿ` before this step.
    pub regrouped: bool,
}

pub struct TransitionContext<'a> {
    pub n: usize,
    pub t: f64,
    pub before_edges: &'a [f64],
    pub field_before: &'a [f64],
    pub after: &'a Layout,
    pub after_edges: &'a [f64],
    pub field_after: &'a [f64],
}

pub struct StartContext<'a> {
    pub dt: f64,
    pub dx: f64,
    pub n_steps: usize,
    pub model: &'a FluxModel,
    pub layout: &'a Layout,
    pub edges: &'a [f64],
    pub field: &'a [f64],
}

/// Hooks called while a [`Simulation`] runs.
pub trait StepObserver {
    fn on_start(&mut self, _ctx: &StartContext) {}
    fn on_transition(&mut self, _ctx: &TransitionContext) {}
    fn on_step(&mut self, _ctx: &StepContext) {}
}

#[derive(Debug, Clone)]
struct Cluster {
    /// Indices into `Simulation::interfaces`, ascending id.
    members: Vec<usize>,
    y: f64,
}

pub struct Simulation {
    model: FluxModel,
    config: SchemeConfig,
    grid: UniformGrid,
    dt: f64,
    n_steps: usize,
    interfaces: Vec<DiscreteInterface>,
    links: HashMap<(u32, u32), bool>,
    clusters: Vec<Cluster>,
    layout: Layout,
    edges: Vec<f64>,
    field: Vec<f64>,
    n: usize,
    started: bool,
}

impl Simulation {
    pub fn new(problem: &Problem) -> Result<Self, SchemeError> {
        let dx = problem.grid.dx;
        let dt = problem.lambda * dx;
        let model = problem.model.clone();
        for (k, a) in problem.interfaces.iter().enumerate() {
            a.validate(&model)?;
            for b in &problem.interfaces[k + 1..] {
                check_no_transversal_crossing(a, b)?;
            }
        }
        let interfaces = problem
            .interfaces
            .iter()
            .map(|spec| discretize(&model, spec, dt, problem.horizon))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .filter(|d| !d.is_empty())
            .collect::<Vec<_>>();
        let max_speed = problem
            .interfaces
            .iter()
            .map(|s| s.path.max_speed())
            .fold(0.0, f64::max);
        let config = SchemeConfig {
            dx,
            lambda: problem.lambda,
            speed_bound: model.lipschitz() + max_speed,
            horizon: problem.horizon,
        };
        config.validate()?;
        let mut sim = Self {
            model,
            config,
            grid: problem.grid,
            dt,
            n_steps: step_count(dt, problem.horizon),
            interfaces,
            links: HashMap::new(),
            clusters: Vec::new(),
            layout: Layout::uniform(problem.grid),
            edges: Vec::new(),
            field: Vec::new(),
            n: 0,
            started: false,
        };
        let clusters = sim.group(0);
        let ys: Vec<f64> = clusters.iter().map(|c| c.y).collect();
        sim.layout = sim.place(0, &clusters, &ys)?;
        sim.clusters = clusters;
        sim.edges = sim.layout.edge_positions();
        sim.field = project_initial(&problem.initial, &sim.layout);
        Ok(sim)
    }

    pub fn model(&self) -> &FluxModel {
        &self.model
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn step_index(&self) -> usize {
        self.n
    }

    pub fn time(&self) -> f64 {
        self.n as f64 * self.dt
    }

    pub fn is_finished(&self) -> bool {
        self.n >= self.n_steps
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn interfaces(&self) -> &[DiscreteInterface] {
        &self.interfaces
    }

    pub fn mass(&self) -> f64 {
        self.field
            .iter()
            .zip(self.edges.windows(2))
            .map(|(v, w)| v * (w[1] - w[0]))
            .sum()
    }

    /// Fold `(a, b) ↦ (a + b)/2` over members in ascending id order.
    fn fold_mean(&self, members: &[usize], value: impl Fn(&DiscreteInterface) -> f64) -> f64 {
        let mut it = members.iter().map(|&i| value(&self.interfaces[i]));
        let first = it.next().expect("cluster has members");
        it.fold(first, |acc, v| 0.5 * (acc + v))
    }

    /// Active clusters at step `n`, updating the link state.
    fn group(&mut self, n: usize) -> Vec<Cluster> {
        let mut active: Vec<usize> = (0..self.interfaces.len())
            .filter(|&i| self.interfaces[i].is_active(n))
            .collect();
        active.sort_by(|&a, &b| {
            let (ia, ib) = (&self.interfaces[a], &self.interfaces[b]);
            ia.y_at(n).total_cmp(&ib.y_at(n)).then(ia.id.cmp(&ib.id))
        });
        let mut links = HashMap::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (k, &i) in active.iter().enumerate() {
            if k > 0 {
                let p = active[k - 1];
                let (a, b) = (&self.interfaces[p], &self.interfaces[i]);
                let key = (a.id.min(b.id), a.id.max(b.id));
                let prev = self.links.get(&key).copied().unwrap_or(false);
                let linked = update_link(prev, (b.y_at(n) - a.y_at(n)).abs(), self.grid.dx);
                links.insert(key, linked);
                if linked {
                    groups.last_mut().expect("previous group").push(i);
                    continue;
                }
            }
            groups.push(vec![i]);
        }
        self.links = links;
        groups
            .into_iter()
            .map(|mut members| {
                members.sort_by_key(|&i| self.interfaces[i].id);
                let y = self.fold_mean(&members, |d| d.y_at(n));
                Cluster { members, y }
            })
            .collect()
    }

    fn ids(&self, c: &Cluster) -> Vec<u32> {
        c.members.iter().map(|&i| self.interfaces[i].id).collect()
    }

    fn place(&self, n: usize, clusters: &[Cluster], ys: &[f64]) -> Result<Layout, SchemeError> {
        Layout::from_positions(self.grid, ys).map_err(|source| match source {
            MeshError::Overlap { left, .. } => {
                let k = clusters
                    .iter()
                    .zip(ys)
                    .position(|(_, &y)| crate::mesh::locate_interface(&self.grid, y).map(|p| p.0) == Ok(left))
                    .unwrap_or(0);
                let a = self.ids(&clusters[k])[0];
                let b = clusters.get(k + 1).map_or(a, |c| self.ids(c)[0]);
                SchemeError::PhaseInvariantViolation { n, a, b }
            }
            source => SchemeError::Mesh { n, source },
        })
    }

    /// Runs every remaining step.
    pub fn run(&mut self, observers: &mut [&mut dyn StepObserver]) -> Result<(), SchemeError> {
        while !self.is_finished() {
            self.step(observers)?;
        }
        Ok(())
    }

    /// Runs until `tⁿ` reaches step `target`.
    pub fn run_until(
        &mut self,
        target: usize,
        observers: &mut [&mut dyn StepObserver],
    ) -> Result<(), SchemeError> {
        while self.n < target.min(self.n_steps) {
            self.step(observers)?;
        }
        Ok(())
    }

    pub fn step(&mut self, observers: &mut [&mut dyn StepObserver]) -> Result<(), SchemeError> {
        let n = self.n;
        let t = self.time();
        if !self.started {
            self.started = true;
            let ctx = StartContext {
                dt: self.dt,
                dx: self.grid.dx,
                n_steps: self.n_steps,
                model: &self.model,
                layout: &self.layout,
                edges: &self.edges,
                field: &self.field,
            };
            for o in observers.iter_mut() {
                o.on_start(&ctx);
            }
        }
        let mut clusters = if n == 0 {
            self.clusters.clone()
        } else {
            self.group(n)
        };
        let same = clusters.len() == self.clusters.len()
            && clusters
                .iter()
                .zip(&self.clusters)
                .all(|(a, b)| a.members == b.members);
        let mut regrouped = false;
        if same {
            for (c, old) in clusters.iter_mut().zip(&self.clusters) {
                c.y = old.y;
            }
        } else if n > 0 {
            let ys: Vec<f64> = clusters.iter().map(|c| c.y).collect();
            let layout = self.place(n, &clusters, &ys)?;
            let edges = layout.edge_positions();
            let field = reproject(&self.edges, &self.field, &edges);
            let ctx = TransitionContext {
                n,
                t,
                before_edges: &self.edges,
                field_before: &self.field,
                after: &layout,
                after_edges: &edges,
                field_after: &field,
            };
            for o in observers.iter_mut() {
                o.on_transition(&ctx);
            }
            self.layout = layout;
            self.edges = edges;
            self.field = field;
            regrouped = true;
        }

        let mut next_y = Vec::with_capacity(clusters.len());
        let mut qs = Vec::with_capacity(clusters.len());
        for c in &clusters {
            let s = self.fold_mean(&c.members, |d| d.s_at(n));
            next_y.push(c.y + s * self.dt);
            qs.push(
                c.members
                    .iter()
                    .map(|&i| self.interfaces[i].q_at(n))
                    .fold(f64::INFINITY, f64::min),
            );
        }
        let after = self.place(n + 1, &clusters, &next_y)?;
        let params: Vec<InterfaceParams> = self
            .layout
            .anchors()
            .iter()
            .zip(after.anchors())
            .zip(&qs)
            .map(|((a, b), &q)| InterfaceParams {
                s: (b.y - a.y) / self.dt,
                q,
            })
            .collect();
        let output = advance_layout(&self.model, &self.layout, &after, &self.field, &params, self.dt)
            .map_err(|source| SchemeError::Mesh { n, source })?;
        let after_edges = after.edge_positions();
        let infos: Vec<ClusterInfo> = clusters
            .iter()
            .enumerate()
            .map(|(k, c)| ClusterInfo {
                members: self.ids(c),
                y_n: c.y,
                y_np1: next_y[k],
                case: output.plan.cases[k],
                flux: output.interfaces[k],
            })
            .collect();
        let ctx = StepContext {
            n,
            t,
            dt: self.dt,
            dx: self.grid.dx,
            model: &self.model,
            before: &self.layout,
            after: &after,
            before_edges: &self.edges,
            after_edges: &after_edges,
            field_before: &self.field,
            field_after: &output.values,
            output: &output,
            clusters: &infos,
            regrouped,
        };
        for o in observers.iter_mut() {
            o.on_step(&ctx);
        }
        for (c, y) in clusters.iter_mut().zip(next_y) {
            c.y = y;
        }
        self.clusters = clusters;
        self.layout = after;
        self.edges = after_edges;
        self.field = output.values;
        self.n += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Activate,
    Deactivate,
}

/// Inserts or removes the anchor at `y`, transferring the field
/// conservatively onto the new mesh.
pub fn endpoint_transition(
    layout: &Layout,
    field: &[f64],
    y: f64,
    kind: Endpoint,
) -> Result<(Layout, Vec<f64>), MeshError> {
    let grid = *layout.grid();
    let mut ys: Vec<f64> = layout.anchors().iter().map(|a| a.y).collect();
    match kind {
        Endpoint::Activate => {
            ys.push(y);
            ys.sort_by(f64::total_cmp);
        }
        Endpoint::Deactivate => {
            let (k, _) = ys
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - y).abs().total_cmp(&(b.1 - y).abs()))
                .ok_or(MeshError::OutOfDomain { y })?;
            ys.remove(k);
        }
    }
    let next = Layout::from_positions(grid, &ys)?;
    let values = reproject(&layout.edge_positions(), field, &next.edge_positions());
    Ok((next, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{ConstraintProfile, Path};
    use approx::assert_abs_diff_eq;

    fn stationary(id: u32, y: f64, q: f64, t1: f64) -> InterfaceSpec {
        InterfaceSpec::new(id, Path::stationary(y, 0.0, t1), ConstraintProfile::constant(q, 0.0, t1))
    }

    fn problem(interfaces: Vec<InterfaceSpec>, initial: InitialDatum) -> Problem {
        Problem {
            model: FluxModel::quadratic(),
            grid: UniformGrid::new(-2.0, 2.0, 0.02).unwrap(),
            lambda: 0.35,
            horizon: 1.0,
            initial,
            interfaces,
        }
    }

    #[test]
    fn constant_subcritical_state_is_preserved() {
        let p = problem(vec![stationary(1, 0.0, 0.2, 1.0)], InitialDatum::Constant(0.1));
        let mut sim = Simulation::new(&p).unwrap();
        sim.run(&mut []).unwrap();
        assert!(sim.field().iter().all(|v| (v - 0.1).abs() < 1e-14));
    }

    #[test]
    fn duplicate_interfaces_match_single() {
        let datum = InitialDatum::Piecewise {
            breaks: vec![-0.5, 0.4],
            values: vec![0.2, 0.7, 0.3],
        };
        let path = Path::new(vec![(0.0, -0.3), (1.0, 0.0)]);
        let mk = |id| InterfaceSpec::new(id, path.clone(), ConstraintProfile::constant(0.08, 0.0, 1.0));
        let mut single = Simulation::new(&problem(vec![mk(1)], datum.clone())).unwrap();
        let mut double = Simulation::new(&problem(vec![mk(1), mk(2)], datum)).unwrap();
        single.run(&mut []).unwrap();
        double.run(&mut []).unwrap();
        assert_eq!(single.field(), double.field());
    }

    #[test]
    fn far_apart_interfaces_are_local() {
        let datum = InitialDatum::Piecewise {
            breaks: vec![-1.2, -0.6, 1.0],
            values: vec![0.1, 0.8, 0.3, 0.6],
        };
        let a = stationary(1, -0.8, 0.1, 1.0);
        let b = stationary(2, 1.2, 0.05, 1.0);
        let mut single = Simulation::new(&problem(vec![a.clone()], datum.clone())).unwrap();
        let mut both = Simulation::new(&problem(vec![a, b], datum)).unwrap();
        single.run(&mut []).unwrap();
        both.run(&mut []).unwrap();
        // Cells left of x = 0 are outside the cone of the second interface.
        let cut = single.edges().iter().position(|&x| x >= 0.0).unwrap();
        for k in 0..cut {
            assert_abs_diff_eq!(single.field()[k], both.field()[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn transitions_conserve_mass() {
        let datum = InitialDatum::Piecewise {
            breaks: vec![-1.0, 0.5],
            values: vec![0.3, 0.9, 0.2],
        };
        let short = InterfaceSpec::new(
            1,
            Path::new(vec![(0.2, 0.0), (0.6, 0.1)]),
            ConstraintProfile::constant(0.05, 0.2, 0.6),
        );
        let p = problem(vec![short], datum);
        let mut sim = Simulation::new(&p).unwrap();
        struct Mass(Vec<f64>);
        impl StepObserver for Mass {
            fn on_transition(&mut self, ctx: &TransitionContext) {
                let m = |e: &[f64], v: &[f64]| -> f64 {
                    v.iter().zip(e.windows(2)).map(|(v, w)| v * (w[1] - w[0])).sum()
                };
                self.0.push(m(ctx.after_edges, ctx.field_after) - m(ctx.before_edges, ctx.field_before));
            }
        }
        let mut obs = Mass(vec![]);
        sim.run(&mut [&mut obs]).unwrap();
        assert_eq!(obs.0.len(), 2);
        assert!(obs.0.iter().all(|d| d.abs() < 1e-14));
    }

    #[test]
    fn endpoint_transition_on_constant_field() {
        let grid = UniformGrid::new(0.0, 2.0, 0.1).unwrap();
        let layout = Layout::uniform(grid);
        let field = vec![0.4; 20];
        let (with, f1) = endpoint_transition(&layout, &field, 1.05, Endpoint::Activate).unwrap();
        assert_eq!(with.anchors().len(), 1);
        let (back, f2) = endpoint_transition(&with, &f1, 1.05, Endpoint::Deactivate).unwrap();
        assert!(back.anchors().is_empty());
        assert!(f2.iter().all(|v| (v - 0.4).abs() < 1e-14));
    }
}
