use proptest::prelude::*;

use lwr_core::diagnostics::{BoundsMonitor, MassMonitor, RunSummary};
use lwr_core::flux::{FluxModel, GermClass};
use lwr_core::mesh::{l1_distance, reproject, UniformGrid};
use lwr_core::multi::{Problem, Simulation};
use lwr_core::scenario::{parse_scenario, serialize_scenario};
use lwr_core::scheme::InitialDatum;
use lwr_core::trajectory::{ConstraintProfile, InterfaceSpec, Path};

fn model_strategy() -> impl Strategy<Value = FluxModel> {
    prop_oneof![
        Just(FluxModel::quadratic()),
        prop::collection::vec(-3.0..-0.5f64, 2..9)
            .prop_map(|c| FluxModel::tabulated(c).unwrap()),
    ]
}

fn density() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64]
}

/// Brute-force Godunov flux of `F_s` by sampling the interval between `a` and `b`.
fn godunov_brute(m: &FluxModel, s: f64, a: f64, b: f64) -> f64 {
    let (lo, hi) = (a.min(b), a.max(b));
    let samples = (0..=4000)
        .map(|k| lo + (hi - lo) * k as f64 / 4000.0)
        .chain([lo, hi, m.shifted_argmax(s).clamp(lo, hi)])
        .map(|r| m.shifted_flux(s, r));
    if a <= b {
        samples.fold(f64::INFINITY, f64::min)
    } else {
        samples.fold(f64::NEG_INFINITY, f64::max)
    }
}

proptest! {
    #[test]
    fn engquist_osher_is_consistent_and_monotone(
        m in model_strategy(), a in density(), b in density(), h in 1e-6..0.3f64,
    ) {
        prop_assert!((m.engquist_osher(a, a) - m.flux(a)).abs() < 1e-12);
        let up = |x: f64| (x + h).min(1.0);
        prop_assert!(m.engquist_osher(up(a), b) - m.engquist_osher(a, b) >= -1e-12);
        prop_assert!(m.engquist_osher(a, up(b)) - m.engquist_osher(a, b) <= 1e-12);
    }

    #[test]
    fn godunov_matches_brute_force(
        m in model_strategy(), s in -0.5..0.5f64, a in density(), b in density(),
    ) {
        let g = m.godunov_shifted(s, a, b);
        prop_assert!((g - godunov_brute(&m, s, a, b)).abs() < 1e-6, "{g}");
    }

    #[test]
    fn interface_flux_is_capped(
        m in model_strategy(), s in 0.0..0.5f64, frac in 0.0..1.0f64, a in density(), b in density(),
    ) {
        let q = frac * m.max_shifted_flux(s);
        let f = m.interface_flux(s, q, a, b);
        prop_assert!(f <= q + 1e-15);
        prop_assert!(f <= m.godunov_shifted(s, a, b) + 1e-15);
    }

    #[test]
    fn germ_couple_solves_the_constraint(
        m in model_strategy(), s in -0.3..0.5f64, frac in 0.0..0.999f64,
    ) {
        let lo = (-s).max(0.0);
        let max = m.max_shifted_flux(s);
        prop_assume!(max > lo + 1e-6);
        let q = lo + frac * (max - lo);
        let g = m.germ_couple(s, q).unwrap();
        prop_assert!((m.shifted_flux(s, g.rho_hat) - q).abs() < 1e-9);
        prop_assert!((m.shifted_flux(s, g.rho_check) - q).abs() < 1e-9);
        let theta = m.shifted_argmax(s);
        prop_assert!(g.rho_check <= theta + 1e-9 && theta <= g.rho_hat + 1e-9);
        prop_assert_eq!(m.classify_germ(s, q, g.rho_hat, g.rho_check), GermClass::G1);
    }

    #[test]
    fn reprojection_conserves_mass(
        values in prop::collection::vec(0.0..=1.0f64, 4..30),
        cuts in prop::collection::vec(0.001..0.999f64, 1..20),
    ) {
        let from: Vec<f64> = (0..=values.len()).map(|k| k as f64 / values.len() as f64).collect();
        let mut to = cuts;
        to.extend([0.0, 1.0]);
        to.sort_by(f64::total_cmp);
        to.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        let out = reproject(&from, &values, &to);
        let mass = |e: &[f64], v: &[f64]| -> f64 {
            v.iter().zip(e.windows(2)).map(|(v, w)| v * (w[1] - w[0])).sum()
        };
        prop_assert!((mass(&from, &values) - mass(&to, &out)).abs() < 1e-12);
        prop_assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

/// Data supported in `[−0.5, 0.5]`, run short enough that no wave reaches
/// the boundary.
fn small_problem(mut values: Vec<f64>, y0: f64, s: f64, q_frac: f64) -> Problem {
    let breaks = (0..=values.len())
        .map(|k| -0.5 + k as f64 / values.len() as f64)
        .collect();
    values.insert(0, 0.0);
    values.push(0.0);
    let q = q_frac * 0.25 * (1.0 - s) * (1.0 - s);
    Problem {
        model: FluxModel::quadratic(),
        grid: UniformGrid::new(-1.0, 1.0, 0.02).unwrap(),
        lambda: 0.4,
        horizon: 0.4,
        initial: InitialDatum::Piecewise { breaks, values },
        interfaces: vec![InterfaceSpec::new(
            1,
            Path::new(vec![(0.0, y0), (1.0, y0 + s)]),
            ConstraintProfile::constant(q, 0.0, 1.0),
        )],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scheme_stays_bounded_and_conservative(
        values in prop::collection::vec(density(), 2..6),
        y0 in -0.6..0.0f64,
        s in 0.0..0.24f64,
        q_frac in 0.0..0.99f64,
    ) {
        let p = small_problem(values, y0, s, q_frac);
        let mut sim = Simulation::new(&p).unwrap();
        let mut bounds = BoundsMonitor::default();
        let mut mass = MassMonitor::default();
        sim.run(&mut [&mut bounds, &mut mass]).unwrap();
        prop_assert!(bounds.report.all_passed());
        prop_assert!(mass.report.all_passed());
    }

    #[test]
    fn scheme_preserves_order(
        values in prop::collection::vec(density(), 2..6),
        bump in prop::collection::vec(0.0..0.3f64, 2..6),
        y0 in -0.6..0.0f64,
        s in 0.0..0.24f64,
        q_frac in 0.0..0.99f64,
    ) {
        let upper: Vec<f64> = values
            .iter()
            .zip(bump.iter().cycle())
            .map(|(v, b)| (v + b).min(1.0))
            .collect();
        let run = |v: Vec<f64>| {
            let mut sim = Simulation::new(&small_problem(v, y0, s, q_frac)).unwrap();
            let mut summary = RunSummary::default();
            sim.run(&mut [&mut summary]).unwrap();
            summary
        };
        let (a, b) = (run(values), run(upper));
        prop_assert!(a.final_field.iter().zip(&b.final_field).all(|(x, y)| x <= &(y + 1e-12)));
        // L1 contraction for a common constraint.
        let window = (f64::NEG_INFINITY, f64::INFINITY);
        let d0 = l1_distance(&a.initial_edges, &a.initial_field, &b.initial_edges, &b.initial_field, window);
        let d1 = l1_distance(&a.final_edges, &a.final_field, &b.final_edges, &b.final_field, window);
        prop_assert!(d1 <= d0 + 1e-12);
    }
}

fn scenario_text(values: &[f64], dx: f64, y0: f64, s: f64, q: f64, snaps: &[f64]) -> String {
    let breaks: Vec<String> = (1..values.len())
        .map(|k| format!("{}", -1.0 + 2.0 * k as f64 / values.len() as f64))
        .collect();
    let vals: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    let snaps: Vec<String> = snaps.iter().map(|v| v.to_string()).collect();
    format!(
        "[domain]\nx_min = -1\nx_max = 1\ndx = {dx}\nlambda = 0.4\nhorizon = 1\n\n\
         [initial]\npreset = piecewise\nbreaks = {}\nvalues = {}\n\n\
         [interface]\nid = 7\npath = 0:{y0}, 1:{}\nconstraint = 0:1:{q}\n\n\
         [output]\nsnapshots = {}\n",
        breaks.join(", "),
        vals.join(", "),
        y0 + s,
        snaps.join(", ")
    )
}

proptest! {
    #[test]
    fn scenario_text_round_trips(
        values in prop::collection::vec(0.0..=1.0f64, 2..6),
        dx in 0.005..0.05f64,
        y0 in -0.5..0.0f64,
        s in 0.0..0.2f64,
        q in 0.0..0.15f64,
        snaps in prop::collection::vec(0.0..1.0f64, 0..4),
    ) {
        let parsed = parse_scenario(&scenario_text(&values, dx, y0, s, q, &snaps)).unwrap();
        let text = serialize_scenario(&parsed);
        let again = parse_scenario(&text).unwrap();
        prop_assert_eq!(&parsed, &again);
        prop_assert_eq!(serialize_scenario(&again), text);
    }
}
