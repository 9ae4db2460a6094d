//! Pointwise flux mathematics for the constrained LWR model.
//!
//! Everything here is a pure function of a [`FluxModel`]: the physical flux
//! `f`, the flux `F_s(ρ) = f(ρ) − sρ` seen by an observer moving at speed
//! `s`, its Kruzhkov entropy flux, the admissibility germ attached to a
//! constraint level `q`, and the two numerical fluxes used by the scheme
//! (Engquist–Osher away from interfaces, shifted Godunov at an interface).

use thiserror::Error;

/// Slack allowed on the density domain `[0, 1]` before a value is rejected.
pub const DOMAIN_SLACK: f64 = 1e-12;

/// Absolute tolerance on flux equalities when testing germ membership.
pub const GERM_TOL: f64 = 1e-9;

/// Bisection tolerance for root finding on non-quadratic fluxes.
const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluxError {
    #[error("density {0} outside [0, 1]")]
    Domain(f64),
    #[error("constraint q = {q} is inadmissible for interface speed s = {s}")]
    InadmissibleConstraint { s: f64, q: f64 },
    #[error("no root: q = {q} is not below max F_s = {max} (s = {s})")]
    NoRoot { s: f64, q: f64, max: f64 },
    #[error("invalid flux definition: {0}")]
    InvalidModel(String),
}

/// Concave flux defined by a piecewise-linear second derivative on a uniform
/// grid of `[0, 1]`, integrated twice with `f(0) = f(1) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedFlux {
    curvature: Vec<f64>,
    /// `f'` at the grid nodes.
    slope: Vec<f64>,
    /// `f` at the grid nodes.
    value: Vec<f64>,
    h: f64,
}

impl TabulatedFlux {
    fn new(curvature: Vec<f64>) -> Result<Self, FluxError> {
        if curvature.len() < 2 {
            return Err(FluxError::InvalidModel(
                "tabulated curvature needs at least two samples".into(),
            ));
        }
        if let Some(g) = curvature.iter().find(|g| !g.is_finite() || **g >= 0.0) {
            return Err(FluxError::InvalidModel(format!(
                "curvature sample {g} is not strictly negative"
            )));
        }
        let m = curvature.len() - 1;
        let h = 1.0 / m as f64;
        let mut slope = vec![0.0; m + 1];
        let mut value = vec![0.0; m + 1];
        for k in 0..m {
            let (g0, g1) = (curvature[k], curvature[k + 1]);
            let c = (g1 - g0) / h;
            slope[k + 1] = slope[k] + g0 * h + c * h * h / 2.0;
            value[k + 1] = value[k] + slope[k] * h + g0 * h * h / 2.0 + c * h * h * h / 6.0;
        }
        // f is affine in f'(0); shift so that f(1) = 0.
        let shift = -value[m];
        for k in 0..=m {
            slope[k] += shift;
            value[k] += shift * (k as f64 * h);
        }
        Ok(Self {
            curvature,
            slope,
            value,
            h,
        })
    }

    fn locate(&self, rho: f64) -> (usize, f64) {
        let m = self.curvature.len() - 1;
        let r = rho.clamp(0.0, 1.0);
        let k = ((r / self.h).floor() as usize).min(m - 1);
        (k, r - k as f64 * self.h)
    }

    fn f(&self, rho: f64) -> f64 {
        let (k, t) = self.locate(rho);
        let g0 = self.curvature[k];
        let c = (self.curvature[k + 1] - g0) / self.h;
        self.value[k] + self.slope[k] * t + g0 * t * t / 2.0 + c * t * t * t / 6.0
    }

    fn df(&self, rho: f64) -> f64 {
        let (k, t) = self.locate(rho);
        let g0 = self.curvature[k];
        let c = (self.curvature[k + 1] - g0) / self.h;
        self.slope[k] + g0 * t + c * t * t / 2.0
    }

    fn d2f(&self, rho: f64) -> f64 {
        let (k, t) = self.locate(rho);
        let g0 = self.curvature[k];
        g0 + (self.curvature[k + 1] - g0) * t / self.h
    }

    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FluxKind {
    /// `f(ρ) = ρ(1 − ρ)`.
    QuadraticLwr,
    Tabulated(TabulatedFlux),
}

/// A bell-shaped, uniformly concave flux on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxModel {
    kind: FluxKind,
    rho_bar: f64,
    mu: f64,
    lipschitz: f64,
}

/// The saturated couple `(ρ̂, ρ̌)` solving `F_s(ρ) = q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GermCouple {
    pub rho_hat: f64,
    pub rho_check: f64,
    pub s: f64,
    pub q: f64,
}

/// Which part of the admissibility germ a trace pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GermClass {
    /// The saturated non-classical couple.
    G1,
    /// Equal traces with sub-constraint flux.
    G2,
    /// Increasing equal-flux pair below the constraint.
    G3,
    NotInGerm,
}

impl std::str::FromStr for GermClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "G1" => Ok(GermClass::G1),
            "G2" => Ok(GermClass::G2),
            "G3" => Ok(GermClass::G3),
            "none" => Ok(GermClass::NotInGerm),
            other => Err(format!("unknown germ class `{other}`")),
        }
    }
}

impl std::fmt::Display for GermClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            GermClass::G1 => "G1",
            GermClass::G2 => "G2",
            GermClass::G3 => "G3",
            GermClass::NotInGerm => "none",
        };
        f.write_str(s)
    }
}

fn bisect(mut lo: f64, mut hi: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
    // g(lo) and g(hi) have opposite signs (or one is zero).
    let glo = g(lo);
    if glo == 0.0 {
        return lo;
    }
    let lo_negative = glo < 0.0;
    for _ in 0..200 {
        if hi - lo <= ROOT_TOL * 1e-3 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl FluxModel {
    pub fn quadratic() -> Self {
        Self {
            kind: FluxKind::QuadraticLwr,
            rho_bar: 0.5,
            mu: 2.0,
            lipschitz: 1.0,
        }
    }

    /// Builds a concave flux from curvature samples `f''(k/m)`, `k = 0..=m`.
    pub fn tabulated(curvature: Vec<f64>) -> Result<Self, FluxError> {
        let table = TabulatedFlux::new(curvature)?;
        let mu = -table
            .curvature
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let rho_bar = bisect(0.0, 1.0, |r| table.df(r));
        let lipschitz = table.df(0.0).abs().max(table.df(1.0).abs());
        Ok(Self {
            kind: FluxKind::Tabulated(table),
            rho_bar,
            mu,
            lipschitz,
        })
    }

    pub fn kind(&self) -> &FluxKind {
        &self.kind
    }

    /// Argmax of `f` on `[0, 1]`.
    pub fn rho_bar(&self) -> f64 {
        self.rho_bar
    }

    /// Uniform concavity constant: `f'' ≤ −μ`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `‖f'‖_∞` on `[0, 1]`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    #[inline]
    pub fn flux(&self, rho: f64) -> f64 {
        match &self.kind {
            FluxKind::QuadraticLwr => rho * (1.0 - rho),
            FluxKind::Tabulated(t) => t.f(rho),
        }
    }

    #[inline]
    pub fn derivative(&self, rho: f64) -> f64 {
        match &self.kind {
            FluxKind::QuadraticLwr => 1.0 - 2.0 * rho,
            FluxKind::Tabulated(t) => t.df(rho),
        }
    }

    pub fn second_derivative(&self, rho: f64) -> f64 {
        match &self.kind {
            FluxKind::QuadraticLwr => -2.0,
            FluxKind::Tabulated(t) => t.d2f(rho),
        }
    }

    /// Checked evaluation of `f`.
    pub fn eval_flux(&self, rho: f64) -> Result<f64, FluxError> {
        check_density(rho)?;
        Ok(self.flux(rho.clamp(0.0, 1.0)))
    }

    /// `F_s(ρ) = f(ρ) − sρ`.
    #[inline]
    pub fn shifted_flux(&self, s: f64, rho: f64) -> f64 {
        self.flux(rho) - s * rho
    }

    /// Density solving `f'(ρ) = ξ`, clamped to `[0, 1]`.
    pub fn inverse_derivative(&self, xi: f64) -> f64 {
        if xi >= self.derivative(0.0) {
            return 0.0;
        }
        if xi <= self.derivative(1.0) {
            return 1.0;
        }
        match &self.kind {
            FluxKind::QuadraticLwr => 0.5 * (1.0 - xi),
            FluxKind::Tabulated(_) => bisect(0.0, 1.0, |r| self.derivative(r) - xi),
        }
    }

    /// Maximiser of `F_s` on `[0, 1]`.
    pub fn shifted_argmax(&self, s: f64) -> f64 {
        self.inverse_derivative(s)
    }

    pub fn max_shifted_flux(&self, s: f64) -> f64 {
        self.shifted_flux(s, self.shifted_argmax(s))
    }

    /// `Φ_s(a, b) = sgn(a − b)(F_s(a) − F_s(b))`.
    pub fn entropy_flux(&self, s: f64, a: f64, b: f64) -> f64 {
        let d = self.shifted_flux(s, a) - self.shifted_flux(s, b);
        if a > b {
            d
        } else if a < b {
            -d
        } else {
            0.0
        }
    }

    /// True iff `q ∈ [max(0, −s), max F_s[`.
    pub fn constraint_admissible(&self, s: f64, q: f64) -> bool {
        if !s.is_finite() || !q.is_finite() {
            return false;
        }
        let lower = if s >= 0.0 { 0.0 } else { -s };
        q >= lower && q < self.max_shifted_flux(s)
    }

    /// The two roots of `F_s(ρ) = q`, ordered `ρ̂ > ρ̌`.
    pub fn germ_couple(&self, s: f64, q: f64) -> Result<GermCouple, FluxError> {
        let max = self.max_shifted_flux(s);
        if !(q < max) {
            return Err(FluxError::NoRoot { s, q, max });
        }
        if !self.constraint_admissible(s, q) {
            return Err(FluxError::InadmissibleConstraint { s, q });
        }
        let (rho_hat, rho_check) = match &self.kind {
            FluxKind::QuadraticLwr => {
                // ρ² − (1 − s)ρ + q = 0; admissibility puts 1 − s > 0 here.
                let b = 1.0 - s;
                let root = (b * b - 4.0 * q).max(0.0).sqrt();
                let hat = 0.5 * (b + root);
                let check = if b + root > 0.0 { 2.0 * q / (b + root) } else { 0.0 };
                (hat, check)
            }
            FluxKind::Tabulated(_) => {
                let theta = self.shifted_argmax(s);
                let g = |r: f64| self.shifted_flux(s, r) - q;
                (bisect(theta, 1.0, g), bisect(0.0, theta, g))
            }
        };
        Ok(GermCouple {
            rho_hat,
            rho_check,
            s,
            q,
        })
    }

    /// `R_s(κ, q) = 2 (F_s(κ) − min(F_s(κ), q))`.
    pub fn remainder(&self, s: f64, kappa: f64, q: f64) -> f64 {
        let fk = self.shifted_flux(s, kappa);
        2.0 * (fk - fk.min(q))
    }

    pub fn classify_germ(&self, s: f64, q: f64, k_l: f64, k_r: f64) -> GermClass {
        self.classify_germ_with_tol(s, q, k_l, k_r, GERM_TOL)
    }

    /// Germ membership with explicit tolerance on flux equalities.
    ///
    /// Precedence on ties: G1, then G2, then G3.
    pub fn classify_germ_with_tol(
        &self,
        s: f64,
        q: f64,
        k_l: f64,
        k_r: f64,
        tol: f64,
    ) -> GermClass {
        let fl = self.shifted_flux(s, k_l);
        let fr = self.shifted_flux(s, k_r);
        let theta = self.shifted_argmax(s);
        if k_l > k_r
            && (fl - q).abs() <= tol
            && (fr - q).abs() <= tol
            && k_l >= theta - tol
            && k_r <= theta + tol
        {
            return GermClass::G1;
        }
        if (k_l - k_r).abs() <= tol && fl.max(fr) <= q + tol {
            return GermClass::G2;
        }
        if k_l < k_r && (fl - fr).abs() <= tol && fl.max(fr) <= q + tol {
            return GermClass::G3;
        }
        GermClass::NotInGerm
    }

    /// Engquist–Osher flux `q₊(a) + q₋(b)`.
    #[inline]
    pub fn engquist_osher(&self, a: f64, b: f64) -> f64 {
        let rb = self.rho_bar;
        self.flux(a.min(rb)) + self.flux(b.max(rb)) - self.flux(rb)
    }

    /// Exact Godunov flux for the concave flux `F_s`.
    #[inline]
    pub fn godunov_shifted(&self, s: f64, a: f64, b: f64) -> f64 {
        let theta = self.shifted_argmax(s);
        self.shifted_flux(s, a.min(theta))
            .min(self.shifted_flux(s, b.max(theta)))
    }

    /// Constrained interface flux `God^s(a, b) ∧ q`.
    #[inline]
    pub fn interface_flux(&self, s: f64, q: f64, a: f64, b: f64) -> f64 {
        self.godunov_shifted(s, a, b).min(q)
    }
}

pub fn check_density(rho: f64) -> Result<(), FluxError> {
    if rho.is_finite() && (-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&rho) {
        Ok(())
    } else {
        Err(FluxError::Domain(rho))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn q() -> FluxModel {
        FluxModel::quadratic()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(q().eval_flux(0.0).unwrap(), 0.0);
        assert_eq!(q().eval_flux(0.5).unwrap(), 0.25);
        assert_abs_diff_eq!(q().eval_flux(0.8).unwrap(), 0.8 * 0.2, epsilon = 1e-15);
        assert!(matches!(q().eval_flux(1.1), Err(FluxError::Domain(_))));
        assert!(q().eval_flux(1.0 + 1e-13).is_ok());
    }

    #[test]
    fn shifted_and_entropy_examples() {
        let m = q();
        assert_abs_diff_eq!(m.shifted_flux(0.0, 0.5), 0.25);
        assert_abs_diff_eq!(m.shifted_flux(0.3, 1.0), -0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(m.shifted_flux(0.2, 0.4), 0.24 - 0.08, epsilon = 1e-15);
        assert_eq!(m.entropy_flux(0.0, 0.3, 0.3), 0.0);
        assert_abs_diff_eq!(m.entropy_flux(0.0, 0.8, 0.2), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.entropy_flux(0.0, 0.5, 0.2), 0.09, epsilon = 1e-15);
        assert_abs_diff_eq!(
            m.entropy_flux(0.1, 0.2, 0.7),
            -m.entropy_flux(0.1, 0.7, 0.2),
            epsilon = 1e-15
        );
    }

    #[test]
    fn germ_couple_examples() {
        let m = q();
        let g = m.germ_couple(0.0, 0.1).unwrap();
        assert_abs_diff_eq!(g.rho_hat, (1.0 + 0.6f64.sqrt()) / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g.rho_check, (1.0 - 0.6f64.sqrt()) / 2.0, epsilon = 1e-14);
        let g = m.germ_couple(0.0, 0.25 - 1e-15).unwrap();
        assert_abs_diff_eq!(g.rho_hat, 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(g.rho_check, 0.5, epsilon = 1e-6);
        let g = m.germ_couple(0.0, 0.0).unwrap();
        assert_eq!((g.rho_hat, g.rho_check), (1.0, 0.0));
        assert!(matches!(
            m.germ_couple(0.0, 0.25),
            Err(FluxError::NoRoot { .. })
        ));
        assert!(matches!(
            m.germ_couple(-0.1, 0.05),
            Err(FluxError::InadmissibleConstraint { .. })
        ));
    }

    #[test]
    fn admissibility_examples() {
        let m = q();
        assert!(m.constraint_admissible(0.0, 0.1));
        assert!(!m.constraint_admissible(0.0, 0.25));
        assert!(!m.constraint_admissible(-0.1, 0.05));
        assert!(m.constraint_admissible(-0.1, 0.1));
        assert!(!m.constraint_admissible(0.0, -0.01));
        // s = 0.3: max F_s = 0.35 · 0.35
        assert!(m.constraint_admissible(0.3, 0.1225 - 1e-9));
        assert!(!m.constraint_admissible(0.3, 0.1225));
    }

    #[test]
    fn remainder_examples() {
        let m = q();
        assert_abs_diff_eq!(m.remainder(0.0, 0.5, 0.1), 0.3, epsilon = 1e-15);
        assert_eq!(m.remainder(0.0, 0.05, 0.1), 0.0);
        assert_eq!(m.remainder(0.0, 0.0, 0.1), 0.0);
    }

    #[test]
    fn classify_examples() {
        let m = q();
        let g = m.germ_couple(0.0, 0.1).unwrap();
        assert_eq!(m.classify_germ(0.0, 0.1, g.rho_hat, g.rho_check), GermClass::G1);
        assert_eq!(m.classify_germ(0.0, 0.1, 0.05, 0.05), GermClass::G2);
        assert_eq!(m.classify_germ(0.0, 0.1, 0.2, 0.8), GermClass::NotInGerm);
        assert_eq!(m.classify_germ(0.0, 0.1, g.rho_check, g.rho_hat), GermClass::G3);
        assert_eq!(m.classify_germ(0.0, 0.1, 0.3, 0.3), GermClass::NotInGerm);
    }

    #[test]
    fn engquist_osher_examples() {
        let m = q();
        assert_abs_diff_eq!(m.engquist_osher(0.5, 0.5), 0.25);
        assert_abs_diff_eq!(m.engquist_osher(0.2, 0.8), 0.07, epsilon = 1e-15);
        assert_abs_diff_eq!(m.engquist_osher(0.8, 0.2), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn godunov_examples() {
        let m = q();
        assert_abs_diff_eq!(m.godunov_shifted(0.0, 0.8, 0.2), 0.25);
        assert_abs_diff_eq!(m.godunov_shifted(0.0, 0.1, 0.9), 0.09, epsilon = 1e-15);
        assert_abs_diff_eq!(m.godunov_shifted(0.0, 0.3, 0.3), 0.21, epsilon = 1e-15);
    }

    #[test]
    fn interface_flux_examples() {
        let m = q();
        assert_abs_diff_eq!(m.interface_flux(0.0, 0.1, 0.8, 0.2), 0.1);
        assert_abs_diff_eq!(m.interface_flux(0.0, 0.1, 0.05, 0.05), 0.0475, epsilon = 1e-15);
        assert_eq!(m.interface_flux(0.0, 0.0, 0.5, 0.5), 0.0);
    }

    #[test]
    fn tabulated_constant_curvature_matches_quadratic() {
        let t = FluxModel::tabulated(vec![-2.0; 11]).unwrap();
        let qm = q();
        for k in 0..=1000 {
            let r = k as f64 / 1000.0;
            assert_abs_diff_eq!(t.flux(r), qm.flux(r), epsilon = 1e-13);
            assert_abs_diff_eq!(t.derivative(r), qm.derivative(r), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(t.rho_bar(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(t.mu(), 2.0);
        assert_abs_diff_eq!(t.lipschitz(), 1.0, epsilon = 1e-12);
        let g = t.germ_couple(0.1, 0.05).unwrap();
        let gq = qm.germ_couple(0.1, 0.05).unwrap();
        assert_abs_diff_eq!(g.rho_hat, gq.rho_hat, epsilon = 1e-10);
        assert_abs_diff_eq!(g.rho_check, gq.rho_check, epsilon = 1e-10);
    }

    #[test]
    fn tabulated_rejects_nonconcave() {
        assert!(FluxModel::tabulated(vec![-1.0, 0.0, -1.0]).is_err());
        assert!(FluxModel::tabulated(vec![-1.0]).is_err());
    }

    fn bell_shape_invariants(m: &FluxModel) {
        assert!(m.flux(0.0).abs() <= 1e-12);
        assert!(m.flux(1.0).abs() <= 1e-12);
        for k in 1..1000 {
            let r = k as f64 * 1e-3;
            if (r - m.rho_bar()).abs() > 1e-9 {
                assert!(m.derivative(r) * (m.rho_bar() - r) > 0.0, "r = {r}");
            }
            assert!(m.second_derivative(r) <= -m.mu() + 1e-12);
        }
    }

    #[test]
    fn flux_model_invariants() {
        bell_shape_invariants(&q());
        bell_shape_invariants(&FluxModel::tabulated(vec![-3.0, -2.0, -1.5, -2.5]).unwrap());
    }
}
