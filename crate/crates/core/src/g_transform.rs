//! The lower envelope `G(η) = inf_{0≤θ≤1} [ψ(1−θ) + θη]`, its minimizer
//! `g(η)`, and numerical concavity certificates for `r ↦ exp(G(γ(r) − γ(r₀)))`.

use std::fmt;

use crate::error::{Error, Result};
use crate::numeric::ExtReal;
use crate::psi::{second_derivative_bound, GridReport, PsiSpec};

/// Decreasing rate function `γ : [0,1] → [0,∞]` with `γ(0) = ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    /// `γ(r) = log(1/r)`.
    LogInv,
    /// `γ(r) = c·log(1/r)`, `c > 0`.
    CLogInv(f64),
}

impl GammaSpec {
    pub fn c_log_inv(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::OutOfDomain { what: "c", value: c, domain: "(0, ∞)" });
        }
        Ok(GammaSpec::CLogInv(c))
    }

    fn scale(&self) -> f64 {
        match self {
            GammaSpec::LogInv => 1.0,
            GammaSpec::CLogInv(c) => *c,
        }
    }

    /// `γ(r)` for `r ∈ [0,1]`; `γ(0) = ∞`.
    pub fn eval(&self, r: f64) -> ExtReal {
        if r <= 0.0 {
            ExtReal::Infinity
        } else {
            ExtReal::Finite(-self.scale() * r.ln())
        }
    }

    /// `γ'(r)` for `r > 0`.
    pub fn deriv(&self, r: f64) -> f64 {
        -self.scale() / r
    }

    /// `γ''(r)` for `r > 0`.
    pub fn second_deriv(&self, r: f64) -> f64 {
        self.scale() / (r * r)
    }

    /// `sup_r ξ''(r)/ξ'(r)²` for `ξ = γ − γ(r₀)`; constant `1/c` here.
    pub fn curvature_ratio(&self) -> f64 {
        1.0 / self.scale()
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for GammaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaSpec::LogInv => write!(f, "log_inv"),
            GammaSpec::CLogInv(c) => write!(f, "c_log_inv(c={c})"),
        }
    }
}

/// Default relative bisection width for `g`.
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
const BISECTION_CAP: usize = 200;

/// `G` and `g` for a fixed `ψ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GTransform {
    psi: PsiSpec,
    deriv_at_one: ExtReal,
    tol: f64,
}

impl GTransform {
    pub fn new(psi: PsiSpec) -> Self {
        Self { psi, deriv_at_one: psi.deriv_at_one(), tol: DEFAULT_ROOT_TOL }
    }

    pub fn with_tolerance(psi: PsiSpec, tol: f64) -> Result<Self> {
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::OutOfDomain { what: "tol", value: tol, domain: "(0, ∞)" });
        }
        Ok(Self { tol, ..Self::new(psi) })
    }

    pub fn psi(&self) -> &PsiSpec {
        &self.psi
    }

    pub fn deriv_at_one(&self) -> ExtReal {
        self.deriv_at_one
    }

    /// `G(η, θ) = ψ(1−θ) + θη`.
    pub fn pointwise(&self, eta: ExtReal, theta: f64) -> ExtReal {
        match eta {
            ExtReal::Infinity if theta > 0.0 => ExtReal::Infinity,
            ExtReal::Infinity => ExtReal::Finite(self.psi.value_at_one()),
            ExtReal::Finite(eta) => ExtReal::Finite(self.psi.eval_reflected(theta) + theta * eta),
        }
    }

    /// Minimizer `g(η)`: the root of `ψ'(1−θ) = η` when `η < ψ'(1)`, else 0.
    pub fn g(&self, eta: ExtReal) -> f64 {
        let eta = match eta {
            ExtReal::Infinity => return 0.0,
            ExtReal::Finite(e) => e,
        };
        if eta <= 0.0 {
            return 1.0;
        }
        if ExtReal::Finite(eta).ge(self.deriv_at_one) {
            return 0.0;
        }
        // ψ'(1−θ) decreases from ψ'(1) > η at θ=0 to 0 < η at θ=1. Roots can
        // sit many decades below 1 when ψ'(1) = ∞, so the bracket is split in
        // the exponent first (squaring, then geometric means) and
        // arithmetically once lo and hi are within a factor of two.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..BISECTION_CAP {
            let mid = if lo == 0.0 {
                if hi >= 0.5 {
                    0.5 * hi
                } else {
                    hi * hi
                }
            } else if hi > 2.0 * lo {
                (lo * hi).sqrt()
            } else {
                0.5 * (lo + hi)
            };
            if mid <= lo || mid >= hi {
                break;
            }
            if self.psi.deriv_reflected(mid) > eta {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= self.tol * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// `G(η)`, with `G(0) = 0` and `G(∞) = ψ(1)`.
    pub fn value(&self, eta: ExtReal) -> f64 {
        match eta {
            ExtReal::Infinity => self.psi.value_at_one(),
            ExtReal::Finite(e) if e <= 0.0 => 0.0,
            ExtReal::Finite(e) if ExtReal::Finite(e).ge(self.deriv_at_one) => self.psi.value_at_one(),
            ExtReal::Finite(e) => {
                let theta = self.g(eta);
                self.psi.eval_reflected(theta) + e * theta
            }
        }
    }

    /// `G'(η) = g(η)`.
    pub fn derivative(&self, eta: ExtReal) -> f64 {
        self.g(eta)
    }

    /// `G''(η) = −1/ψ''(1−g(η))` for `0 < η < ψ'(1)`.
    pub fn second_derivative(&self, eta: f64) -> Result<f64> {
        if eta.is_nan() || eta <= 0.0 || ExtReal::Finite(eta).ge(self.deriv_at_one) {
            return Err(Error::OutOfDomain { what: "eta", value: eta, domain: "(0, ψ'(1))" });
        }
        let theta = self.g(ExtReal::Finite(eta));
        Ok(-1.0 / self.psi.second_deriv_reflected(theta))
    }
}

/// Values of `L(r) = exp(G(γ(r) − γ(r₀)))` along a grid and the worst
/// concavity defect.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcavityReport {
    pub r0: f64,
    pub r: Vec<f64>,
    pub l: Vec<f64>,
    /// Largest amount by which `L` falls below a chord between grid neighbours.
    pub worst_violation: f64,
    /// Location of `worst_violation`.
    pub worst_at: f64,
    pub scale: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Relative concavity tolerance for [`concavity_profile`].
pub const CONCAVITY_TOL: f64 = 1e-9;

/// Grid on `[0, r0]`: `uniform` equal steps plus a geometric tail refining
/// toward `r = 0` down to `1e-12·r0`.
pub fn refined_grid(r0: f64, uniform: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=uniform).map(|i| r0 * i as f64 / uniform as f64).collect();
    let mut r = r0 / uniform as f64;
    while r > 1e-12 * r0 {
        r *= 0.8;
        grid.push(r);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Numerical concavity certificate for `r ↦ exp(G(γ(r) − γ(r₀)))` on `[0, r₀]`.
///
/// `r = 0` is always included, where `L(0) = exp(G(∞)) = exp(ψ(1))`. The check
/// compares each interior value against the chord of its two neighbours, which
/// is the second-difference test on a nonuniform grid.
pub fn concavity_profile(gt: &GTransform, gamma: &GammaSpec, r0: f64, grid: &[f64]) -> Result<ConcavityReport> {
    if !(r0 > 0.0 && r0 <= 1.0) {
        return Err(Error::OutOfDomain { what: "r0", value: r0, domain: "(0, 1]" });
    }
    if let Some(&bad) = grid.iter().find(|r| !(**r >= 0.0 && **r <= r0)) {
        return Err(Error::OutOfDomain { what: "r", value: bad, domain: "[0, r0]" });
    }
    let mut r: Vec<f64> = std::iter::once(0.0).chain(grid.iter().copied()).collect();
    r.sort_by(f64::total_cmp);
    r.dedup();

    let gamma_r0 = gamma.eval(r0).finite().unwrap_or(f64::INFINITY);
    let l: Vec<f64> = r
        .iter()
        .map(|&ri| {
            let xi = match gamma.eval(ri) {
                ExtReal::Infinity => ExtReal::Infinity,
                ExtReal::Finite(g) => ExtReal::Finite((g - gamma_r0).max(0.0)),
            };
            gt.value(xi).exp()
        })
        .collect();

    let scale = l.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst_violation = f64::NEG_INFINITY;
    let mut worst_at = f64::NAN;
    for i in 1..r.len().saturating_sub(1) {
        let (a, b, c) = (r[i - 1], r[i], r[i + 1]);
        let chord = (l[i - 1] * (c - b) + l[i + 1] * (b - a)) / (c - a);
        let violation = chord - l[i];
        if violation > worst_violation {
            worst_violation = violation;
            worst_at = b;
        }
    }
    if r.len() < 3 {
        worst_violation = 0.0;
    }
    let tolerance = CONCAVITY_TOL * scale.max(1.0);
    Ok(ConcavityReport { r0, pass: worst_violation <= tolerance, r, l, worst_violation, worst_at, scale, tolerance })
}

/// Sufficient form of the concavity condition: `ψ''(1−θ) ≤ 1/(θ² + kθ)` on a
/// grid in `(0,1)`, where `k` bounds `ξ''/ξ'²`.
pub fn lemma_v_condition(psi: &PsiSpec, k: f64, grid: &[f64]) -> Result<GridReport> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::OutOfDomain { what: "k", value: k, domain: "[0, ∞)" });
    }
    if let Some(&bad) = grid.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::OutOfDomain { what: "theta", value: bad, domain: "(0, 1)" });
    }
    Ok(second_derivative_bound(psi, k, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psi::{open_unit_grid, psi_c, quadratic_psi};
    use approx::assert_relative_eq;

    fn fin(v: f64) -> ExtReal {
        ExtReal::Finite(v)
    }

    /// Brute-force minimum of `G(η, θ)` over a fine θ grid, refined around
    /// the best point.
    fn g_oracle(psi: &PsiSpec, eta: f64) -> f64 {
        let f = |t: f64| psi.eval(1.0 - t) + t * eta;
        let n = 20_000;
        let (mut best_t, mut best) = (0.0, f(0.0));
        for i in 1..=n {
            let t = i as f64 / n as f64;
            if f(t) < best {
                best = f(t);
                best_t = t;
            }
        }
        let (mut lo, mut hi) = ((best_t - 1.0 / n as f64).max(0.0), (best_t + 1.0 / n as f64).min(1.0));
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        best.min(f(0.5 * (lo + hi)))
    }

    #[test]
    fn pointwise_examples() {
        let gt = GTransform::new(quadratic_psi());
        assert_eq!(gt.pointwise(fin(0.7), 0.0), fin(0.25));
        assert_eq!(gt.pointwise(ExtReal::Infinity, 0.0), fin(0.25));
        assert_eq!(gt.pointwise(ExtReal::Infinity, 0.1), ExtReal::Infinity);
        assert_eq!(gt.pointwise(fin(0.7), 1.0), fin(0.7));
        assert_relative_eq!(gt.pointwise(fin(0.25), 0.5).to_f64(), 0.1875, max_relative = 1e-15);
    }

    #[test]
    fn g_examples() {
        let gt = GTransform::new(quadratic_psi());
        assert!((gt.g(fin(0.25)) - 0.5).abs() < 1e-12);
        assert_eq!(gt.g(fin(0.6)), 0.0);
        assert_eq!(gt.g(fin(0.0)), 1.0);
        assert_eq!(gt.g(ExtReal::Infinity), 0.0);
        let gc = GTransform::new(psi_c(1.0).unwrap());
        assert_eq!(gc.g(fin(0.0)), 1.0);
        assert!(gc.g(fin(1e6)) >= 0.0);
    }

    #[test]
    fn g_matches_psi_c_inverse() {
        // ψ_c'(1−θ) = η inverts to θ = c/((1+c)e^{cη} − 1).
        for c in [0.1, 0.5, 1.0, 2.0, 10.0] {
            let gt = GTransform::new(psi_c(c).unwrap());
            for eta in [1e-6, 0.01, 0.3, 1.0, 5.0, 20.0] {
                let exact = c / ((1.0 + c) * (c * eta).exp() - 1.0);
                assert_relative_eq!(gt.g(fin(eta)), exact, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn big_g_examples() {
        let gt = GTransform::new(quadratic_psi());
        assert_eq!(gt.value(fin(0.0)), 0.0);
        assert!((gt.value(fin(0.25)) - 0.1875).abs() < 1e-12);
        assert_eq!(gt.value(fin(0.5)), 0.25);
        assert_eq!(gt.value(fin(3.0)), 0.25);
        assert_eq!(gt.value(ExtReal::Infinity), 0.25);
        let gc = GTransform::new(psi_c(2.0).unwrap());
        assert_eq!(gc.value(ExtReal::Infinity), psi_c(2.0).unwrap().value_at_one());
    }

    #[test]
    fn big_g_matches_brute_force() {
        for psi in [quadratic_psi(), psi_c(0.5).unwrap(), psi_c(1.0).unwrap(), psi_c(3.0).unwrap()] {
            let gt = GTransform::new(psi);
            for eta in [0.01, 0.1, 0.4, 0.8, 1.5, 4.0] {
                let oracle = g_oracle(&psi, eta);
                assert!((gt.value(fin(eta)) - oracle).abs() < 1e-10, "{psi} η={eta}");
            }
        }
    }

    #[test]
    fn second_derivative_examples() {
        let gt = GTransform::new(quadratic_psi());
        for eta in [0.01, 0.2, 0.49] {
            assert_relative_eq!(gt.second_derivative(eta).unwrap(), -2.0, max_relative = 1e-12);
        }
        assert!(gt.second_derivative(0.0).is_err());
        assert!(gt.second_derivative(0.5).is_err());

        // ψ_1 with g(η) = 0.5: η = ψ_1'(0.5).
        let p1 = psi_c(1.0).unwrap();
        let g1 = GTransform::new(p1);
        let eta = p1.deriv_reflected(0.5);
        assert_relative_eq!(g1.second_derivative(eta).unwrap(), -0.75, max_relative = 1e-9);

        let h = 1e-4;
        for eta in [0.2, 0.7, 1.5] {
            let g = |e: f64| g1.value(fin(e));
            let fd = (g(eta + h) - 2.0 * g(eta) + g(eta - h)) / (h * h);
            assert_relative_eq!(fd, g1.second_derivative(eta).unwrap(), max_relative = 1e-4);
        }
    }

    #[test]
    fn bisection_residual_small() {
        for psi in [quadratic_psi(), psi_c(0.1).unwrap(), psi_c(1.0).unwrap(), psi_c(10.0).unwrap()] {
            let gt = GTransform::new(psi);
            let top = psi.deriv_at_one().finite().unwrap_or(30.0);
            for i in 1..1000 {
                let eta = top * i as f64 / 1000.0;
                let theta = gt.g(fin(eta));
                assert!((psi.deriv_reflected(theta) - eta).abs() <= 1e-10, "{psi} η={eta}");
            }
        }
    }

    #[test]
    fn concavity_examples() {
        let grid = refined_grid(1.0, 400);
        let q = concavity_profile(&GTransform::new(quadratic_psi()), &GammaSpec::LogInv, 1.0, &grid).unwrap();
        assert!(q.pass, "{} at {}", q.worst_violation, q.worst_at);
        assert_eq!(*q.l.last().unwrap(), 1.0);
        assert_relative_eq!(q.l[0], 0.25f64.exp(), max_relative = 1e-15);

        let p =
            concavity_profile(&GTransform::new(psi_c(1.0).unwrap()), &GammaSpec::c_log_inv(1.0).unwrap(), 1.0, &grid)
                .unwrap();
        assert!(p.pass, "{} at {}", p.worst_violation, p.worst_at);
        assert_relative_eq!(p.l[0], 2.0, max_relative = 1e-15);

        assert!(concavity_profile(&GTransform::new(quadratic_psi()), &GammaSpec::LogInv, 0.5, &grid).is_err());
    }

    #[test]
    fn lemma_v_examples() {
        let grid = open_unit_grid(1000);
        assert!(lemma_v_condition(&quadratic_psi(), 1.0, &grid).unwrap().pass);
        let eq = lemma_v_condition(&psi_c(2.0).unwrap(), 2.0, &grid).unwrap();
        assert!(eq.pass);
        assert!(eq.rows.iter().all(|r| r.margin == 0.0));
        let fail = lemma_v_condition(&psi_c(0.5).unwrap(), 2.0, &grid).unwrap();
        assert!(!fail.pass);
        assert!(lemma_v_condition(&quadratic_psi(), -1.0, &grid).is_err());
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(GammaSpec::LogInv.eval(0.0), ExtReal::Infinity);
        assert_eq!(GammaSpec::LogInv.eval(1.0), fin(0.0));
        assert_relative_eq!(GammaSpec::CLogInv(2.0).eval(0.5).to_f64(), 2.0 * 2f64.ln());
        assert_eq!(GammaSpec::CLogInv(2.0).deriv(1.0), -2.0);
        assert_eq!(GammaSpec::CLogInv(0.5).curvature_ratio(), 2.0);
        assert!(GammaSpec::c_log_inv(0.0).is_err());
    }
}
