//! Convex cost functions `ψ : [0,1] → ℝ⁺` with `ψ(0) = ψ'(0) = 0`.
//!
//! Two families ship: the quadratic `θ²/4` and the one-parameter family
//! `ψ_c(θ) = c⁻¹[(1−θ)log(1−θ) − (1−θ+c)log((1−θ+c)/(1+c))]`, which solves
//! `ψ''(1−θ) = 1/(θ² + cθ)` with zero value and slope at the origin.
//!
//! Besides the plain evaluators, every spec exposes the *reflected* forms
//! `ψ(1−θ)`, `ψ'(1−θ)`, `ψ''(1−θ)` computed directly from `θ`. Those are the
//! forms used by the `G` transform, and evaluating them from `θ` avoids the
//! cancellation in `1 − (1 − θ)` when `θ` is small.

use std::fmt;

use crate::error::{Error, Result};
use crate::numeric::ExtReal;

/// Parameter `c > 0` of the `ψ_c` family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CParam(f64);

impl CParam {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::OutOfDomain { what: "c", value: c, domain: "(0, ∞)" });
        }
        Ok(Self(c))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `R_c = 1/(1+c)`.
    pub fn ratio(self) -> f64 {
        1.0 / (1.0 + self.0)
    }
}

/// A convex, nondecreasing cost `ψ` on `[0,1]` with analytic derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiSpec {
    /// `ψ(θ) = θ²/4`.
    Quadratic,
    /// The `ψ_c` family.
    PsiC(CParam),
}

/// `ψ(θ) = θ²/4`.
pub fn quadratic_psi() -> PsiSpec {
    PsiSpec::Quadratic
}

/// `ψ_c` for a validated `c`.
pub fn psi_c(c: f64) -> Result<PsiSpec> {
    Ok(PsiSpec::PsiC(CParam::new(c)?))
}

impl PsiSpec {
    pub fn label(&self) -> String {
        self.to_string()
    }

    /// `ψ(θ)`; `θ` is clamped into `[0,1]`.
    pub fn eval(&self, theta: f64) -> f64 {
        let theta = theta.clamp(0.0, 1.0);
        match self {
            PsiSpec::Quadratic => 0.25 * theta * theta,
            PsiSpec::PsiC(c) => psi_c_closed(theta, *c),
        }
    }

    /// `ψ'(θ)`; `+∞` at `θ = 1` for `ψ_c`.
    pub fn deriv(&self, theta: f64) -> f64 {
        let theta = theta.clamp(0.0, 1.0);
        match self {
            PsiSpec::Quadratic => 0.5 * theta,
            PsiSpec::PsiC(c) => {
                let c = c.value();
                (-(-theta).ln_1p() + (-theta / (1.0 + c)).ln_1p()) / c
            }
        }
    }

    /// `ψ''(θ)` for `θ ∈ (0,1)`.
    pub fn second_deriv(&self, theta: f64) -> f64 {
        match self {
            PsiSpec::Quadratic => 0.5,
            PsiSpec::PsiC(c) => {
                let t = 1.0 - theta;
                1.0 / (t * (t + c.value()))
            }
        }
    }

    /// `ψ(1−θ)` evaluated from `θ`.
    pub fn eval_reflected(&self, theta: f64) -> f64 {
        let theta = theta.clamp(0.0, 1.0);
        match self {
            PsiSpec::Quadratic => {
                let u = 1.0 - theta;
                0.25 * u * u
            }
            PsiSpec::PsiC(c) => {
                let c = c.value();
                // (θ+c)/(1+c) = 1 + (θ−1)/(1+c)
                (x_log_x(theta) - (theta + c) * ((theta - 1.0) / (1.0 + c)).ln_1p()) / c
            }
        }
    }

    /// `ψ'(1−θ)` evaluated from `θ`; `+∞` at `θ = 0` for `ψ_c`.
    pub fn deriv_reflected(&self, theta: f64) -> f64 {
        let theta = theta.clamp(0.0, 1.0);
        match self {
            PsiSpec::Quadratic => 0.5 * (1.0 - theta),
            PsiSpec::PsiC(c) => {
                let c = c.value();
                (-theta.ln() + ((theta - 1.0) / (1.0 + c)).ln_1p()) / c
            }
        }
    }

    /// `ψ''(1−θ)` evaluated from `θ ∈ (0,1)`.
    pub fn second_deriv_reflected(&self, theta: f64) -> f64 {
        match self {
            PsiSpec::Quadratic => 0.5,
            PsiSpec::PsiC(c) => 1.0 / (theta * theta + c.value() * theta),
        }
    }

    /// `ψ'(1)` as an extended real.
    pub fn deriv_at_one(&self) -> ExtReal {
        match self {
            PsiSpec::Quadratic => ExtReal::Finite(0.5),
            PsiSpec::PsiC(_) => ExtReal::Infinity,
        }
    }

    /// `ψ(1)`; `log((1+c)/c)` for `ψ_c`.
    pub fn value_at_one(&self) -> f64 {
        match self {
            PsiSpec::Quadratic => 0.25,
            PsiSpec::PsiC(c) => (1.0 / c.value()).ln_1p(),
        }
    }

    /// Grid check of the structural requirements: `ψ(0) = ψ'(0) = 0`,
    /// nondecreasing and convex values, and positive `ψ''` on the interior.
    pub fn check_shape(&self, steps: usize) -> ShapeReport {
        let steps = steps.max(2);
        let grid: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
        let values: Vec<f64> = grid.iter().map(|&t| self.eval(t)).collect();
        let min_first_diff = values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let min_second_diff = values.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).fold(f64::INFINITY, f64::min);
        let min_second_deriv = grid[1..steps].iter().map(|&t| self.second_deriv(t)).fold(f64::INFINITY, f64::min);
        let origin_ok = self.eval(0.0) == 0.0 && self.deriv(0.0) == 0.0;
        ShapeReport {
            origin_ok,
            min_first_diff,
            min_second_diff,
            min_second_deriv,
            pass: origin_ok && min_first_diff >= -1e-10 && min_second_diff >= -1e-10 && min_second_deriv > 0.0,
        }
    }
}

impl fmt::Display for PsiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiSpec::Quadratic => write!(f, "quadratic"),
            PsiSpec::PsiC(c) => write!(f, "psi_c(c={})", c.value()),
        }
    }
}

/// Outcome of [`PsiSpec::check_shape`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeReport {
    pub origin_ok: bool,
    pub min_first_diff: f64,
    pub min_second_diff: f64,
    pub min_second_deriv: f64,
    pub pass: bool,
}

/// `x log x` with the limit `0` at the origin.
fn x_log_x(x: f64) -> f64 {
    if x < 1e-300 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Closed form of `ψ_c(θ)` for `θ ∈ [0,1]`, with the `θ → 1` limit applied.
pub fn psi_c_closed(theta: f64, c: CParam) -> f64 {
    let c = c.value();
    let t = 1.0 - theta;
    let t_log_t = if t < 1e-300 { 0.0 } else { t * (-theta).ln_1p() };
    let tail = (t + c) * (-theta / (1.0 + c)).ln_1p();
    ((t_log_t - tail) / c).max(0.0)
}

/// Power-series form `Σ_{k≥2} θ^k/k · (R_c + … + R_c^{k−1})/(k−1)`.
///
/// Summation stops after the first `k` with `θ^{k+1}/((1−θ)(k+1)) < tail_tol`,
/// a majorant of the remainder since the averaged geometric factor is ≤ 1.
pub fn psi_c_series(theta: f64, c: CParam, tail_tol: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::OutOfDomain { what: "theta", value: theta, domain: "[0, 1)" });
    }
    if tail_tol.is_nan() || tail_tol <= 0.0 {
        return Err(Error::OutOfDomain { what: "tail_tol", value: tail_tol, domain: "(0, ∞)" });
    }
    let r = c.ratio();
    let mut sum = 0.0;
    // power = θ^k, geo = R + … + R^{k−1}, r_pow = R^{k−1}
    let mut power = theta * theta;
    let mut r_pow = r;
    let mut geo = r;
    let mut k = 2u64;
    loop {
        let kf = k as f64;
        sum += power / kf * geo / (kf - 1.0);
        let next_power = power * theta;
        if next_power / ((1.0 - theta) * (kf + 1.0)) < tail_tol {
            break;
        }
        power = next_power;
        r_pow *= r;
        geo += r_pow;
        k += 1;
    }
    Ok(sum)
}

/// `ψ_c''(u) = 1/((1−u)² + c(1−u))` for `u ∈ (0,1)`.
pub fn psi_c_second_derivative(u: f64, c: CParam) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::OutOfDomain { what: "u", value: u, domain: "(0, 1)" });
    }
    let t = 1.0 - u;
    Ok(1.0 / (t * t + c.value() * t))
}

/// One row of a pointwise inequality report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRow {
    pub theta: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs` for upper bounds, `lhs − rhs` for lower bounds; nonnegative
    /// when the inequality holds.
    pub margin: f64,
}

/// Pointwise check of an inequality over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub rows: Vec<GridRow>,
    pub tolerance: f64,
    pub pass: bool,
}

impl GridReport {
    fn from_rows(rows: Vec<GridRow>, tolerance: f64) -> Self {
        let pass = rows.iter().all(|r| r.margin >= -tolerance);
        Self { rows, tolerance, pass }
    }

    pub fn min_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }

    /// Rows where the inequality fails beyond tolerance.
    pub fn violations(&self) -> impl Iterator<Item = &GridRow> {
        self.rows.iter().filter(move |r| r.margin < -self.tolerance)
    }
}

/// `ψ_c(θ) ≥ θ²/(2+2c)` on a grid. Violations are reported, not raised.
pub fn psi_c_lower_bound_check(grid: &[f64], c: CParam) -> GridReport {
    let rows = grid
        .iter()
        .map(|&theta| {
            let value = psi_c_closed(theta, c);
            let bound = theta * theta / (2.0 + 2.0 * c.value());
            GridRow { theta, lhs: value, rhs: bound, margin: value - bound }
        })
        .collect();
    GridReport::from_rows(rows, 1e-12)
}

/// `ψ''(1−θ) ≤ 1/(θ² + kθ)` on a grid in `(0,1)`; `k ≥ 0`.
pub(crate) fn second_derivative_bound(psi: &PsiSpec, k: f64, grid: &[f64]) -> GridReport {
    let rows = grid
        .iter()
        .map(|&theta| {
            let lhs = psi.second_deriv_reflected(theta);
            let rhs = 1.0 / (theta * theta + k * theta);
            GridRow { theta, lhs, rhs, margin: rhs - lhs }
        })
        .collect();
    GridReport::from_rows(rows, 1e-10)
}

/// The differential inequality `ψ''(1−θ) ≤ (θ² + cθ)⁻¹` on a grid in `(0,1)`.
pub fn check_differential_inequality(psi: &PsiSpec, c: f64, grid: &[f64]) -> Result<GridReport> {
    CParam::new(c)?;
    if let Some(&bad) = grid.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::OutOfDomain { what: "theta", value: bad, domain: "(0, 1)" });
    }
    Ok(second_derivative_bound(psi, c, grid))
}

/// `steps + 1` equally spaced points of `[0,1]`.
pub fn unit_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// `steps − 1` equally spaced interior points of `(0,1)`.
pub fn open_unit_grid(steps: usize) -> Vec<f64> {
    (1..steps).map(|i| i as f64 / steps as f64).collect()
}
