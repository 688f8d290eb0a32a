//! Exact-enumeration and Monte Carlo checks of the concentration inequalities.
//!
//! Every check produces a [`CheckResult`] carrying both sides of the
//! inequality. Values of `D` and `F_ψ` come from the conditional-gradient
//! solver, whose iterates are feasible: the nominal value is an upper bound on
//! the true infimum and `objective − gap` is a lower bound. The nominal left
//! side is therefore an upper bound on the exact left side, and the gap-shifted
//! `lhs_lower` is a lower bound. A failing nominal margin whose certified
//! margin (`rhs − lhs_lower`) is still within tolerance is classified as
//! solver-attributable rather than as a violation of the inequality.
//!
//! Parallel loops collect into index-ordered vectors and are summed
//! sequentially with compensation, so results do not depend on the thread
//! schedule.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::g_transform::GammaSpec;
use crate::hull::{build_hull, minimize_separable_convex, HullProblem, HullSolution, SolverOptions, SquaredNorm};
use crate::numeric::{compensated_sum, ExtReal};
use crate::product_space::{
    cross_section, enumerate_points, measure_of_set, Alphabet, Point, PointSet, ProductMeasure, DEFAULT_ENUMERATION_CAP,
};
use crate::psi::{psi_c, PsiSpec};

/// Threshold profile used by the checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Allowed negative margin for expectation checks.
    pub exact: f64,
    /// Allowed negative margin for the tail bound.
    pub tail: f64,
    /// Allowed negative margin for the base-case grid.
    pub base_case: f64,
    /// Allowed negative slack in the recursive bound.
    pub recursive: f64,
    /// Frank–Wolfe gap tolerance handed to the solver.
    pub solver: f64,
    /// Standard errors subtracted from Monte Carlo estimates.
    pub mc_sigmas: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { exact: 1e-9, tail: 1e-12, base_case: 1e-12, recursive: 1e-9, solver: 1e-9, mc_sigmas: 4.0 }
    }
}

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

/// Smallest sample count accepted by [`monte_carlo_check`].
pub const MIN_MC_SAMPLES: usize = 1000;

/// A product space, a measure, a set and the functional parameters to check.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub measure: ProductMeasure,
    pub set: PointSet,
    pub psi: PsiSpec,
    pub gamma: GammaSpec,
    pub t_grid: Vec<f64>,
    /// Exponents `c` for the `(P A)^c · E exp(F_{ψ_c}) ≤ 1` check.
    pub c_values: Vec<f64>,
    pub tolerances: Tolerances,
    pub mc: Option<McConfig>,
    pub enumeration_cap: u64,
}

/// `0, 0.25, …, 3`.
pub fn default_t_grid() -> Vec<f64> {
    (0..=12).map(|i| i as f64 * 0.25).collect()
}

/// `0.01, 0.02, …, 0.99`.
pub fn default_p_grid() -> Vec<f64> {
    (1..100).map(|i| i as f64 / 100.0).collect()
}

/// `steps + 1` equally spaced points of `[0,1]`.
pub fn theta_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

impl Scenario {
    /// Validates that `set` is nonempty, lives on the measure's alphabet, and
    /// that every marginal is strictly positive.
    pub fn new(measure: ProductMeasure, set: PointSet, psi: PsiSpec, gamma: GammaSpec) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::InvalidScenario("the set A is empty".into()));
        }
        if measure.alphabet() != set.alphabet() {
            return Err(Error::InvalidScenario("A and the marginals use different alphabets".into()));
        }
        if !measure.is_strictly_positive() {
            return Err(Error::InvalidScenario("scenario marginals must be strictly positive".into()));
        }
        let c_values = match psi {
            PsiSpec::PsiC(c) => vec![c.value()],
            PsiSpec::Quadratic => vec![1.0],
        };
        Ok(Self {
            measure,
            set,
            psi,
            gamma,
            t_grid: default_t_grid(),
            c_values,
            tolerances: Tolerances::default(),
            mc: None,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        self.measure.alphabet()
    }

    /// `Q(A)`.
    pub fn prob_a(&self) -> f64 {
        measure_of_set(&self.measure, &self.set).expect("alphabets checked at construction")
    }

    /// SHA-256 over a canonical text encoding of every field, with floats
    /// written as their bit patterns.
    pub fn digest(&self) -> String {
        let mut text = String::new();
        let bits = |v: f64| format!("{:016x}", v.to_bits());
        text.push_str(&format!("alphabet={:?};", self.alphabet().sizes()));
        for q in self.measure.marginals() {
            text.push_str("q=");
            for &p in q {
                text.push_str(&bits(p));
                text.push(',');
            }
            text.push(';');
        }
        for y in self.set.iter() {
            text.push_str(&format!("a={:?};", y.symbols()));
        }
        text.push_str(&format!("psi={};gamma={};", self.psi, self.gamma));
        for &t in &self.t_grid {
            text.push_str(&format!("t={};", bits(t)));
        }
        for &c in &self.c_values {
            text.push_str(&format!("c={};", bits(c)));
        }
        let tol = &self.tolerances;
        for v in [tol.exact, tol.tail, tol.base_case, tol.recursive, tol.solver, tol.mc_sigmas] {
            text.push_str(&format!("tol={};", bits(v)));
        }
        if let Some(mc) = self.mc {
            text.push_str(&format!("mc={},{};", mc.samples, mc.seed));
        }
        text.push_str(&format!("cap={}", self.enumeration_cap));
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// How a check was evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Exact,
    MonteCarlo { estimate: f64, std_error: f64, samples: usize },
}

/// Classification of a check outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// Nominal margin fails but the gap-adjusted margin does not.
    SolverAttributable,
    /// Fails even after accounting for solver gaps (or sampling error).
    Violation,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::SolverAttributable => "solver_attributable",
            Verdict::Violation => "violation",
        })
    }
}

/// One evaluated inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    /// Grid parameter (`t`, `c`, `p` or `θ`), when the check is one of a family.
    pub parameter: Option<f64>,
    pub lhs: f64,
    /// Certified lower bound on `lhs`.
    pub lhs_lower: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    /// `rhs − lhs_lower`.
    pub certified_margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub verdict: Verdict,
    /// Informational checks report a sufficient condition only.
    pub informational: bool,
    pub method: Method,
    pub note: Option<String>,
}

impl CheckResult {
    fn exact(name: &str, parameter: Option<f64>, lhs: f64, lhs_lower: f64, rhs: f64, tolerance: f64) -> Self {
        let margin = rhs - lhs;
        let certified_margin = rhs - lhs_lower;
        let pass = margin >= -tolerance;
        let verdict = if pass {
            Verdict::Pass
        } else if certified_margin >= -tolerance {
            Verdict::SolverAttributable
        } else {
            Verdict::Violation
        };
        Self {
            name: name.to_string(),
            parameter,
            lhs,
            lhs_lower,
            rhs,
            margin,
            certified_margin,
            tolerance,
            pass,
            verdict,
            informational: false,
            method: Method::Exact,
            note: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Outcome of [`verify`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub scenario_digest: String,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn new(scenario_digest: String, checks: Vec<CheckResult>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self { scenario_digest, checks, pass }
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// `Σ_x Q(x) f(x)` over the whole space.
pub fn exact_expectation<F>(q: &ProductMeasure, cap: u64, f: F) -> Result<f64>
where
    F: Fn(&Point) -> f64 + Sync,
{
    let points: Vec<(Point, f64)> = enumerate_points(q, cap)?.collect();
    let terms: Vec<f64> = points.par_iter().map(|(x, p)| p * f(x)).collect();
    Ok(compensated_sum(terms))
}

/// Which convex-hull functional to tabulate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    /// `D(x, A)`.
    Distance,
    /// `F_ψ(x, A)`.
    Cost(PsiSpec),
}

/// A solver value with its certified lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certified {
    pub nominal: f64,
    pub lower: f64,
}

impl Certified {
    fn from_solution(functional: Functional, sol: &HullSolution) -> Self {
        match functional {
            Functional::Distance => Self { nominal: sol.objective.sqrt(), lower: sol.lower_bound().sqrt() },
            Functional::Cost(_) => Self { nominal: sol.objective, lower: sol.lower_bound() },
        }
    }
}

fn solve_many(problems: &[HullProblem], functional: Functional, tol: f64) -> Vec<Certified> {
    let opts = SolverOptions::with_tol(tol);
    problems
        .par_iter()
        .map(|h| {
            let sol = match functional {
                Functional::Distance => minimize_separable_convex(h, &SquaredNorm, opts),
                Functional::Cost(psi) => minimize_separable_convex(h, &psi, opts),
            };
            Certified::from_solution(functional, &sol)
        })
        .collect()
}

/// Values of a functional at a list of points, solving each distinct hull once.
pub fn evaluate_points(points: &[Point], a: &PointSet, functional: Functional, tol: f64) -> Result<Vec<Certified>> {
    let hulls: Vec<HullProblem> = points.par_iter().map(|x| build_hull(x, a)).collect::<Result<_>>()?;
    let mut unique: BTreeMap<&HullProblem, usize> = BTreeMap::new();
    for h in &hulls {
        let next = unique.len();
        unique.entry(h).or_insert(next);
    }
    let mut problems: Vec<HullProblem> = vec![];
    problems.resize_with(unique.len(), || hulls[0].clone());
    for (h, &i) in &unique {
        problems[i] = (*h).clone();
    }
    let solved = solve_many(&problems, functional, tol);
    Ok(hulls.iter().map(|h| solved[unique[h]]).collect())
}

/// Every point of the space with its probability and a tabulated functional.
#[derive(Debug, Clone)]
pub struct ExactTable {
    pub points: Vec<Point>,
    pub probs: Vec<f64>,
    pub values: Vec<Certified>,
}

impl ExactTable {
    pub fn build(s: &Scenario, functional: Functional) -> Result<Self> {
        let (points, probs): (Vec<Point>, Vec<f64>) = enumerate_points(&s.measure, s.enumeration_cap)?.unzip();
        let values = evaluate_points(&points, &s.set, functional, s.tolerances.solver)?;
        Ok(Self { points, probs, values })
    }

    /// `(E f(nominal), E f(lower))` for a nondecreasing `f`.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> (f64, f64) {
        let nominal = compensated_sum(self.probs.iter().zip(&self.values).map(|(p, v)| p * f(v.nominal)));
        let lower = compensated_sum(self.probs.iter().zip(&self.values).map(|(p, v)| p * f(v.lower)));
        (nominal, lower)
    }
}

/// Slack applied to `D ≥ t` so that rounding in `√(objective)` cannot move
/// a point across the threshold in the unsafe direction.
const THRESHOLD_SLACK: f64 = 1e-9;

fn tail_checks(s: &Scenario, table: &ExactTable, prob_a: f64) -> Vec<CheckResult> {
    s.t_grid
        .iter()
        .map(|&t| {
            let upper = compensated_sum(
                table
                    .probs
                    .iter()
                    .zip(&table.values)
                    .filter(|(_, v)| v.nominal >= t - THRESHOLD_SLACK)
                    .map(|(p, _)| *p),
            );
            let lower = compensated_sum(
                table
                    .probs
                    .iter()
                    .zip(&table.values)
                    .filter(|(_, v)| t <= 0.0 || v.lower >= t + THRESHOLD_SLACK)
                    .map(|(p, _)| *p),
            );
            CheckResult::exact(
                "tail_bound",
                Some(t),
                prob_a * upper,
                prob_a * lower,
                (-t * t / 4.0).exp(),
                s.tolerances.tail,
            )
        })
        .collect()
}

fn exp_moment_check(s: &Scenario, table: &ExactTable, prob_a: f64) -> CheckResult {
    let (nominal, lower) = table.expectation(|d| (d * d / 4.0).exp());
    CheckResult::exact("exp_moment", None, prob_a * nominal, prob_a * lower, 1.0, s.tolerances.exact)
}

fn fpsic_check(s: &Scenario, table: &ExactTable, prob_a: f64, c: f64) -> CheckResult {
    let (nominal, lower) = table.expectation(f64::exp);
    let scale = prob_a.powf(c);
    CheckResult::exact("fpsic_bound", Some(c), scale * nominal, scale * lower, 1.0, s.tolerances.exact)
}

fn theorem_check(s: &Scenario, table: &ExactTable, prob_a: f64) -> CheckResult {
    let (nominal, lower) = table.expectation(f64::exp);
    match s.gamma.eval(prob_a) {
        ExtReal::Infinity => {
            CheckResult::exact("theorem_bound", None, nominal, lower, f64::INFINITY, s.tolerances.exact)
                .with_note("P(A) = 0: vacuous")
        }
        ExtReal::Finite(g) => CheckResult::exact("theorem_bound", None, nominal, lower, g.exp(), s.tolerances.exact),
    }
}

/// `P(A)·P{D ≥ t} ≤ exp(−t²/4)` for every `t` in the scenario grid.
pub fn check_tail_bound(s: &Scenario) -> Result<Vec<CheckResult>> {
    let table = ExactTable::build(s, Functional::Distance)?;
    Ok(tail_checks(s, &table, s.prob_a()))
}

/// `P(A)·E exp(D²/4) ≤ 1`.
pub fn check_exp_moment(s: &Scenario) -> Result<CheckResult> {
    let table = ExactTable::build(s, Functional::Distance)?;
    Ok(exp_moment_check(s, &table, s.prob_a()))
}

/// `P(A)^c · E exp(F_{ψ_c}) ≤ 1`.
pub fn check_fpsic_bound(s: &Scenario, c: f64) -> Result<CheckResult> {
    let table = ExactTable::build(s, Functional::Cost(psi_c(c)?))?;
    Ok(fpsic_check(s, &table, s.prob_a(), c))
}

/// `E exp(F_ψ) ≤ exp(γ(P(A)))` for the scenario's `(ψ, γ)`.
pub fn check_theorem_bound(s: &Scenario) -> Result<CheckResult> {
    let table = ExactTable::build(s, Functional::Cost(s.psi))?;
    Ok(theorem_check(s, &table, s.prob_a()))
}

/// `(1−p)e^{ψ(1)} + p ≤ e^{γ(p)}` on a grid in `(0,1]`.
pub fn check_base_case(psi: &PsiSpec, gamma: &GammaSpec, p_grid: &[f64], tol: f64) -> Result<Vec<CheckResult>> {
    if let Some(&bad) = p_grid.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::OutOfDomain { what: "p", value: bad, domain: "(0, 1]" });
    }
    let e_psi1 = psi.value_at_one().exp();
    Ok(p_grid
        .iter()
        .map(|&p| {
            let lhs = (1.0 - p) * e_psi1 + p;
            let rhs = gamma.eval(p).to_f64().exp();
            CheckResult::exact("base_case", Some(p), lhs, lhs, rhs, tol)
        })
        .collect())
}

/// Sufficient condition `γ'(1)e^{γ(1)} ≤ 1 − e^{ψ(1)}` for the base case,
/// valid for convex `γ` with `γ(1) ≥ 0`. Informational.
pub fn check_remark2_sufficient(psi: &PsiSpec, gamma: &GammaSpec) -> CheckResult {
    let gamma_one = gamma.eval(1.0).to_f64();
    let lhs = gamma.deriv(1.0) * gamma_one.exp();
    let rhs = 1.0 - psi.value_at_one().exp();
    let mut result = CheckResult::exact("remark2_sufficient", None, lhs, lhs, rhs, 1e-12);
    result.informational = true;
    result
}

/// Slack of `F_n(x,A) ≤ θF_{n−1}(w,A_z) + (1−θ)F_{n−1}(w,A_m) + ψ(1−θ)` for
/// `x = (w, z)` over a θ grid.
pub fn check_recursive_bound(
    x: &Point,
    a: &PointSet,
    m: usize,
    thetas: &[f64],
    psi: &PsiSpec,
    tol: &Tolerances,
) -> Result<Vec<CheckResult>> {
    let inst = RecursiveTerms::solve(x, a, m, psi, tol.solver)?;
    Ok(thetas.iter().map(|&theta| inst.check(theta, psi, tol.recursive)).collect())
}

struct RecursiveTerms {
    full: Certified,
    own: Certified,
    other: Certified,
}

impl RecursiveTerms {
    fn solve(x: &Point, a: &PointSet, m: usize, psi: &PsiSpec, solver_tol: f64) -> Result<Self> {
        let (w, z) = x.split_last().ok_or(Error::DimensionMismatch { expected: 2, found: 0 })?;
        let a_z = cross_section(a, z)?;
        let a_m = cross_section(a, m)?;
        if a_z.is_empty() {
            return Err(Error::EmptyCrossSection(z));
        }
        if a_m.is_empty() {
            return Err(Error::EmptyCrossSection(m));
        }
        let functional = Functional::Cost(*psi);
        let value = |p: &Point, set: &PointSet| -> Result<Certified> {
            Ok(evaluate_points(std::slice::from_ref(p), set, functional, solver_tol)?[0])
        };
        Ok(Self { full: value(x, a)?, own: value(&w, &a_z)?, other: value(&w, &a_m)? })
    }

    fn check(&self, theta: f64, psi: &PsiSpec, tol: f64) -> CheckResult {
        let bar = 1.0 - theta;
        let rhs = theta * self.own.nominal + bar * self.other.nominal + psi.eval(bar);
        CheckResult::exact("recursive_bound", Some(theta), self.full.nominal, self.full.lower, rhs, tol)
    }
}

/// Recursive-bound slack over every `(x, m)` with nonempty sections, reduced
/// to the worst instance per θ.
pub fn check_recursive_bound_all(s: &Scenario, thetas: &[f64]) -> Result<Vec<CheckResult>> {
    let n = s.alphabet().dim();
    if n < 2 {
        return Ok(vec![]);
    }
    let last = s.alphabet().sizes()[n - 1];
    let nonempty: Vec<usize> =
        (0..last).filter(|&z| cross_section(&s.set, z).map(|c| !c.is_empty()).unwrap_or(false)).collect();
    let mut instances = vec![];
    for x in s.alphabet().points(s.enumeration_cap)? {
        let z = *x.symbols().last().expect("n ≥ 2");
        if !nonempty.contains(&z) {
            continue;
        }
        for &m in &nonempty {
            instances.push((x.clone(), m));
        }
    }
    let solved: Vec<RecursiveTerms> = instances
        .par_iter()
        .map(|(x, m)| RecursiveTerms::solve(x, &s.set, *m, &s.psi, s.tolerances.solver))
        .collect::<Result<_>>()?;
    Ok(thetas
        .iter()
        .map(|&theta| {
            solved
                .iter()
                .map(|t| t.check(theta, &s.psi, s.tolerances.recursive))
                .min_by(|a, b| a.margin.total_cmp(&b.margin))
                .expect("at least one instance when A is nonempty")
        })
        .collect())
}

/// Monte Carlo estimate of an expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Point number `index` of the sample stream for `seed`.
///
/// Each sample has its own ChaCha stream, so a sample depends only on
/// `(seed, index)` and not on how the loop is scheduled.
pub fn sample_point(q: &ProductMeasure, seed: u64, index: u64) -> Point {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let symbols = q
        .marginals()
        .iter()
        .map(|probs| {
            let u: f64 = rng.random();
            let mut cum = 0.0;
            for (j, p) in probs.iter().enumerate() {
                cum += p;
                if u < cum {
                    return j;
                }
            }
            // u fell into the rounding gap above the last cumulative sum.
            probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
        })
        .collect();
    Point::from_symbols(symbols)
}

/// Sample mean and standard error of `f` over `samples` draws.
pub fn monte_carlo_expectation<F>(q: &ProductMeasure, samples: usize, seed: u64, f: F) -> McEstimate
where
    F: Fn(&Point) -> f64 + Sync,
{
    let values: Vec<f64> = (0..samples as u64).into_par_iter().map(|i| f(&sample_point(q, seed, i))).collect();
    mean_and_error(&values)
}

fn mean_and_error(values: &[f64]) -> McEstimate {
    let n = values.len();
    if n == 0 {
        return McEstimate { estimate: f64::NAN, std_error: f64::NAN, samples: 0 };
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    let var =
        if n > 1 { compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64 } else { 0.0 };
    McEstimate { estimate: mean, std_error: (var / n as f64).sqrt(), samples: n }
}

fn mc_result(name: &str, parameter: Option<f64>, scale: f64, est: McEstimate, rhs: f64, sigmas: f64) -> CheckResult {
    let lhs = scale * est.estimate;
    let err = scale * est.std_error;
    let lhs_lower = lhs - sigmas * err;
    let margin = rhs - lhs;
    let certified_margin = rhs - lhs_lower;
    let pass = certified_margin >= 0.0;
    CheckResult {
        name: name.to_string(),
        parameter,
        lhs,
        lhs_lower,
        rhs,
        margin,
        certified_margin,
        tolerance: 0.0,
        pass,
        verdict: if pass { Verdict::Pass } else { Verdict::Violation },
        informational: false,
        method: Method::MonteCarlo { estimate: lhs, std_error: err, samples: est.samples },
        note: None,
    }
}

/// Sampled versions of the expectation checks: `P(A)·E exp(D²/4) ≤ 1`,
/// `P(A)^c·E exp(F_{ψ_c}) ≤ 1` for each configured `c`, and
/// `E exp(F_ψ) ≤ exp(γ(P(A)))`. A check passes when the estimate minus
/// `mc_sigmas` standard errors is at most the right side.
pub fn monte_carlo_check(s: &Scenario) -> Result<Vec<CheckResult>> {
    let mc = s.mc.ok_or_else(|| Error::InvalidScenario("Monte Carlo settings missing".into()))?;
    if mc.samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidScenario(format!(
            "Monte Carlo needs at least {MIN_MC_SAMPLES} samples, got {}",
            mc.samples
        )));
    }
    let samples: Vec<Point> =
        (0..mc.samples as u64).into_par_iter().map(|i| sample_point(&s.measure, mc.seed, i)).collect();
    let distinct: Vec<Point> = {
        let mut d = samples.clone();
        d.par_sort_unstable();
        d.dedup();
        d
    };
    let lookup = |values: &[Certified]| -> Vec<f64> {
        samples.par_iter().map(|x| values[distinct.binary_search(x).expect("sample present")].nominal).collect()
    };

    let prob_a = s.prob_a();
    let sigmas = s.tolerances.mc_sigmas;
    let mut out = vec![];

    let d = lookup(&evaluate_points(&distinct, &s.set, Functional::Distance, s.tolerances.solver)?);
    let est = mean_and_error(&d.iter().map(|v| (v * v / 4.0).exp()).collect::<Vec<_>>());
    out.push(mc_result("mc_exp_moment", None, prob_a, est, 1.0, sigmas));

    for &c in &s.c_values {
        let f = lookup(&evaluate_points(&distinct, &s.set, Functional::Cost(psi_c(c)?), s.tolerances.solver)?);
        let est = mean_and_error(&f.iter().map(|v| v.exp()).collect::<Vec<_>>());
        out.push(mc_result("mc_fpsic_bound", Some(c), prob_a.powf(c), est, 1.0, sigmas));
    }

    let f = lookup(&evaluate_points(&distinct, &s.set, Functional::Cost(s.psi), s.tolerances.solver)?);
    let est = mean_and_error(&f.iter().map(|v| v.exp()).collect::<Vec<_>>());
    let rhs = s.gamma.eval(prob_a).to_f64().exp();
    out.push(mc_result("mc_theorem_bound", None, 1.0, est, rhs, sigmas));
    Ok(out)
}

/// Check families selectable in [`verify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckKind {
    TailBound,
    ExpMoment,
    FpsicBound,
    TheoremBound,
    BaseCase,
    Remark2,
    RecursiveBound,
    MonteCarlo,
}

impl CheckKind {
    pub const ALL: [CheckKind; 8] = [
        CheckKind::TailBound,
        CheckKind::ExpMoment,
        CheckKind::FpsicBound,
        CheckKind::TheoremBound,
        CheckKind::BaseCase,
        CheckKind::Remark2,
        CheckKind::RecursiveBound,
        CheckKind::MonteCarlo,
    ];

    /// Every check that runs by exact enumeration.
    pub const EXACT: [CheckKind; 7] = [
        CheckKind::TailBound,
        CheckKind::ExpMoment,
        CheckKind::FpsicBound,
        CheckKind::TheoremBound,
        CheckKind::BaseCase,
        CheckKind::Remark2,
        CheckKind::RecursiveBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::TailBound => "tail_bound",
            CheckKind::ExpMoment => "exp_moment",
            CheckKind::FpsicBound => "fpsic_bound",
            CheckKind::TheoremBound => "theorem_bound",
            CheckKind::BaseCase => "base_case",
            CheckKind::Remark2 => "remark2",
            CheckKind::RecursiveBound => "recursive_bound",
            CheckKind::MonteCarlo => "monte_carlo",
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown check '{s}'")))
    }
}

/// Runs the selected checks, sharing the enumerated tables between them.
pub fn verify(s: &Scenario, selection: &[CheckKind]) -> Result<VerificationReport> {
    let wants = |k: CheckKind| selection.contains(&k);
    let prob_a = s.prob_a();
    let mut checks = vec![];

    if wants(CheckKind::TailBound) || wants(CheckKind::ExpMoment) {
        let table = ExactTable::build(s, Functional::Distance)?;
        if wants(CheckKind::TailBound) {
            checks.extend(tail_checks(s, &table, prob_a));
        }
        if wants(CheckKind::ExpMoment) {
            checks.push(exp_moment_check(s, &table, prob_a));
        }
    }
    if wants(CheckKind::FpsicBound) {
        for &c in &s.c_values {
            let table = ExactTable::build(s, Functional::Cost(psi_c(c)?))?;
            checks.push(fpsic_check(s, &table, prob_a, c));
        }
    }
    if wants(CheckKind::TheoremBound) {
        let table = ExactTable::build(s, Functional::Cost(s.psi))?;
        checks.push(theorem_check(s, &table, prob_a));
    }
    let mut base_ok = None;
    if wants(CheckKind::BaseCase) {
        let base = check_base_case(&s.psi, &s.gamma, &default_p_grid(), s.tolerances.base_case)?;
        base_ok = Some(base.iter().all(|c| c.pass));
        checks.extend(base);
    }
    if wants(CheckKind::Remark2) {
        let mut r = check_remark2_sufficient(&s.psi, &s.gamma);
        if !r.pass {
            let ok = match base_ok {
                Some(ok) => ok,
                None => {
                    check_base_case(&s.psi, &s.gamma, &default_p_grid(), s.tolerances.base_case)?.iter().all(|c| c.pass)
                }
            };
            r.pass = ok;
            r = r.with_note(if ok {
                "sufficient condition fails; base case holds on the grid"
            } else {
                "sufficient condition fails and the base case fails on the grid"
            });
        }
        checks.push(r);
    }
    if wants(CheckKind::RecursiveBound) {
        checks.extend(check_recursive_bound_all(s, &theta_grid(10))?);
    }
    if wants(CheckKind::MonteCarlo) {
        checks.extend(monte_carlo_check(s)?);
    }
    Ok(VerificationReport::new(s.digest(), checks))
}

/// Shape of randomly generated scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub min_n: usize,
    pub max_n: usize,
    pub min_symbols: usize,
    pub max_symbols: usize,
    pub max_set: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self { min_n: 1, max_n: 6, min_symbols: 2, max_symbols: 3, max_set: 25 }
    }
}

fn decode_index(alphabet: &Alphabet, mut idx: usize) -> Point {
    let mut symbols = vec![0; alphabet.dim()];
    for (s, &size) in symbols.iter_mut().zip(alphabet.sizes()).rev() {
        *s = idx % size;
        idx /= size;
    }
    Point::from_symbols(symbols)
}

fn random_set_with<R: Rng>(rng: &mut R, alphabet: &Alphabet, size: usize) -> Result<PointSet> {
    let total = usize::try_from(alphabet.cardinality())
        .map_err(|_| Error::InvalidScenario("space too large for random subsets".into()))?;
    if size == 0 || size > total {
        return Err(Error::InvalidScenario(format!("cannot draw {size} distinct points from {total}")));
    }
    let pts = index::sample(rng, total, size).into_iter().map(|i| decode_index(alphabet, i)).collect();
    PointSet::new(alphabet.clone(), pts)
}

/// Uniformly random subset of fixed cardinality.
pub fn random_point_set(alphabet: &Alphabet, size: usize, seed: u64) -> Result<PointSet> {
    random_set_with(&mut ChaCha8Rng::seed_from_u64(seed), alphabet, size)
}

fn random_measure<R: Rng>(rng: &mut R, alphabet: &Alphabet) -> Result<ProductMeasure> {
    let marginals = alphabet
        .sizes()
        .iter()
        .map(|&k| {
            let raw: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1) + 0.05).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect();
    ProductMeasure::new(alphabet.clone(), marginals)
}

/// Seeded random scenario: alphabet sizes, strictly positive marginals and a
/// uniformly random set `A` of random cardinality.
pub fn random_scenario(seed: u64, cfg: &GeneratorConfig, psi: PsiSpec, gamma: GammaSpec) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(cfg.min_n..=cfg.max_n);
        let sizes: Vec<usize> = (0..n).map(|_| rng.random_range(cfg.min_symbols..=cfg.max_symbols)).collect();
        let alphabet = Alphabet::new(sizes)?;
        let measure = random_measure(&mut rng, &alphabet)?;
        let total = alphabet.cardinality().min(cfg.max_set as u128) as usize;
        let size = rng.random_range(1..=total);
        let set = random_set_with(&mut rng, &alphabet, size)?;
        if measure_of_set(&measure, &set)? > 0.0 {
            return Scenario::new(measure, set, psi, gamma);
        }
    }
}

/// A random input for [`check_recursive_bound`]: a set with `n ≥ 2`, a point
/// `x = (w, z)` with `A_z ≠ ∅`, and a symbol `m` with `A_m ≠ ∅`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursiveInstance {
    pub x: Point,
    pub set: PointSet,
    pub m: usize,
}

pub fn random_recursive_instance(seed: u64, cfg: &GeneratorConfig) -> Result<RecursiveInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_n = cfg.min_n.max(2);
    loop {
        let n = rng.random_range(min_n..=cfg.max_n.max(min_n));
        let sizes: Vec<usize> = (0..n).map(|_| rng.random_range(cfg.min_symbols..=cfg.max_symbols)).collect();
        let alphabet = Alphabet::new(sizes)?;
        let total = alphabet.cardinality().min(cfg.max_set as u128) as usize;
        let size = rng.random_range(1..=total);
        let set = random_set_with(&mut rng, &alphabet, size)?;
        let last = alphabet.sizes()[n - 1];
        let nonempty: Vec<usize> = (0..last).filter(|&z| !cross_section(&set, z).unwrap().is_empty()).collect();
        if nonempty.is_empty() {
            continue;
        }
        let z = nonempty[rng.random_range(0..nonempty.len())];
        let m = nonempty[rng.random_range(0..nonempty.len())];
        let prefix: Vec<usize> = alphabet.sizes()[..n - 1].iter().map(|&k| rng.random_range(0..k)).collect();
        let x = Point::from_symbols(prefix).extended(z);
        return Ok(RecursiveInstance { x, set, m });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psi::quadratic_psi;
    use approx::assert_relative_eq;

    fn line_scenario(psi: PsiSpec, gamma: GammaSpec) -> Scenario {
        let alphabet = Alphabet::uniform(1, 2).unwrap();
        let q = ProductMeasure::uniform(alphabet.clone());
        let a = PointSet::from_symbols(alphabet, vec![vec![0]]).unwrap();
        Scenario::new(q, a, psi, gamma).unwrap()
    }

    fn full_scenario() -> Scenario {
        let alphabet = Alphabet::new(vec![2, 3, 2]).unwrap();
        let q =
            ProductMeasure::new(alphabet.clone(), vec![vec![0.3, 0.7], vec![0.2, 0.5, 0.3], vec![0.9, 0.1]]).unwrap();
        let a = PointSet::full(alphabet, 100).unwrap();
        Scenario::new(q, a, psi_c(1.0).unwrap(), GammaSpec::c_log_inv(1.0).unwrap()).unwrap()
    }

    #[test]
    fn exact_expectation_examples() {
        let s = line_scenario(quadratic_psi(), GammaSpec::LogInv);
        assert_eq!(exact_expectation(&s.measure, 10, |_| 1.0).unwrap(), 1.0);
        let ind = exact_expectation(&s.measure, 10, |x| f64::from(u8::from(s.set.contains(x)))).unwrap();
        assert_eq!(ind, s.prob_a());
        // D = 0 on A = {0} and D = 1 off it.
        let e = exact_expectation(&s.measure, 10, |x| {
            let d = crate::hull::distance_d(x, &s.set, 1e-12).unwrap();
            (d * d / 4.0).exp()
        })
        .unwrap();
        assert_relative_eq!(e, 0.5 * (1.0 + 0.25f64.exp()), max_relative = 1e-15);
        assert!((e - 1.1420127).abs() < 1e-7);
    }

    #[test]
    fn tail_examples() {
        let s = line_scenario(quadratic_psi(), GammaSpec::LogInv);
        let mut s = s;
        s.t_grid = vec![0.0, 1.0];
        let r = check_tail_bound(&s).unwrap();
        assert_eq!(r[0].lhs, 0.5);
        assert_eq!(r[0].rhs, 1.0);
        assert_eq!(r[1].lhs, 0.25);
        assert_relative_eq!(r[1].rhs, (-0.25f64).exp());
        assert!(r.iter().all(|c| c.pass));

        let full = full_scenario();
        for c in check_tail_bound(&full).unwrap().iter().filter(|c| c.parameter.unwrap() > 0.0) {
            assert_eq!(c.lhs, 0.0);
        }
    }

    #[test]
    fn exp_moment_examples() {
        let s = line_scenario(quadratic_psi(), GammaSpec::LogInv);
        let r = check_exp_moment(&s).unwrap();
        assert!((r.lhs - 0.5 * 1.1420127).abs() < 1e-7);
        assert!(r.pass);

        let full = check_exp_moment(&full_scenario()).unwrap();
        assert!((full.lhs - 1.0).abs() < 1e-12);
        assert!(full.pass);
    }

    #[test]
    fn fpsic_examples() {
        let s = line_scenario(psi_c(1.0).unwrap(), GammaSpec::c_log_inv(1.0).unwrap());
        let r = check_fpsic_bound(&s, 1.0).unwrap();
        assert_relative_eq!(r.lhs, 0.75, max_relative = 1e-14);
        assert!(r.pass);

        let full = check_fpsic_bound(&full_scenario(), 2.0).unwrap();
        assert!((full.lhs - 1.0).abs() < 1e-12);

        // On the same scenario the ψ_1 check dominates the quadratic-exponent one.
        let em = check_exp_moment(&s).unwrap();
        assert!(r.lhs >= em.lhs);
    }

    #[test]
    fn fpsic_below_one_violates_on_a_single_coordinate() {
        // p^c((1−p)(1+c)/c + p) at p = 1/2, c = 1/2 is √2.
        let s = line_scenario(psi_c(0.5).unwrap(), GammaSpec::c_log_inv(0.5).unwrap());
        let r = check_fpsic_bound(&s, 0.5).unwrap();
        assert_relative_eq!(r.lhs, 2f64.sqrt(), max_relative = 1e-12);
        assert!(!r.pass);
        assert_eq!(r.verdict, Verdict::Violation);
    }

    #[test]
    fn theorem_examples() {
        let alphabet = Alphabet::uniform(3, 2).unwrap();
        let full = Scenario::new(
            ProductMeasure::uniform(alphabet.clone()),
            PointSet::full(alphabet, 100).unwrap(),
            quadratic_psi(),
            GammaSpec::LogInv,
        )
        .unwrap();
        let r = check_theorem_bound(&full).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-12 && (r.rhs - 1.0).abs() < 1e-12);

        for c in [1.0, 2.0] {
            let mut s =
                random_scenario(7, &GeneratorConfig::default(), psi_c(c).unwrap(), GammaSpec::c_log_inv(c).unwrap())
                    .unwrap();
            s.c_values = vec![c];
            let t = check_theorem_bound(&s).unwrap();
            let f = check_fpsic_bound(&s, c).unwrap();
            // exp(c·log(1/p)) = p^{−c}
            assert!((t.lhs / t.rhs - f.lhs).abs() < 1e-12);
        }
    }

    #[test]
    fn base_case_examples() {
        let q = check_base_case(&quadratic_psi(), &GammaSpec::LogInv, &[0.5, 1.0], 1e-12).unwrap();
        assert_relative_eq!(q[0].lhs, 0.5 * 0.25f64.exp() + 0.5);
        assert_eq!(q[0].rhs, 2.0);
        assert_eq!(q[1].lhs, 1.0);
        assert_eq!(q[1].rhs, 1.0);
        assert!(q.iter().all(|c| c.pass));
        assert!(check_base_case(&quadratic_psi(), &GammaSpec::LogInv, &[0.0], 1e-12).is_err());
    }

    #[test]
    fn remark2_examples() {
        for (c, holds) in [(1.0, true), (2.0, true), (0.5, false)] {
            let r = check_remark2_sufficient(&psi_c(c).unwrap(), &GammaSpec::c_log_inv(c).unwrap());
            assert_relative_eq!(r.lhs, -c, max_relative = 1e-15);
            assert_relative_eq!(r.rhs, -1.0 / c, max_relative = 1e-12);
            assert_eq!(r.pass, holds, "c = {c}");
            assert!(r.informational);
        }
    }

    #[test]
    fn recursive_examples() {
        let alphabet = Alphabet::uniform(3, 2).unwrap();
        let a = PointSet::from_symbols(alphabet, vec![vec![0, 1, 0], vec![1, 1, 1], vec![1, 0, 0]]).unwrap();
        let x = Point::from_symbols(vec![0, 0, 0]);
        let tol = Tolerances::default();
        for psi in [quadratic_psi(), psi_c(1.0).unwrap()] {
            let same = check_recursive_bound(&x, &a, 0, &[1.0], &psi, &tol).unwrap();
            assert!(same[0].pass);
            let zero = check_recursive_bound(&x, &a, 1, &[0.0], &psi, &tol).unwrap();
            assert!(zero[0].pass);
            let all = check_recursive_bound(&x, &a, 1, &theta_grid(10), &psi, &tol).unwrap();
            assert!(all.iter().all(|c| c.margin >= -1e-9));
        }
        let lone = PointSet::from_symbols(Alphabet::uniform(3, 2).unwrap(), vec![vec![0, 1, 0]]).unwrap();
        assert!(matches!(
            check_recursive_bound(&x, &lone, 1, &[0.5], &quadratic_psi(), &tol),
            Err(Error::EmptyCrossSection(1))
        ));
    }

    #[test]
    fn monte_carlo_examples() {
        let q = ProductMeasure::uniform(Alphabet::uniform(3, 3).unwrap());
        let one = monte_carlo_expectation(&q, 2000, 3, |_| 1.0);
        assert_eq!(one.estimate, 1.0);
        assert_eq!(one.std_error, 0.0);

        let f = |x: &Point| x.symbols().iter().sum::<usize>() as f64;
        let small = monte_carlo_expectation(&q, 4000, 11, f);
        let large = monte_carlo_expectation(&q, 8000, 11, f);
        let ratio = small.std_error / large.std_error;
        assert!((ratio - 2f64.sqrt()).abs() < 0.1, "{ratio}");
        assert!((large.estimate - 3.0).abs() < 4.0 * large.std_error);
    }

    #[test]
    fn monte_carlo_frequency_matches_measure() {
        let s = random_scenario(5, &GeneratorConfig::default(), quadratic_psi(), GammaSpec::LogInv).unwrap();
        let est = monte_carlo_expectation(&s.measure, 20_000, 99, |x| f64::from(u8::from(s.set.contains(x))));
        assert!((est.estimate - s.prob_a()).abs() <= 4.0 * est.std_error + 1e-12);
    }

    #[test]
    fn sampling_is_schedule_independent() {
        let q =
            ProductMeasure::new(Alphabet::new(vec![3, 2]).unwrap(), vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.4]]).unwrap();
        let sequential: Vec<Point> = (0..500).map(|i| sample_point(&q, 42, i)).collect();
        let parallel: Vec<Point> = (0..500u64).into_par_iter().map(|i| sample_point(&q, 42, i)).collect();
        assert_eq!(sequential, parallel);
        let reversed: Vec<Point> = (0..500).rev().map(|i| sample_point(&q, 42, i)).collect();
        assert_eq!(sequential, reversed.into_iter().rev().collect::<Vec<_>>());
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let mut s = random_scenario(21, &GeneratorConfig::default(), psi_c(1.0).unwrap(), GammaSpec::LogInv).unwrap();
        s.mc = Some(McConfig { samples: 20_000, seed: 8 });
        let exact = check_exp_moment(&s).unwrap();
        let mc = monte_carlo_check(&s).unwrap();
        let Method::MonteCarlo { estimate, std_error, .. } = mc[0].method else { panic!() };
        assert!((estimate - exact.lhs).abs() <= 4.0 * std_error + 1e-12);

        s.mc = Some(McConfig { samples: 10, seed: 8 });
        assert!(monte_carlo_check(&s).is_err());
    }

    #[test]
    fn verify_runs_all_exact_checks() {
        let s =
            random_scenario(3, &GeneratorConfig::default(), psi_c(1.0).unwrap(), GammaSpec::c_log_inv(1.0).unwrap())
                .unwrap();
        let report = verify(&s, &CheckKind::EXACT).unwrap();
        assert!(report.pass, "{:?}", report.failures().collect::<Vec<_>>());
        assert_eq!(report.scenario_digest, s.digest());
        assert_eq!(report, verify(&s, &CheckKind::EXACT).unwrap());
    }

    #[test]
    fn full_space_equality_cases() {
        let s = full_scenario();
        let report = verify(&s, &[CheckKind::ExpMoment, CheckKind::FpsicBound, CheckKind::TheoremBound]).unwrap();
        for c in &report.checks {
            assert!((c.lhs - 1.0).abs() < 1e-12 && (c.rhs - 1.0).abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn scenario_validation() {
        let alphabet = Alphabet::uniform(2, 2).unwrap();
        let q = ProductMeasure::uniform(alphabet.clone());
        assert!(Scenario::new(q.clone(), PointSet::empty(alphabet), quadratic_psi(), GammaSpec::LogInv).is_err());
        let other = PointSet::from_symbols(Alphabet::uniform(3, 2).unwrap(), vec![vec![0, 0, 0]]).unwrap();
        assert!(Scenario::new(q, other, quadratic_psi(), GammaSpec::LogInv).is_err());
        assert_eq!("tail_bound".parse::<CheckKind>().unwrap(), CheckKind::TailBound);
        assert!("bogus".parse::<CheckKind>().is_err());
    }

    #[test]
    fn generators_are_seeded() {
        let cfg = GeneratorConfig::default();
        let a = random_scenario(10, &cfg, quadratic_psi(), GammaSpec::LogInv).unwrap();
        let b = random_scenario(10, &cfg, quadratic_psi(), GammaSpec::LogInv).unwrap();
        assert_eq!(a, b);
        assert!(a.measure.is_strictly_positive());
        assert!(a.set.len() <= 25 && a.alphabet().dim() <= 6);
        let inst = random_recursive_instance(4, &cfg).unwrap();
        let (_, z) = inst.x.split_last().unwrap();
        assert!(!cross_section(&inst.set, z).unwrap().is_empty());
        assert!(!cross_section(&inst.set, inst.m).unwrap().is_empty());
    }
}
