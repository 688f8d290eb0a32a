//! Separable convex minimization over `conv(h(x, A))`.
//!
//! Both `D(x, A)² = min Σ ξ_i²` and `F_ψ(x, A) = min Σ ψ(ξ_i)` are minima of a
//! separable convex function over the convex hull of the binary patterns
//! `h(x, y)`, `y ∈ A`. A point of the hull is carried as barycentric weights
//! over the vertex list; the weights play the role of the mixing measure on
//! `A`.
//!
//! The solver is pairwise conditional gradient: the linear minimization
//! oracle is an exact scan of the vertex list, each step moves mass from the
//! worst active vertex to the best vertex, and the step length is an exact
//! one-dimensional line search. The Frank–Wolfe gap `max_v ⟨∇f(ξ), ξ − v⟩`
//! bounds the suboptimality of every returned objective.
//!
//! Small instances can be cross-checked against [`brute_force_min_norm`]
//! (exact, by enumerating affine faces) and [`brute_force_f_psi`] (grid search).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::product_space::{hamming_pattern, weighted_set_distance, HammingPattern, Point, PointSet, WeightVector};
use crate::psi::PsiSpec;

/// Default Frank–Wolfe gap tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Largest double strictly below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Deduplicated, sorted vertex list of `conv(h(x, A))`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HullProblem {
    vertices: Vec<HammingPattern>,
    n: usize,
}

impl HullProblem {
    pub fn new(mut vertices: Vec<HammingPattern>) -> Result<Self> {
        let n = vertices.first().ok_or(Error::EmptySet)?.dim();
        if let Some(v) = vertices.iter().find(|v| v.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: v.dim() });
        }
        vertices.sort_unstable();
        vertices.dedup();
        Ok(Self { vertices, n })
    }

    /// Convenience constructor from raw bit rows.
    pub fn from_bits(rows: Vec<Vec<u8>>) -> Result<Self> {
        Self::new(rows.into_iter().map(HammingPattern::from_bits).collect::<Result<_>>()?)
    }

    pub fn vertices(&self) -> &[HammingPattern] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains_zero(&self) -> bool {
        self.vertices.iter().any(HammingPattern::is_zero)
    }

    /// Coordinates on which every vertex has the same bit.
    pub fn constant_coordinates(&self) -> Vec<bool> {
        (0..self.n)
            .map(|i| {
                let first = self.vertices[0].bits()[i];
                self.vertices.iter().all(|v| v.bits()[i] == first)
            })
            .collect()
    }
}

/// `conv(h(x, A))` as a deduplicated vertex list.
pub fn build_hull(x: &Point, a: &PointSet) -> Result<HullProblem> {
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    let vertices = a.iter().map(|y| hamming_pattern(x, y)).collect::<Result<Vec<_>>>()?;
    HullProblem::new(vertices)
}

/// Per-coordinate convex cost `φ` on `[0,1]`; the objective is `Σ φ(ξ_i)`.
pub trait SeparableObjective: Sync {
    fn value(&self, t: f64) -> f64;

    /// `φ'(t)`; may be `+∞` at `t = 1`.
    fn deriv(&self, t: f64) -> f64;

    /// Minimizer of `γ ↦ Σ φ(ξ_i + γ d_i)` on `[0, max_step]`.
    ///
    /// The default bisects on the directional derivative, which is
    /// nondecreasing in `γ` by convexity.
    fn line_search(&self, xi: &[f64], dir: &[f64], max_step: f64) -> f64 {
        let slope = |gamma: f64| -> f64 {
            xi.iter()
                .zip(dir)
                .filter(|(_, d)| **d != 0.0)
                .map(|(x, d)| d * self.deriv((x + gamma * d).clamp(0.0, 1.0)))
                .sum()
        };
        if slope(max_step) <= 0.0 {
            return max_step;
        }
        let (mut lo, mut hi) = (0.0f64, max_step);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// `φ(t) = t²`, whose minimum over the hull is `D(x, A)²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredNorm;

fn quadratic_step(xi: &[f64], dir: &[f64], max_step: f64) -> f64 {
    let num: f64 = xi.iter().zip(dir).map(|(x, d)| x * d).sum();
    let den: f64 = dir.iter().map(|d| d * d).sum();
    if den == 0.0 {
        return 0.0;
    }
    (-num / den).clamp(0.0, max_step)
}

impl SeparableObjective for SquaredNorm {
    fn value(&self, t: f64) -> f64 {
        t * t
    }

    fn deriv(&self, t: f64) -> f64 {
        2.0 * t
    }

    fn line_search(&self, xi: &[f64], dir: &[f64], max_step: f64) -> f64 {
        quadratic_step(xi, dir, max_step)
    }
}

impl SeparableObjective for PsiSpec {
    fn value(&self, t: f64) -> f64 {
        self.eval(t)
    }

    fn deriv(&self, t: f64) -> f64 {
        PsiSpec::deriv(self, t)
    }

    fn line_search(&self, xi: &[f64], dir: &[f64], max_step: f64) -> f64 {
        match self {
            PsiSpec::Quadratic => quadratic_step(xi, dir, max_step),
            PsiSpec::PsiC(_) => bisection_line_search(self, xi, dir, max_step),
        }
    }
}

fn bisection_line_search<F: SeparableObjective + ?Sized>(phi: &F, xi: &[f64], dir: &[f64], max_step: f64) -> f64 {
    struct Plain<'a, F: ?Sized>(&'a F);
    impl<F: SeparableObjective + ?Sized> SeparableObjective for Plain<'_, F> {
        fn value(&self, t: f64) -> f64 {
            self.0.value(t)
        }
        fn deriv(&self, t: f64) -> f64 {
            self.0.deriv(t)
        }
    }
    Plain(phi).line_search(xi, dir, max_step)
}

/// Solver configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// A feasible point of the hull with its optimality certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct HullSolution {
    pub xi: Vec<f64>,
    /// Barycentric weights, aligned with [`HullProblem::vertices`].
    pub weights: Vec<f64>,
    pub objective: f64,
    /// Frank–Wolfe gap at `xi`; `objective − gap` is a lower bound on the minimum.
    pub gap: f64,
    pub iterations: usize,
    /// `false` when the iteration cap was hit before `gap ≤ tol`.
    pub converged: bool,
}

impl HullSolution {
    /// Certified lower bound on the optimal objective.
    pub fn lower_bound(&self) -> f64 {
        (self.objective - self.gap.max(0.0)).max(0.0)
    }
}

fn combine(vertices: &[Vec<f64>], weights: &[f64], n: usize) -> Vec<f64> {
    let mut xi = vec![0.0; n];
    for (v, &w) in vertices.iter().zip(weights) {
        if w != 0.0 {
            for (x, b) in xi.iter_mut().zip(v) {
                *x += w * b;
            }
        }
    }
    xi
}

fn gradient<F: SeparableObjective + ?Sized>(phi: &F, xi: &[f64], constant: &[bool], grad: &mut [f64]) {
    for ((g, &x), &fixed) in grad.iter_mut().zip(xi).zip(constant) {
        // Constant coordinates contribute nothing to ⟨∇f, ξ − v⟩, and an
        // interior evaluation avoids an infinite slope at ξ_i = 1.
        *g = if fixed { 0.0 } else { phi.deriv(x.clamp(0.0, BELOW_ONE)) };
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `Σ φ(ξ_i)` over the hull by pairwise conditional gradient.
///
/// Stops when the Frank–Wolfe gap is at most `opts.tol` or at the iteration
/// cap; in the latter case the returned solution has `converged = false`.
pub fn minimize_separable_convex<F: SeparableObjective + ?Sized>(
    hull: &HullProblem,
    phi: &F,
    opts: SolverOptions,
) -> HullSolution {
    let n = hull.dim();
    let m = hull.len();
    let verts: Vec<Vec<f64>> = hull.vertices().iter().map(HammingPattern::to_f64).collect();
    let constant = hull.constant_coordinates();
    let objective_at = |xi: &[f64]| -> f64 { xi.iter().map(|&t| phi.value(t)).sum() };

    // Start from the best vertex; ties go to the lowest index.
    let mut start = 0;
    let mut start_val = f64::INFINITY;
    for (j, v) in verts.iter().enumerate() {
        let val = objective_at(v);
        if val < start_val {
            start_val = val;
            start = j;
        }
    }
    let mut weights = vec![0.0; m];
    weights[start] = 1.0;
    let mut xi = verts[start].clone();
    let mut grad = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        gradient(phi, &xi, &constant, &mut grad);
        let mut fw = 0;
        let mut fw_score = f64::INFINITY;
        let mut away = usize::MAX;
        let mut away_score = f64::NEG_INFINITY;
        for (j, v) in verts.iter().enumerate() {
            let s = dot(&grad, v);
            if s < fw_score {
                fw_score = s;
                fw = j;
            }
            if weights[j] > 0.0 && s > away_score {
                away_score = s;
                away = j;
            }
        }
        gap = dot(&grad, &xi) - fw_score;
        if gap <= opts.tol || fw == away {
            break;
        }
        iterations += 1;

        let max_step = weights[away];
        for ((d, s), a) in dir.iter_mut().zip(&verts[fw]).zip(&verts[away]) {
            *d = s - a;
        }
        let step = phi.line_search(&xi, &dir, max_step);
        if step <= 0.0 {
            // No representable progress along the best pairwise direction.
            break;
        }
        if step >= max_step {
            weights[fw] += max_step;
            weights[away] = 0.0;
        } else {
            weights[fw] += step;
            weights[away] -= step;
        }
        xi = combine(&verts, &weights, n);
    }

    gradient(phi, &xi, &constant, &mut grad);
    let fw_score = verts.iter().map(|v| dot(&grad, v)).fold(f64::INFINITY, f64::min);
    gap = gap.min(f64::INFINITY).max(dot(&grad, &xi) - fw_score).max(0.0);
    let gap = if gap.is_finite() { gap } else { dot(&grad, &xi) - fw_score };
    HullSolution { objective: objective_at(&xi), converged: gap <= opts.tol, xi, weights, gap, iterations }
}

/// Solution of `min |ξ|²` over `conv(h(x, A))`.
pub fn distance_d_solution(x: &Point, a: &PointSet, tol: f64) -> Result<HullSolution> {
    let hull = build_hull(x, a)?;
    Ok(minimize_separable_convex(&hull, &SquaredNorm, SolverOptions::with_tol(tol)))
}

/// Convex distance `D(x, A)`.
pub fn distance_d(x: &Point, a: &PointSet, tol: f64) -> Result<f64> {
    Ok(distance_d_solution(x, a, tol)?.objective.sqrt())
}

/// Solution of `min Σ ψ(ξ_i)` over `conv(h(x, A))`.
pub fn f_psi_solution(x: &Point, a: &PointSet, psi: &PsiSpec, tol: f64) -> Result<HullSolution> {
    let hull = build_hull(x, a)?;
    Ok(minimize_separable_convex(&hull, psi, SolverOptions::with_tol(tol)))
}

/// `F_ψ(x, A)`.
pub fn f_psi(x: &Point, a: &PointSet, psi: &PsiSpec, tol: f64) -> Result<f64> {
    Ok(f_psi_solution(x, a, psi, tol)?.objective)
}

/// Exact minimum norm of the hull, by projecting the origin onto the affine
/// hull of every vertex subset of size ≤ n+1 and keeping the projections with
/// nonnegative barycentric coordinates. Requires `|V| ≤ 12`, `n ≤ 10`.
pub fn brute_force_min_norm(hull: &HullProblem) -> Result<f64> {
    let m = hull.len();
    let n = hull.dim();
    if m > 12 || n > 10 {
        return Err(Error::OracleCap(format!("min-norm oracle needs |V| ≤ 12 and n ≤ 10, got {m} and {n}")));
    }
    let verts: Vec<Vec<f64>> = hull.vertices().iter().map(HammingPattern::to_f64).collect();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1u32 << m) {
        let k = mask.count_ones() as usize;
        if k > n + 1 {
            continue;
        }
        let idx: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
        // KKT system of min |Σ λ_j v_j|² subject to Σ λ_j = 1.
        let mut kkt = DMatrix::<f64>::zeros(k + 1, k + 1);
        for (a, &ja) in idx.iter().enumerate() {
            for (b, &jb) in idx.iter().enumerate() {
                kkt[(a, b)] = dot(&verts[ja], &verts[jb]);
            }
            kkt[(a, k)] = 1.0;
            kkt[(k, a)] = 1.0;
        }
        let lu = kkt.lu();
        // Integer matrix: a determinant below 1/2 in magnitude is exactly zero,
        // i.e. the subset is affinely dependent and a smaller subset covers it.
        if lu.determinant().abs() < 0.5 {
            continue;
        }
        let mut rhs = DVector::<f64>::zeros(k + 1);
        rhs[k] = 1.0;
        let Some(sol) = lu.solve(&rhs) else { continue };
        if (0..k).any(|a| sol[a] < -1e-12) {
            continue;
        }
        let mut point = vec![0.0; n];
        for (a, &j) in idx.iter().enumerate() {
            for (p, v) in point.iter_mut().zip(&verts[j]) {
                *p += sol[a] * v;
            }
        }
        best = best.min(dot(&point, &point).sqrt());
    }
    Ok(best)
}

/// Grid-search upper bound on `min Σ ψ(ξ_i)` for hulls with at most four
/// vertices: every barycentric point with denominator `resolution`, then one
/// finer pass around the best grid point.
pub fn brute_force_f_psi(hull: &HullProblem, psi: &PsiSpec, resolution: usize) -> Result<f64> {
    let m = hull.len();
    if m > 4 {
        return Err(Error::OracleCap(format!("grid oracle needs |V| ≤ 4, got {m}")));
    }
    if resolution == 0 {
        return Err(Error::OracleCap("grid resolution must be positive".into()));
    }
    let verts: Vec<Vec<f64>> = hull.vertices().iter().map(HammingPattern::to_f64).collect();
    let n = hull.dim();
    let eval = |w: &[f64]| -> f64 { combine(&verts, w, n).iter().map(|&t| psi.eval(t)).sum() };

    let mut best = f64::INFINITY;
    let mut best_w = vec![0.0; m];
    let mut counts = vec![0usize; m];
    compositions(&mut counts, 0, resolution, &mut |c| {
        let w: Vec<f64> = c.iter().map(|&k| k as f64 / resolution as f64).collect();
        let val = eval(&w);
        if val < best {
            best = val;
            best_w = w;
        }
    });

    // Local refinement: offsets of ±1 coarse cell in REFINE sub-steps on the
    // first m−1 weights; the last weight absorbs the remainder.
    const REFINE: i64 = 10;
    if m > 1 {
        let h = 1.0 / (resolution as f64 * REFINE as f64);
        let free = m - 1;
        let span = (2 * REFINE + 1) as usize;
        let total = span.pow(free as u32);
        let mut w = vec![0.0; m];
        for code in 0..total {
            let mut rest = code;
            let mut ok = true;
            let mut sum = 0.0;
            for j in 0..free {
                let off = (rest % span) as i64 - REFINE;
                rest /= span;
                w[j] = best_w[j] + off as f64 * h;
                if w[j] < 0.0 {
                    ok = false;
                    break;
                }
                sum += w[j];
            }
            if !ok {
                continue;
            }
            w[m - 1] = 1.0 - sum;
            if w[m - 1] < 0.0 {
                continue;
            }
            best = best.min(eval(&w));
        }
    }
    Ok(best)
}

fn compositions(counts: &mut [usize], pos: usize, remaining: usize, visit: &mut impl FnMut(&[usize])) {
    if pos + 1 == counts.len() {
        counts[pos] = remaining;
        visit(counts);
        return;
    }
    for k in 0..=remaining {
        counts[pos] = k;
        compositions(counts, pos + 1, remaining - k, visit);
    }
}

/// Minimax certificate `w* = ξ*/|ξ*|` and `d_{w*}(x, A)`, which equals
/// `D(x, A)` at the optimum.
pub fn dual_weight_certificate(x: &Point, a: &PointSet, solution: &HullSolution) -> Result<(WeightVector, f64)> {
    let norm = dot(&solution.xi, &solution.xi).sqrt();
    if norm <= 1e-12 {
        return Err(Error::CertificateUndefined);
    }
    let w = WeightVector::normalized(&solution.xi)?;
    let d = weighted_set_distance(x, a, &w)?;
    Ok((w, d))
}
