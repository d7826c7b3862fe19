//! Log-barrier interior-point method for
//!
//! ```text
//! min Σ c_i/u_i   s.t.   Bᵀu ≤ 1,  u > 0
//! ```
//!
//! with all `c_i > 0` and every row of `B` nonzero. For increasing `t` the
//! barrier function `t·Σ c_i/u_i − Σ_j ln(1 − (Bᵀu)_j)` is minimized by
//! damped Newton steps with backtracking; each Newton system is the p×p
//! matrix `diag(2t·c/u³) + B·diag(1/s²)·Bᵀ` with slacks `s = 1 − Bᵀu`.
//! The central point yields multipliers `μ_j = 1/(t·s_j)`.
//!
//! Termination requires both the relative gap against the Lagrangian dual
//! `Σ 2√(c_i(Bμ)_i) − Σ μ_j` and the relative stationarity residual
//! `‖c/u² − Bμ‖ / ‖c/u²‖` to be within tolerance, each evaluated at the
//! rescaling of `u` to a maximum column load of one.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::nnls::nnls;
use super::SolverOptions;

pub(super) struct IpmResult {
    pub u: Vec<f64>,
    pub mu: Vec<f64>,
    pub iterations: usize,
}

const STEP_FRACTION: f64 = 0.99;
const BARRIER_GROWTH: f64 = 10.0;
const ARMIJO: f64 = 0.25;
const MAX_BACKTRACKS: usize = 60;
const MAX_T: f64 = 1e30;
/// Newton decrement below which a barrier subproblem counts as solved.
const CENTERED: f64 = 1e-15;
const MAX_CENTERING_STEPS: usize = 200;
const POLISH_STEPS: usize = 30;
const POLISH_RESTARTS: usize = 8;

struct Certified {
    u: DVector<f64>,
    mu: DVector<f64>,
    gap: f64,
    stationarity: f64,
}

impl Certified {
    fn error(&self) -> f64 {
        self.gap.max(self.stationarity)
    }
}

fn objective(c: &DVector<f64>, u: &DVector<f64>) -> f64 {
    c.iter().zip(u.iter()).map(|(c, u)| c / u).sum()
}

fn certify(c: &DVector<f64>, b: &DMatrix<f64>, u: &DVector<f64>, mu: &DVector<f64>) -> Certified {
    let worst = b.tr_mul(u).max();
    // Scaling to a maximum load of exactly one only lowers the objective.
    let u_feas = u / worst;
    let mu = mu * (worst * worst);
    let primal = objective(c, &u_feas);
    let bmu = b * &mu;
    let target = DVector::from_fn(u.len(), |i, _| c[i] / (u_feas[i] * u_feas[i]));
    let stationarity = (&target - &bmu).norm() / target.norm();
    let dual: f64 = c
        .iter()
        .zip(bmu.iter())
        .map(|(&c, &v)| 2.0 * (c * v.max(0.0)).sqrt())
        .sum::<f64>()
        - mu.sum();
    Certified {
        u: u_feas,
        mu,
        gap: ((primal - dual) / primal).max(0.0),
        stationarity,
    }
}

/// Largest `α ∈ (0, 1]` keeping `x + α·dx > 0`, backed off by `STEP_FRACTION`.
fn step_to_boundary(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    let mut alpha = f64::INFINITY;
    for (&xi, &di) in x.iter().zip(dx.iter()) {
        if di < 0.0 {
            alpha = alpha.min(-xi / di);
        }
    }
    if alpha.is_finite() {
        (STEP_FRACTION * alpha).min(1.0)
    } else {
        1.0
    }
}

fn barrier(t: f64, c: &DVector<f64>, u: &DVector<f64>, s: &DVector<f64>) -> f64 {
    if u.iter().chain(s.iter()).any(|&x| x <= 0.0) {
        return f64::INFINITY;
    }
    t * objective(c, u) - s.iter().map(|x| x.ln()).sum::<f64>()
}

/// Newton iterations toward the minimizer of the barrier at `t`. Returns
/// false if the iteration budget ran out.
fn center(
    t: f64,
    c: &DVector<f64>,
    b: &DMatrix<f64>,
    u: &mut DVector<f64>,
    iterations: &mut usize,
    max_iter: usize,
) -> bool {
    let n = b.ncols();
    let p = c.len();
    let mut steps = 0;
    loop {
        if *iterations >= max_iter {
            return false;
        }
        let s = DVector::from_element(n, 1.0) - b.tr_mul(u);
        let inv_s = s.map(|x| 1.0 / x);
        let grad = DVector::from_fn(p, |i, _| -t * c[i] / (u[i] * u[i])) + b * &inv_s;
        let mut scaled = b.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= inv_s[j];
        }
        let mut h = &scaled * scaled.transpose();
        for i in 0..p {
            h[(i, i)] += 2.0 * t * c[i] / (u[i] * u[i] * u[i]);
        }
        let Some(chol) = factor(h) else {
            return true;
        };
        let du = -chol.solve(&grad);
        let decrement = -grad.dot(&du);
        if !(decrement > CENTERED) {
            return true;
        }
        *iterations += 1;
        steps += 1;

        let ds = -b.tr_mul(&du);
        let mut alpha = step_to_boundary(u, &du).min(step_to_boundary(&s, &ds));
        let f0 = barrier(t, c, u, &s);
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let cand = &*u + alpha * &du;
            let f = barrier(t, c, &cand, &(&s + alpha * &ds));
            if f <= f0 - ARMIJO * alpha * decrement {
                accepted = cand != *u;
                *u = cand;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted || steps >= MAX_CENTERING_STEPS {
            return true;
        }
    }
}

pub(super) fn solve(
    costs: &[f64],
    profile: &DMatrix<f64>,
    opts: &SolverOptions,
) -> Result<IpmResult, IpmResult> {
    let n = profile.ncols();
    let c = DVector::from_column_slice(costs);
    let b = profile;
    assert!(n > 0, "rows with positive cost always carry sensitivity");

    // Start from u ∝ √c at half the budget, with t balancing the two terms.
    let mut u = c.map(f64::sqrt);
    let worst = b.tr_mul(&u).max();
    u /= 2.0 * worst;
    let mut t = n as f64 / objective(&c, &u);

    let multipliers = |t: f64, u: &DVector<f64>| -> DVector<f64> {
        (DVector::from_element(n, 1.0) - b.tr_mul(u)).map(|s| 1.0 / (t * s))
    };
    let mut best: Option<Certified> = None;
    let mut iterations = 0;
    while t < MAX_T {
        let budget_left = center(t, &c, b, &mut u, &mut iterations, opts.max_iter);
        let mu = multipliers(t, &u);
        let mut cert = certify(&c, b, &u, &mu);
        if cert.gap <= opts.gap_tol {
            if let Some(polished) = polish(&c, b, &u, &mu) {
                if polished.error() < cert.error() {
                    cert = polished;
                }
            }
        }
        if best.as_ref().is_none_or(|b| cert.error() < b.error()) {
            best = Some(cert);
        }
        let best_err = best.as_ref().map_or(f64::INFINITY, Certified::error);
        if best_err <= opts.gap_tol || !budget_left {
            break;
        }
        t *= BARRIER_GROWTH;
    }

    let best = best.expect("at least one centering round");
    let converged = best.error() <= opts.gap_tol;
    let result = IpmResult {
        u: best.u.iter().copied().collect(),
        mu: best.mu.iter().copied().collect(),
        iterations,
    };
    if converged {
        Ok(result)
    } else {
        Err(result)
    }
}

/// Newton's method on the optimality conditions restricted to the binding
/// constraints `A`:
///
/// ```text
/// c/u² − B_A·μ_A = 0,   1 − B_Aᵀ·u = 0
/// ```
///
/// `A` starts as the constraints whose slack is below their multiplier
/// relative to the largest one; constraints that end with a negative
/// multiplier are dropped and the iteration restarts. Returns `None` unless
/// `u` stays positive with every constraint satisfied.
fn polish(c: &DVector<f64>, b: &DMatrix<f64>, u0: &DVector<f64>, mu0: &DVector<f64>) -> Option<Certified> {
    let n = b.ncols();
    let s0 = DVector::from_element(n, 1.0) - b.tr_mul(u0);
    let top = mu0.max();
    let mut active: Vec<usize> = (0..n).filter(|&j| s0[j] * top < mu0[j]).collect();
    for _ in 0..POLISH_RESTARTS {
        if active.is_empty() {
            return None;
        }
        let (u, mu) = newton_on_active(c, b, u0, mu0, &active)?;
        let negative: Vec<usize> = (0..active.len()).filter(|&a| mu[a] < 0.0).collect();
        if negative.is_empty() {
            if b.tr_mul(&u).iter().any(|&l| l > 1.0 + 1e-12) {
                return None;
            }
            let mut full = DVector::zeros(n);
            for (a, &j) in active.iter().enumerate() {
                full[j] = mu[a];
            }
            return Some(certify(c, b, &u, &full));
        }
        active = active
            .iter()
            .enumerate()
            .filter(|(a, _)| mu[*a] >= 0.0)
            .map(|(_, &j)| j)
            .collect();
    }
    None
}

fn newton_on_active(
    c: &DVector<f64>,
    b: &DMatrix<f64>,
    u0: &DVector<f64>,
    mu0: &DVector<f64>,
    active: &[usize],
) -> Option<(DVector<f64>, DVector<f64>)> {
    let p = c.len();
    let k = active.len();
    let ba = b.select_columns(active);
    let mut u = u0.clone();
    let mut mu = DVector::from_fn(k, |a, _| mu0[active[a]]);
    let mut last = f64::INFINITY;
    for _ in 0..POLISH_STEPS {
        let r_u = DVector::from_fn(p, |i, _| c[i] / (u[i] * u[i])) - &ba * &mu;
        let r_s = DVector::from_element(k, 1.0) - ba.tr_mul(&u);
        let scale = c.iter().zip(u.iter()).map(|(c, u)| c / (u * u)).fold(0.0, f64::max);
        let residual = (r_u.amax() / scale).max(r_s.amax());
        if residual <= 1e-15 || residual > 0.5 * last {
            break;
        }
        last = residual;
        // Eliminate u through the diagonal block; the binding columns may be
        // linearly dependent, so the reduced system takes a pseudo-inverse.
        let e = DVector::from_fn(p, |i, _| u[i] * u[i] * u[i] / (2.0 * c[i]));
        let mut eb = ba.clone();
        for (i, mut row) in eb.row_iter_mut().enumerate() {
            row *= e[i];
        }
        let schur = ba.tr_mul(&eb);
        let rhs = eb.tr_mul(&r_u) - &r_s;
        let eig = schur.symmetric_eigen();
        let cutoff = 1e-13 * eig.eigenvalues.amax();
        let proj = eig.eigenvectors.tr_mul(&rhs);
        let scaled = DVector::from_fn(k, |a, _| {
            let l = eig.eigenvalues[a];
            if l > cutoff { proj[a] / l } else { 0.0 }
        });
        let dmu = &eig.eigenvectors * scaled;
        let du = e.component_mul(&(&r_u - &ba * &dmu));
        if du.iter().chain(dmu.iter()).any(|x| !x.is_finite()) {
            return None;
        }
        u += du;
        mu += dmu;
        if u.iter().any(|&x| x <= 0.0) {
            return None;
        }
    }
    if mu.iter().any(|&m| m < 0.0) {
        // Dependent columns leave μ underdetermined; look for a nonnegative
        // representation before reporting a constraint as wrongly binding.
        let target = DVector::from_fn(p, |i, _| c[i] / (u[i] * u[i]));
        let fit = nnls(&ba.tr_mul(&ba), &ba.tr_mul(&target));
        if (&ba * &fit - &target).norm() <= 1e-10 * target.norm() {
            mu = fit;
        }
    }
    Some((u, mu))
}

/// Cholesky with a diagonal shift on failure.
fn factor(k: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if let Some(ch) = Cholesky::new(k.clone()) {
        return Some(ch);
    }
    let scale = k.diagonal().max().max(1.0);
    let mut shift = 1e-14 * scale;
    for _ in 0..8 {
        let mut shifted = k.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += shift;
        }
        if let Some(ch) = Cholesky::new(shifted) {
            return Some(ch);
        }
        shift *= 100.0;
    }
    None
}
