//! Levenberg-Marquardt core with box constraints by reparametrization.

use super::{FitResult, ParamSpec};
use crate::error::{domain, Result};
use nalgebra::{DMatrix, DVector};

/// A weighted least-squares problem `min sum w_i (y_i - model(x_i, p))^2`.
pub struct FitProblem<'a> {
    pub model: &'a dyn Fn(f64, &[f64]) -> f64,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub weights: &'a [f64],
    pub params: Vec<ParamSpec>,
}

/// How the covariance is scaled by the residual variance `s^2 = chi2 / n_dof`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorScale {
    /// Always multiply by `s^2` (weights known only up to a factor).
    Residual,
    /// Multiply by `max(s^2, 1)`: for Poisson weights the variance scale is
    /// known, and empty bins (weight 1, model near 0) would otherwise drag
    /// `s^2` below one and shrink the errors.
    ResidualAtLeastOne,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Relative objective decrease below which an accepted step counts as converged.
    pub tol: f64,
    pub max_iter: usize,
    pub error_scale: ErrorScale,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200, error_scale: ErrorScale::Residual }
    }
}

impl FitOptions {
    /// Defaults for Poisson-weighted count data.
    pub fn counts() -> Self {
        Self { error_scale: ErrorScale::ResidualAtLeastOne, ..Self::default() }
    }
}

const NU: f64 = 10.0;
const LAMBDA0: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e20;
const POLISH_MAX: usize = 60;

/// Forward-difference step for a parameter value.
pub fn default_step(p: f64) -> f64 {
    (1e-6 * p.abs()).max(1e-9)
}

/// Forward-difference Jacobian `d model(x_i) / d p_j` with explicit steps.
/// Row `i` is data point `i`.
pub fn forward_jacobian(model: &dyn Fn(f64, &[f64]) -> f64, x: &[f64], params: &[f64], steps: &[f64]) -> DMatrix<f64> {
    let base: Vec<f64> = x.iter().map(|&xi| model(xi, params)).collect();
    let mut jac = DMatrix::zeros(x.len(), params.len());
    let mut p = params.to_vec();
    for j in 0..params.len() {
        p[j] = params[j] + steps[j];
        let h = p[j] - params[j];
        for (i, &xi) in x.iter().enumerate() {
            jac[(i, j)] = (model(xi, &p) - base[i]) / h;
        }
        p[j] = params[j];
    }
    jac
}

/// Maps an unconstrained internal coordinate onto `[lower, upper]`.
#[derive(Debug, Clone, Copy)]
enum Transform {
    Identity,
    Lower(f64),
    Upper(f64),
    Both(f64, f64),
}

impl Transform {
    fn of(spec: &ParamSpec) -> Self {
        match (spec.lower.is_finite(), spec.upper.is_finite()) {
            (false, false) => Transform::Identity,
            (true, false) => Transform::Lower(spec.lower),
            (false, true) => Transform::Upper(spec.upper),
            (true, true) => Transform::Both(spec.lower, spec.upper),
        }
    }

    fn to_external(self, u: f64) -> f64 {
        match self {
            Transform::Identity => u,
            Transform::Lower(lo) => lo + u.exp(),
            Transform::Upper(hi) => hi - u.exp(),
            Transform::Both(lo, hi) => lo + (hi - lo) / (1.0 + (-u).exp()),
        }
    }

    fn to_internal(self, p: f64) -> f64 {
        match self {
            Transform::Identity => p,
            Transform::Lower(lo) => (p - lo).ln(),
            Transform::Upper(hi) => (hi - p).ln(),
            Transform::Both(lo, hi) => ((p - lo) / (hi - p)).ln(),
        }
    }

    /// Moves a value sitting exactly on a bound slightly inside.
    fn nudge(self, p: f64) -> f64 {
        let eps = 1e-6;
        match self {
            Transform::Identity => p,
            Transform::Lower(lo) if p == lo => lo + eps * lo.abs().max(1.0),
            Transform::Upper(hi) if p == hi => hi - eps * hi.abs().max(1.0),
            Transform::Both(lo, hi) if p == lo => lo + eps * (hi - lo),
            Transform::Both(lo, hi) if p == hi => hi - eps * (hi - lo),
            _ => p,
        }
    }
}

struct Setup<'a> {
    problem: &'a FitProblem<'a>,
    free: Vec<usize>,
    transforms: Vec<Transform>,
    sqrt_w: Vec<f64>,
}

impl Setup<'_> {
    fn external(&self, u: &[f64]) -> Vec<f64> {
        let mut p: Vec<f64> = self.problem.params.iter().map(|s| s.init).collect();
        for (k, &j) in self.free.iter().enumerate() {
            p[j] = self.transforms[k].to_external(u[k]);
        }
        p
    }

    /// Weighted residuals `sqrt(w) (y - f)` and their squared norm.
    fn residuals(&self, p: &[f64]) -> (DVector<f64>, f64) {
        let pr = self.problem;
        let r = DVector::from_iterator(
            pr.x.len(),
            pr.x.iter().zip(pr.y).zip(&self.sqrt_w).map(|((&x, &y), &sw)| sw * (y - (pr.model)(x, p))),
        );
        let obj = r.norm_squared();
        (r, if obj.is_finite() { obj } else { f64::INFINITY })
    }

    /// Weighted Jacobian of the model with respect to the internal coordinates.
    fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let pr = self.problem;
        let base = self.external(u);
        let f0: Vec<f64> = pr.x.iter().map(|&x| (pr.model)(x, &base)).collect();
        let mut jac = DMatrix::zeros(pr.x.len(), self.free.len());
        let mut uu = u.to_vec();
        for k in 0..self.free.len() {
            uu[k] = u[k] + default_step(u[k]);
            let h = uu[k] - u[k];
            let p = self.external(&uu);
            for (i, &x) in pr.x.iter().enumerate() {
                jac[(i, k)] = self.sqrt_w[i] * ((pr.model)(x, &p) - f0[i]) / h;
            }
            uu[k] = u[k];
        }
        jac
    }
}

impl Setup<'_> {
    fn jacobian_central(&self, u: &[f64]) -> DMatrix<f64> {
        let pr = self.problem;
        let mut jac = DMatrix::zeros(pr.x.len(), self.free.len());
        let mut uu = u.to_vec();
        for k in 0..self.free.len() {
            let h = (1e-4 * u[k].abs()).max(1e-7);
            uu[k] = u[k] + h;
            let up = self.external(&uu);
            uu[k] = u[k] - h;
            let down = self.external(&uu);
            uu[k] = u[k];
            for (i, &x) in pr.x.iter().enumerate() {
                jac[(i, k)] = self.sqrt_w[i] * ((pr.model)(x, &up) - (pr.model)(x, &down)) / (2.0 * h);
            }
        }
        jac
    }
}

fn validate(p: &FitProblem) -> Result<()> {
    let n = p.x.len();
    if p.y.len() != n || p.weights.len() != n {
        return Err(domain(format!(
            "x, y and weights must have equal length (got {}, {}, {})",
            n,
            p.y.len(),
            p.weights.len()
        )));
    }
    if let Some(i) = p.weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(domain(format!("weight {i} is not positive")));
    }
    if let Some(i) = p.x.iter().chain(p.y).position(|v| !v.is_finite()) {
        return Err(domain(format!("non-finite data value at position {i}")));
    }
    for s in &p.params {
        if !s.init.is_finite() {
            return Err(domain(format!("initial value of {} is not finite", s.name)));
        }
        if !(s.lower < s.upper) && !s.fixed {
            return Err(domain(format!("empty bounds for {}", s.name)));
        }
        if !s.fixed && (s.init < s.lower || s.init > s.upper) {
            return Err(domain(format!(
                "initial value {} of {} lies outside [{}, {}]",
                s.init, s.name, s.lower, s.upper
            )));
        }
    }
    Ok(())
}

/// Minimizes `sum w_i (y_i - model(x_i))^2` by Levenberg-Marquardt.
///
/// Damping is multiplicative (`lambda` scaled by 10 on rejection and divided
/// by 10 on acceptance) on the Marquardt-scaled normal matrix. Bounded
/// parameters are optimized through log/logistic transforms. Convergence
/// requires two consecutive accepted steps whose relative objective decrease
/// is below `tol`, and a Gauss-Newton step that would not improve the
/// objective by more than `sqrt(tol)` relative; an exact fit (objective at
/// the rounding floor) also counts as converged.
///
/// The covariance is `s^2 (J^T W J)^{-1}` with the Jacobian evaluated in the
/// original parameters at the optimum and `s^2 = chi2 / n_dof`. With
/// `n_dof = 0` the rescaling is skipped and the result is flagged.
pub fn nlls_fit(problem: &FitProblem, opts: FitOptions) -> Result<FitResult> {
    validate(problem)?;
    let mut params = problem.params.clone();
    let free: Vec<usize> = (0..params.len()).filter(|&j| !params[j].fixed).collect();
    let transforms: Vec<Transform> = free.iter().map(|&j| Transform::of(&params[j])).collect();
    for (k, &j) in free.iter().enumerate() {
        params[j].init = transforms[k].nudge(params[j].init);
    }
    let nudged = FitProblem { params, ..*problem };
    let setup = Setup {
        problem: &nudged,
        free: free.clone(),
        transforms: transforms.clone(),
        sqrt_w: problem.weights.iter().map(|w| w.sqrt()).collect(),
    };
    let mut flags = Vec::new();
    let mut u: Vec<f64> =
        free.iter().enumerate().map(|(k, &j)| transforms[k].to_internal(nudged.params[j].init)).collect();

    let scale: f64 = problem.y.iter().zip(problem.weights).map(|(y, w)| w * y * y).sum();
    let floor = 1e-28 * scale.max(f64::MIN_POSITIVE);

    let (mut r, mut obj) = setup.residuals(&setup.external(&u));
    if !obj.is_finite() {
        return Err(domain("model is not finite at the initial parameters"));
    }
    let mut lambda = LAMBDA0;
    let mut small_steps = 0;
    let mut converged = free.is_empty() || obj <= floor;
    let mut n_iter = 0;

    while !converged && n_iter < opts.max_iter {
        n_iter += 1;
        let jac = setup.jacobian(&u);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let dmax = jtj.diagonal().max();
        let diag: Vec<f64> = jtj.diagonal().iter().map(|d| d.max(1e-12 * dmax).max(f64::MIN_POSITIVE)).collect();

        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut a = jtj.clone();
            for (k, d) in diag.iter().enumerate() {
                a[(k, k)] += lambda * d;
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&g)) else {
                lambda *= NU;
                continue;
            };
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let (r_new, obj_new) = setup.residuals(&setup.external(&trial));
            if obj_new < obj {
                let rel = (obj - obj_new) / obj;
                u = trial;
                r = r_new;
                obj = obj_new;
                lambda = (lambda / NU).max(1e-12);
                accepted = true;
                small_steps = if rel < opts.tol { small_steps + 1 } else { 0 };
                break;
            }
            lambda *= NU;
        }
        if obj <= floor {
            converged = true;
        } else if !accepted || small_steps >= 2 {
            // Either no descent is possible at any damping or the objective
            // has stalled; accept only if Gauss-Newton agrees.
            let pred = gauss_newton_gain(&jtj, &diag, &g);
            if pred.is_some_and(|p| p <= opts.tol.sqrt() * obj) {
                converged = true;
            } else if !accepted {
                flags.push("damping_limit".to_string());
                break;
            } else {
                small_steps = 0;
            }
        }
    }
    if !converged && n_iter >= opts.max_iter {
        flags.push("max_iter".to_string());
    }
    if converged && obj > floor && !free.is_empty() {
        // Settle on the Gauss-Newton fixed point, so that the optimum is set
        // by the gradient rather than by rounding in objective comparisons.
        // Central differences with a wider step keep the gradient free of
        // rounding noise, which would otherwise jitter the fixed point.
        for _ in 0..POLISH_MAX {
            let jac = setup.jacobian_central(&u);
            let jtj = jac.transpose() * &jac;
            let g = jac.transpose() * &r;
            let dmax = jtj.diagonal().max();
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += 1e-10 * a[(k, k)].max(1e-12 * dmax);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&g)) else { break };
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let (r_new, obj_new) = setup.residuals(&setup.external(&trial));
            if !(obj_new <= obj * (1.0 + 1e-9)) {
                break;
            }
            let settled = step.iter().zip(&u).all(|(d, v)| d.abs() <= 1e-13 * v.abs().max(1.0));
            u = trial;
            r = r_new;
            obj = obj_new;
            if settled {
                break;
            }
        }
    }

    let p = setup.external(&u);
    let (_, chi2) = setup.residuals(&p);
    Ok(finish(problem, p, chi2, &free, converged, n_iter, flags, opts.error_scale))
}

/// Objective decrease predicted by a (minimally damped) Gauss-Newton step.
fn gauss_newton_gain(jtj: &DMatrix<f64>, diag: &[f64], g: &DVector<f64>) -> Option<f64> {
    let mut a = jtj.clone();
    for (k, d) in diag.iter().enumerate() {
        a[(k, k)] += 1e-10 * d;
    }
    let step = a.cholesky()?.solve(g);
    Some(step.dot(g))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &FitProblem,
    params: Vec<f64>,
    chi2: f64,
    free: &[usize],
    mut converged: bool,
    n_iter: usize,
    mut flags: Vec<String>,
    error_scale: ErrorScale,
) -> FitResult {
    let n_par = params.len();
    let n_dof = problem.x.len() as i64 - free.len() as i64;
    let mut covariance = vec![vec![0.0; n_par]; n_par];

    if !free.is_empty() {
        let sub: Vec<f64> = free.iter().map(|&j| params[j]).collect();
        let model = |x: f64, q: &[f64]| {
            let mut full = params.clone();
            for (k, &j) in free.iter().enumerate() {
                full[j] = q[k];
            }
            (problem.model)(x, &full)
        };
        let steps: Vec<f64> = sub.iter().map(|&v| default_step(v)).collect();
        let mut jac = forward_jacobian(&model, problem.x, &sub, &steps);
        for (i, w) in problem.weights.iter().enumerate() {
            jac.row_mut(i).scale_mut(w.sqrt());
        }
        let jtj = jac.transpose() * &jac;
        let s2 = if n_dof > 0 {
            match error_scale {
                ErrorScale::Residual => chi2 / n_dof as f64,
                ErrorScale::ResidualAtLeastOne => (chi2 / n_dof as f64).max(1.0),
            }
        } else {
            flags.push("n_dof_zero".to_string());
            1.0
        };
        match invert_spd(&jtj) {
            Some(inv) => {
                for (a, &ja) in free.iter().enumerate() {
                    for (b, &jb) in free.iter().enumerate() {
                        covariance[ja][jb] = s2 * inv[(a, b)];
                    }
                }
            }
            None => {
                converged = false;
                flags.push("singular_normal_matrix".to_string());
                for &ja in free {
                    for &jb in free {
                        covariance[ja][jb] = f64::NAN;
                    }
                }
            }
        }
    }
    let stderr =
        (0..n_par).map(|j| covariance[j][j].max(0.0).sqrt()).map(|s| if s.is_nan() { f64::NAN } else { s }).collect();
    FitResult {
        names: problem.params.iter().map(|s| s.name.clone()).collect(),
        params,
        stderr,
        covariance,
        chi2,
        n_dof,
        converged,
        n_iter,
        flags,
        derived: Default::default(),
    }
}

/// Inverse of a symmetric positive-definite matrix, or `None` when it is
/// numerically singular (condition number beyond ~1e14).
fn invert_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    // Equilibrate so the condition check is not fooled by parameter units.
    let d: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    if d.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let s = DMatrix::from_fn(n, n, |i, j| m[(i, j)] / (d[i] * d[j]).sqrt());
    let eig = s.clone().symmetric_eigen();
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
    if !(lo > 1e-14 * hi) {
        return None;
    }
    let inv = s.cholesky()?.inverse();
    Some(DMatrix::from_fn(n, n, |i, j| inv[(i, j)] / (d[i] * d[j]).sqrt()))
}
