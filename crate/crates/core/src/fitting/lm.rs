use nalgebra::{DMatrix, DVector};

use super::{warm_start_seed, FitProblem, FitResult};
use crate::error::{Result, StfError};
use crate::trajectory::FotParams;

/// Stopping rules for the damped Gauss-Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative objective decrease below which an accepted step ends the run.
    pub ftol: f64,
    /// Coefficient step (infinity norm) below which the run ends.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 100, ftol: 1e-8, xtol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: DVector<f64>,
    /// Sum of squared residuals at `x`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after every accepted step, starting with the initial cost.
    pub history: Vec<f64>,
}

const MAX_REJECTIONS: usize = 40;

/// Levenberg-Marquardt minimization of `||r(x)||^2` with optional box bounds
/// applied by coordinate projection after each step.
///
/// `jacobian(x, r)` receives the residual already evaluated at `x`.
pub fn levenberg_marquardt<R, J>(
    residuals: R,
    jacobian: J,
    x0: DVector<f64>,
    bounds: Option<&[(f64, f64)]>,
    options: LmOptions,
) -> Result<LmOutcome>
where
    R: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    J: Fn(&DVector<f64>, &DVector<f64>) -> Result<DMatrix<f64>>,
{
    let project = |mut x: DVector<f64>| {
        if let Some(b) = bounds {
            for (v, (lo, hi)) in x.iter_mut().zip(b) {
                *v = v.clamp(*lo, *hi);
            }
        }
        x
    };
    let n = x0.len();
    let mut x = project(x0);
    let mut r = residuals(&x)?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(StfError::NonFinite("initial residuals"));
    }
    let mut cost = r.norm_squared();
    let mut history = vec![cost];
    let mut mu: Option<f64> = None;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iterations {
        if cost == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;
        let jac = jacobian(&x, &r)?;
        let normal = jac.transpose() * &jac;
        let gradient = jac.transpose() * &r;
        if gradient.amax() == 0.0 {
            converged = true;
            break;
        }
        let damping = mu.get_or_insert_with(|| {
            let max_diag = normal.diagonal().max();
            (1e-3 * max_diag).max(f64::MIN_POSITIVE)
        });

        let mut accepted = false;
        let mut tiny_step = false;
        for _ in 0..MAX_REJECTIONS {
            let mut damped = normal.clone();
            for i in 0..n {
                damped[(i, i)] += *damping;
            }
            let step = match damped.cholesky() {
                Some(chol) => -chol.solve(&gradient),
                None => {
                    *damping *= 10.0;
                    continue;
                }
            };
            let candidate = project(&x + &step);
            let actual_step = (&candidate - &x).amax();
            let trial = residuals(&candidate).ok().filter(|v| v.iter().all(|e| e.is_finite()));
            match trial {
                Some(r_new) if r_new.norm_squared() < cost => {
                    let new_cost = r_new.norm_squared();
                    let rel = (cost - new_cost) / cost;
                    x = candidate;
                    r = r_new;
                    cost = new_cost;
                    history.push(cost);
                    *damping = (*damping / 10.0).max(f64::MIN_POSITIVE);
                    accepted = true;
                    if rel < options.ftol || actual_step < options.xtol {
                        converged = true;
                    }
                    break;
                }
                _ => {
                    *damping *= 10.0;
                    if actual_step < options.xtol {
                        tiny_step = true;
                        break;
                    }
                }
            }
        }
        if converged || tiny_step {
            converged = true;
            break;
        }
        if !accepted {
            break;
        }
    }

    Ok(LmOutcome { x, cost, iterations, converged, history })
}

/// Damped Gauss-Newton fit of a trajectory to observations through a
/// (possibly nonlinear) observation model.
pub fn nonlinear_ls_fit(problem: &FitProblem) -> Result<FitResult> {
    problem.validate()?;
    if problem.observations.is_empty() {
        return Err(StfError::InvalidConfig("a fit needs at least one observation".into()));
    }
    let weights = problem.normalized_weights()?;
    let t_ref = problem.t_ref();
    let valid = (problem.window.k1, problem.window.k2);
    let seed = match &problem.initial_params {
        Some(p) => p.recentered(t_ref).with_window(valid),
        None => warm_start_seed(None, &problem.window, problem),
    };
    if seed.dims() != problem.dims() {
        return Err(StfError::DimensionMismatch { expected: problem.dims(), got: seed.dims() });
    }
    let template = FotParams::zeros(problem.dims(), problem.basis.clone(), t_ref, valid);

    let residuals = |flat: &DVector<f64>| problem.residual_vector(&template.with_flat(flat), &weights);
    let jacobian =
        |flat: &DVector<f64>, r: &DVector<f64>| match analytic_jacobian(problem, &template.with_flat(flat), &weights) {
            Some(j) => j,
            None => finite_difference_jacobian(&residuals, flat, r.len()),
        };
    let outcome = levenberg_marquardt(residuals, jacobian, seed.flatten(), problem.bounds.as_deref(), problem.options)?;
    Ok(FitResult {
        params: template.with_flat(&outcome.x),
        objective: outcome.cost,
        iterations: outcome.iterations,
        converged: outcome.converged,
        condition_warning: false,
    })
}

/// Chain rule through the model's state Jacobian; `None` when the model has
/// no analytic Jacobian for some observation.
pub(crate) fn analytic_jacobian(
    problem: &FitProblem,
    params: &FotParams,
    weights: &[f64],
) -> Option<Result<DMatrix<f64>>> {
    let dims = params.dims();
    let m = params.order();
    let mut blocks: Vec<(DMatrix<f64>, DVector<f64>, f64)> = Vec::new();
    for (obs, w) in problem.observations.iter().zip(weights) {
        let state = params.state_at(obs.time);
        let h = if obs.is_anchor() {
            DMatrix::identity(dims, dims)
        } else {
            match problem.spec.model.state_jacobian(&state, obs.sensor_id, obs.time)? {
                Ok(h) => h,
                Err(reason) => return Some(Err(StfError::Evaluation { time: obs.time, reason })),
            }
        };
        let phi = params.basis.basis_vector(obs.time, params.t_ref);
        blocks.push((h, phi, -w.sqrt()));
    }
    if let Some(p) = &problem.spec.penalty {
        let phi = params.basis.basis_vector(p.time, params.t_ref);
        blocks.push((DMatrix::identity(dims, dims), phi, p.trade_off.sqrt()));
    }
    let rows: usize = blocks.iter().map(|(h, _, _)| h.nrows()).sum();
    let mut jac = DMatrix::zeros(rows, dims * m);
    let mut row = 0;
    for (h, phi, scale) in blocks {
        for i in 0..h.nrows() {
            for d in 0..dims {
                let hd = h[(i, d)] * scale;
                for k in 0..m {
                    jac[(row + i, d * m + k)] = hd * phi[k];
                }
            }
        }
        row += h.nrows();
    }
    Some(Ok(jac))
}

/// Central differences with step `max(1e-6, 1e-6 |x_i|)`.
pub(crate) fn finite_difference_jacobian<R>(residuals: &R, x: &DVector<f64>, rows: usize) -> Result<DMatrix<f64>>
where
    R: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut jac = DMatrix::zeros(rows, x.len());
    for i in 0..x.len() {
        let h = (1e-6 * x[i].abs()).max(1e-6);
        let mut hi = x.clone();
        hi[i] += h;
        let mut lo = x.clone();
        lo[i] -= h;
        let col = (residuals(&hi)? - residuals(&lo)?) / (2.0 * h);
        jac.set_column(i, &col);
    }
    Ok(jac)
}
