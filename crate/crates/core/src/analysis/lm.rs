//! Small dense Levenberg–Marquardt solver for models with a handful of parameters.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A least-squares model `y ≈ f(t; p)`.
pub trait Model {
    fn num_params(&self) -> usize;
    /// Value and gradient with respect to the parameters at `t`.
    fn eval(&self, p: &[f64], t: f64, grad: &mut [f64]) -> f64;
    /// Whether `p` lies in the admissible domain; steps leaving it are rejected.
    fn admissible(&self, _p: &[f64]) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub rss: f64,
    /// `JᵀJ` at the solution.
    pub jtj: DMatrix<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative decrease of the residual sum below which the fit is converged.
    pub rss_tol: f64,
    /// Relative parameter step below which the fit is converged.
    pub step_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 200, rss_tol: 1e-15, step_tol: 1e-12 }
    }
}

fn residuals_and_jacobian<M: Model>(model: &M, p: &[f64], t: &[f64], y: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let k = model.num_params();
    let mut r = DVector::zeros(t.len());
    let mut jac = DMatrix::zeros(t.len(), k);
    let mut g = vec![0.0; k];
    for (i, (&ti, &yi)) in t.iter().zip(y).enumerate() {
        let f = model.eval(p, ti, &mut g);
        r[i] = yi - f;
        for j in 0..k {
            jac[(i, j)] = g[j];
        }
    }
    (r, jac)
}

fn rss_at<M: Model>(model: &M, p: &[f64], t: &[f64], y: &[f64]) -> f64 {
    let mut g = vec![0.0; model.num_params()];
    t.iter().zip(y).map(|(&ti, &yi)| (yi - model.eval(p, ti, &mut g)).powi(2)).sum()
}

/// Minimizes `Σ (y − f(t; p))²` from `p0`.
pub fn levenberg_marquardt<M: Model>(model: &M, t: &[f64], y: &[f64], p0: &[f64], opts: &LmOptions) -> Result<LmOutcome> {
    let k = model.num_params();
    if p0.len() != k {
        return Err(Error::InvalidInputs(format!("expected {k} initial parameters, got {}", p0.len())));
    }
    if !model.admissible(p0) {
        return Err(Error::InvalidInputs("initial parameters outside the model domain".into()));
    }
    let mut p = p0.to_vec();
    let (mut r, mut jac) = residuals_and_jacobian(model, &p, t, y);
    let mut rss = r.norm_squared();
    let mut lambda = 1e-3;
    for iter in 1..=opts.max_iterations {
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut accepted = false;
        let mut converged = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for j in 0..k {
                a[(j, j)] += lambda * jtj[(j, j)].max(1e-300);
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&jtr),
                None => match a.lu().solve(&jtr) {
                    Some(s) => s,
                    None => {
                        lambda *= 10.0;
                        continue;
                    }
                },
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            if trial.iter().any(|v| !v.is_finite()) || !model.admissible(&trial) {
                lambda *= 10.0;
                continue;
            }
            let trial_rss = rss_at(model, &trial, t, y);
            if trial_rss.is_finite() && trial_rss <= rss {
                let small_step = step
                    .iter()
                    .zip(&p)
                    .all(|(s, v)| s.abs() <= opts.step_tol * (v.abs() + opts.step_tol));
                let small_gain = rss - trial_rss <= opts.rss_tol * rss.max(f64::MIN_POSITIVE);
                p = trial;
                rss = trial_rss;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                converged = small_step || small_gain;
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                break;
            }
        }
        let (r2, j2) = residuals_and_jacobian(model, &p, t, y);
        r = r2;
        jac = j2;
        if !accepted || converged || rss == 0.0 {
            // no downhill step exists at any damping: a stationary point
            return Ok(LmOutcome { jtj: jac.transpose() * &jac, params: p, rss, iterations: iter });
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations })
}

/// `s² (JᵀJ)⁺` with `s² = RSS / (m − k)`.
pub fn covariance(outcome: &LmOutcome, num_points: usize) -> DMatrix<f64> {
    let k = outcome.params.len();
    let dof = num_points.saturating_sub(k).max(1) as f64;
    let s2 = outcome.rss / dof;
    let pinv = outcome
        .jtj
        .clone()
        .pseudo_inverse(1e-12 * outcome.jtj.amax().max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DMatrix::zeros(k, k));
    pinv * s2
}
