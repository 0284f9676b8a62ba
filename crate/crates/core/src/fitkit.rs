//! Levenberg–Marquardt least squares and orthogonal distance regression.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("data length mismatch: {0}")]
    DataLength(String),
    #[error("{points} data points cannot determine {params} parameters")]
    TooFewPoints { points: usize, params: usize },
    #[error("uncertainties must be finite and positive ({0})")]
    InvalidSigma(String),
    #[error("initial value {value} of {name} is outside its bounds [{lower}, {upper}]")]
    InitialOutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("degenerate fit: {0}")]
    Degenerate(String),
    /// The minimizer stopped but the normal equations there are singular,
    /// so no covariance exists.
    #[error("degenerate fit: normal equations are singular at the optimum {parameters:?} (condition {condition:.1e})")]
    SingularOptimum { parameters: Vec<f64>, condition: f64 },
    #[error("model produced a non-finite value at parameters {0:?}")]
    NonFinite(Vec<f64>),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type ModelFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// A scalar model `y = f(params, x)` with named, optionally bounded
/// parameters.
#[derive(Clone)]
pub struct FitModel {
    names: Vec<String>,
    function: ModelFn,
    bounds: Vec<(f64, f64)>,
}

impl fmt::Debug for FitModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FitModel")
            .field("names", &self.names)
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

impl FitModel {
    pub fn new<F>(names: &[&str], function: F) -> Self
    where
        F: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            function: Arc::new(function),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); names.len()],
        }
    }

    /// Restricts parameter `name` to `[lower, upper]`; either side may be
    /// infinite.
    pub fn with_bounds(mut self, name: &str, lower: f64, upper: f64) -> Result<Self, FitError> {
        let i = self
            .index(name)
            .ok_or_else(|| FitError::InvalidModel(format!("unknown parameter {name}")))?;
        if !(lower < upper) || lower.is_nan() || upper.is_nan() {
            return Err(FitError::InvalidModel(format!(
                "bounds of {name} need lower < upper, got [{lower}, {upper}]"
            )));
        }
        self.bounds[i] = (lower, upper);
        Ok(self)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn eval(&self, params: &[f64], x: f64) -> f64 {
        (self.function)(params, x)
    }

    fn to_internal(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| match (lo.is_finite(), hi.is_finite()) {
                (true, true) => {
                    let t = (v - lo) / (hi - lo);
                    (t / (1.0 - t)).ln()
                }
                (true, false) => (v - lo).ln(),
                (false, true) => (hi - v).ln(),
                (false, false) => v,
            })
            .collect()
    }

    fn to_external(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| match (lo.is_finite(), hi.is_finite()) {
                (true, true) => lo + (hi - lo) / (1.0 + (-v).exp()),
                (true, false) => lo + v.exp(),
                (false, true) => hi - v.exp(),
                (false, false) => v,
            })
            .collect()
    }

    /// Moves `p` strictly inside its bounds so the transform is finite.
    fn interior(&self, p: &[f64]) -> Result<Vec<f64>, FitError> {
        p.iter()
            .zip(&self.bounds)
            .zip(&self.names)
            .map(|((&v, &(lo, hi)), name)| {
                if !(v >= lo && v <= hi) {
                    return Err(FitError::InitialOutOfBounds {
                        name: name.clone(),
                        value: v,
                        lower: lo,
                        upper: hi,
                    });
                }
                let width = if lo.is_finite() && hi.is_finite() { hi - lo } else { v.abs().max(1.0) };
                let margin = 1e-6 * width;
                let mut w = v;
                if lo.is_finite() {
                    w = w.max(lo + margin);
                }
                if hi.is_finite() {
                    w = w.min(hi - margin);
                }
                Ok(w)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub initial_lambda: f64,
    pub lambda_factor: f64,
    /// Stop when an accepted step lowers the objective by less than this
    /// fraction.
    pub objective_tolerance: f64,
    /// Stop when the internal parameter step is shorter than this.
    pub step_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            initial_lambda: 1e-3,
            lambda_factor: 10.0,
            objective_tolerance: 1e-10,
            step_tolerance: 1e-12,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub parameters: Vec<f64>,
    /// One-sigma errors from the linearized covariance.
    pub std_errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Unweighted `1 - SS_res / SS_tot` of the model at the observed x.
    pub r_squared: f64,
    /// Final weighted objective.
    pub chi_squared: f64,
    pub reduced_chi_squared: f64,
    pub degrees_of_freedom: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after the start and after every accepted step.
    pub objective_trace: Vec<f64>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.parameters[i], self.std_errors[i]))
    }

    pub fn value(&self, name: &str) -> f64 {
        self.get(name).map(|v| v.0).unwrap_or(f64::NAN)
    }

    pub fn error(&self, name: &str) -> f64 {
        self.get(name).map(|v| v.1).unwrap_or(f64::NAN)
    }

    pub fn covariance_of(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.covariance[i][j])
    }
}

struct LmOutcome {
    params: Vec<f64>,
    objective: f64,
    converged: bool,
    iterations: usize,
    trace: Vec<f64>,
}

fn objective_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian<R>(residual: &R, p: &[f64], m: usize) -> Result<DMatrix<f64>, FitError>
where
    R: Fn(&[f64]) -> Result<Vec<f64>, FitError>,
{
    let mut columns = Vec::with_capacity(p.len());
    for j in 0..p.len() {
        let h = 1e-6 * p[j].abs().max(1e-3);
        let mut hi = p.to_vec();
        let mut lo = p.to_vec();
        hi[j] += h;
        lo[j] -= h;
        let (rh, rl) = (residual(&hi)?, residual(&lo)?);
        columns.push(DVector::from_iterator(m, rh.iter().zip(&rl).map(|(a, b)| (a - b) / (2.0 * h))));
    }
    Ok(DMatrix::from_columns(&columns))
}

/// Minimizes `Σ r_i(p)²` over external parameters with bounds handled by
/// the model's transform.
fn levenberg_marquardt<R>(model: &FitModel, residual: R, initial: &[f64], opts: &LmOptions) -> Result<LmOutcome, FitError>
where
    R: Fn(&[f64]) -> Result<Vec<f64>, FitError>,
{
    let internal = |u: &[f64]| residual(&model.to_external(u));
    let mut u = model.to_internal(&model.interior(initial)?);
    let mut r = internal(&u)?;
    let m = r.len();
    let mut s = objective_of(&r);
    if !s.is_finite() {
        return Err(FitError::NonFinite(initial.to_vec()));
    }
    let mut lambda = opts.initial_lambda;
    let mut trace = vec![s];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        if s == 0.0 {
            converged = true;
            break;
        }
        let j = jacobian(&internal, &u, m)?;
        let jt = j.transpose();
        let a = &jt * &j;
        // residuals are data - model in sign, J is d(residual)/du
        let g = -(&jt * DVector::from_column_slice(&r));
        let scale: Vec<f64> = (0..a.nrows()).map(|k| a[(k, k)].max(1e-300)).collect();
        let mut accepted = false;
        while lambda < 1e30 {
            let mut damped = a.clone();
            for k in 0..damped.nrows() {
                damped[(k, k)] += lambda * scale[k];
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&g),
                None => {
                    lambda *= opts.lambda_factor;
                    continue;
                }
            };
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let r_trial = internal(&trial)?;
            let s_trial = objective_of(&r_trial);
            if s_trial.is_finite() && s_trial < s {
                let decrease = (s - s_trial) / s;
                let step_norm = step.norm();
                u = trial;
                r = r_trial;
                s = s_trial;
                trace.push(s);
                lambda /= opts.lambda_factor;
                accepted = true;
                if decrease < opts.objective_tolerance || step_norm < opts.step_tolerance {
                    converged = true;
                }
                break;
            }
            lambda *= opts.lambda_factor;
        }
        if !accepted {
            // no downhill direction at machine precision: a stationary point
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Ok(LmOutcome {
        params: model.to_external(&u),
        objective: s,
        converged,
        iterations,
        trace,
    })
}

fn check_lengths(model: &FitModel, x: &[f64], y: &[f64], initial: &[f64]) -> Result<(), FitError> {
    if model.is_empty() {
        return Err(FitError::InvalidModel("model has no parameters".into()));
    }
    if x.len() != y.len() {
        return Err(FitError::DataLength(format!("{} x values, {} y values", x.len(), y.len())));
    }
    if initial.len() != model.len() {
        return Err(FitError::DataLength(format!(
            "{} initial values for {} parameters",
            initial.len(),
            model.len()
        )));
    }
    if x.len() <= model.len() {
        return Err(FitError::TooFewPoints {
            points: x.len(),
            params: model.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(FitError::DataLength("data contain non-finite values".into()));
    }
    Ok(())
}

fn check_sigma(name: &str, s: &[f64], n: usize) -> Result<(), FitError> {
    if s.len() != n {
        return Err(FitError::DataLength(format!("{} {name} values for {n} points", s.len())));
    }
    if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(FitError::InvalidSigma(name.into()));
    }
    Ok(())
}

fn r_squared(model: &FitModel, p: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(&xi, &yi)| (yi - model.eval(p, xi)).powi(2)).sum();
    if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    }
}

/// Covariance `(Jᵀ J)⁻¹ · χ²/dof` for whitened residual Jacobian `J`.
fn covariance(j: &DMatrix<f64>, reduced_chi2: f64, params: &[f64]) -> Result<DMatrix<f64>, FitError> {
    let a = j.transpose() * j;
    let sv = a.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-13 * smax) {
        return Err(FitError::SingularOptimum { parameters: params.to_vec(), condition: smax / smin });
    }
    let inv = a
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| FitError::Degenerate("normal equations are not positive definite".into()))?;
    Ok(inv * reduced_chi2)
}

fn assemble(
    model: &FitModel,
    outcome: LmOutcome,
    cov: DMatrix<f64>,
    x: &[f64],
    y: &[f64],
    dof: usize,
) -> FitResult {
    let n = model.len();
    let std_errors = (0..n).map(|k| cov[(k, k)].max(0.0).sqrt()).collect();
    let covariance = (0..n).map(|a| (0..n).map(|b| cov[(a, b)]).collect()).collect();
    FitResult {
        names: model.names.clone(),
        r_squared: r_squared(model, &outcome.params, x, y),
        parameters: outcome.params,
        std_errors,
        covariance,
        chi_squared: outcome.objective,
        reduced_chi_squared: outcome.objective / dof as f64,
        degrees_of_freedom: dof,
        converged: outcome.converged,
        iterations: outcome.iterations,
        objective_trace: outcome.trace,
    }
}

/// Weighted least squares `Σ ((y - f(x)) / σ_y)²`; unit weights when
/// `sigma_y` is `None`.
pub fn fit_least_squares(
    model: &FitModel,
    x: &[f64],
    y: &[f64],
    sigma_y: Option<&[f64]>,
    initial: &[f64],
    opts: &LmOptions,
) -> Result<FitResult, FitError> {
    check_lengths(model, x, y, initial)?;
    if let Some(s) = sigma_y {
        check_sigma("sigma_y", s, x.len())?;
    }
    let sigma = |i: usize| sigma_y.map_or(1.0, |s| s[i]);
    let residual = |p: &[f64]| -> Result<Vec<f64>, FitError> {
        let r: Vec<f64> = (0..x.len()).map(|i| (y[i] - model.eval(p, x[i])) / sigma(i)).collect();
        if r.iter().any(|v| !v.is_finite()) {
            return Err(FitError::NonFinite(p.to_vec()));
        }
        Ok(r)
    };
    let outcome = levenberg_marquardt(model, residual, initial, opts)?;
    let dof = x.len() - model.len();
    let j = jacobian(&residual, &outcome.params, x.len())?;
    let cov = covariance(&j, outcome.objective / dof as f64, &outcome.params)?;
    Ok(assemble(model, outcome, cov, x, y, dof))
}

/// Per-point latent shift `δ` minimizing
/// `((y - f(x + δ)) / σ_y)² + (δ / σ_x)²` for fixed parameters.
fn latent_shift(model: &FitModel, p: &[f64], x: f64, sx: f64, y: f64, sy: f64) -> f64 {
    let cost = |d: f64| ((y - model.eval(p, x + d)) / sy).powi(2) + (d / sx).powi(2);
    let mut d = 0.0;
    let mut c = cost(d);
    for _ in 0..100 {
        let xi = x + d;
        let h = 1e-6 * xi.abs().max(sx).max(1e-9);
        let slope = (model.eval(p, xi + h) - model.eval(p, xi - h)) / (2.0 * h);
        let r1 = (y - model.eval(p, xi)) / sy;
        let j1 = -slope / sy;
        let (r2, j2) = (d / sx, 1.0 / sx);
        let mut step = -(j1 * r1 + j2 * r2) / (j1 * j1 + j2 * j2);
        let mut accepted = false;
        for _ in 0..40 {
            let trial = cost(d + step);
            if trial <= c {
                d += step;
                c = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || step.abs() <= 1e-15 * (x.abs() + sx) {
            break;
        }
    }
    d
}

/// Orthogonal distance regression with per-point latent x adjustments.
///
/// The objective is `Σ [((y - f(x + δ)) / σ_y)² + (δ / σ_x)²]`. Each
/// evaluation of the parameter residuals first minimizes every `δ_i` for
/// the current parameters; Levenberg–Marquardt then steps the parameters.
pub fn fit_odr(
    model: &FitModel,
    x: &[f64],
    sigma_x: &[f64],
    y: &[f64],
    sigma_y: &[f64],
    initial: &[f64],
    opts: &LmOptions,
) -> Result<FitResult, FitError> {
    check_lengths(model, x, y, initial)?;
    check_sigma("sigma_x", sigma_x, x.len())?;
    check_sigma("sigma_y", sigma_y, x.len())?;
    let n = x.len();
    let residual = |p: &[f64]| -> Result<Vec<f64>, FitError> {
        let mut r = Vec::with_capacity(2 * n);
        for i in 0..n {
            let d = latent_shift(model, p, x[i], sigma_x[i], y[i], sigma_y[i]);
            r.push((y[i] - model.eval(p, x[i] + d)) / sigma_y[i]);
            r.push(d / sigma_x[i]);
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(FitError::NonFinite(p.to_vec()));
        }
        Ok(r)
    };
    let outcome = levenberg_marquardt(model, residual, initial, opts)?;
    let dof = n - model.len();
    // linearized covariance with effective weights 1 / (σ_y² + f'² σ_x²)
    let p = &outcome.params;
    let adjusted: Vec<f64> = (0..n)
        .map(|i| x[i] + latent_shift(model, p, x[i], sigma_x[i], y[i], sigma_y[i]))
        .collect();
    let effective: Vec<f64> = (0..n)
        .map(|i| {
            let xi = adjusted[i];
            let h = 1e-6 * xi.abs().max(sigma_x[i]).max(1e-9);
            let slope = (model.eval(p, xi + h) - model.eval(p, xi - h)) / (2.0 * h);
            (sigma_y[i].powi(2) + slope * slope * sigma_x[i].powi(2)).sqrt()
        })
        .collect();
    let whitened = |q: &[f64]| -> Result<Vec<f64>, FitError> {
        Ok((0..n).map(|i| model.eval(q, adjusted[i]) / effective[i]).collect())
    };
    let j = jacobian(&whitened, p, n)?;
    let cov = covariance(&j, outcome.objective / dof as f64, &outcome.params)?;
    Ok(assemble(model, outcome, cov, x, y, dof))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn line() -> FitModel {
        FitModel::new(&["slope", "intercept"], |p, x| p[0] * x + p[1])
    }

    fn double_gaussian() -> FitModel {
        FitModel::new(&["a1", "c1", "s1", "a2", "c2", "s2", "offset"], |p, x| {
            p[0] * (-0.5 * ((x - p[1]) / p[2]).powi(2)).exp()
                + p[3] * (-0.5 * ((x - p[4]) / p[5]).powi(2)).exp()
                + p[6]
        })
    }

    #[test]
    fn zero_noise_recovery() {
        let model = double_gaussian();
        let truth = [100.0, -1.0, 0.3, 60.0, 1.2, 0.4, 5.0];
        let x: Vec<f64> = (0..200).map(|i| -3.0 + 6.0 * i as f64 / 199.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| model.eval(&truth, v)).collect();
        let fit = fit_least_squares(&model, &x, &y, None, &[90.0, -0.9, 0.35, 50.0, 1.1, 0.5, 3.0], &LmOptions::default()).unwrap();
        assert!(fit.converged);
        for (a, b) in fit.parameters.iter().zip(truth) {
            assert!((a - b).abs() < 1e-8, "{a} {b}");
        }
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn line_matches_closed_form_ols() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.5];
        let y = [1.1, 2.9, 5.2, 7.1, 8.8, 11.3, 14.0];
        let n = x.len() as f64;
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        let fit = fit_least_squares(&line(), &x, &y, None, &[0.0, 0.0], &LmOptions::default()).unwrap();
        assert_relative_eq!(fit.parameters[0], slope, max_relative = 1e-10);
        assert_relative_eq!(fit.parameters[1], intercept, max_relative = 1e-10);
        // textbook standard error of the slope
        let resid: f64 = x.iter().zip(&y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
        let se = (resid / (n - 2.0) / (sxx - sx * sx / n)).sqrt();
        assert_relative_eq!(fit.std_errors[0], se, max_relative = 1e-6);
    }

    #[test]
    fn objective_never_increases() {
        let model = double_gaussian();
        let truth = [100.0, -1.0, 0.3, 60.0, 1.2, 0.4, 5.0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 2.0).unwrap();
        let x: Vec<f64> = (0..150).map(|i| -3.0 + 6.0 * i as f64 / 149.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| model.eval(&truth, v) + noise.sample(&mut rng)).collect();
        let fit = fit_least_squares(&model, &x, &y, None, &[70.0, -0.5, 0.6, 80.0, 0.8, 0.2, 0.0], &LmOptions::default()).unwrap();
        assert!(fit.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(fit.objective_trace.len() > 2);
    }

    #[test]
    fn scale_equivariance_on_line() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [0.3, 2.2, 3.7, 6.4, 8.1, 9.6];
        let s = [0.5; 6];
        let a = fit_least_squares(&line(), &x, &y, Some(&s), &[1.0, 0.0], &LmOptions::default()).unwrap();
        let c = 7.5;
        let yc: Vec<f64> = y.iter().map(|v| v * c).collect();
        let sc: Vec<f64> = s.iter().map(|v| v * c).collect();
        let b = fit_least_squares(&line(), &x, &yc, Some(&sc), &[1.0, 0.0], &LmOptions::default()).unwrap();
        assert_relative_eq!(b.parameters[0], c * a.parameters[0], max_relative = 1e-7);
        assert_relative_eq!(b.parameters[1], c * a.parameters[1], max_relative = 1e-7);
        assert!((a.r_squared - b.r_squared).abs() < 1e-10);
    }

    #[test]
    fn bitwise_reproducible() {
        let model = double_gaussian();
        let x: Vec<f64> = (0..80).map(|i| -3.0 + 6.0 * i as f64 / 79.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| model.eval(&[10.0, -1.0, 0.5, 7.0, 1.0, 0.4, 1.0], v) + (v * 13.0).sin() * 0.2).collect();
        let p0 = [8.0, -0.8, 0.4, 6.0, 0.9, 0.5, 0.5];
        let a = fit_least_squares(&model, &x, &y, None, &p0, &LmOptions::default()).unwrap();
        let b = fit_least_squares(&model, &x, &y, None, &p0, &LmOptions::default()).unwrap();
        assert_eq!(a, b);
        for (p, q) in a.parameters.iter().zip(&b.parameters) {
            assert_eq!(p.to_bits(), q.to_bits());
        }
    }

    #[test]
    fn bounds_are_honoured() {
        let model = line().with_bounds("slope", 0.0, 1.5).unwrap();
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 2.0, 4.0, 6.0];
        let fit = fit_least_squares(&model, &x, &y, None, &[1.0, 0.0], &LmOptions::default()).unwrap();
        assert!(fit.parameters[0] <= 1.5 && fit.parameters[0] > 1.49);
        assert!(matches!(
            fit_least_squares(&model, &x, &y, None, &[2.0, 0.0], &LmOptions::default()),
            Err(FitError::InitialOutOfBounds { .. })
        ));
    }

    #[test]
    fn rejects_bad_input() {
        let m = line();
        let o = LmOptions::default();
        assert!(matches!(fit_least_squares(&m, &[1.0, 2.0], &[1.0, 2.0], None, &[0.0, 0.0], &o), Err(FitError::TooFewPoints { .. })));
        assert!(fit_least_squares(&m, &[1.0, 2.0, 3.0], &[1.0, 2.0], None, &[0.0, 0.0], &o).is_err());
        assert!(fit_least_squares(&m, &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], Some(&[1.0, 0.0, 1.0]), &[0.0, 0.0], &o).is_err());
        // constant model in x: slope undetermined
        let flat = FitModel::new(&["a", "b"], |p, _| p[0] + p[1]);
        assert!(matches!(fit_least_squares(&flat, &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], None, &[0.0, 0.0], &o), Err(FitError::SingularOptimum { .. })));
    }

    #[test]
    fn iteration_cap_reports_unconverged() {
        let model = double_gaussian();
        let x: Vec<f64> = (0..100).map(|i| -3.0 + 6.0 * i as f64 / 99.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| model.eval(&[10.0, -1.0, 0.5, 7.0, 1.0, 0.4, 1.0], v) + (v * 7.0).cos()).collect();
        let opts = LmOptions { max_iterations: 2, ..Default::default() };
        let fit = fit_least_squares(&model, &x, &y, None, &[5.0, 0.0, 1.0, 5.0, 0.5, 1.0, 0.0], &opts).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 2);
    }

    /// Deming regression slope for error-variance ratio δ = σ_y²/σ_x².
    fn deming(x: &[f64], y: &[f64], delta: f64) -> (f64, f64) {
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n;
        let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
        let slope = (syy - delta * sxx + ((syy - delta * sxx).powi(2) + 4.0 * delta * sxy * sxy).sqrt()) / (2.0 * sxy);
        (slope, my - slope * mx)
    }

    #[test]
    fn odr_line_matches_deming() {
        let x = [0.0, 1.1, 1.9, 3.2, 3.9, 5.1, 6.0, 7.2];
        let y = [0.4, 1.6, 2.1, 3.9, 3.8, 5.6, 5.9, 7.7];
        let s = [0.3; 8];
        let fit = fit_odr(&line(), &x, &s, &y, &s, &[1.0, 0.0], &LmOptions::default()).unwrap();
        let (slope, intercept) = deming(&x, &y, 1.0);
        assert_relative_eq!(fit.parameters[0], slope, max_relative = 1e-8);
        assert_relative_eq!(fit.parameters[1], intercept, max_relative = 1e-8, epsilon = 1e-10);
        let sx = [0.1; 8];
        let fit = fit_odr(&line(), &x, &sx, &y, &s, &[1.0, 0.0], &LmOptions::default()).unwrap();
        let (slope, _) = deming(&x, &y, 9.0);
        assert_relative_eq!(fit.parameters[0], slope, max_relative = 1e-8);
    }

    #[test]
    fn odr_reduces_to_least_squares() {
        let model = FitModel::new(&["i_sat", "p_exc", "b"], |p, x| p[0] * x / (x + p[1]) + p[2] * x);
        let x: Vec<f64> = (1..=20).map(|i| i as f64 * 50.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| model.eval(&[120.0, 300.0, 0.01], v) + (v * 0.37).sin()).collect();
        let sy = vec![1.0; x.len()];
        let sx = vec![1e-12; x.len()];
        let ls = fit_least_squares(&model, &x, &y, Some(&sy), &[100.0, 200.0, 0.0], &LmOptions::default()).unwrap();
        let odr = fit_odr(&model, &x, &sx, &y, &sy, &[100.0, 200.0, 0.0], &LmOptions::default()).unwrap();
        for (a, b) in ls.parameters.iter().zip(&odr.parameters) {
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{a} {b}");
        }
        for (a, b) in ls.std_errors.iter().zip(&odr.std_errors) {
            assert_relative_eq!(a, b, max_relative = 1e-4);
        }
    }
}
