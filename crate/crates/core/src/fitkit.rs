//! Fitting engine shared by every calibration routine: weighted linear
//! regression and damped nonlinear least squares with central-difference
//! Jacobians.
//!
//! Covariances follow the absolute-sigma convention when `sigma_y` is present
//! (`(JᵀWJ)⁻¹`), and are rescaled by the reduced χ² when it is absent.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A generic `(x, y, σ_y)` dataset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepRecord {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl SweepRecord {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let rec = SweepRecord { x, y, sigma_y: None, meta: BTreeMap::new() };
        rec.validate()?;
        Ok(rec)
    }

    pub fn with_sigma(x: Vec<f64>, y: Vec<f64>, sigma_y: Vec<f64>) -> Result<Self> {
        let rec = SweepRecord { x, y, sigma_y: Some(sigma_y), meta: BTreeMap::new() };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(Error::config(format!(
                "sweep has {} x values but {} y values",
                self.x.len(),
                self.y.len()
            )));
        }
        if let Some(s) = &self.sigma_y {
            if s.len() != self.x.len() {
                return Err(Error::config("sigma_y length differs from x"));
            }
            if let Some(bad) = s.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::Fit(format!("sigma_y must be positive, found {bad}")));
            }
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(Error::config("sweep contains non-finite values"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Inverse-variance weights, or unit weights without σ.
    pub fn weights(&self) -> Vec<f64> {
        match &self.sigma_y {
            Some(s) => s.iter().map(|s| 1.0 / (s * s)).collect(),
            None => vec![1.0; self.x.len()],
        }
    }

    pub fn has_sigma(&self) -> bool {
        self.sigma_y.is_some()
    }

    /// Returns a copy with the points permuted by `order`.
    pub fn permuted(&self, order: &[usize]) -> SweepRecord {
        SweepRecord {
            x: order.iter().map(|&i| self.x[i]).collect(),
            y: order.iter().map(|&i| self.y[i]).collect(),
            sigma_y: self.sigma_y.as_ref().map(|s| order.iter().map(|&i| s[i]).collect()),
            meta: self.meta.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// Row-major, symmetric.
    pub covariance: Vec<Vec<f64>>,
    pub reduced_chi2: f64,
    pub chi2: f64,
    pub n_iterations: usize,
    pub converged: bool,
    /// 2-norm condition number of the weighted normal matrix.
    pub condition_number: f64,
}

impl FitResult {
    /// 1σ uncertainty of parameter `i`.
    pub fn sigma(&self, i: usize) -> f64 {
        self.covariance[i][i].max(0.0).sqrt()
    }
}

fn covariance_from_normal(normal: &DMatrix<f64>, scale: f64) -> Result<(Vec<Vec<f64>>, f64)> {
    let n = normal.nrows();
    let inv = normal
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| normal.clone().try_inverse())
        .ok_or_else(|| Error::Rank("normal matrix is singular".into()))?;
    let cov = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (inv[(i, j)] + inv[(j, i)]) * scale).collect())
        .collect();
    let sv = normal.clone().singular_values();
    let (max, min) = sv.iter().fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    Ok((cov, cond))
}

/// Weighted straight-line fit `y = slope·x + intercept`.
///
/// With `fixed_slope` only the intercept is estimated; the returned params are
/// still `[slope, intercept]` and the slope row of the covariance is zero.
pub fn linear_fit(data: &SweepRecord, fixed_slope: Option<f64>) -> Result<FitResult> {
    data.validate()?;
    let n = data.len();
    let w = data.weights();
    let sw: f64 = w.iter().sum();

    match fixed_slope {
        Some(slope) => {
            if n < 1 {
                return Err(Error::Rank("fixed-slope fit needs at least one point".into()));
            }
            let intercept =
                data.x.iter().zip(&data.y).zip(&w).map(|((x, y), w)| w * (y - slope * x)).sum::<f64>() / sw;
            let chi2: f64 = data
                .x
                .iter()
                .zip(&data.y)
                .zip(&w)
                .map(|((x, y), w)| w * (y - slope * x - intercept).powi(2))
                .sum();
            let dof = n.saturating_sub(1);
            let reduced = if dof > 0 { chi2 / dof as f64 } else { 0.0 };
            let scale = if data.has_sigma() { 1.0 } else { reduced };
            Ok(FitResult {
                params: vec![slope, intercept],
                covariance: vec![vec![0.0, 0.0], vec![0.0, scale / sw]],
                reduced_chi2: reduced,
                chi2,
                n_iterations: 1,
                converged: true,
                condition_number: 1.0,
            })
        }
        None => {
            if n < 2 {
                return Err(Error::Rank("straight-line fit needs at least two points".into()));
            }
            let xm = data.x.iter().zip(&w).map(|(x, w)| w * x).sum::<f64>() / sw;
            let ym = data.y.iter().zip(&w).map(|(y, w)| w * y).sum::<f64>() / sw;
            let sxx: f64 = data.x.iter().zip(&w).map(|(x, w)| w * (x - xm).powi(2)).sum();
            let sxy: f64 =
                data.x.iter().zip(&data.y).zip(&w).map(|((x, y), w)| w * (x - xm) * (y - ym)).sum();
            let x_scale = data.x.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
            if sxx <= 1e-24 * sw * x_scale * x_scale {
                return Err(Error::Rank("all x values are equal".into()));
            }
            let slope = sxy / sxx;
            let intercept = ym - slope * xm;
            let chi2: f64 = data
                .x
                .iter()
                .zip(&data.y)
                .zip(&w)
                .map(|((x, y), w)| w * (y - slope * x - intercept).powi(2))
                .sum();
            let dof = n - 2;
            let reduced = if dof > 0 { chi2 / dof as f64 } else { 0.0 };
            let scale = if data.has_sigma() { 1.0 } else { reduced };
            let swx: f64 = data.x.iter().zip(&w).map(|(x, w)| w * x).sum();
            let swxx: f64 = data.x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
            let normal = DMatrix::from_row_slice(2, 2, &[swxx, swx, swx, sw]);
            let (_, cond) = covariance_from_normal(&normal, 1.0)?;
            let var_slope = scale / sxx;
            let var_intercept = scale * (1.0 / sw + xm * xm / sxx);
            let cov_si = -scale * xm / sxx;
            Ok(FitResult {
                params: vec![slope, intercept],
                covariance: vec![vec![var_slope, cov_si], vec![cov_si, var_intercept]],
                reduced_chi2: reduced,
                chi2,
                n_iterations: 1,
                converged: true,
                condition_number: cond,
            })
        }
    }
}

/// Weighted fit of `y = c·x` through the origin; params `[c]`.
pub fn proportional_fit(data: &SweepRecord) -> Result<FitResult> {
    data.validate()?;
    let w = data.weights();
    let sxx: f64 = data.x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
    if !(sxx > 0.0) {
        return Err(Error::Rank("proportional fit needs a nonzero x".into()));
    }
    let sxy: f64 = data.x.iter().zip(&data.y).zip(&w).map(|((x, y), w)| w * x * y).sum();
    let c = sxy / sxx;
    let chi2: f64 = data.x.iter().zip(&data.y).zip(&w).map(|((x, y), w)| w * (y - c * x).powi(2)).sum();
    let dof = data.len().saturating_sub(1);
    let reduced = if dof > 0 { chi2 / dof as f64 } else { 0.0 };
    let scale = if data.has_sigma() { 1.0 } else { reduced };
    Ok(FitResult {
        params: vec![c],
        covariance: vec![vec![scale / sxx]],
        reduced_chi2: reduced,
        chi2,
        n_iterations: 1,
        converged: true,
        condition_number: 1.0,
    })
}

/// Damping and stopping rules for [`nlls_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub max_iterations: usize,
    pub initial_lambda: f64,
    /// λ multiplier on a rejected step.
    pub lambda_up: f64,
    /// λ divisor on an accepted step.
    pub lambda_down: f64,
    /// Stop when the relative cost decrease falls below this.
    pub cost_tolerance: f64,
    /// Stop when ‖δ‖ / (‖p‖ + ε) falls below this.
    pub step_tolerance: f64,
    /// Relative central-difference step.
    pub jacobian_step: f64,
    /// Floor on the absolute difference step.
    pub min_abs_step: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            max_iterations: 200,
            initial_lambda: 1e-3,
            lambda_up: 10.0,
            lambda_down: 10.0,
            cost_tolerance: 1e-12,
            step_tolerance: 1e-12,
            jacobian_step: 1e-6,
            min_abs_step: 1e-9,
        }
    }
}

/// Inclusive box bounds per parameter.
pub type Bounds = [(f64, f64)];

fn project(p: &mut [f64], bounds: Option<&Bounds>) {
    if let Some(b) = bounds {
        for (v, (lo, hi)) in p.iter_mut().zip(b) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

fn weighted_residuals<F>(model: &F, data: &SweepRecord, sqrt_w: &[f64], p: &[f64]) -> Option<DVector<f64>>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let r = DVector::from_iterator(
        data.len(),
        data.x.iter().zip(&data.y).zip(sqrt_w).map(|((x, y), sw)| (y - model(*x, p)) * sw),
    );
    r.iter().all(|v| v.is_finite()).then_some(r)
}

/// Central-difference Jacobian of the model (unweighted), one row per point.
pub fn numeric_jacobian<F>(model: &F, xs: &[f64], p: &[f64], config: &LmConfig) -> DMatrix<f64>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let mut jac = DMatrix::zeros(xs.len(), p.len());
    let mut work = p.to_vec();
    for j in 0..p.len() {
        let h = (config.jacobian_step * p[j].abs()).max(config.min_abs_step);
        work[j] = p[j] + h;
        let plus: Vec<f64> = xs.iter().map(|x| model(*x, &work)).collect();
        work[j] = p[j] - h;
        let minus: Vec<f64> = xs.iter().map(|x| model(*x, &work)).collect();
        work[j] = p[j];
        for i in 0..xs.len() {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

/// Damped least squares (Levenberg-Marquardt) with numeric Jacobian.
///
/// `model(x, p)` must be reentrant. A model returning a non-finite value at a
/// trial point makes that step rejected. Parameters are projected onto
/// `bounds` after every step.
pub fn nlls_fit<F>(model: F, data: &SweepRecord, p0: &[f64], bounds: Option<&Bounds>) -> Result<FitResult>
where
    F: Fn(f64, &[f64]) -> f64,
{
    nlls_fit_with(model, data, p0, bounds, &LmConfig::default())
}

pub fn nlls_fit_with<F>(
    model: F,
    data: &SweepRecord,
    p0: &[f64],
    bounds: Option<&Bounds>,
    config: &LmConfig,
) -> Result<FitResult>
where
    F: Fn(f64, &[f64]) -> f64,
{
    data.validate()?;
    let m = p0.len();
    if m == 0 {
        return Err(Error::Fit("no parameters to fit".into()));
    }
    if data.len() < m {
        return Err(Error::Rank(format!("{} points cannot determine {} parameters", data.len(), m)));
    }
    if let Some(b) = bounds {
        if b.len() != m || b.iter().any(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::config("inconsistent parameter bounds"));
        }
    }
    let sqrt_w: Vec<f64> = data.weights().iter().map(|w| w.sqrt()).collect();
    let mut p = p0.to_vec();
    project(&mut p, bounds);
    let mut r = weighted_residuals(&model, data, &sqrt_w, &p)
        .ok_or_else(|| Error::Fit("model is not finite at the starting point".into()))?;
    let mut cost = r.norm_squared();
    let mut lambda = config.initial_lambda;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let mut jac = numeric_jacobian(&model, &data.x, &p, config);
        for (i, sw) in sqrt_w.iter().enumerate() {
            jac.row_mut(i).scale_mut(*sw);
        }
        let jt = jac.transpose();
        let normal = &jt * &jac;
        let grad = &jt * &r;
        let diag_floor = normal.diagonal().max() * 1e-15 + f64::MIN_POSITIVE;

        let mut accepted = false;
        loop {
            let mut damped = normal.clone();
            for k in 0..m {
                damped[(k, k)] += lambda * normal[(k, k)].max(diag_floor);
            }
            let step = damped.cholesky().map(|c| c.solve(&grad));
            if let Some(step) = step {
                let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                project(&mut trial, bounds);
                if let Some(r_new) = weighted_residuals(&model, data, &sqrt_w, &trial) {
                    let cost_new = r_new.norm_squared();
                    if cost_new <= cost {
                        let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let dp_norm =
                            p.iter().zip(&trial).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                        let rel_cost = (cost - cost_new) / cost.max(f64::MIN_POSITIVE);
                        p = trial;
                        r = r_new;
                        cost = cost_new;
                        lambda = (lambda / config.lambda_down).max(1e-15);
                        accepted = true;
                        if rel_cost < config.cost_tolerance || dp_norm < config.step_tolerance * (p_norm + 1e-300) {
                            converged = true;
                        }
                        break;
                    }
                }
            }
            lambda *= config.lambda_up;
            if lambda > 1e16 {
                break;
            }
        }
        if !accepted {
            // No descent direction left at any damping: stationary point.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let mut jac = numeric_jacobian(&model, &data.x, &p, config);
    for (i, sw) in sqrt_w.iter().enumerate() {
        jac.row_mut(i).scale_mut(*sw);
    }
    let normal = jac.transpose() * &jac;
    let dof = data.len() - m;
    let reduced = if dof > 0 { cost / dof as f64 } else { 0.0 };
    let scale = if data.has_sigma() { 1.0 } else { reduced };
    let (covariance, condition_number) = covariance_from_normal(&normal, scale)?;
    Ok(FitResult {
        params: p,
        covariance,
        reduced_chi2: reduced,
        chi2: cost,
        n_iterations: iterations,
        converged,
        condition_number,
    })
}

const HALTON_BASES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical-inverse Halton point `index` (1-based) in dimension `dim`.
pub fn halton(index: u64, dim: usize) -> f64 {
    let base = HALTON_BASES[dim % HALTON_BASES.len()] as u64;
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Best of `n_starts` fits started from a Halton sequence inside `bounds`.
/// Candidates run in parallel; ties break on start index so the result is
/// deterministic.
pub fn nlls_multistart<F>(model: F, data: &SweepRecord, bounds: &Bounds, n_starts: usize) -> Result<FitResult>
where
    F: Fn(f64, &[f64]) -> f64 + Sync,
{
    let starts: Vec<Vec<f64>> = (1..=n_starts as u64)
        .map(|k| bounds.iter().enumerate().map(|(d, (lo, hi))| lo + (hi - lo) * halton(k, d)).collect())
        .collect();
    let fits: Vec<(usize, Result<FitResult>)> =
        starts.par_iter().enumerate().map(|(i, p0)| (i, nlls_fit(&model, data, p0, Some(bounds)))).collect();
    let mut best: Option<(usize, FitResult)> = None;
    let mut last_err = None;
    for (i, fit) in fits {
        match fit {
            Ok(f) => {
                let better = match &best {
                    None => true,
                    Some((_, b)) => (f.converged && !b.converged) || (f.converged == b.converged && f.chi2 < b.chi2),
                };
                if better {
                    best = Some((i, f));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.map(|(_, f)| f).ok_or_else(|| last_err.unwrap_or_else(|| Error::Fit("no starting points".into())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 2.0 * x + 3.0).collect();
        let fit = linear_fit(&SweepRecord::new(x, y).unwrap(), None).unwrap();
        assert_relative_eq!(fit.params[0], 2.0, max_relative = 1e-14);
        assert_relative_eq!(fit.params[1], 3.0, max_relative = 1e-14);
        assert!(fit.reduced_chi2 < 1e-25);
    }

    #[test]
    fn fixed_slope_intercept() {
        let x = vec![0.1, 0.7, 1.3, 2.2];
        let y: Vec<f64> = x.iter().map(|x| x + 0.3015).collect();
        let fit = linear_fit(&SweepRecord::new(x, y).unwrap(), Some(1.0)).unwrap();
        assert!((fit.params[1] - 0.3015).abs() < 1e-15);
        assert_eq!(fit.params[0], 1.0);
    }

    #[test]
    fn heteroscedastic_intercept_sigma() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let s = vec![0.1, 0.2, 0.05, 0.4];
        let y: Vec<f64> = x.iter().map(|x| x + 1.0).collect();
        let fit = linear_fit(&SweepRecord::with_sigma(x, y, s.clone()).unwrap(), Some(1.0)).unwrap();
        let sum_w: f64 = s.iter().map(|s| 1.0 / (s * s)).sum();
        assert_relative_eq!(fit.sigma(1), 1.0 / sum_w.sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn free_slope_covariance_matches_textbook() {
        let x = vec![0.0, 1.0, 2.0, 5.0];
        let s = vec![0.1, 0.3, 0.2, 0.5];
        let y = vec![1.1, 1.9, 3.2, 5.8];
        let fit = linear_fit(&SweepRecord::with_sigma(x.clone(), y, s.clone()).unwrap(), None).unwrap();
        let w: Vec<f64> = s.iter().map(|s| 1.0 / (s * s)).collect();
        let sw: f64 = w.iter().sum();
        let sx: f64 = x.iter().zip(&w).map(|(x, w)| x * w).sum();
        let sxx: f64 = x.iter().zip(&w).map(|(x, w)| x * x * w).sum();
        let det = sw * sxx - sx * sx;
        assert_relative_eq!(fit.covariance[0][0], sw / det, max_relative = 1e-10);
        assert_relative_eq!(fit.covariance[1][1], sxx / det, max_relative = 1e-10);
        assert_relative_eq!(fit.covariance[0][1], -sx / det, max_relative = 1e-10);
    }

    #[test]
    fn degenerate_x_is_rank_error() {
        let rec = SweepRecord::new(vec![1.0; 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(matches!(linear_fit(&rec, None), Err(Error::Rank(_))));
        let rec = SweepRecord::new(vec![1.0], vec![1.0]).unwrap();
        assert!(matches!(linear_fit(&rec, None), Err(Error::Rank(_))));
        assert!(linear_fit(&rec, Some(1.0)).is_ok());
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(SweepRecord::with_sigma(vec![1.0], vec![1.0], vec![-1.0]).is_err());
        assert!(SweepRecord::new(vec![1.0, 2.0], vec![1.0]).is_err());
    }

    fn lorentzian(x: f64, p: &[f64]) -> f64 {
        let (amp, f0, width) = (p[0], p[1], p[2]);
        amp / (1.0 + (2.0 * (x - f0) / width).powi(2)).sqrt()
    }

    #[test]
    fn lorentzian_plant_recovered() {
        let truth = [3.2, 5.6735, 0.0198];
        let x: Vec<f64> = (0..201).map(|i| 5.6 + 0.15 * i as f64 / 200.0).collect();
        let y: Vec<f64> = x.iter().map(|x| lorentzian(*x, &truth)).collect();
        let rec = SweepRecord::new(x, y).unwrap();
        let fit = nlls_fit(lorentzian, &rec, &[2.5, 5.67, 0.03], None).unwrap();
        assert!(fit.converged);
        for (p, t) in fit.params.iter().zip(truth) {
            assert!(((p - t) / t).abs() < 1e-9, "{p} vs {t}");
        }
    }

    #[test]
    fn numeric_jacobian_on_quadratic() {
        let model = |x: f64, p: &[f64]| p[0] * x * x + p[1] * x + p[2];
        let xs = [-2.0, -0.5, 0.3, 1.7, 4.0];
        let p = [1.3, -0.7, 2.0];
        let jac = numeric_jacobian(&model, &xs, &p, &LmConfig::default());
        for (i, x) in xs.iter().enumerate() {
            let analytic = [x * x, *x, 1.0];
            for j in 0..3 {
                assert!((jac[(i, j)] - analytic[j]).abs() <= 1e-6 * analytic[j].abs().max(1.0));
            }
        }
    }

    #[test]
    fn linear_and_nonlinear_agree() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.37).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, x)| 1.5 * x - 0.8 + 0.01 * ((i * 7 % 5) as f64 - 2.0)).collect();
        let s: Vec<f64> = (0..10).map(|i| 0.01 + 0.002 * i as f64).collect();
        let rec = SweepRecord::with_sigma(x, y, s).unwrap();
        let lin = linear_fit(&rec, None).unwrap();
        let nl = nlls_fit(|x, p| p[0] * x + p[1], &rec, &[1.0, 0.0], None).unwrap();
        for k in 0..2 {
            assert!(((lin.params[k] - nl.params[k]) / lin.params[k]).abs() < 1e-9);
            assert!(((lin.covariance[k][k] - nl.covariance[k][k]) / lin.covariance[k][k]).abs() < 1e-6);
        }
    }

    #[test]
    fn sigma_rescaling_scales_covariance() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, x)| (1.7 * x).exp() * 0.5 + 0.02 * ((i % 3) as f64 - 1.0)).collect();
        let s = vec![0.05; 30];
        let model = |x: f64, p: &[f64]| p[0] * (p[1] * x).exp();
        let a = nlls_fit(model, &SweepRecord::with_sigma(x.clone(), y.clone(), s.clone()).unwrap(), &[1.0, 1.0], None).unwrap();
        let s3: Vec<f64> = s.iter().map(|v| v * 3.0).collect();
        let b = nlls_fit(model, &SweepRecord::with_sigma(x, y, s3).unwrap(), &[1.0, 1.0], None).unwrap();
        for k in 0..2 {
            assert!(((a.params[k] - b.params[k]) / a.params[k]).abs() < 1e-9);
            assert!((b.covariance[k][k] / a.covariance[k][k] - 9.0).abs() < 1e-6);
        }
    }

    #[test]
    fn bounds_are_respected() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 3.0 * x).collect();
        let rec = SweepRecord::new(x, y).unwrap();
        let fit = nlls_fit(|x, p| p[0] * x, &rec, &[0.5], Some(&[(0.0, 2.0)])).unwrap();
        assert!(fit.params[0] <= 2.0);
        assert!((fit.params[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points_is_rank_error() {
        let rec = SweepRecord::new(vec![1.0], vec![2.0]).unwrap();
        assert!(matches!(nlls_fit(|x, p| p[0] * x + p[1], &rec, &[1.0, 1.0], None), Err(Error::Rank(_))));
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.2).collect();
        let y: Vec<f64> = x.iter().map(|x| (2.3 * x).sin() * 1.5).collect();
        let rec = SweepRecord::new(x, y).unwrap();
        let cfg = LmConfig { max_iterations: 1, ..LmConfig::default() };
        let fit = nlls_fit_with(|x, p| p[0] * (p[1] * x).sin(), &rec, &[1.0, 2.0], None, &cfg).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.n_iterations, 1);
    }

    #[test]
    fn multistart_escapes_local_minimum() {
        let x: Vec<f64> = (0..80).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|x| (2.3 * x).sin()).collect();
        let rec = SweepRecord::new(x, y).unwrap();
        let fit = nlls_multistart(|x, p| p[0] * (p[1] * x).sin(), &rec, &[(0.5, 2.0), (0.5, 4.0)], 8).unwrap();
        assert!((fit.params[1] - 2.3).abs() < 1e-8);
        assert!((fit.params[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn halton_first_points() {
        assert_eq!(halton(1, 0), 0.5);
        assert_eq!(halton(2, 0), 0.25);
        assert!((halton(1, 1) - 1.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn nlls_invariant_under_reordering(seed in 0u64..1000) {
            let n = 25;
            let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.2).collect();
            let y: Vec<f64> = x.iter().enumerate()
                .map(|(i, x)| 2.0 * (-0.4 * x).exp() + 0.01 * (((i as u64 * 31 + seed) % 7) as f64 - 3.0))
                .collect();
            let rec = SweepRecord::new(x, y).unwrap();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by_key(|&i| (i as u64 * 2654435761 + seed) % 97);
            let model = |x: f64, p: &[f64]| p[0] * (p[1] * x).exp();
            let a = nlls_fit(model, &rec, &[1.0, -1.0], None).unwrap();
            let b = nlls_fit(model, &rec.permuted(&order), &[1.0, -1.0], None).unwrap();
            for k in 0..2 {
                prop_assert!((a.params[k] - b.params[k]).abs() < 1e-5 * a.sigma(k));
            }
        }

        #[test]
        fn covariance_is_psd(seed in 0u64..1000) {
            let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
            let y: Vec<f64> = x.iter().map(|x| 0.3 * x * x - x + ((seed as f64 + x).sin())).collect();
            let rec = SweepRecord::new(x, y).unwrap();
            let fit = nlls_fit(|x, p| p[0] * x * x + p[1] * x + p[2], &rec, &[0.0, 0.0, 0.0], None).unwrap();
            let c = &fit.covariance;
            prop_assert!(fit.reduced_chi2 >= 0.0);
            for i in 0..3 {
                prop_assert!(c[i][i] >= 0.0);
                for j in 0..3 {
                    prop_assert!((c[i][j] - c[j][i]).abs() <= 1e-12 * (c[i][i] * c[j][j]).sqrt());
                    prop_assert!(c[i][j] * c[i][j] <= c[i][i] * c[j][j] * (1.0 + 1e-9));
                }
            }
        }
    }
}
