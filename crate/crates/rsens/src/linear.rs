//! Closed-form Bayesian linear regression and Laplace-approximated
//! probit-link logistic regression, with their closed-form sensitivity
//! expressions.

use crate::error::{Error, Result};
use crate::predictive::PredictiveDistribution;
use crate::sensitivity::ParamSensitivity;
use crate::special::{normal_cdf, normal_pdf};
use nalgebra::{DMatrix, DVector};

/// Linear regression under an improper uniform prior. The predictive is
/// Student-t; dof ≤ 2 yields an infinite-variance (still proper) predictive.
#[derive(Debug, Clone)]
pub struct BayesLinearModel {
    pub beta_hat: DVector<f64>,
    /// Residual variance estimate with N − D denominator.
    pub s2: f64,
    /// (XᵀX)⁻¹.
    pub gram_inv: DMatrix<f64>,
    /// ν = N − D.
    pub dof: f64,
}

pub fn blm_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<BayesLinearModel> {
    let n = x.nrows();
    let d = x.ncols();
    if n <= d {
        return Err(Error::Data(format!("need N > D, got N = {n}, D = {d}")));
    }
    if y.len() != n {
        return Err(Error::Data("X and y row counts differ".into()));
    }
    let xtx = x.transpose() * x;
    let gram_inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::Singular("XᵀX is not invertible".into()))?;
    let beta_hat = &gram_inv * (x.transpose() * y);
    let resid = y - x * &beta_hat;
    let dof = (n - d) as f64;
    let s2 = resid.norm_squared() / dof;
    Ok(BayesLinearModel { beta_hat, s2, gram_inv, dof })
}

pub fn blm_predict(model: &BayesLinearModel, x: &[f64]) -> Result<PredictiveDistribution<f64>> {
    let (loc, sq_scale) = blm_params(model, x)?;
    let dist = PredictiveDistribution::StudentT { location: loc, sq_scale, dof: model.dof };
    dist.validate()?;
    Ok(dist)
}

fn blm_params(model: &BayesLinearModel, x: &[f64]) -> Result<(f64, f64)> {
    let d = model.beta_hat.len();
    if x.len() != d {
        return Err(Error::Data(format!("x has {} coordinates, model expects {d}", x.len())));
    }
    let xv = DVector::from_column_slice(x);
    let loc = model.beta_hat.dot(&xv);
    let v = (&model.gram_inv * &xv).dot(&xv);
    Ok((loc, model.s2 * (1.0 + v)))
}

/// Predictive parameter derivatives at `x`: ∂location/∂x_d = β̂_d,
/// ∂sqScale/∂x_d = 2s²[(XᵀX)⁻¹x]_d, ∂ν/∂x_d = 0.
pub fn blm_sensitivity(model: &BayesLinearModel, x: &[f64]) -> Result<ParamSensitivity<f64>> {
    let dist = blm_predict(model, x)?;
    let xv = DVector::from_column_slice(x);
    let gx = &model.gram_inv * &xv;
    let grad: Vec<Vec<f64>> = (0..x.len())
        .map(|d| vec![model.beta_hat[d], 2.0 * model.s2 * gx[d], 0.0])
        .collect();
    ParamSensitivity::new(dist, grad)
}

/// Closed-form R-sens for the linear model, returned as the total together
/// with its two summands: the coefficient term and the uncertainty term.
/// summand 1 vanishes iff β̂_d = 0; summand 2 vanishes iff [(XᵀX)⁻¹x]_d = 0.
#[derive(Debug, Clone, Copy)]
pub struct BlmRsens {
    pub total: f64,
    pub coefficient_term: f64,
    pub uncertainty_term: f64,
}

pub fn blm_rsens_closed_form(model: &BayesLinearModel, x: &[f64], d: usize) -> Result<BlmRsens> {
    if d >= x.len() {
        return Err(Error::DimensionOutOfRange { index: d, size: x.len() });
    }
    let (_, var) = blm_params(model, x)?;
    let xv = DVector::from_column_slice(x);
    let v_d = (&model.gram_inv * &xv)[d];
    let nu = model.dof;
    let beta_d = model.beta_hat[d];
    let s1 = (nu + 1.0) * beta_d * beta_d / ((nu + 3.0) * var);
    let s2 = 2.0 * nu * model.s2 * model.s2 * v_d * v_d / ((nu + 3.0) * var * var);
    Ok(BlmRsens {
        total: (s1 + s2).sqrt(),
        coefficient_term: s1,
        uncertainty_term: s2,
    })
}

/// Probit-link binary regression with a zero-mean Gaussian prior, fit by
/// the Laplace approximation around the posterior mode.
#[derive(Debug, Clone)]
pub struct LaplaceLogisticModel {
    pub beta_hat: DVector<f64>,
    /// Inverse curvature of the negative log posterior at the mode.
    pub hess_inv: DMatrix<f64>,
    pub prior_var: f64,
}

const LOGISTIC_MAX_ITERS: usize = 100;
const LOGISTIC_GRAD_TOL: f64 = 1e-8;

fn probit_log_posterior(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, prior_var: f64) -> f64 {
    let mut lp = -beta.norm_squared() / (2.0 * prior_var);
    for i in 0..x.nrows() {
        let eta: f64 = x.row(i).transpose().dot(beta);
        let z = if y[i] > 0.5 { eta } else { -eta };
        lp += normal_cdf(z).max(1e-300).ln();
    }
    lp
}

pub fn logistic_fit(x: &DMatrix<f64>, y: &DVector<f64>, prior_var: f64) -> Result<LaplaceLogisticModel> {
    let n = x.nrows();
    let d = x.ncols();
    if n == 0 {
        return Err(Error::EmptyInput("logistic_fit"));
    }
    if y.len() != n {
        return Err(Error::Data("X and y row counts differ".into()));
    }
    if prior_var <= 0.0 {
        return Err(Error::Domain("prior variance must be positive".into()));
    }
    let pos = y.iter().filter(|v| **v > 0.5).count();
    if pos == 0 || pos == n {
        return Err(Error::Data("need at least one observation of each class".into()));
    }

    let mut beta = DVector::zeros(d);
    let mut lp = probit_log_posterior(x, y, &beta, prior_var);
    for _ in 0..LOGISTIC_MAX_ITERS {
        let mut grad = -&beta / prior_var;
        let mut hess = DMatrix::identity(d, d) / prior_var;
        for i in 0..n {
            let xi = x.row(i).transpose();
            let eta = xi.dot(&beta);
            let z = if y[i] > 0.5 { 1.0 } else { -1.0 };
            let u = z * eta;
            let ratio = normal_pdf(u) / normal_cdf(u).max(1e-300);
            grad += z * ratio * &xi;
            let w = ratio * (ratio + u);
            hess += w.max(1e-12) * &xi * xi.transpose();
        }
        if grad.amax() < LOGISTIC_GRAD_TOL {
            let hess_inv = hess
                .try_inverse()
                .ok_or_else(|| Error::Singular("posterior curvature not invertible".into()))?;
            return Ok(LaplaceLogisticModel { beta_hat: beta, hess_inv, prior_var });
        }
        let step = hess
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("posterior curvature not invertible".into()))?
            * &grad;
        // step-halving keeps the ascent monotone on near-separable data
        let mut t = 1.0;
        loop {
            let trial = &beta + t * &step;
            let lp_trial = probit_log_posterior(x, y, &trial, prior_var);
            if lp_trial > lp || t < 1e-8 {
                beta = trial;
                lp = lp_trial;
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::NonConvergence(format!(
        "posterior mode search did not converge in {LOGISTIC_MAX_ITERS} iterations"
    )))
}

/// Posterior predictive class probability π* = Φ(xβ̂ / √(1 + x H⁻¹ xᵀ)).
pub fn logistic_predict(model: &LaplaceLogisticModel, x: &[f64]) -> Result<PredictiveDistribution<f64>> {
    let (u, _, _) = logistic_link_terms(model, x)?;
    let prob = normal_cdf(u).clamp(1e-12, 1.0 - 1e-12);
    Ok(PredictiveDistribution::Bernoulli { prob })
}

fn logistic_link_terms(model: &LaplaceLogisticModel, x: &[f64]) -> Result<(f64, f64, DVector<f64>)> {
    let d = model.beta_hat.len();
    if x.len() != d {
        return Err(Error::Data(format!("x has {} coordinates, model expects {d}", x.len())));
    }
    let xv = DVector::from_column_slice(x);
    let eta = model.beta_hat.dot(&xv);
    let hx = &model.hess_inv * &xv;
    let r = 1.0 / (1.0 + hx.dot(&xv)).sqrt();
    Ok((eta * r, eta, hx))
}

/// Predictive probability derivative ∂π*/∂x_d for the generic pipeline.
pub fn logistic_sensitivity(model: &LaplaceLogisticModel, x: &[f64]) -> Result<ParamSensitivity<f64>> {
    let dist = logistic_predict(model, x)?;
    let (u, eta, hx) = logistic_link_terms(model, x)?;
    let r = 1.0 / (1.0 + hx.dot(&DVector::from_column_slice(x))).sqrt();
    let nu = normal_pdf(u);
    let grad: Vec<Vec<f64>> = (0..x.len())
        .map(|d| vec![nu * (model.beta_hat[d] * r - eta * hx[d] * r * r * r)])
        .collect();
    ParamSensitivity::new(dist, grad)
}

/// Closed-form R-sens for the probit-link model: the Bernoulli Fisher
/// square root times |∂π*/∂x_d|.
pub fn logistic_rsens(model: &LaplaceLogisticModel, x: &[f64], d: usize) -> Result<f64> {
    if d >= x.len() {
        return Err(Error::DimensionOutOfRange { index: d, size: x.len() });
    }
    let (u, eta, hx) = logistic_link_terms(model, x)?;
    let r = 1.0 / (1.0 + hx.dot(&DVector::from_column_slice(x))).sqrt();
    let prob = normal_cdf(u).clamp(1e-12, 1.0 - 1e-12);
    let bracket = (model.beta_hat[d] * r - eta * hx[d] * r * r * r).abs();
    Ok(normal_pdf(u) * bracket / (prob * (1.0 - prob)).sqrt())
}
