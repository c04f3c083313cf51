//! Gaussian-process regression and classification with exact input
//! derivatives of the predictive parameters.

pub mod fit;
pub mod kernel;

pub use fit::{gp_fit, FittedGP, GpFitOptions, GpLikelihood, LaplaceState};
pub use kernel::{EQKernelParams, Kernel};

use crate::error::{Error, Result};
use crate::predictive::PredictiveDistribution;
use crate::sensitivity::ParamSensitivity;
use crate::special::{normal_cdf, normal_pdf};
use nalgebra::DVector;

/// Latent mean/variance at a point with optional input derivatives.
/// `mean_grad[d] = ∂E[f*]/∂x_d`; `var_hess` is the full symmetric matrix
/// stored row-major when order 2 is requested.
#[derive(Debug, Clone)]
pub struct LatentPrediction {
    pub mean: f64,
    pub var: f64,
    pub mean_grad: Vec<f64>,
    pub var_grad: Vec<f64>,
    pub mean_hess: Vec<Vec<f64>>,
    pub var_hess: Vec<Vec<f64>>,
}

/// Posterior latent mean and variance at `x`.
pub fn gp_latent_predict(fit: &FittedGP, x: &[f64]) -> Result<(f64, f64)> {
    let p = gp_latent_derivatives(fit, x, 0)?;
    Ok((p.mean, p.var))
}

/// Latent prediction with derivatives up to `order` (0, 1, or 2).
pub fn gp_latent_derivatives(fit: &FittedGP, x: &[f64], order: usize) -> Result<LatentPrediction> {
    let d_in = fit.input_dim();
    if x.len() != d_in {
        return Err(Error::Data(format!(
            "query point has {} coordinates, model expects {d_in}",
            x.len()
        )));
    }
    if order > 2 {
        return Err(Error::InvalidConfig("derivative order must be 0, 1, or 2".into()));
    }
    let n = fit.train_x.nrows();

    let mut ks = DVector::zeros(n);
    let mut kgrad: Vec<DVector<f64>> = Vec::new();
    let mut khess: Vec<Vec<DVector<f64>>> = Vec::new();
    if order >= 1 {
        kgrad = vec![DVector::zeros(n); d_in];
    }
    if order >= 2 {
        khess = vec![vec![DVector::zeros(n); d_in]; d_in];
    }
    for i in 0..n {
        let xi: Vec<f64> = fit.train_x.row(i).iter().copied().collect();
        ks[i] = fit.kernel.eval(x, &xi);
        if order >= 1 {
            for d in 0..d_in {
                kgrad[d][i] = fit.kernel.grad(x, &xi, d);
            }
        }
        if order >= 2 {
            for d in 0..d_in {
                for e in d..d_in {
                    let v = fit.kernel.hess(x, &xi, d, e);
                    khess[d][e][i] = v;
                    khess[e][d][i] = v;
                }
            }
        }
    }

    let mean = ks.dot(&fit.weights);
    let mks = fit.apply_inverse(&ks);
    // self-covariance of the EQ kernel is constant in x, so its input
    // derivatives drop out of the variance formulas below
    let var = (fit.kernel.eval(x, x) - ks.dot(&mks)).max(0.0);

    let mut out = LatentPrediction {
        mean,
        var,
        mean_grad: Vec::new(),
        var_grad: Vec::new(),
        mean_hess: Vec::new(),
        var_hess: Vec::new(),
    };
    if order >= 1 {
        out.mean_grad = kgrad.iter().map(|g| g.dot(&fit.weights)).collect();
        out.var_grad = kgrad.iter().map(|g| -2.0 * g.dot(&mks)).collect();
    }
    if order >= 2 {
        let mgrad: Vec<DVector<f64>> = kgrad.iter().map(|g| fit.apply_inverse(g)).collect();
        out.mean_hess = vec![vec![0.0; d_in]; d_in];
        out.var_hess = vec![vec![0.0; d_in]; d_in];
        for d in 0..d_in {
            for e in d..d_in {
                let mh = khess[d][e].dot(&fit.weights);
                let vh = -2.0 * (khess[d][e].dot(&mks) + kgrad[d].dot(&mgrad[e]));
                out.mean_hess[d][e] = mh;
                out.mean_hess[e][d] = mh;
                out.var_hess[d][e] = vh;
                out.var_hess[e][d] = vh;
            }
        }
    }
    Ok(out)
}

/// Predictive distribution at `x` with parameter derivatives up to `order`,
/// mapped through the observation model.
pub fn gp_predictive(fit: &FittedGP, x: &[f64], order: usize) -> Result<ParamSensitivity<f64>> {
    let lat = gp_latent_derivatives(fit, x, order)?;
    let d_in = fit.input_dim();
    match fit.likelihood {
        GpLikelihood::Gaussian => {
            let dist = PredictiveDistribution::Gaussian {
                mean: lat.mean,
                variance: lat.var + fit.noise_var,
            };
            let grad: Vec<Vec<f64>> = (0..d_in)
                .map(|d| {
                    if order >= 1 {
                        vec![lat.mean_grad[d], lat.var_grad[d]]
                    } else {
                        vec![0.0, 0.0]
                    }
                })
                .collect();
            let mut s = ParamSensitivity::new(dist, grad)?;
            if order >= 2 {
                for d in 0..d_in {
                    for e in d..d_in {
                        s = s.with_cross(d, e, vec![lat.mean_hess[d][e], lat.var_hess[d][e]])?;
                    }
                }
            }
            Ok(s)
        }
        GpLikelihood::Probit => {
            // π* = Φ(u), u = E (1+V)^{-1/2}
            let r = 1.0 / (1.0 + lat.var).sqrt();
            let u = lat.mean * r;
            let prob = normal_cdf(u);
            let dist = PredictiveDistribution::Bernoulli { prob };
            let nu = normal_pdf(u);
            let r3 = r * r * r;
            let u_d = |d: usize| lat.mean_grad[d] * r - 0.5 * lat.mean * r3 * lat.var_grad[d];
            let grad: Vec<Vec<f64>> = (0..d_in)
                .map(|d| if order >= 1 { vec![nu * u_d(d)] } else { vec![0.0] })
                .collect();
            let mut s = ParamSensitivity::new(dist, grad)?;
            if order >= 2 {
                let r5 = r3 * r * r;
                for d in 0..d_in {
                    for e in d..d_in {
                        let u_de = lat.mean_hess[d][e] * r
                            - 0.5 * lat.mean_grad[d] * r3 * lat.var_grad[e]
                            - 0.5 * lat.mean_grad[e] * r3 * lat.var_grad[d]
                            - 0.5 * lat.mean * r3 * lat.var_hess[d][e]
                            + 0.75 * lat.mean * r5 * lat.var_grad[d] * lat.var_grad[e];
                        let pi_de = nu * (-u * u_d(d) * u_d(e) + u_de);
                        s = s.with_cross(d, e, vec![pi_de])?;
                    }
                }
            }
            Ok(s)
        }
        GpLikelihood::Poisson => {
            // λ* = exp(E + V/2), the mean of a log-normal latent rate
            let rate = (lat.mean + 0.5 * lat.var).exp();
            let dist = PredictiveDistribution::Poisson { rate };
            let g = |d: usize| lat.mean_grad[d] + 0.5 * lat.var_grad[d];
            let grad: Vec<Vec<f64>> = (0..d_in)
                .map(|d| if order >= 1 { vec![rate * g(d)] } else { vec![0.0] })
                .collect();
            let mut s = ParamSensitivity::new(dist, grad)?;
            if order >= 2 {
                for d in 0..d_in {
                    for e in d..d_in {
                        let h = rate * (g(d) * g(e) + lat.mean_hess[d][e] + 0.5 * lat.var_hess[d][e]);
                        s = s.with_cross(d, e, vec![h])?;
                    }
                }
            }
            Ok(s)
        }
    }
}
