//! Gaussian-process fitting: Gram assembly with jittered Cholesky,
//! log-marginal-likelihood optimization, and the Laplace approximation for
//! non-Gaussian observation models.

use super::kernel::Kernel;
use crate::error::{Error, Result};
use crate::special::{normal_cdf, normal_pdf};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const JITTER_START_REL: f64 = 1e-8;
const JITTER_MAX_REL: f64 = 1e-2;
const LAPLACE_MAX_ITERS: usize = 100;
const LAPLACE_TOL: f64 = 1e-8;

/// Observation model of the GP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum GpLikelihood {
    Gaussian,
    Probit,
    Poisson,
}

/// Laplace approximation state for non-Gaussian likelihoods.
#[derive(Debug, Clone)]
pub struct LaplaceState {
    /// Posterior mode f̂ of the latent values.
    pub mode: DVector<f64>,
    /// Negative log-likelihood curvatures W at the mode.
    pub w: DVector<f64>,
    /// Max-norm of the stationarity residual ∇log p(y|f̂) − K⁻¹f̂.
    pub stationarity_residual: f64,
}

/// Fitting controls. `optimize = false` keeps the initial hyperparameters.
#[derive(Debug, Clone)]
pub struct GpFitOptions {
    pub optimize: bool,
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for GpFitOptions {
    fn default() -> Self {
        Self { optimize: true, restarts: 5, max_iters: 200, grad_tol: 1e-6, seed: 0 }
    }
}

/// Trained Gaussian-process state.
#[derive(Debug, Clone)]
pub struct FittedGP {
    pub train_x: DMatrix<f64>,
    pub kernel: Kernel,
    pub noise_var: f64,
    pub likelihood: GpLikelihood,
    pub log_marginal: f64,
    pub laplace: Option<LaplaceState>,
    pub(crate) chol: Cholesky<f64, Dyn>,
    /// (K+σ²I)⁻¹y (Gaussian) or ∇log p(y|f̂) (Laplace).
    pub(crate) weights: DVector<f64>,
    pub(crate) sqrt_w: Option<DVector<f64>>,
}

impl FittedGP {
    /// Apply (K + σ²I)⁻¹ (Gaussian) or W^{1/2} B⁻¹ W^{1/2} (Laplace) to `v`.
    pub(crate) fn apply_inverse(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.sqrt_w {
            None => self.chol.solve(v),
            Some(sw) => {
                let scaled = v.component_mul(sw);
                self.chol.solve(&scaled).component_mul(sw)
            }
        }
    }

    pub fn input_dim(&self) -> usize {
        self.train_x.ncols()
    }
}

fn assemble_gram(kernel: &Kernel, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        let xi: Vec<f64> = x.row(i).iter().copied().collect();
        for j in i..n {
            let xj: Vec<f64> = x.row(j).iter().copied().collect();
            let v = kernel.eval(&xi, &xj);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky with the jitter schedule: start at 1e-8 × mean diagonal,
/// doubling up to 1e-2 × mean diagonal.
pub(crate) fn cholesky_with_jitter(a: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let n = a.nrows();
    let mean_diag = a.diagonal().sum() / n as f64;
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch);
    }
    let mut jitter = JITTER_START_REL * mean_diag;
    while jitter <= JITTER_MAX_REL * mean_diag {
        let mut aj = a.clone();
        for i in 0..n {
            aj[(i, i)] += jitter;
        }
        if let Some(ch) = aj.cholesky() {
            return Ok(ch);
        }
        jitter *= 2.0;
    }
    Err(Error::NotPositiveDefinite(format!(
        "Gram matrix not factorizable at max jitter {:.2e}",
        JITTER_MAX_REL * mean_diag
    )))
}

/// Log density, gradient, and curvature W = −∂²/∂f² of log p(y|f).
fn lik_terms(likelihood: GpLikelihood, y: f64, f: f64) -> (f64, f64, f64) {
    match likelihood {
        GpLikelihood::Gaussian => unreachable!("Gaussian handled in closed form"),
        GpLikelihood::Poisson => {
            let ef = f.exp();
            // log y! omitted from lp where only differences matter is wrong
            // for the marginal likelihood; keep it.
            let lgy = crate::special::ln_gamma(y + 1.0);
            (y * f - ef - lgy, y - ef, ef)
        }
        GpLikelihood::Probit => {
            let z = if y > 0.5 { 1.0 } else { -1.0 };
            let u = z * f;
            let phi = normal_cdf(u).max(1e-300);
            let ratio = normal_pdf(u) / phi;
            let grad = z * ratio;
            let w = ratio * (ratio + u);
            (phi.ln(), grad, w.max(1e-12))
        }
    }
}

/// Newton mode finding for the Laplace approximation; returns
/// (mode, w, sqrt_w, chol of B, approximate log marginal, residual).
fn laplace_newton(
    k: &DMatrix<f64>,
    y: &DVector<f64>,
    likelihood: GpLikelihood,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>, Cholesky<f64, Dyn>, f64, f64)> {
    let n = y.len();
    let mut f = DVector::zeros(n);
    let mut psi_old = f64::NEG_INFINITY;
    for iter in 0..LAPLACE_MAX_ITERS {
        let mut lp = 0.0;
        let mut grad = DVector::zeros(n);
        let mut w = DVector::zeros(n);
        for i in 0..n {
            let (l, g, wi) = lik_terms(likelihood, y[i], f[i]);
            lp += l;
            grad[i] = g;
            w[i] = wi;
        }
        let sw = w.map(|v| v.sqrt());
        // B = I + W^{1/2} K W^{1/2}
        let mut b = DMatrix::identity(n, n);
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] += sw[i] * k[(i, j)] * sw[j];
            }
        }
        let chol = cholesky_with_jitter(&b)?;
        let bvec = w.component_mul(&f) + &grad;
        let kb = k * &bvec;
        let rhs = sw.component_mul(&kb);
        let solved = chol.solve(&rhs);
        let a = &bvec - sw.component_mul(&solved);
        f = k * &a;
        let psi = -0.5 * a.dot(&f) + lp;
        let resid = {
            let mut r: f64 = 0.0;
            for i in 0..n {
                let (_, g, _) = lik_terms(likelihood, y[i], f[i]);
                r = r.max((g - a[i]).abs());
            }
            r
        };
        let scale = 1.0 + a.amax();
        if resid < LAPLACE_TOL * scale || (iter > 0 && (psi - psi_old).abs() < 1e-12 * (1.0 + psi.abs())) {
            // recompute W and B at the final mode
            let mut lp = 0.0;
            let mut w = DVector::zeros(n);
            let mut grad = DVector::zeros(n);
            for i in 0..n {
                let (l, g, wi) = lik_terms(likelihood, y[i], f[i]);
                lp += l;
                w[i] = wi;
                grad[i] = g;
            }
            let sw = w.map(|v: f64| v.sqrt());
            let mut b = DMatrix::identity(n, n);
            for i in 0..n {
                for j in 0..n {
                    b[(i, j)] += sw[i] * k[(i, j)] * sw[j];
                }
            }
            let chol = cholesky_with_jitter(&b)?;
            let half_logdet_b: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum();
            let log_marginal = -0.5 * a.dot(&f) + lp - half_logdet_b;
            let resid_final = grad
                .iter()
                .zip(a.iter())
                .map(|(g, ai)| (g - ai).abs())
                .fold(0.0f64, f64::max);
            return Ok((f, w, sw, chol, log_marginal, resid_final));
        }
        psi_old = psi;
    }
    Err(Error::NonConvergence(format!(
        "Laplace Newton did not reach stationarity in {LAPLACE_MAX_ITERS} iterations"
    )))
}

/// Gaussian log marginal likelihood and its gradient w.r.t. the log
/// hyperparameters (kernel hypers then ln σ²).
fn gaussian_lml_grad(
    kernel: &Kernel,
    noise_var: f64,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(f64, Vec<f64>)> {
    let n = x.nrows();
    let k = assemble_gram(kernel, x);
    let mut a = k.clone();
    for i in 0..n {
        a[(i, i)] += noise_var;
    }
    let chol = cholesky_with_jitter(&a)?;
    let alpha = chol.solve(y);
    let half_logdet: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum();
    let lml = -0.5 * y.dot(&alpha) - half_logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // R = ααᵀ − A⁻¹; grad_j = ½ Σ_ij R_ij ∂A_ij/∂θ_j
    let ainv = chol.inverse();
    let nh = kernel.hyper_count();
    let mut grad = vec![0.0; nh + 1];
    let mut kg = vec![0.0; nh];
    for i in 0..n {
        let xi: Vec<f64> = x.row(i).iter().copied().collect();
        for j in 0..n {
            let xj: Vec<f64> = x.row(j).iter().copied().collect();
            let r = alpha[i] * alpha[j] - ainv[(i, j)];
            kernel.hyper_grads(&xi, &xj, &mut kg);
            for (t, g) in kg.iter().enumerate() {
                grad[t] += 0.5 * r * g;
            }
            if i == j {
                grad[nh] += 0.5 * r * noise_var; // d/d ln σ²
            }
        }
    }
    Ok((lml, grad))
}

fn laplace_lml(kernel: &Kernel, x: &DMatrix<f64>, y: &DVector<f64>, lik: GpLikelihood) -> Result<f64> {
    let k = assemble_gram(kernel, x);
    let (_, _, _, _, lml, _) = laplace_newton(&k, y, lik)?;
    Ok(lml)
}

/// Minimize `f` with Barzilai–Borwein steps and Armijo backtracking.
/// Stops when the gradient max-norm drops below `tol` or after `max_iters`.
fn minimize<F>(mut fg: F, x0: Vec<f64>, max_iters: usize, tol: f64) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut x = x0;
    let (mut fx, mut g) = fg(&x)?;
    let mut prev_x: Option<Vec<f64>> = None;
    let mut prev_g: Option<Vec<f64>> = None;
    for _ in 0..max_iters {
        let ginf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if ginf < tol {
            break;
        }
        let mut step = match (&prev_x, &prev_g) {
            (Some(px), Some(pg)) => {
                let mut sy = 0.0;
                let mut ss = 0.0;
                for i in 0..x.len() {
                    let s = x[i] - px[i];
                    let dy = g[i] - pg[i];
                    sy += s * dy;
                    ss += s * s;
                }
                if sy > 1e-12 {
                    (ss / sy).clamp(1e-6, 1e2)
                } else {
                    1.0
                }
            }
            _ => 0.1 / (1.0 + ginf),
        };
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(g.iter()).map(|(xi, gi)| xi - step * gi).collect();
            match fg(&trial) {
                Ok((ft, gt)) if ft.is_finite() && ft <= fx - 1e-4 * step * g.iter().map(|v| v * v).sum::<f64>() => {
                    prev_x = Some(x);
                    prev_g = Some(g);
                    x = trial;
                    fx = ft;
                    g = gt;
                    accepted = true;
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if !accepted {
            break; // no further progress possible at machine precision
        }
    }
    Ok((x, fx))
}

/// Fit a GP. When `opts.optimize` is set, hyperparameters maximize the
/// (Laplace-approximate, for non-Gaussian) log marginal likelihood by
/// seeded multi-start local search on log-parameters.
pub fn gp_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    likelihood: GpLikelihood,
    init_kernel: Kernel,
    init_noise_var: f64,
    opts: &GpFitOptions,
) -> Result<FittedGP> {
    if x.nrows() < 2 {
        return Err(Error::Data("GP fit needs at least 2 observations".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::Data("X and y row counts differ".into()));
    }
    init_kernel.validate()?;
    if likelihood == GpLikelihood::Gaussian && init_noise_var < 0.0 {
        return Err(Error::Domain("noise variance must be non-negative".into()));
    }

    let (kernel, noise_var) = if opts.optimize {
        optimize_hypers(x, y, likelihood, &init_kernel, init_noise_var, opts)?
    } else {
        (init_kernel, init_noise_var)
    };

    finalize_fit(x, y, likelihood, kernel, noise_var)
}

fn optimize_hypers(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    likelihood: GpLikelihood,
    init_kernel: &Kernel,
    init_noise_var: f64,
    opts: &GpFitOptions,
) -> Result<(Kernel, f64)> {
    let gaussian = likelihood == GpLikelihood::Gaussian;
    let mut theta0 = init_kernel.pack_log_hypers();
    if gaussian {
        theta0.push(init_noise_var.max(1e-12).ln());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for r in 0..opts.restarts.max(1) {
        let start: Vec<f64> = if r == 0 {
            theta0.clone()
        } else {
            theta0.iter().map(|t| t + rng.gen_range(-1.5..1.5)).collect()
        };
        let objective = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
            if gaussian {
                let (kh, ln_noise) = theta.split_at(theta.len() - 1);
                let kernel = init_kernel.with_log_hypers(kh)?;
                let noise = ln_noise[0].exp();
                let (lml, grad) = gaussian_lml_grad(&kernel, noise, x, y)?;
                Ok((-lml, grad.into_iter().map(|g| -g).collect()))
            } else {
                // central finite differences of the Laplace-approximate LML
                let kernel = init_kernel.with_log_hypers(theta)?;
                let f0 = -laplace_lml(&kernel, x, y, likelihood)?;
                let h = 1e-4;
                let mut grad = vec![0.0; theta.len()];
                for j in 0..theta.len() {
                    let mut tp = theta.to_vec();
                    let mut tm = theta.to_vec();
                    tp[j] += h;
                    tm[j] -= h;
                    let fp = -laplace_lml(&init_kernel.with_log_hypers(&tp)?, x, y, likelihood)?;
                    let fm = -laplace_lml(&init_kernel.with_log_hypers(&tm)?, x, y, likelihood)?;
                    grad[j] = (fp - fm) / (2.0 * h);
                }
                Ok((f0, grad))
            }
        };
        match minimize(objective, start, opts.max_iters, opts.grad_tol) {
            Ok((theta, nlml)) => {
                if best.as_ref().map_or(true, |(_, b)| nlml < *b) {
                    best = Some((theta, nlml));
                }
            }
            Err(_) => continue, // restart landed in an infeasible region
        }
    }
    let (theta, _) = best.ok_or_else(|| Error::NonConvergence("all restarts failed".into()))?;
    if gaussian {
        let (kh, ln_noise) = theta.split_at(theta.len() - 1);
        Ok((init_kernel.with_log_hypers(kh)?, ln_noise[0].exp()))
    } else {
        Ok((init_kernel.with_log_hypers(&theta)?, init_noise_var))
    }
}

fn finalize_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    likelihood: GpLikelihood,
    kernel: Kernel,
    noise_var: f64,
) -> Result<FittedGP> {
    let n = x.nrows();
    let k = assemble_gram(&kernel, x);
    match likelihood {
        GpLikelihood::Gaussian => {
            let mut a = k;
            for i in 0..n {
                a[(i, i)] += noise_var;
            }
            let chol = cholesky_with_jitter(&a)?;
            let weights = chol.solve(y);
            let half_logdet: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum();
            let log_marginal = -0.5 * y.dot(&weights)
                - half_logdet
                - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
            Ok(FittedGP {
                train_x: x.clone(),
                kernel,
                noise_var,
                likelihood,
                log_marginal,
                laplace: None,
                chol,
                weights,
                sqrt_w: None,
            })
        }
        GpLikelihood::Probit | GpLikelihood::Poisson => {
            let (mode, w, sw, chol, log_marginal, resid) = laplace_newton(&k, y, likelihood)?;
            // weights = ∇log p(y|f̂) = K⁻¹ f̂ at the mode
            let mut weights = DVector::zeros(n);
            for i in 0..n {
                let (_, g, _) = lik_terms(likelihood, y[i], mode[i]);
                weights[i] = g;
            }
            Ok(FittedGP {
                train_x: x.clone(),
                kernel,
                noise_var: 0.0,
                likelihood,
                log_marginal,
                laplace: Some(LaplaceState { mode, w, stationarity_residual: resid }),
                chol,
                weights,
                sqrt_w: Some(sw),
            })
        }
    }
}
