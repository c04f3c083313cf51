//! Exponentiated-quadratic (ARD) kernels and their input derivatives.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Hyperparameters of one exponentiated-quadratic kernel: signal variance
/// σ_f² and one lengthscale per active dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EQKernelParams {
    pub signal_var: f64,
    pub lengthscales: Vec<f64>,
}

impl EQKernelParams {
    pub fn new(signal_var: f64, lengthscales: Vec<f64>) -> Result<Self> {
        let p = Self { signal_var, lengthscales };
        p.validate()?;
        Ok(p)
    }

    pub fn isotropic(signal_var: f64, lengthscale: f64, dims: usize) -> Result<Self> {
        Self::new(signal_var, vec![lengthscale; dims])
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.signal_var > 0.0
            && self.signal_var.is_finite()
            && !self.lengthscales.is_empty()
            && self.lengthscales.iter().all(|l| *l > 0.0 && l.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid EQ kernel parameters: {self:?}")))
        }
    }
}

/// σ_f² · exp(−½ Σ_k (x_ki − x_kj)² / l_k²).
pub fn kernel_eval(params: &EQKernelParams, xi: &[f64], xj: &[f64]) -> f64 {
    let mut s = 0.0;
    for (k, l) in params.lengthscales.iter().enumerate() {
        let d = xi[k] - xj[k];
        s += d * d / (l * l);
    }
    params.signal_var * (-0.5 * s).exp()
}

/// ∂k/∂x_d of the first argument: k · (−(x_d⁽ⁱ⁾ − x_d⁽ʲ⁾)/l_d²).
pub fn kernel_grad(params: &EQKernelParams, xi: &[f64], xj: &[f64], d: usize) -> f64 {
    let ld = params.lengthscales[d];
    -kernel_eval(params, xi, xj) * (xi[d] - xj[d]) / (ld * ld)
}

/// ∂²k/∂x_d∂x_e of the first argument:
/// k · [ Δ_d Δ_e / (l_d² l_e²) − δ_de / l_d² ].
pub fn kernel_hess(params: &EQKernelParams, xi: &[f64], xj: &[f64], d: usize, e: usize) -> f64 {
    let ld2 = params.lengthscales[d] * params.lengthscales[d];
    let le2 = params.lengthscales[e] * params.lengthscales[e];
    let dd = xi[d] - xj[d];
    let de = xi[e] - xj[e];
    let corr = if d == e { 1.0 / ld2 } else { 0.0 };
    kernel_eval(params, xi, xj) * (dd * de / (ld2 * le2) - corr)
}

/// One additive component: an EQ kernel over a subset of input dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelUnit {
    /// Active input dimensions, in ascending order; `params.lengthscales`
    /// aligns with this list.
    pub dims: Vec<usize>,
    pub params: EQKernelParams,
}

impl KernelUnit {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        self.dims.iter().map(|&d| x[d]).collect()
    }

    /// Position of global dimension `d` in this unit, if active.
    fn local(&self, d: usize) -> Option<usize> {
        self.dims.iter().position(|&k| k == d)
    }
}

/// Sum of EQ kernel units. A single unit over all dimensions is the
/// standard ARD kernel; multiple units give additive structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub units: Vec<KernelUnit>,
}

impl Kernel {
    /// Standard ARD kernel over all `dims` input dimensions.
    pub fn ard(params: EQKernelParams) -> Result<Self> {
        params.validate()?;
        let dims = (0..params.lengthscales.len()).collect();
        Ok(Self { units: vec![KernelUnit { dims, params }] })
    }

    /// Additive kernel: one 1-D unit per input dimension plus one 2-D unit
    /// per selected pair.
    pub fn additive(d: usize, pairs: &[(usize, usize)], signal_var: f64, lengthscale: f64) -> Result<Self> {
        let mut units = Vec::new();
        for k in 0..d {
            units.push(KernelUnit {
                dims: vec![k],
                params: EQKernelParams::new(signal_var, vec![lengthscale])?,
            });
        }
        for &(a, b) in pairs {
            if a >= d || b >= d || a == b {
                return Err(Error::InvalidConfig(format!("invalid pair ({a}, {b}) for {d} dims")));
            }
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            units.push(KernelUnit {
                dims: vec![a, b],
                params: EQKernelParams::new(signal_var, vec![lengthscale; 2])?,
            });
        }
        Ok(Self { units })
    }

    pub fn validate(&self) -> Result<()> {
        if self.units.is_empty() {
            return Err(Error::InvalidConfig("kernel needs at least one unit".into()));
        }
        for u in &self.units {
            u.params.validate()?;
            if u.dims.len() != u.params.lengthscales.len() {
                return Err(Error::InvalidConfig(
                    "unit dims and lengthscales length mismatch".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn eval(&self, xi: &[f64], xj: &[f64]) -> f64 {
        self.units
            .iter()
            .map(|u| kernel_eval(&u.params, &u.project(xi), &u.project(xj)))
            .sum()
    }

    /// ∂k/∂x_d of the first argument.
    pub fn grad(&self, xi: &[f64], xj: &[f64], d: usize) -> f64 {
        self.units
            .iter()
            .filter_map(|u| {
                u.local(d).map(|ld| kernel_grad(&u.params, &u.project(xi), &u.project(xj), ld))
            })
            .sum()
    }

    /// ∂²k/∂x_d∂x_e of the first argument.
    pub fn hess(&self, xi: &[f64], xj: &[f64], d: usize, e: usize) -> f64 {
        self.units
            .iter()
            .filter_map(|u| match (u.local(d), u.local(e)) {
                (Some(ld), Some(le)) => {
                    Some(kernel_hess(&u.params, &u.project(xi), &u.project(xj), ld, le))
                }
                _ => None,
            })
            .sum()
    }

    /// Number of log-scale hyperparameters (per unit: ln σ_f² then ln l_k).
    pub fn hyper_count(&self) -> usize {
        self.units.iter().map(|u| 1 + u.params.lengthscales.len()).sum()
    }

    pub fn pack_log_hypers(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.hyper_count());
        for u in &self.units {
            v.push(u.params.signal_var.ln());
            v.extend(u.params.lengthscales.iter().map(|l| l.ln()));
        }
        v
    }

    pub fn with_log_hypers(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != self.hyper_count() {
            return Err(Error::InvalidConfig(format!(
                "expected {} hyperparameters, got {}",
                self.hyper_count(),
                theta.len()
            )));
        }
        let mut out = self.clone();
        let mut i = 0;
        for u in &mut out.units {
            u.params.signal_var = theta[i].exp();
            i += 1;
            for l in &mut u.params.lengthscales {
                *l = theta[i].exp();
                i += 1;
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// ∂k(xi, xj)/∂θ for every log hyperparameter θ, appended to `out`.
    pub fn hyper_grads(&self, xi: &[f64], xj: &[f64], out: &mut [f64]) {
        let mut i = 0;
        for u in &self.units {
            let pi = u.project(xi);
            let pj = u.project(xj);
            let k = kernel_eval(&u.params, &pi, &pj);
            out[i] = k; // d/d ln σ_f²
            i += 1;
            for (loc, l) in u.params.lengthscales.iter().enumerate() {
                let diff = pi[loc] - pj[loc];
                out[i] = k * diff * diff / (l * l); // d/d ln l
                i += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn params() -> EQKernelParams {
        EQKernelParams::new(1.7, vec![0.6, 1.3, 2.0]).unwrap()
    }

    #[test]
    fn eval_basics() {
        let p = EQKernelParams::new(1.0, vec![1.0]).unwrap();
        assert_relative_eq!(kernel_eval(&p, &[0.3], &[0.3]), 1.0, epsilon = 1e-15);
        let v = kernel_eval(&p, &[0.0], &[std::f64::consts::SQRT_2]);
        assert_relative_eq!(v, (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn grad_vanishes_at_coincidence_and_kernel_symmetric() {
        let p = params();
        let x = [0.1, -0.4, 2.2];
        for d in 0..3 {
            assert_eq!(kernel_grad(&p, &x, &x, d), 0.0);
        }
        let y = [1.0, 0.0, -1.0];
        assert_relative_eq!(kernel_eval(&p, &x, &y), kernel_eval(&p, &y, &x), epsilon = 1e-15);
    }

    #[test]
    fn grad_and_hess_match_finite_differences() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        let h2 = 1e-4; // larger step: the double difference divides by h², amplifying roundoff
        for _ in 0..100 {
            let xi: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let xj: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            for d in 0..3 {
                let mut hi = xi.clone();
                let mut lo = xi.clone();
                hi[d] += h;
                lo[d] -= h;
                let fd = (kernel_eval(&p, &hi, &xj) - kernel_eval(&p, &lo, &xj)) / (2.0 * h);
                assert_relative_eq!(kernel_grad(&p, &xi, &xj, d), fd, max_relative = 1e-6, epsilon = 1e-9);
                for e in 0..3 {
                    let mut pp = xi.clone();
                    let mut pm = xi.clone();
                    let mut mp = xi.clone();
                    let mut mm = xi.clone();
                    pp[d] += h2;
                    pp[e] += h2;
                    pm[d] += h2;
                    pm[e] -= h2;
                    mp[d] -= h2;
                    mp[e] += h2;
                    mm[d] -= h2;
                    mm[e] -= h2;
                    let fd2 = (kernel_eval(&p, &pp, &xj) - kernel_eval(&p, &pm, &xj)
                        - kernel_eval(&p, &mp, &xj)
                        + kernel_eval(&p, &mm, &xj))
                        / (4.0 * h2 * h2);
                    assert_relative_eq!(
                        kernel_hess(&p, &xi, &xj, d, e),
                        fd2,
                        max_relative = 1e-4,
                        epsilon = 1e-7
                    );
                }
            }
        }
    }

    #[test]
    fn additive_kernel_derivatives_match_finite_differences() {
        let kernel = Kernel::additive(4, &[(0, 2), (1, 3)], 0.8, 1.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for _ in 0..40 {
            let xi: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let xj: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            for d in 0..4 {
                let mut hi = xi.clone();
                let mut lo = xi.clone();
                hi[d] += h;
                lo[d] -= h;
                let fd = (kernel.eval(&hi, &xj) - kernel.eval(&lo, &xj)) / (2.0 * h);
                assert_relative_eq!(kernel.grad(&xi, &xj, d), fd, max_relative = 1e-5, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn hyper_pack_roundtrip_and_grads() {
        let kernel = Kernel::ard(params()).unwrap();
        let theta = kernel.pack_log_hypers();
        let k2 = kernel.with_log_hypers(&theta).unwrap();
        assert_eq!(kernel, k2);
        // hyper gradient vs finite differences in log space
        let xi = [0.2, -1.0, 0.7];
        let xj = [1.1, 0.3, -0.2];
        let mut g = vec![0.0; kernel.hyper_count()];
        kernel.hyper_grads(&xi, &xj, &mut g);
        let h = 1e-6;
        for j in 0..theta.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += h;
            tm[j] -= h;
            let fp = kernel.with_log_hypers(&tp).unwrap().eval(&xi, &xj);
            let fm = kernel.with_log_hypers(&tm).unwrap().eval(&xi, &xj);
            assert_relative_eq!(g[j], (fp - fm) / (2.0 * h), max_relative = 1e-6, epsilon = 1e-10);
        }
    }
}
