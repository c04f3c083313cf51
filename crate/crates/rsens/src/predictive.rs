//! Parametric predictive distributions, their Fisher information matrices,
//! and divergences between members of the same family.

use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::scalar::Scalar;
use crate::special::{digamma, ln_gamma, normal_pdf};
use serde::{Deserialize, Serialize};

/// Truncation target for discrete Rényi sums.
const DISCRETE_TAIL: f64 = 1e-12;
/// Absolute tolerance for Student-t quadrature.
const STUDENT_T_QUAD_TOL: f64 = 1e-10;
/// Integration half-width in units of the scale parameter.
const QUAD_RANGE_SCALES: f64 = 50.0;

/// Parametric predictive distribution.
///
/// Parameter vector ordering is fixed per variant: Gaussian = (mean,
/// variance); StudentT = (location, sqScale, dof); Bernoulli = (prob);
/// Poisson = (rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PredictiveDistribution<S: Scalar> {
    Gaussian { mean: S, variance: S },
    StudentT { location: S, sq_scale: S, dof: S },
    Bernoulli { prob: S },
    Poisson { rate: S },
}

impl<S: Scalar> PredictiveDistribution<S> {
    pub fn variant_name(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "Gaussian",
            Self::StudentT { .. } => "StudentT",
            Self::Bernoulli { .. } => "Bernoulli",
            Self::Poisson { .. } => "Poisson",
        }
    }

    /// Number of parameters M of the variant.
    pub fn param_count(&self) -> usize {
        match self {
            Self::Gaussian { .. } => 2,
            Self::StudentT { .. } => 3,
            Self::Bernoulli { .. } | Self::Poisson { .. } => 1,
        }
    }

    /// Parameter vector λ in the fixed per-variant ordering.
    pub fn params(&self) -> Vec<S> {
        match *self {
            Self::Gaussian { mean, variance } => vec![mean, variance],
            Self::StudentT { location, sq_scale, dof } => vec![location, sq_scale, dof],
            Self::Bernoulli { prob } => vec![prob],
            Self::Poisson { rate } => vec![rate],
        }
    }

    /// Rebuild the same variant from a parameter vector.
    pub fn with_params(&self, params: &[S]) -> Result<Self> {
        if params.len() != self.param_count() {
            return Err(Error::Domain(format!(
                "expected {} parameters for {}, got {}",
                self.param_count(),
                self.variant_name(),
                params.len()
            )));
        }
        let dist = match self {
            Self::Gaussian { .. } => Self::Gaussian { mean: params[0], variance: params[1] },
            Self::StudentT { .. } => {
                Self::StudentT { location: params[0], sq_scale: params[1], dof: params[2] }
            }
            Self::Bernoulli { .. } => Self::Bernoulli { prob: params[0] },
            Self::Poisson { .. } => Self::Poisson { rate: params[0] },
        };
        dist.validate()?;
        Ok(dist)
    }

    /// Check the positivity / interval invariants.
    pub fn validate(&self) -> Result<()> {
        let zero = S::zero();
        let one = S::one();
        let ok = match *self {
            Self::Gaussian { mean, variance } => mean.is_finite() && variance > zero,
            Self::StudentT { location, sq_scale, dof } => {
                location.is_finite() && sq_scale > zero && dof > zero
            }
            Self::Bernoulli { prob } => prob > zero && prob < one,
            Self::Poisson { rate } => rate > zero && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid {} parameters: {:?}", self.variant_name(), self.params_f64())))
        }
    }

    fn params_f64(&self) -> Vec<f64> {
        self.params().into_iter().map(|p| p.to_f64_lossy()).collect()
    }

    /// Log density (or log mass) at `y`.
    pub fn log_density(&self, y: S) -> S {
        let y = y.to_f64_lossy();
        let v = match *self {
            Self::Gaussian { mean, variance } => {
                let m = mean.to_f64_lossy();
                let var = variance.to_f64_lossy();
                -0.5 * ((y - m) * (y - m) / var + var.ln() + (2.0 * std::f64::consts::PI).ln())
            }
            Self::StudentT { location, sq_scale, dof } => student_t_log_pdf(
                y,
                location.to_f64_lossy(),
                sq_scale.to_f64_lossy(),
                dof.to_f64_lossy(),
            ),
            Self::Bernoulli { prob } => {
                let p = prob.to_f64_lossy();
                if y >= 0.5 {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            }
            Self::Poisson { rate } => {
                let l = rate.to_f64_lossy();
                let k = y.round();
                k * l.ln() - l - ln_gamma(k + 1.0)
            }
        };
        S::from_f64_lossy(v)
    }
}

fn student_t_log_pdf(y: f64, loc: f64, sq_scale: f64, dof: f64) -> f64 {
    let z2 = (y - loc) * (y - loc) / sq_scale;
    ln_gamma((dof + 1.0) / 2.0)
        - ln_gamma(dof / 2.0)
        - 0.5 * (dof * std::f64::consts::PI).ln()
        - 0.5 * sq_scale.ln()
        - 0.5 * (dof + 1.0) * (1.0 + z2 / dof).ln()
}

/// Symmetric positive semi-definite Fisher information matrix, stored dense.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix<S: Scalar> {
    order: usize,
    entries: Vec<S>,
}

impl<S: Scalar> FisherMatrix<S> {
    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let order = rows.len();
        let mut entries = Vec::with_capacity(order * order);
        for row in &rows {
            assert_eq!(row.len(), order, "Fisher matrix must be square");
            entries.extend_from_slice(row);
        }
        Self { order, entries }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.entries[i * self.order + j]
    }

    /// Quadratic form vᵀ 𝓘 v.
    pub fn quadratic_form(&self, v: &[S]) -> S {
        assert_eq!(v.len(), self.order, "vector length must equal matrix order");
        let mut acc = S::zero();
        for i in 0..self.order {
            for j in 0..self.order {
                acc = acc + v[i] * self.get(i, j) * v[j];
            }
        }
        acc
    }
}

/// Fisher information matrix of a predictive distribution in its fixed
/// parameter ordering.
///
/// The Student-t dof row/column entries are evaluated by quadrature of the
/// score products; the location and squared-scale block is analytic.
pub fn fisher_information<S: Scalar>(dist: &PredictiveDistribution<S>) -> Result<FisherMatrix<S>> {
    dist.validate()?;
    let zero = S::zero();
    match *dist {
        PredictiveDistribution::Gaussian { variance, .. } => {
            let v = variance;
            let half = S::from_f64_lossy(0.5);
            Ok(FisherMatrix::from_rows(vec![
                vec![v.recip(), zero],
                vec![zero, half / (v * v)],
            ]))
        }
        PredictiveDistribution::Bernoulli { prob } => {
            let p = prob;
            Ok(FisherMatrix::from_rows(vec![vec![(p * (S::one() - p)).recip()]]))
        }
        PredictiveDistribution::Poisson { rate } => {
            Ok(FisherMatrix::from_rows(vec![vec![rate.recip()]]))
        }
        PredictiveDistribution::StudentT { location, sq_scale, dof } => {
            let _ = location; // the Fisher matrix is location-invariant
            let s2 = sq_scale.to_f64_lossy();
            let nu = dof.to_f64_lossy();
            let i_loc = (nu + 1.0) / ((nu + 3.0) * s2);
            let i_scale = nu / (2.0 * (nu + 3.0) * s2 * s2);
            let (i_scale_nu, i_nu_nu) = student_t_dof_entries(s2, nu)?;
            let f = S::from_f64_lossy;
            Ok(FisherMatrix::from_rows(vec![
                vec![f(i_loc), zero, zero],
                vec![zero, f(i_scale), f(i_scale_nu)],
                vec![zero, f(i_scale_nu), f(i_nu_nu)],
            ]))
        }
    }
}

/// E[s_{σ²} s_ν] and E[s_ν²] for the Student-t, by quadrature in the
/// standardized variable z = (y − loc)/scale, so the result is exactly
/// location-invariant. The location-dof cross entry is zero by symmetry
/// (odd score in location).
fn student_t_dof_entries(s2: f64, nu: f64) -> Result<(f64, f64)> {
    let half_range = QUAD_RANGE_SCALES * nu.max(1.0).sqrt();
    let log_c = ln_gamma((nu + 1.0) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * (nu * std::f64::consts::PI).ln();
    let dig = 0.5 * (digamma((nu + 1.0) / 2.0) - digamma(nu / 2.0));
    let score = move |z: f64| -> (f64, f64, f64) {
        let z2 = z * z;
        let t = 1.0 + z2 / nu;
        // standard-t density in z; the scale Jacobians cancel against the
        // change of variables
        let p = (log_c - 0.5 * (nu + 1.0) * t.ln()).exp();
        let s_scale = -0.5 / s2 + (nu + 1.0) / 2.0 * z2 / (nu * s2 * t);
        let s_nu = dig - 0.5 / nu - 0.5 * t.ln() + (nu + 1.0) * z2 / (2.0 * nu * nu * t);
        (p, s_scale, s_nu)
    };
    let i_scale_nu = integrate(
        |z| {
            let (p, s_scale, s_nu) = score(z);
            p * s_scale * s_nu
        },
        -half_range,
        half_range,
        1e-9,
    )?;
    let i_nu_nu = integrate(
        |z| {
            let (p, _, s_nu) = score(z);
            p * s_nu * s_nu
        },
        -half_range,
        half_range,
        1e-9,
    )?;
    Ok((i_scale_nu, i_nu_nu))
}

fn check_same_variant<S: Scalar>(
    p: &PredictiveDistribution<S>,
    q: &PredictiveDistribution<S>,
) -> Result<()> {
    if std::mem::discriminant(p) != std::mem::discriminant(q) {
        return Err(Error::VariantMismatch { left: p.variant_name(), right: q.variant_name() });
    }
    Ok(())
}

/// Kullback-Leibler divergence KL(p ‖ q) for same-family distributions.
///
/// Closed form for Gaussian, Bernoulli and Poisson; adaptive quadrature for
/// Student-t.
pub fn kl_divergence<S: Scalar>(
    p: &PredictiveDistribution<S>,
    q: &PredictiveDistribution<S>,
) -> Result<S> {
    check_same_variant(p, q)?;
    p.validate()?;
    q.validate()?;
    if p == q {
        return Ok(S::zero());
    }
    let v = match (*p, *q) {
        (
            PredictiveDistribution::Gaussian { mean: m1, variance: v1 },
            PredictiveDistribution::Gaussian { mean: m2, variance: v2 },
        ) => {
            let (m1, v1, m2, v2) =
                (m1.to_f64_lossy(), v1.to_f64_lossy(), m2.to_f64_lossy(), v2.to_f64_lossy());
            0.5 * ((v2 / v1).ln() + (v1 + (m1 - m2) * (m1 - m2)) / v2 - 1.0)
        }
        (
            PredictiveDistribution::Bernoulli { prob: p1 },
            PredictiveDistribution::Bernoulli { prob: p2 },
        ) => {
            let (p1, p2) = (p1.to_f64_lossy(), p2.to_f64_lossy());
            p1 * (p1 / p2).ln() + (1.0 - p1) * ((1.0 - p1) / (1.0 - p2)).ln()
        }
        (
            PredictiveDistribution::Poisson { rate: l1 },
            PredictiveDistribution::Poisson { rate: l2 },
        ) => {
            let (l1, l2) = (l1.to_f64_lossy(), l2.to_f64_lossy());
            l1 * (l1 / l2).ln() + l2 - l1
        }
        (
            PredictiveDistribution::StudentT { location: m1, sq_scale: s1, dof: n1 },
            PredictiveDistribution::StudentT { location: m2, sq_scale: s2, dof: n2 },
        ) => {
            let (m1, s1, n1) = (m1.to_f64_lossy(), s1.to_f64_lossy(), n1.to_f64_lossy());
            let (m2, s2, n2) = (m2.to_f64_lossy(), s2.to_f64_lossy(), n2.to_f64_lossy());
            let scale = s1.sqrt().max(s2.sqrt());
            let a = m1.min(m2) - QUAD_RANGE_SCALES * scale;
            let b = m1.max(m2) + QUAD_RANGE_SCALES * scale;
            integrate(
                |y| {
                    let lp = student_t_log_pdf(y, m1, s1, n1);
                    let lq = student_t_log_pdf(y, m2, s2, n2);
                    lp.exp() * (lp - lq)
                },
                a,
                b,
                STUDENT_T_QUAD_TOL,
            )?
        }
        _ => unreachable!("same-variant checked above"),
    };
    Ok(S::from_f64_lossy(v.max(0.0)))
}

/// Rényi divergence D_α(p ‖ q) for α ∈ (0,1) ∪ (1,∞).
///
/// Delegates to [`kl_divergence`] when |α − 1| < 10⁻⁶. Gaussian uses the
/// closed form; Bernoulli and Poisson use the direct power sum with
/// truncation tail bound below 10⁻¹²; Student-t uses quadrature.
pub fn renyi_divergence<S: Scalar>(
    p: &PredictiveDistribution<S>,
    q: &PredictiveDistribution<S>,
    alpha: f64,
) -> Result<S> {
    check_same_variant(p, q)?;
    p.validate()?;
    q.validate()?;
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::Domain(format!("alpha must be positive and finite, got {alpha}")));
    }
    if (alpha - 1.0).abs() < 1e-6 {
        return kl_divergence(p, q);
    }
    if p == q {
        return Ok(S::zero());
    }
    let v = match (*p, *q) {
        (
            PredictiveDistribution::Gaussian { mean: m1, variance: v1 },
            PredictiveDistribution::Gaussian { mean: m2, variance: v2 },
        ) => {
            let (m1, v1, m2, v2) =
                (m1.to_f64_lossy(), v1.to_f64_lossy(), m2.to_f64_lossy(), v2.to_f64_lossy());
            let va = (1.0 - alpha) * v1 + alpha * v2;
            if va <= 0.0 {
                return Err(Error::UndefinedDivergence(format!(
                    "Gaussian variance combination {va} <= 0 at alpha {alpha}"
                )));
            }
            let dm = m1 - m2;
            alpha * dm * dm / (2.0 * va)
                - (va / (v1.powf(1.0 - alpha) * v2.powf(alpha))).ln() / (2.0 * (alpha - 1.0))
        }
        (
            PredictiveDistribution::Bernoulli { prob: p1 },
            PredictiveDistribution::Bernoulli { prob: p2 },
        ) => {
            let (p1, p2) = (p1.to_f64_lossy(), p2.to_f64_lossy());
            let s = p1.powf(alpha) * p2.powf(1.0 - alpha)
                + (1.0 - p1).powf(alpha) * (1.0 - p2).powf(1.0 - alpha);
            s.ln() / (alpha - 1.0)
        }
        (
            PredictiveDistribution::Poisson { rate: l1 },
            PredictiveDistribution::Poisson { rate: l2 },
        ) => poisson_renyi_sum(l1.to_f64_lossy(), l2.to_f64_lossy(), alpha)? / (alpha - 1.0),
        (
            PredictiveDistribution::StudentT { location: m1, sq_scale: s1, dof: n1 },
            PredictiveDistribution::StudentT { location: m2, sq_scale: s2, dof: n2 },
        ) => {
            let (m1, s1, n1) = (m1.to_f64_lossy(), s1.to_f64_lossy(), n1.to_f64_lossy());
            let (m2, s2, n2) = (m2.to_f64_lossy(), s2.to_f64_lossy(), n2.to_f64_lossy());
            let scale = s1.sqrt().max(s2.sqrt());
            let a = m1.min(m2) - QUAD_RANGE_SCALES * scale;
            let b = m1.max(m2) + QUAD_RANGE_SCALES * scale;
            let integral = integrate(
                |y| {
                    let lp = student_t_log_pdf(y, m1, s1, n1);
                    let lq = student_t_log_pdf(y, m2, s2, n2);
                    (alpha * lp + (1.0 - alpha) * lq).exp()
                },
                a,
                b,
                STUDENT_T_QUAD_TOL,
            )?;
            integral.ln() / (alpha - 1.0)
        }
        _ => unreachable!("same-variant checked above"),
    };
    Ok(S::from_f64_lossy(v.max(0.0)))
}

/// ln Σ_k p_k^α q_k^{1-α} for two Poisson pmfs, truncated where the
/// remaining tail mass bound of both distributions drops below 10⁻¹².
fn poisson_renyi_sum(l1: f64, l2: f64, alpha: f64) -> Result<f64> {
    let lmax = l1.max(l2);
    let mut sum = 0.0f64;
    let mut k = 0u64;
    // log pmfs built incrementally: log p_k = k ln λ − λ − ln k!
    let mut lp = -l1;
    let mut lq = -l2;
    loop {
        sum += (alpha * lp + (1.0 - alpha) * lq).exp();
        let kf = k as f64;
        if kf > lmax {
            // geometric tail bound: P(X > k) <= pmf(k) * r / (1 - r), r = λ/(k+1)
            let tail = |l: f64, lpk: f64| {
                let r = l / (kf + 1.0);
                lpk.exp() * r / (1.0 - r)
            };
            if tail(l1, lp) < DISCRETE_TAIL && tail(l2, lq) < DISCRETE_TAIL {
                break;
            }
        }
        k += 1;
        let kf = k as f64;
        lp += l1.ln() - kf.ln();
        lq += l2.ln() - kf.ln();
        if k > 10_000_000 {
            return Err(Error::Domain(format!(
                "Poisson Renyi sum truncation not reached for rates {l1}, {l2}"
            )));
        }
    }
    Ok(sum.ln())
}

/// Density helper used by probit predictives.
pub fn std_normal_pdf(z: f64) -> f64 {
    normal_pdf(z)
}
