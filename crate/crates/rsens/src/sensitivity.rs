//! R-sens and R-sens₂ sensitivity measures, the finite-difference KL
//! approximation, and aggregation of local values into global rankings.

use crate::error::{Error, Result};
use crate::predictive::{fisher_information, kl_divergence, PredictiveDistribution};
use crate::scalar::Scalar;
use serde::Serialize;
use std::collections::BTreeMap;

/// First and optional second derivatives of the predictive parameter vector
/// λ with respect to the input coordinates.
#[derive(Debug, Clone)]
pub struct ParamSensitivity<S: Scalar> {
    pub dist: PredictiveDistribution<S>,
    /// grad[d] = ∂λ/∂x_d, one M-vector per input dimension.
    pub grad: Vec<Vec<S>>,
    /// cross[(d, e)] = ∂²λ/∂x_d∂x_e, stored with d <= e.
    pub cross: BTreeMap<(usize, usize), Vec<S>>,
}

impl<S: Scalar> ParamSensitivity<S> {
    pub fn new(dist: PredictiveDistribution<S>, grad: Vec<Vec<S>>) -> Result<Self> {
        let m = dist.param_count();
        for g in &grad {
            if g.len() != m {
                return Err(Error::Domain(format!(
                    "gradient vector length {} does not match parameter count {m}",
                    g.len()
                )));
            }
        }
        Ok(Self { dist, grad, cross: BTreeMap::new() })
    }

    pub fn with_cross(mut self, d: usize, e: usize, h: Vec<S>) -> Result<Self> {
        if h.len() != self.dist.param_count() {
            return Err(Error::Domain(format!(
                "cross-derivative length {} does not match parameter count {}",
                h.len(),
                self.dist.param_count()
            )));
        }
        let key = if d <= e { (d, e) } else { (e, d) };
        self.cross.insert(key, h);
        Ok(self)
    }

    pub fn cross_vec(&self, d: usize, e: usize) -> Result<&Vec<S>> {
        let key = if d <= e { (d, e) } else { (e, d) };
        self.cross.get(&key).ok_or(Error::MissingCrossDerivative(d, e))
    }
}

/// R-sens: sqrt(α · gᵀ 𝓘(λ) g) with g = ∂λ/∂x_d.
pub fn rsens_local<S: Scalar>(s: &ParamSensitivity<S>, d: usize, alpha: f64) -> Result<S> {
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let g = s
        .grad
        .get(d)
        .ok_or(Error::DimensionOutOfRange { index: d, size: s.grad.len() })?;
    let fisher = fisher_information(&s.dist)?;
    let q = fisher.quadratic_form(g);
    Ok((S::from_f64_lossy(alpha) * q).sqrt())
}

/// R-sens₂: sqrt(α · hᵀ 𝓘(λ) h) with h = ∂²λ/∂x_d∂x_e.
pub fn rsens2_local<S: Scalar>(
    s: &ParamSensitivity<S>,
    d: usize,
    e: usize,
    alpha: f64,
) -> Result<S> {
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let h = s.cross_vec(d, e)?;
    let fisher = fisher_information(&s.dist)?;
    let q = fisher.quadratic_form(h);
    Ok((S::from_f64_lossy(alpha) * q).sqrt())
}

/// Finite-difference KL sensitivity: sqrt(2·KL(predict(x) ‖ predict(x + δ·e_d))) / δ.
pub fn kl_finite_difference<S, F>(predict: F, x: &[S], d: usize, delta: S) -> Result<S>
where
    S: Scalar,
    F: Fn(&[S]) -> Result<PredictiveDistribution<S>>,
{
    if delta <= S::zero() {
        return Err(Error::Domain("delta must be positive".into()));
    }
    if d >= x.len() {
        return Err(Error::DimensionOutOfRange { index: d, size: x.len() });
    }
    let p = predict(x)?;
    let mut shifted = x.to_vec();
    shifted[d] = shifted[d] + delta;
    let q = predict(&shifted)?;
    let kl = kl_divergence(&p, &q)?;
    Ok((S::from_f64_lossy(2.0) * kl).sqrt() / delta)
}

/// Mean of local sensitivity values over the empirical distribution.
pub fn aggregate_global<S: Scalar>(locals: &[S]) -> Result<S> {
    if locals.is_empty() {
        return Err(Error::EmptyInput("aggregate_global"));
    }
    let n = S::from_usize(locals.len()).expect("usize fits scalar");
    Ok(locals.iter().copied().sum::<S>() / n)
}

/// Per-feature (or per-pair) global scores with deterministic ranks.
#[derive(Debug, Clone, Serialize)]
pub struct ImportanceReport<K: Ord + Copy + Serialize> {
    pub method: String,
    pub unit: &'static str,
    pub scores: BTreeMap<K, f64>,
    /// 1 = most important; ties broken by ascending key.
    pub ranks: BTreeMap<K, usize>,
}

/// Rank keys by descending score; ties break by ascending key.
pub fn rank_features<K: Ord + Copy + Serialize>(
    method: &str,
    unit: &'static str,
    scores: &BTreeMap<K, f64>,
) -> Result<ImportanceReport<K>> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("rank_features"));
    }
    let mut keys: Vec<K> = scores.keys().copied().collect();
    // BTreeMap iteration is ascending by key, so equal scores keep key order
    keys.sort_by(|a, b| {
        scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(b))
    });
    let ranks = keys.iter().enumerate().map(|(i, &k)| (k, i + 1)).collect();
    Ok(ImportanceReport {
        method: method.to_string(),
        unit,
        scores: scores.clone(),
        ranks,
    })
}
