//! Main-effect ranking experiment: data generation, the oracle model with
//! synthetic predictive uncertainty, and the comparative-error table.

use super::{task_seed, EffectShape, MeanInterval, PredictorDist, RankMethod};
use crate::baselines::{self, DerivMode};
use crate::error::{Error, Result};
use crate::predictive::PredictiveDistribution;
use crate::sensitivity::{rank_features, rsens_local, ParamSensitivity};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct MainEffectConfig {
    pub n: usize,
    pub d: usize,
    pub shape: EffectShape,
    /// Strictly increasing; defines the true ranks unambiguously.
    pub amplitudes: Vec<f64>,
    pub predictor_dist: PredictorDist,
    pub noise_sd: f64,
    pub seed: u64,
}

impl MainEffectConfig {
    /// Amplitudes 1..D over D predictors (the benchmark default).
    pub fn standard(shape: EffectShape, predictor_dist: PredictorDist, seed: u64) -> Self {
        Self {
            n: 200,
            d: 10,
            shape,
            amplitudes: (1..=10).map(|a| a as f64).collect(),
            predictor_dist,
            noise_sd: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.d == 0 {
            return Err(Error::InvalidConfig("need N ≥ 2 and D ≥ 1".into()));
        }
        if self.amplitudes.len() != self.d {
            return Err(Error::InvalidConfig("amplitudes length must equal D".into()));
        }
        if !self.amplitudes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "amplitudes must be strictly increasing to define true ranks".into(),
            ));
        }
        if self.noise_sd < 0.0 {
            return Err(Error::InvalidConfig("noise SD must be non-negative".into()));
        }
        Ok(())
    }
}

pub(crate) fn draw_predictors(
    dist: PredictorDist,
    n: usize,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> DMatrix<f64> {
    match dist {
        PredictorDist::StudentT3 => {
            let t = StudentT::new(3.0).expect("valid dof");
            DMatrix::from_fn(n, d, |_, _| t.sample(rng))
        }
        PredictorDist::StdNormal => DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal)),
        PredictorDist::GaussMixture2 => DMatrix::from_fn(n, d, |_, _| {
            let z: f64 = rng.sample(StandardNormal);
            if rng.gen::<bool>() {
                z + 2.0
            } else {
                z - 2.0
            }
        }),
        PredictorDist::CorrelatedGauss { rho } => {
            let shared = rho.sqrt();
            let own = (1.0 - rho).sqrt();
            let mut x = DMatrix::zeros(n, d);
            for i in 0..n {
                let w: f64 = rng.sample(StandardNormal);
                for j in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    x[(i, j)] = shared * w + own * z;
                }
            }
            x
        }
    }
}

/// Generated data plus the true ranks (predictor with the largest amplitude
/// has rank 1).
pub fn gen_main_effect_data(
    cfg: &MainEffectConfig,
) -> Result<(DMatrix<f64>, DVector<f64>, BTreeMap<usize, usize>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x = draw_predictors(cfg.predictor_dist, cfg.n, cfg.d, &mut rng);
    let y = DVector::from_fn(cfg.n, |i, _| {
        let signal: f64 = (0..cfg.d)
            .map(|j| cfg.amplitudes[j] * cfg.shape.eval(x[(i, j)]))
            .sum();
        let noise: f64 = rng.sample(StandardNormal);
        signal + cfg.noise_sd * noise
    });
    let true_ranks: BTreeMap<usize, usize> = (0..cfg.d).map(|j| (j, cfg.d - j)).collect();
    Ok((x, y, true_ranks))
}

/// The known data-generating mean with a synthetic Gaussian predictive whose
/// variance grows quadratically away from the data center. The optional bias
/// multiplies each effect term by |A_bias,i||x_i|³ + 1, corrupting the mean
/// exactly where the variance is large.
#[derive(Debug, Clone)]
pub struct OracleModel {
    pub shape: EffectShape,
    pub amplitudes: Vec<f64>,
    pub bias_amplitudes: Option<Vec<f64>>,
    /// Training-data column means.
    pub center: Vec<f64>,
    /// varFn(x) = c0 + c1·‖x − center‖².
    pub c0: f64,
    pub c1: f64,
}

impl OracleModel {
    pub fn from_data(cfg: &MainEffectConfig, x: &DMatrix<f64>) -> Self {
        let center: Vec<f64> = (0..cfg.d).map(|j| x.column(j).mean()).collect();
        Self {
            shape: cfg.shape,
            amplitudes: cfg.amplitudes.clone(),
            bias_amplitudes: None,
            center,
            c0: cfg.noise_sd * cfg.noise_sd,
            c1: cfg.noise_sd * cfg.noise_sd / cfg.d as f64,
        }
    }

    pub fn with_bias(mut self, rng: &mut ChaCha8Rng) -> Self {
        let bias: Vec<f64> = self
            .amplitudes
            .iter()
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                0.02 * z
            })
            .collect();
        self.bias_amplitudes = Some(bias);
        self
    }

    fn term(&self, j: usize, xj: f64) -> f64 {
        let base = self.amplitudes[j] * self.shape.eval(xj);
        match &self.bias_amplitudes {
            Some(b) => base * (b[j].abs() * xj.abs().powi(3) + 1.0),
            None => base,
        }
    }

    fn term_deriv(&self, j: usize, xj: f64) -> f64 {
        let f = self.shape.eval(xj);
        let df = self.shape.deriv(xj);
        match &self.bias_amplitudes {
            Some(b) => {
                let ab = b[j].abs();
                let bias = ab * xj.abs().powi(3) + 1.0;
                // d|x|³/dx = 3x|x|
                self.amplitudes[j] * (df * bias + f * ab * 3.0 * xj * xj.abs())
            }
            None => self.amplitudes[j] * df,
        }
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        (0..self.amplitudes.len()).map(|j| self.term(j, x[j])).sum()
    }

    pub fn variance(&self, x: &[f64]) -> f64 {
        let dist2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(v, c)| (v - c) * (v - c))
            .sum();
        self.c0 + self.c1 * dist2
    }

    pub fn predict(&self, x: &[f64]) -> PredictiveDistribution<f64> {
        PredictiveDistribution::Gaussian { mean: self.mean(x), variance: self.variance(x) }
    }
}

/// Analytic predictive-parameter derivatives of the oracle at `x`.
pub fn oracle_sensitivity(model: &OracleModel, x: &[f64]) -> Result<ParamSensitivity<f64>> {
    let d = model.amplitudes.len();
    if x.len() != d {
        return Err(Error::Data(format!("x has {} coordinates, oracle expects {d}", x.len())));
    }
    let grad: Vec<Vec<f64>> = (0..d)
        .map(|j| vec![model.term_deriv(j, x[j]), 2.0 * model.c1 * (x[j] - model.center[j])])
        .collect();
    ParamSensitivity::new(model.predict(x), grad)
}

const PFI_PERMUTATIONS: usize = 5;

/// Global per-feature scores for one method on one realization.
fn method_scores(
    method: RankMethod,
    model: &OracleModel,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    seed: u64,
) -> Result<BTreeMap<usize, f64>> {
    let n = x.nrows();
    let d = x.ncols();
    let mut scores = BTreeMap::new();
    match method {
        RankMethod::Rsens => {
            let mut locals = vec![Vec::with_capacity(n); d];
            for i in 0..n {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                let s = oracle_sensitivity(model, &row)?;
                for (j, acc) in locals.iter_mut().enumerate() {
                    acc.push(rsens_local(&s, j, 1.0)?);
                }
            }
            for (j, acc) in locals.iter().enumerate() {
                scores.insert(j, acc.iter().sum::<f64>() / n as f64);
            }
        }
        RankMethod::Ead | RankMethod::Aed => {
            let mode = if method == RankMethod::Ead {
                DerivMode::Expected
            } else {
                DerivMode::Absolute
            };
            for j in 0..d {
                let grads: Vec<f64> = (0..n).map(|i| model.term_deriv(j, x[(i, j)])).collect();
                scores.insert(j, baselines::expected_derivative_importance(&grads, mode)?);
            }
        }
        RankMethod::Var => {
            // variance of one isolated effect term over the observed values
            for j in 0..d {
                let vals: Vec<f64> = (0..n).map(|i| model.term(j, x[(i, j)])).collect();
                let mean = vals.iter().sum::<f64>() / n as f64;
                scores.insert(
                    j,
                    vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64,
                );
            }
        }
        RankMethod::Pd => {
            for j in 0..d {
                scores.insert(
                    j,
                    baselines::pd_importance(
                        |p| model.mean(p),
                        x,
                        j,
                        baselines::PD_DEFAULT_GRID,
                    )?,
                );
            }
        }
        RankMethod::Pfi => {
            let targets: Vec<f64> = y.iter().copied().collect();
            for j in 0..d {
                scores.insert(
                    j,
                    baselines::pfi(
                        |p| Ok(model.predict(p)),
                        x,
                        &targets,
                        j,
                        PFI_PERMUTATIONS,
                        task_seed(seed, j as u64),
                    )?,
                );
            }
        }
    }
    Ok(scores)
}

#[derive(Debug, Clone)]
pub struct MethodComparative {
    pub method: RankMethod,
    /// error_method − error_rsens, averaged over replications.
    pub comparative: MeanInterval,
    /// Raw ranking error of the method itself.
    pub error: MeanInterval,
}

/// Comparative ranking errors against the R-sens baseline over seeded
/// replications. `imperfect` switches to the biased oracle variant.
pub fn run_main_effect_experiment(
    cfg: &MainEffectConfig,
    methods: &[RankMethod],
    replications: usize,
    imperfect: bool,
) -> Result<Vec<MethodComparative>> {
    cfg.validate()?;
    if replications == 0 {
        return Err(Error::InvalidConfig("need at least one replication".into()));
    }
    let per_rep: Vec<Result<BTreeMap<RankMethod, f64>>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = task_seed(cfg.seed, rep as u64);
            let rep_cfg = MainEffectConfig { seed: rep_seed, ..cfg.clone() };
            let (x, y, true_ranks) = gen_main_effect_data(&rep_cfg)?;
            let mut model = OracleModel::from_data(&rep_cfg, &x);
            if imperfect {
                let mut rng = ChaCha8Rng::seed_from_u64(task_seed(rep_seed, u64::MAX));
                model = model.with_bias(&mut rng);
            }
            let mut errors = BTreeMap::new();
            let rsens_scores = method_scores(RankMethod::Rsens, &model, &x, &y, rep_seed)?;
            let rsens_report = rank_features("rsens", "feature", &rsens_scores)?;
            let rsens_error = super::ranking_error(&rsens_report, &true_ranks)?;
            errors.insert(RankMethod::Rsens, rsens_error);
            for &m in methods {
                if m == RankMethod::Rsens {
                    continue;
                }
                let scores = method_scores(m, &model, &x, &y, rep_seed)?;
                let report = rank_features(&m.to_string(), "feature", &scores)?;
                errors.insert(m, super::ranking_error(&report, &true_ranks)?);
            }
            Ok(errors)
        })
        .collect();

    let mut tables: BTreeMap<RankMethod, Vec<f64>> = BTreeMap::new();
    let mut rsens_errors = Vec::with_capacity(replications);
    for rep in per_rep {
        let errors = rep?;
        rsens_errors.push(errors[&RankMethod::Rsens]);
        for (m, e) in errors {
            tables.entry(m).or_default().push(e);
        }
    }

    let mut out = Vec::new();
    for &m in methods {
        let errs = tables
            .get(&m)
            .ok_or_else(|| Error::InvalidConfig(format!("no results for method {m}")))?;
        let comparative: Vec<f64> =
            errs.iter().zip(&rsens_errors).map(|(e, r)| e - r).collect();
        out.push(MethodComparative {
            method: m,
            comparative: MeanInterval::from_samples(&comparative)?,
            error: MeanInterval::from_samples(errs)?,
        });
    }
    Ok(out)
}
