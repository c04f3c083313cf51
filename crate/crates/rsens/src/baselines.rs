//! Reference importance methods used for comparisons: derivative and
//! Hessian expectations, slice variance of the predictive mean, partial
//! dependence, permutation importance, and the Friedman–Popescu H-statistic.

use crate::error::{Error, Result};
use crate::predictive::PredictiveDistribution;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivMode {
    /// Mean of absolute values.
    Expected,
    /// Absolute value of the mean.
    Absolute,
}

/// EAD (`Expected`) or AED (`Absolute`) over per-observation derivatives.
pub fn expected_derivative_importance(grads: &[f64], mode: DerivMode) -> Result<f64> {
    if grads.is_empty() {
        return Err(Error::EmptyInput("expected_derivative_importance"));
    }
    let n = grads.len() as f64;
    Ok(match mode {
        DerivMode::Expected => grads.iter().map(|g| g.abs()).sum::<f64>() / n,
        DerivMode::Absolute => (grads.iter().sum::<f64>() / n).abs(),
    })
}

/// EAH/AEH pairwise analogue over per-observation cross-derivatives.
pub fn expected_hessian_importance(hessians: &[f64], mode: DerivMode) -> Result<f64> {
    if hessians.is_empty() {
        return Err(Error::EmptyInput("expected_hessian_importance"));
    }
    expected_derivative_importance(hessians, mode)
}

/// Empirical variance over observations of the predictive mean as a function
/// of x_d, with the remaining coordinates left at each observation's own
/// values. This is one of several possible conditioning schemes; the
/// slice-at-own-values choice keeps cost at N evaluations.
pub fn var_importance<F>(mean_fn: F, data: &DMatrix<f64>, d: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let n = data.nrows();
    if n < 2 {
        return Err(Error::Data("variance importance needs at least 2 rows".into()));
    }
    if d >= data.ncols() {
        return Err(Error::DimensionOutOfRange { index: d, size: data.ncols() });
    }
    let vals: Vec<f64> = (0..n)
        .map(|i| {
            let row: Vec<f64> = data.row(i).iter().copied().collect();
            mean_fn(&row)
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    Ok(vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64)
}

fn pd_values<F>(mean_fn: &F, data: &DMatrix<f64>, dims: &[usize], grid: &[Vec<f64>]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let n = data.nrows();
    grid.iter()
        .map(|point| {
            let mut acc = 0.0;
            for i in 0..n {
                let mut row: Vec<f64> = data.row(i).iter().copied().collect();
                for (k, &dim) in dims.iter().enumerate() {
                    row[dim] = point[k];
                }
                acc += mean_fn(&row);
            }
            acc / n as f64
        })
        .collect()
}

fn quantile_grid(data: &DMatrix<f64>, d: usize, grid_size: usize) -> Vec<f64> {
    let mut col: Vec<f64> = data.column(d).iter().copied().collect();
    col.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (0..grid_size)
        .map(|k| {
            let q = k as f64 / (grid_size - 1) as f64;
            let idx = (q * (col.len() - 1) as f64).round() as usize;
            col[idx]
        })
        .collect()
}

pub const PD_DEFAULT_GRID: usize = 10;

/// Standard deviation of the partial-dependence function of feature `d`
/// over a quantile grid of its observed values.
pub fn pd_importance<F>(mean_fn: F, data: &DMatrix<f64>, d: usize, grid_size: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if data.nrows() == 0 {
        return Err(Error::EmptyInput("pd_importance"));
    }
    if grid_size < 2 {
        return Err(Error::InvalidConfig("grid size must be at least 2".into()));
    }
    if d >= data.ncols() {
        return Err(Error::DimensionOutOfRange { index: d, size: data.ncols() });
    }
    let grid: Vec<Vec<f64>> = quantile_grid(data, d, grid_size).into_iter().map(|v| vec![v]).collect();
    let pd = pd_values(&mean_fn, data, &[d], &grid);
    let mean = pd.iter().sum::<f64>() / pd.len() as f64;
    Ok((pd.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / pd.len() as f64).sqrt())
}

/// Pairwise partial-dependence importance: SD of the centered cross PD
/// surface minus the additive parts, over the product grid.
pub fn pd_pair_importance<F>(
    mean_fn: F,
    data: &DMatrix<f64>,
    d: usize,
    e: usize,
    grid_size: usize,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let (num, _) = h_statistic_parts(&mean_fn, data, d, e, grid_size)?;
    Ok((num / (grid_size * grid_size) as f64).sqrt())
}

/// Mean decrease in log predictive density when column `d` is permuted.
/// Can be negative by sampling noise; zero in expectation for a null feature.
pub fn pfi<F>(
    predict_dist: F,
    data: &DMatrix<f64>,
    targets: &[f64],
    d: usize,
    permutations: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<PredictiveDistribution<f64>>,
{
    let n = data.nrows();
    if n < 2 {
        return Err(Error::Data("permutation importance needs at least 2 rows".into()));
    }
    if targets.len() != n {
        return Err(Error::Data("targets length does not match data rows".into()));
    }
    if d >= data.ncols() {
        return Err(Error::DimensionOutOfRange { index: d, size: data.ncols() });
    }
    if permutations == 0 {
        return Err(Error::InvalidConfig("need at least one permutation".into()));
    }
    let base: f64 = {
        let mut acc = 0.0;
        for i in 0..n {
            let row: Vec<f64> = data.row(i).iter().copied().collect();
            acc += predict_dist(&row)?.log_density(targets[i]);
        }
        acc / n as f64
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drop_sum = 0.0;
    for _ in 0..permutations {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut acc = 0.0;
        for i in 0..n {
            let mut row: Vec<f64> = data.row(i).iter().copied().collect();
            row[d] = data[(perm[i], d)];
            acc += predict_dist(&row)?.log_density(targets[i]);
        }
        drop_sum += base - acc / n as f64;
    }
    Ok(drop_sum / permutations as f64)
}

fn h_statistic_parts<F>(
    mean_fn: &F,
    data: &DMatrix<f64>,
    d: usize,
    e: usize,
    grid_size: usize,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    if data.nrows() < 2 {
        return Err(Error::Data("H-statistic needs at least 2 rows".into()));
    }
    let dc = data.ncols();
    if d >= dc || e >= dc {
        return Err(Error::DimensionOutOfRange { index: d.max(e), size: dc });
    }
    let gd = quantile_grid(data, d, grid_size);
    let ge = quantile_grid(data, e, grid_size);
    let pd_d = pd_values(mean_fn, data, &[d], &gd.iter().map(|v| vec![*v]).collect::<Vec<_>>());
    let pd_e = pd_values(mean_fn, data, &[e], &ge.iter().map(|v| vec![*v]).collect::<Vec<_>>());
    let mut grid_de = Vec::with_capacity(grid_size * grid_size);
    for vd in &gd {
        for ve in &ge {
            grid_de.push(vec![*vd, *ve]);
        }
    }
    let pd_de = pd_values(mean_fn, data, &[d, e], &grid_de);

    let center = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| x - m).collect::<Vec<f64>>()
    };
    let cd = center(&pd_d);
    let ce = center(&pd_e);
    let cde = center(&pd_de);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, vd) in cd.iter().enumerate() {
        for (j, ve) in ce.iter().enumerate() {
            let joint = cde[i * grid_size + j];
            num += (joint - vd - ve).powi(2);
            den += joint * joint;
        }
    }
    Ok((num, den))
}

/// Friedman–Popescu interaction strength H ∈ [0, 1] for the pair (d, e),
/// computed from centered partial dependences on a quantile product grid.
/// A zero denominator (no joint variation at all) is defined as 0.
pub fn h_statistic<F>(mean_fn: F, data: &DMatrix<f64>, d: usize, e: usize, grid_size: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let (num, den) = h_statistic_parts(&mean_fn, data, d, e, grid_size)?;
    if den <= 1e-300 {
        return Ok(0.0);
    }
    Ok((num / den).sqrt().min(1.0))
}
