//! Command-line interface: dataset ranking, the simulation experiments,
//! cross-validated model comparison, ranking stability, and a self-check.
//!
//! Artifacts are deterministic: every CSV/JSON embeds the seed and the full
//! configuration, and re-running with identical inputs is byte-identical
//! (wall-clock timings go to stderr, never into artifacts).

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rsens::baselines::{self, DerivMode};
use rsens::dataset::{ingest_csv, Dataset, TargetKind};
use rsens::error::{Error, Result};
use rsens::gp::{
    gp_fit, gp_predictive, EQKernelParams, FittedGP, GpFitOptions, GpLikelihood, Kernel,
};
use rsens::harness::{
    self, bootstrap_entropy, cv_mlpd_experiment, run_interaction_experiment_with,
    run_main_effect_experiment, synthetic_concrete, CvConfig, EffectShape, InteractionConfig,
    MainEffectConfig, PairMethod, PredictorDist, RankMethod,
};
use rsens::sensitivity::{rank_features, rsens_local};
use serde_json::json;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "rsens", version, about = "Uncertainty-aware sensitivity analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Directory for the CSV/JSON artifacts.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Input CSV (header row, numeric cells).
    #[arg(long)]
    data: PathBuf,
    /// Name of the target column.
    #[arg(long)]
    target: String,
    /// Keep predictors on their raw scale.
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Rank features or feature pairs of a dataset under a fitted model.
    Rank {
        #[command(flatten)]
        data: DataArgs,
        /// Observation model: gaussian, probit, poisson, or blm.
        #[arg(long, default_value = "gaussian")]
        model: String,
        /// Comma-separated methods (feature: rsens,ead,aed,var,pd,pfi;
        /// pair: rsens2,eah,pd,hs).
        #[arg(long, default_value = "rsens")]
        methods: String,
        /// Ranking unit: feature or pair.
        #[arg(long, default_value = "feature")]
        unit: String,
        /// Rényi order of the sensitivity measure.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Main-effect ranking experiment on synthetic data.
    SimulateMain {
        /// Effect shape: x, x3, x-cos3x, sin3x, x-exp, exp-x2.
        #[arg(long, default_value = "x3")]
        shape: String,
        /// Predictor distribution: student-t3, normal, mixture, correlated.
        #[arg(long, default_value = "student-t3")]
        dist: String,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        /// Use the biased oracle variant.
        #[arg(long)]
        imperfect: bool,
        #[arg(long, default_value = "rsens,ead,aed")]
        methods: String,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Interaction-detection experiment on synthetic data.
    SimulateInteractions {
        /// Comma-separated sample sizes.
        #[arg(long, default_value = "50,100,200,300")]
        n: String,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[arg(long, default_value = "rsens2,eah")]
        methods: String,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Cross-validated MLPD over interaction-restricted GP models.
    Cv {
        /// Input CSV; omitted → built-in 103×7 synthetic benchmark.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "y")]
        target: String,
        /// Maximum number of interaction terms (evaluates 0..=k).
        #[arg(long, default_value_t = 5)]
        interactions: usize,
        #[arg(long, default_value_t = 10)]
        splits: usize,
        #[arg(long, default_value_t = 80)]
        train_size: usize,
        #[arg(long, default_value = "rsens2,eah")]
        methods: String,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Bootstrap stability (entropy) of pair rankings.
    Stability {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "y")]
        target: String,
        #[arg(long, default_value = "rsens2,eah")]
        methods: String,
        #[arg(long, default_value_t = 20)]
        bootstraps: usize,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run the built-in oracle and invariant checks.
    Check,
}

fn main() {
    if let Ok(threads) = std::env::var("RSENS_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let started = Instant::now();
    match run(cli.command) {
        Ok(()) => {
            eprintln!("done in {:.2?}", started.elapsed());
        }
        Err(e) => {
            println!(
                "{}",
                json!({ "status": "error", "message": e.to_string() })
            );
            std::process::exit(1);
        }
    }
}

struct CsvRow {
    method: String,
    key: String,
    score: f64,
    rank: Option<usize>,
    stderr: Option<f64>,
}

fn write_artifacts(
    out_dir: &Path,
    stem: &str,
    rows: &[CsvRow],
    config: serde_json::Value,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["method", "key", "score", "rank", "stderr"])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.key.clone(),
            format!("{:.12e}", r.score),
            r.rank.map(|v| v.to_string()).unwrap_or_default(),
            r.stderr.map(|v| format!("{v:.12e}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    let json_path = out_dir.join(format!("{stem}.json"));
    let meta = json!({
        "tool": "rsens",
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
    });
    let body = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::Data(format!("metadata serialization failed: {e}")))?;
    std::fs::write(&json_path, body + "\n")?;
    eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn parse_list<T, F: Fn(&str) -> Result<T>>(s: &str, parse: F) -> Result<Vec<T>> {
    s.split(',').map(|t| parse(t.trim())).collect()
}

fn load(data: &DataArgs, kind: TargetKind) -> Result<Dataset> {
    ingest_csv(&data.data, &data.target, kind, !data.no_standardize)
}

fn fit_model(ds: &Dataset, likelihood: GpLikelihood, seed: u64) -> Result<FittedGP> {
    let kernel = Kernel::ard(EQKernelParams::new(1.0, vec![1.5; ds.d()])?)?;
    let opts = GpFitOptions { restarts: 2, max_iters: 60, seed, ..Default::default() };
    gp_fit(&ds.x, &ds.y, likelihood, kernel, 0.1, &opts)
}

fn gp_feature_scores(
    fit: &FittedGP,
    ds: &Dataset,
    method: RankMethod,
    alpha: f64,
    seed: u64,
) -> Result<BTreeMap<usize, f64>> {
    let n = ds.n();
    let d = ds.d();
    let mut scores = BTreeMap::new();
    match method {
        RankMethod::Rsens => {
            let mut acc = vec![0.0; d];
            for i in 0..n {
                let row: Vec<f64> = ds.x.row(i).iter().copied().collect();
                let s = gp_predictive(fit, &row, 1)?;
                for (j, a) in acc.iter_mut().enumerate() {
                    *a += rsens_local(&s, j, alpha)?;
                }
            }
            for (j, a) in acc.iter().enumerate() {
                scores.insert(j, a / n as f64);
            }
        }
        RankMethod::Ead | RankMethod::Aed => {
            let mode = if method == RankMethod::Ead {
                DerivMode::Expected
            } else {
                DerivMode::Absolute
            };
            let mut grads = vec![Vec::with_capacity(n); d];
            for i in 0..n {
                let row: Vec<f64> = ds.x.row(i).iter().copied().collect();
                let s = gp_predictive(fit, &row, 1)?;
                for (j, g) in grads.iter_mut().enumerate() {
                    g.push(s.grad[j][0]);
                }
            }
            for (j, g) in grads.iter().enumerate() {
                scores.insert(j, baselines::expected_derivative_importance(g, mode)?);
            }
        }
        RankMethod::Var => {
            let mean_fn = |p: &[f64]| {
                gp_predictive(fit, p, 0).map(|s| s.dist.params()[0]).unwrap_or(f64::NAN)
            };
            for j in 0..d {
                scores.insert(j, baselines::var_importance(&mean_fn, &ds.x, j)?);
            }
        }
        RankMethod::Pd => {
            let mean_fn = |p: &[f64]| {
                gp_predictive(fit, p, 0).map(|s| s.dist.params()[0]).unwrap_or(f64::NAN)
            };
            for j in 0..d {
                scores.insert(
                    j,
                    baselines::pd_importance(&mean_fn, &ds.x, j, baselines::PD_DEFAULT_GRID)?,
                );
            }
        }
        RankMethod::Pfi => {
            let targets: Vec<f64> = ds.y.iter().copied().collect();
            let predict = |p: &[f64]| gp_predictive(fit, p, 0).map(|s| s.dist);
            for j in 0..d {
                scores.insert(
                    j,
                    baselines::pfi(&predict, &ds.x, &targets, j, 5, seed.wrapping_add(j as u64))?,
                );
            }
        }
    }
    Ok(scores)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Rank { data, model, methods, unit, alpha, seed, out } => {
            let config = json!({
                "command": "rank", "data": data.data, "target": data.target,
                "model": model, "methods": methods, "unit": unit,
                "alpha": alpha, "seed": seed,
                "standardize": !data.no_standardize,
            });
            let mut rows = Vec::new();
            match unit.as_str() {
                "feature" => {
                    let method_list = parse_list(&methods, RankMethod::parse)?;
                    if model == "blm" {
                        let ds = load(&data, TargetKind::Continuous)?;
                        let m = rsens::linear::blm_fit(&ds.x, &ds.y)?;
                        for method in method_list {
                            if method != RankMethod::Rsens {
                                return Err(Error::InvalidConfig(
                                    "blm ranking supports the rsens method".into(),
                                ));
                            }
                            let mut scores = BTreeMap::new();
                            for j in 0..ds.d() {
                                let mut acc = 0.0;
                                for i in 0..ds.n() {
                                    let row: Vec<f64> = ds.x.row(i).iter().copied().collect();
                                    acc += rsens::linear::blm_rsens_closed_form(&m, &row, j)?
                                        .total;
                                }
                                scores.insert(j, acc / ds.n() as f64);
                            }
                            push_feature_rows(&mut rows, &ds, method, &scores)?;
                        }
                    } else {
                        let (kind, lik) = parse_likelihood(&model)?;
                        let ds = load(&data, kind)?;
                        let fit = fit_model(&ds, lik, seed)?;
                        for method in method_list {
                            let scores = gp_feature_scores(&fit, &ds, method, alpha, seed)?;
                            push_feature_rows(&mut rows, &ds, method, &scores)?;
                        }
                    }
                }
                "pair" => {
                    let method_list = parse_list(&methods, PairMethod::parse)?;
                    let (kind, lik) = parse_likelihood(&model)?;
                    let ds = load(&data, kind)?;
                    let fit = fit_model(&ds, lik, seed)?;
                    let mut all_pairs = Vec::new();
                    for a in 0..ds.d() {
                        for b in (a + 1)..ds.d() {
                            all_pairs.push((a, b));
                        }
                    }
                    for method in method_list {
                        let scores = harness::interactions::pair_scores(
                            &fit, &ds.x, method, &all_pairs, 200,
                        )?;
                        let report = rank_features(&method.to_string(), "pair", &scores)?;
                        for (pair, score) in &report.scores {
                            rows.push(CsvRow {
                                method: method.to_string(),
                                key: format!(
                                    "{}:{}",
                                    ds.feature_names[pair.0], ds.feature_names[pair.1]
                                ),
                                score: *score,
                                rank: Some(report.ranks[pair]),
                                stderr: None,
                            });
                        }
                    }
                }
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown unit '{other}' (expected feature or pair)"
                    )))
                }
            }
            write_artifacts(&out.out_dir, "rank", &rows, config)
        }
        Command::SimulateMain { shape, dist, reps, imperfect, methods, seed, out } => {
            let shape = EffectShape::parse(&shape)?;
            let dist = PredictorDist::parse(&dist)?;
            let method_list = parse_list(&methods, RankMethod::parse)?;
            let cfg = MainEffectConfig::standard(shape, dist, seed);
            let config = json!({
                "command": "simulate-main", "shape": shape.to_string(),
                "dist": dist.to_string(), "reps": reps, "imperfect": imperfect,
                "methods": methods, "seed": seed,
                "n": cfg.n, "d": cfg.d, "noise_sd": cfg.noise_sd,
            });
            let results = run_main_effect_experiment(&cfg, &method_list, reps, imperfect)?;
            let rows: Vec<CsvRow> = results
                .iter()
                .map(|r| CsvRow {
                    method: r.method.to_string(),
                    key: "comparative_error".into(),
                    score: r.comparative.mean,
                    rank: None,
                    stderr: Some(r.comparative.half_width / 1.96),
                })
                .collect();
            write_artifacts(&out.out_dir, "simulate-main", &rows, config)
        }
        Command::SimulateInteractions { n, reps, methods, seed, out } => {
            let n_values = parse_list(&n, |t| {
                t.parse::<usize>()
                    .map_err(|_| Error::InvalidConfig(format!("bad sample size '{t}'")))
            })?;
            let method_list = parse_list(&methods, PairMethod::parse)?;
            let config = json!({
                "command": "simulate-interactions", "n": n_values, "reps": reps,
                "methods": methods, "seed": seed,
            });
            let cfg = InteractionConfig {
                n_values,
                replications: reps,
                seed,
                ..Default::default()
            };
            let results = run_interaction_experiment_with(&cfg, &method_list)?;
            let rows: Vec<CsvRow> = results
                .iter()
                .map(|r| CsvRow {
                    method: r.method.to_string(),
                    key: format!(
                        "n{}:x{}:x{}:{}",
                        r.n,
                        r.pair.0,
                        r.pair.1,
                        if r.is_true_pair { "true" } else { "false" }
                    ),
                    score: r.scaled.mean,
                    rank: None,
                    stderr: Some(r.scaled.half_width / 1.96),
                })
                .collect();
            write_artifacts(&out.out_dir, "simulate-interactions", &rows, config)
        }
        Command::Cv { data, target, interactions, splits, train_size, methods, seed, out } => {
            let ds = match &data {
                Some(path) => ingest_csv(path, &target, TargetKind::Continuous, true)?,
                None => synthetic_concrete(),
            };
            let method_list = parse_list(&methods, PairMethod::parse)?;
            let config = json!({
                "command": "cv", "data": data, "target": target,
                "interactions": interactions, "splits": splits,
                "train_size": train_size, "methods": methods, "seed": seed,
                "n": ds.n(), "d": ds.d(),
            });
            let cfg = CvConfig {
                interaction_counts: (0..=interactions).collect(),
                splits,
                train_size,
                seed,
                ..Default::default()
            };
            let res = cv_mlpd_experiment(&ds.x, &ds.y, &method_list, &cfg)?;
            let mut rows: Vec<CsvRow> = res
                .rows
                .iter()
                .map(|r| CsvRow {
                    method: r.method.to_string(),
                    key: format!("interactions{}", r.interaction_count),
                    score: r.mlpd.mean,
                    rank: None,
                    stderr: Some(r.mlpd.half_width / 1.96),
                })
                .collect();
            for (s, v) in res.per_split_full.iter().enumerate() {
                rows.push(CsvRow {
                    method: "full".into(),
                    key: format!("split{s}"),
                    score: *v,
                    rank: None,
                    stderr: None,
                });
            }
            if res.failed_splits > 0 {
                eprintln!("{} split(s) excluded after fit failures", res.failed_splits);
            }
            write_artifacts(&out.out_dir, "cv", &rows, config)
        }
        Command::Stability { data, target, methods, bootstraps, top_k, seed, out } => {
            let ds = match &data {
                Some(path) => ingest_csv(path, &target, TargetKind::Continuous, true)?,
                None => synthetic_concrete(),
            };
            let method_list = parse_list(&methods, PairMethod::parse)?;
            let config = json!({
                "command": "stability", "data": data, "target": target,
                "methods": methods, "bootstraps": bootstraps, "top_k": top_k,
                "seed": seed, "n": ds.n(), "d": ds.d(),
            });
            let mut all_pairs = Vec::new();
            for a in 0..ds.d() {
                for b in (a + 1)..ds.d() {
                    all_pairs.push((a, b));
                }
            }
            let mut rows = Vec::new();
            for method in method_list {
                let rank_fn = |idx: &[usize]| -> Result<Vec<(usize, usize)>> {
                    let xs = DMatrix::from_fn(idx.len(), ds.d(), |i, j| ds.x[(idx[i], j)]);
                    let ys = DVector::from_fn(idx.len(), |i, _| ds.y[idx[i]]);
                    let kernel = Kernel::ard(EQKernelParams::new(1.0, vec![1.5; ds.d()])?)?;
                    let opts =
                        GpFitOptions { restarts: 1, max_iters: 40, seed, ..Default::default() };
                    let fit = gp_fit(&xs, &ys, GpLikelihood::Gaussian, kernel, 0.1, &opts)?;
                    let scores =
                        harness::interactions::pair_scores(&fit, &xs, method, &all_pairs, 100)?;
                    let mut order: Vec<((usize, usize), f64)> = scores.into_iter().collect();
                    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                    Ok(order.into_iter().map(|(p, _)| p).collect())
                };
                let h = bootstrap_entropy(ds.n(), rank_fn, bootstraps, top_k, seed)?;
                rows.push(CsvRow {
                    method: method.to_string(),
                    key: "entropy".into(),
                    score: h,
                    rank: None,
                    stderr: None,
                });
            }
            write_artifacts(&out.out_dir, "stability", &rows, config)
        }
        Command::Check => run_check(),
    }
}

fn parse_likelihood(model: &str) -> Result<(TargetKind, GpLikelihood)> {
    Ok(match model {
        "gaussian" => (TargetKind::Continuous, GpLikelihood::Gaussian),
        "probit" => (TargetKind::Binary, GpLikelihood::Probit),
        "poisson" => (TargetKind::Count, GpLikelihood::Poisson),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown model '{other}' (expected gaussian, probit, poisson, or blm)"
            )))
        }
    })
}

fn push_feature_rows(
    rows: &mut Vec<CsvRow>,
    ds: &Dataset,
    method: RankMethod,
    scores: &BTreeMap<usize, f64>,
) -> Result<()> {
    let report = rank_features(&method.to_string(), "feature", scores)?;
    for (j, score) in &report.scores {
        rows.push(CsvRow {
            method: method.to_string(),
            key: ds.feature_names[*j].clone(),
            score: *score,
            rank: Some(report.ranks[j]),
            stderr: None,
        });
    }
    Ok(())
}

/// Fast internal consistency checks, one pass/fail line each.
fn run_check() -> Result<()> {
    use rsens::predictive::{fisher_information, kl_divergence, PredictiveDistribution};
    let mut failures = 0;
    let mut check = |name: &str, ok: bool| {
        println!("{}: {}", name, if ok { "pass" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    let std_normal: rsens::Predictive = PredictiveDistribution::Gaussian { mean: 0.0, variance: 1.0 };
    let f = fisher_information(&std_normal)?;
    check(
        "gaussian fisher reference",
        (f.get(0, 0) - 1.0).abs() < 1e-12 && (f.get(1, 1) - 0.5).abs() < 1e-12,
    );

    let shifted: rsens::Predictive = PredictiveDistribution::Gaussian { mean: 7.3, variance: 1.0 };
    let f1 = fisher_information(&shifted)?;
    check("location-shift invariance", (f1.get(0, 0) - f.get(0, 0)).abs() < 1e-14);

    let kl = kl_divergence(
        &PredictiveDistribution::Gaussian { mean: 1.0, variance: 1.0 },
        &std_normal,
    )?;
    check("gaussian kl reference", (kl - 0.5).abs() < 1e-12);

    let ds = synthetic_concrete();
    check("benchmark dataset shape", ds.n() == 103 && ds.d() == 7);

    let x = DMatrix::from_fn(40, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
    let y = DVector::from_fn(40, |i, _| x[(i, 0)] * 2.0 - x[(i, 1)]);
    let m = rsens::linear::blm_fit(&x, &y)?;
    let q = [0.4, -0.2];
    let s = rsens::linear::blm_sensitivity(&m, &q)?;
    let closed = rsens::linear::blm_rsens_closed_form(&m, &q, 0)?.total;
    let generic = rsens_local(&s, 0, 1.0)?;
    check("linear closed form vs pipeline", (closed - generic).abs() < 1e-10);

    if failures > 0 {
        Err(Error::InvalidConfig(format!("{failures} check(s) failed")))
    } else {
        Ok(())
    }
}
