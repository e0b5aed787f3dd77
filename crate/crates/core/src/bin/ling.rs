use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ling_core::baselines::{pcr_fit, ridge_exact, svrg_ridge, tune_svrg_step, RidgeMode, SvrgConfig};
use ling_core::bench::{
    default_lambda, emit_metadata, emit_results, metadata_path, run_experiment, ExperimentConfig, SolverKind,
    DEFAULT_LAMBDA_SCALE,
};
use ling_core::datagen::{gen_synthetic, ModelId};
use ling_core::dataset::{load_dataset, train_test_split, Dataset, Task};
use ling_core::gd::{ridge_gd, ridge_objective, GdConfig};
use ling_core::ling::{ling_fit, BasisSource, LingConfig};
use ling_core::randsvd::{exact_top_svd, randomized_top_svd, DEFAULT_POWER_ITERS};
use ling_core::risk::{
    evaluate_metric, ling_risk_analytic, monte_carlo_risk, realized_risk, rr_risk_analytic, MetricKind,
};
use ling_core::{FlopLedger, Matrix};

#[derive(Parser)]
#[command(name = "ling", version, about = "Two-stage ridge regression with FLOP accounting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated design and response.
    Gen(GenArgs),
    /// Fit one solver and report its cost and accuracy.
    Fit(FitArgs),
    /// Compare analytic and Monte-Carlo risk on a simulated design.
    Risk(RiskArgs),
    /// Compare randomized and exact top singular values.
    Svd(SvdArgs),
    /// Run a benchmark sweep described by a TOML file.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SyntheticArgs {
    /// Simulated model (1 steep, 2 flat, 3 bimodal).
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=3))]
    model: u8,
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 300)]
    p: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    data: SyntheticArgs,
    /// Output file; features followed by the response column.
    #[arg(long)]
    out: PathBuf,
    /// Also write the true coefficients, one per line.
    #[arg(long)]
    beta_out: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    /// Delimited feature file. Without it a simulated design is used.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Single-column label file; otherwise the last feature column.
    #[arg(long, requires = "features")]
    labels: Option<PathBuf>,
    /// Hold out all rows beyond this many for testing.
    #[arg(long, requires = "features")]
    n_train: Option<usize>,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[command(flatten)]
    synthetic: SyntheticArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Exact,
    Gd,
    Pcr,
    Ling,
    Svrg,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = Solver::Ling)]
    solver: Solver,
    /// Fixed λ; defaults to `lambda-scale·‖X‖²_F/(np)`.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_SCALE)]
    lambda_scale: f64,
    /// PCR rank.
    #[arg(long, default_value_t = 10)]
    k1: usize,
    /// Gradient descent iterations.
    #[arg(long, default_value_t = 10)]
    n1: usize,
    /// LING stage-one rank.
    #[arg(long, default_value_t = 10)]
    k2: usize,
    /// LING stage-two iterations.
    #[arg(long, default_value_t = 10)]
    n2: usize,
    /// SVRG passes.
    #[arg(long, default_value_t = 10)]
    passes: usize,
    /// SVRG step; tuned on a held-out fold when omitted.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_POWER_ITERS)]
    power_iters: usize,
    /// Seed for the sketch and SVRG sampling.
    #[arg(long, default_value_t = 0)]
    fit_seed: u64,
    /// Shrink LING stage-one coefficients.
    #[arg(long)]
    shrink: bool,
    /// Write the fitted coefficients, one per line.
    #[arg(long)]
    coef_out: Option<PathBuf>,
}

#[derive(Args)]
struct RiskArgs {
    #[command(flatten)]
    data: SyntheticArgs,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_SCALE)]
    lambda_scale: f64,
    /// Stage-one ranks to evaluate.
    #[arg(long, value_delimiter = ',', default_value = "0,5,20")]
    k2: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    draws: usize,
    /// Stage-two iteration cap; iteration stops earlier once converged.
    #[arg(long, default_value_t = 5000)]
    n2: usize,
}

#[derive(Args)]
struct SvdArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_POWER_ITERS)]
    power_iters: usize,
    #[arg(long, default_value_t = 0)]
    fit_seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Results CSV; metadata goes to the matching `.meta.toml`.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Fit(a) => fit(a),
        Command::Risk(a) => risk(a),
        Command::Svd(a) => svd(a),
        Command::Bench(a) => bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn model_id(a: &SyntheticArgs) -> Result<ModelId> {
    Ok(ModelId::try_from(a.model)?)
}

fn write_column(path: &Path, values: &[f64]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for v in values {
        writeln!(w, "{v:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

fn gen(a: GenArgs) -> Result<()> {
    let mut truth = gen_synthetic(model_id(&a.data)?, a.data.n, a.data.p, a.data.seed)?;
    truth.sigma = a.data.sigma;
    let y = truth.sample(a.data.seed)?;
    let provenance = format!("model {} n={} p={} seed={} sigma={}", a.data.model, a.data.n, a.data.p, a.data.seed, a.data.sigma);
    let data = Dataset::new(truth.x.clone(), y, Task::Regression, provenance)?;
    data.save(&a.out)?;
    if let Some(path) = &a.beta_out {
        write_column(path, &truth.beta)?;
    }
    println!("wrote {}x{} design to {}", data.n(), data.p(), a.out.display());
    Ok(())
}

/// Training data plus how the fit is scored.
struct Problem {
    x: Matrix,
    y: Vec<f64>,
    beta: Option<Vec<f64>>,
    test: Option<(Matrix, Vec<f64>, MetricKind)>,
}

fn load_problem(a: &DataArgs) -> Result<Problem> {
    match &a.features {
        None => {
            let s = &a.synthetic;
            let mut truth = gen_synthetic(model_id(s)?, s.n, s.p, s.seed)?;
            truth.sigma = s.sigma;
            let y = truth.sample(s.seed)?;
            Ok(Problem {
                x: truth.x,
                y,
                beta: Some(truth.beta),
                test: None,
            })
        }
        Some(path) => {
            let data = load_dataset(path, a.labels.as_deref())?;
            let kind = match data.task {
                Task::BinaryClassification => MetricKind::ClassificationError,
                Task::Regression => MetricKind::Mse,
            };
            match a.n_train {
                None => Ok(Problem {
                    x: data.x,
                    y: data.y,
                    beta: None,
                    test: None,
                }),
                Some(n_train) => {
                    let (train, test) = train_test_split(&data, n_train, a.split_seed)?;
                    Ok(Problem {
                        x: train.x,
                        y: train.y,
                        beta: None,
                        test: Some((test.x, test.y, kind)),
                    })
                }
            }
        }
    }
}

fn fit(a: FitArgs) -> Result<()> {
    let prob = load_problem(&a.data)?;
    let (x, y) = (&prob.x, &prob.y);
    let lambda = a.lambda.unwrap_or_else(|| default_lambda(x, a.lambda_scale));
    let mut ledger = FlopLedger::new();
    let (label, train_pred, beta) = match a.solver {
        Solver::Exact => {
            let beta = ridge_exact(x, y, lambda, RidgeMode::Auto, &mut ledger)?;
            (SolverKind::Exact, x.matvec(&beta)?, beta)
        }
        Solver::Gd => {
            let (beta, _) = ridge_gd(x, y, &GdConfig::new(a.n1, lambda), &mut ledger)?;
            (SolverKind::Gd, x.matvec(&beta)?, beta)
        }
        Solver::Pcr => {
            let m = pcr_fit(x, y, a.k1, a.power_iters, a.fit_seed, BasisSource::Randomized, &mut ledger)?;
            (SolverKind::Pcr, m.training_predictions()?, m.beta_effective)
        }
        Solver::Ling => {
            let cfg = LingConfig::new(lambda, a.k2, a.n2)
                .with_power_iters(a.power_iters)
                .with_seed(a.fit_seed)
                .with_shrink(a.shrink);
            let (m, _) = ling_fit(x, y, &cfg, &mut ledger)?;
            (SolverKind::Ling, m.training_predictions(x)?, m.beta_effective)
        }
        Solver::Svrg => {
            let step = match a.step {
                Some(s) => s,
                None => tune_svrg_step(x, y, lambda, a.passes, a.fit_seed)?,
            };
            println!("svrg step: {step:e}");
            let (beta, _) = svrg_ridge(x, y, &SvrgConfig::new(a.passes, step, lambda, a.fit_seed), &mut ledger)?;
            (SolverKind::Svrg, x.matvec(&beta)?, beta)
        }
    };

    println!("solver: {}", label.as_str());
    println!("n = {}, p = {}, lambda = {lambda:e}", x.rows(), x.cols());
    println!("flops: {}", ledger.total());
    for (phase, flops) in ledger.phases() {
        println!("  {phase:<8} {flops}");
    }
    println!("objective: {:e}", ridge_objective(x, y, lambda, &beta)?);
    println!("train mse: {:e}", evaluate_metric(&train_pred, y, MetricKind::Mse)?);
    if let Some(truth) = &prob.beta {
        println!("risk: {:e}", realized_risk(x, truth, &train_pred)?);
    }
    if let Some((xt, yt, kind)) = &prob.test {
        let name = match kind {
            MetricKind::Mse => "test mse",
            MetricKind::ClassificationError => "test classification error",
        };
        println!("{name}: {:e}", evaluate_metric(&xt.matvec(&beta)?, yt, *kind)?);
    }
    if let Some(path) = &a.coef_out {
        write_column(path, &beta)?;
    }
    Ok(())
}

fn risk(a: RiskArgs) -> Result<()> {
    let mut truth = gen_synthetic(model_id(&a.data)?, a.data.n, a.data.p, a.data.seed)?;
    truth.sigma = a.data.sigma;
    let lambda = a.lambda.unwrap_or_else(|| default_lambda(&truth.x, a.lambda_scale));
    let gt = truth.ground_truth(lambda)?;
    println!("n = {}, p = {}, lambda = {lambda:e}, draws = {}", truth.n(), truth.p(), a.draws);
    println!("{:<10} {:>14} {:>14} {:>12}", "estimator", "analytic", "monte-carlo", "std-error");

    let rr = rr_risk_analytic(&gt);
    let mc = monte_carlo_risk(&truth.x, &truth.beta, truth.sigma, a.draws, a.data.seed, |x, y| {
        let b = ridge_exact(x, y, lambda, RidgeMode::Auto, &mut FlopLedger::new())?;
        x.matvec(&b)
    })?;
    println!("{:<10} {:>14.6e} {:>14.6e} {:>12.3e}", "ridge", rr, mc.mean, mc.std_error);

    for &k2 in &a.k2 {
        if k2 > truth.p() {
            bail!("k2 = {k2} exceeds p = {}", truth.p());
        }
        let analytic = ling_risk_analytic(&gt, k2)?;
        let cfg = LingConfig::new(lambda, k2, a.n2)
            .with_basis(BasisSource::Exact)
            .with_shrink(true)
            .with_stop_tol(1e-10);
        let mc = monte_carlo_risk(&truth.x, &truth.beta, truth.sigma, a.draws, a.data.seed, |x, y| {
            let (m, _) = ling_fit(x, y, &cfg, &mut FlopLedger::new())?;
            m.training_predictions(x)
        })?;
        let name = format!("ling k2={k2}");
        println!("{name:<10} {analytic:>14.6e} {:>14.6e} {:>12.3e}", mc.mean, mc.std_error);
    }
    Ok(())
}

fn svd(a: SvdArgs) -> Result<()> {
    let prob = load_problem(&a.data)?;
    let mut led_r = FlopLedger::new();
    let r = randomized_top_svd(&prob.x, a.k, a.power_iters, a.fit_seed, &mut led_r)?;
    let mut led_e = FlopLedger::new();
    let e = exact_top_svd(&prob.x, a.k, &mut led_e)?;
    println!("randomized flops: {}, exact flops: {}", led_r.total(), led_e.total());
    println!("{:>4} {:>14} {:>14} {:>10}", "j", "randomized", "exact", "rel-err");
    for (j, (dr, de)) in r.d.iter().zip(&e.d).enumerate() {
        let rel = if *de > 0.0 { (dr - de).abs() / de } else { (dr - de).abs() };
        println!("{j:>4} {dr:>14.6e} {de:>14.6e} {rel:>10.2e}");
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let cfg = ExperimentConfig::from_file(&a.config)?;
    let out = run_experiment(&cfg)?;
    emit_results(&out.rows, &a.out)?;
    let meta = metadata_path(&a.out);
    emit_metadata(&out.metadata, &meta)?;
    let failed = out.rows.iter().filter(|r| !r.metric.is_finite()).count();
    println!("wrote {} rows to {} ({} failed)", out.rows.len(), a.out.display(), failed);
    println!("metadata: {}", meta.display());
    Ok(())
}
