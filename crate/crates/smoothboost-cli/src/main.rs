//! CLI over the smoothboost library.
//!
//! Exit codes: 0 success (including divergence-truncated trajectories, which
//! are reported as a warning), 2 input/parse errors, 3 numerical or
//! construction errors.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use smoothboost::boost::{predict_at, run_boost, BoostConfig, BoostVariant};
use smoothboost::error::Error;
use smoothboost::kernel::{KernelFamily, KernelSpec};
use smoothboost::sample::DesignSample;
use smoothboost::sim::{run_scenario, SimScenario};
use smoothboost::smoother::{build_smoother, SmootherSpec};
use smoothboost::spectral::analyze;
use smoothboost::stopping::{select, SelectionResult, StoppingRule};

#[derive(Parser)]
#[command(
    name = "smoothboost",
    about = "Iterative bias correction of linear smoothers: fit, boost, diagnose, select, simulate",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One-pass smoother fit (the k = 1 column of the boosting path)
    Fit(FitCmd),
    /// Run the bias-correction recursion; optionally select k with a rule
    Boost(BoostCmd),
    /// Singular values of I − μS and the convergence classification
    Spectrum(SpectrumCmd),
    /// Run boosting and report the selected stopping iteration
    Select(SelectCmd),
    /// Run a Monte-Carlo scenario from a JSON description
    Simulate(SimulateCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum SmootherKindArg {
    Kernel,
    Knn,
    Spline,
    Bin,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Gaussian,
    Epanechnikov,
    Uniform,
    Triangular,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Gaussian => KernelFamily::Gaussian,
            KernelArg::Epanechnikov => KernelFamily::Epanechnikov,
            KernelArg::Uniform => KernelFamily::Uniform,
            KernelArg::Triangular => KernelFamily::Triangular,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Plain,
    Symmetrized,
}

impl From<VariantArg> for BoostVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Plain => BoostVariant::Plain,
            VariantArg::Symmetrized => BoostVariant::Symmetrized,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Aic,
    AicLiteral,
    Aicc,
    Gcv,
    Cv,
    Loocv,
    Split,
}

#[derive(Args)]
struct SmootherArgs {
    /// Smoother kind
    #[arg(long, value_enum)]
    smoother: SmootherKindArg,
    /// Kernel family (kernel smoother only)
    #[arg(long, value_enum, default_value = "gaussian")]
    kernel: KernelArg,
    /// Kernel bandwidth h > 0
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Neighbor count K (knn smoother only)
    #[arg(long)]
    neighbors: Option<usize>,
    /// Spline penalty λ > 0
    #[arg(long)]
    lambda: Option<f64>,
    /// Bin count (bin smoother only)
    #[arg(long)]
    bins: Option<usize>,
}

impl SmootherArgs {
    fn to_spec(&self) -> Result<SmootherSpec, Error> {
        match self.smoother {
            SmootherKindArg::Kernel => {
                let h = self.bandwidth.ok_or_else(|| {
                    Error::InvalidInput("--bandwidth is required for --smoother kernel".into())
                })?;
                Ok(SmootherSpec::Kernel(KernelSpec::new(self.kernel.into(), h)?))
            }
            SmootherKindArg::Knn => {
                let k = self.neighbors.ok_or_else(|| {
                    Error::InvalidInput("--neighbors is required for --smoother knn".into())
                })?;
                Ok(SmootherSpec::Knn { neighbors: k })
            }
            SmootherKindArg::Spline => {
                let l = self.lambda.ok_or_else(|| {
                    Error::InvalidInput("--lambda is required for --smoother spline".into())
                })?;
                Ok(SmootherSpec::Spline { lambda: l })
            }
            SmootherKindArg::Bin => {
                let b = self.bins.ok_or_else(|| {
                    Error::InvalidInput("--bins is required for --smoother bin".into())
                })?;
                Ok(SmootherSpec::Bin { num_bins: b })
            }
        }
    }
}

#[derive(Args)]
struct BoostArgs {
    /// Convergence factor μ ∈ (0, 1]
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Iteration budget M
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Boost S itself or the symmetrized SSᵗ
    #[arg(long, value_enum, default_value = "plain")]
    variant: VariantArg,
    /// Abort once ‖R_k‖ exceeds this multiple of ‖y‖
    #[arg(long, default_value_t = 1e6)]
    divergence_guard: f64,
}

impl BoostArgs {
    fn to_config(&self) -> BoostConfig {
        let mut cfg = BoostConfig::new(self.max_iter)
            .with_mu(self.mu)
            .with_variant(self.variant.into());
        cfg.divergence_guard = self.divergence_guard;
        cfg
    }
}

#[derive(Args)]
struct RuleArgs {
    /// Stopping rule
    #[arg(long, value_enum)]
    rule: Option<RuleArg>,
    /// Number of cross-validation folds (rule = cv)
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Held-out fraction (rule = split)
    #[arg(long, default_value_t = 0.5)]
    split_fraction: f64,
    /// Seed for randomized rules and scenario overrides
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl RuleArgs {
    fn to_rule(&self, n: usize) -> Result<Option<StoppingRule>, Error> {
        let Some(rule) = self.rule else {
            return Ok(None);
        };
        let rule = match rule {
            RuleArg::Aic => StoppingRule::Aic,
            RuleArg::AicLiteral => StoppingRule::AicLiteral,
            RuleArg::Aicc => StoppingRule::Aicc,
            RuleArg::Gcv => StoppingRule::Gcv,
            RuleArg::Loocv => StoppingRule::Cv { fold_size: 1 },
            RuleArg::Cv => {
                if self.folds < 2 || self.folds > n {
                    return Err(Error::InvalidInput(format!(
                        "--folds must lie in 2..={n}, got {}",
                        self.folds
                    )));
                }
                StoppingRule::Cv {
                    fold_size: n.div_ceil(self.folds),
                }
            }
            RuleArg::Split => StoppingRule::DataSplit {
                test_fraction: self.split_fraction,
                seed: self.seed,
            },
        };
        Ok(Some(rule))
    }
}

#[derive(Args)]
struct FitCmd {
    /// Input CSV with header x,y
    input: PathBuf,
    #[command(flatten)]
    smoother: SmootherArgs,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct BoostCmd {
    input: PathBuf,
    #[command(flatten)]
    smoother: SmootherArgs,
    #[command(flatten)]
    boost: BoostArgs,
    #[command(flatten)]
    rule: RuleArgs,
    /// Also write fitted values per checkpoint (wide CSV)
    #[arg(long)]
    fitted_csv: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumCmd {
    input: PathBuf,
    #[command(flatten)]
    smoother: SmootherArgs,
    /// Convergence factor μ used in I − μS
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, value_enum, default_value = "plain")]
    variant: VariantArg,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SelectCmd {
    input: PathBuf,
    #[command(flatten)]
    smoother: SmootherArgs,
    #[command(flatten)]
    boost: BoostArgs,
    #[command(flatten)]
    rule: RuleArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateCmd {
    /// Scenario description (JSON)
    scenario: PathBuf,
    /// Parallel worker threads for replications
    #[arg(long)]
    jobs: Option<usize>,
    /// Override the scenario's replication count (smoke tests)
    #[arg(long)]
    replications: Option<usize>,
    /// Override the scenario's base seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Csv(_) | Error::InvalidInput(_) => 2,
        _ => 3,
    }
}

fn out_file(dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn load_sample(path: &Path) -> Result<DesignSample, Error> {
    DesignSample::from_csv_reader(File::open(path)?)
}

fn selection_json(res: &SelectionResult, fitted: Option<&DVector<f64>>) -> serde_json::Value {
    let scores: serde_json::Map<String, serde_json::Value> = res
        .scores
        .iter()
        .map(|(k, v)| (k.to_string(), serde_json::json!(v)))
        .collect();
    let mut obj = serde_json::json!({
        "rule": res.rule.name(),
        "selected_k": res.selected_k,
        "sigma_hat_sq": res.sigma_hat_sq_at_selected,
        "warnings": res.warnings,
        "scores": scores,
    });
    if let Some(f) = fitted {
        obj["fitted_at_selected"] = serde_json::json!(f.as_slice());
    }
    obj
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Fit(cmd) => {
            let sample = load_sample(&cmd.input)?;
            let spec = cmd.smoother.to_spec()?;
            let sm = build_smoother(&sample, &spec)?;
            let y = DVector::from_column_slice(sample.y());
            let fitted = sm.matrix() * &y;
            let mut w = out_file(&cmd.out, "fitted.csv")?;
            use std::io::Write;
            writeln!(w, "x,y,fitted")?;
            for i in 0..sample.len() {
                writeln!(w, "{},{},{:.17e}", sample.x()[i], sample.y()[i], fitted[i])?;
            }
            Ok(())
        }
        Command::Boost(cmd) => {
            let sample = load_sample(&cmd.input)?;
            let spec = cmd.smoother.to_spec()?;
            let sm = build_smoother(&sample, &spec)?;
            let y = DVector::from_column_slice(sample.y());
            let config = cmd.boost.to_config();
            let traj = run_boost(&sm, &y, &config)?;
            if let Some(k) = traj.diverged_at() {
                eprintln!(
                    "warning: divergence guard tripped at k = {k}; trajectory truncated \
                     ({} checkpoints recorded)",
                    traj.checkpoints().len()
                );
            }
            traj.write_csv(out_file(&cmd.out, "trajectory.csv")?)?;
            if cmd.fitted_csv {
                traj.write_fitted_csv(out_file(&cmd.out, "fitted_checkpoints.csv")?)?;
            }
            if let Some(rule) = cmd.rule.to_rule(sample.len())? {
                let res = select(&traj, &sm, &y, &rule)?;
                let fitted = traj.checkpoint(res.selected_k).map(|c| c.fitted.clone());
                let json = selection_json(&res, fitted.as_ref());
                serde_json::to_writer_pretty(out_file(&cmd.out, "selection.json")?, &json)
                    .map_err(|e| Error::InvalidInput(e.to_string()))?;
            }
            Ok(())
        }
        Command::Spectrum(cmd) => {
            let sample = load_sample(&cmd.input)?;
            let spec = cmd.smoother.to_spec()?;
            let sm = build_smoother(&sample, &spec)?;
            let report = analyze(&sm, cmd.mu, cmd.variant.into())?;
            serde_json::to_writer_pretty(out_file(&cmd.out, "report.json")?, &report.to_json())
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            Ok(())
        }
        Command::Select(cmd) => {
            let sample = load_sample(&cmd.input)?;
            let spec = cmd.smoother.to_spec()?;
            let sm = build_smoother(&sample, &spec)?;
            let y = DVector::from_column_slice(sample.y());
            let config = cmd.boost.to_config();
            let traj = run_boost(&sm, &y, &config)?;
            if let Some(k) = traj.diverged_at() {
                eprintln!("warning: divergence guard tripped at k = {k}; trajectory truncated");
            }
            let rule = cmd.rule.to_rule(sample.len())?.ok_or_else(|| {
                Error::InvalidInput("--rule is required for the select command".into())
            })?;
            let res = select(&traj, &sm, &y, &rule)?;
            // sanity check of Eq. 17 consistency at the design points
            let cp = traj.checkpoint(res.selected_k).expect("selected k recorded");
            let p0 = predict_at(&traj, &sm, sample.x()[0], res.selected_k)?;
            debug_assert!((p0 - cp.fitted[0]).abs() <= 1e-8);
            res.write_scores_csv(out_file(&cmd.out, "scores.csv")?)?;
            let json = selection_json(&res, Some(&cp.fitted));
            serde_json::to_writer_pretty(out_file(&cmd.out, "selection.json")?, &json)
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            Ok(())
        }
        Command::Simulate(cmd) => {
            let mut scenario = SimScenario::from_json_reader(File::open(&cmd.scenario)?)?;
            if let Some(r) = cmd.replications {
                scenario.replications = r;
            }
            if let Some(s) = cmd.seed {
                scenario.base_seed = s;
            }
            let summary = match cmd.jobs {
                Some(jobs) => {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(jobs.max(1))
                        .build()
                        .map_err(|e| Error::InvalidInput(e.to_string()))?;
                    pool.install(|| run_scenario(&scenario))?
                }
                None => run_scenario(&scenario)?,
            };
            for (r, e) in &summary.failures {
                eprintln!("warning: replication {r} failed: {e}");
            }
            summary.write_table_csv(out_file(&cmd.out, "table.csv")?)?;
            summary.write_records_csv(out_file(&cmd.out, "records.csv")?)?;
            Ok(())
        }
    }
}
