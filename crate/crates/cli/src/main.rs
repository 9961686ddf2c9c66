//! `volaflow` — realized-volatility forecasting with co-trained monotone
//! transformations. Subcommands cover the full pipeline: RV extraction,
//! synthetic panels, co-training, evaluation, and scripted experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use volaflow_core::cotrain::{BatchConfig, TrainConfig};
use volaflow_core::error::Error;
use volaflow_core::experiment::{
    self, evaluate_runs, load_run_bundle, train_method, FamilySpec, MethodSpec,
};
use volaflow_core::market_data::{self, QuoteSchema, SplitSpec};
use volaflow_core::optim::AdamConfig;
use volaflow_core::residual::ResidualKind;
use volaflow_core::synth;

#[derive(Parser)]
#[command(
    name = "volaflow",
    version,
    about = "Daily realized-volatility prediction with co-trained monotone transformations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute daily realized volatility from a quote CSV
    Rv(RvArgs),
    /// Generate a synthetic RV panel with known ground truth
    Synth(SynthArgs),
    /// Co-train a transformation with HAR on an RV panel
    Train(TrainArgs),
    /// Score trained runs on the test region and write report CSVs
    Evaluate(EvaluateArgs),
    /// Rebuild the report directory from saved runs (same as evaluate)
    Report(EvaluateArgs),
    /// Run a full multi-method experiment from a JSON config
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct RvArgs {
    /// Input CSV of quotes (schema A) or intraday prices (schema B)
    #[arg(long)]
    input: PathBuf,
    /// A: symbol,day,slot,bid_price,bid_volume,ask_price,ask_volume;
    /// B: symbol,day,slot,price
    #[arg(long, value_enum, default_value_t = SchemaArg::A)]
    schema: SchemaArg,
    /// Output RV CSV; a standardization sidecar JSON is written next to it
    #[arg(long)]
    output: PathBuf,
}

#[derive(Copy, Clone, ValueEnum)]
enum SchemaArg {
    A,
    B,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    stocks: usize,
    #[arg(long, default_value_t = 480)]
    days: usize,
    /// Warp applied to the latent Gaussian HAR process
    #[arg(long, value_enum, default_value_t = WarpArg::Softplus)]
    warp: WarpArg,
    /// Yeo-Johnson parameter when --warp yj
    #[arg(long, default_value_t = 0.25)]
    lambda: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output RV CSV; ground truth goes to <stem>.ground_truth.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, ValueEnum)]
enum WarpArg {
    Identity,
    Softplus,
    Yj,
}

#[derive(Args)]
struct TrainArgs {
    /// RV CSV (symbol,day,rv_raw)
    #[arg(long)]
    rv: PathBuf,
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Hidden units for the tanh family
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Integration horizon for the node family
    #[arg(long, default_value_t = 0.25)]
    tau: f64,
    /// RK4 step count for the node family (default depends on tau)
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum, default_value_t = ResidualArg::Gaussian)]
    residual: ResidualArg,
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, default_value_t = 5)]
    eval_every: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train/validation/test lengths
    #[arg(long, value_parser = parse_split, default_value = "300,60,120")]
    split: SplitSpec,
    /// Adam learning rate for the transform parameters
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Stocks per mini-batch
    #[arg(long, default_value_t = 16)]
    batch_stocks: usize,
    /// Output run bundle JSON
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, ValueEnum)]
enum FamilyArg {
    Identity,
    Wallace,
    #[value(name = "yeo_johnson")]
    YeoJohnson,
    Tanh,
    Node,
}

#[derive(Copy, Clone, ValueEnum)]
enum ResidualArg {
    Gaussian,
    #[value(name = "student_t")]
    StudentT,
}

#[derive(Args)]
struct EvaluateArgs {
    /// RV CSV the runs were trained on
    #[arg(long)]
    rv: PathBuf,
    /// Run bundle JSONs produced by train or experiment
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    /// Label of the reference method for the t-tests (default: first run)
    #[arg(long)]
    reference: Option<String>,
    /// Report directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config JSON
    #[arg(long)]
    config: PathBuf,
    /// Report directory
    #[arg(long)]
    out: PathBuf,
}

fn parse_split(s: &str) -> Result<SplitSpec, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected train,valid,test e.g. 300,60,120".into());
    }
    let parse = |p: &str| p.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok(SplitSpec {
        train_len: parse(parts[0])?,
        valid_len: parse(parts[1])?,
        test_len: parse(parts[2])?,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.exit_code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> volaflow_core::Result<()> {
    match cli.command {
        Command::Rv(args) => {
            let schema = match args.schema {
                SchemaArg::A => QuoteSchema::A,
                SchemaArg::B => QuoteSchema::B,
            };
            let raw = market_data::compute_raw_rv(&args.input, schema)?;
            market_data::write_rv_csv(&args.output, &raw)?;
            let days = raw.first().map(|s| s.values.len()).unwrap_or(0);
            println!(
                "wrote {} ({} symbols x {} days) + {}",
                args.output.display(),
                raw.len(),
                days,
                market_data::sidecar_path(&args.output).display()
            );
        }
        Command::Synth(args) => {
            let warp = match args.warp {
                WarpArg::Identity => synth::Warp::Identity,
                WarpArg::Softplus => synth::Warp::SoftplusSkew,
                WarpArg::Yj => synth::Warp::YeoJohnson { lambda: args.lambda },
            };
            let cfg = synth::SynthConfig {
                n_stocks: args.stocks,
                n_days: args.days,
                warp,
                seed: args.seed,
                ..Default::default()
            };
            let (raw, truth) = synth::generate_raw(&cfg)?;
            market_data::write_rv_csv(&args.out, &raw)?;
            let truth_path = ground_truth_path(&args.out);
            std::fs::write(&truth_path, serde_json::to_string_pretty(&truth)? + "\n")?;
            println!(
                "wrote {} ({} stocks x {} days) + {}",
                args.out.display(),
                args.stocks,
                args.days,
                truth_path.display()
            );
        }
        Command::Train(args) => {
            let raw = market_data::load_rv_csv(&args.rv)?;
            let panel = market_data::panel_from_raw(&raw, args.split)?;
            let family = match args.family {
                FamilyArg::Identity => FamilySpec::Identity,
                FamilyArg::Wallace => FamilySpec::Wallace,
                FamilyArg::YeoJohnson => FamilySpec::YeoJohnson,
                FamilyArg::Tanh => FamilySpec::Tanh { k: args.k },
                FamilyArg::Node => FamilySpec::Node {
                    tau: args.tau,
                    steps: args.steps,
                    time_conditioning: false,
                },
            };
            let method = MethodSpec {
                family,
                label: None,
                residual: Some(match args.residual {
                    ResidualArg::Gaussian => ResidualKind::Gaussian,
                    ResidualArg::StudentT => ResidualKind::StudentT,
                }),
            };
            let train_cfg = TrainConfig {
                iterations: args.iters,
                eval_every: args.eval_every,
                adam: AdamConfig { learning_rate: args.lr, ..Default::default() },
                batch: BatchConfig { stocks_per_batch: args.batch_stocks, window_length: None },
                seed: args.seed,
            };
            let digest = experiment::fnv1a64(&std::fs::read(&args.rv)?);
            let bundle = train_method(&panel, &method, &train_cfg, args.split, &digest)?;
            experiment::save_run_bundle(&args.out, &bundle)?;
            println!(
                "trained {} (best snapshot at iteration {}, validation log-likelihood {:.4}); wrote {}",
                bundle.label,
                bundle.best.iteration,
                bundle.best.validation_loglik,
                args.out.display()
            );
            if let Some(msg) = &bundle.aborted {
                eprintln!("warning: training stopped early: {msg}");
            }
        }
        Command::Evaluate(args) | Command::Report(args) => {
            let raw = market_data::load_rv_csv(&args.rv)?;
            let bundles = args
                .runs
                .iter()
                .map(|p| load_run_bundle(p))
                .collect::<volaflow_core::Result<Vec<_>>>()?;
            let split = bundles[0].split;
            if bundles.iter().any(|b| b.split != split) {
                return Err(Error::Input(
                    "runs were trained with different splits; evaluate them separately".into(),
                ));
            }
            let panel = market_data::panel_from_raw(&raw, split)?;
            let evaluation = evaluate_runs(&panel, &bundles, args.reference.as_deref())?;
            experiment::write_evaluation(&args.out, &evaluation, &bundles)?;
            println!(
                "wrote report for {} methods to {}",
                bundles.len(),
                args.out.display()
            );
            for row in &evaluation.rows {
                println!(
                    "  {}: rmse={:.4} pct_best={:.1}% qq_r2={:.4} skew={:.4}",
                    row.label, row.mean_rmse, row.pct_best, row.mean_qq_r2, row.mean_skewness
                );
            }
        }
        Command::Experiment(args) => {
            let summary = experiment::run_experiment(&args.config, &args.out)?;
            println!(
                "experiment complete: {} methods -> {}",
                summary.trained.len(),
                summary.out_dir.display()
            );
            for (label, err) in &summary.failures {
                eprintln!("warning: method {label} failed: {err}");
            }
        }
    }
    Ok(())
}

fn ground_truth_path(out: &std::path::Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("synth");
    out.with_file_name(format!("{stem}.ground_truth.json"))
}
