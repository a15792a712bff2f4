//! Command-line driver: verify the construction identities, train models,
//! evaluate against the analytic Taylor-Green fields, and export plot-ready
//! heatmaps and loss curves.

mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tenn_core::report::{
    evaluate_on_grid, export_eval_summary, export_heatmap_csv, export_heatmap_pgm,
    model_predictor, run_manifest, verify_identities, GridSpec, VerifyOptions,
};
use tenn_core::trainer::{load_checkpoint, save_checkpoint, train, Checkpoint};

#[derive(Parser)]
#[command(
    name = "tenn",
    version,
    about = "Transport-embedded neural networks for the 2D Taylor-Green vortex",
    after_long_help = config_help_static()
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn config_help_static() -> &'static str {
    Box::leak(config::config_help().into_boxed_str())
}

#[derive(Subcommand)]
enum Command {
    /// Run the construction-identity, derivative, periodicity, and oracle
    /// suites; exit nonzero on any violation.
    Verify {
        /// Number of random networks per sweep.
        #[arg(long, default_value_t = 20)]
        networks: usize,
        /// Number of random points per network.
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model from a config file (see --help for the format);
    /// writes checkpoint.bin, history.csv, and manifest.txt.
    Train {
        /// Config file (key = value format).
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint against the analytic vorticity on a grid;
    /// writes eval_summary.csv.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// Velocity-recovery regularizer used at evaluation (potential
        /// variant only).
        #[arg(long, default_value_t = 1e-4)]
        eps_div: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint and export heatmaps (prediction / truth /
    /// error per time slice).
    Export {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// csv or pgm.
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long, default_value_t = 1e-4)]
        eps_div: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Overrides {
    /// Override the Reynolds number.
    #[arg(long)]
    re: Option<f64>,
    /// Override the model (vanilla | tenn).
    #[arg(long)]
    model: Option<String>,
    /// Override the TENN head wiring (potential | split).
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Force deterministic mode on.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct GridArgs {
    /// Evaluation grid as NXxNY.
    #[arg(long, default_value = "64x64")]
    grid: String,
    /// Comma-separated snapshot times.
    #[arg(long, default_value = "0,0.25,0.5,0.75,1.0")]
    times: String,
}

impl GridArgs {
    fn parse(&self) -> Result<GridSpec, String> {
        let (nx, ny) = self
            .grid
            .split_once('x')
            .ok_or_else(|| format!("--grid expects NXxNY, got {:?}", self.grid))?;
        let nx: usize = nx.parse().map_err(|e| format!("--grid: {e}"))?;
        let ny: usize = ny.parse().map_err(|e| format!("--grid: {e}"))?;
        if nx == 0 || ny == 0 {
            return Err("--grid dimensions must be positive".into());
        }
        let times: Vec<f64> = self
            .times
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| format!("--times: {e}")))
            .collect::<Result<_, _>>()?;
        if times.is_empty() {
            return Err("--times must list at least one time".into());
        }
        Ok(GridSpec { nx, ny, times })
    }
}

fn main() -> ExitCode {
    tenn_core::init_workers();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Verify { networks, points, seed } => {
            let report = verify_identities(&VerifyOptions { networks, points, seed });
            print!("{report}");
            if report.all_passed() {
                println!("all checks passed");
                Ok(ExitCode::SUCCESS)
            } else {
                let names: Vec<&str> = report.failing().iter().map(|c| c.name.as_str()).collect();
                println!("FAILED: {}", names.join(", "));
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Train { config: path, overrides, out } => {
            let mut config = config::load_config(&path).map_err(|e| e.to_string())?;
            if let Some(re) = overrides.re {
                config.re = re;
            }
            if let Some(model) = &overrides.model {
                config.model = model.parse().map_err(|e: String| e)?;
            }
            if let Some(variant) = &overrides.variant {
                config.variant = match variant.as_str() {
                    "potential" => tenn_core::TennVariant::PotentialB,
                    "split" => tenn_core::TennVariant::SplitA,
                    other => return Err(format!("unknown variant {other:?}")),
                };
            }
            if overrides.model.is_some() || overrides.variant.is_some() {
                config.weights =
                    tenn_core::trainer::TrainConfig::preset_weights(config.model, config.variant);
                config.network.heads = config.head_role();
            }
            if let Some(seed) = overrides.seed {
                config.seed = seed;
            }
            if let Some(epochs) = overrides.epochs {
                config.epochs = epochs;
            }
            if overrides.deterministic {
                config.deterministic = true;
            }

            std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            let (params, report) = train(&config).map_err(|e| e.to_string())?;
            save_checkpoint(&params, &config.network, &config, &out.join("checkpoint.bin"))
                .map_err(|e| e.to_string())?;
            std::fs::write(out.join("history.csv"), report.to_csv()).map_err(|e| e.to_string())?;
            std::fs::write(out.join("manifest.txt"), run_manifest(&config))
                .map_err(|e| e.to_string())?;
            println!(
                "trained {} epochs in {:.1}s; total loss {:.6e} -> {:.6e}",
                report.history.len(),
                report.wall_secs,
                report.history.first().map(|e| e.total).unwrap_or(f64::NAN),
                report.history.last().map(|e| e.total).unwrap_or(f64::NAN),
            );
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { checkpoint, grid, eps_div, out } => {
            let ckpt = load_checkpoint(&checkpoint).map_err(|e| e.to_string())?;
            let grid = grid.parse()?;
            let eval = eval_grid(&ckpt, &grid, eps_div);
            std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            export_eval_summary(&eval, &out.join("eval_summary.csv")).map_err(|e| e.to_string())?;
            for (it, t) in eval.times.iter().enumerate() {
                println!(
                    "t = {t:<6} rel_l2(omega) = {:<12.6} rel_l2(velocity) = {:.6}",
                    eval.rel_l2_per_time[it], eval.rel_l2_velocity_per_time[it]
                );
            }
            println!(
                "overall rel_l2(omega) = {:.6}; decay ratio pred {:.6} vs true {:.6}",
                eval.rel_l2_overall, eval.decay_ratio_pred, eval.decay_ratio_true
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Export { checkpoint, grid, format, eps_div, out } => {
            let ckpt = load_checkpoint(&checkpoint).map_err(|e| e.to_string())?;
            let grid = grid.parse()?;
            let eval = eval_grid(&ckpt, &grid, eps_div);
            std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            match format.as_str() {
                "csv" => {
                    let path = out.join("heatmap.csv");
                    export_heatmap_csv(&eval, &path).map_err(|e| e.to_string())?;
                    println!("wrote {}", path.display());
                }
                "pgm" => {
                    let files =
                        export_heatmap_pgm(&eval, &out, "omega").map_err(|e| e.to_string())?;
                    println!("wrote {} files under {}", files.len(), out.display());
                }
                other => return Err(format!("unknown format {other:?} (expected csv|pgm)")),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn eval_grid(ckpt: &Checkpoint, grid: &GridSpec, eps_div: f64) -> tenn_core::report::EvalGrid {
    let re = ckpt.config.re;
    let mut pred = model_predictor(ckpt, Some(eps_div));
    evaluate_on_grid(&mut pred, grid, re)
}
