use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use soh_core::config::RunConfig;
use soh_core::data::load_cell_dir;
use soh_core::error::{Error, Result};
use soh_core::regressors::ModelBundle;
use soh_core::uncertainty::MetricsReport;
use soh_core::workflow::{
    bundle_path, evaluate_from_config, featurize_from_config, predict_cycle, select_from_config, synth_from_config,
    train_from_config,
};

#[derive(Parser)]
#[command(name = "soh", version, about = "Battery state-of-health estimation with calibrated uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Regressor: brr, gpr, rf or dnne.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory with `<id>.csv` / `<id>.meta` cell files and `manifest.csv`.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Repeated `key=value` config overrides.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract per-cycle features for every cell in the data directory.
    Featurize,
    /// Run recursive feature elimination on the feature-selection cells.
    Select,
    /// Train a model bundle on the train and calibration cells.
    Train,
    /// Score a bundle on the test cells.
    Evaluate {
        /// Defaults to `<out>/model.json`.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Estimate SOH for one cycle of one cell.
    Predict {
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        cell: String,
        /// Defaults to the last cycle.
        #[arg(long)]
        cycle: Option<u32>,
    },
    /// Generate a synthetic dataset with a manifest.
    Synth,
}

fn config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &common.model {
        cfg.set("model", m)?;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    if let Some(d) = &common.data {
        cfg.data_dir = Some(d.clone());
    }
    for kv in &common.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set `{kv}`: expected KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn print_metrics(label: &str, r: &MetricsReport) {
    println!(
        "{label:<12} MAPE {:.4}%  RMSPE {:.4}%  C_score {:.2}  Sh {:.5}  alpha-acc {:.2}%  beta {:.4}  PEP {:.2}%  n {}",
        r.mape, r.rmspe, r.c_score, r.sharpness, r.alpha_accuracy, r.beta, r.pep, r.n
    );
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli.common)?;
    log::debug!("effective configuration:\n{}", cfg.to_text());
    println!("config hash {}", cfg.hash());
    let start = Instant::now();
    match cli.command {
        Command::Synth => {
            let cells = synth_from_config(&cfg)?;
            println!("wrote {} cells to {}", cells.len(), cfg.out_dir.display());
        }
        Command::Featurize => {
            let widths = featurize_from_config(&cfg)?;
            for (id, w) in &widths {
                println!("{id}\t{w} features");
            }
        }
        Command::Select => {
            let result = select_from_config(&cfg)?;
            println!("selected {} features: {}", result.selected.len(), result.selected.join(", "));
        }
        Command::Train => {
            let out = train_from_config(&cfg)?;
            print!("{}", out.timer.report());
            println!(
                "{} model on {} features, sigma scale {:.4}; bundle {}",
                out.bundle.kind,
                out.bundle.selected_features.len(),
                out.bundle.recalibration.sigma_scale(),
                bundle_path(&cfg).display()
            );
        }
        Command::Evaluate { bundle } => {
            let path = bundle.unwrap_or_else(|| bundle_path(&cfg));
            let eval = evaluate_from_config(&cfg, &path)?;
            for (id, r) in &eval.per_cell {
                print_metrics(id, r);
            }
            print_metrics("average", &eval.average);
        }
        Command::Predict { bundle, cell, cycle } => {
            let path = bundle.unwrap_or_else(|| bundle_path(&cfg));
            let bundle = ModelBundle::load(&path)?;
            let model = bundle.model()?;
            let history = load_cell_dir(cfg.data_dir()?, &cell)?;
            let (cycle, p) = predict_cycle(&bundle, &model, &history, cycle)?;
            let (lo, hi) = p.interval90();
            println!("{cell} cycle {cycle}: SOH {:.5} sigma {:.5} 90% [{lo:.5}, {hi:.5}]", p.mean, p.std());
        }
    }
    println!("total {:.3}s", start.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
