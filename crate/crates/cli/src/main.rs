//! `hfts` command-line tool.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hfts::depth::DepthKind;
use hfts::{ErrorMetric, Reconciler};

use config::{OriginRange, PredictorChoice, Process, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or missing inputs; exit code 2.
    Config(String),
    /// Failure while computing; exit code 1.
    Compute(hfts::Error),
}

impl From<hfts::Error> for CliError {
    fn from(e: hfts::Error) -> Self {
        CliError::Compute(e)
    }
}

#[derive(Parser)]
#[command(name = "hfts", version, about = "Robust forecasting for hierarchical functional time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML or JSON config, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Right end of the curve domain.
    #[arg(long, global = true)]
    t_end: Option<f64>,
    /// Moving-window length.
    #[arg(long, global = true)]
    window: Option<usize>,
    /// Locality of the depth, in (0, 1].
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Trim level of the trimmed local mean.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Forgetting weight on the recent window.
    #[arg(long, global = true)]
    z: Option<f64>,
    #[arg(long, global = true, value_enum)]
    depth: Option<DepthArg>,
    #[arg(long, global = true, value_enum)]
    reconcile: Option<ReconcileArg>,
    #[arg(long, global = true, value_enum)]
    metric: Option<MetricArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DepthArg {
    Cgbd,
    Mbd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReconcileArg {
    None,
    Gls,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Aiae,
    Aise,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a hierarchy of functional time series.
    Simulate {
        #[arg(long, value_enum)]
        process: Option<Process>,
        /// Curves per node.
        #[arg(long)]
        curves: Option<usize>,
        /// Leaves under the root, when no hierarchy file is given.
        #[arg(long)]
        leaves: Option<usize>,
        /// Hierarchy file with `node_id,parent_id` lines.
        #[arg(long)]
        hierarchy: Option<PathBuf>,
        /// Share of each leaf's curves replaced by size outliers.
        #[arg(long)]
        outliers: Option<f64>,
        #[arg(long)]
        magnitude: Option<f64>,
    },
    /// Local depth, rank and boxplot outlier flag of every curve in a curve CSV.
    Depth {
        input: Option<PathBuf>,
    },
    /// Forecast the next curve of every node of a dataset.
    Forecast {
        /// Dataset directory.
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        predictor: Option<PredictorChoice>,
    },
    /// Rolling backtest of one or more predictors over a dataset.
    Backtest {
        /// Dataset directory.
        input: Option<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',')]
        predictors: Option<Vec<PredictorChoice>>,
        /// Forecast origins as FIRST:LAST, counted in observed curves.
        #[arg(long)]
        origins: Option<OriginRange>,
    },
    /// Build a dataset from demand extracts with REGION, SETTLEMENTDATE and TOTALDEMAND columns.
    Ingest {
        inputs: Vec<PathBuf>,
        /// Comma-separated region ids.
        #[arg(long, value_delimiter = ',')]
        regions: Option<Vec<String>>,
        /// Id of the total node.
        #[arg(long)]
        root: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Depth { .. } => "depth",
            Command::Forecast { .. } => "forecast",
            Command::Backtest { .. } => "backtest",
            Command::Ingest { .. } => "ingest",
        }
    }
}

fn resolve(cli: Cli) -> Result<(Command, RunConfig), CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.common.config {
        let (loaded, command) = config::load(path)?;
        if let Some(command) = command.filter(|c| c != cli.command.name()) {
            return Err(CliError::Config(format!(
                "{} records a {command} run, not {}",
                path.display(),
                cli.command.name()
            )));
        }
        cfg = loaded;
    }
    let c = cli.common;
    macro_rules! set {
        ($flag:expr => $($field:tt)+) => {
            if let Some(v) = $flag {
                cfg.$($field)+ = v;
            }
        };
    }
    set!(c.seed => seed);
    set!(c.out.map(Some) => out);
    set!(c.grid_points.map(Some) => grid.n_points);
    set!(c.t_end.map(Some) => grid.t_end);
    set!(c.window => predictor.window);
    set!(c.beta => predictor.beta);
    set!(c.alpha => predictor.alpha);
    set!(c.z => predictor.z);
    set!(c.depth.map(|d| match d {
        DepthArg::Cgbd => DepthKind::Cgbd,
        DepthArg::Mbd => DepthKind::Mbd,
    }) => predictor.depth);
    set!(c.reconcile.map(|r| match r {
        ReconcileArg::None => Reconciler::None,
        ReconcileArg::Gls => Reconciler::GlsRobust,
    }) => reconcile);
    set!(c.metric.map(|m| match m {
        MetricArg::Aiae => ErrorMetric::Aiae,
        MetricArg::Aise => ErrorMetric::Aise,
    }) => metric);

    match &cli.command {
        Command::Simulate {
            process,
            curves,
            leaves,
            hierarchy,
            outliers,
            magnitude,
        } => {
            set!(*process => simulate.process);
            set!(*curves => simulate.curves);
            set!(*leaves => simulate.leaves);
            set!(hierarchy.clone().map(Some) => hierarchy);
            set!(*outliers => simulate.outliers);
            set!(*magnitude => simulate.magnitude);
        }
        Command::Depth { input } => set!(input.clone().map(|p| vec![p]) => input),
        Command::Forecast { input, predictor } => {
            set!(input.clone().map(|p| vec![p]) => input);
            set!(predictor.map(|p| vec![p]) => predictors);
        }
        Command::Backtest {
            input,
            predictors,
            origins,
        } => {
            set!(input.clone().map(|p| vec![p]) => input);
            set!(predictors.clone() => predictors);
            set!(origins.map(Some) => origins);
        }
        Command::Ingest { inputs, regions, root } => {
            if !inputs.is_empty() {
                cfg.input = inputs.clone();
            }
            set!(regions.clone() => ingest.regions);
            set!(root.clone() => ingest.root);
        }
    }
    Ok((cli.command, cfg))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = resolve(cli).and_then(|(command, cfg)| commands::run(command.name(), &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Compute(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
