use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pareto_descent::cli::{
    cmd_check_grads, cmd_eval, cmd_frontier, cmd_gen_data, cmd_trace, cmd_train, RunConfig,
    DATA_MASTER_SEED,
};
use pareto_descent::error::Error;
use pareto_descent::fairness::{FairnessNotion, LinearModelSpec, ModelKind, Penalty};

/// Multi-objective Pareto descent: fairness-aware training, preference
/// tracing, and frontier sweeps.
#[derive(Parser)]
#[command(name = "pdo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Base configuration JSON (as written to run directories); explicit
    /// flags override its fields.
    #[arg(long, env = "PDO_CONFIG")]
    config: Option<PathBuf>,

    /// Training CSV.
    #[arg(long, env = "PDO_DATA")]
    data: Option<PathBuf>,

    /// Held-out CSV encoded with the training encoder.
    #[arg(long, env = "PDO_TEST")]
    test: Option<PathBuf>,

    /// Schema TOML path or builtin name (adult-gender, adult-race,
    /// compas-sex, compas-race).
    #[arg(long, env = "PDO_SCHEMA")]
    schema: Option<String>,

    /// Stratified held-out fraction when no --test file is given.
    #[arg(long, env = "PDO_SPLIT")]
    split: Option<f64>,

    /// Run on the synthetic two-objective benchmark (no data needed).
    #[arg(long, env = "PDO_SYNTHETIC", default_value_t = false)]
    synthetic: bool,

    /// Fairness notion: eo, eod, dm, or none (plain empirical risk).
    #[arg(long, env = "PDO_NOTION")]
    notion: Option<String>,

    /// Main loss: logistic or svm (smoothed hinge).
    #[arg(long, env = "PDO_MODEL")]
    model: Option<String>,

    /// Penalty on group-loss differences: squared or abs.
    #[arg(long, env = "PDO_PENALTY")]
    penalty: Option<String>,

    /// Ridge coefficient (0 disables regularization).
    #[arg(long, env = "PDO_L2")]
    l2: Option<f64>,

    /// Preference vector "a,b,..."; repeat the flag for frontier sweeps.
    #[arg(long, env = "PDO_PREF")]
    pref: Vec<String>,

    /// Outer step size.
    #[arg(long, env = "PDO_ETA")]
    eta: Option<f64>,

    /// Inner step size (defaults to an automatic estimate).
    #[arg(long, env = "PDO_RHO")]
    rho: Option<f64>,

    /// Inner iterations per outer step.
    #[arg(long = "inner-steps", env = "PDO_INNER_STEPS")]
    inner_steps: Option<usize>,

    /// Outer iteration budget.
    #[arg(long = "iters", env = "PDO_ITERS")]
    iters: Option<usize>,

    /// Record every n-th iteration.
    #[arg(long = "record-every", env = "PDO_RECORD_EVERY")]
    record_every: Option<usize>,

    /// Case I threshold on the preference-gradient norm.
    #[arg(long, env = "PDO_EPS1")]
    eps1: Option<f64>,

    /// Case II threshold on the direction/preference-gradient ratio.
    #[arg(long, env = "PDO_EPS2")]
    eps2: Option<f64>,

    /// Seed for the deterministic start point (and split, if any).
    #[arg(long, env = "PDO_SEED")]
    seed: Option<u64>,

    /// Output directory for run artifacts.
    #[arg(long, env = "PDO_OUT")]
    out: Option<PathBuf>,

    /// Hand unit-norm gradient columns to the inner solve: on or off.
    #[arg(long = "normalize-gradients", env = "PDO_NORMALIZE_GRADIENTS")]
    normalize_gradients: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one Pareto-stationary model.
    Train(CommonArgs),
    /// Trace toward one preference vector with PB-PDO.
    Trace(CommonArgs),
    /// Sweep several preference vectors and merge the frontier.
    Frontier(CommonArgs),
    /// Evaluate a saved model on a data file.
    Eval {
        /// model.json from a run directory.
        #[arg(long, env = "PDO_MODEL_PATH")]
        model: PathBuf,
        /// CSV to evaluate on.
        #[arg(long, env = "PDO_DATA")]
        data: PathBuf,
        /// Where to write metrics.json (stdout only when omitted).
        #[arg(long, env = "PDO_OUT")]
        out: Option<PathBuf>,
    },
    /// Verify analytic gradients against central finite differences.
    CheckGrads(CommonArgs),
    /// Generate the deterministic benchmark CSVs.
    GenData {
        /// Output directory.
        #[arg(long, env = "PDO_OUT", default_value = "data")]
        out: PathBuf,
        /// adult, compas, or all.
        #[arg(long, env = "PDO_DATASET", default_value = "all")]
        dataset: String,
        /// Generator seed; the default is the pinned benchmark draw.
        #[arg(long, env = "PDO_SEED", default_value_t = DATA_MASTER_SEED)]
        seed: u64,
    },
}

fn parse_bool_flag(name: &str, value: &str) -> Result<bool, Error> {
    match value {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(Error::usage(format!("--{name} expects on|off, got '{other}'"))),
    }
}

fn parse_pref(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::usage(format!("invalid preference entry '{v}'")))
        })
        .collect()
}

fn resolve(args: &CommonArgs) -> Result<RunConfig, Error> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &args.data {
        config.data = Some(v.clone());
    }
    if let Some(v) = &args.test {
        config.test = Some(v.clone());
    }
    if let Some(v) = &args.schema {
        config.schema = Some(v.clone());
    }
    if let Some(v) = args.split {
        config.split_fraction = Some(v);
    }
    if args.synthetic {
        config.synthetic = true;
    }
    if let Some(v) = &args.notion {
        config.notion = match v.as_str() {
            "eo" => Some(FairnessNotion::Eo),
            "eod" => Some(FairnessNotion::Eod),
            "dm" => Some(FairnessNotion::Dm),
            "none" => None,
            other => return Err(Error::usage(format!("unknown notion '{other}'"))),
        };
    }
    if let Some(v) = &args.model {
        let kind = match v.as_str() {
            "logistic" => ModelKind::Logistic,
            "svm" => ModelKind::SmoothHinge,
            other => return Err(Error::usage(format!("unknown model '{other}'"))),
        };
        config.model = LinearModelSpec {
            kind,
            ..config.model
        };
    }
    if let Some(v) = &args.penalty {
        config.penalty = match v.as_str() {
            "squared" => Penalty::Squared,
            "abs" => Penalty::Abs,
            other => return Err(Error::usage(format!("unknown penalty '{other}'"))),
        };
    }
    if let Some(v) = args.l2 {
        config.model.l2 = v;
    }
    if !args.pref.is_empty() {
        config.preferences = args
            .pref
            .iter()
            .map(|p| parse_pref(p))
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = args.eta {
        config.optimizer.base.eta = v;
    }
    if args.rho.is_some() {
        config.optimizer.base.rho = args.rho;
    }
    if let Some(v) = args.inner_steps {
        config.optimizer.base.inner_iters = v;
    }
    if let Some(v) = args.iters {
        config.optimizer.base.outer_iters = v;
    }
    if let Some(v) = args.record_every {
        config.optimizer.base.record_every = v;
    }
    if let Some(v) = args.eps1 {
        config.optimizer.eps1 = v;
    }
    if let Some(v) = args.eps2 {
        config.optimizer.eps2 = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = &args.out {
        config.out = v.clone();
    }
    if let Some(v) = &args.normalize_gradients {
        config.optimizer.base.normalize_gradients = parse_bool_flag("normalize-gradients", v)?;
    }
    Ok(config)
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train(args) => {
            let dir = cmd_train(&resolve(args)?)?;
            println!("artifacts: {}", dir.display());
        }
        Command::Trace(args) => {
            let dir = cmd_trace(&resolve(args)?)?;
            println!("artifacts: {}", dir.display());
        }
        Command::Frontier(args) => {
            let dir = cmd_frontier(&resolve(args)?)?;
            println!("artifacts: {}", dir.display());
        }
        Command::Eval { model, data, out } => {
            cmd_eval(model, data, out.as_deref())?;
        }
        Command::CheckGrads(args) => {
            cmd_check_grads(&resolve(args)?)?;
        }
        Command::GenData { out, dataset, seed } => {
            cmd_gen_data(out, dataset, *seed)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            // machine-readable error record
            eprintln!(
                "{{\"error\":{:?},\"exit_code\":{}}}",
                e.to_string(),
                e.exit_code()
            );
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
