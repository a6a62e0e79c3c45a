//! `ppos`: conditional power, predictive power and probability of success
//! from the command line. Flag names follow the R argument names with dots
//! turned into dashes (`null.value` → `--null-value`).

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ppos_core::api::{self, ApiError, Params, Response};
use ppos_core::Error;

#[derive(Parser, Debug)]
#[command(name = "ppos", version, about = "CP, PPoS and PoS for interim analyses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Probability of success at the design stage.
    Pos(Run),
    /// Conditional power and predictive power at an interim analysis.
    SuccIa(Run),
    /// Exact predictive power for binary endpoints under beta priors.
    Betabinom(Run),
    /// CP/PPoS against the interim estimate, and predictive densities.
    Curves(Run),
    /// Simulated SE of the log Kaplan–Meier median.
    McSe(Run),
    /// Simulation estimate of CP or PPoS.
    McPpos(Run),
}

#[derive(Args, Debug)]
struct Run {
    /// JSON file with parameters; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write to this file instead of standard output.
    #[arg(long, short = 'o', value_name = "FILE")]
    output: Option<PathBuf>,
    /// Which table `curves` emits in csv/table format.
    #[arg(long, value_enum, default_value_t = Table::Curve)]
    table: Table,
    /// Worker threads for parallel computations (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Lift the beta-binomial size guard.
    #[arg(long)]
    no_cap: bool,
    #[command(flatten)]
    params: Params,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Canonical JSON, full precision.
    Json,
    /// RFC 4180 CSV, full precision.
    Csv,
    /// Aligned text, 4 decimals.
    Table,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Table {
    Curve,
    Density,
}

const EXIT_USAGE: u8 = 2;
const EXIT_DOMAIN: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

fn exit_code(e: &ApiError) -> u8 {
    match e {
        ApiError::Schema(_) => EXIT_USAGE,
        ApiError::Compute(Error::Numerical(_)) => EXIT_NUMERICAL,
        ApiError::Compute(_) => EXIT_DOMAIN,
    }
}

fn load(run: &Run) -> Result<Params, ApiError> {
    match &run.config {
        None => {
            run.params.check_version()?;
            Ok(run.params.clone())
        }
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ApiError::Schema(format!("cannot read config {}: {e}", path.display())))?;
            let value = serde_json::from_str(&text)
                .map_err(|e| ApiError::Schema(format!("config {} is not valid JSON: {e}", path.display())))?;
            Params::from_json(value)?.merged(&run.params)
        }
    }
}

fn execute(command: &Command) -> Result<(Response, &Run, Params), ApiError> {
    let run = match command {
        Command::Pos(r)
        | Command::SuccIa(r)
        | Command::Betabinom(r)
        | Command::Curves(r)
        | Command::McSe(r)
        | Command::McPpos(r) => r,
    };
    if let Some(n) = run.threads {
        if n == 0 {
            return Err(ApiError::Schema("--threads must be at least 1".into()));
        }
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let p = load(run)?;
    let cap = (!run.no_cap).then_some(api::DEFAULT_BETABINOM_CAP);
    let resp = match command {
        Command::Pos(_) => api::run_pos(&p),
        Command::SuccIa(_) => api::run_succ_ia_or_final(&p),
        Command::Betabinom(_) => api::run_betabinom(&p, cap),
        Command::Curves(_) => api::run_curves(&p),
        Command::McSe(_) => api::run_mc_se(&p),
        Command::McPpos(_) => api::run_mc_ppos(&p),
    }?;
    Ok((resp, run, p))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (resp, run, params) = match execute(&cli.command) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error [{}]: {}", e.code(), e.detail());
            return ExitCode::from(exit_code(&e));
        }
    };
    let text = match output::render(&resp, &params, run.format, run.table) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error [output]: {e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };
    if run.format != Format::Json {
        for w in &resp.warnings {
            eprintln!("warning: {w}");
        }
    }
    let written = match &run.output {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string())
        }
    };
    if let Err(e) = written {
        eprintln!("error [output]: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    ExitCode::SUCCESS
}
