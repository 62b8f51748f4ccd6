//! Command-line entry point: scenario runs and config validation.
//!
//! Exit codes: 0 all checks pass, 1 invariant failure, 2 configuration error,
//! 3 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pmesim::config::{load_config, RunConfig};
use pmesim::scenario::{resolve, run_scenario, write_error_manifest, Scenario};
use pmesim::Error;

/// Singular porous-media simulation toolkit: resolvent-scheme PDE solver,
/// McKean-Vlasov particle cross-validation, and uniqueness diagnostics.
#[derive(Parser)]
#[command(name = "pmesim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and emit its artifacts.
    Run(RunArgs),
    /// Parse and validate a config file, printing the resolved configuration.
    ValidateConfig(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// One of: heat, barenblatt, heaviside_nondegenerate, heaviside_degenerate,
    /// coupled_particles, engelbert_schmidt.
    #[arg(long)]
    scenario: String,
    /// Config file (key = value with [grid]/[pde]/[sde]/[run] sections).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: out/<scenario>; env PMESIM_OUT_DIR overrides
    /// the default but not this flag).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    overrides: OverrideFlags,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Scenario whose defaults fill the unset keys (default: heat).
    #[arg(long)]
    scenario: Option<String>,
}

/// CLI overrides; each flag wins over the corresponding config-file key.
#[derive(Args)]
struct OverrideFlags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_n: Option<usize>,
    /// Domain half-width L (the grid covers [-L, L]).
    #[arg(long)]
    domain_l: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    n_steps: Option<usize>,
    #[arg(long)]
    n_particles: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    epsilon_reg: Option<f64>,
    /// Fixed KDE bandwidth, or `silverman` for the data-driven rule.
    #[arg(long)]
    kde_bandwidth: Option<String>,
}

impl OverrideFlags {
    fn to_config(&self) -> Result<RunConfig, Error> {
        let kde_bandwidth = match self.kde_bandwidth.as_deref() {
            None | Some("silverman") => None,
            Some(v) => Some(v.parse::<f64>().map_err(|_| {
                Error::config("sde.kde_bandwidth", format!("not a number: `{v}`"))
            })?),
        };
        Ok(RunConfig {
            grid_n: self.grid_n,
            domain_l: self.domain_l,
            t_final: self.t_final,
            n_steps: self.n_steps,
            n_particles: self.n_particles,
            dt: self.dt,
            epsilon_reg: self.epsilon_reg,
            kde_bandwidth,
            seed: self.seed,
            ..Default::default()
        })
    }
}

const EXIT_INVARIANT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::ValidateConfig(args) => cmd_validate(args),
    }
}

fn load_file_config(path: Option<&PathBuf>) -> Result<RunConfig, ExitCode> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => load_config(p).map_err(|errs| {
            for e in errs {
                eprintln!("config error: {e}");
            }
            ExitCode::from(EXIT_CONFIG)
        }),
    }
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let scenario = match Scenario::parse(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let file_cfg = match load_file_config(args.config.as_ref()) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let flag_cfg = match args.overrides.to_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let merged = flag_cfg.over(&file_cfg);
    if let Err(e) = resolve(scenario, &merged) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let out_dir = args
        .out_dir
        .or_else(|| std::env::var_os("PMESIM_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(scenario.name()));

    match run_scenario(scenario, &merged, &out_dir) {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!(
                    "{} {}: {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{}: {} files in {}",
                if outcome.pass { "ok" } else { "invariant failure" },
                outcome.files.len() + 1,
                out_dir.display()
            );
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_INVARIANT)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            write_error_manifest(&out_dir, scenario.name(), &e);
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn cmd_validate(args: ValidateArgs) -> ExitCode {
    let scenario = match args.scenario.as_deref().map(Scenario::parse).transpose() {
        Ok(s) => s.unwrap_or(Scenario::Heat),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let cfg = match load_config(&args.config) {
        Ok(c) => c,
        Err(errs) => {
            for e in &errs {
                eprintln!("config error: {e}");
            }
            eprintln!("{} error(s)", errs.len());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match resolve(scenario, &cfg) {
        Ok(resolved) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&resolved).expect("resolved config serializes")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
