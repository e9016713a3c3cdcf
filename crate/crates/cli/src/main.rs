//! `xssh`: scenario runner for the crossed-chain edge-state simulations.
//!
//! Every scenario writes CSV (and JSON summaries) into the output directory
//! together with a `<scenario>.meta.json` sidecar holding the resolved
//! config and SHA-256 digests. Exit codes: 0 success, 1 I/O failure or a
//! failed `repro` check, 2 invalid input, 3 numerical failure.

mod config;
mod failure;
mod output;
mod scenarios;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use xssh_core::reproduce;

use config::{Overrides, Scenario, ScenarioConfig, DEFAULT_OUTPUT};
use failure::Failure;

#[derive(Parser)]
#[command(name = "xssh", version, about = "Edge-state transfer, SWAP gates and waveguide dissipation in crossed SSH chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Scenario config (JSON); a `.meta.json` sidecar is accepted as well.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_path`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for every random draw (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Disorder realizations per ensemble.
    #[arg(long, global = true, value_name = "N")]
    instances: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues, parities and IPRs of the coupled system.
    Spectrum,
    /// 1S -> 2S transfer through the junction.
    Transfer,
    /// Calibrated SWAP gate with population traces of three probe states.
    Swap,
    /// SWAP fidelity over a (K-, K+) grid.
    SwapMap,
    /// Sweet point (K-, K+, T) of a SWAP island.
    Calibrate,
    /// SWAP fidelity statistics under bond disorder, with and without recalibration.
    Disorder,
    /// One chain in the waveguide, started in an edge state.
    Dissipative,
    /// Remote entanglement of the chain ends after pumping the first atom.
    Entangle,
    /// Edge-state transfer between chains with waveguide dissipation.
    BellTransfer,
    /// Gate time along the sweet line versus junction strength.
    GateSweep,
    /// Runs the scenario named in `--config`.
    Run,
    /// Runs every numerical check and prints a PASS/FAIL table.
    Repro,
}

impl Command {
    fn scenario(&self) -> Option<Scenario> {
        Some(match self {
            Command::Spectrum => Scenario::Spectrum,
            Command::Transfer => Scenario::Transfer,
            Command::Swap => Scenario::Swap,
            Command::SwapMap => Scenario::SwapMap,
            Command::Calibrate => Scenario::Calibrate,
            Command::Disorder => Scenario::Disorder,
            Command::Dissipative => Scenario::Dissipative,
            Command::Entangle => Scenario::Entangle,
            Command::BellTransfer => Scenario::BellTransfer,
            Command::GateSweep => Scenario::GateSweep,
            Command::Run | Command::Repro => return None,
        })
    }
}

fn load_config(command: &Command, common: &Common) -> Result<ScenarioConfig, Failure> {
    let wanted = command.scenario();
    let config = match (&common.config, wanted) {
        (Some(path), _) => ScenarioConfig::load(path)?,
        (None, Some(s)) => ScenarioConfig::default_for(s),
        (None, None) => return Err(Failure::config(Some("--config".into()), "`run` needs a config file")),
    };
    if let Some(s) = wanted {
        if config.scenario != s {
            return Err(Failure::config(
                Some("scenario".into()),
                format!("config is for `{}` but the `{s}` subcommand was given", config.scenario),
            ));
        }
    }
    config.resolve(&Overrides {
        seed: common.seed,
        instances: common.instances,
        out: common.out.as_ref().map(|p| p.display().to_string()),
    })
}

fn run_scenario(command: &Command, common: &Common, out_dir: &mut PathBuf) -> Result<(), Failure> {
    let config = load_config(command, common)?;
    *out_dir = PathBuf::from(config.output_path.as_deref().unwrap_or(DEFAULT_OUTPUT));
    let artifacts = scenarios::run(&config)?;
    for path in output::write_run(out_dir, &config, &artifacts)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn repro(common: &Common) -> Result<bool, Failure> {
    let results: Vec<_> = reproduce::checks()
        .into_par_iter()
        .map(|(name, check)| reproduce::run_check(name, check))
        .collect();
    for r in &results {
        println!("{}", r.line());
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} checks passed", results.len());
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        let mut bytes = serde_json::to_vec_pretty(&results).expect("results serialize");
        bytes.push(b'\n');
        std::fs::write(dir.join("repro.json"), bytes)?;
    }
    Ok(passed == results.len())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = &cli.common;
    let mut out_dir = common.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));

    let result = (|| {
        if let Some(n) = common.threads {
            if n == 0 {
                return Err(Failure::config(Some("--threads".into()), "must be at least 1"));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::config(Some("--threads".into()), e.to_string()))?;
        }
        match cli.command {
            Command::Repro => repro(common),
            ref command => run_scenario(command, common, &mut out_dir).map(|()| true),
        }
    })();

    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(failure) => {
            output::write_error(&out_dir, &failure);
            eprintln!("error: {failure}");
            eprintln!("{}", failure.record());
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
