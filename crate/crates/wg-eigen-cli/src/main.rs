//! Command-line driver for the WG eigenvalue convergence studies.
//!
//! Exit codes: 0 on full success, 1 on configuration errors, 2 when one or
//! more schedule levels failed to solve (partial results are still written).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wg_eigen::experiment::{
    any_level_failed, config_from_pairs, parse_config_file, preset_by_name, presets, run,
    ConvergenceTable,
};

#[derive(Parser)]
#[command(
    name = "wg-eigen",
    version,
    about = "Weak Galerkin eigenvalue solver and convergence-study driver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Direct eigensolve over a schedule of meshes.
    Direct(RunArgs),
    /// Coarse eigensolve plus one fine linear solve per index (two-grid).
    TwoGrid(RunArgs),
    /// Low-degree eigensolve plus a high-degree correction on one mesh.
    TwoSpace(RunArgs),
    /// Run a named preset experiment.
    Preset {
        name: String,
        /// Allow the largest reference runs (resolutions past the desk-scale cap).
        #[arg(long)]
        unlock_large: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// List the available presets.
    ListPresets,
}

#[derive(Args)]
struct RunArgs {
    /// Flat key-value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// unit_square or l_shape.
    #[arg(long)]
    domain: Option<String>,
    /// right_up, right_down, or crisscross.
    #[arg(long)]
    pattern: Option<String>,
    /// Polynomial degree (direct and two-grid).
    #[arg(long)]
    k: Option<usize>,
    /// Low degree of the two-space scheme.
    #[arg(long)]
    k1: Option<usize>,
    /// High degree of the two-space scheme.
    #[arg(long)]
    k2: Option<usize>,
    /// Stabilization exponent in [0, 1).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Schedule `H,h;H,h;...` (two-grid) or `h;h;...`, entries as `1/n` or `n`.
    #[arg(long)]
    schedule: Option<String>,
    /// Number of eigenvalues per level.
    #[arg(long)]
    nev: Option<usize>,
    /// Algebraic solver tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Override of the dual-regularity exponent used in predicted orders.
    #[arg(long)]
    gamma: Option<f64>,
    /// Allow resolutions past the desk-scale cap.
    #[arg(long)]
    unlock_large: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct OutputArgs {
    /// Write `<name>.txt`, `<name>.csv`, and `<name>.plot.dat` here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Write the CSV to an explicit path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the plot data to an explicit path.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

fn merge_run_args(
    args: &RunArgs,
    algorithm: &str,
) -> Result<BTreeMap<String, String>, wg_eigen::error::ConfigError> {
    let mut pairs = match &args.config {
        Some(path) => parse_config_file(&std::fs::read_to_string(path)?)?,
        None => BTreeMap::new(),
    };
    pairs.insert("algorithm".to_string(), algorithm.to_string());
    let mut set = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            pairs.insert(key.to_string(), v);
        }
    };
    set("domain", args.domain.clone());
    set("pattern", args.pattern.clone());
    set("k", args.k.map(|v| v.to_string()));
    set("k1", args.k1.map(|v| v.to_string()));
    set("k2", args.k2.map(|v| v.to_string()));
    set("epsilon", args.epsilon.map(|v| v.to_string()));
    set("schedule", args.schedule.clone());
    set("nev", args.nev.map(|v| v.to_string()));
    set("tol", args.tol.map(|v| v.to_string()));
    set("gamma", args.gamma.map(|v| v.to_string()));
    if args.unlock_large {
        pairs.insert("unlock_large".to_string(), "true".to_string());
    }
    Ok(pairs)
}

fn emit(table: &ConvergenceTable, output: &OutputArgs) -> std::io::Result<()> {
    print!("{}", table.render_text());
    if let Some(dir) = &output.out_dir {
        for path in table.write_artifacts(dir)? {
            eprintln!("wrote {}", path.display());
        }
    }
    if let Some(path) = &output.csv {
        std::fs::write(path, table.render_csv())?;
        eprintln!("wrote {}", path.display());
    }
    if let Some(path) = &output.plot_data {
        std::fs::write(path, table.render_plot_data())?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn finish(table: &ConvergenceTable, output: &OutputArgs) -> ExitCode {
    if let Err(e) = emit(table, output) {
        eprintln!("error writing outputs: {e}");
        return ExitCode::from(1);
    }
    if any_level_failed(table) {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn run_subcommand(args: &RunArgs, algorithm: &str) -> ExitCode {
    let config = match merge_run_args(args, algorithm).and_then(|pairs| config_from_pairs(&pairs)) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&config) {
        Ok(table) => finish(&table, &args.output),
        Err(e) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Direct(args) => run_subcommand(args, "direct"),
        Command::TwoGrid(args) => run_subcommand(args, "two_grid"),
        Command::TwoSpace(args) => run_subcommand(args, "two_space"),
        Command::Preset {
            name,
            unlock_large,
            output,
        } => {
            let config = match preset_by_name(name, *unlock_large) {
                Ok(config) => config,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(1);
                }
            };
            match run(&config) {
                Ok(table) => finish(&table, output),
                Err(e) => {
                    eprintln!("config error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::ListPresets => {
            for preset in presets(false) {
                let schedule: Vec<String> = preset
                    .schedule
                    .iter()
                    .map(|l| match l.coarse {
                        Some(c) => format!("1/{},1/{}", c, l.fine),
                        None => format!("1/{}", l.fine),
                    })
                    .collect();
                println!(
                    "{:<10} {:<10} {:<9} k1={} k2={} eps={:<4} schedule {}",
                    preset.name,
                    preset.algorithm.name(),
                    preset.domain.name(),
                    preset.k1,
                    preset.k2,
                    preset.epsilon,
                    schedule.join(";"),
                );
            }
            ExitCode::SUCCESS
        }
    }
}
