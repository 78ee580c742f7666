use aoi_cli::commands::{cmd_bounds, cmd_simulate, cmd_solve_probs, CliError};
use aoi_cli::presets::{run_preset, PresetOpts};
use aoi_cli::table::Table;
use aoi_core::scenario::Scenario;
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Scheduling simulator and bound calculator for multi-source status
/// updates over a shared channel.
#[derive(Parser)]
#[command(name = "aoi", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the marking-probability program for a scenario.
    SolveProbs {
        /// Scenario TOML file.
        #[arg(long)]
        config: PathBuf,
        /// Directory to write solve_probs.csv into (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lower bound, policy upper bound, and competitive-ratio bound.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured scenario over independent replications.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the replication count.
        #[arg(long)]
        reps: Option<u64>,
        /// Also write an event trace and period log (requires --out).
        #[arg(long)]
        trace: bool,
        /// Worker threads for replications.
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// Run a named figure-reproduction sweep.
    Experiment {
        /// One of: fig3, fig4, fig5, fig6, fig7, fig8, fig9, fig10, example1.
        preset: String,
        /// Directory for the sweep CSVs.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Override the preset's replication count.
        #[arg(long)]
        reps: Option<u64>,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        /// CSV of `x,value` rows with externally computed lower bounds
        /// (used by the fig8 sweep).
        #[arg(long)]
        lb_file: Option<PathBuf>,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn load_scenario(path: &Path, seed: Option<u64>, reps: Option<u64>) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut scenario = Scenario::from_toml(&text)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    if let Some(reps) = reps {
        scenario.replications = reps;
    }
    scenario.validate()?;
    Ok(scenario)
}

fn emit(table: &Table, out: Option<&Path>, file_name: &str) -> Result<(), CliError> {
    match out {
        None => {
            print!("{}", table.render());
            Ok(())
        }
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            let path = dir.join(file_name);
            std::fs::write(&path, table.render())
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
    }
}

fn parse_lb_file(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',');
        let x = parts.next().and_then(|v| v.trim().parse::<f64>().ok());
        let y = parts.next().and_then(|v| v.trim().parse::<f64>().ok());
        match (x, y) {
            (Some(x), Some(y)) => rows.push((x, y)),
            _ => return Err(CliError::Config(format!("bad lb-file line: {line:?}"))),
        }
    }
    Ok(rows)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SolveProbs { config, out } => {
            let scenario = load_scenario(&config, None, None)?;
            let table = cmd_solve_probs(&scenario)?;
            emit(&table, out.as_deref(), "solve_probs.csv")
        }
        Command::Bounds { config, out } => {
            let scenario = load_scenario(&config, None, None)?;
            let table = cmd_bounds(&scenario)?;
            emit(&table, out.as_deref(), "bounds.csv")
        }
        Command::Simulate { config, out, seed, reps, trace, workers } => {
            if trace && out.is_none() {
                return Err(CliError::Config("--trace needs --out for the extra files".into()));
            }
            let scenario = load_scenario(&config, seed, reps)?;
            let output = cmd_simulate(&scenario, workers, trace)?;
            emit(&output.results, out.as_deref(), "simulate.csv")?;
            if let Some(trace_table) = &output.trace {
                emit(trace_table, out.as_deref(), "trace.csv")?;
            }
            if let Some(periods) = &output.periods {
                emit(periods, out.as_deref(), "periods.csv")?;
            }
            Ok(())
        }
        Command::Experiment { preset, out, seed, reps, workers, lb_file } => {
            let external_lb = lb_file.as_deref().map(parse_lb_file).transpose()?;
            let opts = PresetOpts { seed, reps, workers, external_lb };
            let tables = run_preset(&preset, &opts)?;
            for (file_name, table) in &tables {
                emit(table, Some(out.as_path()), file_name)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
