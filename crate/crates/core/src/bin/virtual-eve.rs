use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use virtual_eve::harness::{
    emit_csv, emit_history_csv, emit_plot_data, emit_table2_csv, run_convergence, run_sweep,
    run_table2, HarnessConfig, RunOptions, Strategy, SweepSpec, SweepVariable,
};
use virtual_eve::Result;

#[derive(Parser)]
#[command(
    name = "virtual-eve",
    about = "Virtual movable-antenna eavesdropper experiments"
)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of averaging trials.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file (CSV).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parameter sweep; writes the result CSV and plot-data files.
    Sweep {
        /// num_eves, path_loss_exponent, noise_power, move_range,
        /// num_virtual_mas or eve_distance_offset.
        #[arg(long)]
        sweep: String,
        /// Restrict to one strategy (repeatable).
        #[arg(long)]
        strategy: Vec<String>,
        /// Comma-separated sweep values; defaults depend on the variable.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Comma-separated virtual array sizes.
        #[arg(long, value_delimiter = ',')]
        ma_counts: Vec<usize>,
        /// Record wall time in runtime_s (makes output non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Secrecy-rate comparison for the three fixed eavesdropper rows.
    Table2,
    /// Iteration history of the alternating optimiser on one instance.
    Converge,
    /// Print the effective configuration.
    ShowConfig,
}

fn load_config(cli: &Cli) -> Result<HarnessConfig> {
    let mut cfg = match &cli.config {
        Some(path) => HarnessConfig::load(path)?,
        None => HarnessConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| {
            virtual_eve::Error::Config(format!("override {kv:?} is not key=value"))
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(t) = cli.trials {
        cfg.trial.num_trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Sweep {
            sweep,
            strategy,
            values,
            ma_counts,
            timing,
        } => {
            let variable: SweepVariable = sweep.parse()?;
            let mut spec = SweepSpec::new(variable, &cfg);
            if !strategy.is_empty() {
                spec.strategies = strategy
                    .iter()
                    .map(|s| s.parse::<Strategy>())
                    .collect::<Result<_>>()?;
            }
            if !values.is_empty() {
                spec.values = values.clone();
            }
            if !ma_counts.is_empty() {
                spec.ma_counts = ma_counts.clone();
            }
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("{sweep}.csv")));
            let result = run_sweep(
                &spec,
                &cfg,
                RunOptions {
                    record_timing: *timing,
                },
            )?;
            for f in &result.failures {
                eprintln!(
                    "cell {}={} strategy={} num_mas={} failed: {}",
                    sweep,
                    f.sweep_value,
                    f.strategy.as_str(),
                    f.num_mas,
                    f.message
                );
            }
            emit_csv(&result.rows, &out)?;
            let plots = emit_plot_data(&result.rows, &out)?;
            println!("wrote {} rows to {}", result.rows.len(), out.display());
            for p in plots {
                println!("wrote {}", p.display());
            }
        }
        Command::Table2 => {
            let rows = run_table2(&cfg)?;
            println!(
                "{:<22} {:>8} {:>14} {:>14} {:>9}",
                "eve distances (m)", "d (m)", "R_col", "R_veve", "error"
            );
            for r in &rows {
                let eves: Vec<String> = r.eve_distances.iter().map(|d| d.to_string()).collect();
                println!(
                    "{:<22} {:>8.3} {:>14.6e} {:>14.6e} {:>8.3}%",
                    format!("[{}]", eves.join(" ")),
                    r.d_m,
                    r.secrecy_col,
                    r.secrecy_veve,
                    100.0 * r.error
                );
            }
            if let Some(out) = &cli.out {
                emit_table2_csv(&rows, out)?;
                println!("wrote {}", out.display());
            }
        }
        Command::Converge => {
            let state = run_convergence(&cfg)?;
            for h in &state.history {
                println!(
                    "iter {:>2}  d = {:.6} m  E[dSNR] = {:.6e}",
                    h.iter, h.d, h.objective
                );
            }
            println!(
                "final d = {:.6} m, E[dSNR] = {:.6e}, converged = {}, stagnated = {}",
                state.d, state.objective, state.converged, state.stagnated
            );
            if let Some(out) = &cli.out {
                emit_history_csv(&state, out)?;
                println!("wrote {}", out.display());
            }
        }
        Command::ShowConfig => print!("{}", cfg.to_text()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
