use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use icd_pcac::experiments::{self, ExperimentConfig, OUT_DIR_ENV, PRESETS};
use icd_pcac::sim::{compare, TraceTable};

#[derive(Parser)]
#[command(name = "icd-pcac", version, about = "Adaptive MPC experiments for Hammerstein systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a TOML experiment file.
    Run {
        /// Preset name or path to a TOML file.
        config: String,
        /// Dotted-path override such as `mpc.horizon=50`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory; defaults to `$ICD_PCAC_OUT/<name>` or `out/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the sweep grid with an N x N grid over [-10, 10].
        #[arg(long, value_name = "N")]
        grid: Option<usize>,
        /// Worker threads for sweeps; 0 uses every available core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Print the resolved configuration and exit.
        #[arg(long)]
        dump_config: bool,
    },
    /// Compare two trace CSV files column by column.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
    },
    /// List the built-in presets.
    ListPresets,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> icd_pcac::Result<ExitCode> {
    match cli.command {
        Command::ListPresets => {
            for (name, about) in PRESETS {
                println!("{name:<22} {about}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { a, b, tol } => {
            let report = compare(&TraceTable::load(&a)?, &TraceTable::load(&b)?, tol)?;
            for col in &report.columns {
                println!("{:<24} {:.6e}", col.name, col.max_abs_deviation);
            }
            let ok = report.within_tolerance();
            println!("max deviation {:.6e} ({})", report.max_deviation(), if ok { "within tolerance" } else { "exceeds tolerance" });
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Run { config, overrides, out, grid, workers, dump_config } => {
            let mut cfg = ExperimentConfig::resolve(&config)?;
            cfg.apply_overrides(&overrides)?;
            if let (Some(n), Some(doa)) = (grid, cfg.doa.take()) {
                cfg.doa = Some(doa.with_grid(n, -10.0, 10.0));
            }
            if dump_config {
                print!("{}", cfg.to_toml()?);
                return Ok(ExitCode::SUCCESS);
            }
            let dir = out.unwrap_or_else(|| experiments::default_out_dir().join(&cfg.name));
            let mut recorded = overrides.clone();
            if let Some(n) = grid {
                recorded.push(format!("--grid {n}"));
            }
            let output = experiments::run(&cfg, &recorded, Some(&dir), workers)?;
            let s = &output.summary;
            if let Some(e) = &s.terminal_error {
                println!("{}: terminal |y| max {:.4e}, mean {:.4e} (t >= {} s)", s.name, e.max_abs, e.mean_abs, e.from_time);
            }
            if let Some(counts) = &s.doa_converged {
                for (l, c) in counts {
                    println!("{}: horizon {l} converged {c}", s.name);
                }
            }
            println!("artifacts written to {} ({:.1} s, {OUT_DIR_ENV} sets the default root)", dir.display(), s.wall_time_s);
            Ok(if s.controller_failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
    }
}
