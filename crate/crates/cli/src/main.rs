use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use u1qec::scaling::{Quantity, Refinement};
use u1qec_cli::commands::{self, PlotKind, RunOptions};
use u1qec_cli::config::{FitSettings, Kind};
use u1qec_cli::verify;

#[derive(Parser)]
#[command(name = "u1qec", version, about = "Charge-informed U(1) decoding sweeps and scaling analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run or resume the sweep described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        seed_override: Option<u64>,
        /// Stop after this many new tasks.
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
    },
    /// Weber-Minnhagen fit of a finished sweep.
    Fit {
        /// Config of kind `fit`; its `input` and `[fit]` table are used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Sweep directory; overrides the config.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_parser = parse_quantity, default_value = "upsilon")]
        quantity: Quantity,
        /// Fix the jump and fit only `c`.
        #[arg(long)]
        fixed_jump: Option<f64>,
        /// Write the JSON report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scaling collapse of a finished sweep; settings come from a `collapse` config.
    Collapse {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a tab-separated table from a sweep directory.
    PlotData {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in oracle, identity and closed-form checks.
    Verify,
}

fn parse_quantity(s: &str) -> Result<Quantity, String> {
    match s {
        "upsilon" => Ok(Quantity::Upsilon),
        "chi" => Ok(Quantity::Chi),
        "w2" => Ok(Quantity::W2),
        _ => Err(format!("unknown quantity {s:?} (upsilon, chi, w2)")),
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    print!("{text}");
    if let Some(p) = out {
        std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run { config, out, workers, resume, seed_override, stop_after } => {
            let cfg = match commands::load_config(&config, seed_override) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("usage error: {e:#}");
                    return Ok(ExitCode::from(2));
                }
            };
            match cfg.kind {
                Kind::Fit => {
                    let (input, settings) = commands::fit_settings_from(&cfg)?;
                    let text = json(&commands::fit(&input, &settings)?)?;
                    std::fs::create_dir_all(&out)?;
                    emit(&text, Some(&out.join("fit.json")))?;
                }
                Kind::Collapse => {
                    let (input, settings) = commands::collapse_settings_from(&cfg)?;
                    let text = json(&commands::collapse(&input, &settings)?)?;
                    std::fs::create_dir_all(&out)?;
                    emit(&text, Some(&out.join("collapse.json")))?;
                }
                _ => {
                    let opts = RunOptions { config, out, workers, resume, seed_override, stop_after };
                    let report = commands::run_sweep(&cfg, &opts)?;
                    print!("{}", report.summary);
                    eprintln!(
                        "{} tasks: {} resumed, {} computed, {} failed",
                        report.total_tasks,
                        report.skipped,
                        report.computed,
                        report.failures.len()
                    );
                    if !report.failures.is_empty() {
                        for (t, e) in &report.failures {
                            eprintln!(
                                "failed: point {} L={} realization {}: {e}",
                                t.point_index, t.size, t.realization
                            );
                        }
                        return Ok(ExitCode::FAILURE);
                    }
                }
            }
        }
        Command::Fit { config, input, quantity, fixed_jump, out } => {
            let (cfg_input, settings) = match config {
                Some(p) => {
                    let (i, s) = commands::fit_settings_from(&commands::load_config(&p, None)?)?;
                    (Some(i), s)
                }
                None => (None, FitSettings { quantity, fixed_jump, refinement: Refinement::default() }),
            };
            let input = input.or(cfg_input).context("--input or a fit config is required")?;
            emit(&json(&commands::fit(&input, &settings)?)?, out.as_ref())?;
        }
        Command::Collapse { config, input, out } => {
            let (cfg_input, settings) = commands::collapse_settings_from(&commands::load_config(&config, None)?)?;
            let input = input.unwrap_or(cfg_input);
            emit(&json(&commands::collapse(&input, &settings)?)?, out.as_ref())?;
        }
        Command::PlotData { input, kind, out } => {
            emit(&commands::plot_data(&input, kind)?, out.as_ref())?;
        }
        Command::Verify => {
            let checks = verify::run_all();
            for c in &checks {
                println!("{}: {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().any(|c| !c.pass) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
