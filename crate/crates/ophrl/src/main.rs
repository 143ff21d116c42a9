use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ophrl::diagnostics;
use ophrl::envs::{self, AgentShape, Domain};
use ophrl::error::{Error, Result};
use ophrl::harness::{self, ExperimentConfig};
use ophrl::learners::LearnerVariant;
use ophrl::mdp::format_real;
use ophrl::oracle;

#[derive(Parser)]
#[command(name = "ophrl", about = "Hierarchical reinforcement learning experiment runner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file.
    Run {
        /// Path to a flat key=value config.
        config: PathBuf,
    },
    /// Run a named preset, optionally overriding keys.
    Preset {
        /// One of: bandit_fig3, cliff_fig6, cliff_desk, taxi_fig9, taxi_fig9_desk.
        name: String,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// key=value overrides, repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Print the effective config and exit without running.
        #[arg(long)]
        print: bool,
    },
    /// Solve a domain exactly and print its optimal values.
    Oracle {
        /// bandit, cliff, or taxi.
        domain: String,
        /// Cliff width.
        #[arg(long, default_value_t = 100)]
        width: u32,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        /// Dump the full Q* table instead of the summary.
        #[arg(long)]
        dump: bool,
    },
    /// Validate a config file without running it.
    Validate { config: PathBuf },
    /// Diagnostic batteries.
    Diagnose {
        #[command(subcommand)]
        what: DiagnoseCommand,
    },
}

#[derive(Subcommand)]
enum DiagnoseCommand {
    /// Bandit policy census across learner variants.
    Bandit {
        #[arg(long, default_value_t = 1000)]
        runs: u32,
        #[arg(long, default_value_t = 500)]
        episodes: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Restrict to one learner variant.
        #[arg(long)]
        variant: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = ExperimentConfig::parse(&text)?;
            report(harness::run_experiment(&cfg)?);
            Ok(())
        }
        Command::Preset { name, out, overrides, print } => {
            let mut cfg = harness::preset(&name)?;
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            let parsed: Vec<(String, String)> = overrides
                .iter()
                .map(|o| {
                    o.split_once('=')
                        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                        .ok_or_else(|| Error::Config(format!("override `{o}` is not KEY=VALUE")))
                })
                .collect::<Result<_>>()?;
            let cfg = cfg.with_overrides(&parsed)?;
            if print {
                print!("{}", cfg.to_text());
                return Ok(());
            }
            report(harness::run_experiment(&cfg)?);
            Ok(())
        }
        Command::Oracle { domain, width, gamma, tolerance, dump } => {
            let domain = match domain.as_str() {
                "bandit" => Domain::Bandit,
                "cliff" => Domain::Cliff { width },
                "taxi" => Domain::Taxi,
                other => return Err(Error::Config(format!("unknown domain `{other}`"))),
            };
            let env = envs::make_env(&domain);
            let mdp = env.enumerate();
            let result = oracle::value_iteration(&mdp, gamma, tolerance, 100_000)?;
            if dump {
                let mut cells: Vec<_> = result.q_star.iter().collect();
                cells.sort_by_key(|((s, a), _)| (*s, *a));
                for ((s, a), v) in cells {
                    println!("{},{},{},{}", domain.name(), s, env.primitive_name(*a), format_real(*v));
                }
            } else {
                println!(
                    "{}: {} states, {} iterations, residual {:.3e}",
                    domain.name(),
                    mdp.states.len(),
                    result.iterations,
                    result.residual
                );
                println!("expected optimal start value: {}", format_real(result.start_value(&mdp)));
            }
            Ok(())
        }
        Command::Validate { config } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = ExperimentConfig::parse(&text)?;
            cfg.validate()?;
            // also validate the hierarchy over the enumerated states
            let h = envs::make_hierarchy(&cfg.domain, cfg.agent)?;
            let states = envs::sample_states(&cfg.domain);
            let diags = h.validate(&states);
            if diags.is_empty() {
                println!("ok: {}", cfg.name);
                Ok(())
            } else {
                for d in &diags {
                    eprintln!("{:?}: {}", d.kind, d.detail);
                }
                Err(Error::Config(format!("{} hierarchy diagnostics", diags.len())))
            }
        }
        Command::Diagnose { what } => match what {
            DiagnoseCommand::Bandit { runs, episodes, seed, variant } => {
                let variants: Vec<LearnerVariant> = match variant {
                    Some(v) => vec![LearnerVariant::parse(&v)?],
                    None => vec![
                        LearnerVariant::NaiveQ0,
                        LearnerVariant::FixedQ0,
                        LearnerVariant::FixedOsio,
                        LearnerVariant::Gtsdt,
                    ],
                };
                for v in variants {
                    let c = diagnostics::census(v, AgentShape::Paper, runs, episodes, seed)?;
                    print!("{}", diagnostics::format_census(v, &c));
                }
                Ok(())
            }
        },
    }
}

fn report(summary: harness::Summary) {
    println!("experiment {} finished", summary.name);
    println!("  mean greedy return: {:.3}", summary.mean_greedy_return);
    println!("  mean success rate:  {:.3}", summary.mean_success_rate);
    println!("  mean auc:           {:.1}", summary.mean_auc);
    println!("  csv: {}", summary.csv_path.display());
    println!("  svg: {}", summary.svg_path.display());
    println!("  summary: {}", summary.summary_path.display());
}
