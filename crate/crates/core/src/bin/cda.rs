use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cda_core::harness::experiments::{ProjectionKind, ProjectionSummary, ProjectionSweep};
use cda_core::harness::run::{mu_label, parse_mu};
use cda_core::harness::{run_experiment, table_from_runs, verify_all, ExperimentConfig, Manifest};
use cda_core::{Error, Result};

#[derive(Parser)]
#[command(name = "cda", version, about = "Continuous data assimilation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its artifacts.
    Run { config: PathBuf },
    /// Build a rate table from finished run directories.
    Table {
        dirs: Vec<PathBuf>,
        /// Use only runs with this μ (`inf` for direct enforcement).
        #[arg(long, value_parser = mu_arg)]
        mu: Option<f64>,
    },
    /// Run a config once for each μ given.
    SweepMu {
        config: PathBuf,
        #[arg(long, value_parser = mu_arg, num_args = 1.., required = true)]
        mu: Vec<f64>,
        /// Output directory (defaults to the config's).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Poisson and Stokes projection sweeps over h and μ.
    CheckProjections {
        #[arg(long, num_args = 1.., default_values_t = [8, 16, 32])]
        resolutions: Vec<usize>,
    },
    /// Check the exact identities and structural properties.
    VerifyProperties {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn mu_arg(s: &str) -> std::result::Result<f64, String> {
    parse_mu(s).map_err(|e| e.to_string())
}

fn print_manifest(dir: &std::path::Path, m: &Manifest) {
    println!("{}: {} runs in {:.1}s -> {}", m.label, m.runs.len(), m.wall_seconds, dir.display());
    for r in &m.runs {
        println!("  {:<28} L2 {:.4e}  H1 {:.4e}", r.tag, r.final_l2, r.final_h1);
    }
    for t in &m.rate_tables {
        let rates: Vec<String> = t.table.rates().iter().map(|r| format!("{r:.3}")).collect();
        println!("  {}: rates [{}]", t.name, rates.join(", "));
    }
    for p in &m.mu_report {
        println!(
            "  mu {} vs {}: final rel diff {:.3e}, max after step 10 {:.3e}",
            p.mu_a, p.mu_b, p.final_rel_diff, p.max_rel_diff_after_10
        );
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let m = run_experiment(&cfg)?;
            print_manifest(&cfg.output.dir, &m);
        }
        Command::Table { dirs, mu } => {
            print!("{}", table_from_runs(&dirs, mu)?.to_csv());
        }
        Command::SweepMu { config, mu, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.cda.mu = mu;
            if let Some(out) = out {
                cfg.output.dir = out;
            }
            cfg.validate()?;
            let m = run_experiment(&cfg)?;
            print_manifest(&cfg.output.dir, &m);
        }
        Command::CheckProjections { resolutions } => {
            for kind in [ProjectionKind::Poisson, ProjectionKind::Stokes] {
                let sweep = ProjectionSweep {
                    resolutions: resolutions.clone(),
                    ..ProjectionSweep::standard(kind)
                };
                let rows = sweep.run()?;
                println!("{kind:?} projection");
                println!("  n     mu       L2          H1");
                for r in &rows {
                    println!("  {:<5} {:<8} {:.4e}  {:.4e}", r.n, mu_label(r.mu), r.l2, r.h1);
                }
                let s = ProjectionSummary::new(&rows)?;
                for (mu, l2, h1) in &s.rates {
                    println!("  mu {:<8} L2 rates {l2:.3?}  H1 rates {h1:.3?}", mu_label(*mu));
                }
                for (n, ratio) in &s.spread {
                    println!("  n {n:<5} max/min L2 over mu {ratio:.4}");
                }
            }
        }
        Command::VerifyProperties { seed } => {
            let checks = verify_all(seed)?;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(Error::exit_code(&e) as u8)
        }
    }
}
