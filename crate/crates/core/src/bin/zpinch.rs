use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use zpinch::config::RunConfig;
use zpinch::forms::ModePair;
use zpinch::run::{run_equilibrium, run_evolve, run_growth, run_scan, InitialData};
use zpinch::scan::ModeRange;
use zpinch::verify::run_verify;
use zpinch::Result;

/// Viscous growth rates of z-pinch modes.
#[derive(Parser)]
#[command(name = "zpinch", version)]
struct Cli {
    /// run configuration (TOML)
    #[arg(short, long, global = true, default_value = "parabolic.cfg")]
    config: PathBuf,
    /// directory for output files (created if missing)
    #[arg(short, long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the steady state and its pointwise criteria.
    Equilibrium {
        /// number of plasma sample intervals
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Growth rate of one mode.
    Growth {
        #[arg(long, allow_hyphen_values = true)]
        m: i64,
        #[arg(long, allow_hyphen_values = true)]
        k: i64,
        /// also write lambda.csv with every λ(s) evaluated
        #[arg(long)]
        lambda_csv: bool,
    },
    /// Growth rates over a rectangle of modes.
    Scan {
        /// inclusive range a:b; defaults to the config
        #[arg(long, allow_hyphen_values = true)]
        m_range: Option<ModeRange>,
        #[arg(long, allow_hyphen_values = true)]
        k_range: Option<ModeRange>,
    },
    /// Time-integrate one mode.
    Evolve {
        #[arg(long, allow_hyphen_values = true)]
        m: i64,
        #[arg(long, allow_hyphen_values = true)]
        k: i64,
        #[arg(long)]
        t_final: f64,
        #[arg(long)]
        dt: f64,
        /// eigenmode | random:<seed>
        #[arg(long, default_value = "eigenmode")]
        init: InitialData,
    },
    /// Run the invariant suite.
    Verify,
}

fn verbose() -> bool {
    std::env::var("ZPINCH_LOG").is_ok_and(|v| !v.is_empty() && v != "0")
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = RunConfig::from_path(&cli.config)?;
    std::fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();
    if verbose() {
        eprintln!("config {} (hash {})", cli.config.display(), cfg.hash());
    }
    match cli.command {
        Command::Equilibrium { points } => {
            let p = run_equilibrium(&cfg, out, points)?;
            println!("profile {}: admissible = {}", p.profile, p.admissibility.admissible);
            for c in &p.criteria {
                println!("  m = {}: min criterion {:.6e} at r = {:.4}", c.m, c.min_value, c.argmin);
            }
            Ok(true)
        }
        Command::Growth { m, k, lambda_csv } => {
            let p = run_growth(&cfg, out, ModePair::new(m, k), lambda_csv)?;
            println!("({m},{k}) {}: mu = {:.12e}, |Phi-1| = {:.2e}", p.status.as_str(), p.mu, p.residuals.fixed_point);
            Ok(true)
        }
        Command::Scan { m_range, k_range } => {
            let (report, p) = run_scan(&cfg, out, m_range.unwrap_or(cfg.m_range()), k_range.unwrap_or(cfg.k_range()))?;
            match p.argmax {
                Some(a) => println!("Lambda = {:.12e} at {a}", p.lambda),
                None => println!("no unstable mode; Lambda = 0"),
            }
            println!("{}", p.decay.diagnostic);
            if verbose() {
                for r in &report.modes {
                    eprintln!("  {} {} mu = {:.9e}", r.mode, r.status.as_str(), r.mu);
                }
            }
            for f in &p.failures {
                eprintln!("error: {f}");
            }
            Ok(p.failures.is_empty())
        }
        Command::Evolve { m, k, t_final, dt, init } => {
            let p = run_evolve(&cfg, out, ModePair::new(m, k), t_final, dt, init)?;
            println!(
                "({m},{k}) mu = {:.9e}; energy identity {:.2e}; growth bound {}",
                p.mu,
                p.energy_identity_residual,
                if p.growth_bound.passed { "holds" } else { "violated" }
            );
            Ok(p.growth_bound.passed)
        }
        Command::Verify => {
            let r = run_verify(&cfg, out)?;
            for c in &r.checks {
                println!("{}", c.line());
            }
            for c in &r.caveats {
                println!("note: {c}");
            }
            Ok(r.passed)
        }
    }
}

fn main() -> ExitCode {
    // usage errors count as invalid input; help and version exit cleanly
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
