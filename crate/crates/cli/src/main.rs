use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use csit_dof::harness::{self, parse_lambda, write_run, ExperimentConfig, ScheduleKind};
use csit_dof::{
    build_polytope, lambda_star, lambda_star_via_lp, max_weighted, summed_bound, BoundOptions,
    CsitSchedule, Error,
};

/// Exit status when a schedule exceeds its perfect-CSIT cap.
const AUDIT_EXIT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "csit-dof",
    version,
    about = "MISO broadcast channel with intermittent perfect CSIT"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a schedule and evaluate the outer bound at its lambda.
    Run(ExperimentArgs),
    /// Outer bound (and optionally achieved slope) over a list of lambdas.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated lambdas; fractions like 2/3 are accepted.
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<String>,
        /// Bounds only.
        #[arg(long)]
        no_sim: bool,
    },
    /// Outer bound only, no simulation.
    Bound {
        #[arg(long = "M")]
        antennas: usize,
        #[arg(long = "K")]
        users: usize,
        #[arg(long)]
        lambda: String,
        #[arg(long)]
        tightened: bool,
        #[arg(long)]
        no_box: bool,
        /// Also write the polytope as JSON.
        #[arg(long)]
        polytope: Option<PathBuf>,
    },
    /// Emit a schedule file.
    Schedule {
        #[arg(long, default_value = "cyclic_window")]
        kind: String,
        #[arg(long = "M", default_value_t = 1)]
        antennas: usize,
        #[arg(long = "K")]
        users: usize,
        #[arg(long)]
        slots: usize,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimum perfect-CSIT fraction for sum DoF min(M,K).
    LambdaStar {
        antennas: usize,
        users: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

/// Config file plus overrides. Precedence: file, then `CSIT_DOF_SEED`, then
/// flags.
#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "M")]
    antennas: Option<usize>,
    #[arg(long = "K")]
    users: Option<usize>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    lambda_cap: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated SNR points in dB.
    #[arg(long, value_delimiter = ',')]
    snr: Option<Vec<f64>>,
    #[arg(long)]
    slots: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tightened: bool,
    #[arg(long)]
    no_box: bool,
    /// Run work units on one thread (results are identical).
    #[arg(long)]
    serial: bool,
}

impl ExperimentArgs {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => {
                let (Some(m), Some(k)) = (self.antennas, self.users) else {
                    bail!("--M and --K are required without --config");
                };
                ExperimentConfig::new(m, k)
            }
        };
        cfg.apply_seed_env()?;
        if let Some(m) = self.antennas {
            cfg.antennas = m;
        }
        if let Some(k) = self.users {
            cfg.users = k;
        }
        if let Some(s) = &self.schedule {
            cfg.schedule = s.parse::<ScheduleKind>()?;
        }
        if let Some(l) = &self.lambda_cap {
            cfg.lambda_cap = Some(parse_lambda(l)?);
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(snr) = &self.snr {
            cfg.snr_db = snr.clone();
        }
        if let Some(n) = self.slots {
            cfg.slots = n;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(out) = &self.out {
            cfg.output = out.clone();
        }
        if self.tightened {
            cfg.bounds.tightened = true;
        }
        if self.no_box {
            cfg.bounds.boxed = false;
        }
        if self.serial {
            cfg.parallel = false;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::AuditFailure { .. }) => ExitCode::from(AUDIT_EXIT),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let out = harness::run(&cfg)?;
            write_run(&out.report, &cfg.output)?;
            println!(
                "dof_slope {:.4} (stderr {:.4}), outer bound {:.4} capped {:.4}, lambda* {:.6}",
                out.report.dof_slope,
                out.report.slope_stderr,
                out.report.bound.raw,
                out.report.bound.capped,
                out.report.bound.lambda_star
            );
            println!(
                "wrote {} and {}",
                cfg.output.display(),
                harness::csv_path(&cfg.output).display()
            );
        }
        Command::Sweep {
            exp,
            lambdas,
            no_sim,
        } => {
            let cfg = exp.resolve()?;
            let lambdas = lambdas
                .iter()
                .map(|s| parse_lambda(s))
                .collect::<Result<Vec<_>, _>>()?;
            let result = harness::sweep_lambda(&lambdas, !no_sim, &cfg)?;
            write_file(&cfg.output, &result.to_json())?;
            let csv = harness::csv_path(&cfg.output);
            write_file(&csv, &result.to_csv())?;
            print!("{}", result.to_csv());
            for r in result.violations() {
                eprintln!(
                    "warning: lambda {} achieved slope {:?} exceeds capped bound {}",
                    r.lambda, r.achieved_slope, r.outer_bound_capped
                );
            }
        }
        Command::Bound {
            antennas,
            users,
            lambda,
            tightened,
            no_box,
            polytope,
        } => {
            let lambda = parse_lambda(&lambda)?;
            let options = BoundOptions {
                tightened,
                boxed: !no_box,
            };
            let poly = build_polytope(antennas, users, lambda, options)?;
            let report = max_weighted(&poly, &vec![1.0; users])?;
            if let Some(path) = polytope {
                write_file(&path, &poly.to_json())?;
            }
            let out = serde_json::json!({
                "M": antennas,
                "K": users,
                "lambda": lambda,
                "raw": report.raw_max_sum,
                "capped": report.capped_max_sum,
                "argmax_point": report.argmax_point,
                "tight_constraints": report.tight_constraints,
                "summed_bound": summed_bound(antennas, users, lambda),
                "lambda_star": lambda_star(antennas, users),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Schedule {
            kind,
            antennas,
            users,
            slots,
            out,
        } => {
            let kind: ScheduleKind = kind.parse()?;
            let schedule: CsitSchedule = kind.build(antennas, users, slots)?;
            match out {
                Some(path) => schedule.to_file(&path)?,
                None => print!("{schedule}"),
            }
        }
        Command::LambdaStar {
            antennas,
            users,
            tol,
        } => {
            if antennas == 0 || users == 0 {
                bail!("M and K must be positive");
            }
            if !(tol > 0.0) {
                bail!("--tol must be positive");
            }
            println!(
                "{} {}",
                lambda_star(antennas, users),
                lambda_star_via_lp(antennas, users, tol)
            );
        }
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
