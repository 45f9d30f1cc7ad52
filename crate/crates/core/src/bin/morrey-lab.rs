use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use morrey_lab::harness::{
    list_catalog, run, ExperimentConfig, ExperimentKind, KernelAuditParams, KernelFamily, KernelSpec, RunReport,
    WeightCheckParams, WeightExpectation,
};
use morrey_lab::weights::{Condition, WeightFamily};

/// Numerical checks for parabolic Morrey spaces, singular integrals and the Cauchy-Dirichlet problem.
///
/// The node budget per object can be raised with MORREY_NODE_BUDGET.
#[derive(Parser)]
#[command(name = "morrey-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for report.json and the CSV tables (overrides `output`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the manufactured problems, weight and kernel families and battery presets.
    List,
    /// Audit the kernel axioms of a family (every second-order component).
    AuditKernel {
        /// gaussian-jet, heat or majorant.
        family: String,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check conditions A and B for a weight expression in x1..xn, t, r.
    CheckWeight {
        expr: String,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn finish(report: &RunReport, out: Option<PathBuf>) -> morrey_lab::Result<ExitCode> {
    print!("{}", report.summary());
    if let Some(dir) = out {
        for path in report.write_to(&dir)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(ExitCode::from(report.exit_code() as u8))
}

fn main_inner(cli: Cli) -> morrey_lab::Result<ExitCode> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = out.or_else(|| cfg.output.clone());
            let report = run(&cfg)?;
            finish(&report, out)
        }
        Command::List => {
            print!("{}", list_catalog());
            Ok(ExitCode::SUCCESS)
        }
        Command::AuditKernel { family, n, seed } => {
            let mut cfg = ExperimentConfig::empty(ExperimentKind::KernelAudit, seed);
            cfg.kernel_audit = Some(KernelAuditParams {
                kernel: KernelSpec {
                    family: KernelFamily::parse(&family)?,
                    n,
                    component: None,
                    coefficients: Default::default(),
                },
                point: None,
                orders: vec![6, 8, 10],
                dilation_samples: 200,
                homogeneity_tol: 1e-10,
                mean_tol: 1e-4,
            });
            finish(&run(&cfg)?, None)
        }
        Command::CheckWeight { expr, p, n, seed } => {
            let mut cfg = ExperimentConfig::empty(ExperimentKind::WeightCheck, seed);
            cfg.weight_check = Some(WeightCheckParams {
                n,
                p,
                weight: WeightFamily::Expression { source: expr },
                conditions: vec![Condition::A, Condition::B],
                radii: None,
                x_samples: 8,
                expect: WeightExpectation::Admissible,
                closed_form_tol: 0.05,
            });
            let report = run(&cfg)?;
            for r in report.results["reports"].as_array().into_iter().flatten() {
                println!("condition {}: C = {}", r["condition"], r["constant"]);
            }
            finish(&report, None)
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
