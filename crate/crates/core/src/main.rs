use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::error;

use riempoly::cli::{self, RunConfig};
use riempoly::regress::{Descent, FitConfig};
use riempoly::ManifoldKind;

#[derive(Parser)]
#[command(name = "riempoly", version, about = "Polynomial regression on Riemannian manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Euclidean,
    Sphere,
    So3,
    Kendall,
}

impl From<Kind> for ManifoldKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Euclidean => ManifoldKind::Euclidean,
            Kind::Sphere => ManifoldKind::Sphere,
            Kind::So3 => ManifoldKind::So3,
            Kind::Kendall => ManifoldKind::Kendall,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Conjugate gradient (Polak–Ribière+).
    Cg,
    /// Steepest descent with Barzilai–Borwein steps.
    Steepest,
}

#[derive(Subcommand)]
enum Command {
    /// Fit polynomials of the given orders to a landmark or point file.
    Fit {
        #[arg(long, value_enum)]
        manifold: Kind,
        /// Comma-separated polynomial orders.
        #[arg(long, value_delimiter = ',', required = true)]
        orders: Vec<usize>,
        /// Input file (.csv or .tps).
        #[arg(long)]
        input: PathBuf,
        /// Integration steps per unit time.
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 2000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Initial line-search step.
        #[arg(long, default_value_t = 0.1)]
        step_size: f64,
        /// Points per sampled curve.
        #[arg(long, default_value_t = 101)]
        samples: usize,
        /// Search direction of the optimizer.
        #[arg(long, value_enum, default_value = "cg")]
        descent: Method,
        /// Fit every order from the mean instead of from the previous order.
        #[arg(long)]
        no_warm_start: bool,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a TPS landmark file to the canonical CSV layout.
    ConvertTps {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample nested polynomial curves of orders 1..=order from a common base point.
    Simulate {
        #[arg(long, value_enum)]
        manifold: Kind,
        #[arg(long)]
        order: usize,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_USAGE: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Fit {
            manifold,
            orders,
            input,
            steps,
            max_iters,
            tol,
            step_size,
            samples,
            descent,
            no_warm_start,
            out,
        } => {
            let cfg = RunConfig {
                manifold: manifold.into(),
                orders,
                fit: FitConfig {
                    steps,
                    max_iters,
                    tol,
                    step_size,
                    descent: match descent {
                        Method::Cg => Descent::ConjugateGradient,
                        Method::Steepest => Descent::Steepest,
                    },
                    ..FitConfig::default()
                },
                input,
                out,
                samples,
                warm_start: !no_warm_start,
            };
            match cli::run_regression(&cfg) {
                Ok(report) => {
                    for f in &report.fits {
                        let r2 = f.r_squared.map_or("undefined".to_string(), |r| r.to_string());
                        println!(
                            "order {}: R² = {r2}, sse = {}, iterations = {}, converged = {}",
                            f.order, f.sse, f.iterations, f.converged
                        );
                    }
                    if report.all_converged {
                        ExitCode::SUCCESS
                    } else {
                        error!("at least one fit did not converge");
                        ExitCode::from(EXIT_NOT_CONVERGED)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_USAGE)
                }
            }
        }
        Command::ConvertTps { input, out } => match cli::convert_tps(&input, &out) {
            Ok(n) => {
                println!("wrote {n} records to {}", out.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_USAGE)
            }
        },
        Command::Simulate {
            manifold,
            order,
            steps,
            samples,
            out,
        } => match cli::simulate(manifold.into(), order, steps, samples, &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_USAGE)
            }
        },
    }
}
