mod checks;
mod config;
mod report;
mod suite;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rho_lab::MeasureSpec;

use config::{parse_measure, resolve_params, CliError, CliResult, CommonArgs, Format, Tolerances};
use report::Report;

/// Verification lab for the relativistic harmonic oscillator.
#[derive(Debug, Parser)]
#[command(name = "rho-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact vs perturbative energies.
    Spectrum(CommonArgs),
    /// Tabulate exact minimal states and first-order states on a grid.
    States {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 161)]
        points: usize,
        #[arg(long = "xi-max", default_value_t = 4.0)]
        xi_max: f64,
    },
    /// Gram matrix of the exact minimal states under a measure.
    Gram {
        #[command(flatten)]
        common: CommonArgs,
        /// flat | alpha2 | power:S | perturbed[:A] | gaussian
        #[arg(long, default_value = "alpha2", value_parser = parse_measure)]
        measure: MeasureSpec,
    },
    /// Klein-Gordon residuals in both forms plus the wrong-energy probe.
    KgResidual(CommonArgs),
    /// Relativistic Hermite ODE residuals.
    OdeResidual(CommonArgs),
    /// Ladder coefficients and differential-action certification.
    Ladder(CommonArgs),
    /// Hermiticity defect of the perturbed Hamiltonian under a measure.
    Hermiticity {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "flat", value_parser = parse_measure)]
        measure: MeasureSpec,
    },
    /// Solve for the measure making the Hamiltonian symmetric at first order.
    MeasureSolve(CommonArgs),
    /// Perturbation theory vs closed forms and exact states.
    PtCompare(CommonArgs),
    /// N-doubling convergence tables towards the oscillator.
    LimitScan(CommonArgs),
    /// Commutator and primed-ladder diagnostics.
    Commutators(CommonArgs),
    /// All acceptance criteria on their fixed grids.
    VerifyAll(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Spectrum(_) => "spectrum",
            Self::States { .. } => "states",
            Self::Gram { .. } => "gram",
            Self::KgResidual(_) => "kg-residual",
            Self::OdeResidual(_) => "ode-residual",
            Self::Ladder(_) => "ladder",
            Self::Hermiticity { .. } => "hermiticity",
            Self::MeasureSolve(_) => "measure-solve",
            Self::PtCompare(_) => "pt-compare",
            Self::LimitScan(_) => "limit-scan",
            Self::Commutators(_) => "commutators",
            Self::VerifyAll(_) => "verify-all",
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Self::Spectrum(c)
            | Self::KgResidual(c)
            | Self::OdeResidual(c)
            | Self::Ladder(c)
            | Self::MeasureSolve(c)
            | Self::PtCompare(c)
            | Self::LimitScan(c)
            | Self::Commutators(c)
            | Self::VerifyAll(c) => c,
            Self::States { common, .. } | Self::Gram { common, .. } | Self::Hermiticity { common, .. } => common,
        }
    }

    fn default_nmax(&self) -> usize {
        match self {
            Self::Spectrum(_) | Self::PtCompare(_) | Self::LimitScan(_) => 5,
            Self::States { .. } => 4,
            Self::Gram { .. } => 6,
            Self::KgResidual(_) | Self::Ladder(_) => 10,
            Self::OdeResidual(_) => 12,
            Self::Hermiticity { .. } | Self::MeasureSolve(_) | Self::Commutators(_) | Self::VerifyAll(_) => 8,
        }
    }
}

fn run(cmd: &Command) -> CliResult<Report> {
    let common = cmd.common();
    let tol = Tolerances::new(&common.tol)?;
    let nmax = common.nmax.unwrap_or_else(|| cmd.default_nmax());
    if let Command::VerifyAll(_) = cmd {
        return suite::verify_all(&tol, common.seed);
    }
    let p = resolve_params(common)?;
    match cmd {
        Command::Spectrum(_) => checks::spectrum(&p, nmax, &tol),
        Command::States { points, xi_max, .. } => checks::states(&p, nmax, *points, *xi_max),
        Command::Gram { measure, .. } => checks::gram(&p, nmax, measure, &tol),
        Command::KgResidual(_) => checks::kg(&p, nmax, &tol),
        Command::OdeResidual(_) => checks::ode(&p, nmax, &tol),
        Command::Ladder(_) => checks::ladder(&p, nmax, &tol),
        Command::Hermiticity { measure, .. } => checks::hermiticity(&p, nmax, measure, &tol),
        Command::MeasureSolve(_) => checks::measure_solve(&p, nmax, &tol),
        Command::PtCompare(_) => checks::pt_compare(&p, nmax, &tol),
        Command::LimitScan(_) => checks::limit_scan(&p, nmax, &tol),
        Command::Commutators(_) => checks::commutators(&p, nmax),
        Command::VerifyAll(_) => unreachable!(),
    }
}

fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("RHO_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Invalid(format!("RHO_LAB_THREADS={v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Invalid(e.to_string()))
}

fn emit(cmd: &Command, mut report: Report) -> CliResult<bool> {
    let common = cmd.common();
    report.command = cmd.name().to_string();
    report.args = std::env::args().skip(1).collect();
    report.sort();
    let text = match common.format {
        Format::Json => report::to_json(&report),
        Format::Table => report::to_table(&report),
        Format::Csv => report::to_csv(&report).ok_or_else(|| {
            CliError::Invalid(format!("{} has no single matrix to write as CSV", cmd.name()))
        })?,
    };
    match &common.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?,
        None => {
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
        }
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = init_threads()
        .and_then(|()| run(&cli.command))
        .and_then(|r| emit(&cli.command, r));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("rho-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
