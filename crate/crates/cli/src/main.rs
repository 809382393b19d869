use clap::{Args, Parser, Subcommand};
use ebfv::{run_suite, GeometryName, SolverKind, TestConfig, TestKind};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ebfv",
    version,
    about = "High-order cut-cell finite volume solver for elliptic interface problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a manufactured-solution test suite and write CSV tables.
    Solve(SolveArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Discretization order: 2, 4 or 6.
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Cells per side; a comma list gives a refinement study.
    #[arg(long = "n", value_delimiter = ',', default_value = "32,64,128")]
    n: Vec<usize>,
    #[arg(long, default_value = "ellipse")]
    geometry: GeometryName,
    #[arg(long, default_value = "convergence")]
    test: TestKind,
    /// beta-/beta+ values (swept by coeff-ratio).
    #[arg(long = "beta-ratio", value_delimiter = ',', default_value = "1")]
    beta_ratio: Vec<f64>,
    /// s-/s+ values (swept by solution-jump).
    #[arg(long = "scale-ratio", value_delimiter = ',', default_value = "1")]
    scale_ratio: Vec<f64>,
    #[arg(long, default_value_t = ebfv::harness::DEFAULT_SEED)]
    seed: u64,
    /// Output directory for the CSV and JSON files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "bicgstab")]
    solver: SolverKind,
    /// Relative residual tolerance of the linear solver.
    #[arg(long)]
    tol: Option<f64>,
    /// Grid of the reference solution (homogeneous-jump only).
    #[arg(long = "reference-n", default_value_t = 256)]
    reference_n: usize,
}

impl SolveArgs {
    fn config(&self) -> TestConfig {
        let mut c = TestConfig::new(self.order, self.n.clone(), self.geometry, self.test);
        c.beta_ratios = self.beta_ratio.clone();
        c.scale_ratios = self.scale_ratio.clone();
        c.seed = self.seed;
        c.solver.method = self.solver;
        if let Some(tol) = self.tol {
            c.solver.tol = tol;
        }
        c.reference_n = self.reference_n;
        c
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3e}"))
}

fn fmt_rate(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

fn solve(args: &SolveArgs) -> ebfv::Result<()> {
    let config = args.config();
    config.validate()?;
    if config.geometry.is_stand_in() {
        eprintln!(
            "note: geometry '{}' is {}",
            config.geometry,
            config.geometry.label()
        );
    }
    let out = run_suite(&config, Some(&args.out))?;
    println!(
        "{:>5} {:>9} {:>10} {:>10} {:>10} {:>10} {:>6} {:>6}",
        "n", "ratio", "trunc_l1", "trunc_linf", "sol_l1", "sol_linf", "r_l1", "r_linf"
    );
    for r in &out.table.rows {
        println!(
            "{:>5} {:>9.1e} {:>10} {:>10} {:>10.3e} {:>10.3e} {:>6} {:>6}",
            r.n,
            r.ratio,
            fmt_opt(r.trunc_l1),
            fmt_opt(r.trunc_linf),
            r.sol_l1,
            r.sol_linf,
            fmt_rate(r.rate_sol_l1),
            fmt_rate(r.rate_sol_linf)
        );
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => solve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
