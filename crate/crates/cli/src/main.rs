use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scvx_cli::run::{self, SolveOptions};

#[derive(Parser)]
#[command(
    name = "scvx",
    version,
    about = "Successive convexification for multirotor trajectories around keep-out sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write its artifacts.
    Solve {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        epsilon: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        lambda: Option<f64>,
        #[arg(long = "max-iter")]
        max_iter: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Validate and print the problem dimensions without solving.
        #[arg(long)]
        dry_run: bool,
        /// Also write every subproblem in the plain-text conic format.
        #[arg(long)]
        dump_conic: bool,
    },
    /// Project a point onto a set, e.g.
    /// `scvx project 'kind = "ball", center = [0, 0], radius = 1' 2,0`.
    Project { set: String, point: String },
    /// Print the covering ellipsoids of intersecting obstacles.
    Cover { scenario: PathBuf },
}

fn main() -> ExitCode {
    // Usage errors exit 3 like every other failure; 2 means iteration cap.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let mut stdout = std::io::stdout();
    let result = match cli.command {
        Command::Solve { scenario, out, epsilon, lambda, max_iter, seed, dry_run, dump_conic } => {
            let options = SolveOptions { out, epsilon, lambda, max_iterations: max_iter, seed, dry_run, dump_conic };
            run::solve(&scenario, &options, &mut stdout).map(|s| s.exit_code())
        }
        Command::Project { set, point } => run::project(&set, &point, &mut stdout).map(|_| 0),
        Command::Cover { scenario } => run::cover(&scenario, &mut stdout).map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
