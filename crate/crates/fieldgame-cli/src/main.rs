//! Command-line pipelines over the game library.
//!
//! Three subcommands share a JSON problem document and a simulation
//! grid: `simulate` runs the particle system forward and dumps
//! trajectories, `solve-lq` integrates the adjoint equation and
//! synthesizes the open-loop saddle candidate, and `verify` puts a
//! candidate pair through the full Monte Carlo optimality report.
//!
//! Exit codes are a stable contract: 0 means success (and, for
//! `verify`, a passing verdict), 1 means bad input, failed validation,
//! or a failed verdict, and 2 means a numerical abort mid-run.
//! Artifacts embed (seed, dt, particle count, tool version); runs with
//! equal embedded metadata are byte-identical regardless of
//! `--threads`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fieldgame::artifacts::{
    adjoint_csv, adjoint_summary_json, controls_csv, cost_json, read_controls_csv,
    saddle_checks_csv, saddle_report_json, summary_json, trajectory_csv, RunMetadata,
};
use fieldgame::cost::{cost_detailed, Formulation};
use fieldgame::model::control::{ControlProcess, Player};
use fieldgame::model::json::{problem_from_json, ProblemInput};
use fieldgame::saddle::{
    convexity_probe, lq_saddle_controls, regression_adjoint_if_possible, verify_saddle_with,
    PerturbationConfig, RESIDUAL_TOLERANCE_DETERMINISTIC, RESIDUAL_TOLERANCE_REGRESSION,
};
use fieldgame::simulate::{simulate_forward, simulate_with_density, GridConfig};
use fieldgame::{adjoint, Error, Result};

/// Simulates partially observed mean-field games, synthesizes
/// linear-quadratic saddle controls, and verifies optimality by Monte
/// Carlo.
#[derive(Parser)]
#[command(author, version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the forward particle system and write trajectory artifacts.
    Simulate(SimulateArgs),
    /// Integrate the linear-quadratic adjoint equation and write the
    /// synthesized saddle controls.
    SolveLq(SolveLqArgs),
    /// Verify a candidate control pair: saddle inequalities,
    /// stationarity residuals, convexity structure, cost comparisons.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON problem document.
    #[arg(long)]
    problem: PathBuf,
    /// Number of time steps on [0, T].
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    /// Number of Monte Carlo particles.
    #[arg(long, default_value_t = 10000)]
    particles: usize,
    /// Seed of the counter-based random number generator.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory (created if absent).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Cap the rayon worker count (never affects results).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormulationArg {
    /// Original-measure cost.
    Strong,
    /// Reference-measure cost weighted by the Girsanov density.
    Weak,
    /// Both formulations side by side.
    Both,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Cost formulation(s) to evaluate alongside the trajectories.
    #[arg(long, value_enum, default_value_t = FormulationArg::Strong)]
    formulation: FormulationArg,
    /// Player-1 control CSV (defaults to the zero control).
    #[arg(long)]
    u1: Option<PathBuf>,
    /// Player-2 control CSV (defaults to the zero control).
    #[arg(long)]
    u2: Option<PathBuf>,
}

#[derive(Args)]
struct SolveLqArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Player-1 candidate control CSV (default: synthesize, LQ only).
    #[arg(long)]
    u1: Option<PathBuf>,
    /// Player-2 candidate control CSV (default: synthesize, LQ only).
    #[arg(long)]
    u2: Option<PathBuf>,
    /// Stationarity tolerance override (default 1e-6 for the exact
    /// linear-quadratic adjoint, 5e-2 for the regression adjoint).
    #[arg(long)]
    tol_residual: Option<f64>,
    /// Unilateral perturbations per player.
    #[arg(long, default_value_t = 20)]
    perturbations: usize,
    /// Cost formulation(s) reported for the candidate.
    #[arg(long, value_enum, default_value_t = FormulationArg::Strong)]
    formulation: FormulationArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::SolveLq(args) => cmd_solve_lq(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match run {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

/// Apply `--threads` before any parallel region runs.
fn configure_threads(threads: Option<usize>) -> Result<()> {
    if let Some(count) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(count)
            .build_global()
            .map_err(|e| Error::Input(format!("cannot configure {count} threads: {e}")))?;
    }
    Ok(())
}

fn load_problem(path: &Path) -> Result<ProblemInput> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    problem_from_json(&text)
}

fn load_control(path: &Path, player: Player, horizon: f64) -> Result<ControlProcess> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let control = read_controls_csv(&text, player)?;
    if let Some(&last) = control.times.last() {
        if control.times[0] < 0.0 || last >= horizon {
            return Err(Error::Input(format!(
                "control grid in {} spans [{}, {}], outside the problem horizon [0, {horizon})",
                path.display(),
                control.times[0],
                last
            )));
        }
    }
    Ok(control)
}

/// Write one artifact under the output directory and report its path.
fn emit(dir: &Path, name: &str, content: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, content)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode> {
    configure_threads(args.common.threads)?;
    let problem = load_problem(&args.common.problem)?.problem()?;
    let grid = GridConfig::new(args.common.steps, args.common.particles, args.common.seed);
    let u1 = match &args.u1 {
        Some(path) => load_control(path, Player::One, problem.horizon)?,
        None => ControlProcess::zero(Player::One, problem.k1),
    };
    let u2 = match &args.u2 {
        Some(path) => load_control(path, Player::Two, problem.horizon)?,
        None => ControlProcess::zero(Player::Two, problem.k2),
    };
    let controls = (&u1, &u2);

    let with_density = args.formulation != FormulationArg::Strong;
    let bundle = if with_density {
        simulate_with_density(&problem, controls, &grid)?
    } else {
        simulate_forward(&problem, controls, &grid)?
    };
    let meta = RunMetadata::from_grid(&grid, problem.horizon);
    emit(&args.common.out, "trajectory.csv", &trajectory_csv(&bundle))?;
    emit(&args.common.out, "summary.json", &summary_json(&bundle))?;

    if args.formulation != FormulationArg::Weak {
        let sample = cost_detailed(&problem, controls, &grid, Formulation::Strong)?;
        emit(
            &args.common.out,
            "cost_strong.json",
            &cost_json(&sample.estimate, Formulation::Strong, &meta),
        )?;
    }
    if with_density {
        let sample = cost_detailed(&problem, controls, &grid, Formulation::Weak)?;
        emit(
            &args.common.out,
            "cost_weak.json",
            &cost_json(&sample.estimate, Formulation::Weak, &meta),
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_solve_lq(args: SolveLqArgs) -> Result<ExitCode> {
    configure_threads(args.common.threads)?;
    let input = load_problem(&args.common.problem)?;
    let spec = input.as_lq().ok_or_else(|| {
        Error::Input(
            "problem type \"general\" has no closed-form synthesis; \
             run `verify` with explicit control files instead"
                .into(),
        )
    })?;
    let grid = GridConfig::new(args.common.steps, args.common.particles, args.common.seed);
    let adj = adjoint::solve_adjoint_lq(spec, &grid)?;
    let (u1, u2) = lq_saddle_controls(spec, &adj)?;
    let meta = RunMetadata::from_grid(&grid, spec.horizon);

    emit(&args.common.out, "adjoint.csv", &adjoint_csv(&adj, &meta))?;
    emit(&args.common.out, "adjoint_summary.json", &adjoint_summary_json(&adj, &meta))?;
    emit(&args.common.out, "controls_u1.csv", &controls_csv(&u1, &meta)?)?;
    emit(&args.common.out, "controls_u2.csv", &controls_csv(&u2, &meta)?)?;

    let manifest = format!(
        "{{\n  \"problem_type\": \"lq\",\n  \"deterministic_reduction\": {},\n  \
         \"files\": [\"adjoint.csv\", \"adjoint_summary.json\", \
         \"controls_u1.csv\", \"controls_u2.csv\"],\n  \
         \"metadata\": {{\"seed\": {}, \"steps\": {}, \"particles\": {}}}\n}}\n",
        adj.deterministic_reduction, args.common.seed, args.common.steps, args.common.particles
    );
    emit(&args.common.out, "solution.json", &manifest)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    configure_threads(args.common.threads)?;
    let input = load_problem(&args.common.problem)?;
    let problem = input.problem()?;
    let grid = GridConfig::new(args.common.steps, args.common.particles, args.common.seed);

    // Candidate controls: user-supplied CSVs, or synthesized when the
    // problem is linear-quadratic.
    let (u1, u2) = match (&args.u1, &args.u2) {
        (Some(p1), Some(p2)) => (
            load_control(p1, Player::One, problem.horizon)?,
            load_control(p2, Player::Two, problem.horizon)?,
        ),
        (None, None) => {
            let spec = input.as_lq().ok_or_else(|| {
                Error::Input(
                    "general problems carry no synthesized candidate; \
                     pass --u1 and --u2 control files"
                        .into(),
                )
            })?;
            let adj = adjoint::solve_adjoint_lq(spec, &grid)?;
            lq_saddle_controls(spec, &adj)?
        }
        _ => {
            return Err(Error::Input(
                "pass both --u1 and --u2, or neither (to synthesize)".into(),
            ))
        }
    };
    let candidate = (&u1, &u2);

    // Exact adjoint and tight tolerance for the linear-quadratic class;
    // regression adjoint and a loose tolerance otherwise.
    let (adj, default_tol) = match input.as_lq() {
        Some(spec) => (
            Some(adjoint::solve_adjoint_lq(spec, &grid)?),
            RESIDUAL_TOLERANCE_DETERMINISTIC,
        ),
        None => (
            regression_adjoint_if_possible(&problem, candidate, &grid)?,
            RESIDUAL_TOLERANCE_REGRESSION,
        ),
    };
    let tolerance = args.tol_residual.unwrap_or(default_tol);

    let config = PerturbationConfig {
        per_player: args.perturbations,
        seed: args.common.seed ^ 0x7065_7274,
        ..Default::default()
    };
    let mut report =
        verify_saddle_with(&problem, candidate, &config, &grid, adj.as_ref(), tolerance)?;
    report.convexity = Some(convexity_probe(&problem, candidate, &grid)?);
    if args.formulation != FormulationArg::Strong {
        let weak = cost_detailed(&problem, candidate, &grid, Formulation::Weak)?;
        report.weak_candidate_cost = Some(weak.estimate);
    }
    report.settle_verdict();

    let meta = RunMetadata::from_grid(&grid, problem.horizon);
    emit(&args.common.out, "saddle_report.json", &saddle_report_json(&report, &meta))?;
    emit(&args.common.out, "saddle_checks.csv", &saddle_checks_csv(&report, &meta))?;
    if args.formulation != FormulationArg::Weak {
        emit(
            &args.common.out,
            "cost_strong.json",
            &cost_json(&report.candidate_cost, Formulation::Strong, &meta),
        )?;
    }
    if let Some(weak) = &report.weak_candidate_cost {
        emit(&args.common.out, "cost_weak.json", &cost_json(weak, Formulation::Weak, &meta))?;
    }

    let passed = report.perturbations.iter().filter(|c| c.pass).count();
    println!(
        "saddle checks: {passed}/{} passed; stationarity max: {}; verdict: {}",
        report.perturbations.len(),
        match &report.stationarity {
            Some(s) => format!("{:.3e} / {:.3e}", s.max[0], s.max[1]),
            None => "unavailable".to_string(),
        },
        if report.verdict { "pass" } else { "fail" }
    );
    Ok(if report.verdict { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
