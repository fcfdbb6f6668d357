//! Command-line front end. Exit codes: 0 success, 1 input error, 2 solver
//! did not converge (the best iterate is still written, with a warning).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use hdm::embedding::{
    hdgp, hdm_from_solution, project_to_loid_with_multiplier, sdr_complete, Objective, SdrOptions,
    DEFAULT_LOGDET_ROUNDS,
};
use hdm::experiments::{
    ordinal_benchmark, sparsity_success_curve, tree_benchmark, OrdinalBenchConfig, SparsityConfig,
    TreeBenchConfig,
};
use hdm::gramian::masked_relative_error;
use hdm::io::{
    distances_from_records, load_distance_records, load_ordinal, load_raw_points, render_poincare_svg,
    save_distances, save_embedding, save_embedding_file, save_summaries, EmbeddingFile, Model, Provenance,
};
use hdm::solver::SolverConfig;
use hdm::{HdmError, Result};

#[derive(Parser, Debug)]
#[command(name = "hdm", version, about = "Hyperbolic distance matrices: completion, embedding, benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Complete the distance data and embed the points.
    Embed(EmbedArgs),
    /// Write the completed distance matrix without factorizing it.
    Complete(CompleteArgs),
    /// Synthetic benchmarks.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Project arbitrary vectors onto the hyperboloid.
    Project(ProjectArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Loid,
    Poincare,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ObjectiveArg {
    Trace,
    Logdet,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[arg(long)]
    distances: PathBuf,
    #[arg(long)]
    ordinal: Option<PathBuf>,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "poincare")]
    model: ModelArg,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "trace")]
    objective: ObjectiveArg,
    /// Absolute fidelity budget (default: relative to the measured data).
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long)]
    min_distance: Option<f64>,
    /// Slack budget as a percentage of |O| * eps2.
    #[arg(long)]
    max_violations_pct: Option<f64>,
    /// Recorded for reproducibility; the pipeline itself is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file with solver settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompleteArgs {
    #[arg(long)]
    distances: PathBuf,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    out_hdm: PathBuf,
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    Sparsity {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Tree {
        #[arg(long, value_delimiter = ',', required = true)]
        n_grid: Vec<usize>,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Ordinal {
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        dim_grid: Vec<usize>,
        #[arg(long)]
        k: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        zeta_grid: Vec<f64>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct ProjectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command, &argv) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged(msg)) => {
            eprintln!("warning: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

enum Status {
    Done,
    NotConverged(String),
}

fn run(cmd: Command, argv: &[String]) -> Result<Status> {
    match cmd {
        Command::Embed(a) => embed(a, argv),
        Command::Complete(a) => complete(a, argv),
        Command::Bench(b) => bench(b, argv),
        Command::Project(a) => project(a, argv),
    }
}

fn invocation_line(argv: &[String]) -> String {
    format!("invocation: {}", argv.join(" "))
}

fn load_config(path: Option<&Path>) -> Result<SolverConfig> {
    let Some(p) = path else {
        return Ok(SolverConfig::default());
    };
    let cfg: SolverConfig = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(p)?))?;
    cfg.validate()?;
    Ok(cfg)
}

fn not_converged_warning(iterations: usize, primal: f64, dual: f64) -> String {
    format!(
        "solver stopped after {iterations} iterations without converging \
         (primal {primal:.3e}, dual {dual:.3e}); best iterate written"
    )
}

fn embed(a: EmbedArgs, argv: &[String]) -> Result<Status> {
    let records = load_distance_records(&a.distances)?;
    let ordinal = match &a.ordinal {
        Some(p) => load_ordinal(p)?,
        None => Vec::new(),
    };
    let n = records
        .iter()
        .map(|r| r.j)
        .chain(ordinal.iter().map(|c| c.max_index()))
        .max()
        .map(|m| m + 1)
        .ok_or_else(|| HdmError::NoData("no distances and no comparisons".into()))?;
    let (dtilde, mask) = distances_from_records(&records, n)?;

    let solver = load_config(a.config.as_deref())?;
    let objective = match a.objective {
        ObjectiveArg::Trace => Objective::Trace,
        ObjectiveArg::Logdet => Objective::Logdet {
            rounds: if solver.logdet_rounds > 0 {
                solver.logdet_rounds
            } else {
                DEFAULT_LOGDET_ROUNDS
            },
        },
    };
    let mut options = SdrOptions {
        objective,
        epsilon1: a.eps1,
        min_distance: a.min_distance,
        solver,
        ..SdrOptions::default()
    };
    if let Some(e) = a.eps2 {
        options.epsilon2 = e;
    }
    if let Some(p) = a.max_violations_pct {
        if !(p >= 0.0) {
            return Err(HdmError::InvalidArgument(format!("--max-violations-pct {p} < 0")));
        }
        options.slack_budget = Some(p / 100.0 * ordinal.len() as f64 * options.epsilon2);
    }
    if a.dim == 0 {
        return Err(HdmError::InvalidArgument("--dim must be >= 1".into()));
    }

    let result = hdgp(&dtilde, &mask, &ordinal, a.dim, &options)?;
    let model = match a.model {
        ModelArg::Loid => Model::Loid,
        ModelArg::Poincare => Model::Poincare,
    };
    let mut prov = Provenance::new(argv.to_vec());
    prov.seed = a.seed;
    prov.config = json!({ "dim": a.dim, "model": model, "options": options });
    prov.report = Some((&result.report).into());
    if mask.count() > 0 {
        prov.reconstruction_error =
            Some(masked_relative_error(dtilde.values(), result.recon_hdm.values(), &mask));
    }
    prov.rank_deficient = result.rank_deficient;
    let r = &result.report;
    let status = if r.converged {
        Status::Done
    } else {
        let w = not_converged_warning(r.iterations, r.primal_residual, r.dual_residual);
        prov.warning = Some(w.clone());
        Status::NotConverged(w)
    };
    save_embedding(&result, &a.out, model, prov)?;
    if let Some(svg) = &a.svg {
        render_poincare_svg(&result.poincare_points, None, svg)?;
    }
    Ok(status)
}

fn complete(a: CompleteArgs, argv: &[String]) -> Result<Status> {
    let records = load_distance_records(&a.distances)?;
    let n = records
        .iter()
        .map(|r| r.j)
        .max()
        .map(|m| m + 1)
        .ok_or_else(|| HdmError::NoData(format!("{} lists no distances", a.distances.display())))?;
    if a.dim == 0 {
        return Err(HdmError::InvalidArgument("--dim must be >= 1".into()));
    }
    let (dtilde, mask) = distances_from_records(&records, n)?;
    let (g, report) = sdr_complete(&dtilde, &mask, &[], &SdrOptions::default())?;
    let completed = hdm_from_solution(&g)?;
    let mut comment = invocation_line(argv);
    let status = if report.converged {
        Status::Done
    } else {
        let w = not_converged_warning(report.iterations, report.primal_residual, report.dual_residual);
        comment.push_str(&format!("\nwarning: {w}"));
        Status::NotConverged(w)
    };
    save_distances(&a.out_hdm, &completed, None, Some(&comment))?;
    Ok(status)
}

fn bench(b: BenchCommand, argv: &[String]) -> Result<Status> {
    let comment = invocation_line(argv);
    match b {
        BenchCommand::Sparsity {
            n,
            dim,
            grid,
            trials,
            delta,
            seed,
            out,
        } => {
            let cfg = SparsityConfig::new(n, dim, grid, trials, delta, seed);
            let rows = sparsity_success_curve(&cfg)?;
            save_summaries(&out, &rows, Some(&comment))?;
        }
        BenchCommand::Tree {
            n_grid,
            trials,
            seed,
            out,
        } => {
            let cfg = TreeBenchConfig::new(n_grid, trials, seed);
            let rows: Vec<_> = tree_benchmark(&cfg)?
                .into_iter()
                .flat_map(|(h, e)| [h, e])
                .collect();
            save_summaries(&out, &rows, Some(&comment))?;
        }
        BenchCommand::Ordinal {
            n,
            dim_grid,
            k,
            zeta_grid,
            seed,
            out,
        } => {
            let cfg = OrdinalBenchConfig::new(n, dim_grid, k, zeta_grid, seed);
            let rows = ordinal_benchmark(&cfg)?;
            save_summaries(&out, &rows, Some(&comment))?;
        }
    }
    Ok(Status::Done)
}

fn project(a: ProjectArgs, argv: &[String]) -> Result<Status> {
    let raw = load_raw_points(&a.input)?;
    let mut points = Vec::with_capacity(raw.len());
    let mut multipliers = Vec::with_capacity(raw.len());
    for z in &raw {
        let (x, lambda) = project_to_loid_with_multiplier(z)?;
        points.push(x);
        multipliers.push(lambda);
    }
    let mut file = EmbeddingFile::from_loid(&points, Model::Loid, Provenance::new(argv.to_vec()))?;
    file.multipliers = Some(multipliers);
    save_embedding_file(&a.out, &file)?;
    Ok(Status::Done)
}
