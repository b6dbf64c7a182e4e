//! Command-line harness: rate sweeps, adjacency pixmaps, projection and
//! singular-kernel studies, the sampled-vs-averaged gap study, and single
//! integrations, all emitting CSV/PGM plus a run manifest.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical divergence or
//! tolerance failure, 4 I/O error.

mod config;
mod output;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::info;

use nonlocal_mc::dynamics::{
    rk4_integrate, twisted_state, twisted_state_cell_average, Coupling, InteractionSpec,
    SemidiscreteSystem, TimeGrid,
};
use nonlocal_mc::experiments::{
    projection_rate_study, rate_sweep, sampled_vs_averaged, singular_truncation_study,
    standard_study_functions, InitialData,
};
use nonlocal_mc::graphon::{cell_matrix, SparsitySchedule};
use nonlocal_mc::grid::GridPartition;
use nonlocal_mc::sampling::{adjacency_pixmap, sample_graph};
use nonlocal_mc::Error as CoreError;

use config::FileConfig;
use output::{fnv_hash, RunManifest};

/// Reference for the kernel expression grammar, shown under --help.
const EXPRESSION_GRAMMAR: &str = "\
Custom kernel expressions (kernel.kind = \"custom-expression\", kernel.expr):
operators + - * / ^ (right-associative ^, usual precedence), unary minus,
parentheses, float literals, the constant pi, the variables x and y, and
the functions abs, sin, cos, exp, sqrt, min(a,b), max(a,b). The distance
|x - y| is written abs(x - y). Declare kernel.sup_bound when the kernel is
bounded; kernels with sup_bound <= 1 are sampled without truncation.";

#[derive(Parser)]
#[command(
    name = "nonlocal-mc",
    about = "Sparse Monte Carlo solver and convergence harness for nonlocal diffusion equations",
    long_about = None,
    after_long_help = EXPRESSION_GRAMMAR,
    version
)]
struct Cli {
    /// TOML config file; omitted keys use the desk-scale defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Base seed override (wins over the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; falls back to NONLOCAL_MC_THREADS, then to the
    /// available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Full-size experiment profile: n in {128, 256}, 200 trials, dense
    /// gamma grid.
    #[arg(long, global = true)]
    paper_scale: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Kuramoto rate experiment over the gamma grid and fit
    /// alpha_gamma per gamma; writes rates.csv and errors.csv.
    RateSweep,
    /// Sample adjacency matrices at several gamma values and write PGM
    /// pixel pictures (adj_n{n}_g{gamma}.pgm).
    Pixmap,
    /// Piecewise-constant projection errors and fitted slopes for the
    /// standard function families; writes project.csv.
    ProjectStudy,
    /// Truncation error of the singular kernel across grid sizes, with
    /// the optimal gamma and predicted exponents; writes singular.csv.
    SingularStudy,
    /// Mean sampled-vs-averaged trajectory gap across grid sizes; writes
    /// gap.csv.
    GapStudy,
    /// One integration (sampled or averaged coupling) dumping the
    /// checkpointed trajectory; writes trajectory.csv.
    Solve,
}

enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match &e {
            CoreError::Divergence { .. } | CoreError::ToleranceNotMet { .. } => {
                CliError::Numerical(e.to_string())
            }
            CoreError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let threads = cli.threads.or_else(|| {
        std::env::var("NONLOCAL_MC_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", cli.out.display())))?;
    let file_cfg = FileConfig::load(cli.config.as_deref()).map_err(CliError::Config)?;

    match cli.command {
        Command::RateSweep => cmd_rate_sweep(cli, &file_cfg),
        Command::Pixmap => cmd_pixmap(cli, &file_cfg),
        Command::ProjectStudy => cmd_project_study(cli, &file_cfg),
        Command::SingularStudy => cmd_singular_study(cli, &file_cfg),
        Command::GapStudy => cmd_gap_study(cli, &file_cfg),
        Command::Solve => cmd_solve(cli, &file_cfg),
    }
}

fn cmd_rate_sweep(cli: &Cli, file_cfg: &FileConfig) -> Result<(), CliError> {
    let cfg = file_cfg
        .experiment(cli.paper_scale, cli.seed)
        .map_err(CliError::Config)?;
    info!(
        "rate sweep: {} gammas x {} grid sizes x {} trials",
        cfg.gammas.len(),
        cfg.ns.len(),
        cfg.trials
    );
    let report = rate_sweep(&cfg)?;
    for rate in &report.rates {
        println!(
            "gamma = {:<6} alpha = {:>8.4}   theory (1-gamma)/2 = {:.4}",
            rate.gamma, rate.alpha, rate.theory
        );
    }
    let excluded: usize = report.cells.iter().map(|c| c.diverged).sum();
    if excluded > 0 {
        eprintln!("warning: {excluded} diverged trial(s) excluded from the means");
    }
    let rates_path = cli.out.join("rates.csv");
    let errors_path = cli.out.join("errors.csv");
    output::write_rates_csv(&rates_path, &report).map_err(CliError::Io)?;
    output::write_errors_csv(&errors_path, &report).map_err(CliError::Io)?;
    RunManifest::new(report.config_hash, report.wall_secs, vec![rates_path, errors_path])
        .verify_and_write(&cli.out)
        .map_err(CliError::Io)
}

fn cmd_pixmap(cli: &Cli, file_cfg: &FileConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let section = file_cfg.pixmap.clone().unwrap_or_default();
    let n = section.n.unwrap_or(512);
    let gammas = section
        .gammas
        .unwrap_or_else(|| vec![0.25, 0.5, 0.75, 0.95]);
    if gammas.is_empty() {
        return Err(CliError::Config("pixmap.gammas must not be empty".into()));
    }
    let kernel = file_cfg.kernel_spec().map_err(CliError::Config)?;
    let w = kernel.build()?;
    let partition = GridPartition::new(n, w.dim())?;
    if partition.cell_count() > 4096 {
        return Err(CliError::Config(format!(
            "pixmap requires n^d <= 4096, got {}",
            partition.cell_count()
        )));
    }
    let seed = cli.seed.or(file_cfg.seed).unwrap_or(42);

    let mut outputs = Vec::new();
    for &gamma in &gammas {
        let schedule = SparsitySchedule::new(gamma)?;
        let cells = cell_matrix(&w, &partition, &schedule)?;
        let graph = sample_graph(&cells, &schedule, seed)?;
        let path = cli.out.join(format!("adj_n{n}_g{gamma}.pgm"));
        info!("writing {}", path.display());
        adjacency_pixmap(&graph, &path)?;
        outputs.push(path);
    }
    let hash = fnv_hash(&format!("pixmap;{kernel:?};n={n};gammas={gammas:?};seed={seed}"));
    RunManifest::new(hash, start.elapsed().as_secs_f64(), outputs)
        .verify_and_write(&cli.out)
        .map_err(CliError::Io)
}

fn cmd_project_study(cli: &Cli, file_cfg: &FileConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let section = file_cfg.project_study.clone().unwrap_or_default();
    let p = section.p.unwrap_or(2.0);
    let ns = section
        .ns
        .unwrap_or_else(|| vec![8, 16, 32, 64, 128, 256, 512]);
    let report = projection_rate_study(&standard_study_functions(), p, &ns)?;
    for slope in &report.slopes {
        println!(
            "{:<10} fitted slope {:>8.4}   predicted {:.4}",
            slope.label, slope.fitted, slope.predicted
        );
    }
    let path = cli.out.join("project.csv");
    output::write_projection_csv(&path, &report).map_err(CliError::Io)?;
    let hash = fnv_hash(&format!("project;p={p};ns={ns:?}"));
    RunManifest::new(hash, start.elapsed().as_secs_f64(), vec![path])
        .verify_and_write(&cli.out)
        .map_err(CliError::Io)
}

fn cmd_singular_study(cli: &Cli, file_cfg: &FileConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let section = file_cfg.singular_study.clone().unwrap_or_default();
    let lambda = section.lambda.unwrap_or(0.25);
    let ns = section.ns.unwrap_or_else(|| vec![16, 32, 64, 128, 256]);
    let report = singular_truncation_study(lambda, section.gamma, &ns)?;
    println!(
        "lambda = {lambda}: optimal gamma = {:.6}, using gamma = {:.6}",
        report.optimal_gamma, report.gamma
    );
    println!(
        "exponents: truncation {:.4}, projection {:.4}, monte carlo {:.4}; fitted {:.4}",
        report.exponents.truncation,
        report.exponents.projection,
        report.exponents.monte_carlo,
        report.fitted_exponent
    );
    let path = cli.out.join("singular.csv");
    output::write_singular_csv(&path, &report).map_err(CliError::Io)?;
    let hash = fnv_hash(&format!(
        "singular;lambda={lambda};gamma={:?};ns={ns:?}",
        section.gamma
    ));
    RunManifest::new(hash, start.elapsed().as_secs_f64(), vec![path])
        .verify_and_write(&cli.out)
        .map_err(CliError::Io)
}

fn cmd_gap_study(cli: &Cli, file_cfg: &FileConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let section = file_cfg.gap_study.clone().unwrap_or_default();
    let gamma = section.gamma.unwrap_or(0.5);
    let ns = section.ns.unwrap_or_else(|| vec![64, 128, 256]);
    let seeds = section.seeds.unwrap_or(20);
    let mut cfg = file_cfg
        .experiment(cli.paper_scale, cli.seed)
        .map_err(CliError::Config)?;
    if let Some(v) = section.q {
        cfg.q = v;
    }
    if let Some(v) = section.omega {
        cfg.omega = v;
    }
    if let Some(v) = section.t_end {
        cfg.t_end = v;
    }
    if let Some(v) = section.dt {
        cfg.dt = v;
    }
    if let Some(v) = section.checkpoint_interval {
        cfg.checkpoint_interval = v;
    }
    let report = sampled_vs_averaged(&cfg, gamma, &ns, seeds)?;
    println!(
        "gamma = {gamma}: fitted gap exponent {:.4}, theory d(1-gamma)/2 = {:.4}",
        report.fitted_exponent, report.theory_exponent
    );
    let path = cli.out.join("gap.csv");
    output::write_gap_csv(&path, &report).map_err(CliError::Io)?;
    let hash = fnv_hash(&format!(
        "gap;gamma={gamma};ns={ns:?};seeds={seeds};base={}",
        cfg.base_seed
    ));
    RunManifest::new(hash, start.elapsed().as_secs_f64(), vec![path])
        .verify_and_write(&cli.out)
        .map_err(CliError::Io)
}

fn cmd_solve(cli: &Cli, file_cfg: &FileConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let section = file_cfg.solve.clone().unwrap_or_default();
    let n = section.n.unwrap_or(128);
    let gamma = section.gamma.unwrap_or(0.5);
    let coupling_kind = section.coupling.unwrap_or_else(|| "sampled".into());
    let mut cfg = file_cfg
        .experiment(cli.paper_scale, cli.seed)
        .map_err(CliError::Config)?;
    if let Some(v) = section.q {
        cfg.q = v;
    }
    if let Some(v) = section.omega {
        cfg.omega = v;
    }
    if let Some(v) = section.t_end {
        cfg.t_end = v;
    }
    if let Some(v) = section.dt {
        cfg.dt = v;
    }
    if let Some(v) = section.checkpoint_interval {
        cfg.checkpoint_interval = v;
    }

    let w = cfg.kernel.build()?;
    let partition = GridPartition::new(n, w.dim())?;
    let schedule = SparsitySchedule::new(gamma)?;
    let cells = cell_matrix(&w, &partition, &schedule)?;
    let coupling = match coupling_kind.as_str() {
        "sampled" => {
            let seed = cfg.trial_seed(gamma, n, 0);
            Coupling::Sampled(sample_graph(&cells, &schedule, seed)?)
        }
        "averaged" => Coupling::Averaged(cells),
        other => {
            return Err(CliError::Config(format!(
                "solve.coupling must be sampled | averaged, got \"{other}\""
            )))
        }
    };
    let init = match cfg.initial_data {
        InitialData::Midpoint => twisted_state(cfg.q, &partition)?,
        InitialData::CellAverage => twisted_state_cell_average(cfg.q, &partition)?,
    };
    let mut sys = SemidiscreteSystem::new(
        partition,
        coupling,
        InteractionSpec::kuramoto(cfg.omega),
        init,
    )?;
    let every = (cfg.checkpoint_interval / cfg.dt).round().max(1.0) as usize;
    let grid = TimeGrid::with_interval(0.0, cfg.t_end, cfg.dt, every)?;
    let traj = rk4_integrate(&mut sys, &grid)?;
    info!("integrated {} steps, {} checkpoints", grid.steps(), traj.states.len());

    let path = cli.out.join("trajectory.csv");
    output::write_trajectory_csv(&path, &traj).map_err(CliError::Io)?;
    let hash = fnv_hash(&format!(
        "solve;n={n};gamma={gamma};coupling={coupling_kind};q={};omega={};seed={}",
        cfg.q, cfg.omega, cfg.base_seed
    ));
    RunManifest::new(hash, start.elapsed().as_secs_f64(), vec![path])
        .verify_and_write(&cli.out)
        .map_err(CliError::Io)
}
