//! Monte Carlo trial orchestration and empirical convergence rates.
//!
//! The central experiment integrates the sampled Kuramoto system from a
//! q-twisted state and measures its distance to the exact traveling-wave
//! solution. Repeating over seeds and grid sizes and fitting
//! α_γ = ln(ē_coarse/ē_fine)/ln 2 produces the rate-versus-sparsity curve;
//! the theoretical prediction is (1−γ)/2 per γ.
//!
//! Trials are independent tasks: each (γ, n, trial) triple derives its
//! graph seed from the base seed by hashing, results land in indexed
//! slots, and aggregation uses pairwise sums, so reports are identical
//! for any worker count.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::dynamics::{
    discrete_l2_distance, exact_kuramoto_reference, rk4_integrate, twisted_state,
    twisted_state_cell_average, Coupling, InteractionSpec, SemidiscreteSystem, TimeGrid,
};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::graphon::{
    cell_matrix, optimal_gamma_singular, singular_error_exponents, CellKernelMatrix, Graphon,
    SingularExponents, SparsitySchedule,
};
use crate::grid::{lp_error, project_step, GridPartition};
use crate::quad::{integrate_box, QuadratureSpec};
use crate::rng::combine;
use crate::util::{lsq_slope, mean_and_stderr};

/// Which error is reported per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorFunctional {
    /// max over checkpoints of the discrete L² distance to the reference.
    SupTime,
    /// distance at the final time only.
    FinalTime,
}

/// How the twisted initial state is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialData {
    /// Cell-midpoint values (midpoint = average except in jump cells).
    Midpoint,
    /// Exact cell averages.
    CellAverage,
}

/// Kernel selection, mirroring the CLI config keys.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Constant { value: f64 },
    Band { radius: f64, periodic: bool },
    Singular { lambda: f64 },
    Expression { source: String, sup_bound: Option<f64> },
}

impl KernelSpec {
    pub fn build(&self) -> Result<Graphon> {
        match self {
            KernelSpec::Constant { value } => Ok(Graphon::constant(1, *value)),
            KernelSpec::Band { radius, periodic } => Graphon::band(*radius, *periodic),
            KernelSpec::Singular { lambda } => Graphon::singular(1, *lambda),
            KernelSpec::Expression { source, sup_bound } => {
                Graphon::from_expression(source, *sup_bound)
            }
        }
    }

    fn canonical(&self) -> String {
        match self {
            KernelSpec::Constant { value } => format!("constant:{value:e}"),
            KernelSpec::Band { radius, periodic } => format!("band:{radius:e}:{periodic}"),
            KernelSpec::Singular { lambda } => format!("singular:{lambda:e}"),
            KernelSpec::Expression { source, sup_bound } => {
                format!("expr:{source}:{sup_bound:?}")
            }
        }
    }
}

/// Full description of a rate experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kernel: KernelSpec,
    pub gammas: Vec<f64>,
    pub ns: Vec<usize>,
    pub trials: usize,
    pub q: i64,
    pub omega: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Spacing of the error checkpoints in time units.
    pub checkpoint_interval: f64,
    pub base_seed: u64,
    pub error_functional: ErrorFunctional,
    pub initial_data: InitialData,
}

impl ExperimentConfig {
    /// CI-friendly defaults; the full-size experiment stays behind
    /// [`paper_scale`](Self::paper_scale).
    pub fn desk_scale() -> Self {
        ExperimentConfig {
            kernel: KernelSpec::Band {
                radius: 0.2,
                periodic: true,
            },
            gammas: vec![0.2, 0.35, 0.5, 0.65, 0.8],
            ns: vec![64, 128],
            trials: 30,
            q: 3,
            omega: 0.5,
            t_end: 1.0,
            dt: 1e-2,
            checkpoint_interval: 0.1,
            base_seed: 42,
            error_functional: ErrorFunctional::SupTime,
            initial_data: InitialData::Midpoint,
        }
    }

    /// The full-size experiment: n ∈ {128, 256}, 200 trials per pair.
    pub fn paper_scale() -> Self {
        ExperimentConfig {
            gammas: (1..=9).map(|k| k as f64 / 10.0).collect(),
            ns: vec![128, 256],
            trials: 200,
            ..Self::desk_scale()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns.len() < 2 {
            return Err(Error::Domain(
                "rate estimation needs at least 2 grid sizes".into(),
            ));
        }
        for &n in &self.ns {
            if n < 2 || !n.is_power_of_two() {
                return Err(Error::Domain(format!(
                    "grid sizes must be powers of 2, got {n}"
                )));
            }
        }
        if self.ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("grid sizes must be strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::Domain("at least one trial per pair required".into()));
        }
        if self.gammas.is_empty() {
            return Err(Error::Domain("gamma list must not be empty".into()));
        }
        for &g in &self.gammas {
            if !(0.0..1.0).contains(&g) {
                return Err(Error::Domain(format!("gamma {g} outside [0, 1)")));
            }
        }
        if !(self.t_end > 0.0) || !(self.dt > 0.0) || !(self.checkpoint_interval > 0.0) {
            return Err(Error::Domain(
                "t_end, dt and checkpoint_interval must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Stable FNV-1a hash of the canonical config text.
    pub fn content_hash(&self) -> u64 {
        let mut text = format!(
            "kernel={};trials={};q={};omega={:e};t_end={:e};dt={:e};cp={:e};seed={};err={:?};init={:?};gammas=",
            self.kernel.canonical(),
            self.trials,
            self.q,
            self.omega,
            self.t_end,
            self.dt,
            self.checkpoint_interval,
            self.base_seed,
            self.error_functional,
            self.initial_data,
        );
        for g in &self.gammas {
            text.push_str(&format!("{g:e},"));
        }
        text.push_str(";ns=");
        for n in &self.ns {
            text.push_str(&format!("{n},"));
        }
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for b in text.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    /// Per-trial graph seed: a hash of (base seed, γ, n, trial index).
    /// Hashing the γ value (not its list position) keeps existing trials
    /// stable when more γ points are added.
    pub fn trial_seed(&self, gamma: f64, n: usize, trial: usize) -> u64 {
        let s = combine(self.base_seed, gamma.to_bits());
        let s = combine(s, n as u64);
        combine(s, trial as u64)
    }

    fn time_grid(&self) -> Result<TimeGrid> {
        let every = (self.checkpoint_interval / self.dt).round().max(1.0) as usize;
        TimeGrid::with_interval(0.0, self.t_end, self.dt, every)
    }

    fn initial_state(&self, partition: &GridPartition) -> Result<Vec<f64>> {
        match self.initial_data {
            InitialData::Midpoint => twisted_state(self.q, partition),
            InitialData::CellAverage => twisted_state_cell_average(self.q, partition),
        }
    }
}

/// Errors of one integration against the exact reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub sup_error: f64,
    pub final_error: f64,
}

impl TrialOutcome {
    pub fn value(&self, functional: ErrorFunctional) -> f64 {
        match functional {
            ErrorFunctional::SupTime => self.sup_error,
            ErrorFunctional::FinalTime => self.final_error,
        }
    }
}

fn errors_against_reference(
    cfg: &ExperimentConfig,
    partition: &GridPartition,
    times: &[f64],
    states: &[Vec<f64>],
) -> Result<TrialOutcome> {
    let mut sup = 0.0f64;
    let mut last = 0.0f64;
    for (t, state) in times.iter().zip(states) {
        let reference = exact_kuramoto_reference(cfg.q, cfg.omega, *t, partition)?;
        let e = discrete_l2_distance(state, &reference, partition)?;
        sup = sup.max(e);
        last = e;
    }
    Ok(TrialOutcome {
        sup_error: sup,
        final_error: last,
    })
}

fn run_trial_on_matrix(
    cfg: &ExperimentConfig,
    cells: &CellKernelMatrix,
    schedule: &SparsitySchedule,
    seed: u64,
) -> Result<TrialOutcome> {
    let partition = *cells.partition();
    let graph = crate::sampling::sample_graph(cells, schedule, seed)?;
    let mut sys = SemidiscreteSystem::new(
        partition,
        Coupling::Sampled(graph),
        InteractionSpec::kuramoto(cfg.omega),
        cfg.initial_state(&partition)?,
    )?;
    let grid = cfg.time_grid()?;
    let traj = rk4_integrate(&mut sys, &grid)?;
    errors_against_reference(cfg, &partition, &traj.times, &traj.states)
}

/// One Monte Carlo trial: build the cell matrix for (γ, n), sample the
/// graph with the trial's derived seed, integrate from the twisted state
/// and report the error functionals.
pub fn run_trial(cfg: &ExperimentConfig, gamma: f64, n: usize, trial: usize) -> Result<TrialOutcome> {
    let w = cfg.kernel.build()?;
    let partition = GridPartition::new(n, w.dim())?;
    let schedule = SparsitySchedule::new(gamma)?;
    let cells = cell_matrix(&w, &partition, &schedule)?;
    run_trial_on_matrix(cfg, &cells, &schedule, cfg.trial_seed(gamma, n, trial))
}

/// The deterministic companion run with the averaged coupling: isolates
/// the Galerkin + time-stepping error (no Monte Carlo term).
pub fn run_averaged(cfg: &ExperimentConfig, gamma: f64, n: usize) -> Result<TrialOutcome> {
    let w = cfg.kernel.build()?;
    let partition = GridPartition::new(n, w.dim())?;
    let schedule = SparsitySchedule::new(gamma)?;
    let cells = cell_matrix(&w, &partition, &schedule)?;
    let mut sys = SemidiscreteSystem::new(
        partition,
        Coupling::Averaged(cells),
        InteractionSpec::kuramoto(cfg.omega),
        cfg.initial_state(&partition)?,
    )?;
    let grid = cfg.time_grid()?;
    let traj = rk4_integrate(&mut sys, &grid)?;
    errors_against_reference(cfg, &partition, &traj.times, &traj.states)
}

/// α = ln(ē_coarse / ē_fine) / ln 2. The errors must come from grids one
/// refinement apart (fine n = 2 · coarse n).
pub fn estimate_rate(coarse: f64, fine: f64) -> Result<f64> {
    if !(coarse > 0.0) || !(fine > 0.0) {
        return Err(Error::Domain(format!(
            "rate estimation requires positive errors, got {coarse} and {fine}"
        )));
    }
    Ok((coarse / fine).ln() / 2f64.ln())
}

/// Least-squares exponent α of a decay e ~ C n^{-α}.
pub fn fit_decay_exponent(ns: &[usize], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    -lsq_slope(&xs, &ys)
}

/// Mean error and spread for one (γ, n) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCell {
    pub gamma: f64,
    pub n: usize,
    pub trials: usize,
    pub diverged: usize,
    pub mean_error: f64,
    pub std_error: f64,
}

/// Fitted and predicted rate for one γ.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaRate {
    pub gamma: f64,
    pub alpha: f64,
    /// (1 − γ)/2.
    pub theory: f64,
}

/// One trial's raw record (for the per-trial CSV).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub gamma: f64,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub sup_error: f64,
    pub final_error: f64,
    pub diverged: bool,
}

/// Everything a rate sweep produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub cells: Vec<RateCell>,
    pub rates: Vec<GammaRate>,
    pub records: Vec<TrialRecord>,
    pub base_seed: u64,
    pub config_hash: u64,
    pub wall_secs: f64,
}

/// Run all trials of the γ × n grid, average, and fit α_γ per γ. With
/// two grid sizes the fit reduces to [`estimate_rate`]; with more it is
/// the least-squares slope in log-log.
pub fn rate_sweep(cfg: &ExperimentConfig) -> Result<RateReport> {
    cfg.validate()?;
    let start = Instant::now();
    let w = cfg.kernel.build()?;

    // one matrix per (gamma, n); case-II kernels depend on gamma through
    // the truncation cap
    let mut matrices: Vec<Arc<CellKernelMatrix>> = Vec::new();
    let mut schedules: Vec<SparsitySchedule> = Vec::new();
    for &gamma in &cfg.gammas {
        let schedule = SparsitySchedule::new(gamma)?;
        for &n in &cfg.ns {
            let partition = GridPartition::new(n, w.dim())?;
            matrices.push(Arc::new(cell_matrix(&w, &partition, &schedule)?));
            schedules.push(schedule);
        }
    }

    let n_levels = cfg.ns.len();
    let tasks: Vec<(usize, usize, usize)> = (0..cfg.gammas.len())
        .flat_map(|gi| {
            (0..n_levels).flat_map(move |ni| (0..cfg.trials).map(move |t| (gi, ni, t)))
        })
        .collect();

    let records: Vec<TrialRecord> = tasks
        .par_iter()
        .map(|&(gi, ni, trial)| {
            let gamma = cfg.gammas[gi];
            let n = cfg.ns[ni];
            let slot = gi * n_levels + ni;
            let seed = cfg.trial_seed(gamma, n, trial);
            match run_trial_on_matrix(cfg, &matrices[slot], &schedules[slot], seed) {
                Ok(outcome) => Ok(TrialRecord {
                    gamma,
                    n,
                    trial,
                    seed,
                    sup_error: outcome.sup_error,
                    final_error: outcome.final_error,
                    diverged: false,
                }),
                Err(Error::Divergence { .. }) => Ok(TrialRecord {
                    gamma,
                    n,
                    trial,
                    seed,
                    sup_error: f64::NAN,
                    final_error: f64::NAN,
                    diverged: true,
                }),
                Err(other) => Err(other),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::with_capacity(cfg.gammas.len() * n_levels);
    for (gi, &gamma) in cfg.gammas.iter().enumerate() {
        for (ni, &n) in cfg.ns.iter().enumerate() {
            let vals: Vec<f64> = records
                .iter()
                .filter(|r| {
                    !r.diverged
                        && r.trial < cfg.trials
                        && r.gamma == gamma
                        && r.n == n
                        && gi * n_levels + ni < matrices.len()
                })
                .map(|r| TrialOutcome {
                    sup_error: r.sup_error,
                    final_error: r.final_error,
                }
                .value(cfg.error_functional))
                .collect();
            let diverged = records
                .iter()
                .filter(|r| r.diverged && r.gamma == gamma && r.n == n)
                .count();
            let (mean, se) = mean_and_stderr(&vals);
            cells.push(RateCell {
                gamma,
                n,
                trials: vals.len(),
                diverged,
                mean_error: mean,
                std_error: se,
            });
        }
    }

    let mut rates = Vec::with_capacity(cfg.gammas.len());
    for (gi, &gamma) in cfg.gammas.iter().enumerate() {
        let level_means: Vec<f64> = (0..n_levels)
            .map(|ni| cells[gi * n_levels + ni].mean_error)
            .collect();
        let alpha = if level_means.iter().any(|&m| !(m > 0.0)) {
            f64::NAN
        } else if n_levels == 2 {
            estimate_rate(level_means[0], level_means[1])?
        } else {
            fit_decay_exponent(&cfg.ns, &level_means)
        };
        rates.push(GammaRate {
            gamma,
            alpha,
            theory: (1.0 - gamma) / 2.0,
        });
    }

    Ok(RateReport {
        cells,
        rates,
        records,
        base_seed: cfg.base_seed,
        config_hash: cfg.content_hash(),
        wall_secs: start.elapsed().as_secs_f64(),
    })
}

/// Mean sampled-vs-averaged gap at one grid size.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub n: usize,
    pub mean_gap: f64,
    pub std_error: f64,
    pub seeds: usize,
}

/// The sampled-vs-averaged study: decay of sup_t ‖u_n − v_n‖ with n.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub gamma: f64,
    pub rows: Vec<GapRow>,
    pub fitted_exponent: f64,
    /// d(1 − γ)/2.
    pub theory_exponent: f64,
}

/// For each n: integrate the averaged system once, then per seed the
/// sampled system from the same initial data, and average the
/// sup-over-checkpoints discrete L² gap.
pub fn sampled_vs_averaged(
    cfg: &ExperimentConfig,
    gamma: f64,
    ns: &[usize],
    seeds: usize,
) -> Result<GapReport> {
    if ns.len() < 2 {
        return Err(Error::Domain(
            "gap study needs at least 2 grid sizes".into(),
        ));
    }
    let w = cfg.kernel.build()?;
    let schedule = SparsitySchedule::new(gamma)?;
    let grid = cfg.time_grid()?;

    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let partition = GridPartition::new(n, w.dim())?;
        let cells = cell_matrix(&w, &partition, &schedule)?;
        let init = cfg.initial_state(&partition)?;

        let mut averaged_sys = SemidiscreteSystem::new(
            partition,
            Coupling::Averaged(cells.clone()),
            InteractionSpec::kuramoto(cfg.omega),
            init.clone(),
        )?;
        let averaged = rk4_integrate(&mut averaged_sys, &grid)?;

        let gaps: Vec<f64> = (0..seeds)
            .into_par_iter()
            .map(|s| {
                let seed = cfg.trial_seed(gamma, n, s);
                let graph = crate::sampling::sample_graph(&cells, &schedule, seed)?;
                let mut sys = SemidiscreteSystem::new(
                    partition,
                    Coupling::Sampled(graph),
                    InteractionSpec::kuramoto(cfg.omega),
                    init.clone(),
                )?;
                let sampled = rk4_integrate(&mut sys, &grid)?;
                let mut sup = 0.0f64;
                for (u, v) in sampled.states.iter().zip(&averaged.states) {
                    sup = sup.max(discrete_l2_distance(u, v, &partition)?);
                }
                Ok(sup)
            })
            .collect::<Result<Vec<_>>>()?;
        let (mean, se) = mean_and_stderr(&gaps);
        rows.push(GapRow {
            n,
            mean_gap: mean,
            std_error: se,
            seeds,
        });
    }

    let fitted = fit_decay_exponent(
        &rows.iter().map(|r| r.n).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.mean_gap).collect::<Vec<_>>(),
    );
    Ok(GapReport {
        gamma,
        rows,
        fitted_exponent: fitted,
        theory_exponent: (1.0 - gamma) / 2.0,
    })
}

/// A test function with the projection-rate exponent its regularity
/// class predicts.
#[derive(Debug, Clone)]
pub struct StudyFunction {
    pub label: String,
    pub field: Field,
    pub predicted_exponent: f64,
}

/// The three families the projection studies exercise: a Lipschitz
/// function (rate 1), a jump indicator with point boundary (rate
/// (d−β)/p = 1/2 at p = 2), and a Hölder-1/2 kink (rate ≥ 1/2).
pub fn standard_study_functions() -> Vec<StudyFunction> {
    vec![
        StudyFunction {
            label: "linear".into(),
            field: Field::coordinate(),
            predicted_exponent: 1.0,
        },
        StudyFunction {
            label: "indicator".into(),
            field: Field::indicator_interval(0.0, std::f64::consts::FRAC_1_SQRT_2),
            predicted_exponent: 0.5,
        },
        StudyFunction {
            label: "sqrt_kink".into(),
            field: Field::abs_power(0.5, 0.5),
            predicted_exponent: 0.5,
        },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionRow {
    pub label: String,
    pub n: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSlope {
    pub label: String,
    pub fitted: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionReport {
    pub p: f64,
    pub rows: Vec<ProjectionRow>,
    pub slopes: Vec<ProjectionSlope>,
}

/// Measure ‖φ − φ_n‖_{L^p} per dyadic level and fit the log-log slope,
/// side by side with the predicted exponent.
pub fn projection_rate_study(
    functions: &[StudyFunction],
    p: f64,
    levels: &[usize],
) -> Result<ProjectionReport> {
    if levels.len() < 2 {
        return Err(Error::Domain(
            "projection study needs at least 2 levels".into(),
        ));
    }
    for &n in levels {
        if !n.is_power_of_two() {
            return Err(Error::Domain(format!("levels must be dyadic, got {n}")));
        }
    }
    let quad = QuadratureSpec::default();
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for f in functions {
        let errors: Vec<f64> = levels
            .iter()
            .map(|&n| {
                let proj = project_step(&f.field, n)?;
                lp_error(&f.field, &proj, p, quad)
            })
            .collect::<Result<Vec<_>>>()?;
        for (&n, &e) in levels.iter().zip(&errors) {
            rows.push(ProjectionRow {
                label: f.label.clone(),
                n,
                error: e,
            });
        }
        slopes.push(ProjectionSlope {
            label: f.label.clone(),
            fitted: fit_decay_exponent(levels, &errors),
            predicted: f.predicted_exponent,
        });
    }
    Ok(ProjectionReport { p, rows, slopes })
}

/// Brute-force ‖W − W̃‖_{L²(Q²)} for W = |x−y|^{-λ} in d = 1 and a
/// truncation cap c: quadrature over the diagonal band |x−y| ≤ c^{-1/λ}
/// where the two kernels differ, using the difference variable and a
/// dyadically graded mesh toward the singularity.
pub fn truncation_error_l2(lambda: f64, cap: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 0.5) {
        return Err(Error::Domain(format!(
            "truncation-error oracle requires 0 < λ < 1/2, got {lambda}"
        )));
    }
    if !(cap >= 1.0) {
        return Err(Error::Domain(format!("cap must be >= 1, got {cap}")));
    }
    let u_star = cap.powf(-1.0 / lambda);
    // ‖W − W̃‖² = 2 ∫_0^{u*} (1 − u)(u^{-λ} − c)² du
    let integrand = |z: &[f64]| {
        let u = z[0];
        let excess = u.powf(-lambda) - cap;
        (1.0 - u) * excess * excess
    };
    // a dyadic span [a, 2a] of a power law has width comparable to its
    // scale; the second-order midpoint rule needs a few extra levels to
    // reach 1e-9 there
    let quad = QuadratureSpec {
        max_depth: 16,
        ..QuadratureSpec::default()
    };
    let mut total = 0.0;
    let mut hi = u_star;
    // graded dyadic intervals; the tail below `lo` is bounded by the
    // power integral and added once it is negligible
    for _ in 0..200 {
        let lo = hi * 0.5;
        total += integrate_box(&integrand, &[lo], &[hi], quad)?;
        let tail_bound = lo.powf(1.0 - 2.0 * lambda) / (1.0 - 2.0 * lambda);
        if tail_bound < 1e-14 * total.max(1e-300) {
            total += tail_bound;
            break;
        }
        hi = lo;
    }
    Ok((2.0 * total).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularRow {
    pub n: usize,
    pub cap: f64,
    pub truncation_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularReport {
    pub lambda: f64,
    pub gamma: f64,
    pub optimal_gamma: f64,
    pub exponents: SingularExponents,
    pub rows: Vec<SingularRow>,
    pub fitted_exponent: f64,
}

/// Measure the truncation error of the singular kernel across grid sizes
/// (d = 1) and fit its decay exponent; γ defaults to the optimal value.
pub fn singular_truncation_study(
    lambda: f64,
    gamma: Option<f64>,
    ns: &[usize],
) -> Result<SingularReport> {
    if ns.len() < 2 {
        return Err(Error::Domain(
            "singular study needs at least 2 grid sizes".into(),
        ));
    }
    let optimal = optimal_gamma_singular(lambda, 1)?;
    let gamma = gamma.unwrap_or(optimal);
    let exponents = singular_error_exponents(lambda, 1, gamma)?;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let cap = (n as f64).powf(gamma); // α_n^{-1} = n^{dγ}, d = 1
        rows.push(SingularRow {
            n,
            cap,
            truncation_error: truncation_error_l2(lambda, cap)?,
        });
    }
    let fitted = fit_decay_exponent(
        &rows.iter().map(|r| r.n).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.truncation_error).collect::<Vec<_>>(),
    );
    Ok(SingularReport {
        lambda,
        gamma,
        optimal_gamma: optimal,
        exponents,
        rows,
        fitted_exponent: fitted,
    })
}
