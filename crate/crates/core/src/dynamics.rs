//! The semidiscrete systems and their integration.
//!
//! The sampled system couples node ī to its sampled out-neighbors:
//!
//! ```text
//! du_ī/dt = f_ī(u_ī, t) + (α_n n^d)^{-1} Σ_j a_īj D(u_j − u_ī)
//! ```
//!
//! and the averaged system replaces the adjacency by its expectation,
//! the kernel cell matrix:
//!
//! ```text
//! dv_ī/dt = f_ī(v_ī, t) + n^{-d} Σ_j W_īj D(v_j − v_ī).
//! ```
//!
//! States evolve in ℝ without modular reduction: the initial condition
//! encodes the winding and the dynamics see u only through differences
//! inside D, so the un-wrapped exact reference u^{(q)} + ωt stays valid
//! and error norms are free of spurious 2π jumps.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphon::CellKernelMatrix;
use crate::grid::GridPartition;
use crate::sampling::SparseGraph;
use crate::util::pairwise_sum;

/// Per-cell forcing term f_{n,ī}(u, t).
#[derive(Clone)]
pub enum Forcing {
    Constant(f64),
    /// Precomputed cell averages of an x-dependent, (u,t)-independent f.
    CellValues(Vec<f64>),
    Custom(Arc<dyn Fn(f64, usize, f64) -> f64 + Send + Sync>),
}

impl Forcing {
    #[inline]
    pub fn eval(&self, u: f64, cell: usize, t: f64) -> f64 {
        match self {
            Forcing::Constant(c) => *c,
            Forcing::CellValues(v) => v[cell],
            Forcing::Custom(f) => f(u, cell, t),
        }
    }
}

/// The interaction data (D, f) with declared Lipschitz constants.
#[derive(Clone)]
pub struct InteractionSpec {
    pub coupling: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub coupling_lipschitz: f64,
    pub forcing: Forcing,
    pub forcing_lipschitz: f64,
}

impl InteractionSpec {
    /// Kuramoto interaction: D(w) = −sin w (so that D(u_j − u_i) equals
    /// sin(u_i − u_j), the classical phase-coupling sign) and f ≡ ω.
    pub fn kuramoto(omega: f64) -> Self {
        InteractionSpec {
            coupling: Arc::new(|w: f64| -w.sin()),
            coupling_lipschitz: 1.0,
            forcing: Forcing::Constant(omega),
            forcing_lipschitz: 0.0,
        }
    }

    /// No forcing, custom coupling.
    pub fn coupling_only(
        d: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lipschitz: f64,
    ) -> Self {
        InteractionSpec {
            coupling: Arc::new(d),
            coupling_lipschitz: lipschitz,
            forcing: Forcing::Constant(0.0),
            forcing_lipschitz: 0.0,
        }
    }

    /// Probe the declared bounds: |D| ≤ 1 on 10^4 points of [−4π, 4π],
    /// the Lipschitz constant of D on consecutive probe points, and the
    /// Lipschitz-in-u constant of f.
    pub fn validate(&self) -> Result<()> {
        let m = 10_000;
        let lo = -4.0 * std::f64::consts::PI;
        let hi = 4.0 * std::f64::consts::PI;
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..m {
            let w = lo + (hi - lo) * k as f64 / (m - 1) as f64;
            let dw = (self.coupling)(w);
            if dw.abs() > 1.0 + 1e-12 {
                return Err(Error::Domain(format!(
                    "|D({w})| = {} exceeds the unit bound",
                    dw.abs()
                )));
            }
            if let Some((wp, dp)) = prev {
                if (dw - dp).abs() > self.coupling_lipschitz * (w - wp).abs() + 1e-12 {
                    return Err(Error::Domain(format!(
                        "coupling violates its Lipschitz constant {} near w = {w}",
                        self.coupling_lipschitz
                    )));
                }
            }
            prev = Some((w, dw));
        }
        for k in 0..100 {
            let u1 = -8.0 + 16.0 * k as f64 / 99.0;
            let u2 = u1 + 0.37;
            let f1 = self.forcing.eval(u1, 0, 0.0);
            let f2 = self.forcing.eval(u2, 0, 0.0);
            if (f1 - f2).abs() > self.forcing_lipschitz * (u1 - u2).abs() + 1e-12 {
                return Err(Error::Domain(format!(
                    "forcing violates its Lipschitz constant {} near u = {u1}",
                    self.forcing_lipschitz
                )));
            }
        }
        Ok(())
    }
}

/// Coupling source: sampled adjacency or the averaged kernel matrix.
#[derive(Clone)]
pub enum Coupling {
    Sampled(SparseGraph),
    Averaged(CellKernelMatrix),
}

/// State, coupling and interaction of one semidiscrete system.
#[derive(Clone)]
pub struct SemidiscreteSystem {
    pub partition: GridPartition,
    pub coupling: Coupling,
    pub interaction: InteractionSpec,
    pub state: Vec<f64>,
    pub time: f64,
}

impl SemidiscreteSystem {
    pub fn new(
        partition: GridPartition,
        coupling: Coupling,
        interaction: InteractionSpec,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let nd = partition.cell_count();
        if initial.len() != nd {
            return Err(Error::LengthMismatch {
                left: initial.len(),
                right: nd,
            });
        }
        let coupling_nodes = match &coupling {
            Coupling::Sampled(g) => g.node_count(),
            Coupling::Averaged(m) => m.node_count(),
        };
        if coupling_nodes != nd {
            return Err(Error::LengthMismatch {
                left: coupling_nodes,
                right: nd,
            });
        }
        Ok(SemidiscreteSystem {
            partition,
            coupling,
            interaction,
            state: initial,
            time: 0.0,
        })
    }

    /// Evaluate the RHS matching the coupling source into `out`.
    pub fn rhs_into(&self, t: f64, u: &[f64], out: &mut [f64]) {
        let nd_f = self.partition.cell_count_f();
        let d_fn = &self.interaction.coupling;
        let forcing = &self.interaction.forcing;
        match &self.coupling {
            Coupling::Sampled(graph) => {
                let inv = 1.0 / (graph.alpha() * nd_f);
                let eval = |i: usize, out_i: &mut f64| {
                    let ui = u[i];
                    let mut acc = 0.0;
                    for &j in graph.neighbors(i) {
                        acc += d_fn(u[j as usize] - ui);
                    }
                    *out_i = forcing.eval(ui, i, t) + acc * inv;
                };
                if u.len() >= 512 {
                    out.par_iter_mut().enumerate().for_each(|(i, o)| eval(i, o));
                } else {
                    out.iter_mut().enumerate().for_each(|(i, o)| eval(i, o));
                }
            }
            Coupling::Averaged(cells) => {
                let inv = 1.0 / nd_f;
                let eval = |i: usize, out_i: &mut f64| {
                    let ui = u[i];
                    let mut acc = 0.0;
                    for (j, &w) in cells.row(i).iter().enumerate() {
                        acc += w * d_fn(u[j] - ui);
                    }
                    *out_i = forcing.eval(ui, i, t) + acc * inv;
                };
                if u.len() >= 512 {
                    out.par_iter_mut().enumerate().for_each(|(i, o)| eval(i, o));
                } else {
                    out.iter_mut().enumerate().for_each(|(i, o)| eval(i, o));
                }
            }
        }
    }
}

/// RHS of the sampled system; the coupling must be a sampled graph.
pub fn rhs_sampled(t: f64, u: &[f64], sys: &SemidiscreteSystem) -> Result<Vec<f64>> {
    if !matches!(sys.coupling, Coupling::Sampled(_)) {
        return Err(Error::Domain(
            "rhs_sampled requires a sampled-graph coupling".into(),
        ));
    }
    let mut out = vec![0.0; u.len()];
    sys.rhs_into(t, u, &mut out);
    Ok(out)
}

/// RHS of the averaged system; the coupling must be a cell matrix.
pub fn rhs_averaged(t: f64, v: &[f64], sys: &SemidiscreteSystem) -> Result<Vec<f64>> {
    if !matches!(sys.coupling, Coupling::Averaged(_)) {
        return Err(Error::Domain(
            "rhs_averaged requires an averaged-matrix coupling".into(),
        ));
    }
    let mut out = vec![0.0; v.len()];
    sys.rhs_into(t, v, &mut out);
    Ok(out)
}

/// Fixed-step time grid with snapshot checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    dt: f64,
    steps: usize,
    checkpoints: Vec<usize>,
}

impl TimeGrid {
    /// (t1−t0)/dt must be a positive integer within rounding 1e−12.
    /// Checkpoints are step indices; 0 and the final step are always
    /// included.
    pub fn new(t0: f64, t1: f64, dt: f64, checkpoints: Vec<usize>) -> Result<Self> {
        if !(dt > 0.0) || !(t1 > t0) {
            return Err(Error::Domain(format!(
                "time grid requires t1 > t0 and dt > 0, got [{t0}, {t1}], dt={dt}"
            )));
        }
        let raw = (t1 - t0) / dt;
        let steps = raw.round() as usize;
        if steps == 0 || (raw - steps as f64).abs() > 1e-12 * raw.max(1.0) {
            return Err(Error::Domain(format!(
                "(t1 - t0)/dt = {raw} is not a positive integer within 1e-12"
            )));
        }
        let mut cps = checkpoints;
        cps.push(0);
        cps.push(steps);
        cps.sort_unstable();
        cps.dedup();
        if *cps.last().unwrap() > steps {
            return Err(Error::Domain(format!(
                "checkpoint beyond the final step {steps}"
            )));
        }
        Ok(TimeGrid {
            t0,
            t1,
            dt,
            steps,
            checkpoints: cps,
        })
    }

    /// Checkpoints every `every` steps (plus the endpoints).
    pub fn with_interval(t0: f64, t1: f64, dt: f64, every: usize) -> Result<Self> {
        let raw = ((t1 - t0) / dt).round() as usize;
        let every = every.max(1);
        let cps: Vec<usize> = (0..=raw).step_by(every).collect();
        TimeGrid::new(t0, t1, dt, cps)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn checkpoints(&self) -> &[usize] {
        &self.checkpoints
    }

    pub fn time_of_step(&self, step: usize) -> f64 {
        self.t0 + self.dt * step as f64
    }
}

/// Checkpointed states of one integration.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub checkpoint_steps: Vec<usize>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }
}

/// Classical fixed-step RK4 on a generic RHS; snapshots at checkpoints.
pub fn rk4_integrate_fn(
    rhs: impl Fn(f64, &[f64], &mut [f64]),
    initial: Vec<f64>,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    let n = initial.len();
    let mut y = initial;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];

    let mut times = Vec::with_capacity(grid.checkpoints.len());
    let mut states = Vec::with_capacity(grid.checkpoints.len());
    let mut next_cp = 0usize;
    let store = |step: usize, y: &[f64], times: &mut Vec<f64>, states: &mut Vec<Vec<f64>>| {
        times.push(grid.time_of_step(step));
        states.push(y.to_vec());
    };
    if grid.checkpoints[next_cp] == 0 {
        store(0, &y, &mut times, &mut states);
        next_cp += 1;
    }

    let dt = grid.dt;
    for step in 0..grid.steps {
        let t = grid.time_of_step(step);
        rhs(t, &y, &mut k1);
        for i in 0..n {
            stage[i] = y[i] + 0.5 * dt * k1[i];
        }
        rhs(t + 0.5 * dt, &stage, &mut k2);
        for i in 0..n {
            stage[i] = y[i] + 0.5 * dt * k2[i];
        }
        rhs(t + 0.5 * dt, &stage, &mut k3);
        for i in 0..n {
            stage[i] = y[i] + dt * k3[i];
        }
        rhs(t + dt, &stage, &mut k4);
        for i in 0..n {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: step + 1 });
        }
        if next_cp < grid.checkpoints.len() && grid.checkpoints[next_cp] == step + 1 {
            store(step + 1, &y, &mut times, &mut states);
            next_cp += 1;
        }
    }

    Ok(Trajectory {
        times,
        states,
        checkpoint_steps: grid.checkpoints.clone(),
    })
}

/// Integrate a semidiscrete system, dispatching the RHS on its coupling.
/// The system's state and clock advance to the end of the grid.
pub fn rk4_integrate(sys: &mut SemidiscreteSystem, grid: &TimeGrid) -> Result<Trajectory> {
    let initial = sys.state.clone();
    let traj = {
        let sys_ref: &SemidiscreteSystem = sys;
        rk4_integrate_fn(
            |t, u, out| sys_ref.rhs_into(t, u, out),
            initial,
            grid,
        )?
    };
    sys.state = traj.final_state().to_vec();
    sys.time = grid.t1;
    Ok(traj)
}

/// The q-twisted state sampled at cell midpoints:
/// u_i = 2π((q x_i) mod 1), x_i = (i − 1/2)/n. Requires d = 1.
pub fn twisted_state(q: i64, partition: &GridPartition) -> Result<Vec<f64>> {
    if partition.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            expected: 1,
            got: partition.dim(),
        });
    }
    let n = partition.cell_count();
    Ok((0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) / n as f64;
            let arg = q as f64 * x;
            2.0 * std::f64::consts::PI * (arg - arg.floor())
        })
        .collect())
}

/// The q-twisted state averaged exactly over each cell; differs from the
/// midpoint sampling only in the q cells containing sawtooth jumps.
pub fn twisted_state_cell_average(q: i64, partition: &GridPartition) -> Result<Vec<f64>> {
    if partition.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            expected: 1,
            got: partition.dim(),
        });
    }
    let n = partition.cell_count();
    if q == 0 {
        return Ok(vec![0.0; n]);
    }
    // antiderivative of frac: S(t) = floor(t)/2 + frac(t)^2/2
    let s = |t: f64| {
        let fl = t.floor();
        let fr = t - fl;
        0.5 * fl + 0.5 * fr * fr
    };
    let qf = q as f64;
    Ok((0..n)
        .map(|i| {
            let a = i as f64 / n as f64;
            let b = (i + 1) as f64 / n as f64;
            let mean_frac = (s(qf * b) - s(qf * a)) / (qf * (b - a));
            2.0 * std::f64::consts::PI * mean_frac
        })
        .collect())
}

/// Exact reference for the Kuramoto twisted-wave solution, evaluated at
/// cell midpoints WITHOUT modular reduction: twisted_state + ω t.
pub fn exact_kuramoto_reference(
    q: i64,
    omega: f64,
    t: f64,
    partition: &GridPartition,
) -> Result<Vec<f64>> {
    let mut v = twisted_state(q, partition)?;
    for u in &mut v {
        *u += omega * t;
    }
    Ok(v)
}

/// Discrete L² distance (n^{-d} Σ (u_i − v_i)²)^{1/2}; equals the L²(Q)
/// distance of the associated step functions.
pub fn discrete_l2_distance(u: &[f64], v: &[f64], partition: &GridPartition) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let sq: Vec<f64> = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).collect();
    Ok((pairwise_sum(&sq) / partition.cell_count_f()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphon::{cell_matrix, Graphon, SparsitySchedule};
    use crate::rng::CounterRng;
    use crate::sampling::sample_graph;
    use std::f64::consts::PI;

    fn partition(n: usize) -> GridPartition {
        GridPartition::new(n, 1).unwrap()
    }

    fn averaged_kuramoto(n: usize, omega: f64, q: i64) -> SemidiscreteSystem {
        let w = Graphon::band(0.2, true).unwrap();
        let p = partition(n);
        let schedule = SparsitySchedule::new(0.0).unwrap();
        let cells = cell_matrix(&w, &p, &schedule).unwrap();
        let init = twisted_state(q, &p).unwrap();
        SemidiscreteSystem::new(
            p,
            Coupling::Averaged(cells),
            InteractionSpec::kuramoto(omega),
            init,
        )
        .unwrap()
    }

    #[test]
    fn kuramoto_interaction_passes_validation() {
        InteractionSpec::kuramoto(0.5).validate().unwrap();
        // a coupling exceeding the unit bound must be rejected
        let bad = InteractionSpec::coupling_only(|w| 2.0 * w.sin(), 2.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rhs_sampled_examples() {
        let p = partition(2);
        // empty graph, f = 0
        let w0 = Graphon::constant(1, 0.0);
        let schedule = SparsitySchedule::new(0.0).unwrap();
        let cells = cell_matrix(&w0, &p, &schedule).unwrap();
        let g = sample_graph(&cells, &schedule, 1).unwrap();
        let sys = SemidiscreteSystem::new(
            p,
            Coupling::Sampled(g),
            InteractionSpec::coupling_only(|w| -w.sin(), 1.0),
            vec![0.3, 0.9],
        )
        .unwrap();
        let out = rhs_sampled(0.0, &[0.3, 0.9], &sys).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);

        // complete 2-node graph with self loops, alpha = 1, D = -sin,
        // f = 0.5, u = (0, pi/2): rhs = (0, 1)
        let w1 = Graphon::constant(1, 1.0);
        let cells = cell_matrix(&w1, &p, &schedule).unwrap();
        let g = sample_graph(&cells, &schedule, 1).unwrap();
        assert_eq!(g.edge_count(), 4);
        let sys = SemidiscreteSystem::new(
            p,
            Coupling::Sampled(g),
            InteractionSpec::kuramoto(0.5),
            vec![0.0, PI / 2.0],
        )
        .unwrap();
        let out = rhs_sampled(0.0, &[0.0, PI / 2.0], &sys).unwrap();
        assert!(out[0].abs() < 1e-15, "{out:?}");
        assert!((out[1] - 1.0).abs() < 1e-15, "{out:?}");
    }

    #[test]
    fn constant_state_is_equilibrium_for_odd_coupling() {
        let p = partition(16);
        let w = Graphon::band(0.2, true).unwrap();
        let schedule = SparsitySchedule::new(0.25).unwrap();
        let cells = cell_matrix(&w, &p, &schedule).unwrap();
        let g = sample_graph(&cells, &schedule, 3).unwrap();
        let u = vec![1.234; 16];
        let sys = SemidiscreteSystem::new(
            p,
            Coupling::Sampled(g),
            InteractionSpec::coupling_only(|w| -w.sin(), 1.0),
            u.clone(),
        )
        .unwrap();
        let out = rhs_sampled(0.0, &u, &sys).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn rhs_averaged_matches_sampled_on_deterministic_complete_graph() {
        // alpha = 1 and W = 1 make every edge probability 1; the two RHS
        // forms must then agree exactly
        let p = partition(8);
        let w = Graphon::constant(1, 1.0);
        let schedule = SparsitySchedule::new(0.0).unwrap();
        let cells = cell_matrix(&w, &p, &schedule).unwrap();
        let g = sample_graph(&cells, &schedule, 9).unwrap();
        let rng = CounterRng::new(17);
        let u: Vec<f64> = (0..8).map(|i| rng.uniform(i) * 2.0 * PI).collect();
        let spec = InteractionSpec::kuramoto(0.5);
        let sys_s =
            SemidiscreteSystem::new(p, Coupling::Sampled(g), spec.clone(), u.clone()).unwrap();
        let sys_a =
            SemidiscreteSystem::new(p, Coupling::Averaged(cells), spec, u.clone()).unwrap();
        let a = rhs_sampled(0.0, &u, &sys_s).unwrap();
        let b = rhs_averaged(0.0, &u, &sys_a).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rhs_is_translation_equivariant() {
        let p = partition(16);
        let w = Graphon::band(0.2, true).unwrap();
        let schedule = SparsitySchedule::new(0.25).unwrap();
        let cells = cell_matrix(&w, &p, &schedule).unwrap();
        let rng = CounterRng::new(5);
        let u: Vec<f64> = (0..16).map(|i| rng.uniform(i) * 2.0 * PI).collect();
        let shifted: Vec<f64> = u.iter().map(|v| v + 3.7).collect();
        let sys = SemidiscreteSystem::new(
            p,
            Coupling::Averaged(cells),
            InteractionSpec::kuramoto(0.5),
            u.clone(),
        )
        .unwrap();
        let a = rhs_averaged(0.0, &u, &sys).unwrap();
        let b = rhs_averaged(0.0, &shifted, &sys).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn twisted_state_is_stationary_for_averaged_kuramoto() {
        // with omega = 0 the q-twisted state is an equilibrium of the
        // averaged system
        let sys = averaged_kuramoto(128, 0.0, 3);
        let u0 = sys.state.clone();
        let out = rhs_averaged(0.0, &u0, &sys).unwrap();
        let p = partition(128);
        let norm = discrete_l2_distance(&out, &vec![0.0; 128], &p).unwrap();
        assert!(norm < 1e-12, "rhs norm at twisted state: {norm:e}");
    }

    #[test]
    fn averaged_rhs_at_twisted_state_equals_omega() {
        let sys = averaged_kuramoto(128, 0.5, 3);
        let out = rhs_averaged(0.0, &sys.state, &sys).unwrap();
        assert!(out.iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn jacobian_vector_products_match_finite_differences() {
        let p = partition(16);
        let w = Graphon::band(0.2, true).unwrap();
        let schedule = SparsitySchedule::new(0.0).unwrap();
        let cells = cell_matrix(&w, &p, &schedule).unwrap();
        let rng = CounterRng::new(23);
        let u: Vec<f64> = (0..16).map(|i| rng.uniform(i) * 2.0 * PI).collect();
        let dir: Vec<f64> = (0..16).map(|i| rng.uniform(100 + i) * 2.0 - 1.0).collect();
        let sys = SemidiscreteSystem::new(
            p,
            Coupling::Averaged(cells.clone()),
            InteractionSpec::kuramoto(0.5),
            u.clone(),
        )
        .unwrap();

        // analytic directional derivative from D' (w) = -cos w
        let nd = 16.0;
        let mut analytic = vec![0.0; 16];
        for i in 0..16 {
            let mut acc = 0.0;
            for j in 0..16 {
                acc += cells.entry(i, j) * (-(u[j] - u[i]).cos()) * (dir[j] - dir[i]);
            }
            analytic[i] = acc / nd;
        }

        let eps = 1e-6;
        let up: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + eps * b).collect();
        let um: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a - eps * b).collect();
        let fp = rhs_averaged(0.0, &up, &sys).unwrap();
        let fm = rhs_averaged(0.0, &um, &sys).unwrap();
        let scale = analytic.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        for i in 0..16 {
            let fd = (fp[i] - fm[i]) / (2.0 * eps);
            assert!(
                (fd - analytic[i]).abs() <= 1e-4 * scale.max(1e-3),
                "component {i}: fd {fd} vs analytic {}",
                analytic[i]
            );
        }
    }

    #[test]
    fn rk4_keeps_constant_trajectory_for_zero_rhs() {
        let grid = TimeGrid::with_interval(0.0, 1.0, 0.01, 10).unwrap();
        let traj =
            rk4_integrate_fn(|_, _, out| out.fill(0.0), vec![1.0, -2.0, 0.5], &grid).unwrap();
        assert_eq!(traj.states.len(), 11);
        for s in &traj.states {
            assert_eq!(s, &vec![1.0, -2.0, 0.5]);
        }
    }

    #[test]
    fn rk4_exponential_accuracy_and_order() {
        // u' = u, u(0) = 1: the classical fourth-order error at t = 1
        let run = |dt: f64| {
            let grid = TimeGrid::new(0.0, 1.0, dt, vec![]).unwrap();
            let traj = rk4_integrate_fn(|_, u, out| out[0] = u[0], vec![1.0], &grid).unwrap();
            traj.final_state()[0]
        };
        let e = std::f64::consts::E;
        let coarse = run(0.1);
        assert!((coarse - e).abs() < 3e-6, "coarse err {:e}", (coarse - e).abs());
        let fine = run(0.05);
        let ratio = (coarse - e).abs() / (fine - e).abs();
        assert!((14.0..=18.0).contains(&ratio), "order ratio {ratio}");
    }

    #[test]
    fn rk4_reproduces_linear_drift_exactly() {
        // f = omega with zero coupling: u(t) = u(0) + omega t
        let p = partition(8);
        let w0 = Graphon::constant(1, 0.0);
        let schedule = SparsitySchedule::new(0.0).unwrap();
        let cells = cell_matrix(&w0, &p, &schedule).unwrap();
        let g = sample_graph(&cells, &schedule, 1).unwrap();
        let init = twisted_state(2, &p).unwrap();
        let mut sys = SemidiscreteSystem::new(
            p,
            Coupling::Sampled(g),
            InteractionSpec::kuramoto(0.5),
            init.clone(),
        )
        .unwrap();
        let grid = TimeGrid::with_interval(0.0, 1.0, 0.01, 10).unwrap();
        let traj = rk4_integrate(&mut sys, &grid).unwrap();
        for (k, state) in traj.states.iter().enumerate() {
            let t = traj.times[k];
            for (i, v) in state.iter().enumerate() {
                assert!((v - (init[i] + 0.5 * t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rk4_reports_divergence_step() {
        let grid = TimeGrid::new(0.0, 1.0, 0.1, vec![]).unwrap();
        let err = rk4_integrate_fn(
            |_, u, out| out[0] = u[0] * u[0] * 1e6,
            vec![1.0],
            &grid,
        )
        .unwrap_err();
        match err {
            Error::Divergence { step } => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn time_grid_validation() {
        assert!(TimeGrid::new(0.0, 1.0, 0.01, vec![]).is_ok());
        assert!(TimeGrid::new(0.0, 1.0, 0.013, vec![]).is_err());
        assert!(TimeGrid::new(1.0, 0.0, 0.01, vec![]).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0.01, vec![500]).is_err());
        let g = TimeGrid::with_interval(0.0, 1.0, 0.01, 10).unwrap();
        assert_eq!(g.steps(), 100);
        assert_eq!(g.checkpoints().len(), 11);
    }

    #[test]
    fn twisted_state_examples() {
        let p = partition(4);
        assert_eq!(twisted_state(0, &p).unwrap(), vec![0.0; 4]);
        let u = twisted_state(1, &p).unwrap();
        let expected: Vec<f64> = [1.0, 3.0, 5.0, 7.0]
            .iter()
            .map(|k| 2.0 * PI * k / 8.0)
            .collect();
        for (a, b) in u.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
        // q=3 on n=128: a sawtooth with 3 rising teeth (q-1 interior wraps)
        let p = partition(128);
        let u = twisted_state(3, &p).unwrap();
        let wraps = u.windows(2).filter(|w| w[1] < w[0]).count();
        assert_eq!(wraps + 1, 3);
        assert!(u.iter().all(|&v| (0.0..2.0 * PI).contains(&v)));
        assert!(twisted_state(3, &GridPartition::new(4, 2).unwrap()).is_err());
    }

    #[test]
    fn twisted_cell_average_differs_only_in_jump_cells() {
        let p = partition(128);
        let q = 3;
        let mid = twisted_state(q, &p).unwrap();
        let avg = twisted_state_cell_average(q, &p).unwrap();
        // interior sawtooth jumps sit at x = k/q, k = 1..q-1; those cells
        // are the only ones where midpoint and average disagree
        let differing = mid
            .iter()
            .zip(&avg)
            .filter(|(a, b)| (*a - *b).abs() > 1e-12)
            .count();
        assert_eq!(differing as i64, q - 1);
        // oracle on one jump cell: direct fine Riemann sum
        let jump_cell = (0..128)
            .find(|&i| (mid[i] - avg[i]).abs() > 1e-12)
            .unwrap();
        let a = jump_cell as f64 / 128.0;
        let m = 200_000;
        let mut acc = 0.0;
        for k in 0..m {
            let x = a + (k as f64 + 0.5) / m as f64 / 128.0;
            let arg = q as f64 * x;
            acc += 2.0 * PI * (arg - arg.floor());
        }
        acc /= m as f64;
        assert!((avg[jump_cell] - acc).abs() < 1e-4, "{} vs {acc}", avg[jump_cell]);
    }

    #[test]
    fn exact_reference_examples() {
        let p = partition(16);
        let base = twisted_state(3, &p).unwrap();
        let r0 = exact_kuramoto_reference(3, 0.5, 0.0, &p).unwrap();
        assert_eq!(base, r0);
        let r1 = exact_kuramoto_reference(3, 0.5, 1.0, &p).unwrap();
        for (a, b) in base.iter().zip(&r1) {
            assert!((b - a - 0.5).abs() < 1e-15);
        }
        let r = exact_kuramoto_reference(0, 1.0, 2.0 * PI, &p).unwrap();
        assert!(r.iter().all(|&v| (v - 2.0 * PI).abs() < 1e-15));
    }

    #[test]
    fn discrete_l2_examples() {
        let p = partition(4);
        let u = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(discrete_l2_distance(&u, &u, &p).unwrap(), 0.0);
        let v: Vec<f64> = u.iter().map(|x| x + 2.5).collect();
        assert!((discrete_l2_distance(&u, &v, &p).unwrap() - 2.5).abs() < 1e-15);
        let w = vec![2.0, 1.0, 4.0, 3.0]; // difference (1,-1,1,-1)
        assert!((discrete_l2_distance(&u, &w, &p).unwrap() - 1.0).abs() < 1e-15);
        assert!(discrete_l2_distance(&u, &[1.0], &p).is_err());
    }

    #[test]
    fn stationarity_holds_over_unit_time() {
        // omega = 0, q = 3, n = 128: the averaged system stays within
        // 1e-10 of the twisted state on [0, 1]
        let mut sys = averaged_kuramoto(128, 0.0, 3);
        let reference = sys.state.clone();
        let p = sys.partition;
        let grid = TimeGrid::with_interval(0.0, 1.0, 0.01, 1).unwrap();
        let traj = rk4_integrate(&mut sys, &grid).unwrap();
        let mut worst: f64 = 0.0;
        for state in &traj.states {
            worst = worst.max(discrete_l2_distance(state, &reference, &p).unwrap());
        }
        assert!(worst < 1e-10, "drift {worst:e}");
    }
}
