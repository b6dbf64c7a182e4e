//! Kernels (graphons) on Q² = [0,1]^{2d}: definitions, sign splitting,
//! truncation, cell-average matrices, and the rate formulas for singular
//! kernels.
//!
//! Two constructions of the cell matrix are distinguished. A kernel that
//! is declared bounded with sup ≤ 1 gets plain cell averages (case I); any
//! other kernel is truncated at α_n^{-1} before averaging (case II). The
//! truncation cap is what makes Bernoulli sampling applicable to
//! unbounded kernels, and it concentrates sample points near the
//! singularities automatically.
//!
//! Difference kernels W(x,y) = g(y−x) in d = 1 — the constant, band and
//! power-law families — integrate exactly over boxes through the second
//! antiderivative of g, so their cell matrices carry no quadrature error.
//! That matters: the Kuramoto experiment needs the coupling matrix exact
//! to isolate the Monte Carlo error.
//!
//! Two distinct facts both go by "cutoff" in the underlying analysis: the
//! truncation definition W̃_n = α_n^{-1} ∧ W (cutoff-def here) and the
//! truncation-error estimate ‖W − W̃_n‖ = O(h^{dγ(d/2λ−1)}) (cutoff-error
//! here). Docs and identifiers in this crate use the -def/-error names.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridPartition;
use crate::quad::{integrate_box, QuadratureSpec};
use crate::rng::CounterRng;
use crate::util::mean_and_stderr;

/// Declared boundedness/structure metadata of a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphonKind {
    /// |W| ≤ sup everywhere.
    Bounded { sup: f64 },
    /// W(x,y) = |x−y|^{-λ} style singularity with 0 < λ < d/2.
    Singular { exponent: f64 },
    /// {0,1}-valued band kernel of the given radius.
    Band { radius: f64, periodic: bool },
}

/// Difference kernels g(y−x) in d = 1 with exact box integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
enum DiffKernel {
    Band { radius: f64, periodic: bool },
    PowerLaw { lambda: f64, cap: Option<f64> },
}

impl DiffKernel {
    fn eval(&self, t: f64) -> f64 {
        let a = t.abs();
        match *self {
            DiffKernel::Band { radius, periodic } => {
                let dist = if periodic { a.min(1.0 - a) } else { a };
                if dist <= radius {
                    1.0
                } else {
                    0.0
                }
            }
            DiffKernel::PowerLaw { lambda, cap } => {
                let v = a.powf(-lambda);
                match cap {
                    Some(c) => v.min(c),
                    None => v,
                }
            }
        }
    }

    /// Second antiderivative Φ of g with Φ(0) = Φ'(0) = 0; g even makes
    /// Φ even, which the box formula below relies on.
    fn second_antiderivative(&self, t: f64) -> f64 {
        let a = t.abs();
        match *self {
            DiffKernel::Band { radius: r, periodic } => {
                if a <= r {
                    0.5 * a * a
                } else if !periodic || a <= 1.0 - r {
                    0.5 * r * r + r * (a - r)
                } else {
                    let s = a - (1.0 - r);
                    0.5 * r * r + r * (1.0 - 2.0 * r) + r * s + 0.5 * s * s
                }
            }
            DiffKernel::PowerLaw { lambda, cap } => {
                let free = |a: f64| a.powf(2.0 - lambda) / ((1.0 - lambda) * (2.0 - lambda));
                match cap {
                    None => free(a),
                    Some(c) => {
                        let u = c.powf(-1.0 / lambda);
                        if a <= u {
                            0.5 * c * a * a
                        } else {
                            let g1_u = c * u;
                            0.5 * c * u * u
                                + g1_u * (a - u)
                                + (a.powf(2.0 - lambda) - u.powf(2.0 - lambda))
                                    / ((1.0 - lambda) * (2.0 - lambda))
                                - u.powf(1.0 - lambda) * (a - u) / (1.0 - lambda)
                        }
                    }
                }
            }
        }
    }

    /// Exact ∫_{[a1,b1]×[a2,b2]} g(y−x) dy dx.
    fn box_integral(&self, a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
        let phi = |t: f64| self.second_antiderivative(t);
        phi(b2 - a1) - phi(a2 - a1) - phi(b2 - b1) + phi(a2 - b1)
    }
}

#[derive(Clone)]
enum Evaluator {
    Constant(f64),
    Diff1d(DiffKernel),
    /// |x−y|^{-λ} in d ≥ 2 (Euclidean norm).
    PowerLawNd { lambda: f64 },
    PiecewiseConstant {
        partition: GridPartition,
        values: Arc<Vec<f64>>,
    },
    Expr(Arc<expr::Expr>),
    Custom(Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>),
    PositivePart(Box<Evaluator>),
    NegativePart(Box<Evaluator>),
    Truncated {
        inner: Box<Evaluator>,
        cap: f64,
    },
}

impl Evaluator {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Evaluator::Constant(c) => *c,
            Evaluator::Diff1d(k) => k.eval(y[0] - x[0]),
            Evaluator::PowerLawNd { lambda } => {
                let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                r2.sqrt().powf(-lambda)
            }
            Evaluator::PiecewiseConstant { partition, values } => {
                let n = partition.cells_per_axis();
                let nd = partition.cell_count();
                let mut i = 0usize;
                let mut j = 0usize;
                let mut stride = 1usize;
                for k in 0..partition.dim() {
                    let ci = ((x[k].clamp(0.0, 1.0) * n as f64).floor() as usize).min(n - 1);
                    let cj = ((y[k].clamp(0.0, 1.0) * n as f64).floor() as usize).min(n - 1);
                    i += ci * stride;
                    j += cj * stride;
                    stride *= n;
                }
                values[i * nd + j]
            }
            Evaluator::Expr(e) => e.eval(x[0], y[0]),
            Evaluator::Custom(f) => f(x, y),
            Evaluator::PositivePart(inner) => inner.eval(x, y).max(0.0),
            Evaluator::NegativePart(inner) => (-inner.eval(x, y)).max(0.0),
            Evaluator::Truncated { inner, cap } => inner.eval(x, y).min(*cap),
        }
    }

    /// True when the evaluator is nonnegative by construction.
    fn known_nonnegative(&self) -> bool {
        match self {
            Evaluator::Constant(c) => *c >= 0.0,
            Evaluator::Diff1d(_) | Evaluator::PowerLawNd { .. } => true,
            Evaluator::PiecewiseConstant { values, .. } => values.iter().all(|&v| v >= 0.0),
            Evaluator::PositivePart(_) | Evaluator::NegativePart(_) => true,
            Evaluator::Truncated { inner, .. } => inner.known_nonnegative(),
            Evaluator::Expr(_) | Evaluator::Custom(_) => false,
        }
    }

    /// Exact ∫ over a cell-pair box, when the family admits one.
    fn exact_pair_integral(
        &self,
        lo_x: &[f64],
        hi_x: &[f64],
        lo_y: &[f64],
        hi_y: &[f64],
    ) -> Option<f64> {
        match self {
            Evaluator::Constant(c) => {
                let vx: f64 = lo_x.iter().zip(hi_x).map(|(a, b)| b - a).product();
                let vy: f64 = lo_y.iter().zip(hi_y).map(|(a, b)| b - a).product();
                Some(c * vx * vy)
            }
            Evaluator::Diff1d(k) => Some(k.box_integral(lo_x[0], hi_x[0], lo_y[0], hi_y[0])),
            Evaluator::PiecewiseConstant { partition, values } => {
                let n = partition.cells_per_axis();
                let nd = partition.cell_count();
                let blocks = |blo: &[f64], bhi: &[f64]| -> Vec<(usize, f64)> {
                    let d = partition.dim();
                    let mut acc = vec![(0usize, 1.0f64)];
                    for k in 0..d {
                        let a = ((blo[k] * n as f64).floor() as isize).clamp(0, n as isize - 1)
                            as usize;
                        let b = ((bhi[k] * n as f64).ceil() as isize - 1).clamp(0, n as isize - 1)
                            as usize;
                        let mut next = Vec::new();
                        for &(base, m) in &acc {
                            for c in a..=b {
                                let clo = c as f64 / n as f64;
                                let chi = (c + 1) as f64 / n as f64;
                                let ov = (bhi[k].min(chi) - blo[k].max(clo)).max(0.0);
                                if ov > 0.0 {
                                    next.push((base + c * n.pow(k as u32), m * ov));
                                }
                            }
                        }
                        acc = next;
                    }
                    acc
                };
                let xs = blocks(lo_x, hi_x);
                let ys = blocks(lo_y, hi_y);
                let mut total = 0.0;
                for &(i, mi) in &xs {
                    for &(j, mj) in &ys {
                        total += values[i * nd + j] * mi * mj;
                    }
                }
                Some(total)
            }
            _ => None,
        }
    }
}

/// A kernel W on Q² with metadata enabling exact or adaptive averaging.
#[derive(Clone)]
pub struct Graphon {
    dim: usize,
    kind: GraphonKind,
    eval: Evaluator,
    row_bound: Option<f64>,
}

impl Graphon {
    /// W ≡ c.
    pub fn constant(dim: usize, c: f64) -> Self {
        Graphon {
            dim,
            kind: GraphonKind::Bounded { sup: c.abs() },
            eval: Evaluator::Constant(c),
            row_bound: Some(c.abs()),
        }
    }

    /// Band kernel K(y−x) with K the indicator of {|t| ≤ radius},
    /// optionally extended 1-periodically (d = 1).
    pub fn band(radius: f64, periodic: bool) -> Result<Self> {
        if radius < 0.0 || (periodic && radius >= 0.5) {
            return Err(Error::Domain(format!(
                "band radius must be in [0, 0.5) for periodic kernels, got {radius}"
            )));
        }
        let row = if periodic {
            2.0 * radius
        } else {
            (2.0 * radius).min(1.0)
        };
        Ok(Graphon {
            dim: 1,
            kind: GraphonKind::Band { radius, periodic },
            eval: Evaluator::Diff1d(DiffKernel::Band { radius, periodic }),
            row_bound: Some(row),
        })
    }

    /// Singular kernel |x−y|^{-λ} with 0 < λ < d/2 (square integrability).
    pub fn singular(dim: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < dim as f64 / 2.0) {
            return Err(Error::Domain(format!(
                "singular exponent must satisfy 0 < λ < d/2, got λ={lambda}, d={dim}"
            )));
        }
        let eval = if dim == 1 {
            Evaluator::Diff1d(DiffKernel::PowerLaw { lambda, cap: None })
        } else {
            Evaluator::PowerLawNd { lambda }
        };
        let row_bound = if dim == 1 {
            // max_x ∫_0^1 |x−y|^{-λ} dy is attained at x = 1/2
            Some(2f64.powf(lambda) / (1.0 - lambda))
        } else {
            None
        };
        Ok(Graphon {
            dim,
            kind: GraphonKind::Singular { exponent: lambda },
            eval,
            row_bound,
        })
    }

    /// Kernel from a user-supplied closure with declared metadata.
    pub fn custom(
        dim: usize,
        kind: GraphonKind,
        f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Graphon {
            dim,
            kind,
            eval: Evaluator::Custom(Arc::new(f)),
            row_bound: None,
        }
    }

    /// Kernel from an expression over `x`, `y` (d = 1); see [`expr`] for
    /// the grammar. `sup_bound` declares boundedness: kernels with
    /// sup ≤ 1 get plain cell averages, everything else is truncated.
    pub fn from_expression(src: &str, sup_bound: Option<f64>) -> Result<Self> {
        let parsed = expr::parse(src)?;
        Ok(Graphon {
            dim: 1,
            kind: GraphonKind::Bounded {
                sup: sup_bound.unwrap_or(f64::INFINITY),
            },
            eval: Evaluator::Expr(Arc::new(parsed)),
            row_bound: None,
        })
    }

    /// The step-function kernel taking the matrix entry values on the
    /// cell pairs of its partition.
    pub fn piecewise_constant(cells: &CellKernelMatrix) -> Self {
        let sup = cells
            .entries
            .iter()
            .cloned()
            .fold(0.0f64, |a, b| a.max(b.abs()));
        Graphon {
            dim: cells.partition.dim(),
            kind: GraphonKind::Bounded { sup },
            eval: Evaluator::PiecewiseConstant {
                partition: cells.partition,
                values: Arc::new(cells.entries.clone()),
            },
            row_bound: None,
        }
    }

    pub fn with_row_bound(mut self, w1: f64) -> Self {
        self.row_bound = Some(w1);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> GraphonKind {
        self.kind
    }

    /// Declared ess-sup of the row integrals ∫ |W(x,y)| dy, when known.
    pub fn row_bound(&self) -> Option<f64> {
        self.row_bound
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        self.eval.eval(x, y)
    }

    /// Monte Carlo estimate of the row integral ∫ |W(x,y)| dy at fixed x.
    /// Returns (mean, standard error).
    pub fn mc_row_integral(&self, x: &[f64], samples: usize, seed: u64) -> (f64, f64) {
        let rng = CounterRng::new(seed);
        let d = self.dim;
        let vals: Vec<f64> = (0..samples)
            .map(|s| {
                let y: Vec<f64> = (0..d).map(|k| rng.uniform((s * d + k) as u64)).collect();
                self.eval(x, &y).abs()
            })
            .collect();
        mean_and_stderr(&vals)
    }

    /// Probe a fixed lattice for negative values; enforces the
    /// nonnegativity precondition of truncation for black-box kernels.
    fn probe_negative(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.eval.known_nonnegative() {
            return None;
        }
        let d = self.dim;
        let per_axis = if d == 1 { 64usize } else { 8 };
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        let total = per_axis.pow(2 * d as u32);
        for flat in 0..total {
            let mut r = flat;
            for k in 0..d {
                x[k] = ((r % per_axis) as f64 + 0.5) / per_axis as f64;
                r /= per_axis;
            }
            for k in 0..d {
                y[k] = ((r % per_axis) as f64 + 0.5) / per_axis as f64;
                r /= per_axis;
            }
            if self.eval(&x, &y) < 0.0 {
                return Some((x, y));
            }
        }
        None
    }
}

impl std::fmt::Debug for Graphon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Graphon(d={}, kind={:?})", self.dim, self.kind)
    }
}

/// Split W = W⁺ − W⁻ into nonnegative positive and negative parts.
pub fn split_sign(w: &Graphon) -> (Graphon, Graphon) {
    if w.eval.known_nonnegative() {
        return (w.clone(), Graphon::constant(w.dim, 0.0));
    }
    if let Evaluator::Constant(c) = w.eval {
        return (
            Graphon::constant(w.dim, c.max(0.0)),
            Graphon::constant(w.dim, (-c).max(0.0)),
        );
    }
    let plus = Graphon {
        dim: w.dim,
        kind: w.kind,
        eval: Evaluator::PositivePart(Box::new(w.eval.clone())),
        row_bound: w.row_bound,
    };
    let minus = Graphon {
        dim: w.dim,
        kind: w.kind,
        eval: Evaluator::NegativePart(Box::new(w.eval.clone())),
        row_bound: w.row_bound,
    };
    (plus, minus)
}

/// Pointwise truncation min(W, α_n^{-1}); the result is declared bounded
/// by the cap. Requires a nonnegative kernel — split first.
pub fn truncate(w: &Graphon, alpha: f64) -> Result<Graphon> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "sparsity factor alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if let Some((x, y)) = w.probe_negative() {
        return Err(Error::Domain(format!(
            "kernel takes a negative value at ({x:?}, {y:?}); split into positive and negative parts first"
        )));
    }
    let cap = 1.0 / alpha;
    let eval = match &w.eval {
        Evaluator::Constant(c) => Evaluator::Constant(c.min(cap)),
        // band values are 0/1 and cap >= 1, so truncation is a no-op
        Evaluator::Diff1d(DiffKernel::Band { radius, periodic }) => {
            Evaluator::Diff1d(DiffKernel::Band {
                radius: *radius,
                periodic: *periodic,
            })
        }
        Evaluator::Diff1d(DiffKernel::PowerLaw { lambda, cap: old }) => {
            let new_cap = old.map_or(cap, |c| c.min(cap));
            Evaluator::Diff1d(DiffKernel::PowerLaw {
                lambda: *lambda,
                cap: Some(new_cap),
            })
        }
        Evaluator::PiecewiseConstant { partition, values } => Evaluator::PiecewiseConstant {
            partition: *partition,
            values: Arc::new(values.iter().map(|v| v.min(cap)).collect()),
        },
        other => Evaluator::Truncated {
            inner: Box::new(other.clone()),
            cap,
        },
    };
    Ok(Graphon {
        dim: w.dim,
        kind: GraphonKind::Bounded { sup: cap },
        eval,
        row_bound: w.row_bound,
    })
}

/// Sparsity schedule α_n = n^{-dγ} with γ ∈ [0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsitySchedule {
    gamma: f64,
}

impl SparsitySchedule {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Domain(format!(
                "sparsity exponent gamma must lie in [0, 1), got {gamma}"
            )));
        }
        Ok(SparsitySchedule { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// α_n = n^{-dγ} = (n^d)^{-γ}.
    pub fn alpha(&self, partition: &GridPartition) -> f64 {
        partition.cell_count_f().powf(-self.gamma)
    }
}

/// Dense matrix of (possibly truncated) kernel cell averages
/// W_{n,īj̄} = n^{2d} ∫ over the cell pair.
#[derive(Debug, Clone)]
pub struct CellKernelMatrix {
    partition: GridPartition,
    entries: Vec<f64>,
    truncated_at: Option<f64>,
    clamp_events: usize,
}

impl CellKernelMatrix {
    pub fn partition(&self) -> &GridPartition {
        &self.partition
    }

    pub fn node_count(&self) -> usize {
        self.partition.cell_count()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.node_count() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.node_count();
        &self.entries[i * n..(i + 1) * n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// The cap α_n^{-1} when case-II truncation was applied.
    pub fn truncated_at(&self) -> Option<f64> {
        self.truncated_at
    }

    /// Number of entries clamped so that α_n · entry ∈ [0,1]; nonzero
    /// only when a declared bound was violated by actual kernel values.
    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().cloned().fold(0.0, f64::max)
    }
}

/// Build the cell-average matrix of a nonnegative kernel.
///
/// Case I (declared bounded, sup ≤ 1): plain cell averages. Case II
/// (everything else): pointwise truncation at α_n^{-1} before averaging.
/// Entries are finally clamped so that α_n · entry ∈ [0, 1], counting
/// clamp events.
pub fn cell_matrix(
    w: &Graphon,
    partition: &GridPartition,
    schedule: &SparsitySchedule,
) -> Result<CellKernelMatrix> {
    cell_matrix_with(w, partition, schedule, QuadratureSpec::default())
}

pub fn cell_matrix_with(
    w: &Graphon,
    partition: &GridPartition,
    schedule: &SparsitySchedule,
    quad: QuadratureSpec,
) -> Result<CellKernelMatrix> {
    if w.dim() != partition.dim() {
        return Err(Error::UnsupportedDimension {
            expected: partition.dim(),
            got: w.dim(),
        });
    }
    let alpha = schedule.alpha(partition);
    let case_one = match w.kind {
        GraphonKind::Bounded { sup } => sup <= 1.0 + 1e-12,
        GraphonKind::Band { .. } => true,
        GraphonKind::Singular { .. } => false,
    };
    let (weff, truncated_at) = if case_one {
        (w.clone(), None)
    } else {
        (truncate(w, alpha)?, Some(1.0 / alpha))
    };

    let nd = partition.cell_count();
    let nd_f = partition.cell_count_f();
    let scale = nd_f * nd_f; // n^{2d}
    let dim = partition.dim();
    let mut entries: Vec<f64> = (0..nd * nd)
        .into_par_iter()
        .map(|flat| {
            let i = flat / nd;
            let j = flat % nd;
            let (lo_x, hi_x) = partition.cell_bounds(i);
            let (lo_y, hi_y) = partition.cell_bounds(j);
            let integral = match weff.eval.exact_pair_integral(&lo_x, &hi_x, &lo_y, &hi_y) {
                Some(v) => v,
                None => {
                    let lo: Vec<f64> = lo_x.iter().chain(&lo_y).cloned().collect();
                    let hi: Vec<f64> = hi_x.iter().chain(&hi_y).cloned().collect();
                    let f = |z: &[f64]| weff.eval(&z[..dim], &z[dim..]);
                    integrate_box(&f, &lo, &hi, quad).map_err(|e| match e {
                        Error::ToleranceNotMet {
                            estimate, rel_tol, ..
                        } => Error::ToleranceNotMet {
                            estimate,
                            rel_tol,
                            context: format!(" at cell pair ({i}, {j})"),
                        },
                        other => other,
                    })?
                }
            };
            Ok(integral * scale)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut clamp_events = 0;
    // largest entry whose sampling probability stays <= 1 exactly
    let mut cap = 1.0 / alpha;
    while cap * alpha > 1.0 {
        cap = f64::from_bits(cap.to_bits() - 1);
    }
    for e in &mut entries {
        if *e * alpha > 1.0 {
            // round-off slop is snapped silently; genuine violations of a
            // declared bound are counted
            if *e * alpha > 1.0 + 1e-9 {
                clamp_events += 1;
            }
            *e = cap;
        } else if *e < 0.0 {
            // tiny negatives from quadrature round-off
            *e = 0.0;
        }
    }

    Ok(CellKernelMatrix {
        partition: *partition,
        entries,
        truncated_at,
        clamp_events,
    })
}

/// γ maximizing the singular-kernel approximation rate: 2λ / (d(d+2)).
pub fn optimal_gamma_singular(lambda: f64, d: usize) -> Result<f64> {
    if !(lambda > 0.0 && lambda < d as f64 / 2.0) {
        return Err(Error::Domain(format!(
            "singular exponent must satisfy 0 < λ < d/2, got λ={lambda}, d={d}"
        )));
    }
    Ok(2.0 * lambda / (d as f64 * (d as f64 + 2.0)))
}

/// The three error exponents of the sparse scheme for W = |x−y|^{-λ}:
/// truncation, projection of the truncated kernel, and Monte Carlo. The
/// predicted overall rate is their minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularExponents {
    pub truncation: f64,
    pub projection: f64,
    pub monte_carlo: f64,
}

impl SingularExponents {
    pub fn min(&self) -> f64 {
        self.truncation.min(self.projection).min(self.monte_carlo)
    }
}

pub fn singular_error_exponents(lambda: f64, d: usize, gamma: f64) -> Result<SingularExponents> {
    if !(lambda > 0.0 && lambda < d as f64 / 2.0) {
        return Err(Error::Domain(format!(
            "singular exponent must satisfy 0 < λ < d/2, got λ={lambda}, d={d}"
        )));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Domain(format!(
            "gamma must lie in [0, 1), got {gamma}"
        )));
    }
    let df = d as f64;
    Ok(SingularExponents {
        truncation: df * gamma * (df / (2.0 * lambda) - 1.0),
        projection: 1.0 - df * gamma * (1.0 + 1.0 / lambda),
        monte_carlo: df * (1.0 - gamma) / 2.0,
    })
}

/// Arithmetic expressions over the kernel arguments, for user-configured
/// kernels.
///
/// Grammar: `+ - * / ^` with the usual precedence (`^` binds tightest,
/// right-associative), unary minus, parentheses, float literals, the
/// constant `pi`, the variables `x` and `y`, and the functions `abs`,
/// `sin`, `cos`, `exp`, `sqrt`, `min(a,b)`, `max(a,b)`. The distance
/// |x−y| is written `abs(x-y)`.
pub mod expr {
    use crate::error::{Error, Result};

    #[derive(Debug, Clone, PartialEq)]
    pub enum Expr {
        Num(f64),
        X,
        Y,
        Add(Box<Expr>, Box<Expr>),
        Sub(Box<Expr>, Box<Expr>),
        Mul(Box<Expr>, Box<Expr>),
        Div(Box<Expr>, Box<Expr>),
        Pow(Box<Expr>, Box<Expr>),
        Neg(Box<Expr>),
        Call(Func, Vec<Expr>),
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Func {
        Abs,
        Sin,
        Cos,
        Exp,
        Sqrt,
        Min,
        Max,
    }

    impl Expr {
        pub fn eval(&self, x: f64, y: f64) -> f64 {
            match self {
                Expr::Num(v) => *v,
                Expr::X => x,
                Expr::Y => y,
                Expr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
                Expr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
                Expr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
                Expr::Div(a, b) => a.eval(x, y) / b.eval(x, y),
                Expr::Pow(a, b) => a.eval(x, y).powf(b.eval(x, y)),
                Expr::Neg(a) => -a.eval(x, y),
                Expr::Call(f, args) => {
                    let a = args[0].eval(x, y);
                    match f {
                        Func::Abs => a.abs(),
                        Func::Sin => a.sin(),
                        Func::Cos => a.cos(),
                        Func::Exp => a.exp(),
                        Func::Sqrt => a.sqrt(),
                        Func::Min => a.min(args[1].eval(x, y)),
                        Func::Max => a.max(args[1].eval(x, y)),
                    }
                }
            }
        }
    }

    #[derive(Debug, Clone, PartialEq)]
    enum Token {
        Num(f64),
        Ident(String),
        Plus,
        Minus,
        Star,
        Slash,
        Caret,
        LParen,
        RParen,
        Comma,
    }

    fn lex(src: &str) -> Result<Vec<Token>> {
        let mut tokens = Vec::new();
        let chars: Vec<char> = src.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            match c {
                ' ' | '\t' | '\n' | '\r' => i += 1,
                '+' => {
                    tokens.push(Token::Plus);
                    i += 1;
                }
                '-' => {
                    tokens.push(Token::Minus);
                    i += 1;
                }
                '*' => {
                    tokens.push(Token::Star);
                    i += 1;
                }
                '/' => {
                    tokens.push(Token::Slash);
                    i += 1;
                }
                '^' => {
                    tokens.push(Token::Caret);
                    i += 1;
                }
                '(' => {
                    tokens.push(Token::LParen);
                    i += 1;
                }
                ')' => {
                    tokens.push(Token::RParen);
                    i += 1;
                }
                ',' => {
                    tokens.push(Token::Comma);
                    i += 1;
                }
                '0'..='9' | '.' => {
                    let start = i;
                    while i < chars.len()
                        && (chars[i].is_ascii_digit()
                            || chars[i] == '.'
                            || chars[i] == 'e'
                            || chars[i] == 'E'
                            || ((chars[i] == '+' || chars[i] == '-')
                                && i > start
                                && (chars[i - 1] == 'e' || chars[i - 1] == 'E')))
                    {
                        i += 1;
                    }
                    let text: String = chars[start..i].iter().collect();
                    let v = text.parse::<f64>().map_err(|_| {
                        Error::Domain(format!("bad numeric literal '{text}' at offset {start}"))
                    })?;
                    tokens.push(Token::Num(v));
                }
                'a'..='z' | 'A'..='Z' | '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                    {
                        i += 1;
                    }
                    tokens.push(Token::Ident(chars[start..i].iter().collect()));
                }
                other => {
                    return Err(Error::Domain(format!(
                        "unexpected character '{other}' at offset {i} in kernel expression"
                    )))
                }
            }
        }
        Ok(tokens)
    }

    struct Parser {
        tokens: Vec<Token>,
        pos: usize,
    }

    impl Parser {
        fn peek(&self) -> Option<&Token> {
            self.tokens.get(self.pos)
        }

        fn next(&mut self) -> Option<Token> {
            let t = self.tokens.get(self.pos).cloned();
            if t.is_some() {
                self.pos += 1;
            }
            t
        }

        fn expect(&mut self, t: &Token) -> Result<()> {
            match self.next() {
                Some(ref got) if got == t => Ok(()),
                got => Err(Error::Domain(format!(
                    "expected {t:?}, found {got:?} at token {}",
                    self.pos
                ))),
            }
        }

        fn expr(&mut self) -> Result<Expr> {
            let mut lhs = self.term()?;
            while let Some(op) = self.peek().cloned() {
                match op {
                    Token::Plus => {
                        self.next();
                        lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                    }
                    Token::Minus => {
                        self.next();
                        lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                    }
                    _ => break,
                }
            }
            Ok(lhs)
        }

        fn term(&mut self) -> Result<Expr> {
            let mut lhs = self.factor()?;
            while let Some(op) = self.peek().cloned() {
                match op {
                    Token::Star => {
                        self.next();
                        lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                    }
                    Token::Slash => {
                        self.next();
                        lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                    }
                    _ => break,
                }
            }
            Ok(lhs)
        }

        fn factor(&mut self) -> Result<Expr> {
            if let Some(Token::Minus) = self.peek() {
                self.next();
                return Ok(Expr::Neg(Box::new(self.factor()?)));
            }
            self.power()
        }

        fn power(&mut self) -> Result<Expr> {
            let base = self.atom()?;
            if let Some(Token::Caret) = self.peek() {
                self.next();
                let exp = self.factor()?; // right-associative
                return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
            }
            Ok(base)
        }

        fn atom(&mut self) -> Result<Expr> {
            match self.next() {
                Some(Token::Num(v)) => Ok(Expr::Num(v)),
                Some(Token::LParen) => {
                    let inner = self.expr()?;
                    self.expect(&Token::RParen)?;
                    Ok(inner)
                }
                Some(Token::Ident(name)) => match name.as_str() {
                    "x" => Ok(Expr::X),
                    "y" => Ok(Expr::Y),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    other => {
                        let func = match other {
                            "abs" => Func::Abs,
                            "sin" => Func::Sin,
                            "cos" => Func::Cos,
                            "exp" => Func::Exp,
                            "sqrt" => Func::Sqrt,
                            "min" => Func::Min,
                            "max" => Func::Max,
                            _ => {
                                return Err(Error::Domain(format!(
                                    "unknown identifier '{other}' in kernel expression"
                                )))
                            }
                        };
                        self.expect(&Token::LParen)?;
                        let mut args = vec![self.expr()?];
                        while let Some(Token::Comma) = self.peek() {
                            self.next();
                            args.push(self.expr()?);
                        }
                        self.expect(&Token::RParen)?;
                        let arity = if matches!(func, Func::Min | Func::Max) {
                            2
                        } else {
                            1
                        };
                        if args.len() != arity {
                            return Err(Error::Domain(format!(
                                "function '{other}' takes {arity} argument(s), got {}",
                                args.len()
                            )));
                        }
                        Ok(Expr::Call(func, args))
                    }
                },
                got => Err(Error::Domain(format!(
                    "unexpected token {got:?} in kernel expression"
                ))),
            }
        }
    }

    /// Parse an expression; errors carry the offending token or offset.
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut parser = Parser { tokens, pos: 0 };
        let e = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Domain(format!(
                "trailing tokens after expression at token {}",
                parser.pos
            )));
        }
        Ok(e)
    }

    #[cfg(test)]
    mod tests {
        use super::*;

        #[test]
        fn parses_arithmetic_with_precedence() {
            let e = parse("1 + 2 * x ^ 2").unwrap();
            assert!((e.eval(3.0, 0.0) - 19.0).abs() < 1e-15);
            let e = parse("-x^2").unwrap();
            assert!((e.eval(2.0, 0.0) + 4.0).abs() < 1e-15);
        }

        #[test]
        fn distance_idiom() {
            let e = parse("abs(x - y) ^ -0.25").unwrap();
            assert!((e.eval(0.5, 0.25) - 0.25f64.powf(-0.25)).abs() < 1e-15);
        }

        #[test]
        fn functions_and_constants() {
            let e = parse("cos(2 * pi * (x - y))").unwrap();
            assert!((e.eval(0.0, 0.5) + 1.0).abs() < 1e-12);
            let e = parse("min(x, y) + max(x, y)").unwrap();
            assert!((e.eval(0.3, 0.8) - 1.1).abs() < 1e-15);
        }

        #[test]
        fn rejects_malformed_expressions() {
            assert!(parse("x +").is_err());
            assert!(parse("frob(x)").is_err());
            assert!(parse("x ) y").is_err());
            assert!(parse("min(x)").is_err());
            assert!(parse("1..2").is_err());
        }
    }
}
