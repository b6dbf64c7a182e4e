//! Sparse W-random graph generation.
//!
//! Every ordered node pair (ī, j̄) — the diagonal included — draws an
//! independent Bernoulli with success probability α_n · W_{n,īj̄}. Draws
//! are keyed by (seed, pair rank) through the counter-based generator, so
//! the same seed produces a bit-identical graph regardless of how the
//! rows are scheduled across threads.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphon::{CellKernelMatrix, SparsitySchedule};
use crate::rng::CounterRng;

/// Directed adjacency in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    node_count: usize,
    row_offsets: Vec<usize>,
    column_indices: Vec<u32>,
    alpha: f64,
    gamma: f64,
    seed: u64,
}

impl SparseGraph {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        *self.row_offsets.last().unwrap()
    }

    /// Column indices of the out-edges of node i, strictly increasing.
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.column_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn column_indices(&self) -> &[u32] {
        &self.column_indices
    }

    /// The sparsity factor α_n the edge probabilities were scaled by.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Sample the W-random graph: edge (i, j) present with probability
/// α_n · W_{n,īj̄}, independently per ordered pair, deterministic in the
/// seed.
pub fn sample_graph(
    cells: &CellKernelMatrix,
    schedule: &SparsitySchedule,
    seed: u64,
) -> Result<SparseGraph> {
    let n = cells.node_count();
    if n >= (1usize << 31) {
        return Err(Error::Domain(format!(
            "node count {n} exceeds the 2^31 CSR index limit"
        )));
    }
    let alpha = schedule.alpha(cells.partition());
    let rng = CounterRng::new(seed);

    let rows: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = cells.row(i);
            let base = i as u64 * n as u64;
            let mut out = Vec::new();
            for (j, &w) in row.iter().enumerate() {
                let p = alpha * w;
                if p > 0.0 && rng.uniform(base + j as u64) < p {
                    out.push(j as u32);
                }
            }
            out
        })
        .collect();

    let mut row_offsets = Vec::with_capacity(n + 1);
    row_offsets.push(0);
    let mut total = 0;
    for r in &rows {
        total += r.len();
        row_offsets.push(total);
    }
    let mut column_indices = Vec::with_capacity(total);
    for r in rows {
        column_indices.extend(r);
    }

    Ok(SparseGraph {
        node_count: n,
        row_offsets,
        column_indices,
        alpha,
        gamma: schedule.gamma(),
        seed,
    })
}

/// Out-degree summary of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    pub mean: f64,
    pub min: usize,
    pub max: usize,
    /// histogram[k] = number of nodes with out-degree k.
    pub histogram: Vec<usize>,
}

pub fn degree_stats(g: &SparseGraph) -> DegreeStats {
    let degrees: Vec<usize> = g
        .row_offsets
        .windows(2)
        .map(|w| w[1] - w[0])
        .collect();
    let min = degrees.iter().copied().min().unwrap_or(0);
    let max = degrees.iter().copied().max().unwrap_or(0);
    let mut histogram = vec![0usize; max + 1];
    for &d in &degrees {
        histogram[d] += 1;
    }
    DegreeStats {
        mean: g.edge_count() as f64 / g.node_count() as f64,
        min,
        max,
        histogram,
    }
}

/// Write the adjacency matrix as a binary PGM (P5) image: black pixel for
/// an edge, white for a non-edge, row index = source node.
pub fn adjacency_pixmap(g: &SparseGraph, path: &Path) -> Result<()> {
    let n = g.node_count;
    if n > 4096 {
        return Err(Error::Domain(format!(
            "adjacency pixmap limited to 4096 nodes, got {n}"
        )));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write!(out, "P5\n{n} {n}\n255\n").map_err(|e| Error::io(path, e))?;
    let mut row = vec![255u8; n];
    for i in 0..n {
        row.fill(255);
        for &j in g.neighbors(i) {
            row[j as usize] = 0;
        }
        out.write_all(&row).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Write the edge list as text, one "src dst" pair per line, sorted.
pub fn write_edge_list(g: &SparseGraph, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for i in 0..g.node_count {
        for &j in g.neighbors(i) {
            writeln!(out, "{i} {j}").map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}
