//! CSV and manifest emission.
//!
//! Numeric cells use 17 significant digits ('.' decimal separator, no
//! locale), so files round-trip f64 exactly and identical runs produce
//! byte-identical output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use nonlocal_mc::dynamics::Trajectory;
use nonlocal_mc::experiments::{GapReport, ProjectionReport, RateReport, SingularReport};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, String> {
    let file = std::fs::File::create(path)
        .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
    Ok(std::io::BufWriter::new(file))
}

fn finish(mut out: std::io::BufWriter<std::fs::File>, path: &Path) -> Result<(), String> {
    out.flush()
        .map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// rates.csv: one row per (gamma, n); alpha_gamma and theory_rate repeat
/// across a gamma's rows.
pub fn write_rates_csv(path: &Path, report: &RateReport) -> Result<(), String> {
    let mut out = create(path)?;
    let mut write = || -> std::io::Result<()> {
        writeln!(
            out,
            "gamma,n,trials,mean_error,stderr,alpha_gamma,theory_rate"
        )?;
        for cell in &report.cells {
            let rate = report
                .rates
                .iter()
                .find(|r| r.gamma == cell.gamma)
                .expect("every cell's gamma has a fitted rate");
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_f64(cell.gamma),
                cell.n,
                cell.trials,
                fmt_f64(cell.mean_error),
                fmt_f64(cell.std_error),
                fmt_f64(rate.alpha),
                fmt_f64(rate.theory),
            )?;
        }
        Ok(())
    };
    write().map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    finish(out, path)
}

/// errors.csv: one row per trial.
pub fn write_errors_csv(path: &Path, report: &RateReport) -> Result<(), String> {
    let mut out = create(path)?;
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "gamma,n,trial,seed,sup_error,final_error,diverged")?;
        for r in &report.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_f64(r.gamma),
                r.n,
                r.trial,
                r.seed,
                fmt_f64(r.sup_error),
                fmt_f64(r.final_error),
                r.diverged as u8,
            )?;
        }
        Ok(())
    };
    write().map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    finish(out, path)
}

pub fn write_gap_csv(path: &Path, report: &GapReport) -> Result<(), String> {
    let mut out = create(path)?;
    let mut write = || -> std::io::Result<()> {
        writeln!(
            out,
            "gamma,n,seeds,mean_gap,stderr,fitted_exponent,theory_exponent"
        )?;
        for row in &report.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_f64(report.gamma),
                row.n,
                row.seeds,
                fmt_f64(row.mean_gap),
                fmt_f64(row.std_error),
                fmt_f64(report.fitted_exponent),
                fmt_f64(report.theory_exponent),
            )?;
        }
        Ok(())
    };
    write().map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    finish(out, path)
}

pub fn write_projection_csv(path: &Path, report: &ProjectionReport) -> Result<(), String> {
    let mut out = create(path)?;
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "function,n,p,error,fitted_slope,predicted_exponent")?;
        for row in &report.rows {
            let slope = report
                .slopes
                .iter()
                .find(|s| s.label == row.label)
                .expect("every row's function has a slope");
            writeln!(
                out,
                "{},{},{},{},{},{}",
                row.label,
                row.n,
                fmt_f64(report.p),
                fmt_f64(row.error),
                fmt_f64(slope.fitted),
                fmt_f64(slope.predicted),
            )?;
        }
        Ok(())
    };
    write().map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    finish(out, path)
}

pub fn write_singular_csv(path: &Path, report: &SingularReport) -> Result<(), String> {
    let mut out = create(path)?;
    let mut write = || -> std::io::Result<()> {
        writeln!(
            out,
            "lambda,gamma,optimal_gamma,n,cap,truncation_error,fitted_exponent,theory_truncation,theory_projection,theory_monte_carlo"
        )?;
        for row in &report.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                fmt_f64(report.lambda),
                fmt_f64(report.gamma),
                fmt_f64(report.optimal_gamma),
                row.n,
                fmt_f64(row.cap),
                fmt_f64(row.truncation_error),
                fmt_f64(report.fitted_exponent),
                fmt_f64(report.exponents.truncation),
                fmt_f64(report.exponents.projection),
                fmt_f64(report.exponents.monte_carlo),
            )?;
        }
        Ok(())
    };
    write().map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    finish(out, path)
}

/// trajectory.csv: one row per checkpoint, t then the state components.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), String> {
    let mut out = create(path)?;
    let n = traj.states.first().map_or(0, |s| s.len());
    let mut write = || -> std::io::Result<()> {
        write!(out, "t")?;
        for i in 0..n {
            write!(out, ",u{i}")?;
        }
        writeln!(out)?;
        for (t, state) in traj.times.iter().zip(&traj.states) {
            write!(out, "{}", fmt_f64(*t))?;
            for v in state {
                write!(out, ",{}", fmt_f64(*v))?;
            }
            writeln!(out)?;
        }
        Ok(())
    };
    write().map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    finish(out, path)
}

/// Provenance of one CLI run; written as run_manifest.json next to the
/// data files.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifact_version: String,
    pub wall_secs: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(config_hash: u64, wall_secs: f64, outputs: Vec<PathBuf>) -> Self {
        RunManifest {
            config_hash: format!("{config_hash:016x}"),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_secs,
            outputs: outputs
                .into_iter()
                .map(|p| p.to_string_lossy().into_owned())
                .collect(),
        }
    }

    /// Verify every listed output exists with nonzero size, then write
    /// the manifest itself.
    pub fn verify_and_write(&self, dir: &Path) -> Result<(), String> {
        for name in &self.outputs {
            let p = Path::new(name);
            let meta = std::fs::metadata(p)
                .map_err(|e| format!("missing output {}: {e}", p.display()))?;
            if meta.len() == 0 {
                return Err(format!("output {} is empty", p.display()));
            }
        }
        let path = dir.join("run_manifest.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| format!("cannot serialize manifest: {e}"))?;
        std::fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
    }
}

/// FNV-1a over a canonical parameter string, for subcommands that do not
/// go through an ExperimentConfig.
pub fn fnv_hash(text: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
