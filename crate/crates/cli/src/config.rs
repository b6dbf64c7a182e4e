//! Config file parsing and defaults.
//!
//! The config is flat TOML with one section per subcommand plus a shared
//! `[kernel]` section. Every numeric parameter is explicit; omitted keys
//! fall back to the documented desk-scale profile (or the paper-scale
//! profile under `--paper-scale`).

use std::path::Path;

use serde::Deserialize;

use nonlocal_mc::experiments::{ErrorFunctional, ExperimentConfig, InitialData, KernelSpec};

/// Errors here are config errors by definition (exit code 2).
pub type ConfigResult<T> = Result<T, String>;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub kernel: Option<KernelConfig>,
    pub rate_sweep: Option<TrialSection>,
    pub pixmap: Option<PixmapSection>,
    pub project_study: Option<ProjectSection>,
    pub singular_study: Option<SingularSection>,
    pub gap_study: Option<GapSection>,
    pub solve: Option<SolveSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// constant | band | singular | custom-expression
    pub kind: String,
    pub value: Option<f64>,
    pub r: Option<f64>,
    pub periodic: Option<bool>,
    pub lambda: Option<f64>,
    pub expr: Option<String>,
    pub sup_bound: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialSection {
    pub gammas: Option<Vec<f64>>,
    pub ns: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub q: Option<i64>,
    pub omega: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub checkpoint_interval: Option<f64>,
    /// sup-time | final-time
    pub error: Option<String>,
    /// midpoint | cell-average
    pub initial: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PixmapSection {
    pub n: Option<usize>,
    pub gammas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectSection {
    pub p: Option<f64>,
    pub ns: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingularSection {
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub ns: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSection {
    pub gamma: Option<f64>,
    pub ns: Option<Vec<usize>>,
    pub seeds: Option<usize>,
    pub q: Option<i64>,
    pub omega: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub checkpoint_interval: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    pub n: Option<usize>,
    pub gamma: Option<f64>,
    /// sampled | averaged
    pub coupling: Option<String>,
    pub q: Option<i64>,
    pub omega: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub checkpoint_interval: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> ConfigResult<Self> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
                toml::from_str(&text).map_err(|e| format!("config {}: {e}", p.display()))
            }
        }
    }

    pub fn kernel_spec(&self) -> ConfigResult<KernelSpec> {
        match &self.kernel {
            None => Ok(KernelSpec::Band {
                radius: 0.2,
                periodic: true,
            }),
            Some(k) => match k.kind.as_str() {
                "constant" => Ok(KernelSpec::Constant {
                    value: k
                        .value
                        .or(k.sup_bound)
                        .ok_or("kernel.kind = \"constant\" requires kernel.value")?,
                }),
                "band" => Ok(KernelSpec::Band {
                    radius: k.r.ok_or("kernel.kind = \"band\" requires kernel.r")?,
                    periodic: k.periodic.unwrap_or(true),
                }),
                "singular" => Ok(KernelSpec::Singular {
                    lambda: k
                        .lambda
                        .ok_or("kernel.kind = \"singular\" requires kernel.lambda")?,
                }),
                "custom-expression" => Ok(KernelSpec::Expression {
                    source: k
                        .expr
                        .clone()
                        .ok_or("kernel.kind = \"custom-expression\" requires kernel.expr")?,
                    sup_bound: k.sup_bound,
                }),
                other => Err(format!(
                    "kernel.kind must be one of constant | band | singular | custom-expression, got \"{other}\""
                )),
            },
        }
    }

    /// Resolve the experiment parameters for rate sweeps (and, with a
    /// section override, the gap study and solve).
    pub fn experiment(
        &self,
        paper_scale: bool,
        seed_override: Option<u64>,
    ) -> ConfigResult<ExperimentConfig> {
        let base = if paper_scale {
            ExperimentConfig::paper_scale()
        } else {
            ExperimentConfig::desk_scale()
        };
        let section = self.rate_sweep.clone().unwrap_or_default();
        let mut cfg = ExperimentConfig {
            kernel: self.kernel_spec()?,
            ..base
        };
        if let Some(g) = section.gammas {
            if g.is_empty() {
                return Err("rate_sweep.gammas must not be empty".into());
            }
            cfg.gammas = g;
        }
        if let Some(ns) = section.ns {
            if ns.is_empty() {
                return Err("rate_sweep.ns must not be empty".into());
            }
            cfg.ns = ns;
        }
        if let Some(v) = section.trials {
            cfg.trials = v;
        }
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
        if let Some(e) = section.error {
            cfg.error_functional = parse_error_functional(&e)?;
        }
        if let Some(i) = section.initial {
            cfg.initial_data = parse_initial_data(&i)?;
        }
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(s) = seed_override {
            cfg.base_seed = s;
        }
        cfg.validate()
            .map_err(|e| format!("rate_sweep section: {e}"))?;
        Ok(cfg)
    }
}

pub fn parse_error_functional(text: &str) -> ConfigResult<ErrorFunctional> {
    match text {
        "sup-time" => Ok(ErrorFunctional::SupTime),
        "final-time" => Ok(ErrorFunctional::FinalTime),
        other => Err(format!(
            "error functional must be sup-time | final-time, got \"{other}\""
        )),
    }
}

pub fn parse_initial_data(text: &str) -> ConfigResult<InitialData> {
    match text {
        "midpoint" => Ok(InitialData::Midpoint),
        "cell-average" => Ok(InitialData::CellAverage),
        other => Err(format!(
            "initial data must be midpoint | cell-average, got \"{other}\""
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_without_config() {
        let cfg = FileConfig::load(None).unwrap();
        let exp = cfg.experiment(false, None).unwrap();
        assert_eq!(exp.ns, vec![64, 128]);
        assert_eq!(exp.trials, 30);
        assert_eq!(exp.gammas.len(), 5);
    }

    #[test]
    fn section_overrides_and_seed_priority() {
        let parsed: FileConfig = toml::from_str(
            r#"
            seed = 7
            [kernel]
            kind = "band"
            r = 0.3
            [rate_sweep]
            gammas = [0.1, 0.4]
            ns = [16, 32]
            trials = 3
            error = "final-time"
            "#,
        )
        .unwrap();
        let exp = parsed.experiment(false, Some(99)).unwrap();
        assert_eq!(exp.base_seed, 99); // CLI flag wins over file seed
        assert_eq!(exp.gammas, vec![0.1, 0.4]);
        assert_eq!(exp.trials, 3);
        assert_eq!(exp.error_functional, ErrorFunctional::FinalTime);
        assert!(matches!(exp.kernel, KernelSpec::Band { radius, .. } if radius == 0.3));
    }

    #[test]
    fn empty_gamma_list_is_named_in_the_error() {
        let parsed: FileConfig = toml::from_str("[rate_sweep]\ngammas = []\n").unwrap();
        let err = parsed.experiment(false, None).unwrap_err();
        assert!(err.contains("gammas"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[rate_sweep]\nbogus = 1\n").is_err());
    }

    #[test]
    fn kernel_validation_names_the_missing_key() {
        let parsed: FileConfig = toml::from_str("[kernel]\nkind = \"singular\"\n").unwrap();
        let err = parsed.kernel_spec().unwrap_err();
        assert!(err.contains("lambda"), "{err}");
        let parsed: FileConfig = toml::from_str("[kernel]\nkind = \"frobnicate\"\n").unwrap();
        assert!(parsed.kernel_spec().is_err());
    }
}
