//! Run configuration: defaults, then the `--config` file, then flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 42;

/// Sample grid over a provider's domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub nt: usize,
}

/// Parameters of the warped flow written by `evolve-warped`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WarpedParams {
    pub n: usize,
    pub length: f64,
    pub cells: usize,
    pub t_span: f64,
    pub eps: f64,
    pub delta: f64,
}

impl Default for WarpedParams {
    fn default() -> Self {
        WarpedParams { n: 3, length: std::f64::consts::PI, cells: 64, t_span: 0.04, eps: -0.2, delta: 0.1 }
    }
}

/// Contents of a `--config` file (TOML). Every key is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub dims: Option<Vec<usize>>,
    pub samples: Option<usize>,
    pub provider: Option<String>,
    pub mode: Option<String>,
    pub soliton_mode: Option<String>,
    pub t: Option<f64>,
    pub grid: Option<GridSpec>,
    pub out: Option<PathBuf>,
    pub warped: Option<WarpedParams>,
    #[serde(default)]
    pub tol: BTreeMap<String, f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// Values given on the command line; they take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct FlagConfig {
    pub seed: Option<u64>,
    pub dims: Vec<usize>,
    pub samples: Option<usize>,
    pub provider: Option<String>,
    pub mode: Option<String>,
    pub soliton_mode: Option<String>,
    pub t: Option<f64>,
    pub out: Option<PathBuf>,
    pub tol: Vec<String>,
}

/// Fully resolved configuration, echoed into every report.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub dims: Vec<usize>,
    pub samples: Option<usize>,
    pub provider: Option<String>,
    pub mode: Option<String>,
    pub soliton_mode: Option<String>,
    pub t: Option<f64>,
    pub grid: Option<GridSpec>,
    pub out: Option<PathBuf>,
    pub warped: Option<WarpedParams>,
    /// Overrides by check name; `all` applies to every check.
    pub tolerances: BTreeMap<String, f64>,
}

/// Parses `name=value`.
pub fn parse_tol(arg: &str) -> Result<(String, f64), CliError> {
    let (name, value) = arg
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--tol expects name=value, got `{arg}`")))?;
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|e| CliError::Usage(format!("bad tolerance for {name}: {e}")))?;
    Ok((name.trim().to_string(), v))
}

impl RunConfig {
    pub fn resolve(command: &str, file: FileConfig, flags: FlagConfig) -> Result<RunConfig, CliError> {
        let mut tolerances = file.tol;
        for arg in &flags.tol {
            let (k, v) = parse_tol(arg)?;
            tolerances.insert(k, v);
        }
        for (k, v) in &tolerances {
            if !(v.is_finite() && *v > 0.0) {
                return Err(CliError::Usage(format!("tolerance {k} must be positive and finite, got {v}")));
            }
        }
        let cfg = RunConfig {
            command: command.to_string(),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            dims: if flags.dims.is_empty() { file.dims.unwrap_or_default() } else { flags.dims },
            samples: flags.samples.or(file.samples),
            provider: flags.provider.or(file.provider),
            mode: flags.mode.or(file.mode),
            soliton_mode: flags.soliton_mode.or(file.soliton_mode),
            t: flags.t.or(file.t),
            grid: file.grid,
            out: flags.out.or(file.out),
            warped: file.warped,
            tolerances,
        };
        if cfg.samples == Some(0) {
            return Err(CliError::Usage("samples must be at least 1".into()));
        }
        if let Some(g) = cfg.grid {
            if g.nx == 0 || g.nt == 0 {
                return Err(CliError::Usage("grid sizes must be at least 1".into()));
            }
        }
        Ok(cfg)
    }

    /// Tolerance for `name`: an explicit override, then `all`, then the default.
    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances
            .get(name)
            .or_else(|| self.tolerances.get("all"))
            .copied()
            .unwrap_or(default)
    }

    /// Rejects overrides that name no check of the command.
    pub fn check_tol_names(&self, known: &[&str]) -> Result<(), CliError> {
        for k in self.tolerances.keys() {
            if k != "all" && !known.contains(&k.as_str()) {
                return Err(CliError::Usage(format!("unknown tolerance `{k}`; known: all, {}", known.join(", "))));
            }
        }
        Ok(())
    }

    pub fn dims_or(&self, default: &[usize]) -> Vec<usize> {
        if self.dims.is_empty() {
            default.to_vec()
        } else {
            self.dims.clone()
        }
    }

    pub fn grid_or(&self, nx: usize, nt: usize) -> GridSpec {
        self.grid.unwrap_or(GridSpec { nx, nt })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str("seed = 7\ndims = [4]\n[tol]\nq_closure = 1e-3\n").unwrap();
        let flags = FlagConfig { seed: Some(9), tol: vec!["q_closure=1e-4".into()], ..FlagConfig::default() };
        let cfg = RunConfig::resolve("identity-suite", file, flags).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.dims, vec![4]);
        assert_eq!(cfg.tol("q_closure", 1.0), 1e-4);
        assert_eq!(cfg.tol("other", 0.5), 0.5);
    }

    #[test]
    fn all_applies_to_every_check() {
        let flags = FlagConfig { tol: vec!["all=1e-30".into()], ..FlagConfig::default() };
        let cfg = RunConfig::resolve("x", FileConfig::default(), flags).unwrap();
        assert_eq!(cfg.tol("anything", 1.0), 1e-30);
        assert_eq!(cfg.seed, DEFAULT_SEED);
    }

    #[test]
    fn rejects_bad_tolerances() {
        for t in ["x=0", "x=-1", "x=nan", "x", "x=abc"] {
            let flags = FlagConfig { tol: vec![t.into()], ..FlagConfig::default() };
            assert!(matches!(RunConfig::resolve("x", FileConfig::default(), flags), Err(CliError::Usage(_))), "{t}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("sead = 1\n").is_err());
    }
}
