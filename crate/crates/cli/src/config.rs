//! Run configuration: a TOML file with optional sections, every field defaulted.

use std::path::{Path, PathBuf};

use rpencil::lie_core::{Root, Series};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    pub algebra: AlgebraConfig,
    pub parabolic: ParabolicConfig,
    pub scan: ScanConfig,
    pub tolerances: Tolerances,
    pub output: OutputConfig,
    pub vaisman: VaismanConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgebraConfig {
    pub series: String,
    /// Taken from the preset when absent.
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct ParabolicConfig {
    /// `cp1` when neither a preset nor roots are given.
    pub preset: Option<String>,
    /// Positive roots `(i, j)`, `i < j`, used when no preset is given.
    pub roots: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub lambda_grid: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rank_tol: f64,
    pub residual_tol: f64,
    pub quad_rel_err: f64,
    pub bound_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaismanConfig {
    /// Pencil parameters whose `CP^1` obstruction is evaluated.
    pub lambdas: Vec<f64>,
    /// Explicit radii; the default sweep plus fit grid is used when empty.
    pub xi_grid: Vec<f64>,
    pub hbar: f64,
    pub prequantum_convention: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Default for AlgebraConfig {
    fn default() -> Self {
        AlgebraConfig {
            series: "A".into(),
            rank: None,
        }
    }
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            lambda_grid: vec![-3.0, -2.5, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0],
            samples: 200,
            seed: 7,
        }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_tol: 1e-9,
            residual_tol: 1e-8,
            quad_rel_err: 1e-6,
            bound_tol: 1e-10,
        }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("rpencil-out"),
            formats: vec![Format::Both],
        }
    }
}

impl Default for VaismanConfig {
    fn default() -> Self {
        VaismanConfig {
            lambdas: vec![-0.5, -1.0, -1.5, 0.0, -2.0],
            xi_grid: Vec::new(),
            hbar: 1.0,
            prequantum_convention: "outer_minus".into(),
        }
    }
}

/// Algebra and parabolic subset after preset expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub label: String,
    pub series: Series,
    pub rank: usize,
    pub roots: Vec<Root>,
}

pub fn preset_roots(name: &str) -> Option<(usize, Vec<Root>)> {
    match name {
        "cp1" => Some((1, vec![Root::new(1, 2)])),
        "cp2" => Some((2, vec![Root::new(1, 2), Root::new(1, 3)])),
        _ => None,
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn wants_json(&self) -> bool {
        self.output
            .formats
            .iter()
            .any(|f| matches!(f, Format::Json | Format::Both))
    }

    pub fn wants_csv(&self) -> bool {
        self.output
            .formats
            .iter()
            .any(|f| matches!(f, Format::Csv | Format::Both))
    }

    /// Checks every field and expands the preset.
    pub fn validate(&self) -> Result<Resolved, String> {
        let series: Series = self
            .algebra
            .series
            .parse()
            .map_err(|e| format!("algebra.series: {e}"))?;
        let preset = match (&self.parabolic.preset, self.parabolic.roots.is_empty()) {
            (None, true) => Some("cp1".to_string()),
            (p, _) => p.clone(),
        };
        let (label, rank, roots) = match &preset {
            Some(name) => {
                let (rank, roots) = preset_roots(name)
                    .ok_or_else(|| format!("parabolic.preset: unknown preset '{name}' (cp1, cp2)"))?;
                if !self.parabolic.roots.is_empty() {
                    return Err("parabolic: give either preset or roots, not both".into());
                }
                if let Some(r) = self.algebra.rank {
                    if r != rank {
                        return Err(format!("algebra.rank: preset {name} requires rank {rank}, got {r}"));
                    }
                }
                (name.clone(), rank, roots)
            }
            None => {
                let rank = self
                    .algebra
                    .rank
                    .ok_or("algebra.rank: required when parabolic.preset is absent")?;
                let roots = self.parabolic.roots.iter().map(|[i, j]| Root::new(*i, *j)).collect();
                ("custom".to_string(), rank, roots)
            }
        };
        if rank == 0 {
            return Err("algebra.rank: must be at least 1".into());
        }
        if self.scan.lambda_grid.is_empty() {
            return Err("scan.lambda_grid: must be non-empty".into());
        }
        if self.scan.lambda_grid.iter().any(|l| !l.is_finite()) {
            return Err("scan.lambda_grid: values must be finite".into());
        }
        if self.scan.samples == 0 {
            return Err("scan.samples: must be at least 1".into());
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("rank_tol", t.rank_tol),
            ("residual_tol", t.residual_tol),
            ("quad_rel_err", t.quad_rel_err),
            ("bound_tol", t.bound_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("tolerances.{name}: must be positive, got {v}"));
            }
        }
        if self.output.formats.is_empty() {
            return Err("output.formats: must be non-empty".into());
        }
        let v = &self.vaisman;
        if !(v.hbar.is_finite() && v.hbar > 0.0) {
            return Err(format!("vaisman.hbar: must be positive, got {}", v.hbar));
        }
        v.prequantum_convention
            .parse::<rpencil::vaisman::PrequantumConvention>()
            .map_err(|e| format!("vaisman.prequantum_convention: {e}"))?;
        if v.lambdas.iter().any(|l| !l.is_finite()) {
            return Err("vaisman.lambdas: values must be finite".into());
        }
        Ok(Resolved {
            label,
            series,
            rank,
            roots,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let r = RunConfig::default().validate().unwrap();
        assert_eq!(r.rank, 1);
        assert_eq!(r.label, "cp1");
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn field_diagnostics() {
        let err = RunConfig::parse("[scan]\nsamples = \"many\"\n").unwrap_err();
        assert!(err.contains("line 2"), "{err}");
        let err = RunConfig::parse("[scan]\nsampels = 3\n").unwrap_err();
        assert!(err.contains("sampels"), "{err}");
        let cfg = RunConfig::parse("[scan]\nlambda_grid = []\n").unwrap();
        assert!(cfg.validate().unwrap_err().starts_with("scan.lambda_grid"));
        let cfg = RunConfig::parse("[algebra]\nrank = 0\n[parabolic]\nroots = [[1, 2]]\n").unwrap();
        assert!(cfg.validate().unwrap_err().starts_with("algebra.rank"));
        let cfg = RunConfig::parse("[algebra]\nrank = 2\n").unwrap();
        assert!(cfg.validate().unwrap_err().contains("requires rank 1"));
    }

    #[test]
    fn explicit_roots() {
        let cfg = RunConfig::parse("[algebra]\nrank = 2\n[parabolic]\nroots = [[1, 2], [1, 3]]\n").unwrap();
        let r = cfg.validate().unwrap();
        assert_eq!(r.roots, vec![Root::new(1, 2), Root::new(1, 3)]);
    }
}
