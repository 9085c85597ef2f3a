//! Run configuration: a TOML document whose keys carry their units.
//!
//! Lengths are in the natural units of the model (the Pekar length), so the
//! unit suffix names the quantity: `side_length_L` is a length, `cutoff_Lambda`
//! an inverse length, `weight_T` an inverse length squared.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// Invalid or unreadable configuration; maps to exit status 1.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: field `{field}`: {message}")]
    Field { field: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPreset {
    /// Periodic Gaussian of width `init_width_over_L · L` at the origin.
    Bump,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    #[serde(rename = "side_length_L")]
    SideLength,
    #[serde(rename = "cutoff_Lambda")]
    Cutoff,
}

impl SweepParameter {
    pub fn column(self) -> &'static str {
        match self {
            SweepParameter::SideLength => "side_length_L",
            SweepParameter::Cutoff => "cutoff_Lambda",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Solve,
    Correction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    /// Explicit sweep points; otherwise `start · ratio^i` for `i < count`.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub ratio: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default = "default_pipeline")]
    pub pipeline: Pipeline,
}

fn default_pipeline() -> Pipeline {
    Pipeline::Solve
}

impl SweepSpec {
    pub fn points(&self) -> Result<Vec<f64>, ConfigError> {
        let pts = match (&self.values, self.start, self.ratio, self.count) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(s), Some(r), Some(c)) => (0..c).map(|i| s * r.powi(i as i32)).collect(),
            _ => {
                return Err(ConfigError::Field {
                    field: "sweep",
                    message: "give either `values` or all of `start`, `ratio`, `count`".into(),
                })
            }
        };
        if pts.is_empty() || pts.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(ConfigError::Field {
                field: "sweep",
                message: "sweep points must be positive and finite".into(),
            });
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "side_length_L")]
    pub side_length: f64,
    /// Grid points per axis; even.
    #[serde(rename = "grid_points_n")]
    pub n: usize,
    /// Hessian cutoff; defaults to 95% of the Nyquist radius `π n / L`.
    #[serde(rename = "cutoff_Lambda", default)]
    pub cutoff: Option<f64>,
    #[serde(rename = "weight_T", default = "default_weight")]
    pub weight: f64,
    #[serde(default = "default_scf_tol")]
    pub scf_tolerance: f64,
    #[serde(default = "default_eigen_tol")]
    pub eigen_tolerance: f64,
    #[serde(default = "default_hessian_tol")]
    pub hessian_tolerance: f64,
    #[serde(default = "default_max_outer")]
    pub max_outer_iterations: usize,
    #[serde(default = "default_init")]
    pub init: InitPreset,
    #[serde(rename = "init_width_over_L", default = "default_width")]
    pub init_width: f64,
    /// Translation applied to `φ_L` by the `orbit` command.
    #[serde(rename = "orbit_shift_y", default)]
    pub orbit_shift: [f64; 3],
    /// Size of the transverse perturbation used by `orbit`, relative to the
    /// tube radius.
    #[serde(default = "default_orbit_fraction")]
    pub orbit_perturbation_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn default_weight() -> f64 {
    0.05
}
fn default_scf_tol() -> f64 {
    1e-9
}
fn default_eigen_tol() -> f64 {
    1e-11
}
fn default_hessian_tol() -> f64 {
    1e-10
}
fn default_max_outer() -> usize {
    500
}
fn default_init() -> InitPreset {
    InitPreset::Bump
}
fn default_width() -> f64 {
    0.125
}
fn default_orbit_fraction() -> f64 {
    0.5
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        RunConfig::from_toml(&text, path)
    }

    pub fn nyquist(&self) -> f64 {
        PI * self.n as f64 / self.side_length
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff.unwrap_or(0.95 * self.nyquist())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let field = |field, message: &str| {
            Err(ConfigError::Field {
                field,
                message: message.to_string(),
            })
        };
        if !(self.side_length.is_finite() && self.side_length > 0.0) {
            return field("side_length_L", "must be positive and finite");
        }
        if self.n < 4 || self.n % 2 != 0 {
            return field("grid_points_n", "must be even and at least 4");
        }
        if let Some(c) = self.cutoff {
            if !(c.is_finite() && c > 0.0) {
                return field("cutoff_Lambda", "must be positive and finite");
            }
            if c > self.nyquist() {
                return Err(ConfigError::Field {
                    field: "cutoff_Lambda",
                    message: format!("{c} exceeds the Nyquist radius π n / L = {}", self.nyquist()),
                });
            }
        }
        for (name, v) in [
            ("weight_T", self.weight),
            ("scf_tolerance", self.scf_tolerance),
            ("eigen_tolerance", self.eigen_tolerance),
            ("hessian_tolerance", self.hessian_tolerance),
            ("init_width_over_L", self.init_width),
            ("orbit_perturbation_fraction", self.orbit_perturbation_fraction),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return field(name, "must be positive and finite");
            }
        }
        if self.orbit_shift.iter().any(|y| !y.is_finite()) {
            return field("orbit_shift_y", "must be finite");
        }
        if self.max_outer_iterations == 0 {
            return field("max_outer_iterations", "must be at least 1");
        }
        if let Some(s) = &self.sweep {
            s.points()?;
        }
        Ok(())
    }

    /// Copy with one sweep parameter replaced.
    pub fn at(&self, parameter: SweepParameter, value: f64) -> RunConfig {
        let mut c = self.clone();
        match parameter {
            SweepParameter::SideLength => c.side_length = value,
            SweepParameter::Cutoff => c.cutoff = Some(value),
        }
        c.sweep = None;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::from_toml(text, Path::new("test.toml"))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse("side_length_L = 1.0\ngrid_points_n = 16\n").unwrap();
        assert_eq!(c.init, InitPreset::Bump);
        assert_eq!(c.seed, 0);
        assert!((c.cutoff() - 0.95 * PI * 16.0).abs() < 1e-12);
    }

    #[test]
    fn missing_field_is_named() {
        let err = parse("grid_points_n = 16\n").unwrap_err().to_string();
        assert!(err.contains("side_length_L"), "{err}");
    }

    #[test]
    fn odd_grid_and_large_cutoff_are_rejected() {
        let err = parse("side_length_L = 1.0\ngrid_points_n = 15\n").unwrap_err().to_string();
        assert!(err.contains("grid_points_n"), "{err}");
        let err = parse("side_length_L = 1.0\ngrid_points_n = 16\ncutoff_Lambda = 60.0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("Nyquist"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse("side_length_L = 1.0\ngrid_points_n = 16\nside_length = 2.0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("side_length"), "{err}");
    }

    #[test]
    fn sweep_points() {
        let c = parse(
            "side_length_L = 1.0\ngrid_points_n = 16\n[sweep]\nparameter = \"side_length_L\"\nstart = 100.0\nratio = 2.0\ncount = 3\n",
        )
        .unwrap();
        assert_eq!(c.sweep.unwrap().points().unwrap(), vec![100.0, 200.0, 400.0]);
        let bad = parse("side_length_L = 1.0\ngrid_points_n = 16\n[sweep]\nparameter = \"cutoff_Lambda\"\nstart = 1.0\n");
        assert!(bad.unwrap_err().to_string().contains("sweep"));
    }
}
