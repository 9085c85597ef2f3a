//! Run reports and their serialized forms.

use crate::config::RunConfig;
use pekar_core::scf::Regime;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

/// Bumped on any incompatible change to the report layout or CSV header.
pub const SCHEMA_VERSION: &str = "1.0";

/// JSON schema for [`RunReport`], shipped with the binary.
pub const REPORT_SCHEMA: &str = include_str!("../schema/run_report.schema.json");
pub const MANIFEST_SCHEMA: &str = include_str!("../schema/manifest.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    NotConverged,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub pekar_core: String,
    pub pekar_cli: String,
}

impl Default for Versions {
    fn default() -> Self {
        Versions {
            pekar_core: pekar_core::VERSION.to_string(),
            pekar_cli: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    /// `½ Σ_j (1 - √(1 - k_j))` over the assembled modes.
    pub value: f64,
    pub tail: f64,
    pub total: f64,
    pub tail_constant: f64,
    pub clamped: usize,
    #[serde(rename = "cutoff_Lambda")]
    pub cutoff: f64,
    /// `total` at `Λ/2`.
    pub half_cutoff_total: f64,
    /// `|total(Λ) - total(Λ/2)| / total(Λ)`.
    pub doubling_drift: f64,
    /// Set when `doubling_drift ≤ 1%`.
    pub doubling_stable: bool,
    /// Direct closed-form sum at the constant minimizer, when applicable.
    pub small_l_direct: Option<f64>,
    pub small_l_delta: Option<f64>,
}

/// Closed-form correction at the constant minimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallLReport {
    #[serde(rename = "cutoff_Lambda")]
    pub cutoff: f64,
    pub value: f64,
    /// Bound on the modes beyond the cutoff.
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub dimension: usize,
    #[serde(rename = "cutoff_Lambda")]
    pub cutoff: f64,
    pub k_max: f64,
    pub zero_mode_count: usize,
    pub zero_mode_angle: Option<f64>,
    /// `1 - k_4`.
    pub gap: Option<f64>,
    pub tail_slope: Option<f64>,
    pub tail_slope_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitReport {
    pub shift_y: [f64; 3],
    pub recovered_y: [f64; 3],
    /// Largest wrapped component of `recovered_y - shift_y`.
    pub shift_error: f64,
    pub distance: f64,
    pub threshold: f64,
    pub ortho_residual: f64,
    pub roundtrip_error: f64,
    pub adapted_dimension: usize,
    pub det_a0: f64,
    /// Largest `W_T` radius at which seeded probes were recovered uniquely.
    pub tube_radius: f64,
    /// Smallest probed radius at which recovery failed.
    pub tube_failure: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exponent {
    pub name: String,
    pub expected: f64,
    pub slope: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub mode_count: u64,
    pub volume_law_ratio: f64,
    pub kernel_deviation_sup: f64,
    pub exponents: Vec<Exponent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: String,
    pub command: String,
    pub status: Status,
    pub message: Option<String>,
    pub config: RunConfig,
    pub versions: Versions,
    pub elapsed_seconds: f64,
    #[serde(rename = "e_L")]
    pub e_l: Option<f64>,
    pub mu: Option<f64>,
    pub mu_rayleigh: Option<f64>,
    pub el_residual: Option<f64>,
    pub regime: Option<Regime>,
    pub iterations: Option<usize>,
    pub trace_correction: Option<Correction>,
    pub spectrum: Option<Spectrum>,
    pub small_l: Option<SmallLReport>,
    pub orbit: Option<OrbitReport>,
    pub diagnostics: Option<Diagnostics>,
}

impl RunReport {
    pub fn new(command: &str, config: &RunConfig) -> RunReport {
        RunReport {
            schema_version: SCHEMA_VERSION.to_string(),
            command: command.to_string(),
            status: Status::Ok,
            message: None,
            config: config.clone(),
            versions: Versions::default(),
            elapsed_seconds: 0.0,
            e_l: None,
            mu: None,
            mu_rayleigh: None,
            el_residual: None,
            regime: None,
            iterations: None,
            trace_correction: None,
            spectrum: None,
            small_l: None,
            orbit: None,
            diagnostics: None,
        }
    }

    /// Scalar columns shared by every CSV row, in header order.
    pub fn csv_scalars(&self) -> Vec<(&'static str, String)> {
        let c = self.trace_correction.as_ref();
        let s = self.spectrum.as_ref();
        vec![
            ("status", format!("{:?}", self.status).to_lowercase()),
            ("e_L", opt(self.e_l)),
            ("mu", opt(self.mu)),
            ("mu_rayleigh", opt(self.mu_rayleigh)),
            ("el_residual", opt(self.el_residual)),
            ("regime", self.regime.map(|r| format!("{r:?}")).unwrap_or_default()),
            ("iterations", self.iterations.map(|i| i.to_string()).unwrap_or_default()),
            ("trace_value", opt(c.map(|c| c.value))),
            ("trace_tail", opt(c.map(|c| c.tail))),
            ("trace_total", opt(c.map(|c| c.total))),
            ("doubling_drift", opt(c.map(|c| c.doubling_drift))),
            ("small_l_delta", opt(c.and_then(|c| c.small_l_delta))),
            ("zero_mode_angle", opt(s.and_then(|s| s.zero_mode_angle))),
            ("gap_one_minus_k4", opt(s.and_then(|s| s.gap))),
            ("tail_slope", opt(s.and_then(|s| s.tail_slope))),
            ("message", self.message.clone().unwrap_or_default()),
        ]
    }
}

/// Ten significant digits, as used in every CSV table.
pub fn csv_number(x: f64) -> String {
    format!("{x:.9e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(csv_number).unwrap_or_default()
}

/// Checks every `f64` directly, since `serde_json` would emit `null`.
pub fn check_finite(report: &RunReport) -> Result<(), String> {
    let mut bad = Vec::new();
    let mut check = |name: &str, x: Option<f64>| {
        if x.is_some_and(|x| !x.is_finite()) {
            bad.push(name.to_string());
        }
    };
    check("elapsed_seconds", Some(report.elapsed_seconds));
    check("e_L", report.e_l);
    check("mu", report.mu);
    check("mu_rayleigh", report.mu_rayleigh);
    check("el_residual", report.el_residual);
    if let Some(c) = &report.trace_correction {
        for (n, x) in [
            ("value", Some(c.value)),
            ("tail", Some(c.tail)),
            ("total", Some(c.total)),
            ("tail_constant", Some(c.tail_constant)),
            ("half_cutoff_total", Some(c.half_cutoff_total)),
            ("doubling_drift", Some(c.doubling_drift)),
            ("small_l_direct", c.small_l_direct),
            ("small_l_delta", c.small_l_delta),
        ] {
            check(&format!("trace_correction.{n}"), x);
        }
    }
    if let Some(s) = &report.spectrum {
        for (n, x) in [
            ("k_max", Some(s.k_max)),
            ("zero_mode_angle", s.zero_mode_angle),
            ("gap", s.gap),
            ("tail_slope", s.tail_slope),
            ("tail_slope_residual", s.tail_slope_residual),
        ] {
            check(&format!("spectrum.{n}"), x);
        }
    }
    if let Some(l) = &report.small_l {
        check("small_l.value", Some(l.value));
        check("small_l.tail_bound", Some(l.tail_bound));
    }
    if let Some(o) = &report.orbit {
        let scalars = [
            o.shift_error,
            o.distance,
            o.threshold,
            o.ortho_residual,
            o.roundtrip_error,
            o.det_a0,
            o.tube_radius,
            o.tube_failure.unwrap_or(0.0),
        ];
        if scalars.iter().chain(&o.recovered_y).any(|x| !x.is_finite()) {
            bad.push("orbit".into());
        }
    }
    if let Some(d) = &report.diagnostics {
        if !d.kernel_deviation_sup.is_finite() || !d.volume_law_ratio.is_finite() {
            bad.push("diagnostics".into());
        }
        for e in &d.exponents {
            if !(e.slope.is_finite() && e.residual.is_finite()) {
                bad.push(format!("diagnostics.{}", e.name));
            }
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(format!("non-finite values in report: {}", bad.join(", ")))
    }
}

/// Writes floats with 17 significant digits, enough to round-trip every
/// `f64` in a fixed-width form.
struct SeventeenDigits;

impl serde_json::ser::Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value == 0.0 {
            // Keeps the sign of negative zero out of the output.
            return writer.write_all(b"0.0000000000000000e0");
        }
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON with 17-digit floats.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SeventeenDigits);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn config() -> RunConfig {
        RunConfig::from_toml("side_length_L = 1.0\ngrid_points_n = 8\n", Path::new("t.toml")).unwrap()
    }

    #[test]
    fn json_uses_seventeen_digits_and_round_trips() {
        let mut r = RunReport::new("solve", &config());
        r.e_l = Some(0.1);
        r.mu = Some(-0.0);
        let text = to_json(&r).unwrap();
        assert!(text.contains("\"e_L\":1.0000000000000001e-1"), "{text}");
        assert!(text.contains("\"mu\":0.0000000000000000e0"), "{text}");
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.e_l, Some(0.1));
        assert_eq!(back.config, r.config);
    }

    #[test]
    fn csv_numbers_have_ten_digits() {
        assert_eq!(csv_number(1.0 / 3.0), "3.333333333e-1");
        assert_eq!(csv_number(-2.5e-12), "-2.500000000e-12");
    }

    #[test]
    fn non_finite_values_are_reported() {
        let mut r = RunReport::new("solve", &config());
        assert!(check_finite(&r).is_ok());
        r.mu = Some(f64::NAN);
        assert!(check_finite(&r).unwrap_err().contains("mu"));
    }
}
