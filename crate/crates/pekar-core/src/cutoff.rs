//! Scalar lattice sums over `(2π/L)ℤ³` that enter the ultraviolet estimates,
//! and log-log power-law fits of their cutoff dependence.
//!
//! Infinite sums are closed with a smooth partition of unity: with
//! `χ(r) = ½ erfc((R - r)/w)` the lattice sum of `F·(1 - χ)` is taken
//! explicitly and the sum of `F·χ` is replaced by its integral. For a width
//! of a few lattice spacings the Poisson remainder of the second step is
//! of order `exp(-(wL)²/4)`, far below double precision.

use crate::error::{Error, Result};
use crate::lattice::{b_weight, wt_weight};
use gauss_quad::GaussLegendre;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};

/// Moments of the integer vectors on each shell `|m|² = q`.
struct ShellTable {
    count: Vec<f64>,
    /// `Σ m_x⁴`.
    quartic: Vec<f64>,
    /// `Σ m_x² m_y²`.
    mixed: Vec<f64>,
}

impl ShellTable {
    fn build(qmax: usize) -> ShellTable {
        let mut count = vec![0.0; qmax + 1];
        let mut quartic = vec![0.0; qmax + 1];
        let mut mixed = vec![0.0; qmax + 1];
        let r = (qmax as f64).sqrt().floor() as usize;
        // Octant loop; each point stands for its sign images.
        for x in 0..=r {
            let qx = x * x;
            let wx = if x == 0 { 1.0 } else { 2.0 };
            for y in 0..=r {
                let qxy = qx + y * y;
                if qxy > qmax {
                    break;
                }
                let wxy = wx * if y == 0 { 1.0 } else { 2.0 };
                let (x2, y2) = ((x * x) as f64, (y * y) as f64);
                let zmax = ((qmax - qxy) as f64).sqrt().floor() as usize;
                for z in 0..=zmax {
                    let q = qxy + z * z;
                    if q > qmax {
                        break;
                    }
                    let w = wxy * if z == 0 { 1.0 } else { 2.0 };
                    count[q] += w;
                    quartic[q] += w * x2 * x2;
                    mixed[q] += w * x2 * y2;
                }
            }
        }
        ShellTable { count, quartic, mixed }
    }

    fn qmax(&self) -> usize {
        self.count.len() - 1
    }
}

static TABLE: Lazy<Mutex<Option<Arc<ShellTable>>>> = Lazy::new(|| Mutex::new(None));

fn shells(qmax: usize) -> Arc<ShellTable> {
    let mut slot = TABLE.lock().unwrap_or_else(|e| e.into_inner());
    match slot.as_ref() {
        Some(t) if t.qmax() >= qmax => t.clone(),
        _ => {
            let grown = slot.as_ref().map_or(0, |t| t.qmax() * 2);
            let t = Arc::new(ShellTable::build(qmax.max(grown)));
            *slot = Some(t.clone());
            t
        }
    }
}

/// Angular factor of a summand `F(k) = g(|k|) · A(k/|k|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Angular {
    One,
    /// `n_x⁴` (any single axis).
    Quartic,
    /// `n_x² n_y²` (any pair of distinct axes).
    Mixed,
}

impl Angular {
    fn mean(self) -> f64 {
        match self {
            Angular::One => 1.0,
            Angular::Quartic => 0.2,
            Angular::Mixed => 1.0 / 15.0,
        }
    }

    /// `Σ_{|m|² = q} A(m/|m|)`.
    fn shell(self, t: &ShellTable, q: usize) -> f64 {
        let q2 = (q * q) as f64;
        match self {
            Angular::One => t.count[q],
            Angular::Quartic => t.quartic[q] / q2,
            Angular::Mixed => t.mixed[q] / q2,
        }
    }
}

/// Parameters of the smooth tail closure, in units of the lattice spacing
/// for the width.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Closure {
    /// Working radius as a multiple of the cutoff.
    pub factor: f64,
    /// Width of the partition, in lattice spacings.
    pub width: f64,
}

impl Default for Closure {
    fn default() -> Self {
        Closure {
            factor: 10.0,
            width: 2.5,
        }
    }
}

const REACH: f64 = 9.0;

fn gauss(degree: usize) -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(degree).expect("positive degree"))
}

fn shell_index_floor(x: f64) -> usize {
    // Squared radii are integers; guard against roundoff at exact shells.
    (x * (1.0 + 1e-12)).floor().max(0.0) as usize
}

/// `Σ_{k ≠ 0, |k| ≥ lo} g(|k|) A(k̂)` for a spacing `s`. `g` must decay
/// faster than `r⁻³`.
pub(crate) fn sum_outside(s: f64, lo: f64, g: &dyn Fn(f64) -> f64, ang: Angular, c: Closure) -> f64 {
    let w = c.width * s;
    let lo = lo.max(0.0);
    let big_r = (c.factor * lo).max(lo + (REACH + 1.0) * w);
    let chi = |r: f64| 0.5 * libm::erfc((big_r - r) / w);
    let qlo = {
        let x = (lo / s).powi(2) * (1.0 - 1e-12);
        (x.ceil() as usize).max(1)
    };
    let qhi = shell_index_floor(((big_r + REACH * w) / s).powi(2));
    let t = shells(qhi);
    let mut lattice = 0.0;
    for q in qlo..=qhi {
        let r = s * (q as f64).sqrt();
        let a = ang.shell(&t, q);
        if a != 0.0 {
            lattice += a * g(r) * (1.0 - chi(r));
        }
    }
    let (a, b) = (big_r - REACH * w, big_r + REACH * w);
    let panel = gauss(24);
    let panels = 2 * REACH as usize;
    let h = (b - a) / panels as f64;
    let mut integral = 0.0;
    for p in 0..panels {
        let x0 = a + p as f64 * h;
        integral += panel.integrate(x0, x0 + h, |r| r * r * g(r) * chi(r));
    }
    // r = b / t maps [b, ∞) onto (0, 1].
    integral += gauss(48).integrate(0.0, 1.0, |t| {
        if t == 0.0 {
            return 0.0;
        }
        let r = b / t;
        r * r * g(r) * b / (t * t)
    });
    lattice + 4.0 * PI * ang.mean() * integral / s.powi(3)
}

/// `Σ_{k ∈ ball} g(|k|) A(k̂)` over the closed (or open) ball, `k = 0`
/// included only when `zero` is given.
pub(crate) fn sum_inside(s: f64, radius: f64, strict: bool, g: &dyn Fn(f64) -> f64, ang: Angular, zero: Option<f64>) -> f64 {
    if radius < 0.0 {
        return 0.0;
    }
    let x = (radius / s).powi(2);
    let qhi = if strict {
        let c = (x * (1.0 - 1e-12)).ceil() as usize;
        match c.checked_sub(1) {
            Some(v) => v,
            None => return 0.0,
        }
    } else {
        shell_index_floor(x)
    };
    let t = shells(qhi);
    let mut total = if radius > 0.0 || !strict { zero.unwrap_or(0.0) } else { 0.0 };
    for q in 1..=qhi {
        let a = ang.shell(&t, q);
        if a != 0.0 {
            total += a * g(s * (q as f64).sqrt());
        }
    }
    total
}

fn spacing(side: f64) -> Result<f64> {
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::Domain(format!("side length must be positive, got {side}")));
    }
    Ok(2.0 * PI / side)
}

/// Number of `k ∈ (2π/L)ℤ³` with `|k| ≤ Λ`, including `k = 0`.
pub fn mode_count(side: f64, cutoff: f64) -> Result<u64> {
    let s = spacing(side)?;
    Ok(sum_inside(s, cutoff, false, &|_| 1.0, Angular::One, Some(1.0)).round() as u64)
}

/// `N / ((4π/3)(L/2π)³Λ³)`.
pub fn volume_law_ratio(side: f64, cutoff: f64) -> Result<f64> {
    if !(cutoff > 0.0) {
        return Err(Error::Domain("volume law needs a positive cutoff".into()));
    }
    let n = mode_count(side, cutoff)? as f64;
    Ok(n / (4.0 * PI / 3.0 * (side * cutoff / (2.0 * PI)).powi(3)))
}

/// `(1/L³) Σ_{|k| ≥ Λ} k_j² k_l² / |k|¹⁰`, axes `j, l ∈ {1, 2, 3}`.
pub fn ly_norm(side: f64, cutoff: f64, j: usize, l: usize) -> Result<f64> {
    ly_norm_with(side, cutoff, j, l, Closure::default())
}

pub(crate) fn ly_norm_with(side: f64, cutoff: f64, j: usize, l: usize, c: Closure) -> Result<f64> {
    if !(1..=3).contains(&j) || !(1..=3).contains(&l) {
        return Err(Error::Domain(format!("axes must lie in 1..=3, got ({j}, {l})")));
    }
    if !(cutoff > 0.0) {
        return Err(Error::Domain("cutoff must be positive".into()));
    }
    let s = spacing(side)?;
    let ang = if j == l { Angular::Quartic } else { Angular::Mixed };
    Ok(sum_outside(s, cutoff, &|r| r.powi(-6), ang, c) / side.powi(3))
}

/// The norms of the Gross-transformation functions `f` and `g = -v_{L,K}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct GrossSums {
    /// `‖g‖²`.
    pub g2: f64,
    /// `‖f‖²`.
    pub f2: f64,
    /// `⟨v_L, f⟩`.
    pub vf: f64,
    /// `‖∇f‖²`.
    pub gradf2: f64,
}

pub fn gross_sums(side: f64, alpha: f64, k: f64) -> Result<GrossSums> {
    gross_sums_with(side, alpha, k, Closure::default())
}

pub(crate) fn gross_sums_with(side: f64, alpha: f64, k: f64, c: Closure) -> Result<GrossSums> {
    if !(alpha > 0.0 && k > 0.0) {
        return Err(Error::Domain(format!("need α > 0 and K > 0, got α = {alpha}, K = {k}")));
    }
    let s = spacing(side)?;
    let vol = side.powi(3);
    let a2 = alpha * alpha;
    let g2 = sum_inside(s, k, true, &|r| 1.0 / (r * r), Angular::One, None) / vol;
    let f2 = sum_outside(s, k, &|r| 1.0 / (r * r * (a2 * r * r + 1.0).powi(2)), Angular::One, c) / vol;
    let vf = sum_outside(s, k, &|r| 1.0 / (r * r * (a2 * r * r + 1.0)), Angular::One, c) / vol;
    let gradf2 = sum_outside(s, k, &|r| 1.0 / (a2 * r * r + 1.0).powi(2), Angular::One, c) / vol;
    Ok(GrossSums { g2, f2, vf, gradf2 })
}

/// Parameters of the outer-region spectral sum.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct OuterParams {
    #[serde(rename = "T")]
    pub t: f64,
    pub gamma: f64,
    pub eta: f64,
    pub kappa: f64,
}

/// `Σ_{|k| ≤ Λ} (1 - √((1 - W_γ(k)^{1/2})(B(k) - η W_T(k))))`.
pub fn outer_trace_sum(side: f64, cutoff: f64, p: OuterParams) -> Result<f64> {
    let s = spacing(side)?;
    if !(p.kappa > 0.0) {
        return Err(Error::Domain("κ′ must be positive".into()));
    }
    let radicand = |r: f64| (b_weight(r, p.kappa) - p.eta * wt_weight(r, p.t), 1.0 - wt_weight(r, p.gamma).sqrt());
    // B - ηW_T grows with |k| away from the jump at T, so the smallest
    // values sit at k = 0, the first shell and the first shell beyond T.
    let mut probes = vec![0.0, s];
    let beyond = shell_index_floor((p.t / s).powi(2)) + 1;
    probes.push(s * (beyond as f64).sqrt());
    for r in probes {
        if r > cutoff * (1.0 + 1e-12) {
            continue;
        }
        let (value, _) = radicand(r);
        if !(value > 0.0) {
            let m = (r / s).round() as i64;
            let q = (r / s).powi(2).round() as i64;
            let mode = lattice_point_on_shell(q).unwrap_or([m, 0, 0]);
            return Err(Error::Positivity { mode, value });
        }
    }
    let term = |r: f64| {
        let (b, v) = radicand(r);
        1.0 - (v * b).sqrt()
    };
    let zero = term(0.0);
    Ok(sum_inside(s, cutoff, false, &term, Angular::One, Some(zero)))
}

fn lattice_point_on_shell(q: i64) -> Option<[i64; 3]> {
    let r = (q as f64).sqrt() as i64 + 1;
    for x in 0..=r {
        for y in 0..=x {
            for z in 0..=y {
                if x * x + y * y + z * z == q {
                    return Some([x, y, z]);
                }
            }
        }
    }
    None
}

/// Least-squares fit of `log value = slope · log parameter + intercept`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScalingFit {
    pub parameters: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the natural-log residuals.
    pub residual: f64,
}

pub fn fit_power_law(parameters: &[f64], values: &[f64]) -> Result<ScalingFit> {
    if parameters.len() != values.len() || parameters.len() < 4 {
        return Err(Error::Domain("a power-law fit needs at least 4 matching points".into()));
    }
    if parameters.iter().chain(values).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Domain("power-law fits need positive finite data".into()));
    }
    let (slope, intercept, residual) = log_log_line(parameters, values);
    Ok(ScalingFit {
        parameters: parameters.to_vec(),
        values: values.to_vec(),
        slope,
        intercept,
        residual,
    })
}

pub(crate) fn log_log_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

/// `start, start·ratio, …` with `count` points.
pub fn geometric_sweep(start: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start * ratio.powi(i as i32)).collect()
}

/// Evaluates `f` along `parameters` and fits the power law.
pub fn sweep(parameters: &[f64], f: impl Fn(f64) -> Result<f64>) -> Result<ScalingFit> {
    let values = parameters.iter().map(|&p| f(p)).collect::<Result<Vec<f64>>>()?;
    fit_power_law(parameters, &values)
}
