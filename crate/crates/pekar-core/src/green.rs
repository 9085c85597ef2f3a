//! The zero-mean periodic Green function of `-Δ` on the torus,
//! `F_L(x) = Σ_{k≠0} e^{ik·x} / (L³|k|²)`, by Ewald splitting.
//!
//! With screening `a`,
//! `F_L(x) = Σ_n erfc(a|x+nL|)/(4π|x+nL|) - 1/(4a²L³)
//!           + L⁻³ Σ_{k≠0} e^{-k²/4a²} cos(k·x)/k²`.

use crate::error::{Error, Result};
use crate::fft::SpectralGrid;
use crate::lattice::{MomentumLattice, Point, C64};
use std::f64::consts::PI;

/// Relative size of the discarded Gaussian factors in both sums.
const EWALD_CUT: f64 = 40.0;

/// Ewald evaluator for one torus side length.
#[derive(Debug, Clone)]
pub struct Ewald {
    side: f64,
    screening: f64,
    /// Reciprocal-space terms `(m, weight)` with the `2/L³` of the
    /// `±k` pairing folded in.
    recip: Vec<([i64; 3], f64)>,
    mmax: i64,
    constant: f64,
}

impl Ewald {
    /// Default screening `2π/L`.
    pub fn new(side: f64) -> Ewald {
        Ewald::with_screening(side, 2.0 * PI / side)
    }

    pub fn with_screening(side: f64, screening: f64) -> Ewald {
        let s = 2.0 * PI / side;
        let kmax = 2.0 * screening * EWALD_CUT.sqrt();
        let mmax = (kmax / s).ceil() as i64;
        let vol = side.powi(3);
        let mut recip = Vec::new();
        for mx in 0..=mmax {
            for my in -mmax..=mmax {
                for mz in -mmax..=mmax {
                    // Half space: keep one of each ±k pair.
                    if (mx, my, mz) <= (0, 0, 0) {
                        continue;
                    }
                    let k2 = ((mx * mx + my * my + mz * mz) as f64) * s * s;
                    let g = (-k2 / (4.0 * screening * screening)).exp();
                    if g < (-EWALD_CUT).exp() {
                        continue;
                    }
                    recip.push(([mx, my, mz], 2.0 * g / (k2 * vol)));
                }
            }
        }
        Ewald {
            side,
            screening,
            recip,
            mmax,
            constant: -1.0 / (4.0 * screening * screening * vol),
        }
    }

    pub fn screening(&self) -> f64 {
        self.screening
    }

    fn reciprocal(&self, x: Point) -> f64 {
        let s = 2.0 * PI / self.side;
        let mm = self.mmax as usize;
        // Per-axis phase tables e^{i m s x_a} for m in [-mmax, mmax].
        let table = |a: usize| -> Vec<C64> {
            (0..=2 * mm)
                .map(|j| C64::from_polar(1.0, (j as f64 - mm as f64) * s * x[a]))
                .collect()
        };
        let (tx, ty, tz) = (table(0), table(1), table(2));
        self.recip
            .iter()
            .map(|(m, w)| {
                let p = tx[(m[0] + self.mmax) as usize]
                    * ty[(m[1] + self.mmax) as usize]
                    * tz[(m[2] + self.mmax) as usize];
                w * p.re
            })
            .sum()
    }

    /// Real-space image sum; the `n = 0` term is replaced by
    /// `-erf(ar)/(4πr)` when `regular` is set.
    fn real_space(&self, x: Point, regular: bool) -> f64 {
        let a = self.screening;
        let rcut = EWALD_CUT.sqrt() / a;
        // |x| ≤ √3 L/2 inside the box.
        let reach = (rcut / self.side + 0.87).ceil() as i64;
        let mut sum = 0.0;
        for nx in -reach..=reach {
            for ny in -reach..=reach {
                for nz in -reach..=reach {
                    let d = [
                        x[0] + nx as f64 * self.side,
                        x[1] + ny as f64 * self.side,
                        x[2] + nz as f64 * self.side,
                    ];
                    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                    if r > rcut {
                        continue;
                    }
                    if nx == 0 && ny == 0 && nz == 0 && regular {
                        sum -= if r < 1e-8 / a {
                            a / (2.0 * PI.powf(1.5))
                        } else {
                            libm::erf(a * r) / (4.0 * PI * r)
                        };
                    } else {
                        sum += libm::erfc(a * r) / (4.0 * PI * r);
                    }
                }
            }
        }
        sum
    }

    /// `F_L(x)`; `x = 0` (or any lattice translate) is a domain error.
    pub fn kernel(&self, x: Point) -> Result<f64> {
        let w = wrap(x, self.side);
        if w.iter().all(|&c| c == 0.0) {
            return Err(Error::Domain("the Green kernel diverges at x = 0".into()));
        }
        Ok(self.real_space(w, false) + self.constant + self.reciprocal(w))
    }

    /// `F_L(x) - 1/(4π|x|)` for `x` in the fundamental box, continuous at 0.
    pub fn regular_part(&self, x: Point) -> f64 {
        self.real_space(x, true) + self.constant + self.reciprocal(x)
    }

    /// `F_L(x) - 1/(4π|x|)` on the grid `x_j = L j/s - L/2`, `j ∈ [0, s)³`.
    /// The reciprocal sum is evaluated with one FFT.
    pub fn regular_part_on_grid(&self, s: usize) -> Vec<f64> {
        assert!((s as i64) > 2 * self.mmax + 1, "grid too coarse for the reciprocal sum");
        let n = s;
        let grid = SpectralGrid::get(n, n);
        let mut coeffs = vec![C64::new(0.0, 0.0); n * n * n];
        let wrapi = |m: i64| m.rem_euclid(n as i64) as usize;
        for (m, w) in &self.recip {
            // cos(k·x) = (e^{ik·x} + e^{-ik·x})/2 with the pair weight w.
            let p = (wrapi(m[0]) * n + wrapi(m[1])) * n + wrapi(m[2]);
            let q = (wrapi(-m[0]) * n + wrapi(-m[1])) * n + wrapi(-m[2]);
            coeffs[p] += 0.5 * w;
            coeffs[q] += 0.5 * w;
        }
        let recip = grid.synthesize(&coeffs, 1.0);
        let h = self.side / n as f64;
        let c = self.side / 2.0;
        let mut out = Vec::with_capacity(n * n * n);
        for jx in 0..n {
            for jy in 0..n {
                for jz in 0..n {
                    let x = [jx as f64 * h - c, jy as f64 * h - c, jz as f64 * h - c];
                    let idx = (jx * n + jy) * n + jz;
                    out.push(self.real_space(x, true) + self.constant + recip[idx].re);
                }
            }
        }
        out
    }
}

fn wrap(x: Point, side: f64) -> Point {
    let w = |v: f64| v - side * (v / side + 0.5).floor();
    [w(x[0]), w(x[1]), w(x[2])]
}

/// `F_L(x)` with the default Ewald screening `2π/L`.
pub fn green_kernel(lat: &MomentumLattice, x: Point) -> Result<f64> {
    Ewald::new(lat.side_length()).kernel(x)
}

/// `lim`-regularized kernel `F_L(x) - 1/(4π|x|)`.
pub fn green_regular_part(lat: &MomentumLattice, x: Point) -> f64 {
    Ewald::new(lat.side_length()).regular_part(wrap(x, lat.side_length()))
}

/// Sup over the `s³` sample grid of `|F_L(x) - 1/(4π|x|)|`.
pub fn kernel_deviation_sup(side: f64, screening: f64, s: usize) -> f64 {
    Ewald::with_screening(side, screening)
        .regular_part_on_grid(s)
        .into_iter()
        .fold(0.0, |acc, v| acc.max(v.abs()))
}
