//! Real orthonormal bases of band-limited subspaces built from products of
//! one-dimensional cosines and sines.
//!
//! Along one axis the mode `|m| = a > 0` contributes `√2 cos(a s x)` (even)
//! and `√2 sin(a s x)` (odd); `a = 0` contributes the constant only. Every
//! basis function is a product of three such factors, so it has a definite
//! parity under each axis reflection.

use crate::lattice::{Field, MomentumLattice, C64};
use std::f64::consts::FRAC_1_SQRT_2;

/// One product function, with its nonzero Fourier coefficients.
#[derive(Debug, Clone)]
pub struct ParityMode {
    /// `(|m_x|, |m_y|, |m_z|)`.
    pub magnitude: [i64; 3],
    /// Odd factor along each axis.
    pub odd: [bool; 3],
    entries: Vec<(usize, C64)>,
}

impl ParityMode {
    pub fn shell(&self) -> i64 {
        self.magnitude.iter().map(|a| a * a).sum()
    }

    /// Reflection sector `Σ odd_a 2^a`.
    pub fn sector(&self) -> usize {
        (0..3).filter(|&a| self.odd[a]).map(|a| 1 << a).sum()
    }

    /// Storage positions and coefficients.
    pub fn entries(&self) -> &[(usize, C64)] {
        &self.entries
    }
}

/// The basis of `span{e_k : |k| ≤ radius}` (optionally without `k = 0`),
/// ordered by shell, then magnitude, then parity.
#[derive(Debug, Clone)]
pub struct ParityBasis {
    lattice: MomentumLattice,
    radius: f64,
    modes: Vec<ParityMode>,
}

fn axis_factor(a: i64, odd: bool) -> [(i64, C64); 2] {
    if a == 0 {
        [(0, C64::new(1.0, 0.0)), (0, C64::new(0.0, 0.0))]
    } else if odd {
        // √2 sin(θ) = (e^{iθ} - e^{-iθ}) / (i√2)
        [(a, C64::new(0.0, -FRAC_1_SQRT_2)), (-a, C64::new(0.0, FRAC_1_SQRT_2))]
    } else {
        [(a, C64::new(FRAC_1_SQRT_2, 0.0)), (-a, C64::new(FRAC_1_SQRT_2, 0.0))]
    }
}

impl ParityBasis {
    pub fn new(lattice: MomentumLattice, radius: f64, include_zero: bool) -> ParityBasis {
        let s = lattice.spacing();
        let lim = (radius / s).powi(2) * (1.0 + 1e-12);
        let amax = ((lattice.n() / 2) as i64 - 1).min((radius / s).floor() as i64 + 1);
        let mut modes = Vec::new();
        for ax in 0..=amax {
            for ay in 0..=amax {
                for az in 0..=amax {
                    let mag = [ax, ay, az];
                    let q = ax * ax + ay * ay + az * az;
                    if q as f64 > lim || (q == 0 && !include_zero) {
                        continue;
                    }
                    for bits in 0..8usize {
                        let odd = [bits & 1 != 0, bits & 2 != 0, bits & 4 != 0];
                        if (0..3).any(|a| odd[a] && mag[a] == 0) {
                            continue;
                        }
                        modes.push(ParityMode {
                            magnitude: mag,
                            odd,
                            entries: Self::expand(&lattice, mag, odd),
                        });
                    }
                }
            }
        }
        modes.sort_by_key(|m| (m.shell(), m.magnitude, m.sector()));
        ParityBasis { lattice, radius, modes }
    }

    fn expand(lat: &MomentumLattice, mag: [i64; 3], odd: [bool; 3]) -> Vec<(usize, C64)> {
        let fx = axis_factor(mag[0], odd[0]);
        let fy = axis_factor(mag[1], odd[1]);
        let fz = axis_factor(mag[2], odd[2]);
        let count = |a: i64| if a == 0 { 1 } else { 2 };
        let mut out = Vec::with_capacity(8);
        for &(mx, cx) in &fx[..count(mag[0])] {
            for &(my, cy) in &fy[..count(mag[1])] {
                for &(mz, cz) in &fz[..count(mag[2])] {
                    let idx = lat.index([mx, my, mz]).expect("basis mode inside the lattice");
                    out.push((idx, cx * cy * cz));
                }
            }
        }
        out
    }

    pub fn lattice(&self) -> &MomentumLattice {
        &self.lattice
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ParityMode] {
        &self.modes
    }

    /// `⟨b_j, f⟩` for every basis function (real part).
    pub fn coordinates(&self, f: &Field) -> Vec<f64> {
        let c = f.coeffs();
        self.modes
            .iter()
            .map(|m| m.entries.iter().map(|(i, w)| (w.conj() * c[*i]).re).sum())
            .collect()
    }

    /// `Σ_j x_j b_j`.
    pub fn synthesize(&self, coords: &[f64]) -> Field {
        assert_eq!(coords.len(), self.modes.len());
        let mut coeffs = vec![C64::new(0.0, 0.0); self.lattice.len()];
        for (m, x) in self.modes.iter().zip(coords) {
            for (i, w) in &m.entries {
                coeffs[*i] += w * *x;
            }
        }
        let mut f = Field::from_coeffs(self.lattice, coeffs, true).expect("matching size");
        f.enforce_hermitian();
        f
    }

    /// Basis function `j` as a field.
    pub fn field(&self, j: usize) -> Field {
        let mut coeffs = vec![C64::new(0.0, 0.0); self.lattice.len()];
        for (i, w) in &self.modes[j].entries {
            coeffs[*i] = *w;
        }
        Field::from_coeffs(self.lattice, coeffs, true).expect("matching size")
    }
}
