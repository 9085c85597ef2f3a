//! Cached 3-D complex FFTs and the sample-grid plumbing shared by all fields.
//!
//! A [`SpectralGrid`] couples the coefficient layout of a lattice with `n`
//! points per axis to a (possibly larger) sample grid of `m` points per axis.
//! With `m = 3n/2` pointwise products of two band-limited fields are exact
//! after truncation back to the lattice.

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

type C64 = Complex64;

struct Plan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

static PLANNER: Lazy<Mutex<FftPlanner<f64>>> = Lazy::new(|| Mutex::new(FftPlanner::new()));
static GRIDS: Lazy<Mutex<HashMap<(usize, usize), Arc<SpectralGrid>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(m: usize) -> Plan {
    let mut planner = PLANNER.lock().expect("fft planner poisoned");
    Plan {
        forward: planner.plan_fft_forward(m),
        inverse: planner.plan_fft_inverse(m),
    }
}

/// `dst[c][a][b] = src[a][b][c]` for a cube of side `m`.
fn rotate(src: &[C64], dst: &mut [C64], m: usize) {
    let m2 = m * m;
    for a in 0..m {
        for b in 0..m {
            let row = &src[a * m2 + b * m..a * m2 + b * m + m];
            let base = a * m + b;
            for (c, v) in row.iter().enumerate() {
                dst[c * m2 + base] = *v;
            }
        }
    }
}

/// Signed mode index for storage position `i` on an axis of `n` points.
#[inline]
pub(crate) fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Coefficient layout of an `n`-lattice embedded in an `m`-point sample grid.
pub struct SpectralGrid {
    n: usize,
    m: usize,
    plan: Plan,
    /// Sample-grid position of every retained lattice coefficient.
    embed: Vec<usize>,
    /// `(-1)^(mx+my+mz)`: the phase from centring the box at the origin.
    parity: Vec<f64>,
    /// Lattice positions that are retained (Nyquist rows dropped).
    retained: Vec<usize>,
}

impl SpectralGrid {
    /// Shared grid for lattice resolution `n` sampled on `m` points per axis.
    pub fn get(n: usize, m: usize) -> Arc<SpectralGrid> {
        let mut grids = GRIDS.lock().expect("grid cache poisoned");
        grids
            .entry((n, m))
            .or_insert_with(|| Arc::new(SpectralGrid::build(n, m)))
            .clone()
    }

    fn build(n: usize, m: usize) -> SpectralGrid {
        assert!(m >= n);
        let half = (n / 2) as i64;
        let mut embed = Vec::new();
        let mut parity = Vec::new();
        let mut retained = Vec::new();
        let wrap = |s: i64| -> usize { s.rem_euclid(m as i64) as usize };
        for ix in 0..n {
            let sx = signed_index(ix, n);
            for iy in 0..n {
                let sy = signed_index(iy, n);
                for iz in 0..n {
                    let sz = signed_index(iz, n);
                    if sx == -half || sy == -half || sz == -half {
                        continue;
                    }
                    retained.push((ix * n + iy) * n + iz);
                    embed.push((wrap(sx) * m + wrap(sy)) * m + wrap(sz));
                    parity.push(if (sx + sy + sz).rem_euclid(2) == 0 { 1.0 } else { -1.0 });
                }
            }
        }
        SpectralGrid {
            n,
            m,
            plan: plan(m),
            embed,
            parity,
            retained,
        }
    }

    pub fn sample_count(&self) -> usize {
        self.m * self.m * self.m
    }

    fn transform(&self, data: &mut [C64], fft: &Arc<dyn Fft<f64>>) {
        let m = self.m;
        let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut buf = vec![C64::new(0.0, 0.0); data.len()];
        fft.process_with_scratch(data, &mut scratch);
        rotate(data, &mut buf, m);
        fft.process_with_scratch(&mut buf, &mut scratch);
        rotate(&buf, data, m);
        fft.process_with_scratch(data, &mut scratch);
        rotate(data, &mut buf, m);
        data.copy_from_slice(&buf);
    }

    /// Samples `Σ_k c_k e^{ik·x} · scale` on the sample grid.
    pub fn synthesize(&self, coeffs: &[C64], scale: f64) -> Vec<C64> {
        debug_assert_eq!(coeffs.len(), self.n * self.n * self.n);
        let mut data = vec![C64::new(0.0, 0.0); self.sample_count()];
        for ((&src, &dst), &p) in self.retained.iter().zip(&self.embed).zip(&self.parity) {
            data[dst] = coeffs[src] * (p * scale);
        }
        self.transform(&mut data, &self.plan.inverse);
        data
    }

    /// Lattice coefficients of the samples, multiplied by `scale / m³`.
    /// Nyquist rows of the lattice come back as zero.
    pub fn analyze(&self, mut samples: Vec<C64>, scale: f64) -> Vec<C64> {
        debug_assert_eq!(samples.len(), self.sample_count());
        self.transform(&mut samples, &self.plan.forward);
        let norm = scale / self.sample_count() as f64;
        let mut out = vec![C64::new(0.0, 0.0); self.n * self.n * self.n];
        for ((&dst, &src), &p) in self.retained.iter().zip(&self.embed).zip(&self.parity) {
            out[dst] = samples[src] * (p * norm);
        }
        out
    }
}

/// Padded sample count per axis used for dealiased quadratic products.
pub fn dealiased_size(n: usize) -> usize {
    3 * n / 2
}
