//! Momentum lattice, Fourier fields and diagonal multipliers.
//!
//! Fields are stored as Fourier coefficients with the convention
//! `f(x) = Σ_k c_k e^{ik·x} / L^{3/2}` so that `‖f‖² = Σ |c_k|²`.
//! Coefficients sit in FFT order, row-major in `(x, y, z)`. The unpaired
//! Nyquist rows (index `-n/2` on any axis) are always zero.

use crate::error::{Error, Result};
use crate::fft::{dealiased_size, signed_index, SpectralGrid};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;
use std::sync::Arc;

pub type C64 = Complex64;
pub type Point = [f64; 3];

const ZERO: C64 = C64::new(0.0, 0.0);

/// The momenta `(2π/L) m`, `m ∈ [-n/2, n/2)³`, of a cubic FFT grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumLattice {
    side_length: f64,
    n: usize,
}

impl MomentumLattice {
    pub fn new(side_length: f64, n: usize) -> Result<Self> {
        if !(side_length.is_finite() && side_length > 0.0) {
            return Err(Error::InvalidLattice(format!(
                "side length must be positive, got {side_length}"
            )));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidLattice(format!(
                "grid size must be even and at least 4, got {n}"
            )));
        }
        Ok(MomentumLattice { side_length, n })
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored coefficients, `n³`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Mode spacing `2π/L`.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.side_length
    }

    /// `π n / L`, the largest admissible spherical cutoff.
    pub fn nyquist_radius(&self) -> f64 {
        PI * self.n as f64 / self.side_length
    }

    pub fn volume(&self) -> f64 {
        self.side_length.powi(3)
    }

    /// Signed integer mode of storage position `idx`.
    #[inline]
    pub fn mode(&self, idx: usize) -> [i64; 3] {
        let n = self.n;
        let iz = idx % n;
        let iy = (idx / n) % n;
        let ix = idx / (n * n);
        [signed_index(ix, n), signed_index(iy, n), signed_index(iz, n)]
    }

    /// Storage position of a signed mode, `None` if it is outside the grid
    /// or on a Nyquist row.
    #[inline]
    pub fn index(&self, m: [i64; 3]) -> Option<usize> {
        let half = (self.n / 2) as i64;
        let n = self.n as i64;
        let mut pos = 0usize;
        for c in m {
            if c <= -half || c >= half {
                return None;
            }
            pos = pos * self.n + c.rem_euclid(n) as usize;
        }
        Some(pos)
    }

    #[inline]
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = -((self.n / 2) as i64);
        self.mode(idx).iter().any(|&c| c == half)
    }

    #[inline]
    pub fn wavevector(&self, idx: usize) -> Point {
        let m = self.mode(idx);
        let s = self.spacing();
        [m[0] as f64 * s, m[1] as f64 * s, m[2] as f64 * s]
    }

    #[inline]
    pub fn k_squared(&self, idx: usize) -> f64 {
        let m = self.mode(idx);
        let s = self.spacing();
        ((m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64) * s * s
    }

    /// Storage position of `-k`.
    #[inline]
    pub fn negated(&self, idx: usize) -> Option<usize> {
        let m = self.mode(idx);
        self.index([-m[0], -m[1], -m[2]])
    }

    /// Retained modes with `|k| ≤ radius`, ordered by `|m|²` then position.
    pub fn ball(&self, radius: f64) -> Vec<usize> {
        let s = self.spacing();
        let lim = (radius / s).powi(2) * (1.0 + 1e-12);
        let mut out: Vec<(i64, usize)> = (0..self.len())
            .filter(|&i| !self.is_nyquist(i))
            .filter_map(|i| {
                let m = self.mode(i);
                let q = m[0] * m[0] + m[1] * m[1] + m[2] * m[2];
                ((q as f64) <= lim).then_some((q, i))
            })
            .collect();
        out.sort_unstable();
        out.into_iter().map(|(_, i)| i).collect()
    }

    /// Real-space grid point `x_j = L j / n - L/2`.
    pub fn grid_point(&self, j: [usize; 3]) -> Point {
        let h = self.side_length / self.n as f64;
        let c = self.side_length / 2.0;
        [j[0] as f64 * h - c, j[1] as f64 * h - c, j[2] as f64 * h - c]
    }

    /// Grid with `m` samples per axis tied to this lattice.
    pub(crate) fn sample_grid(&self, m: usize) -> Arc<SpectralGrid> {
        SpectralGrid::get(self.n, m)
    }

    pub(crate) fn dealiased_grid(&self) -> Arc<SpectralGrid> {
        self.sample_grid(dealiased_size(self.n))
    }
}

/// A function on the torus represented by its lattice coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    lattice: MomentumLattice,
    coeffs: Vec<C64>,
    real: bool,
}

impl Field {
    pub fn zeros(lattice: MomentumLattice) -> Field {
        Field {
            lattice,
            coeffs: vec![ZERO; lattice.len()],
            real: true,
        }
    }

    /// Builds a field from coefficients in storage order; Nyquist rows are
    /// cleared. `real` asserts the Hermitian symmetry `c_{-k} = conj(c_k)`.
    pub fn from_coeffs(lattice: MomentumLattice, mut coeffs: Vec<C64>, real: bool) -> Result<Field> {
        if coeffs.len() != lattice.len() {
            return Err(Error::InvalidLattice(format!(
                "expected {} coefficients, got {}",
                lattice.len(),
                coeffs.len()
            )));
        }
        for (i, c) in coeffs.iter_mut().enumerate() {
            if lattice.is_nyquist(i) {
                *c = ZERO;
            }
        }
        Ok(Field {
            lattice,
            coeffs,
            real,
        })
    }

    pub(crate) fn from_parts(lattice: MomentumLattice, coeffs: Vec<C64>, real: bool) -> Field {
        debug_assert_eq!(coeffs.len(), lattice.len());
        Field {
            lattice,
            coeffs,
            real,
        }
    }

    /// Field with the single coefficient `c_m = 1`.
    pub fn plane_wave(lattice: MomentumLattice, m: [i64; 3]) -> Result<Field> {
        let idx = lattice
            .index(m)
            .ok_or_else(|| Error::Domain(format!("mode {m:?} is not on the grid")))?;
        let mut f = Field::zeros(lattice);
        f.coeffs[idx] = C64::new(1.0, 0.0);
        f.real = m == [0, 0, 0];
        Ok(f)
    }

    /// Normalized constant function `L^{-3/2}`.
    pub fn constant(lattice: MomentumLattice) -> Field {
        let mut f = Field::zeros(lattice);
        f.coeffs[0] = C64::new(1.0, 0.0);
        f
    }

    /// Normalized periodic Gaussian of width `w` centred at `center`.
    pub fn gaussian(lattice: MomentumLattice, width: f64, center: Point) -> Field {
        let coeffs = (0..lattice.len())
            .map(|i| {
                if lattice.is_nyquist(i) {
                    return ZERO;
                }
                let k = lattice.wavevector(i);
                let phase = -(k[0] * center[0] + k[1] * center[1] + k[2] * center[2]);
                C64::from_polar((-0.25 * width * width * lattice.k_squared(i)).exp(), phase)
            })
            .collect();
        let mut f = Field::from_parts(lattice, coeffs, true);
        f.normalize().expect("gaussian has positive norm");
        f
    }

    /// Random real field whose coefficients have standard deviation
    /// `envelope(|k|)` (zero where the envelope is zero).
    pub fn random_real<R: Rng + ?Sized>(
        lattice: MomentumLattice,
        rng: &mut R,
        envelope: impl Fn(f64) -> f64,
    ) -> Field {
        let mut coeffs = vec![ZERO; lattice.len()];
        for i in 0..lattice.len() {
            if lattice.is_nyquist(i) {
                continue;
            }
            let j = lattice.negated(i).expect("non-Nyquist mode has a partner");
            if j < i {
                continue;
            }
            let a = envelope(lattice.k_squared(i).sqrt());
            if a == 0.0 {
                continue;
            }
            if j == i {
                coeffs[i] = C64::new(a * gauss(rng), 0.0);
            } else {
                let c = C64::new(gauss(rng), gauss(rng)) * (a / 2f64.sqrt());
                coeffs[i] = c;
                coeffs[j] = c.conj();
            }
        }
        Field::from_parts(lattice, coeffs, true)
    }

    /// Random complex field with i.i.d. Gaussian coefficients.
    pub fn random_complex<R: Rng + ?Sized>(
        lattice: MomentumLattice,
        rng: &mut R,
        envelope: impl Fn(f64) -> f64,
    ) -> Field {
        let coeffs = (0..lattice.len())
            .map(|i| {
                if lattice.is_nyquist(i) {
                    ZERO
                } else {
                    let a = envelope(lattice.k_squared(i).sqrt());
                    C64::new(gauss(rng), gauss(rng)) * (a / 2f64.sqrt())
                }
            })
            .collect();
        Field::from_parts(lattice, coeffs, false)
    }

    /// Field sampled on the `n³` grid; Nyquist content is discarded.
    pub fn from_samples(lattice: MomentumLattice, samples: &[C64]) -> Result<Field> {
        if samples.len() != lattice.len() {
            return Err(Error::InvalidLattice("sample count does not match grid".into()));
        }
        let grid = lattice.sample_grid(lattice.n());
        let coeffs = grid.analyze(samples.to_vec(), lattice.volume().sqrt());
        Ok(Field::from_parts(lattice, coeffs, false))
    }

    pub fn from_real_samples(lattice: MomentumLattice, samples: &[f64]) -> Result<Field> {
        let cs: Vec<C64> = samples.iter().map(|&v| C64::new(v, 0.0)).collect();
        let mut f = Field::from_samples(lattice, &cs)?;
        f.real = true;
        f.enforce_hermitian();
        Ok(f)
    }

    pub fn lattice(&self) -> &MomentumLattice {
        &self.lattice
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub(crate) fn set_real(&mut self, real: bool) {
        self.real = real;
    }

    /// Coefficient of a signed mode (zero off the grid).
    pub fn coefficient(&self, m: [i64; 3]) -> C64 {
        self.lattice.index(m).map_or(ZERO, |i| self.coeffs[i])
    }

    /// Largest `|c_{-k} - conj(c_k)|` relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.lattice.len() {
            if let Some(j) = self.lattice.negated(i) {
                worst = worst.max((self.coeffs[j] - self.coeffs[i].conj()).norm());
            }
        }
        worst / scale
    }

    /// Replaces the coefficients by their Hermitian-symmetric part and marks
    /// the field real.
    pub fn enforce_hermitian(&mut self) {
        for i in 0..self.lattice.len() {
            if let Some(j) = self.lattice.negated(i) {
                if j > i {
                    let a = 0.5 * (self.coeffs[i] + self.coeffs[j].conj());
                    self.coeffs[i] = a;
                    self.coeffs[j] = a.conj();
                } else if j == i {
                    self.coeffs[i].im = 0.0;
                }
            }
        }
        self.real = true;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self, other⟩ = Σ conj(a_k) b_k`.
    pub fn inner(&self, other: &Field) -> Result<C64> {
        self.check(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Real part of the inner product, the natural pairing for real fields.
    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.check(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum())
    }

    pub(crate) fn check(&self, other: &Field) -> Result<()> {
        if self.lattice == other.lattice {
            Ok(())
        } else {
            Err(Error::LatticeMismatch)
        }
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let nrm = self.norm();
        if !(nrm > 0.0) {
            return Err(Error::ZeroField);
        }
        self.scale_mut(1.0 / nrm);
        Ok(nrm)
    }

    pub fn normalized(&self) -> Result<Field> {
        let mut f = self.clone();
        f.normalize()?;
        Ok(f)
    }

    pub fn scale_mut(&mut self, a: f64) {
        for c in &mut self.coeffs {
            *c *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> Field {
        let mut f = self.clone();
        f.scale_mut(a);
        f
    }

    /// Multiplication by a complex constant; drops the real flag unless the
    /// constant is real.
    pub fn scaled_complex(&self, a: C64) -> Field {
        let coeffs = self.coeffs.iter().map(|c| c * a).collect();
        Field::from_parts(self.lattice, coeffs, self.real && a.im == 0.0)
    }

    /// `self += a · x`.
    pub fn axpy(&mut self, a: f64, x: &Field) -> Result<()> {
        self.check(x)?;
        for (c, d) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *c += d * a;
        }
        self.real &= x.real;
        Ok(())
    }

    pub fn axpy_complex(&mut self, a: C64, x: &Field) -> Result<()> {
        self.check(x)?;
        for (c, d) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *c += d * a;
        }
        self.real &= x.real && a.im == 0.0;
        Ok(())
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.check(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| x * a + y * b)
            .collect();
        Ok(Field::from_parts(self.lattice, coeffs, self.real && other.real))
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.combine(1.0, other, -1.0)
    }

    /// Field with all modes of `|k| > radius` removed.
    pub fn band_limited(&self, radius: f64) -> Field {
        let lim = radius * radius * (1.0 + 1e-12);
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| if self.lattice.k_squared(i) <= lim { c } else { ZERO })
            .collect();
        Field::from_parts(self.lattice, coeffs, self.real)
    }

    /// Partial derivative along `axis`, multiplier `i k_axis`.
    pub fn derivative(&self, axis: usize) -> Field {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * C64::new(0.0, self.lattice.wavevector(i)[axis]))
            .collect();
        Field::from_parts(self.lattice, coeffs, self.real)
    }

    /// Samples on the `n³` grid, `x_j = L j / n - L/2`.
    pub fn to_real_space(&self) -> Vec<C64> {
        let grid = self.lattice.sample_grid(self.lattice.n());
        grid.synthesize(&self.coeffs, self.lattice.volume().sqrt().recip())
    }

    /// Real parts of the grid samples.
    pub fn real_samples(&self) -> Vec<f64> {
        self.to_real_space().into_iter().map(|c| c.re).collect()
    }

    /// Samples on the dealiasing grid (`3n/2` points per axis).
    pub(crate) fn padded_samples(&self) -> Vec<C64> {
        let grid = self.lattice.dealiased_grid();
        grid.synthesize(&self.coeffs, self.lattice.volume().sqrt().recip())
    }

    pub(crate) fn from_padded_samples(lattice: MomentumLattice, samples: Vec<C64>, real: bool) -> Field {
        let grid = lattice.dealiased_grid();
        let coeffs = grid.analyze(samples, lattice.volume().sqrt());
        let mut f = Field::from_parts(lattice, coeffs, real);
        if real {
            f.enforce_hermitian();
        }
        f
    }

    /// Dealiased pointwise product `self · other`.
    pub fn product(&self, other: &Field) -> Result<Field> {
        self.check(other)?;
        let a = self.padded_samples();
        let b = other.padded_samples();
        let prod = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Ok(Field::from_padded_samples(
            self.lattice,
            prod,
            self.real && other.real,
        ))
    }

    /// Dealiased pointwise product `conj(self) · other`.
    pub fn conj_product(&self, other: &Field) -> Result<Field> {
        self.check(other)?;
        let a = self.padded_samples();
        let b = other.padded_samples();
        let prod = a.iter().zip(&b).map(|(x, y)| x.conj() * y).collect();
        Ok(Field::from_padded_samples(
            self.lattice,
            prod,
            self.real && other.real,
        ))
    }
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller; rand's normal distribution lives in a separate crate.
    loop {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        if u > 1e-300 {
            return (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos();
        }
    }
}

/// How a multiplier treats the zero mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroMode {
    /// The zero mode is dropped from the output.
    Excluded,
    /// The zero mode is scaled by the given weight.
    Value(f64),
}

/// A diagonal Fourier multiplier `c_k ↦ m(k) c_k`.
#[derive(Clone)]
pub struct Multiplier {
    weight: Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>,
    zero: ZeroMode,
    even: bool,
}

impl std::fmt::Debug for Multiplier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Multiplier")
            .field("zero", &self.zero)
            .field("even", &self.even)
            .finish()
    }
}

impl Multiplier {
    /// General multiplier; `even` declares `m(-k) = m(k)`.
    pub fn new(weight: impl Fn(Point) -> f64 + Send + Sync + 'static, zero: ZeroMode, even: bool) -> Self {
        Multiplier {
            weight: Arc::new(move |k, _| weight(k)),
            zero,
            even,
        }
    }

    /// Radial multiplier given as a function of `|k|`.
    pub fn radial(weight: impl Fn(f64) -> f64 + Send + Sync + 'static, zero: ZeroMode) -> Self {
        Multiplier {
            weight: Arc::new(move |_, k| weight(k)),
            zero,
            even: true,
        }
    }

    pub fn identity() -> Self {
        Multiplier::radial(|_| 1.0, ZeroMode::Value(1.0))
    }

    /// `(-Δ)^s`; the zero mode is excluded for `s < 0` and weighted by
    /// `0^s` otherwise.
    pub fn laplacian_power(s: f64) -> Self {
        let zero = if s < 0.0 {
            ZeroMode::Excluded
        } else if s == 0.0 {
            ZeroMode::Value(1.0)
        } else {
            ZeroMode::Value(0.0)
        };
        Multiplier::radial(move |k| k.powf(2.0 * s), zero)
    }

    /// `(-Δ + shift)^s`.
    pub fn shifted_laplacian_power(shift: f64, s: f64) -> Self {
        Multiplier::radial(move |k| (k * k + shift).powf(s), ZeroMode::Value(shift.powf(s)))
    }

    /// `W_T(k) = 1` for `|k| ≤ T`, `(|k|² + 1)^{-1}` otherwise.
    pub fn weight_wt(t: f64) -> Self {
        Multiplier::radial(move |k| wt_weight(k, t), ZeroMode::Value(1.0))
    }

    /// `B(k) = 1 - (1 + κ′|k|)^{-1}` with `B(0) = 1`.
    pub fn outer_b(kappa: f64) -> Self {
        Multiplier::radial(move |k| b_weight(k, kappa), ZeroMode::Value(1.0))
    }

    /// Indicator of the ball `|k| ≤ radius`.
    pub fn ball(radius: f64) -> Self {
        let lim = radius * (1.0 + 1e-12);
        Multiplier::radial(move |k| if k <= lim { 1.0 } else { 0.0 }, ZeroMode::Value(1.0))
    }

    pub fn zero_mode(&self) -> ZeroMode {
        self.zero
    }

    pub fn is_even(&self) -> bool {
        self.even
    }

    /// Weight at momentum `k`; `None` at `k = 0` when excluded.
    pub fn weight(&self, k: Point) -> Option<f64> {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 == 0.0 {
            match self.zero {
                ZeroMode::Excluded => None,
                ZeroMode::Value(v) => Some(v),
            }
        } else {
            Some((self.weight)(k, k2.sqrt()))
        }
    }

    /// Product multiplier (apply `self`, then `other`).
    pub fn then(&self, other: &Multiplier) -> Multiplier {
        let a = self.weight.clone();
        let b = other.weight.clone();
        let zero = match (self.zero, other.zero) {
            (ZeroMode::Value(x), ZeroMode::Value(y)) => ZeroMode::Value(x * y),
            _ => ZeroMode::Excluded,
        };
        Multiplier {
            weight: Arc::new(move |k, r| a(k, r) * b(k, r)),
            zero,
            even: self.even && other.even,
        }
    }

    /// Weights for every storage position of `lat` (zero on excluded or
    /// Nyquist modes).
    pub fn table(&self, lat: &MomentumLattice) -> Result<Vec<f64>> {
        (0..lat.len())
            .map(|i| {
                if lat.is_nyquist(i) {
                    return Ok(0.0);
                }
                match self.weight(lat.wavevector(i)) {
                    None => Ok(0.0),
                    Some(w) if w.is_finite() => Ok(w),
                    Some(_) => Err(Error::NonFiniteMultiplier { mode: lat.mode(i) }),
                }
            })
            .collect()
    }
}

#[inline]
pub(crate) fn wt_weight(k: f64, t: f64) -> f64 {
    if k <= t {
        1.0
    } else {
        1.0 / (k * k + 1.0)
    }
}

#[inline]
pub(crate) fn b_weight(k: f64, kappa: f64) -> f64 {
    if k == 0.0 {
        1.0
    } else {
        1.0 - 1.0 / (1.0 + kappa * k)
    }
}

/// `c′_k = m(k) c_k`.
pub fn apply_multiplier(f: &Field, m: &Multiplier) -> Result<Field> {
    let table = m.table(f.lattice())?;
    Ok(apply_table(f, &table, m.is_even()))
}

pub(crate) fn apply_table(f: &Field, table: &[f64], even: bool) -> Field {
    let coeffs = f.coeffs().iter().zip(table).map(|(c, w)| c * *w).collect();
    Field::from_parts(*f.lattice(), coeffs, f.is_real() && even)
}

/// Real-space samples on the `n³` grid.
pub fn to_real_space(f: &Field) -> Vec<C64> {
    f.to_real_space()
}

/// Inverse of [`to_real_space`] on Nyquist-free content.
pub fn to_fourier(lat: MomentumLattice, samples: &[C64]) -> Result<Field> {
    Field::from_samples(lat, samples)
}

/// `f^y(x) = f(x - y)`, i.e. `c′_k = e^{-ik·y} c_k`.
pub fn translate(f: &Field, y: Point) -> Field {
    let lat = *f.lattice();
    let n = lat.n();
    let s = lat.spacing();
    let axis_phase = |a: usize| -> Vec<C64> {
        (0..n)
            .map(|i| C64::from_polar(1.0, -(signed_index(i, n) as f64) * s * y[a]))
            .collect()
    };
    let (px, py, pz) = (axis_phase(0), axis_phase(1), axis_phase(2));
    let mut coeffs = f.coeffs().to_vec();
    for ix in 0..n {
        for iy in 0..n {
            let pxy = px[ix] * py[iy];
            let base = (ix * n + iy) * n;
            for iz in 0..n {
                coeffs[base + iz] *= pxy * pz[iz];
            }
        }
    }
    Field::from_parts(lat, coeffs, f.is_real())
}

/// `Σ_k W_T(k) conj(f_k) g_k` (real part).
pub fn wt_inner(f: &Field, g: &Field, t: f64) -> Result<f64> {
    f.check(g)?;
    let lat = f.lattice();
    Ok(f
        .coeffs()
        .iter()
        .zip(g.coeffs())
        .enumerate()
        .map(|(i, (a, b))| {
            let w = wt_weight(lat.k_squared(i).sqrt(), t);
            w * (a.re * b.re + a.im * b.im)
        })
        .sum())
}

pub fn wt_norm(f: &Field, t: f64) -> f64 {
    wt_inner(f, f, t).expect("same lattice").max(0.0).sqrt()
}

/// Ultraviolet-truncated coupling `v_{L,Λ}` together with its complement
/// `w_{L,Λ} = v_L - v_{L,Λ}` inside the grid.
#[derive(Debug, Clone)]
pub struct Coupling {
    pub truncated: Field,
    pub complement: Field,
}

/// The coupling function with coefficients `L^{-3/2}/|k|` on `0 < |k| < Λ`.
/// `None` means the full grid-truncated coupling.
pub fn coupling_field(lat: MomentumLattice, cutoff: Option<f64>) -> Result<Coupling> {
    if let Some(c) = cutoff {
        if c > lat.nyquist_radius() {
            return Err(Error::CutoffTooLarge {
                cutoff: c,
                nyquist: lat.nyquist_radius(),
            });
        }
    }
    let amp = lat.volume().sqrt().recip();
    let mut inside = vec![ZERO; lat.len()];
    let mut outside = vec![ZERO; lat.len()];
    for i in 0..lat.len() {
        if lat.is_nyquist(i) || i == 0 {
            continue;
        }
        let k = lat.k_squared(i).sqrt();
        let v = C64::new(amp / k, 0.0);
        match cutoff {
            Some(c) if k >= c => outside[i] = v,
            _ => inside[i] = v,
        }
    }
    Ok(Coupling {
        truncated: Field::from_parts(lat, inside, true),
        complement: Field::from_parts(lat, outside, true),
    })
}
