//! The Schrödinger operator `h_φ = -Δ + V_φ`: application, ground state and
//! the resolvent `(h_φ - e)^{-1}` on the orthogonal complement of the
//! ground state.

use crate::eigen::{lobpcg, EigenOptions};
use crate::error::{Error, Result};
use crate::fft::SpectralGrid;
use crate::functionals::potential;
use crate::lattice::{Field, MomentumLattice, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const EIGEN_MAX_ITER: usize = 10_000;
pub const RESOLVENT_MAX_ITER: usize = 50_000;
pub const BLOCK_SIZE: usize = 4;
const DEFAULT_SEED: u64 = 0x5eed_9e4a;

/// `-Δ + V` with `V` cached on the dealiasing grid.
#[derive(Clone)]
pub struct Hamiltonian {
    lattice: MomentumLattice,
    kinetic: Vec<f64>,
    potential: Vec<f64>,
    grid: Arc<SpectralGrid>,
    vmax: f64,
}

impl Hamiltonian {
    /// `h_φ` for a real field `φ`.
    pub fn new(phi: &Field) -> Result<Hamiltonian> {
        Ok(Hamiltonian::with_potential(&potential(phi)?))
    }

    /// `-Δ + V` for an explicit real potential `V`.
    pub fn with_potential(v: &Field) -> Hamiltonian {
        let lattice = *v.lattice();
        let kinetic = (0..lattice.len())
            .map(|i| if lattice.is_nyquist(i) { 0.0 } else { lattice.k_squared(i) })
            .collect();
        let potential: Vec<f64> = v.padded_samples().into_iter().map(|c| c.re).collect();
        let vmax = potential.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Hamiltonian {
            lattice,
            kinetic,
            grid: lattice.dealiased_grid(),
            potential,
            vmax,
        }
    }

    pub fn lattice(&self) -> &MomentumLattice {
        &self.lattice
    }

    pub fn potential_max(&self) -> f64 {
        self.vmax
    }

    /// Galerkin product `P(V f)`.
    pub fn potential_times(&self, f: &Field) -> Field {
        let vol = self.lattice.volume().sqrt();
        let mut s = self.grid.synthesize(f.coeffs(), 1.0 / vol);
        for (x, v) in s.iter_mut().zip(&self.potential) {
            *x *= *v;
        }
        let mut out = Field::from_parts(self.lattice, self.grid.analyze(s, vol), f.is_real());
        if out.is_real() {
            out.enforce_hermitian();
        }
        out
    }

    pub fn apply(&self, f: &Field) -> Field {
        let mut out = self.potential_times(f);
        for ((o, c), k2) in out.coeffs_mut().iter_mut().zip(f.coeffs()).zip(&self.kinetic) {
            *o += c * *k2;
        }
        out
    }

    /// `(-Δ + shift)^{-1}`.
    pub fn precondition(&self, f: &Field, shift: f64) -> Field {
        let coeffs = f
            .coeffs()
            .iter()
            .zip(&self.kinetic)
            .map(|(c, k2)| c / (k2 + shift))
            .collect();
        Field::from_parts(self.lattice, coeffs, f.is_real())
    }

    /// Shift for `(-Δ + s)^{-1}` approximating `(h - λ)^{-1}` away from the
    /// potential well.
    pub fn preconditioner_shift(&self, lambda: f64) -> f64 {
        let floor = 0.25 * self.lattice.spacing().powi(2);
        (self.vmax - lambda).max(floor)
    }
}

/// `h_φ ψ`.
pub fn apply_h(phi: &Field, psi: &Field) -> Result<Field> {
    phi.check(psi)?;
    Ok(Hamiltonian::new(phi)?.apply(psi))
}

/// Lowest eigenpair of `h_φ` together with the next Ritz value.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub psi: Field,
    pub residual: f64,
    pub iterations: usize,
    /// Next Ritz value of the block; `second - energy` estimates the gap.
    pub second: f64,
    /// Lowest Ritz value per iteration (non-increasing).
    pub history: Vec<f64>,
    /// Remaining Ritz vectors of the block, for warm restarts.
    pub excited: Vec<Field>,
}

impl GroundState {
    pub fn gap(&self) -> f64 {
        self.second - self.energy
    }
}

#[derive(Debug, Clone)]
pub struct GroundStateOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub block: usize,
    pub seed: u64,
    /// Optional starting vector for the lowest member of the block.
    pub guess: Option<Field>,
    /// Further starting vectors (warm start of the excited members).
    pub extra: Vec<Field>,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions {
            tol: DEFAULT_TOL,
            max_iter: EIGEN_MAX_ITER,
            block: BLOCK_SIZE,
            seed: DEFAULT_SEED,
            guess: None,
            extra: Vec::new(),
        }
    }
}

/// Fixes the global phase so that the mean (zero mode) is real positive.
pub(crate) fn fix_phase(psi: &mut Field) {
    let lat = *psi.lattice();
    let c0 = psi.coeffs()[0];
    let anchor = if c0.norm() > 1e-300 {
        c0
    } else {
        // No mean: fall back to the largest coefficient.
        *psi.coeffs()
            .iter()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .expect("non-empty")
    };
    if anchor.norm() == 0.0 {
        return;
    }
    let rot = anchor.conj() / anchor.norm();
    let real = psi.is_real() && rot.im.abs() < 1e-12;
    let coeffs: Vec<C64> = psi.coeffs().iter().map(|c| c * rot).collect();
    *psi = Field::from_parts(lat, coeffs, real || psi.is_real());
    if psi.is_real() {
        // Rotating a real function by ±1 keeps it real; clean roundoff.
        psi.enforce_hermitian();
    }
}

/// Smooth random start vectors, deterministic in the seed.
pub(crate) fn random_block(lat: MomentumLattice, count: usize, seed: u64) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 4.0 * lat.spacing();
    (0..count)
        .map(|_| Field::random_real(lat, &mut rng, |k| (-(k / scale).powi(2)).exp()))
        .collect()
}

/// Ground state of an already assembled Hamiltonian.
pub fn ground_state_of(h: &Hamiltonian, opts: &GroundStateOptions) -> Result<GroundState> {
    let lat = *h.lattice();
    let mut start = Vec::with_capacity(opts.block);
    start.push(opts.guess.clone().unwrap_or_else(|| Field::constant(lat)));
    for v in opts.extra.iter().take(opts.block.saturating_sub(1)) {
        start.push(v.clone());
    }
    let missing = opts.block.saturating_sub(start.len());
    start.extend(random_block(lat, missing, opts.seed));
    let lambda0 = {
        let g = &start[0];
        g.dot(&h.apply(g))? / g.norm_sqr()
    };
    let shift = h.preconditioner_shift(lambda0);
    let res = lobpcg(
        &|f| h.apply(f),
        &|f| h.precondition(f, shift),
        start,
        &[],
        &EigenOptions {
            tol: opts.tol,
            max_iter: opts.max_iter,
            converge_count: 1,
        },
    )?;
    let mut vectors = res.vectors;
    let excited = vectors.split_off(1);
    let mut psi = vectors.pop().expect("block has a ground vector");
    psi.normalize()?;
    fix_phase(&mut psi);
    Ok(GroundState {
        energy: res.values[0],
        second: res.values.get(1).copied().unwrap_or(f64::INFINITY),
        psi,
        residual: res.residuals[0],
        iterations: res.iterations,
        history: res.history,
        excited,
    })
}

/// Ground state of `h_φ` with default options.
pub fn ground_state(phi: &Field, tol: f64) -> Result<GroundState> {
    let h = Hamiltonian::new(phi)?;
    ground_state_of(
        &h,
        &GroundStateOptions {
            tol,
            ..Default::default()
        },
    )
}

/// Solver for `(h - e) u = Q_ψ r`, `u ⊥ ψ`.
pub struct ProjectedResolvent<'a> {
    h: &'a Hamiltonian,
    psi: &'a Field,
    energy: f64,
    shift: f64,
    gap: f64,
}

impl<'a> ProjectedResolvent<'a> {
    pub fn new(h: &'a Hamiltonian, gs: &'a GroundState) -> Self {
        let shift = h.preconditioner_shift(gs.energy);
        ProjectedResolvent {
            h,
            psi: &gs.psi,
            energy: gs.energy,
            shift,
            gap: gs.gap(),
        }
    }

    fn project(&self, f: &mut Field) {
        let c = self.psi.inner(f).expect("same lattice");
        f.axpy_complex(-c, self.psi).expect("same lattice");
    }

    fn operator(&self, f: &Field) -> Field {
        let mut out = self.h.apply(f);
        out.axpy(-self.energy, f).expect("same lattice");
        self.project(&mut out);
        out
    }

    /// Preconditioned conjugate gradients on `ψ⊥`. Returns the solution and
    /// the number of iterations.
    pub fn solve(&self, rhs: &Field, tol: f64) -> Result<(Field, usize)> {
        self.psi.check(rhs)?;
        let mut b = rhs.clone();
        self.project(&mut b);
        let mut x = Field::zeros(*rhs.lattice());
        x.set_real(rhs.is_real());
        let mut r = b;
        if r.norm() <= tol {
            return Ok((x, 0));
        }
        let precond = |f: &Field| {
            let mut z = self.h.precondition(f, self.shift);
            self.project(&mut z);
            z
        };
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz = r.inner(&z)?.re;
        for it in 1..=RESOLVENT_MAX_ITER {
            let ap = self.operator(&p);
            let pap = p.inner(&ap)?.re;
            if !(pap > 0.0) {
                return Err(Error::Resolvent {
                    column: 0,
                    residual: r.norm(),
                    gap: self.gap,
                });
            }
            let alpha = rz / pap;
            x.axpy(alpha, &p)?;
            r.axpy(-alpha, &ap)?;
            if r.norm() <= tol {
                // Re-verify against the true residual.
                let mut b = rhs.clone();
                self.project(&mut b);
                let true_res = self.operator(&x).sub(&b)?.norm();
                if true_res <= tol {
                    self.project(&mut x);
                    return Ok((x, it));
                }
                r = b.sub(&self.operator(&x))?;
            }
            z = precond(&r);
            let rz_new = r.inner(&z)?.re;
            let beta = rz_new / rz;
            rz = rz_new;
            p = z.combine(1.0, &p, beta)?;
        }
        Err(Error::Resolvent {
            column: 0,
            residual: r.norm(),
            gap: self.gap,
        })
    }
}

/// `u ⊥ ψ` with `(h_φ - e) u = Q_ψ rhs`.
pub fn projected_resolvent(phi: &Field, gs: &GroundState, rhs: &Field, tol: f64) -> Result<Field> {
    let h = Hamiltonian::new(phi)?;
    Ok(ProjectedResolvent::new(&h, gs).solve(rhs, tol)?.0)
}
