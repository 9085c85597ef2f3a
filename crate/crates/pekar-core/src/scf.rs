//! Alternating minimization of `G_L(ψ, φ)`: `φ ← σ_ψ`, `ψ ← ground state
//! of h_φ`, until the Euler–Lagrange residual of `E_L` vanishes.

use crate::error::{Error, Result};
use crate::functionals::{density, energy_e, potential, sigma, EnergyBreakdown};
use crate::io::{load_field, save_field};
use crate::lattice::{translate, Field, MomentumLattice, Point, C64};
use crate::orbit::correlation_peak;
use crate::schroedinger::{fix_phase, ground_state_of, GroundState, GroundStateOptions, Hamiltonian};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Energy above which a converged state is not counted as localized.
const CONSTANT_ENERGY: f64 = -1e-9;
/// Distance from the constant below which a state is the constant one.
const CONSTANT_DISTANCE: f64 = 1e-6;
/// Slack for the monotonicity test on `G`.
const RISE_SLACK: f64 = 1e-13;
const MIN_DAMPING: f64 = 1.0 / 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    ConstantMinimizer,
    LocalizedMinimizer,
}

/// Starting point of the iteration.
#[derive(Debug, Clone)]
pub enum Init {
    Constant,
    /// Periodic Gaussian of the given width and centre.
    Gaussian { width: f64, center: Point },
    /// Explicit normalized field.
    Field(Field),
}

impl Init {
    /// Normalized Gaussian of width `L/8` at the origin.
    pub fn default_bump(lat: &MomentumLattice) -> Init {
        Init::Gaussian {
            width: lat.side_length() / 8.0,
            center: [0.0; 3],
        }
    }

    fn field(&self, lat: MomentumLattice) -> Result<Field> {
        match self {
            Init::Constant => Ok(Field::constant(lat)),
            Init::Gaussian { width, center } => {
                if !(*width > 0.0) {
                    return Err(Error::Domain(format!("gaussian width {width} must be positive")));
                }
                Ok(Field::gaussian(lat, *width, *center))
            }
            Init::Field(f) => {
                if f.lattice() != &lat {
                    return Err(Error::LatticeMismatch);
                }
                f.normalized()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScfOptions {
    /// Target for the Euler–Lagrange residual.
    pub tol: f64,
    pub max_outer: usize,
    /// Residual tolerance of the inner eigensolves.
    pub eigen_tol: f64,
    pub seed: u64,
}

impl Default for ScfOptions {
    fn default() -> Self {
        ScfOptions {
            tol: 1e-9,
            max_outer: 500,
            eigen_tol: 1e-11,
            seed: GroundStateOptions::default().seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PekarSolution {
    pub psi: Field,
    /// `σ_ψ` of the returned `ψ`.
    pub phi: Field,
    pub e_l: f64,
    /// `T - 2W`.
    pub mu: f64,
    /// `⟨ψ, h_φ ψ⟩`, the eigensolver's estimate of `μ`.
    pub mu_rayleigh: f64,
    /// `‖(-Δ + V_{σ_ψ} - μ)ψ‖`.
    pub el_residual: f64,
    pub regime: Regime,
    /// `E_L` after each accepted step.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub energies: EnergyBreakdown,
    /// Estimated spectral gap of `h_φ` above its ground state.
    pub gap: f64,
}

impl PekarSolution {
    pub fn lattice(&self) -> &MomentumLattice {
        self.psi.lattice()
    }

    /// `h_{φ_L}` for this solution.
    pub fn hamiltonian(&self) -> Hamiltonian {
        Hamiltonian::new(&self.phi).expect("φ_L is real")
    }

    /// The ground state of `h_{φ_L}` as seen by resolvent solves: `ψ_L` with
    /// eigenvalue `μ`.
    pub fn ground_state(&self) -> GroundState {
        GroundState {
            energy: self.mu_rayleigh,
            psi: self.psi.clone(),
            residual: self.el_residual,
            iterations: 0,
            second: self.mu_rayleigh + self.gap,
            history: Vec::new(),
            excited: Vec::new(),
        }
    }

    /// Writes `psi.pekr`, `phi.pekr` and `manifest.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        save_field(&dir.join("psi.pekr"), &self.psi)?;
        save_field(&dir.join("phi.pekr"), &self.phi)?;
        let manifest = SolutionManifest {
            side_length: self.lattice().side_length(),
            n: self.lattice().n(),
            e_l: self.e_l,
            mu: self.mu,
            residual: self.el_residual,
            regime: self.regime,
            iterations: self.iterations,
            gap: self.gap,
        };
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    /// Reloads a solution written by [`PekarSolution::save`]; derived
    /// quantities are recomputed from `ψ`.
    pub fn load(dir: &Path) -> Result<PekarSolution> {
        let manifest: SolutionManifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let psi = load_field(&dir.join("psi.pekr"))?;
        let lat = *psi.lattice();
        if lat.n() != manifest.n || (lat.side_length() - manifest.side_length).abs() > 1e-12 * manifest.side_length {
            return Err(Error::Format("manifest does not match psi.pekr".into()));
        }
        let mut sol = finish(psi, Vec::new(), manifest.iterations, manifest.gap)?;
        sol.regime = manifest.regime;
        Ok(sol)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SolutionManifest {
    #[serde(rename = "L")]
    side_length: f64,
    n: usize,
    e_l: f64,
    mu: f64,
    residual: f64,
    regime: Regime,
    iterations: usize,
    gap: f64,
}

/// `‖(-Δ + V_{σ_ψ} - μ)ψ‖` together with `μ = T - 2W` and `⟨ψ, h ψ⟩`.
pub fn euler_lagrange_residual(psi: &Field) -> Result<(f64, f64, f64)> {
    let e = energy_e(psi)?;
    let psi = psi.normalized()?;
    let h = Hamiltonian::new(&sigma(&psi))?;
    let hpsi = h.apply(&psi);
    let rayleigh = psi.dot(&hpsi)?;
    let res = hpsi.combine(1.0, &psi, -e.chemical_potential)?.norm();
    Ok((res, e.chemical_potential, rayleigh))
}

fn g_value(psi: &Field, phi: &Field, kinetic: f64) -> Result<f64> {
    let v = potential(phi)?;
    Ok(kinetic + v.dot(&density(psi))? + phi.norm_sqr())
}

fn finish(psi: Field, history: Vec<f64>, iterations: usize, gap: f64) -> Result<PekarSolution> {
    let phi = sigma(&psi);
    let energies = energy_e(&psi)?;
    let (el_residual, mu, mu_rayleigh) = euler_lagrange_residual(&psi)?;
    let regime = regime_of(&psi, energies.total);
    Ok(PekarSolution {
        psi,
        phi,
        e_l: energies.total,
        mu,
        mu_rayleigh,
        el_residual,
        regime,
        history,
        iterations,
        energies,
        gap,
    })
}

fn regime_of(psi: &Field, e: f64) -> Regime {
    let dist = psi.sub(&Field::constant(*psi.lattice())).expect("same lattice").norm();
    if e > CONSTANT_ENERGY && dist < CONSTANT_DISTANCE {
        Regime::ConstantMinimizer
    } else {
        Regime::LocalizedMinimizer
    }
}

/// Minimizes the Pekar functional on `lat` starting from `init`.
///
/// A critical point with `E_L > 0` is not a minimizer: the constant state,
/// with energy zero, is returned instead.
pub fn minimize_pekar(lat: MomentumLattice, init: &Init, opts: &ScfOptions) -> Result<PekarSolution> {
    let mut psi = init.field(lat)?;
    fix_phase(&mut psi);
    let mut phi = sigma(&psi);
    let mut g = energy_e(&psi)?.total;
    let mut history = vec![g];
    let mut excited: Vec<Field> = Vec::new();
    let mut beta = 1.0;
    let mut last_res = f64::INFINITY;

    for it in 1..=opts.max_outer {
        let h = Hamiltonian::new(&phi)?;
        let gs = ground_state_of(
            &h,
            &GroundStateOptions {
                tol: opts.eigen_tol,
                seed: opts.seed,
                guess: Some(psi.clone()),
                extra: std::mem::take(&mut excited),
                ..Default::default()
            },
        )?;
        let gap = gs.gap();
        let kinetic = crate::functionals::kinetic(&gs.psi);
        let target = sigma(&gs.psi);
        // φ-step with damping; G(ψ, ·) is a convex quadratic minimized at σ_ψ.
        let (new_phi, new_g) = loop {
            let cand = if beta == 1.0 {
                target.clone()
            } else {
                phi.combine(1.0 - beta, &target, beta)?
            };
            let gc = g_value(&gs.psi, &cand, kinetic)?;
            if gc <= g + RISE_SLACK * g.abs().max(1e-300) || beta <= MIN_DAMPING {
                break (cand, gc);
            }
            beta *= 0.5;
        };
        psi = gs.psi;
        phi = new_phi;
        g = new_g;
        excited = gs.excited;
        history.push(g);

        let (res, _, _) = euler_lagrange_residual(&psi)?;
        last_res = res;
        let consistent = beta == 1.0 || phi.sub(&sigma(&psi))?.norm() <= opts.tol;
        if res <= opts.tol && consistent {
            let fixed = symmetry_fix(&psi)?;
            let mut sol = finish(fixed.field, history, it, gap)?;
            if sol.e_l > 0.0 && sol.regime == Regime::LocalizedMinimizer {
                sol = finish(Field::constant(lat), sol.history, it, f64::INFINITY)?;
                sol.gap = lat.spacing().powi(2);
            }
            return Ok(sol);
        }
        // Recover full steps once the iteration behaves.
        beta = (2.0 * beta).min(1.0);
    }
    Err(Error::NoConvergence {
        what: "self-consistent field iteration",
        iterations: opts.max_outer,
        residual: last_res,
    })
}

/// Result of [`symmetry_fix`].
#[derive(Debug, Clone)]
pub struct SymmetryFix {
    pub field: Field,
    /// Translation that was applied.
    pub translation: Point,
    /// Set when the density has no first harmonics to centre with.
    pub degenerate: bool,
}

/// Representative of the orbit `{e^{iθ} ψ(· - y)}`: the density's first
/// harmonics along each axis are real positive and the mean is real
/// positive.
pub fn symmetry_fix(psi: &Field) -> Result<SymmetryFix> {
    let lat = *psi.lattice();
    let mut psi = psi.normalized()?;
    let rho = density(&psi);
    let scale = rho.coefficient([0, 0, 0]).norm().max(1e-300);
    let mut y = [0.0; 3];
    let mut degenerate = false;
    for (a, ya) in y.iter_mut().enumerate() {
        let mut m = [0i64; 3];
        m[a] = 1;
        let c = rho.coefficient(m);
        if c.norm() <= 1e-12 * scale {
            degenerate = true;
            continue;
        }
        let side = lat.side_length();
        let t = c.arg() / lat.spacing();
        *ya = t - side * ((t + side / 2.0) / side).floor();
    }
    if degenerate {
        fix_phase(&mut psi);
        return Ok(SymmetryFix {
            field: psi,
            translation: [0.0; 3],
            degenerate,
        });
    }
    let mut moved = translate(&psi, y);
    fix_phase(&mut moved);
    Ok(SymmetryFix {
        field: moved,
        translation: y,
        degenerate,
    })
}

/// `(E_L(f) - e_L) / dist²_{H¹}(orbit of ψ_L, f)`.
pub fn coercivity_probe(sol: &PekarSolution, f: &Field) -> Result<f64> {
    sol.psi.check(f)?;
    let f = f.normalized()?;
    let dist2 = h1_orbit_distance_sqr(&sol.psi, &f);
    if dist2.max(0.0).sqrt() < 1e-8 {
        return Err(Error::Degenerate(format!(
            "probe lies on the minimizer orbit (H¹ distance {:.3e})",
            dist2.max(0.0).sqrt()
        )));
    }
    Ok((energy_e(&f)?.total - sol.e_l) / dist2)
}

/// `min_{θ,y} ‖f - e^{iθ} ψ^y‖²_{H¹}`, with the phase optimum taken
/// analytically.
pub fn h1_orbit_distance_sqr(psi: &Field, f: &Field) -> f64 {
    let lat = psi.lattice();
    let w: Vec<f64> = (0..lat.len()).map(|i| 1.0 + lat.k_squared(i)).collect();
    let h1 = |g: &Field| -> f64 { g.coeffs().iter().zip(&w).map(|(c, w)| w * c.norm_sqr()).sum() };
    let peak = correlation_peak(f, psi, &w, true);
    // Evaluate the optimum directly to avoid cancellation near the orbit.
    let moved = translate(psi, peak.y);
    let c: C64 = moved
        .coeffs()
        .iter()
        .zip(f.coeffs())
        .zip(&w)
        .map(|((a, b), w)| a.conj() * b * *w)
        .sum();
    let rot = if c.norm() > 0.0 { c / c.norm() } else { C64::new(1.0, 0.0) };
    h1(&f.sub(&moved.scaled_complex(rot)).expect("same lattice"))
}
