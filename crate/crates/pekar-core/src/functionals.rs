//! Classical energies of the polaron on the torus.
//!
//! For a normalized `ψ` with density `ρ = |ψ|²`:
//! `T = Σ |k|²|ψ_k|²`, `W = Σ_{k≠0} |ρ_k|²/|k|²`, `E = T - W`, `μ = T - 2W`,
//! `σ_ψ = (-Δ)^{-1/2} ρ`, `V_φ = -2(-Δ)^{-1/2} φ` and
//! `G(ψ, φ) = ⟨ψ, (-Δ + V_φ) ψ⟩ + ‖φ‖² = E(ψ) + ‖σ_ψ - φ‖²`.

use crate::error::{Error, Result};
use crate::lattice::{apply_table, Field, C64};
use crate::schroedinger::{ground_state, GroundState};
use serde::{Deserialize, Serialize};

/// Drift of `‖ψ‖` below which inputs are renormalized without a flag.
const SILENT_DRIFT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub interaction: f64,
    pub total: f64,
    pub chemical_potential: f64,
    /// Set when the input norm was off by more than `1e-6`.
    pub renormalized: bool,
}

/// `|ψ|²`, computed on the dealiasing grid.
pub fn density(psi: &Field) -> Field {
    let samples: Vec<C64> = psi
        .padded_samples()
        .into_iter()
        .map(|c| C64::new(c.norm_sqr(), 0.0))
        .collect();
    Field::from_padded_samples(*psi.lattice(), samples, true)
}

fn inverse_sqrt_laplacian(f: &Field, factor: f64) -> Field {
    let lat = f.lattice();
    let table: Vec<f64> = (0..lat.len())
        .map(|i| {
            let k2 = lat.k_squared(i);
            if i == 0 || lat.is_nyquist(i) {
                0.0
            } else {
                factor / k2.sqrt()
            }
        })
        .collect();
    apply_table(f, &table, true)
}

/// `σ_ψ = (-Δ)^{-1/2} |ψ|²`.
pub fn sigma(psi: &Field) -> Field {
    inverse_sqrt_laplacian(&density(psi), 1.0)
}

/// `V_φ = -2 (-Δ)^{-1/2} φ`.
pub fn potential(phi: &Field) -> Result<Field> {
    if !phi.is_real() {
        return Err(Error::NotReal);
    }
    Ok(inverse_sqrt_laplacian(phi, -2.0))
}

/// `Σ |k|² |f_k|²`.
pub fn kinetic(f: &Field) -> f64 {
    let lat = f.lattice();
    f.coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| lat.k_squared(i) * c.norm_sqr())
        .sum()
}

/// `Σ_{k≠0} |ρ_k|² / |k|²`.
pub fn interaction_of_density(rho: &Field) -> f64 {
    let lat = rho.lattice();
    rho.coeffs()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| {
            let k2 = lat.k_squared(i);
            if lat.is_nyquist(i) {
                0.0
            } else {
                c.norm_sqr() / k2
            }
        })
        .sum()
}

fn normalized_input(psi: &Field) -> Result<(Field, bool)> {
    let nrm = psi.norm();
    if !(nrm > 0.0) {
        return Err(Error::ZeroField);
    }
    let drift = (nrm - 1.0).abs();
    if drift == 0.0 {
        Ok((psi.clone(), false))
    } else {
        Ok((psi.scaled(1.0 / nrm), drift > SILENT_DRIFT))
    }
}

/// `E_L(ψ)` with its kinetic and interaction parts and `μ = T - 2W`.
pub fn energy_e(psi: &Field) -> Result<EnergyBreakdown> {
    let (psi, renormalized) = normalized_input(psi)?;
    let t = kinetic(&psi);
    let w = interaction_of_density(&density(&psi));
    Ok(EnergyBreakdown {
        kinetic: t,
        interaction: w,
        total: t - w,
        chemical_potential: t - 2.0 * w,
        renormalized,
    })
}

/// `G_L(ψ, φ) = ⟨ψ, (-Δ + V_φ)ψ⟩ + ‖φ‖²`.
pub fn energy_g(psi: &Field, phi: &Field) -> Result<f64> {
    psi.check(phi)?;
    let v = potential(phi)?;
    let (psi, _) = normalized_input(psi)?;
    let rho = density(&psi);
    Ok(kinetic(&psi) + v.dot(&rho)? + phi.norm_sqr())
}

/// `F_L(φ) = ‖φ‖² + e(φ)`.
pub fn energy_f(phi: &Field, tol: f64) -> Result<f64> {
    Ok(energy_f_with_state(phi, tol)?.0)
}

/// `F_L(φ)` together with the ground state of `h_φ` it was built from.
pub fn energy_f_with_state(phi: &Field, tol: f64) -> Result<(f64, GroundState)> {
    let gs = ground_state(phi, tol)?;
    Ok((phi.norm_sqr() + gs.energy, gs))
}
