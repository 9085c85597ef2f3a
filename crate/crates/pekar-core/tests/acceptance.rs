//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status
//! when any criterion fails. Runs as a plain binary (`harness = false`).

use pekar_core::cutoff::{geometric_sweep, gross_sums, ly_norm, outer_trace_sum, sweep, OuterParams, ScalingFit};
use pekar_core::functionals::{energy_e, energy_f};
use pekar_core::green::kernel_deviation_sup;
use pekar_core::hessian::{
    apply_k, assemble_k, hessian_fd_check, smalll_direct, trace_correction, HessianSpectrum,
};
use pekar_core::lattice::{wt_inner, wt_norm};
use pekar_core::orbit::{adapted_basis, default_threshold, gross_decompose, gross_reconstruct, jacobian_a0};
use pekar_core::scf::{coercivity_probe, minimize_pekar, Init, PekarSolution, Regime, ScfOptions};
use pekar_core::{Field, MomentumLattice, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

/// Side length of the localized-regime checks.
const SIDE: f64 = 400.0;
/// Largest Hessian cutoff at `n = 24`, just inside the Nyquist radius.
const CUTOFF: f64 = 0.1884;
/// Weight parameter of the orbit geometry checks.
const T_WEIGHT: f64 = 0.05;
const RUNTIME_BUDGET_S: f64 = 30.0 * 60.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn tight() -> ScfOptions {
    ScfOptions {
        tol: 1e-11,
        eigen_tol: 1e-12,
        ..Default::default()
    }
}

fn localized(n: usize) -> Result<PekarSolution> {
    let lat = MomentumLattice::new(SIDE, n)?;
    minimize_pekar(lat, &Init::default_bump(&lat), &tight())
}

fn zero_mean_direction(lat: MomentumLattice, rng: &mut ChaCha8Rng, width: f64) -> Result<Field> {
    let s = lat.spacing();
    let v = Field::random_real(lat, rng, |k| if k == 0.0 { 0.0 } else { (-(k / (width * s)).powi(2)).exp() });
    v.normalized()
}

fn wrapped_gap(a: f64, b: f64, side: f64) -> f64 {
    let d = (a - b).rem_euclid(side);
    d.min(side - d)
}

fn small_l_oracle() -> Result<Outcome> {
    let lat = MomentumLattice::new(1.0, 32)?;
    let sol = minimize_pekar(lat, &Init::Constant, &ScfOptions::default())?;
    let cutoff = 2.0 * PI * 6.05;
    let spectrum = HessianSpectrum::new(assemble_k(&sol, cutoff, 1e-12)?, &sol)?;
    let s2 = lat.spacing().powi(2);
    let mut expected: Vec<f64> = spectrum
        .basis()
        .modes()
        .iter()
        .map(|m| 4.0 / (lat.volume() * (m.shell() as f64 * s2).powi(2)))
        .collect();
    expected.sort_by(|a, b| b.total_cmp(a));
    let worst = spectrum
        .eigenvalues
        .iter()
        .zip(&expected)
        .map(|(k, e)| ((k - e) / e).abs())
        .fold(0.0, f64::max);
    let tc = trace_correction(&spectrum)?;
    let direct = smalll_direct(1.0, cutoff)?;
    let delta = (tc.value - direct.value).abs();
    Ok(outcome(
        sol.regime == Regime::ConstantMinimizer && worst <= 1e-10 && delta <= 1e-8,
        format!(
            "N = {}, max rel eigenvalue error {worst:.2e}, trace {:.12e} vs direct {:.12e} (delta {delta:.2e})",
            spectrum.dimension(),
            tc.value,
            direct.value
        ),
    ))
}

/// Locates the constant/localized transition on `[lo, hi]` at `n = 16`.
fn transition(mut lo: f64, mut hi: f64, steps: usize) -> Result<(f64, f64)> {
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        let lat = MomentumLattice::new(mid, 16)?;
        let sol = minimize_pekar(lat, &Init::default_bump(&lat), &ScfOptions::default())?;
        if sol.regime == Regime::LocalizedMinimizer {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

fn euler_lagrange() -> Result<Outcome> {
    let (lo, hi) = transition(300.0, SIDE, 6)?;
    let t = Instant::now();
    let lat = MomentumLattice::new(SIDE, 48)?;
    let sol = minimize_pekar(lat, &Init::default_bump(&lat), &ScfOptions::default())?;
    let secs = t.elapsed().as_secs_f64();
    let e = energy_e(&sol.psi)?;
    let agree = (e.chemical_potential - sol.mu_rayleigh).abs();
    Ok(outcome(
        hi < SIDE && sol.regime == Regime::LocalizedMinimizer && sol.el_residual <= 1e-8 && agree <= 1e-7 && secs <= 300.0,
        format!(
            "transition in ({lo:.1}, {hi:.1}); L = {SIDE}, n = 48: residual {:.2e}, |T-2W - <ψ,hψ>| = {agree:.2e}, e_L = {:.10e}, {secs:.1} s",
            sol.el_residual, sol.e_l
        ),
    ))
}

fn zero_modes(sol: &PekarSolution, spectrum: &HessianSpectrum) -> Result<Outcome> {
    let count = spectrum.zero_mode_count(1e-5);
    let angle = spectrum.zero_mode_angle.unwrap_or(f64::INFINITY);
    let gap = spectrum.gap().unwrap_or(0.0);
    let mut worst: f64 = 0.0;
    for a in 0..3 {
        let d = sol.phi.derivative(a);
        let kd = apply_k(sol, &d, 1e-12)?;
        worst = worst.max(kd.sub(&d)?.norm() / d.norm());
    }
    Ok(outcome(
        count == 3 && angle <= 1e-3 && gap > 0.0,
        format!(
            "{count} eigenvalues within 1e-5 of 1 (top: 1 - {:.2e}), angle {angle:.2e} rad, 1 - k_4 = {gap:.6}, max |(1-K)∂φ|/|∂φ| = {worst:.2e}",
            1.0 - spectrum.eigenvalues[0]
        ),
    ))
}

fn finite_differences(sol: &PekarSolution) -> Result<Outcome> {
    let lat = *sol.lattice();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0fd0);
    let mut ratios = Vec::new();
    for _ in 0..10 {
        let v = zero_mean_direction(lat, &mut rng, 6.0)?;
        let a = hessian_fd_check(sol, &v, 1e-2, 1e-11)?;
        let b = hessian_fd_check(sol, &v, 5e-3, 1e-11)?;
        ratios.push(a.discrepancy / b.discrepancy);
    }
    let bad = ratios.iter().filter(|r| !(1.5..=3.0).contains(*r)).count();
    Ok(outcome(
        bad == 0,
        format!(
            "ratios at ε = 1e-2 vs 5e-3: [{}]; {bad} outside [1.5, 3]",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn decay_and_trace(sol: &PekarSolution, spectrum: &HessianSpectrum) -> Result<Outcome> {
    let fit = spectrum.tail_slope()?;
    let full = trace_correction(spectrum)?;
    let half = HessianSpectrum::new(spectrum.matrix.restrict(CUTOFF / 2.0)?, sol)?;
    let coarse = trace_correction(&half)?;
    let drift = (full.total() - coarse.total()).abs() / full.total();
    Ok(outcome(
        fit.slope <= -4.0 / 3.0 + 0.15 && drift <= 0.01,
        format!(
            "tail slope {:.3} (log residual {:.3}); correction+tail {:.6} at Λ = {:.4}, {:.6} at Λ = {:.4}, drift {:.3}%",
            fit.slope,
            fit.residual,
            coarse.total(),
            CUTOFF / 2.0,
            full.total(),
            CUTOFF,
            100.0 * drift
        ),
    ))
}

fn kernel_comparison() -> Result<Outcome> {
    let a = 2.0 * PI;
    let base = kernel_deviation_sup(1.0, a, 64);
    let screened = kernel_deviation_sup(1.0, 2.0 * a, 64);
    let refined = kernel_deviation_sup(1.0, a, 128);
    let change = (base - screened).abs().max((base - refined).abs());
    Ok(outcome(
        base.is_finite() && change <= 1e-3,
        format!("sup |F_1 - 1/(4π|x|)| = {base:.9} (screening doubled {screened:.9}, grid doubled {refined:.9}), change {change:.2e}"),
    ))
}

fn gross_coordinates(sol: &PekarSolution) -> Result<Outcome> {
    let lat = *sol.lattice();
    let side = lat.side_length();
    let eps = default_threshold(sol, T_WEIGHT);
    let grads: Vec<Field> = (0..3).map(|j| sol.phi.derivative(j)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6055);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let y = [0, 1, 2].map(|_| rng.random_range(-side / 2.0..side / 2.0));
        let mut v = zero_mean_direction(lat, &mut rng, 4.0)?;
        for _ in 0..2 {
            for g in &grads {
                let c = wt_inner(&v, g, T_WEIGHT)? / wt_norm(g, T_WEIGHT).powi(2);
                v.axpy(-c, g)?;
            }
        }
        v.scale_mut(rng.random_range(0.05..0.9) * eps / wt_norm(&v, T_WEIGHT));
        let phi = gross_reconstruct(sol, y, &v)?;
        let d = gross_decompose(&phi, sol, T_WEIGHT, None)?;
        let back = gross_reconstruct(sol, d.y, d.transverse())?;
        let dy = (0..3).map(|a| wrapped_gap(d.y[a], y[a], side)).fold(0.0, f64::max);
        worst = worst
            .max(back.sub(&phi)?.norm() / phi.norm())
            .max(d.transverse().sub(&v)?.norm() / phi.norm())
            .max(dy / side);
    }

    let cutoff = 0.09;
    let basis = adapted_basis(sol, cutoff, T_WEIGHT)?;
    let m = basis.len() - 3;
    let (_, det0) = jacobian_a0(sol, &basis, &vec![0.0; m])?;
    let mut min_det = f64::INFINITY;
    for _ in 0..100 {
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nrm = wt_norm(&basis.transverse(&raw), T_WEIGHT);
        let scale = rng.random_range(0.0..1.0) * eps / nrm;
        let eta: Vec<f64> = raw.iter().map(|x| x * scale).collect();
        min_det = min_det.min(jacobian_a0(sol, &basis, &eta)?.1);
    }

    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nrm = wt_norm(&basis.transverse(&raw), T_WEIGHT);
    let eta: Vec<f64> = raw.iter().map(|x| x * 0.05 * eps / nrm).collect();
    let mut values = Vec::new();
    for _ in 0..5 {
        let y = [0, 1, 2].map(|_| rng.random_range(-side / 2.0..side / 2.0));
        values.push(energy_f(&basis.inverse_map(y, &eta), 1e-11)?);
    }
    let spread = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    Ok(outcome(
        worst <= 1e-8 && min_det > 0.0 && spread <= 1e-9,
        format!(
            "worst roundtrip error {worst:.2e}; |det A0| = {det0:.4e} at η = 0, min {min_det:.4e} over 100 η; F_L spread over y {spread:.2e}"
        ),
    ))
}

fn exponent_check(name: &str, fit: &ScalingFit, target: f64, lines: &mut Vec<String>) -> bool {
    let ok = (fit.slope - target).abs() <= 0.15 && fit.residual < 0.05;
    lines.push(format!("{name} {:.3} (want {target}, res {:.1e})", fit.slope, fit.residual));
    ok
}

fn scaling_exponents() -> Result<Outcome> {
    let side = 2.0 * PI;
    let mut lines = Vec::new();
    let mut ok = true;
    let lams = geometric_sweep(4.0, 2.0, 5);
    ok &= exponent_check("ly(1,1)", &sweep(&lams, |l| ly_norm(side, l, 1, 1))?, -3.0, &mut lines);
    ok &= exponent_check("ly(1,2)", &sweep(&lams, |l| ly_norm(side, l, 1, 2))?, -3.0, &mut lines);

    let ks = geometric_sweep(4.0, 2.0, 5);
    let alpha = 10.0;
    ok &= exponent_check("g2(K)", &sweep(&ks, |k| Ok(gross_sums(side, alpha, k)?.g2))?, 1.0, &mut lines);
    ok &= exponent_check("f2(K)", &sweep(&ks, |k| Ok(gross_sums(side, alpha, k)?.f2))?, -3.0, &mut lines);
    ok &= exponent_check("vf(K)", &sweep(&ks, |k| Ok(gross_sums(side, alpha, k)?.vf))?, -1.0, &mut lines);
    ok &= exponent_check("gradf2(K)", &sweep(&ks, |k| Ok(gross_sums(side, alpha, k)?.gradf2))?, -1.0, &mut lines);

    let alphas = geometric_sweep(8.0, 2.0, 5);
    let k = 8.0;
    ok &= exponent_check("f2(α)", &sweep(&alphas, |a| Ok(gross_sums(side, a, k)?.f2))?, -4.0, &mut lines);
    ok &= exponent_check("vf(α)", &sweep(&alphas, |a| Ok(gross_sums(side, a, k)?.vf))?, -2.0, &mut lines);
    ok &= exponent_check("gradf2(α)", &sweep(&alphas, |a| Ok(gross_sums(side, a, k)?.gradf2))?, -4.0, &mut lines);

    let outer = OuterParams {
        t: 1.0,
        gamma: 1.0,
        eta: 0.1,
        kappa: 1.0,
    };
    let cuts = geometric_sweep(16.0, 2.0, 5);
    ok &= exponent_check("outer(Λ)", &sweep(&cuts, |l| outer_trace_sum(side, l, outer))?, 2.0, &mut lines);
    Ok(outcome(ok, lines.join("; ")))
}

fn coercivity(sol: &PekarSolution) -> Result<Outcome> {
    let lat = *sol.lattice();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0e7);
    let mut worst_spread: f64 = 1.0;
    let mut min_ratio = f64::INFINITY;
    for _ in 0..20 {
        let mut v = zero_mean_direction(lat, &mut rng, 4.0)?;
        let theta = rng.random_range(0.0..1.0);
        v.axpy(theta, &sol.psi)?;
        let c = sol.psi.dot(&v)?;
        v.axpy(-c, &sol.psi)?;
        v.normalize()?;
        let ratios = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|eps| coercivity_probe(sol, &sol.psi.combine(1.0, &v, *eps)?))
            .collect::<Result<Vec<f64>>>()?;
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        min_ratio = min_ratio.min(lo);
        worst_spread = worst_spread.max(if lo > 0.0 { hi / lo } else { f64::INFINITY });
    }
    Ok(outcome(
        min_ratio > 0.0 && worst_spread <= 2.0,
        format!("min ratio {min_ratio:.4e}, worst max/min across ε {worst_spread:.4}"),
    ))
}

fn convergence_ladder() -> Result<Outcome> {
    let cutoff = 0.094;
    let mut energies = Vec::new();
    let mut traces = Vec::new();
    for n in [16, 32, 64] {
        let sol = localized(n)?;
        let spectrum = HessianSpectrum::new(assemble_k(&sol, cutoff, 1e-10)?, &sol)?;
        energies.push(sol.e_l);
        traces.push(trace_correction(&spectrum)?.value);
    }
    // Differences below these floors are set by the solver tolerances
    // rather than by the grid.
    let judge = |x: &[f64], floor: f64| -> (f64, f64, bool) {
        let d1 = (x[1] - x[0]).abs();
        let d2 = (x[2] - x[1]).abs();
        (d1, d2, d2 <= floor * x[2].abs() || d1 >= 10.0 * d2)
    };
    let (e1, e2, eok) = judge(&energies, 1e-12);
    let (t1, t2, tok) = judge(&traces, 1e-9);
    Ok(outcome(
        eok && tok,
        format!(
            "e_L {:.14e} / {:.14e} / {:.14e} (diffs {e1:.2e}, {e2:.2e}); Π-trace at Λ = {cutoff} {:.12e} / {:.12e} / {:.12e} (diffs {t1:.2e}, {t2:.2e})",
            energies[0], energies[1], energies[2], traces[0], traces[1], traces[2]
        ),
    ))
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(usize, Result<Outcome>, f64)> = Vec::new();
    let mut run = |id: usize, f: &mut dyn FnMut() -> Result<Outcome>| {
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        match &r {
            Ok(o) => println!("criterion {id}: {} [{secs:.1} s] {}", if o.pass { "PASS" } else { "FAIL" }, o.detail),
            Err(e) => println!("criterion {id}: FAIL [{secs:.1} s] error: {e}"),
        }
        results.push((id, r, secs));
    };

    run(1, &mut small_l_oracle);
    run(2, &mut euler_lagrange);
    let shared = localized(24).and_then(|sol| {
        let spectrum = HessianSpectrum::new(assemble_k(&sol, CUTOFF, 1e-10)?, &sol)?;
        Ok((sol, spectrum))
    });
    match &shared {
        Ok((sol, spectrum)) => {
            run(3, &mut || zero_modes(sol, spectrum));
            run(4, &mut || finite_differences(sol));
            run(5, &mut || decay_and_trace(sol, spectrum));
        }
        Err(e) => {
            for id in 3..=5 {
                println!("criterion {id}: FAIL shared L = {SIDE} solution unavailable: {e}");
            }
        }
    }
    run(6, &mut kernel_comparison);
    match &shared {
        Ok((sol, _)) => run(7, &mut || gross_coordinates(sol)),
        Err(e) => println!("criterion 7: FAIL shared solution unavailable: {e}"),
    }
    run(8, &mut scaling_exponents);
    match &shared {
        Ok((sol, _)) => run(9, &mut || coercivity(sol)),
        Err(e) => println!("criterion 9: FAIL shared solution unavailable: {e}"),
    }
    let mut ladder = || {
        let o = convergence_ladder()?;
        let total = start.elapsed().as_secs_f64();
        Ok(outcome(
            o.pass && total <= RUNTIME_BUDGET_S,
            format!("{}; suite runtime {total:.0} s of {RUNTIME_BUDGET_S:.0} s", o.detail),
        ))
    };
    run(10, &mut ladder);

    let failed: Vec<usize> = results
        .iter()
        .filter(|(_, r, _)| !matches!(r, Ok(o) if o.pass))
        .map(|(id, _, _)| *id)
        .collect();
    let missing = shared.is_err() as usize * 4;
    println!(
        "acceptance: {} of 10 passed in {:.0} s",
        10 - failed.len() - missing,
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() || missing > 0 {
        std::process::exit(1);
    }
}
