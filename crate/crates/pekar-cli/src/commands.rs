//! Subcommand pipelines. Each one fills a [`RunReport`]; persistence is left
//! to [`crate::output`].

use crate::config::{InitPreset, RunConfig};
use crate::report::{Correction, Diagnostics, Exponent, OrbitReport, RunReport, SmallLReport, Spectrum, Status};
use pekar_core::cutoff::{geometric_sweep, gross_sums, ly_norm, mode_count, outer_trace_sum, sweep, volume_law_ratio, OuterParams};
use pekar_core::green::kernel_deviation_sup;
use pekar_core::hessian::{assemble_k, smalll_direct, trace_correction, HessianSpectrum};
use pekar_core::lattice::translate;
use pekar_core::orbit::{
    adapted_basis, default_threshold, empirical_tube_radius, gross_decompose, gross_reconstruct, jacobian_a0,
    transverse_direction,
};
use pekar_core::scf::{minimize_pekar, Init, PekarSolution, Regime, ScfOptions};
use pekar_core::{Error, MomentumLattice};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::path::Path;

/// Eigenvalues within this distance of 1 count as zero modes of `1 - K`.
pub const ZERO_MODE_TOL: f64 = 1e-5;
/// Largest accepted relative drift of the trace correction under `Λ → 2Λ`.
pub const DOUBLING_TOL: f64 = 0.01;

/// Failure of a pipeline. Numerical failures still carry the partial report.
#[derive(Debug)]
pub enum Failure {
    Numerical(Box<RunReport>),
    /// The configuration asks for something undefined in its regime.
    Regime(Box<RunReport>),
    Internal(Box<RunReport>),
}

impl Failure {
    pub fn report(&self) -> &RunReport {
        match self {
            Failure::Numerical(r) | Failure::Regime(r) | Failure::Internal(r) => r,
        }
    }
}

fn is_numerical(e: &Error) -> bool {
    matches!(e, Error::NoConvergence { .. } | Error::Resolvent { .. })
}

fn fail(mut report: RunReport, e: Error) -> Failure {
    report.message = Some(e.to_string());
    if is_numerical(&e) {
        report.status = Status::NotConverged;
        Failure::Numerical(Box::new(report))
    } else if matches!(e, Error::Regime(_)) {
        report.status = Status::Failed;
        Failure::Regime(Box::new(report))
    } else {
        report.status = Status::Failed;
        Failure::Internal(Box::new(report))
    }
}

pub type Outcome<T> = Result<T, Failure>;

pub fn scf_options(cfg: &RunConfig) -> ScfOptions {
    ScfOptions {
        tol: cfg.scf_tolerance,
        max_outer: cfg.max_outer_iterations,
        eigen_tol: cfg.eigen_tolerance,
        seed: cfg.seed,
    }
}

fn init(cfg: &RunConfig) -> Init {
    match cfg.init {
        InitPreset::Constant => Init::Constant,
        InitPreset::Bump => Init::Gaussian {
            width: cfg.init_width * cfg.side_length,
            center: [0.0; 3],
        },
    }
}

fn lattice(cfg: &RunConfig) -> Result<MomentumLattice, Error> {
    MomentumLattice::new(cfg.side_length, cfg.n)
}

fn record_solution(report: &mut RunReport, sol: &PekarSolution) {
    report.e_l = Some(sol.e_l);
    report.mu = Some(sol.mu);
    report.mu_rayleigh = Some(sol.mu_rayleigh);
    report.el_residual = Some(sol.el_residual);
    report.regime = Some(sol.regime);
    report.iterations = Some(sol.iterations);
}

/// Minimizes `E_L`; on success the report carries the solution scalars.
pub fn solve(cfg: &RunConfig, report: &mut RunReport) -> Result<PekarSolution, Error> {
    let sol = minimize_pekar(lattice(cfg)?, &init(cfg), &scf_options(cfg))?;
    record_solution(report, &sol);
    Ok(sol)
}

/// Either reloads `persisted` or solves inline.
pub fn solution(cfg: &RunConfig, persisted: Option<&Path>, report: &mut RunReport) -> Result<PekarSolution, Error> {
    match persisted {
        Some(dir) => {
            let sol = PekarSolution::load(dir)?;
            let lat = sol.lattice();
            if lat.n() != cfg.n || (lat.side_length() - cfg.side_length).abs() > 1e-12 * cfg.side_length {
                return Err(Error::Format(format!(
                    "persisted solution has L = {}, n = {}; config asks for L = {}, n = {}",
                    lat.side_length(),
                    lat.n(),
                    cfg.side_length,
                    cfg.n
                )));
            }
            record_solution(report, &sol);
            Ok(sol)
        }
        None => solve(cfg, report),
    }
}

pub fn cmd_solve(cfg: &RunConfig) -> Outcome<(RunReport, PekarSolution)> {
    let mut report = RunReport::new("solve", cfg);
    match solve(cfg, &mut report) {
        Ok(sol) => Ok((report, sol)),
        Err(e) => Err(fail(report, e)),
    }
}

fn spectrum_at(sol: &PekarSolution, cfg: &RunConfig) -> Result<HessianSpectrum, Error> {
    HessianSpectrum::new(assemble_k(sol, cfg.cutoff(), cfg.hessian_tolerance)?, sol)
}

fn summarize(spectrum: &HessianSpectrum, localized: bool) -> Spectrum {
    // The tail fit needs a decade of shells; small bases simply omit it.
    let fit = spectrum.tail_slope().ok();
    Spectrum {
        dimension: spectrum.dimension(),
        cutoff: spectrum.cutoff(),
        k_max: spectrum.eigenvalues.first().copied().unwrap_or(0.0),
        zero_mode_count: spectrum.zero_mode_count(ZERO_MODE_TOL),
        zero_mode_angle: spectrum.zero_mode_angle,
        gap: if localized { spectrum.gap() } else { None },
        tail_slope: fit.as_ref().map(|f| f.slope),
        tail_slope_residual: fit.as_ref().map(|f| f.residual),
    }
}

fn correction(sol: &PekarSolution, spectrum: &HessianSpectrum) -> Result<Correction, Error> {
    let full = trace_correction(spectrum)?;
    let half = HessianSpectrum::new(spectrum.matrix.restrict(spectrum.cutoff() / 2.0)?, sol)?;
    let half = trace_correction(&half)?;
    let drift = if full.total() > 0.0 {
        (full.total() - half.total()).abs() / full.total()
    } else {
        0.0
    };
    let (direct, delta) = if sol.regime == Regime::ConstantMinimizer {
        let d = smalll_direct(sol.lattice().side_length(), spectrum.cutoff())?;
        (Some(d.value), Some((d.value - full.value).abs()))
    } else {
        (None, None)
    };
    Ok(Correction {
        value: full.value,
        tail: full.tail,
        total: full.total(),
        tail_constant: full.tail_constant,
        clamped: full.clamped,
        cutoff: spectrum.cutoff(),
        half_cutoff_total: half.total(),
        doubling_drift: drift,
        doubling_stable: drift <= DOUBLING_TOL,
        small_l_direct: direct,
        small_l_delta: delta,
    })
}

pub fn cmd_correction(cfg: &RunConfig, persisted: Option<&Path>) -> Outcome<RunReport> {
    let mut report = RunReport::new("correction", cfg);
    let run = |report: &mut RunReport| -> Result<(), Error> {
        let sol = solution(cfg, persisted, report)?;
        let spectrum = spectrum_at(&sol, cfg)?;
        report.spectrum = Some(summarize(&spectrum, sol.regime == Regime::LocalizedMinimizer));
        report.trace_correction = Some(correction(&sol, &spectrum)?);
        Ok(())
    };
    match run(&mut report) {
        Ok(()) => Ok(report),
        Err(e) => Err(fail(report, e)),
    }
}

pub fn cmd_hessian(cfg: &RunConfig, persisted: Option<&Path>) -> Outcome<(RunReport, HessianSpectrum)> {
    let mut report = RunReport::new("hessian", cfg);
    let run = |report: &mut RunReport| -> Result<HessianSpectrum, Error> {
        let sol = solution(cfg, persisted, report)?;
        let spectrum = spectrum_at(&sol, cfg)?;
        report.spectrum = Some(summarize(&spectrum, sol.regime == Regime::LocalizedMinimizer));
        Ok(spectrum)
    };
    match run(&mut report) {
        Ok(spectrum) => Ok((report, spectrum)),
        Err(e) => Err(fail(report, e)),
    }
}

pub fn cmd_small_l(cfg: &RunConfig) -> Outcome<RunReport> {
    let mut report = RunReport::new("small-l", cfg);
    match smalll_direct(cfg.side_length, cfg.cutoff()) {
        Ok(d) => {
            report.small_l = Some(SmallLReport {
                cutoff: cfg.cutoff(),
                value: d.value,
                tail_bound: d.tail_bound,
            });
            Ok(report)
        }
        Err(e) => Err(fail(report, e)),
    }
}

fn wrapped(d: f64, side: f64) -> f64 {
    let r = d.rem_euclid(side);
    r.min(side - r)
}

/// Decomposes `φ_L(· - y) + v` for a seeded transverse `v` and checks the
/// reconstruction.
pub fn cmd_orbit(cfg: &RunConfig, persisted: Option<&Path>) -> Outcome<RunReport> {
    let mut report = RunReport::new("orbit", cfg);
    let run = |report: &mut RunReport| -> Result<OrbitReport, Error> {
        let sol = solution(cfg, persisted, report)?;
        let lat = *sol.lattice();
        let t = cfg.weight;
        let threshold = default_threshold(&sol, t);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut v = transverse_direction(&sol, t, &mut rng)?;
        v.scale_mut(cfg.orbit_perturbation_fraction * threshold);
        let y = cfg.orbit_shift;
        let phi = translate(&sol.phi, y).combine(1.0, &translate(&v, y), 1.0)?;
        let d = gross_decompose(&phi, &sol, t, None)?;
        let back = gross_reconstruct(&sol, d.y, d.transverse())?;
        let side = lat.side_length();
        let basis = adapted_basis(&sol, cfg.cutoff(), t)?;
        let (_, det) = jacobian_a0(&sol, &basis, &vec![0.0; basis.len() - 3])?;
        let tube = empirical_tube_radius(&sol, t, 4, cfg.seed)?;
        Ok(OrbitReport {
            shift_y: y,
            recovered_y: d.y,
            shift_error: (0..3).map(|a| wrapped(d.y[a] - y[a], side)).fold(0.0, f64::max),
            distance: d.dist,
            threshold,
            ortho_residual: d.ortho_residual,
            roundtrip_error: back.sub(&phi)?.norm() / phi.norm(),
            adapted_dimension: basis.len(),
            det_a0: det,
            tube_radius: tube.radius,
            tube_failure: tube.failure,
        })
    };
    match run(&mut report) {
        Ok(o) => {
            report.orbit = Some(o);
            Ok(report)
        }
        Err(e) => Err(fail(report, e)),
    }
}

/// Power-law fits of the ultraviolet lattice sums, with sweep ranges in
/// units of the lattice spacing `2π/L`.
pub fn cmd_diagnostics(cfg: &RunConfig) -> Outcome<RunReport> {
    let mut report = RunReport::new("diagnostics", cfg);
    let run = || -> Result<Diagnostics, Error> {
        let side = cfg.side_length;
        let s = 2.0 * PI / side;
        let mut exponents = Vec::new();
        let mut push = |name: &str, expected: f64, fit: pekar_core::cutoff::ScalingFit| {
            exponents.push(Exponent {
                name: name.to_string(),
                expected,
                slope: fit.slope,
                residual: fit.residual,
            });
        };
        let lams = geometric_sweep(4.0 * s, 2.0, 5);
        push("ly_diagonal_vs_cutoff", -3.0, sweep(&lams, |l| ly_norm(side, l, 1, 1))?);
        push("ly_offdiagonal_vs_cutoff", -3.0, sweep(&lams, |l| ly_norm(side, l, 1, 2))?);
        let ks = geometric_sweep(4.0 * s, 2.0, 5);
        let alpha = 10.0;
        push("g2_vs_K", 1.0, sweep(&ks, |k| Ok(gross_sums(side, alpha, k)?.g2))?);
        push("f2_vs_K", -3.0, sweep(&ks, |k| Ok(gross_sums(side, alpha, k)?.f2))?);
        push("vf_vs_K", -1.0, sweep(&ks, |k| Ok(gross_sums(side, alpha, k)?.vf))?);
        push("gradf2_vs_K", -1.0, sweep(&ks, |k| Ok(gross_sums(side, alpha, k)?.gradf2))?);
        let alphas = geometric_sweep(8.0, 2.0, 5);
        let k = 8.0 * s;
        push("f2_vs_alpha", -4.0, sweep(&alphas, |a| Ok(gross_sums(side, a, k)?.f2))?);
        push("vf_vs_alpha", -2.0, sweep(&alphas, |a| Ok(gross_sums(side, a, k)?.vf))?);
        push("gradf2_vs_alpha", -4.0, sweep(&alphas, |a| Ok(gross_sums(side, a, k)?.gradf2))?);
        let outer = OuterParams {
            t: s * s,
            gamma: s * s,
            eta: 0.1,
            kappa: 1.0,
        };
        let cuts = geometric_sweep(16.0 * s, 2.0, 5);
        push("outer_trace_vs_cutoff", 2.0, sweep(&cuts, |l| outer_trace_sum(side, l, outer))?);
        Ok(Diagnostics {
            mode_count: mode_count(side, cfg.cutoff())?,
            volume_law_ratio: volume_law_ratio(side, cfg.cutoff())?,
            kernel_deviation_sup: kernel_deviation_sup(side, s, 32),
            exponents,
        })
    };
    match run() {
        Ok(d) => {
            report.diagnostics = Some(d);
            Ok(report)
        }
        Err(e) => Err(fail(report, e)),
    }
}
