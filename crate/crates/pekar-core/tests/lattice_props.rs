use pekar_core::green::{green_kernel, Ewald};
use pekar_core::lattice::{apply_multiplier, coupling_field, to_fourier, to_real_space, translate, wt_inner, wt_norm};
use pekar_core::{io, Field, MomentumLattice, Multiplier, ZeroMode};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lattice() -> MomentumLattice {
    MomentumLattice::new(3.0, 8).unwrap()
}

fn smooth(seed: u64, real: bool) -> Field {
    let lat = lattice();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = |k: f64| (-k * k / 20.0).exp();
    if real {
        Field::random_real(lat, &mut rng, env)
    } else {
        Field::random_complex(lat, &mut rng, env)
    }
}

fn rel(a: &Field, b: &Field) -> f64 {
    a.sub(b).unwrap().norm() / b.norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval(seed in 0u64..1000) {
        let f = smooth(seed, false);
        let samples = to_real_space(&f);
        let dv = f.lattice().volume() / f.lattice().len() as f64;
        let l2: f64 = samples.iter().map(|c| c.norm_sqr()).sum::<f64>() * dv;
        prop_assert!((l2 - f.norm_sqr()).abs() <= 1e-12 * f.norm_sqr());
    }

    #[test]
    fn fourier_roundtrip(seed in 0u64..1000) {
        let f = smooth(seed, false);
        let back = to_fourier(*f.lattice(), &to_real_space(&f)).unwrap();
        prop_assert!(rel(&back, &f) < 1e-12);
    }

    #[test]
    fn multipliers_compose(seed in 0u64..1000, s1 in -1.0f64..1.0, s2 in -1.0f64..1.0) {
        let f = smooth(seed, true);
        let a = Multiplier::laplacian_power(s1);
        let b = Multiplier::shifted_laplacian_power(1.0, s2);
        let twice = apply_multiplier(&apply_multiplier(&f, &a).unwrap(), &b).unwrap();
        let once = apply_multiplier(&f, &a.then(&b)).unwrap();
        prop_assert!(twice.sub(&once).unwrap().norm() <= 1e-14 * once.norm().max(1.0));
        prop_assert!(once.is_real());
    }

    #[test]
    fn translation_is_an_isometry(seed in 0u64..1000, y in prop::array::uniform3(-2.0f64..2.0), t in 0.0f64..12.0) {
        let f = smooth(seed, true);
        let g = translate(&f, y);
        prop_assert!((wt_norm(&g, t) - wt_norm(&f, t)).abs() <= 1e-13 * wt_norm(&f, t));
        prop_assert!((g.norm() - f.norm()).abs() <= 1e-13 * f.norm());
        let back = translate(&g, [-y[0], -y[1], -y[2]]);
        prop_assert!(rel(&back, &f) < 1e-14);
    }

    #[test]
    fn wt_norm_is_monotone(seed in 0u64..1000, t1 in 0.0f64..10.0, dt in 0.0f64..10.0) {
        let f = smooth(seed, false);
        prop_assert!(wt_norm(&f, t1) <= wt_norm(&f, t1 + dt) * (1.0 + 1e-14));
    }

    #[test]
    fn green_kernel_is_even(x in prop::array::uniform3(-1.4f64..1.4)) {
        prop_assume!(x.iter().map(|c| c * c).sum::<f64>() > 1e-4);
        let lat = lattice();
        let a = green_kernel(&lat, x).unwrap();
        let b = green_kernel(&lat, [-x[0], -x[1], -x[2]]).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn field_file_roundtrip(seed in 0u64..1000) {
        let f = smooth(seed, seed % 2 == 0);
        let mut buf = Vec::new();
        io::write_field(&mut buf, &f).unwrap();
        let g = io::read_field(buf.as_slice()).unwrap();
        prop_assert_eq!(g.coeffs(), f.coeffs());
        prop_assert_eq!(g.is_real(), f.is_real());
    }
}

#[test]
fn plane_wave_diagonal_action() {
    let lat = lattice();
    let m = [1, -2, 0];
    let f = Field::plane_wave(lat, m).unwrap();
    let g = apply_multiplier(&f, &Multiplier::laplacian_power(-1.0)).unwrap();
    let k2 = lat.spacing().powi(2) * 5.0;
    for (i, c) in g.coeffs().iter().enumerate() {
        let want = if lat.mode(i) == m { 1.0 / k2 } else { 0.0 };
        assert!((c.re - want).abs() < 1e-14 && c.im.abs() < 1e-14);
    }
}

#[test]
fn constant_is_annihilated_by_inverse_powers() {
    let lat = lattice();
    let g = apply_multiplier(&Field::constant(lat), &Multiplier::laplacian_power(-0.5)).unwrap();
    assert!(g.norm() == 0.0);
    let samples = to_real_space(&Field::constant(lat));
    let want = lat.volume().sqrt().recip();
    assert!(samples.iter().all(|c| (c.re - want).abs() < 1e-14 && c.im.abs() < 1e-14));
}

#[test]
fn non_finite_multiplier_is_rejected() {
    let f = smooth(1, true);
    let m = Multiplier::radial(|k| 1.0 / (k - lattice().spacing()), ZeroMode::Excluded);
    assert!(apply_multiplier(&f, &m).is_err());
}

#[test]
fn wt_limits() {
    let f = smooth(4, true);
    let g = smooth(5, true);
    let plain = f.dot(&g).unwrap();
    assert!((wt_inner(&f, &g, f64::INFINITY).unwrap() - plain).abs() < 1e-14);
    let resolvent = apply_multiplier(&f, &Multiplier::shifted_laplacian_power(1.0, -1.0)).unwrap();
    assert!((wt_inner(&f, &g, 0.0).unwrap() - resolvent.dot(&g).unwrap()).abs() < 1e-14);
}

#[test]
fn coupling_partition() {
    let lat = MomentumLattice::new(2.0, 16).unwrap();
    let full = coupling_field(lat, None).unwrap().truncated;
    let s = lat.spacing();
    assert_eq!(coupling_field(lat, Some(0.9 * s)).unwrap().truncated.norm(), 0.0);
    let c = coupling_field(lat, Some(4.5 * s)).unwrap();
    assert_eq!(c.truncated.add(&c.complement).unwrap().coeffs(), full.coeffs());
    assert!(coupling_field(lat, Some(lat.nyquist_radius() * 1.01)).is_err());
}

#[test]
fn coupling_norm_grows_linearly() {
    let lat = MomentumLattice::new(2.0, 128).unwrap();
    let s = lat.spacing();
    let cuts: Vec<f64> = (0..4).map(|i| 5.5 * s * 2f64.powi(i)).collect();
    let norms: Vec<f64> = cuts
        .iter()
        .map(|&c| coupling_field(lat, Some(c)).unwrap().truncated.norm_sqr())
        .collect();
    let fit = pekar_core::cutoff::fit_power_law(&cuts, &norms).unwrap();
    assert!((fit.slope - 1.0).abs() < 0.1, "slope {}", fit.slope);
}

/// `Σ_k e^{-εk²} cos(k·x) / (L³k²)` over the cube `|m_i| ≤ radius`.
fn heat_sum(x: [f64; 3], side: f64, eps: f64, radius: i64) -> f64 {
    let s = 2.0 * std::f64::consts::PI / side;
    let mut sum = 0.0;
    for a in -radius..=radius {
        for b in -radius..=radius {
            for c in -radius..=radius {
                let m2 = (a * a + b * b + c * c) as f64;
                if m2 == 0.0 {
                    continue;
                }
                let phase = s * (a as f64 * x[0] + b as f64 * x[1] + c as f64 * x[2]);
                sum += (-eps * m2 * s * s).exp() * phase.cos() / (m2 * s * s);
            }
        }
    }
    sum / side.powi(3)
}

#[test]
fn kernel_matches_heat_regularized_sum() {
    // Heat smoothing shifts F_L by ε/L³ away from the origin (ΔF_L = 1/L³
    // there); the remaining error is exponentially small in |x|²/ε, and the
    // discarded modes weigh less than e^{-εs²radius²}.
    let side = 1.0;
    let ewald = Ewald::new(side);
    for x in [[0.31, -0.17, 0.22], [0.49, 0.1, -0.4], [0.05, 0.45, 0.3]] {
        for eps in [1e-3, 5e-4] {
            let direct = heat_sum(x, side, eps, 60) - eps / side.powi(3);
            let value = ewald.kernel(x).unwrap();
            assert!((value - direct).abs() < 1e-10, "{value} vs {direct}");
        }
    }
}
