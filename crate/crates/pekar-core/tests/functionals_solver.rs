use pekar_core::functionals::{density, energy_e, energy_f, energy_g, potential, sigma};
use pekar_core::lattice::{apply_multiplier, translate};
use pekar_core::schroedinger::{apply_h, ground_state, projected_resolvent};
use pekar_core::{Field, MomentumLattice, Multiplier, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lattice() -> MomentumLattice {
    MomentumLattice::new(6.0, 12).unwrap()
}

fn random_state(seed: u64) -> Field {
    let lat = lattice();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = lat.spacing();
    let bump = Field::random_real(lat, &mut rng, |k| (-(k / (3.0 * s)).powi(2)).exp());
    Field::constant(lat).combine(1.0, &bump, 0.4).unwrap().normalized().unwrap()
}

fn random_potential(seed: u64, strength: f64) -> Field {
    let lat = lattice();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    let s = lat.spacing();
    let mut f = Field::random_real(lat, &mut rng, |k| if k == 0.0 { 0.0 } else { (-(k / (2.0 * s)).powi(2)).exp() });
    f.scale_mut(strength / f.norm());
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn completion_of_the_square(seed in 0u64..10_000, scale in 0.0f64..2.0) {
        let psi = random_state(seed);
        let e = energy_e(&psi).unwrap();
        let g = energy_g(&psi, &sigma(&psi)).unwrap();
        prop_assert!((e.total - g).abs() <= 1e-10 * e.kinetic.max(1.0));
        let phi = random_potential(seed, scale);
        let gap = sigma(&psi).sub(&phi).unwrap().norm_sqr();
        let g2 = energy_g(&psi, &phi).unwrap();
        prop_assert!(g2 >= e.total - 1e-12);
        prop_assert!((g2 - e.total - gap).abs() <= 1e-10 * g2.abs().max(1.0));
    }

    #[test]
    fn breakdown_identities(seed in 0u64..10_000) {
        let psi = random_state(seed);
        let e = energy_e(&psi).unwrap();
        prop_assert!((e.total - (e.kinetic - e.interaction)).abs() <= 1e-12 * e.kinetic.max(1.0));
        prop_assert_eq!(e.chemical_potential, e.kinetic - 2.0 * e.interaction);
        prop_assert!((sigma(&psi).norm_sqr() - e.interaction).abs() <= 1e-12 * e.interaction.max(1e-300));
        let lat = lattice();
        let rho0 = density(&psi).coefficient([0, 0, 0]);
        prop_assert!((rho0.re * lat.volume().sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn translation_covariance(seed in 0u64..10_000, y in prop::array::uniform3(-3.0f64..3.0)) {
        let psi = random_state(seed);
        let moved = translate(&psi, y);
        let d = density(&moved).sub(&translate(&density(&psi), y)).unwrap().norm();
        prop_assert!(d < 1e-13);
        let s = sigma(&moved).sub(&translate(&sigma(&psi), y)).unwrap().norm();
        prop_assert!(s < 1e-13);
        prop_assert!((energy_e(&moved).unwrap().total - energy_e(&psi).unwrap().total).abs() < 1e-12);
    }

    #[test]
    fn potential_is_linear(seed in 0u64..10_000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let p = random_potential(seed, 1.0);
        let q = random_potential(seed + 1, 1.0);
        let lhs = potential(&p.combine(a, &q, b).unwrap()).unwrap();
        let rhs = potential(&p).unwrap().combine(a, &potential(&q).unwrap(), b).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().norm() <= 1e-12 * rhs.norm().max(1.0));
    }

    #[test]
    fn hamiltonian_is_hermitian(seed in 0u64..10_000) {
        let lat = lattice();
        let phi = random_potential(seed, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = lat.spacing();
        let f = Field::random_complex(lat, &mut rng, |k| (-(k / (4.0 * s)).powi(2)).exp());
        let g = Field::random_complex(lat, &mut rng, |k| (-(k / (4.0 * s)).powi(2)).exp());
        let a = f.inner(&apply_h(&phi, &g).unwrap()).unwrap();
        let b = g.inner(&apply_h(&phi, &f).unwrap()).unwrap().conj();
        prop_assert!((a - b).norm() <= 1e-11 * a.norm().max(1.0));
        let lin = apply_h(&phi, &f.combine(2.0, &g, -0.5).unwrap()).unwrap();
        let sep = apply_h(&phi, &f).unwrap().combine(2.0, &apply_h(&phi, &g).unwrap(), -0.5).unwrap();
        prop_assert!(lin.sub(&sep).unwrap().norm() <= 1e-12 * sep.norm());
    }
}

#[test]
fn sigma_potential_relation() {
    let psi = random_state(7);
    let lhs = potential(&sigma(&psi)).unwrap();
    let rhs = apply_multiplier(&density(&psi), &Multiplier::laplacian_power(-1.0))
        .unwrap()
        .scaled(-2.0);
    assert!(lhs.sub(&rhs).unwrap().norm() < 1e-13 * rhs.norm());
    assert!(sigma(&Field::constant(lattice())).norm() < 1e-15);
    assert!(potential(&Field::random_complex(lattice(), &mut ChaCha8Rng::seed_from_u64(1), |_| 1.0)).is_err());
}

#[test]
fn plane_wave_energies() {
    let lat = lattice();
    let pw = Field::plane_wave(lat, [1, 0, -1]).unwrap();
    let e = energy_e(&pw).unwrap();
    let k2 = 2.0 * lat.spacing().powi(2);
    assert!((e.kinetic - k2).abs() < 1e-13);
    assert!(e.interaction.abs() < 1e-13);
    let c = energy_e(&Field::constant(lat)).unwrap();
    assert!(c.kinetic.abs() < 1e-14 && c.interaction.abs() < 1e-14 && c.total.abs() < 1e-14);
    assert!(energy_e(&Field::zeros(lat)).is_err());
    let h = apply_h(&Field::zeros(lat), &pw).unwrap();
    assert!(h.sub(&pw.scaled(k2)).unwrap().norm() < 1e-13);
}

#[test]
fn gradient_matches_euler_lagrange() {
    let psi = random_state(11);
    let lat = lattice();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let s = lat.spacing();
    let mut f = Field::random_real(lat, &mut rng, |k| (-(k / (3.0 * s)).powi(2)).exp());
    let overlap = psi.dot(&f).unwrap();
    f.axpy(-overlap, &psi).unwrap();
    f.normalize().unwrap();
    let e0 = energy_e(&psi).unwrap();
    let h = apply_h(&sigma(&psi), &psi).unwrap();
    let grad = h.combine(1.0, &psi, -e0.chemical_potential).unwrap();
    let want = 2.0 * f.dot(&grad).unwrap();
    let quotient = |eps: f64| {
        let moved = psi.combine(1.0, &f, eps).unwrap();
        (energy_e(&moved).unwrap().total - e0.total) / eps
    };
    let (a, b) = (quotient(1e-3), quotient(1e-4));
    let richardson = (10.0 * b - a) / 9.0;
    assert!((richardson - want).abs() < 1e-6 * want.abs().max(1.0), "{richardson} vs {want}");
    assert!((b - want).abs() < (a - want).abs());
}

#[test]
fn ground_state_examples() {
    let lat = lattice();
    let free = ground_state(&Field::zeros(lat), 1e-10).unwrap();
    assert!(free.energy.abs() < 1e-12);
    assert!(free.psi.sub(&Field::constant(lat)).unwrap().norm() < 1e-8);

    let phi = random_potential(3, 1.5);
    let gs = ground_state(&phi, 1e-10).unwrap();
    assert!(gs.residual <= 1e-10);
    assert!((gs.psi.norm() - 1.0).abs() < 1e-12);
    assert!(gs.gap() > 1e-9);
    assert!(gs.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    let samples = gs.psi.to_real_space();
    assert!(samples.iter().all(|c| c.re >= -1e-8 && c.im.abs() <= 1e-10));

    let y = [0.7, -1.9, 2.4];
    let moved = ground_state(&translate(&phi, y), 1e-10).unwrap();
    assert!((moved.energy - gs.energy).abs() < 1e-9);

    for seed in 0..5 {
        let trial = random_state(seed);
        let bound = energy_g(&trial, &phi).unwrap() - phi.norm_sqr();
        assert!(gs.energy <= bound + 1e-12);
    }
}

#[test]
fn projected_resolvent_examples() {
    let lat = lattice();
    let phi = random_potential(5, 1.0);
    let gs = ground_state(&phi, 1e-11).unwrap();
    let u = projected_resolvent(&phi, &gs, &gs.psi, 1e-10).unwrap();
    assert!(u.norm() < 1e-10);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s = lat.spacing();
    let rhs = Field::random_real(lat, &mut rng, |k| (-(k / (4.0 * s)).powi(2)).exp());
    let u = projected_resolvent(&phi, &gs, &rhs, 1e-10).unwrap();
    assert!(u.dot(&gs.psi).unwrap().abs() < 1e-12);
    let overlap = gs.psi.dot(&rhs).unwrap();
    let q_rhs = rhs.combine(1.0, &gs.psi, -overlap).unwrap();
    let res = apply_h(&phi, &u).unwrap().combine(1.0, &u, -gs.energy).unwrap().sub(&q_rhs).unwrap();
    assert!(res.norm() <= 1e-10 * rhs.norm(), "residual {}", res.norm());

    let free = ground_state(&Field::zeros(lat), 1e-12).unwrap();
    let pw = Field::plane_wave(lat, [0, 2, 1]).unwrap();
    let u = projected_resolvent(&Field::zeros(lat), &free, &pw, 1e-12).unwrap();
    let k2 = 5.0 * s * s;
    assert!(u.sub(&pw.scaled(1.0 / k2)).unwrap().norm() < 1e-11);
}

#[test]
fn pekar_f_examples() {
    let lat = lattice();
    assert!(energy_f(&Field::zeros(lat), 1e-10).unwrap().abs() < 1e-12);
    let phi = random_potential(8, 1.2);
    let f = energy_f(&phi, 1e-10).unwrap();
    let moved = energy_f(&translate(&phi, [1.1, 0.3, -2.2]), 1e-10).unwrap();
    assert!((f - moved).abs() < 1e-9);
    let mut coeffs = phi.coeffs().to_vec();
    coeffs[0] = C64::new(0.8, 0.0);
    let lifted = Field::from_coeffs(lat, coeffs, true).unwrap();
    let split = energy_f(&lifted, 1e-10).unwrap();
    assert!((split - (0.64 + f)).abs() < 1e-9);
}
