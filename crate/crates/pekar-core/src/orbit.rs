//! The translation orbit of the minimizing field: weighted distance with the
//! optimal translation, Gross coordinates, the adapted basis and the
//! Jacobian block `A₀`.

use crate::basis::ParityBasis;
use crate::error::{Error, Result};
use crate::io::save_field;
use crate::lattice::{translate, wt_inner, wt_norm, wt_weight, Field, Point, C64};
use crate::scf::{PekarSolution, Regime};
use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Relative window in which two correlation maxima count as tied.
const TIE: f64 = 1e-6;

/// Maximizer of a translation correlation.
#[derive(Debug, Clone)]
pub struct CorrelationPeak {
    pub y: Point,
    /// `Re C(y)`, or `|C(y)|` when maximizing the modulus.
    pub value: f64,
    /// A second maximum within the tie window, if one exists.
    pub runner_up: Option<Point>,
}

fn wrap(y: f64, side: f64) -> f64 {
    y - side * ((y + side / 2.0) / side).floor()
}

struct Trig {
    modes: Vec<(Point, C64)>,
}

impl Trig {
    /// `C`, `∇C`, `∇²C` at `y`.
    fn eval(&self, y: Point) -> (C64, [C64; 3], [[C64; 3]; 3]) {
        let mut c = C64::new(0.0, 0.0);
        let mut g = [C64::new(0.0, 0.0); 3];
        let mut h = [[C64::new(0.0, 0.0); 3]; 3];
        for (k, d) in &self.modes {
            let t = d * C64::from_polar(1.0, k[0] * y[0] + k[1] * y[1] + k[2] * y[2]);
            c += t;
            let it = C64::new(-t.im, t.re);
            for a in 0..3 {
                g[a] += it * k[a];
                for b in a..3 {
                    h[a][b] -= t * (k[a] * k[b]);
                }
            }
        }
        for a in 0..3 {
            for b in 0..a {
                h[a][b] = h[b][a];
            }
        }
        (c, g, h)
    }

    fn objective(&self, y: Point, modulus: bool) -> (f64, Vector3<f64>, Matrix3<f64>) {
        let (c, g, h) = self.eval(y);
        if modulus {
            let f = c.norm_sqr();
            let grad = Vector3::from_fn(|a, _| 2.0 * (c.conj() * g[a]).re);
            let hess = Matrix3::from_fn(|a, b| 2.0 * (g[a].conj() * g[b] + c.conj() * h[a][b]).re);
            (f, grad, hess)
        } else {
            (c.re, Vector3::from_fn(|a, _| g[a].re), Matrix3::from_fn(|a, b| h[a][b].re))
        }
    }

    fn score(&self, y: Point, modulus: bool) -> f64 {
        let c = self.eval(y).0;
        if modulus {
            c.norm()
        } else {
            c.re
        }
    }

    /// Damped Newton ascent from `y`.
    fn refine(&self, mut y: Point, modulus: bool, side: f64, step_cap: f64) -> Point {
        let (mut f, mut grad, mut hess) = self.objective(y, modulus);
        for _ in 0..100 {
            let mut step = match (-hess).cholesky() {
                Some(ch) => ch.solve(&grad),
                None => {
                    // Not locally concave: gradient ascent, scaled by curvature.
                    let scale = hess.norm().max(1e-300);
                    grad / scale
                }
            };
            if step.norm() > step_cap {
                step *= step_cap / step.norm();
            }
            let mut accepted = false;
            for _ in 0..40 {
                let cand = [y[0] + step[0], y[1] + step[1], y[2] + step[2]];
                let (fc, gc, hc) = self.objective(cand, modulus);
                if fc >= f - 1e-15 * f.abs() {
                    y = cand;
                    f = fc;
                    grad = gc;
                    hess = hc;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted || step.norm() <= 1e-13 * side {
                break;
            }
        }
        // Near a flat peak the objective stalls at roundoff before the
        // gradient does; finish with plain Newton steps on the gradient.
        for _ in 0..8 {
            let Some(ch) = (-hess).cholesky() else { break };
            let step = ch.solve(&grad);
            if step.norm() > step_cap || step.norm() == 0.0 {
                break;
            }
            let cand = [y[0] + step[0], y[1] + step[1], y[2] + step[2]];
            let (_, gc, hc) = self.objective(cand, modulus);
            if gc.norm() >= grad.norm() {
                break;
            }
            y = cand;
            grad = gc;
            hess = hc;
        }
        [wrap(y[0], side), wrap(y[1], side), wrap(y[2], side)]
    }
}

/// Maximizes `C(y) = Σ_k w_k conj(reference_k) target_k e^{ik·y}`, i.e. the
/// weighted inner product `⟨reference^y, target⟩_w`, over the torus: a
/// scan of the sample grid followed by Newton refinement.
pub fn correlation_peak(target: &Field, reference: &Field, weight: &[f64], modulus: bool) -> CorrelationPeak {
    let lat = *target.lattice();
    let n = lat.n();
    let side = lat.side_length();
    let d: Vec<C64> = reference
        .coeffs()
        .iter()
        .zip(target.coeffs())
        .zip(weight)
        .map(|((r, t), w)| r.conj() * t * *w)
        .collect();
    let trig = Trig {
        modes: d
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(i, c)| (lat.wavevector(i), *c))
            .collect(),
    };
    let vol = lat.volume().sqrt();
    let grid: Vec<f64> = Field::from_coeffs(lat, d, false)
        .expect("matching size")
        .to_real_space()
        .into_iter()
        .map(|c| if modulus { (c * vol).norm() } else { c.re * vol })
        .collect();
    let at = |i: usize, j: usize, k: usize| grid[(i % n * n + j % n) * n + k % n];
    let mut maxima: Vec<(f64, usize)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = at(i, j, k);
                let mut is_max = true;
                'nb: for di in [n - 1, 0, 1] {
                    for dj in [n - 1, 0, 1] {
                        for dk in [n - 1, 0, 1] {
                            if (di, dj, dk) != (0, 0, 0) && at(i + di, j + dj, k + dk) > v {
                                is_max = false;
                                break 'nb;
                            }
                        }
                    }
                }
                if is_max {
                    maxima.push((v, (i * n + j) * n + k));
                }
            }
        }
    }
    maxima.sort_by(|a, b| b.0.total_cmp(&a.0));
    let best = maxima.first().map(|m| m.0).unwrap_or(0.0);
    let h = side / n as f64;
    let mut refined: Vec<(f64, Point)> = maxima
        .iter()
        .take_while(|(v, _)| *v >= best - 0.25 * best.abs().max(1e-300))
        .take(8)
        .map(|&(_, idx)| {
            let p = lat.grid_point([idx / (n * n), (idx / n) % n, idx % n]);
            let y = trig.refine(p, modulus, side, h);
            (trig.score(y, modulus), y)
        })
        .collect();
    if refined.is_empty() {
        return CorrelationPeak {
            y: [0.0; 3],
            value: trig.score([0.0; 3], modulus),
            runner_up: None,
        };
    }
    refined.sort_by(|a, b| b.0.total_cmp(&a.0));
    let top = refined[0].0;
    let close = |a: &Point, b: &Point| {
        (0..3).all(|i| {
            let d = wrap(a[i] - b[i], side).abs();
            d < 1e-6 * side
        })
    };
    let mut tied: Vec<Point> = Vec::new();
    for (v, y) in &refined {
        if *v >= top - TIE * top.abs().max(1e-300) && !tied.iter().any(|t| close(t, y)) {
            tied.push(*y);
        }
    }
    tied.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let y = tied[0];
    CorrelationPeak {
        y,
        value: trig.score(y, modulus),
        runner_up: tied.get(1).copied(),
    }
}

fn wt_table(phi: &Field, t: f64) -> Vec<f64> {
    let lat = phi.lattice();
    (0..lat.len()).map(|i| wt_weight(lat.k_squared(i).sqrt(), t)).collect()
}

fn require_localized(sol: &PekarSolution) -> Result<()> {
    if sol.regime != Regime::LocalizedMinimizer {
        return Err(Error::Regime("the orbit of a constant minimizer is a point".into()));
    }
    Ok(())
}

/// Optimal translation and `W_T` distance of `φ` to the orbit of `φ_L`.
#[derive(Debug, Clone)]
pub struct OrbitDistance {
    pub y: Point,
    pub dist: f64,
    /// Second translation with an equal correlation, if any.
    pub runner_up: Option<Point>,
}

pub fn orbit_distance(phi: &Field, sol: &PekarSolution, t: f64) -> Result<OrbitDistance> {
    require_localized(sol)?;
    sol.phi.check(phi)?;
    let peak = correlation_peak(phi, &sol.phi, &wt_table(phi, t), false);
    let diff = phi.sub(&translate(&sol.phi, peak.y))?;
    Ok(OrbitDistance {
        y: peak.y,
        dist: wt_norm(&diff, t),
        runner_up: peak.runner_up,
    })
}

/// `φ = φ_L^y + v^y` with `v` in the `y = 0` frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitDecomposition {
    pub y: Point,
    #[serde(skip)]
    pub v: Option<Field>,
    pub dist: f64,
    #[serde(rename = "T")]
    pub t: f64,
    /// `max_j |⟨v, W_T ∂_j φ_L⟩| / ‖v‖_{W_T}`.
    pub ortho_residual: f64,
}

impl OrbitDecomposition {
    pub fn transverse(&self) -> &Field {
        self.v.as_ref().expect("decomposition carries its transverse part")
    }

    /// `decomposition.json` and `v.pekr` in `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("decomposition.json"), serde_json::to_string_pretty(self)?)?;
        save_field(&dir.join("v.pekr"), self.transverse())
    }
}

/// Default tube radius `0.1 ‖φ_L‖_{W_T}`.
pub fn default_threshold(sol: &PekarSolution, t: f64) -> f64 {
    0.1 * wt_norm(&sol.phi, t)
}

/// Gross coordinates of `φ`. `threshold` defaults to
/// [`default_threshold`].
pub fn gross_decompose(phi: &Field, sol: &PekarSolution, t: f64, threshold: Option<f64>) -> Result<OrbitDecomposition> {
    let od = orbit_distance(phi, sol, t)?;
    let threshold = threshold.unwrap_or_else(|| default_threshold(sol, t));
    if od.dist > threshold {
        return Err(Error::OutsideTube {
            dist: od.dist,
            threshold,
        });
    }
    let v = translate(phi, [-od.y[0], -od.y[1], -od.y[2]]).sub(&sol.phi)?;
    let vn = wt_norm(&v, t);
    let mut worst: f64 = 0.0;
    for j in 0..3 {
        worst = worst.max(wt_inner(&v, &sol.phi.derivative(j), t)?.abs());
    }
    Ok(OrbitDecomposition {
        y: od.y,
        v: Some(v),
        dist: od.dist,
        t,
        ortho_residual: if vn > 0.0 { worst / vn } else { worst },
    })
}

/// `u⁻¹(y, v) = φ_L^y + v^y`.
pub fn gross_reconstruct(sol: &PekarSolution, y: Point, v: &Field) -> Result<Field> {
    Ok(translate(&sol.phi.add(v)?, y))
}

/// Seeded unit direction in the `W_T` norm, `W_T`-orthogonal to every
/// `∂_j φ_L`, with a Gaussian spectrum of width four lattice spacings.
pub fn transverse_direction<R: Rng + ?Sized>(sol: &PekarSolution, t: f64, rng: &mut R) -> Result<Field> {
    let lat = *sol.lattice();
    let s = lat.spacing();
    let mut v = Field::random_real(lat, rng, |k| if k == 0.0 { 0.0 } else { (-(k / (4.0 * s)).powi(2)).exp() });
    let grads: Vec<Field> = (0..3).map(|j| sol.phi.derivative(j)).collect();
    // Two passes; the gradients are W_T-orthogonal only up to symmetry.
    for _ in 0..2 {
        for g in &grads {
            let c = wt_inner(&v, g, t)? / wt_norm(g, t).powi(2);
            v.axpy(-c, g)?;
        }
    }
    let n = wt_norm(&v, t);
    if !(n > 0.0) {
        return Err(Error::ZeroField);
    }
    v.scale_mut(1.0 / n);
    Ok(v)
}

/// Bracket on the largest `W_T` radius at which Gross coordinates are
/// recovered uniquely.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct TubeRadius {
    /// Largest radius at which every probe was recovered.
    pub radius: f64,
    /// Smallest radius at which some probe was not; `None` if the search
    /// stopped at its cap.
    pub failure: Option<f64>,
}

/// Measures the tube radius at weight `T` with `samples` seeded probes
/// `φ_L^y + ε v^y`: a probe counts as recovered when the decomposition
/// returns `y` and `ε v` to `1e-6` relative accuracy.
pub fn empirical_tube_radius(sol: &PekarSolution, t: f64, samples: usize, seed: u64) -> Result<TubeRadius> {
    require_localized(sol)?;
    let side = sol.lattice().side_length();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes = Vec::with_capacity(samples);
    for _ in 0..samples {
        let y: Point = [0, 1, 2].map(|_| rng.random_range(-side / 2.0..side / 2.0));
        probes.push((y, transverse_direction(sol, t, &mut rng)?));
    }
    let recovered = |eps: f64| -> Result<bool> {
        for (y, v) in &probes {
            let phi = gross_reconstruct(sol, *y, &v.scaled(eps))?;
            let d = gross_decompose(&phi, sol, t, Some(f64::INFINITY))?;
            let dy = (0..3).map(|a| wrap(d.y[a] - y[a], side).abs()).fold(0.0, f64::max);
            let dv = wt_norm(&d.transverse().sub(&v.scaled(eps))?, t);
            if dy > 1e-6 * side || dv > 1e-6 * eps {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let cap = 4.0 * wt_norm(&sol.phi, t);
    let mut lo = default_threshold(sol, t);
    let mut hi;
    if recovered(lo)? {
        loop {
            hi = 2.0 * lo;
            if hi > cap {
                return Ok(TubeRadius { radius: lo, failure: None });
            }
            if !recovered(hi)? {
                break;
            }
            lo = hi;
        }
    } else {
        let mut halvings = 0;
        loop {
            hi = lo;
            lo /= 2.0;
            if recovered(lo)? {
                break;
            }
            halvings += 1;
            if halvings == 20 {
                return Err(Error::Degenerate("no recoverable perturbation size found".into()));
            }
        }
    }
    for _ in 0..6 {
        let mid = (lo * hi).sqrt();
        if recovered(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TubeRadius { radius: lo, failure: Some(hi) })
}

/// Real orthonormal basis `f₁, …, f_N` of `ran Π` adapted to the orbit.
#[derive(Debug, Clone)]
pub struct AdaptedBasis {
    modes: ParityBasis,
    /// Column `j` holds the coordinates of `f_{j+1}` in `modes`.
    coords: DMatrix<f64>,
    pub t: f64,
    /// `‖Π φ_L‖`.
    pub pi_phi_norm: f64,
}

impl AdaptedBasis {
    pub fn len(&self) -> usize {
        self.coords.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.ncols() == 0
    }

    pub fn modes(&self) -> &ParityBasis {
        &self.modes
    }

    pub fn coordinates(&self) -> &DMatrix<f64> {
        &self.coords
    }

    /// `f_{j+1}` as a field (zero-based `j`).
    pub fn field(&self, j: usize) -> Field {
        let col: Vec<f64> = self.coords.column(j).iter().copied().collect();
        self.modes.synthesize(&col)
    }

    /// `Σ_{l≥4} η_l f_l` for `η = (η₄, …, η_N)`.
    pub fn transverse(&self, eta: &[f64]) -> Field {
        assert_eq!(eta.len(), self.len() - 3);
        let x = self.coords.columns(3, self.len() - 3) * DMatrix::from_column_slice(eta.len(), 1, eta);
        self.modes.synthesize(x.as_slice())
    }

    /// `u⁻¹(y, η) = (Πφ_L)^y + η^y`, with the `f₄` coefficient taken on top of
    /// `‖Πφ_L‖`.
    pub fn inverse_map(&self, y: Point, eta: &[f64]) -> Field {
        let mut x: Vec<f64> = vec![0.0; self.len()];
        x[3] = self.pi_phi_norm;
        for (l, e) in eta.iter().enumerate() {
            x[3 + l] += e;
        }
        let v = &self.coords * DMatrix::from_column_slice(x.len(), 1, &x);
        translate(&self.modes.synthesize(v.as_slice()), y)
    }
}

/// Builds `f₁..f₃` from `Π W_T ∂_j φ_L`, `f₄ = Πφ_L/‖Πφ_L‖` and completes the
/// basis with a Householder complement.
pub fn adapted_basis(sol: &PekarSolution, cutoff: f64, t: f64) -> Result<AdaptedBasis> {
    require_localized(sol)?;
    let lat = *sol.phi.lattice();
    if cutoff > lat.nyquist_radius() {
        return Err(Error::CutoffTooLarge {
            cutoff,
            nyquist: lat.nyquist_radius(),
        });
    }
    let modes = ParityBasis::new(lat, cutoff, true);
    let n = modes.len();
    if n < 5 {
        return Err(Error::Degenerate(format!("ran Π has only {n} dimensions")));
    }
    let w = wt_table(&sol.phi, t);
    let mut grads = DMatrix::zeros(n, 3);
    for j in 0..3 {
        let d = crate::lattice::apply_table(&sol.phi.derivative(j), &w, true);
        let c = modes.coordinates(&d);
        grads.set_column(j, &nalgebra::DVector::from_vec(c));
    }
    // Rank of the gradient span.
    let gram = grads.transpose() * &grads;
    let eig = SymmetricEigen::new(gram);
    let smin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min).max(0.0).sqrt();
    if !(smin > 1e-8) {
        return Err(Error::Degenerate(format!(
            "gradient span is rank deficient (smallest singular value {smin:.3e})"
        )));
    }
    let mut frame: Vec<nalgebra::DVector<f64>> = Vec::new();
    for j in 0..3 {
        let mut v = grads.column(j).into_owned();
        for _ in 0..2 {
            for f in &frame {
                let c = f.dot(&v);
                v.axpy(-c, f, 1.0);
            }
        }
        let nv = v.norm();
        frame.push(v / nv);
    }
    let pphi = nalgebra::DVector::from_vec(modes.coordinates(&sol.phi));
    let pi_phi_norm = pphi.norm();
    frame.push(&pphi / pi_phi_norm);

    // Complete with the trailing columns of the full Householder Q.
    let mut full = DMatrix::identity(n, n);
    DMatrix::from_columns(&frame).qr().q_tr_mul(&mut full);
    let mut coords = DMatrix::zeros(n, n);
    for (j, f) in frame.iter().enumerate() {
        coords.set_column(j, f);
    }
    let qt = full.transpose();
    for j in 4..n {
        let mut v = qt.column(j).into_owned();
        for f in &frame {
            let c = f.dot(&v);
            v.axpy(-c, f, 1.0);
        }
        let nv = v.norm();
        coords.set_column(j, &(v / nv));
    }
    Ok(AdaptedBasis {
        modes,
        coords,
        t,
        pi_phi_norm,
    })
}

/// `(A₀)_{jk} = ⟨f_j, -∂_k(Πφ_L + Σ_{l≥4} η_l f_l)⟩` and `|det A₀|`.
pub fn jacobian_a0(sol: &PekarSolution, basis: &AdaptedBasis, eta: &[f64]) -> Result<(Matrix3<f64>, f64)> {
    if eta.len() + 3 != basis.len() {
        return Err(Error::Domain(format!(
            "η has {} entries, expected {}",
            eta.len(),
            basis.len() - 3
        )));
    }
    let pphi = basis.modes.synthesize(&basis.modes.coordinates(&sol.phi));
    let u = pphi.add(&basis.transverse(eta))?;
    let fs: Vec<Field> = (0..3).map(|j| basis.field(j)).collect();
    let mut a = Matrix3::zeros();
    for k in 0..3 {
        let dk = u.derivative(k).scaled(-1.0);
        for j in 0..3 {
            a[(j, k)] = fs[j].dot(&dk)?;
        }
    }
    Ok((a, a.determinant().abs()))
}
