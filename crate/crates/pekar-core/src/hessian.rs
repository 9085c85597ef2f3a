//! Hessians of the Pekar functionals at a minimizer.
//!
//! For `F_L` the Hessian is `1 - K_L` with
//! `K_L = 4(-Δ)^{-1/2} ψ (h - μ)^{-1} Q_ψ ψ (-Δ)^{-1/2}` and cubic envelope
//! `J_L`, where `(h - μ)^{-1}` is replaced by `(-Δ + 1)^{-1}`. Both are
//! compressed onto `ran Π = span{e_k : 0 < |k| ≤ Λ}` in the real parity
//! basis of [`ParityBasis`].
//!
//! Assembly uses the point-group symmetry of `ψ_L`: if `g ψ_L = ψ_L` then
//! `K e_{gk} = g K e_k`, and reality gives `K e_{-k} = C K e_k` with
//! `(Cf)_k = conj(f_{-k})`. One resolvent solve per orbit of plane waves
//! therefore fixes every column. When all three axis reflections are
//! symmetries the matrix is block diagonal in the eight reflection sectors.

use crate::basis::ParityBasis;
use crate::cutoff::{fit_power_law, sum_outside, Angular, Closure, ScalingFit};
use crate::eigen::{lobpcg, EigenOptions};
use crate::error::{Error, Result};
use crate::io::write_matrix;
use crate::lattice::{apply_multiplier, Field, MomentumLattice, Multiplier, C64};
use crate::scf::{PekarSolution, Regime};
use crate::schroedinger::{random_block, Hamiltonian, ProjectedResolvent};
use crate::symmetry::{act, invariance_group, SignedPermutation};
use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Relative defect `‖gψ - ψ‖/‖ψ‖` below which `g` counts as a symmetry.
pub const SYMMETRY_TOL: f64 = 1e-6;
/// Eigenvalues of `K` may exceed 1 by this much (grazing zero modes).
pub const CLAMP_SLACK: f64 = 1e-8;
/// Minimum number of eigenvalues for the tail fit.
pub const MIN_TAIL_EIGENVALUES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operator {
    K,
    J,
}

#[derive(Debug, Clone, Copy)]
struct Owner {
    rep: usize,
    /// Index into the stored inverse group elements.
    g: usize,
    flip: bool,
}

/// Plane-wave columns of the operator on the ball, stored per orbit.
struct Columns {
    lat: MomentumLattice,
    pos: Vec<usize>,
    inverses: Vec<SignedPermutation>,
    owner: Vec<Owner>,
    cols: Vec<Vec<C64>>,
}

impl Columns {
    /// `⟨e_i, A e_j⟩` for lattice storage positions `i, j` on the ball.
    fn entry(&self, i: usize, j: usize) -> C64 {
        let o = self.owner[self.pos[j]];
        let mut m = self.inverses[o.g].apply(self.lat.mode(i));
        if o.flip {
            m = [-m[0], -m[1], -m[2]];
        }
        let src = self.lat.index(m).expect("group maps the ball into itself");
        let v = self.cols[o.rep][self.pos[src]];
        if o.flip {
            v.conj()
        } else {
            v
        }
    }
}

fn orbit_owners(lat: &MomentumLattice, ball: &[usize], pos: &[usize], group: &[SignedPermutation]) -> (Vec<usize>, Vec<Owner>) {
    let mut owner: Vec<Option<Owner>> = vec![None; ball.len()];
    let mut reps = Vec::new();
    for (p, &idx) in ball.iter().enumerate() {
        if owner[p].is_some() {
            continue;
        }
        let rep = reps.len();
        reps.push(idx);
        let m = lat.mode(idx);
        for (gi, g) in group.iter().enumerate() {
            let gm = g.apply(m);
            for (flip, t) in [(false, gm), (true, [-gm[0], -gm[1], -gm[2]])] {
                let tp = pos[lat.index(t).expect("group maps the ball into itself")];
                if owner[tp].is_none() {
                    owner[tp] = Some(Owner { rep, g: gi, flip });
                }
            }
        }
    }
    (reps, owner.into_iter().map(|o| o.expect("every mode is owned")).collect())
}

/// `u ↦ 4(-Δ)^{-1/2} ψ M ψ (-Δ)^{-1/2} u`; `M` is the projected resolvent
/// when present and `(-Δ + 1)^{-1}` otherwise.
struct Sandwich<'a> {
    psi: &'a Field,
    resolvent: Option<ProjectedResolvent<'a>>,
    tol: f64,
}

impl Sandwich<'_> {
    fn middle(&self, a: &Field) -> Result<(Field, usize)> {
        match &self.resolvent {
            Some(r) => {
                let nrm = a.norm();
                if nrm == 0.0 {
                    return Ok((Field::zeros(*a.lattice()), 0));
                }
                r.solve(a, self.tol * nrm)
            }
            None => Ok((apply_multiplier(a, &Multiplier::shifted_laplacian_power(1.0, -1.0))?, 0)),
        }
    }

    fn apply(&self, f: &Field) -> Result<Field> {
        let g = apply_multiplier(f, &Multiplier::laplacian_power(-0.5))?;
        let a = self.psi.product(&g)?;
        let (r, _) = self.middle(&a)?;
        let b = self.psi.product(&r)?;
        let mut out = apply_multiplier(&b, &Multiplier::laplacian_power(-0.5))?.scaled(4.0);
        if out.is_real() {
            out.enforce_hermitian();
        }
        Ok(out)
    }
}

/// The operator compressed to `ran Π`, with its reflection-sector blocks.
#[derive(Debug, Clone)]
pub struct HessianMatrix {
    pub operator: Operator,
    basis: ParityBasis,
    blocks: Vec<Vec<usize>>,
    matrices: Vec<DMatrix<f64>>,
    /// `‖A - Aᵀ‖_F / ‖A‖_F` before symmetrization.
    pub asymmetry: f64,
    /// Order of the point group used in the assembly.
    pub symmetry_order: usize,
    /// Largest `‖gψ - ψ‖/‖ψ‖` over that group.
    pub symmetry_defect: f64,
    /// Number of plane-wave columns actually computed.
    pub columns_solved: usize,
    /// Total inner iterations of the resolvent solves.
    pub inner_iterations: usize,
}

fn check_cutoff(lat: &MomentumLattice, cutoff: f64) -> Result<()> {
    let nyq = lat.nyquist_radius();
    if cutoff > nyq * (1.0 + 1e-12) {
        return Err(Error::CutoffTooLarge { cutoff, nyquist: nyq });
    }
    if !(cutoff > 0.0) {
        return Err(Error::Domain("cutoff must be positive".into()));
    }
    Ok(())
}

fn assemble(sol: &PekarSolution, cutoff: f64, tol: f64, op: Operator) -> Result<HessianMatrix> {
    let lat = *sol.lattice();
    check_cutoff(&lat, cutoff)?;
    let psi = &sol.psi;
    let group = invariance_group(psi, SYMMETRY_TOL);
    let nrm = psi.norm();
    let symmetry_defect = group
        .iter()
        .map(|g| act(g, psi).sub(psi).expect("same lattice").norm() / nrm)
        .fold(0.0, f64::max);
    let ball: Vec<usize> = lat.ball(cutoff).into_iter().filter(|&i| i != 0).collect();
    if ball.is_empty() {
        return Err(Error::Domain(format!("no nonzero modes with |k| ≤ {cutoff}")));
    }
    let mut pos = vec![usize::MAX; lat.len()];
    for (p, &i) in ball.iter().enumerate() {
        pos[i] = p;
    }
    let (reps, owner) = orbit_owners(&lat, &ball, &pos, &group);

    let h = sol.hamiltonian();
    let gs = sol.ground_state();
    let sandwich = Sandwich {
        psi,
        resolvent: (op == Operator::K).then(|| ProjectedResolvent::new(&h, &gs)),
        tol,
    };
    let solved: Vec<Result<(Vec<C64>, usize)>> = reps
        .par_iter()
        .map(|&idx| {
            let k = lat.k_squared(idx).sqrt();
            let u = Field::plane_wave(lat, lat.mode(idx))?.scaled(1.0 / k);
            let a = psi.product(&u)?;
            let (r, iters) = sandwich.middle(&a).map_err(|e| match e {
                Error::Resolvent { residual, gap, .. } => Error::Resolvent {
                    column: pos[idx],
                    residual,
                    gap,
                },
                other => other,
            })?;
            let b = psi.product(&r)?;
            let col = ball
                .iter()
                .map(|&i| b.coeffs()[i] * (4.0 / lat.k_squared(i).sqrt()))
                .collect();
            Ok((col, iters))
        })
        .collect();
    let mut cols = Vec::with_capacity(reps.len());
    let mut inner_iterations = 0;
    for r in solved {
        let (c, it) = r?;
        cols.push(c);
        inner_iterations += it;
    }
    let columns = Columns {
        lat,
        pos,
        inverses: group.iter().map(|g| g.inverse()).collect(),
        owner,
        cols,
    };

    let basis = ParityBasis::new(lat, cutoff, false);
    let blocked = (0..3).all(|a| group.iter().any(|g| g.is_axis_reflection(a)));
    let blocks: Vec<Vec<usize>> = if blocked {
        (0..8)
            .map(|s| (0..basis.len()).filter(|&j| basis.modes()[j].sector() == s).collect())
            .filter(|b: &Vec<usize>| !b.is_empty())
            .collect()
    } else {
        vec![(0..basis.len()).collect()]
    };
    let mut matrices = Vec::with_capacity(blocks.len());
    let (mut skew, mut total) = (0.0, 0.0);
    for members in &blocks {
        let m = members.len();
        let rows: Vec<Vec<f64>> = members
            .par_iter()
            .map(|&a| {
                let ea = basis.modes()[a].entries();
                members
                    .iter()
                    .map(|&b| {
                        let eb = basis.modes()[b].entries();
                        // Within a reflection sector every entry of b gives
                        // the same contribution; one representative suffices.
                        let reps = if blocked { &eb[..1] } else { eb };
                        let weight = if blocked { eb.len() as f64 } else { 1.0 };
                        let mut s = C64::new(0.0, 0.0);
                        for (i, ca) in ea {
                            for (j, cb) in reps {
                                s += ca.conj() * cb * columns.entry(*i, *j);
                            }
                        }
                        weight * s.re
                    })
                    .collect()
            })
            .collect();
        let raw = DMatrix::from_fn(m, m, |r, c| rows[r][c]);
        skew += (&raw - raw.transpose()).norm_squared();
        total += raw.norm_squared();
        matrices.push((&raw + raw.transpose()) * 0.5);
    }
    let asymmetry = if total > 0.0 { (skew / total).sqrt() } else { 0.0 };
    Ok(HessianMatrix {
        operator: op,
        basis,
        blocks,
        matrices,
        asymmetry,
        symmetry_order: group.len(),
        symmetry_defect,
        columns_solved: columns.cols.len(),
        inner_iterations,
    })
}

/// `ΠK_LΠ` in the parity basis of radius `cutoff`; `tol` is the relative
/// tolerance of each resolvent solve.
pub fn assemble_k(sol: &PekarSolution, cutoff: f64, tol: f64) -> Result<HessianMatrix> {
    assemble(sol, cutoff, tol, Operator::K)
}

/// `ΠJ_LΠ` in the parity basis of radius `cutoff`.
pub fn assemble_j(sol: &PekarSolution, cutoff: f64) -> Result<HessianMatrix> {
    assemble(sol, cutoff, 0.0, Operator::J)
}

/// `K_L f` on the full lattice (no compression).
pub fn apply_k(sol: &PekarSolution, f: &Field, tol: f64) -> Result<Field> {
    sol.psi.check(f)?;
    let h = sol.hamiltonian();
    let gs = sol.ground_state();
    Sandwich {
        psi: &sol.psi,
        resolvent: Some(ProjectedResolvent::new(&h, &gs)),
        tol,
    }
    .apply(f)
}

/// `J_L f` on the full lattice.
pub fn apply_j(sol: &PekarSolution, f: &Field) -> Result<Field> {
    sol.psi.check(f)?;
    Sandwich {
        psi: &sol.psi,
        resolvent: None,
        tol: 0.0,
    }
    .apply(f)
}

impl HessianMatrix {
    pub fn basis(&self) -> &ParityBasis {
        &self.basis
    }

    pub fn cutoff(&self) -> f64 {
        self.basis.radius()
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// Basis indices of each diagonal block.
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// Diagonal entries in basis order.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dimension()];
        for (members, m) in self.blocks.iter().zip(&self.matrices) {
            for (r, &a) in members.iter().enumerate() {
                d[a] = m[(r, r)];
            }
        }
        d
    }

    /// The full `N × N` matrix.
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.dimension();
        let mut out = DMatrix::zeros(n, n);
        for (members, m) in self.blocks.iter().zip(&self.matrices) {
            for (r, &a) in members.iter().enumerate() {
                for (c, &b) in members.iter().enumerate() {
                    out[(a, b)] = m[(r, c)];
                }
            }
        }
        out
    }

    /// `⟨x, A x⟩` for basis coordinates `x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dimension());
        let mut total = 0.0;
        for (members, m) in self.blocks.iter().zip(&self.matrices) {
            for (r, &a) in members.iter().enumerate() {
                for (c, &b) in members.iter().enumerate() {
                    total += x[a] * m[(r, c)] * x[b];
                }
            }
        }
        total
    }

    /// The compression to a smaller ball (a leading principal submatrix).
    pub fn restrict(&self, cutoff: f64) -> Result<HessianMatrix> {
        if cutoff > self.cutoff() * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "cannot restrict from radius {} to the larger radius {cutoff}",
                self.cutoff()
            )));
        }
        let basis = ParityBasis::new(*self.basis.lattice(), cutoff, false);
        let n = basis.len();
        let mut blocks = Vec::new();
        let mut matrices = Vec::new();
        for (members, m) in self.blocks.iter().zip(&self.matrices) {
            let keep = members.iter().take_while(|&&j| j < n).count();
            if keep > 0 {
                blocks.push(members[..keep].to_vec());
                matrices.push(m.view((0, 0), (keep, keep)).into_owned());
            }
        }
        Ok(HessianMatrix {
            basis,
            blocks,
            matrices,
            ..self.clone()
        })
    }

    pub fn write_dense<W: std::io::Write>(&self, w: W) -> Result<()> {
        write_matrix(w, &self.dense(), true)
    }
}

fn tail_window(n: usize) -> std::ops::RangeInclusive<usize> {
    ((n + 9) / 10).max(4)..=n
}

/// Diagonalized Hessian operator on `ran Π`.
#[derive(Debug, Clone)]
pub struct HessianSpectrum {
    pub matrix: HessianMatrix,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    block_vectors: Vec<DMatrix<f64>>,
    order: Vec<(usize, usize)>,
    /// Largest principal angle between the top three eigenvectors and
    /// `span{∂_j φ_L}`; only for `K` in the localized regime.
    pub zero_mode_angle: Option<f64>,
    /// Eigenvalues above 1 that were clamped in the square root.
    pub clamped: usize,
}

impl HessianSpectrum {
    pub fn new(matrix: HessianMatrix, sol: &PekarSolution) -> Result<HessianSpectrum> {
        let mut pairs = Vec::with_capacity(matrix.dimension());
        let mut block_vectors = Vec::with_capacity(matrix.matrices.len());
        for (b, m) in matrix.matrices.iter().enumerate() {
            let eig = SymmetricEigen::new(m.clone());
            for (c, &v) in eig.eigenvalues.iter().enumerate() {
                pairs.push((v, b, c));
            }
            block_vectors.push(eig.eigenvectors);
        }
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let order = pairs.iter().map(|p| (p.1, p.2)).collect();
        let clamped = eigenvalues.iter().filter(|&&k| k > 1.0).count();
        let mut spectrum = HessianSpectrum {
            matrix,
            eigenvalues,
            block_vectors,
            order,
            zero_mode_angle: None,
            clamped,
        };
        if spectrum.matrix.operator == Operator::K && sol.regime == Regime::LocalizedMinimizer && spectrum.dimension() >= 3 {
            spectrum.zero_mode_angle = Some(spectrum.angle_to_gradients(sol)?);
        }
        Ok(spectrum)
    }

    pub fn cutoff(&self) -> f64 {
        self.matrix.cutoff()
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn basis(&self) -> &ParityBasis {
        self.matrix.basis()
    }

    /// Eigenvector `j` (0-based, descending order) in basis coordinates.
    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        let (b, c) = self.order[j];
        let mut x = vec![0.0; self.dimension()];
        for (r, &a) in self.matrix.blocks[b].iter().enumerate() {
            x[a] = self.block_vectors[b][(r, c)];
        }
        x
    }

    pub fn eigenfield(&self, j: usize) -> Field {
        self.basis().synthesize(&self.eigenvector(j))
    }

    /// `1 - k_4`.
    pub fn gap(&self) -> Option<f64> {
        self.eigenvalues.get(3).map(|k| 1.0 - k)
    }

    /// Number of eigenvalues within `tol` of 1.
    pub fn zero_mode_count(&self, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|&&k| (1.0 - k).abs() <= tol).count()
    }

    /// The smallest eigenvalue below which radicands are not clamped.
    pub fn min_radicand(&self) -> f64 {
        self.eigenvalues.first().map_or(1.0, |k| 1.0 - k)
    }

    fn angle_to_gradients(&self, sol: &PekarSolution) -> Result<f64> {
        let u: Vec<Field> = (0..3).map(|j| self.eigenfield(j)).collect();
        let mut d: Vec<Field> = Vec::with_capacity(3);
        for a in 0..3 {
            let mut g = sol.phi.derivative(a);
            for _ in 0..2 {
                for e in &d {
                    let c = e.dot(&g)?;
                    g.axpy(-c, e)?;
                }
            }
            g.normalize()?;
            d.push(g);
        }
        let resid: Vec<Field> = d
            .iter()
            .map(|dj| {
                let mut r = dj.clone();
                for ui in &u {
                    let c = ui.dot(dj).expect("same lattice");
                    r.axpy(-c, ui).expect("same lattice");
                }
                r
            })
            .collect();
        let gram = Matrix3::from_fn(|i, j| resid[i].dot(&resid[j]).expect("same lattice"));
        let top = gram.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
        Ok(top.sqrt().min(1.0).asin())
    }

    /// `τ_L = κ′(2π/L)² / (1 + κ′(2π/L)²)` for a given `κ′`.
    pub fn tau_formula(&self, kappa: f64) -> f64 {
        let s2 = self.basis().lattice().spacing().powi(2);
        kappa * s2 / (1.0 + kappa * s2)
    }

    /// Free log-log fit of `k_j` against `j` over the last decade above the
    /// zero modes.
    pub fn tail_slope(&self) -> Result<ScalingFit> {
        let (x, y) = self.window_points(|j| j as f64)?;
        fit_power_law(&x, &y)
    }

    /// Free log-log fit of the eigenvalues against `l_j + 1`, with `l_j` the
    /// ordered eigenvalues of `-Δ` on `ran Π`.
    pub fn envelope_slope(&self) -> Result<ScalingFit> {
        let l = self.laplacian_eigenvalues();
        let (x, y) = self.window_points(|j| l[j - 1] + 1.0)?;
        fit_power_law(&x, &y)
    }

    fn laplacian_eigenvalues(&self) -> Vec<f64> {
        let s2 = self.basis().lattice().spacing().powi(2);
        self.basis().modes().iter().map(|m| m.shell() as f64 * s2).collect()
    }

    fn window_points(&self, x: impl Fn(usize) -> f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.dimension();
        if n < MIN_TAIL_EIGENVALUES {
            return Err(Error::Domain(format!(
                "tail fit needs at least {MIN_TAIL_EIGENVALUES} eigenvalues, got {n}"
            )));
        }
        let pts: Vec<(f64, f64)> = tail_window(n)
            .filter(|&j| self.eigenvalues[j - 1] > 0.0)
            .map(|j| (x(j), self.eigenvalues[j - 1]))
            .collect();
        Ok(pts.into_iter().unzip())
    }

    /// Diagonal of the operator at the constant state, `4/(L³|k|⁴)` for `K`
    /// and `4/(L³|k|²(|k|² + 1))` for `J`, as a function of `|k|`.
    pub fn model(&self) -> impl Fn(f64) -> f64 {
        let vol = self.basis().lattice().volume();
        let op = self.matrix.operator;
        move |r: f64| {
            let r2 = r * r;
            match op {
                Operator::K => 4.0 / (vol * r2 * r2),
                Operator::J => 4.0 / (vol * r2 * (r2 + 1.0)),
            }
        }
    }

    /// `c` in `⟨b_j, A b_j⟩ ≈ c · model(|k_j|)`, fitted as a ratio of sums
    /// over the last decade of basis functions in shell order.
    pub fn diagonal_fit(&self) -> Result<f64> {
        let n = self.dimension();
        if n < MIN_TAIL_EIGENVALUES {
            return Err(Error::Domain(format!(
                "tail fit needs at least {MIN_TAIL_EIGENVALUES} eigenvalues, got {n}"
            )));
        }
        let diag = self.matrix.diagonal();
        let l = self.laplacian_eigenvalues();
        let model = self.model();
        let (mut num, mut den) = (0.0, 0.0);
        for j in tail_window(n) {
            num += diag[j - 1];
            den += model(l[j - 1].sqrt());
        }
        Ok(num / den)
    }

    fn sum_beyond_cutoff(&self, g: &dyn Fn(f64) -> f64) -> f64 {
        let s = self.basis().lattice().spacing();
        sum_outside(s, self.cutoff() * (1.0 + 1e-9), g, Angular::One, Closure::default())
    }

    /// `Σ_j k_j` and the tail `c Σ_{|k| > Λ} model(|k|)`.
    pub fn trace_with_tail(&self) -> Result<(f64, f64)> {
        let c = self.diagonal_fit()?;
        let model = self.model();
        Ok((self.eigenvalues.iter().sum(), c * self.sum_beyond_cutoff(&|r| model(r))))
    }

    /// CSV with columns `j, k_j, one_minus_sqrt, cumulative_trace`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "j,k_j,one_minus_sqrt,cumulative_trace")?;
        let mut cum = 0.0;
        for (j, &k) in self.eigenvalues.iter().enumerate() {
            let t = one_minus_sqrt(k);
            cum += 0.5 * t;
            writeln!(w, "{},{:.9e},{:.9e},{:.9e}", j + 1, k, t, cum)?;
        }
        Ok(())
    }
}

/// `1 - √(max(0, 1 - k))`, written as `k / (1 + √(1 - k))` to keep small
/// `k` free of cancellation.
pub fn one_minus_sqrt(k: f64) -> f64 {
    if k >= 1.0 {
        return 1.0;
    }
    k / (1.0 + (1.0 - k).sqrt())
}

/// `ΠK_LΠ` assembled and diagonalized.
pub fn hessian_spectrum(sol: &PekarSolution, cutoff: f64, tol: f64) -> Result<HessianSpectrum> {
    HessianSpectrum::new(assemble_k(sol, cutoff, tol)?, sol)
}

/// `½ Σ_j (1 - √(1 - k_j))` and its extrapolated tail.
///
/// The tail is `½ Σ_{|k| > Λ} (1 - √(1 - c · 4/(L³|k|⁴)))`: beyond the
/// cutoff the operator is dominated by its diagonal in the plane-wave
/// basis, and `Tr K - Tr ΠKΠ` is exactly the diagonal remainder. In shell
/// order `|k|⁻⁴` is the `j^{-4/3}` law by mode counting.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct TraceCorrection {
    pub value: f64,
    pub tail: f64,
    /// Fitted ratio of the diagonal to its constant-state value.
    pub tail_constant: f64,
    pub clamped: usize,
}

impl TraceCorrection {
    pub fn total(&self) -> f64 {
        self.value + self.tail
    }
}

pub fn trace_correction(spectrum: &HessianSpectrum) -> Result<TraceCorrection> {
    let value = 0.5 * spectrum.eigenvalues.iter().map(|&k| one_minus_sqrt(k)).sum::<f64>();
    let c = spectrum.diagonal_fit()?;
    let model = spectrum.model();
    let tail = spectrum.sum_beyond_cutoff(&|r| 0.5 * one_minus_sqrt(c * model(r)));
    Ok(TraceCorrection {
        value,
        tail,
        tail_constant: c,
        clamped: spectrum.clamped,
    })
}

/// `½ Σ_{0 < |k| ≤ Λ} (1 - √(1 - 4/(L³|k|⁴)))` over `(2π/L)ℤ³`, with the
/// bound `Σ_{|k| > Λ} 2/(L³|k|⁴)` on the rest.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SmallL {
    pub value: f64,
    pub tail_bound: f64,
}

pub fn smalll_direct(side: f64, cutoff: f64) -> Result<SmallL> {
    if !(side > 0.0) {
        return Err(Error::Domain("side length must be positive".into()));
    }
    let s = 2.0 * std::f64::consts::PI / side;
    let vol = side.powi(3);
    let x0 = 4.0 / (vol * s.powi(4));
    if x0 > 1.0 {
        return Err(Error::Regime(format!(
            "4/(L³|k|⁴) = {x0} exceeds 1 on the first shell at L = {side}"
        )));
    }
    let term = |r: f64| 0.5 * one_minus_sqrt(4.0 / (vol * r.powi(4)));
    let value = crate::cutoff::sum_inside(s, cutoff, false, &term, Angular::One, None);
    let lo = cutoff.max(0.0) * (1.0 + 1e-9);
    let tail_bound = sum_outside(s, lo, &|r| 2.0 / (vol * r.powi(4)), Angular::One, Closure::default());
    Ok(SmallL { value, tail_bound })
}

/// Outcome of a finite-difference probe of `F_L` along `v`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct FdCheck {
    pub epsilon: f64,
    /// `|(F_L(φ_L + εv) - F_L(φ_L))/ε² - ⟨v, (1 - K_L)v⟩|`.
    pub discrepancy: f64,
    /// `⟨v, (1 - K_L)v⟩`.
    pub quadratic: f64,
    /// `ε ⟨v, J_L v⟩`.
    pub envelope: f64,
}

fn f_value(phi: &Field, guess: &Field, tol: f64) -> Result<f64> {
    let h = Hamiltonian::new(phi)?;
    let gs = crate::schroedinger::ground_state_of(
        &h,
        &crate::schroedinger::GroundStateOptions {
            tol,
            guess: Some(guess.clone()),
            ..Default::default()
        },
    )?;
    Ok(phi.norm_sqr() + gs.energy)
}

/// Second-order Taylor check of `F_L` at `φ_L` along a unit, real,
/// zero-mean direction `v`. `K_L` and `J_L` are applied on the full lattice.
pub fn hessian_fd_check(sol: &PekarSolution, v: &Field, eps: f64, tol: f64) -> Result<FdCheck> {
    sol.psi.check(v)?;
    if sol.regime != Regime::LocalizedMinimizer {
        return Err(Error::Regime("finite-difference check needs the localized regime".into()));
    }
    if !v.is_real() {
        return Err(Error::NotReal);
    }
    if v.coeffs()[0].norm() > 1e-12 || (v.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Domain("direction must be zero-mean with unit norm".into()));
    }
    let base = f_value(&sol.phi, &sol.psi, tol)?;
    let moved = sol.phi.combine(1.0, v, eps)?;
    let fe = f_value(&moved, &sol.psi, tol)?;
    let quadratic = 1.0 - v.dot(&apply_k(sol, v, 1e-12)?)?;
    let envelope = eps * v.dot(&apply_j(sol, v)?)?;
    Ok(FdCheck {
        epsilon: eps,
        discrepancy: ((fe - base) / (eps * eps) - quadratic).abs(),
        quadratic,
        envelope,
    })
}

/// Constrained spectral gaps of the `E_L` Hessian.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct EHessianProbe {
    /// Lowest eigenvalue of `L_ψ = h_{σ_ψ} - μ` on `{ψ}⊥`.
    pub h_prime: f64,
    /// Lowest eigenvalue of `L_ψ - 4X_ψ` on `{ψ, ∂_jψ}⊥`.
    pub h_doubleprime: f64,
    /// `‖L_ψ ψ‖`.
    pub el_residual: f64,
    /// `⟨∂_jψ, (L_ψ - 4X_ψ)∂_jψ⟩ / ‖∂_jψ‖²`.
    pub zero_mode_quotients: [f64; 3],
}

/// `h′` and `h″` by deflated LOBPCG.
pub fn e_hessian_gaps(sol: &PekarSolution, tol: f64) -> Result<EHessianProbe> {
    if sol.regime != Regime::LocalizedMinimizer {
        return Err(Error::Regime("E-Hessian gaps need the localized regime".into()));
    }
    let lat = *sol.lattice();
    let psi = &sol.psi;
    let h = sol.hamiltonian();
    let mu = sol.mu;
    let ell = |f: &Field| h.apply(f).combine(1.0, f, -mu).expect("same lattice");
    let inv_lap = Multiplier::laplacian_power(-1.0);
    let x_op = |f: &Field| {
        let a = psi.product(f).expect("same lattice");
        let b = apply_multiplier(&a, &inv_lap).expect("finite multiplier");
        let mut out = psi.product(&b).expect("same lattice");
        out.enforce_hermitian();
        out
    };
    let full = |f: &Field| ell(f).combine(1.0, &x_op(f), -4.0).expect("same lattice");
    let shift = h.preconditioner_shift(mu);
    let precond = |f: &Field| h.precondition(f, shift);
    let opts = EigenOptions {
        tol,
        max_iter: crate::schroedinger::EIGEN_MAX_ITER,
        converge_count: 1,
    };

    let first = lobpcg(&ell, &precond, random_block(lat, 4, 0x4e55), std::slice::from_ref(psi), &opts)?;

    let mut constraints = vec![psi.clone()];
    let mut derivs = Vec::with_capacity(3);
    for a in 0..3 {
        let d = psi.derivative(a);
        derivs.push(d.normalized()?);
        let mut g = d;
        for _ in 0..2 {
            for c in &constraints {
                let p = c.dot(&g)?;
                g.axpy(-p, c)?;
            }
        }
        g.normalize()?;
        constraints.push(g);
    }
    let second = lobpcg(&full, &precond, random_block(lat, 4, 0x4e56), &constraints, &opts)?;
    let mut quotients = [0.0; 3];
    for (q, d) in quotients.iter_mut().zip(&derivs) {
        *q = d.dot(&full(d))?;
    }
    Ok(EHessianProbe {
        h_prime: first.values[0],
        h_doubleprime: second.values[0],
        el_residual: ell(psi).norm(),
        zero_mode_quotients: quotients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scf::{minimize_pekar, Init, ScfOptions};

    #[test]
    fn constant_state_diagonal() {
        let lat = MomentumLattice::new(1.0, 8).unwrap();
        let sol = minimize_pekar(lat, &Init::Constant, &ScfOptions::default()).unwrap();
        assert_eq!(sol.regime, Regime::ConstantMinimizer);
        let m = assemble_k(&sol, 2.0 * std::f64::consts::PI * 2.0, 1e-12).unwrap();
        assert_eq!(m.symmetry_order, 48);
        let dense = m.dense();
        for (j, mode) in m.basis().modes().iter().enumerate() {
            let k2 = mode.shell() as f64 * lat.spacing().powi(2);
            let expect = 4.0 / k2.powi(2);
            for i in 0..m.dimension() {
                let want = if i == j { expect } else { 0.0 };
                assert!((dense[(i, j)] - want).abs() < 1e-12 * expect, "({i},{j})");
            }
        }
        let j = assemble_j(&sol, 2.0 * std::f64::consts::PI * 2.0).unwrap();
        let dj = j.dense();
        for (a, mode) in j.basis().modes().iter().enumerate() {
            let k2 = mode.shell() as f64 * lat.spacing().powi(2);
            assert!((dj[(a, a)] - 4.0 / (k2 * (k2 + 1.0))).abs() < 1e-14);
        }
    }

    #[test]
    fn restriction_is_leading_submatrix() {
        let lat = MomentumLattice::new(1.0, 8).unwrap();
        let sol = minimize_pekar(lat, &Init::Constant, &ScfOptions::default()).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        let big = assemble_j(&sol, two_pi * 3.0).unwrap();
        let small = big.restrict(two_pi * 1.5).unwrap();
        let direct = assemble_j(&sol, two_pi * 1.5).unwrap();
        assert_eq!(small.dimension(), direct.dimension());
        assert!((small.dense() - direct.dense()).norm() < 1e-15);
        assert!(big.restrict(two_pi * 4.0).is_err());
    }

    #[test]
    fn smalll_first_shell() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let s = smalll_direct(1.0, two_pi).unwrap();
        let x = 4.0 / two_pi.powi(4);
        assert!((s.value - 3.0 * (1.0 - (1.0 - x).sqrt())).abs() < 1e-15);
        assert_eq!(smalll_direct(1.0, 0.5 * two_pi).unwrap().value, 0.0);
        assert!(smalll_direct(400.0, 1.0).is_err());
    }

    #[test]
    fn random_block_is_real() {
        let lat = MomentumLattice::new(3.0, 8).unwrap();
        assert!(random_block(lat, 2, 1).iter().all(|f| f.is_real()));
    }
}
