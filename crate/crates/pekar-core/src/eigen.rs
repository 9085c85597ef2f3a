//! Locally optimal block preconditioned conjugate gradient (LOBPCG) for the
//! lowest eigenpairs of a symmetric operator acting on real fields, with
//! optional hard constraints (the search space is kept orthogonal to them).

use crate::error::{Error, Result};
use crate::lattice::Field;
use nalgebra::{DMatrix, SymmetricEigen};

pub(crate) struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Number of leading pairs that must meet `tol`.
    pub converge_count: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Field>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Lowest Ritz value after every iteration.
    pub history: Vec<f64>,
}

fn project_out(v: &mut Field, image: Option<&mut Field>, basis: &[Field], images: Option<&[Field]>) {
    let mut coeffs = Vec::with_capacity(basis.len());
    for b in basis {
        let c = b.dot(v).expect("same lattice");
        v.axpy(-c, b).expect("same lattice");
        coeffs.push(c);
    }
    if let (Some(img), Some(ims)) = (image, images) {
        for (c, a) in coeffs.iter().zip(ims) {
            img.axpy(-c, a).expect("same lattice");
        }
    }
}

/// Appends `v` (with image `av`) to an orthonormal basis when it carries a
/// sufficiently independent direction.
fn push_orthonormal(basis: &mut Vec<Field>, images: &mut Vec<Field>, mut v: Field, mut av: Field) -> bool {
    let start = v.norm();
    if !(start > 0.0) {
        return false;
    }
    for _ in 0..2 {
        let (b, i) = (basis.as_slice(), images.as_slice());
        project_out(&mut v, Some(&mut av), b, Some(i));
    }
    let nrm = v.norm();
    if nrm <= 1e-10 * start || nrm == 0.0 {
        return false;
    }
    v.scale_mut(1.0 / nrm);
    av.scale_mut(1.0 / nrm);
    basis.push(v);
    images.push(av);
    true
}

fn ritz(basis: &[Field], images: &[Field]) -> (Vec<f64>, DMatrix<f64>) {
    let m = basis.len();
    let mut h = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let a = basis[i].dot(&images[j]).expect("same lattice");
            let b = basis[j].dot(&images[i]).expect("same lattice");
            h[(i, j)] = 0.5 * (a + b);
            h[(j, i)] = h[(i, j)];
        }
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vecs)
}

fn combine(basis: &[Field], coeffs: impl Iterator<Item = (usize, f64)>) -> Field {
    let mut out = Field::zeros(*basis[0].lattice());
    for (j, c) in coeffs {
        if c != 0.0 {
            out.axpy(c, &basis[j]).expect("same lattice");
        }
    }
    out.set_real(basis.iter().all(|b| b.is_real()));
    out
}

/// Lowest `start.len()` eigenpairs of `op` on the orthogonal complement of
/// `constraints` (which must be orthonormal).
pub(crate) fn lobpcg(
    op: &dyn Fn(&Field) -> Field,
    precond: &dyn Fn(&Field) -> Field,
    start: Vec<Field>,
    constraints: &[Field],
    opts: &EigenOptions,
) -> Result<EigenResult> {
    let b = start.len();
    let mut xs = Vec::new();
    let mut axs = Vec::new();
    let refresh = |xs: &mut Vec<Field>, axs: &mut Vec<Field>, vs: Vec<Field>| {
        xs.clear();
        axs.clear();
        for mut v in vs {
            project_out(&mut v, None, constraints, None);
            project_out(&mut v, None, constraints, None);
            let av = op(&v);
            push_orthonormal(xs, axs, v, av);
        }
    };
    refresh(&mut xs, &mut axs, start);
    if xs.len() < b {
        return Err(Error::Degenerate("eigensolver start block is rank deficient".into()));
    }
    let (vals, c) = ritz(&xs, &axs);
    let mut values = vals;
    let rotate = |set: &[Field], c: &DMatrix<f64>, cols: usize, from: usize| -> Vec<Field> {
        (0..cols)
            .map(|k| combine(set, (from..set.len()).map(|j| (j, c[(j, k)]))))
            .collect()
    };
    let mut x = rotate(&xs, &c, b, 0);
    let mut ax = rotate(&axs, &c, b, 0);
    let mut p: Vec<Field> = Vec::new();
    let mut ap: Vec<Field> = Vec::new();
    let mut history = vec![values[0]];
    let need = opts.converge_count.min(b).max(1);
    let mut residuals = vec![f64::INFINITY; b];

    for iter in 1..=opts.max_iter {
        let mut r = Vec::with_capacity(b);
        for i in 0..b {
            // Residual of the compressed operator `Q A Q` on the complement.
            let mut ri = ax[i].combine(1.0, &x[i], -values[i]).expect("same lattice");
            project_out(&mut ri, None, constraints, None);
            residuals[i] = ri.norm();
            r.push(ri);
        }
        if residuals[..need].iter().all(|&res| res <= opts.tol) {
            // Confirm with fresh operator applications.
            let fresh: Vec<Field> = x.iter().map(op).collect();
            let mut ok = true;
            for i in 0..b {
                let mut ri = fresh[i].combine(1.0, &x[i], -values[i]).expect("same lattice");
                project_out(&mut ri, None, constraints, None);
                residuals[i] = ri.norm();
                ok &= i >= need || residuals[i] <= opts.tol;
            }
            if ok {
                return Ok(EigenResult {
                    values: values[..b].to_vec(),
                    vectors: x,
                    residuals,
                    iterations: iter - 1,
                    history,
                });
            }
            ax = fresh;
            p.clear();
            ap.clear();
            continue;
        }
        let mut basis = x.clone();
        let mut images = ax.clone();
        for ri in &r {
            let mut w = precond(ri);
            if w.is_real() {
                // Keep roundoff from opening the imaginary directions.
                w.enforce_hermitian();
            }
            project_out(&mut w, None, constraints, None);
            project_out(&mut w, None, &basis, None);
            let aw = op(&w);
            push_orthonormal(&mut basis, &mut images, w, aw);
        }
        for (pi, api) in p.iter().zip(&ap) {
            push_orthonormal(&mut basis, &mut images, pi.clone(), api.clone());
        }
        let (vals, c) = ritz(&basis, &images);
        values = vals;
        x = rotate(&basis, &c, b, 0);
        ax = rotate(&images, &c, b, 0);
        p = rotate(&basis, &c, b, b);
        ap = rotate(&images, &c, b, b);
        history.push(values[0]);
    }
    Err(Error::NoConvergence {
        what: "eigensolver",
        iterations: opts.max_iter,
        residual: residuals[0],
    })
}
