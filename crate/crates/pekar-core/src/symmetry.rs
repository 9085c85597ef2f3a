//! The point group of the cubic lattice (signed axis permutations) and the
//! subgroup leaving a field invariant.

use crate::lattice::{Field, C64};

/// The orthogonal map `(g m)_i = sign_i · m_{perm_i}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignedPermutation {
    pub perm: [usize; 3],
    pub sign: [i64; 3],
}

impl SignedPermutation {
    pub const IDENTITY: SignedPermutation = SignedPermutation {
        perm: [0, 1, 2],
        sign: [1, 1, 1],
    };

    #[inline]
    pub fn apply(&self, m: [i64; 3]) -> [i64; 3] {
        [
            self.sign[0] * m[self.perm[0]],
            self.sign[1] * m[self.perm[1]],
            self.sign[2] * m[self.perm[2]],
        ]
    }

    #[inline]
    pub fn apply_point(&self, x: [f64; 3]) -> [f64; 3] {
        [
            self.sign[0] as f64 * x[self.perm[0]],
            self.sign[1] as f64 * x[self.perm[1]],
            self.sign[2] as f64 * x[self.perm[2]],
        ]
    }

    pub fn inverse(&self) -> SignedPermutation {
        let mut perm = [0; 3];
        let mut sign = [1; 3];
        for i in 0..3 {
            perm[self.perm[i]] = i;
            sign[self.perm[i]] = self.sign[i];
        }
        SignedPermutation { perm, sign }
    }

    /// Whether this is a pure reflection `x_axis ↦ -x_axis`.
    pub fn is_axis_reflection(&self, axis: usize) -> bool {
        self.perm == [0, 1, 2] && (0..3).all(|i| self.sign[i] == if i == axis { -1 } else { 1 })
    }
}

/// All 48 signed permutations.
pub fn cubic_group() -> Vec<SignedPermutation> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(48);
    for perm in perms {
        for s in 0..8 {
            let sign = [
                if s & 1 == 0 { 1 } else { -1 },
                if s & 2 == 0 { 1 } else { -1 },
                if s & 4 == 0 { 1 } else { -1 },
            ];
            out.push(SignedPermutation { perm, sign });
        }
    }
    out
}

/// `(g f)(x) = f(g⁻¹ x)`, i.e. `(g f)_k = f_{g⁻¹ k}`.
pub fn act(g: &SignedPermutation, f: &Field) -> Field {
    let lat = *f.lattice();
    let inv = g.inverse();
    let coeffs: Vec<C64> = (0..lat.len())
        .map(|i| {
            if lat.is_nyquist(i) {
                return C64::new(0.0, 0.0);
            }
            let src = lat.index(inv.apply(lat.mode(i))).expect("cubic grid is closed");
            f.coeffs()[src]
        })
        .collect();
    Field::from_coeffs(lat, coeffs, f.is_real()).expect("same size")
}

/// Elements `g` with `‖g f − f‖ ≤ tol ‖f‖`.
pub fn invariance_group(f: &Field, tol: f64) -> Vec<SignedPermutation> {
    let nrm = f.norm();
    cubic_group()
        .into_iter()
        .filter(|g| {
            let lat = f.lattice();
            let mut d = 0.0;
            for i in 0..lat.len() {
                if lat.is_nyquist(i) {
                    continue;
                }
                let j = lat.index(g.apply(lat.mode(i))).expect("cubic grid is closed");
                d += (f.coeffs()[j] - f.coeffs()[i]).norm_sqr();
            }
            d.sqrt() <= tol * nrm
        })
        .collect()
}
