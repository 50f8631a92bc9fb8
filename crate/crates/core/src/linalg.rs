//! Dense complex matrix helpers on top of `faer`, plus the Gram form that
//! defines the Hilbert structure of the discretised Cauchy data.

use crate::error::{Error, Result};
pub use faer::c64;
use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Side};

pub type CMat = Mat<c64>;

pub const I: c64 = c64 { re: 0.0, im: 1.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

pub fn cr(re: f64) -> c64 {
    c64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize, m: usize) -> CMat {
    CMat::zeros(n, m)
}

pub fn from_rows(rows: &[&[c64]]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMat::from_fn(n, m, |i, j| rows[i][j])
}

pub fn scale(a: &CMat, z: c64) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * z)
}

pub fn scale_re(a: &CMat, s: f64) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// `a + z b`
pub fn axpy(a: &CMat, z: c64, b: &CMat) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + z * b[(i, j)])
}

pub fn add(a: &CMat, b: &CMat) -> CMat {
    a + b
}

pub fn sub(a: &CMat, b: &CMat) -> CMat {
    a - b
}

pub fn mul(a: &CMat, b: &CMat) -> CMat {
    a * b
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    &(a * b) - &(b * a)
}

pub fn hermitize(a: &CMat) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Block-diagonal multiplication operator `sum_j blocks[j] (x) e_j e_j^T` in
/// the spin-major layout used throughout (`index = spin * M + node`).
pub fn pointwise(blocks: &[[[c64; 2]; 2]]) -> CMat {
    let m = blocks.len();
    let mut out = zeros(2 * m, 2 * m);
    for (j, b) in blocks.iter().enumerate() {
        for s in 0..2 {
            for r in 0..2 {
                out[(s * m + j, r * m + j)] = b[s][r];
            }
        }
    }
    out
}

pub fn diag_real(v: &[f64]) -> CMat {
    CMat::from_fn(v.len(), v.len(), |i, j| if i == j { cr(v[i]) } else { ZERO })
}

/// `diag(l) A diag(r)` for real diagonals.
pub fn scale_rows_cols(a: &CMat, l: &[f64], r: &[f64]) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * (l[i] * r[j]))
}

pub fn fro_norm(a: &CMat) -> f64 {
    a.norm_l2()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.norm_max()
}

/// Spectral norm (largest singular value).
pub fn op_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    match a.singular_values() {
        Ok(s) => s.first().copied().unwrap_or(0.0),
        Err(_) => fro_norm(a),
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn herm_eigenvalues(a: &CMat) -> Result<Vec<f64>> {
    let h = hermitize(a);
    h.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))
}

/// Hermitian eigendecomposition `a = V diag(w) V*`, ascending `w`.
pub fn herm_eigen(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let h = hermitize(a);
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let w = (0..h.nrows()).map(|i| s[i].re).collect();
    Ok((w, evd.U().to_owned()))
}

/// `V diag(f) V*` for unitary `V`.
pub fn herm_apply(vals: &[c64], v: &CMat) -> CMat {
    let vs = CMat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * vals[j]);
    &vs * v.adjoint()
}

pub fn solve(a: &CMat, b: &CMat) -> CMat {
    a.partial_piv_lu().solve(b)
}

pub fn inverse(a: &CMat) -> CMat {
    a.partial_piv_lu().inverse()
}

/// Positive definite Hermitian form on `C^n`.  Most Gram forms here are
/// diagonal; the general case goes through a Cholesky factor `G = L L*`.
#[derive(Clone, Debug)]
pub struct Gram {
    matrix: CMat,
    diag: Option<Vec<f64>>,
    chol: CMat,
    chol_inv: CMat,
}

impl Gram {
    pub fn new(matrix: CMat) -> Result<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() {
            return Err(Error::LinearAlgebra("Gram matrix must be square".into()));
        }
        let herm_res = fro_norm(&(&matrix - matrix.adjoint())) / fro_norm(&matrix).max(1e-300);
        if herm_res > 1e-12 {
            return Err(Error::Adjoint { residual: herm_res });
        }
        let is_diag = (0..n).all(|i| (0..n).all(|j| i == j || matrix[(i, j)] == ZERO));
        if is_diag {
            let d: Vec<f64> = (0..n).map(|i| matrix[(i, i)].re).collect();
            if d.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::LinearAlgebra("Gram form is not positive definite".into()));
            }
            let sq: Vec<f64> = d.iter().map(|x| x.sqrt()).collect();
            let chol = diag_real(&sq);
            let chol_inv = diag_real(&sq.iter().map(|x| 1.0 / x).collect::<Vec<_>>());
            return Ok(Gram { matrix, diag: Some(d), chol, chol_inv });
        }
        let llt = hermitize(&matrix)
            .llt(Side::Lower)
            .map_err(|_| Error::LinearAlgebra("Gram form is not positive definite".into()))?;
        let chol = llt.L().to_owned();
        let chol_inv = inverse(&chol);
        Ok(Gram { matrix, diag: None, chol, chol_inv })
    }

    pub fn from_diag(d: &[f64]) -> Result<Self> {
        Self::new(diag_real(d))
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn diagonal(&self) -> Option<&[f64]> {
        self.diag.as_deref()
    }

    /// `L* A L^{-*}`: the unitary picture in which G-selfadjoint means Hermitian.
    pub fn to_sym(&self, a: &CMat) -> CMat {
        match &self.diag {
            Some(d) => {
                let s: Vec<f64> = d.iter().map(|x| x.sqrt()).collect();
                let si: Vec<f64> = s.iter().map(|x| 1.0 / x).collect();
                scale_rows_cols(a, &s, &si)
            }
            None => &(self.chol.adjoint() * a) * self.chol_inv.adjoint(),
        }
    }

    /// Inverse of [`Gram::to_sym`].
    pub fn from_sym(&self, b: &CMat) -> CMat {
        match &self.diag {
            Some(d) => {
                let s: Vec<f64> = d.iter().map(|x| x.sqrt()).collect();
                let si: Vec<f64> = s.iter().map(|x| 1.0 / x).collect();
                scale_rows_cols(b, &si, &s)
            }
            None => &(self.chol_inv.adjoint() * b) * self.chol.adjoint(),
        }
    }

    /// `L* f` for column vectors, so that `f* G f = |L* f|^2`.
    pub fn to_sym_vectors(&self, f: &CMat) -> CMat {
        match &self.diag {
            Some(d) => CMat::from_fn(f.nrows(), f.ncols(), |i, j| f[(i, j)] * d[i].sqrt()),
            None => self.chol.adjoint() * f,
        }
    }

    /// Eigenvectors of `to_sym(A)` mapped back: `L^{-*} Y`, G-orthonormal if `Y` is unitary.
    pub fn vectors_from_sym(&self, y: &CMat) -> CMat {
        match &self.diag {
            Some(d) => CMat::from_fn(y.nrows(), y.ncols(), |i, j| y[(i, j)] / d[i].sqrt()),
            None => self.chol_inv.adjoint() * y,
        }
    }

    /// G-adjoint `G^{-1} A* G`.
    pub fn adjoint(&self, a: &CMat) -> CMat {
        match &self.diag {
            Some(d) => {
                let inv: Vec<f64> = d.iter().map(|x| 1.0 / x).collect();
                scale_rows_cols(&adjoint(a), &inv, d)
            }
            None => {
                let ginv = &self.chol_inv.adjoint() * &self.chol_inv;
                &(&ginv * a.adjoint()) * &self.matrix
            }
        }
    }

    /// Operator norm induced by the form.
    pub fn norm(&self, a: &CMat) -> f64 {
        op_norm(&self.to_sym(a))
    }

    /// Relative failure of G-selfadjointness, `|GA - A*G| / |GA|`.
    pub fn selfadjoint_residual(&self, a: &CMat) -> f64 {
        let ga = &self.matrix * a;
        let d = &ga - ga.adjoint();
        fro_norm(&d) / fro_norm(&ga).max(1e-300)
    }

    /// `|U* G U - G| / |G|`.
    pub fn unitarity_residual(&self, u: &CMat) -> f64 {
        let d = &(&(u.adjoint() * &self.matrix) * u) - &self.matrix;
        op_norm(&d) / op_norm(&self.matrix)
    }

    /// Inverse of a G-unitary operator, `G^{-1} U* G`.
    pub fn unitary_inverse(&self, u: &CMat) -> CMat {
        self.adjoint(u)
    }
}
