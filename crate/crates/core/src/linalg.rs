//! Dense complex helpers shared by the estimators.
//!
//! Hermitian operators are frequently moved into a real coordinate system: the
//! orthonormal basis `{E_ii} ∪ {(E_ij + E_ji)/√2} ∪ {i(E_ij - E_ji)/√2}` of the
//! Hermitian matrices maps a D×D Hermitian matrix isometrically onto a real
//! vector of length D². Linear maps that preserve Hermiticity become real
//! symmetric D²×D² matrices in that basis.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

const SQRT2: f64 = std::f64::consts::SQRT_2;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest entrywise modulus of `m - m†`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().copied().sum()
}

/// `‖U†U − I‖_F`.
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    let n = u.ncols();
    (u.adjoint() * u - CMatrix::identity(n, n)).norm()
}

/// Eigendecomposition of the Hermitian part `(m + m†)/2`.
///
/// Eigenvalues are returned in ascending order together with the matching
/// eigenvector columns.
pub fn hermitian_eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitize(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `V diag(values) V†`.
pub fn from_spectrum(values: &[f64], vectors: &CMatrix) -> CMatrix {
    let n = vectors.nrows();
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    let out = scaled * vectors.adjoint();
    debug_assert_eq!(out.nrows(), n);
    hermitize(&out)
}

pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// Real coordinates of a Hermitian matrix in the orthonormal Hermitian basis.
///
/// Slot `i*D + j` holds `X_ii` on the diagonal, `√2 Re X_ij` for `i < j` and
/// `√2 Im X_ji` for `i > j`. Only the upper triangle of `x` is read.
pub fn herm_to_real(x: &CMatrix) -> RVector {
    let d = x.nrows();
    let mut out = RVector::zeros(d * d);
    for i in 0..d {
        out[i * d + i] = x[(i, i)].re;
        for j in (i + 1)..d {
            let z = x[(i, j)];
            out[i * d + j] = SQRT2 * z.re;
            out[j * d + i] = SQRT2 * z.im;
        }
    }
    out
}

/// Inverse of [`herm_to_real`].
pub fn real_to_herm(v: &[f64], d: usize) -> CMatrix {
    assert_eq!(v.len(), d * d, "real coordinate vector has wrong length");
    let mut out = CMatrix::zeros(d, d);
    for i in 0..d {
        out[(i, i)] = c(v[i * d + i], 0.0);
        for j in (i + 1)..d {
            let z = c(v[i * d + j], v[j * d + i]) / SQRT2;
            out[(i, j)] = z;
            out[(j, i)] = z.conj();
        }
    }
    out
}

/// Real coordinates of the rank-1 projector `u u†`, without forming it.
pub fn projector_to_real(u: &CVector, out: &mut [f64]) {
    let d = u.len();
    for i in 0..d {
        out[i * d + i] = u[i].norm_sqr();
        for j in (i + 1)..d {
            let z = u[i] * u[j].conj();
            out[i * d + j] = SQRT2 * z.re;
            out[j * d + i] = SQRT2 * z.im;
        }
    }
}

/// Column-major `vec(X)` of a D×D matrix.
pub fn vec(x: &CMatrix) -> CVector {
    CVector::from_iterator(x.len(), x.iter().copied())
}

pub fn unvec(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_iterator(d, d, v.iter().copied())
}

/// Matrix whose columns are `vec(B_b)` for the Hermitian basis, in the slot
/// order of [`herm_to_real`]. It is unitary and maps real coordinates to
/// column-major vectorizations.
pub fn hermitian_basis_matrix(d: usize) -> CMatrix {
    let n = d * d;
    let mut t = CMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for slot in 0..n {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[slot] = 1.0;
        let b = real_to_herm(&e, d);
        t.set_column(slot, &vec(&b));
    }
    t
}
