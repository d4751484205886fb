//! Dense complex matrix helpers shared by every module.
//!
//! Everything is `DMatrix<Complex64>`; block matrices are stored flat with a
//! fixed square block size.

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

/// Default absolute tolerance on Frobenius residuals.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Relative threshold for numerical rank decisions.
pub const RANK_RTOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

/// Matrix unit `E_ij` in `M_d`.
pub fn matrix_unit(d: usize, i: usize, j: usize) -> CMat {
    let mut m = zeros(d, d);
    m[(i, j)] = cr(1.0);
    m
}

pub fn diag_real(values: &[f64]) -> CMat {
    let d = values.len();
    let mut m = zeros(d, d);
    for (i, v) in values.iter().enumerate() {
        m[(i, i)] = cr(*v);
    }
    m
}

/// Diagonal compression: keep the diagonal, zero the rest.
pub fn diag_part(m: &CMat) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| if i == j { m[(i, j)] } else { cr(0.0) })
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let r = rows.len();
    let cols = rows.first().map_or(0, |row| row.len());
    CMat::from_fn(r, cols, |i, j| cr(rows[i][j]))
}

pub fn frob(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint()
}

/// Frobenius inner product `tr(a* b)`.
pub fn frob_inner(a: &CMat, b: &CMat) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn trace(m: &CMat) -> Complex64 {
    m.trace()
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * cr(0.5)
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// Moore-Penrose inverse of a positive semidefinite matrix, discarding
/// eigenvalues below `rtol * max_eigenvalue`.
pub fn psd_pinv(m: &CMat, rtol: f64) -> CMat {
    let n = m.nrows();
    let (values, vectors) = hermitian_eigen(m);
    let top = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let mut out = zeros(n, n);
    if top == 0.0 {
        return out;
    }
    for (k, &lambda) in values.iter().enumerate() {
        if lambda > rtol * top {
            let v = vectors.column(k);
            out += (v * v.adjoint()) * cr(1.0 / lambda);
        }
    }
    out
}

/// Factor a PSD matrix as `F* F` with `F` of shape `rank × n`, dropping
/// eigenvalues below `rtol * max_eigenvalue`.
pub fn psd_factor(m: &CMat, rtol: f64) -> CMat {
    let n = m.nrows();
    let (values, vectors) = hermitian_eigen(m);
    let top = values.iter().fold(0.0_f64, |acc, v| acc.max(*v));
    let kept: Vec<usize> = if top > 0.0 {
        (0..n).filter(|&k| values[k] > rtol * top).collect()
    } else {
        Vec::new()
    };
    let mut f = zeros(kept.len(), n);
    for (row, &k) in kept.iter().enumerate() {
        let s = values[k].sqrt();
        for col in 0..n {
            f[(row, col)] = vectors[(col, k)].conj() * s;
        }
    }
    f
}

/// Least-squares solution of `a x = b` via truncated SVD.
pub fn lstsq(a: &CMat, b: &CMat, rtol: f64) -> CMat {
    if a.ncols() == 0 {
        return zeros(0, b.ncols());
    }
    if a.nrows() == 0 {
        return zeros(a.ncols(), b.ncols());
    }
    let svd = SVD::new(a.clone(), true, true);
    let top = svd.singular_values.iter().fold(0.0_f64, |acc, v| acc.max(*v));
    let eps = rtol * top;
    // `solve` treats singular values at or below eps as zero.
    svd.solve(b, eps).unwrap_or_else(|_| zeros(a.ncols(), b.ncols()))
}

/// Numerical rank by singular values relative to `reference`.
pub fn rank_rel(m: &CMat, reference: f64, rtol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 || reference <= 0.0 {
        return 0;
    }
    let svd = SVD::new(m.clone(), false, false);
    svd.singular_values.iter().filter(|&&s| s > rtol * reference).count()
}

/// Orthonormal basis (columns) of the range of `m`, singular values above
/// `threshold` only.
pub fn range_basis(m: &CMat, threshold: f64) -> CMat {
    if m.nrows() == 0 || m.ncols() == 0 {
        return zeros(m.nrows(), 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > threshold)
        .collect();
    CMat::from_fn(m.nrows(), keep.len(), |r, k| u[(r, keep[k])])
}

/// Column-major vectorisation.
pub fn vectorize(m: &CMat) -> Vec<Complex64> {
    m.iter().copied().collect()
}

pub fn block(m: &CMat, i: usize, j: usize, size: usize) -> CMat {
    m.view((i * size, j * size), (size, size)).into_owned()
}

pub fn set_block(m: &mut CMat, i: usize, j: usize, value: &CMat) {
    let size = value.nrows();
    m.view_mut((i * size, j * size), (size, value.ncols())).copy_from(value);
}

/// Block-diagonal matrix with `count` copies of `b`.
pub fn block_diag_repeat(b: &CMat, count: usize) -> CMat {
    let d = b.nrows();
    let mut m = zeros(count * d, count * d);
    for i in 0..count {
        set_block(&mut m, i, i, b);
    }
    m
}
