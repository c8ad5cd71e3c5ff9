//! Dense linear-algebra helpers on top of `faer`.
//!
//! Everything downstream works with `Mat<c64>` for operators and `Col<c64>`
//! for states. Real symmetric matrices (collective Hamiltonians in the `S_z`
//! basis are real) get their own fast paths because a real eigensolver is
//! roughly four times cheaper than the complex one.

use faer::linalg::solvers::Solve;
use faer::{Col, ColRef, Mat, MatRef, Side};

pub use faer::c64;

use crate::error::{Error, Result};

pub type CMat = Mat<c64>;
pub type RMat = Mat<f64>;
pub type CVec = Col<c64>;

pub const I: c64 = c64 { re: 0.0, im: 1.0 };

#[inline]
pub fn cis(phase: f64) -> c64 {
    c64::new(phase.cos(), phase.sin())
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
}

pub fn to_complex(r: MatRef<'_, f64>) -> CMat {
    Mat::from_fn(r.nrows(), r.ncols(), |i, j| c64::new(r[(i, j)], 0.0))
}

pub fn adjoint(m: MatRef<'_, c64>) -> CMat {
    m.adjoint().to_owned()
}

pub fn scale(m: MatRef<'_, c64>, s: c64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub fn commutator(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    a * b - b * a
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    let mut acc = c64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            best = best.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    best
}

/// Largest entry of `M - M†`.
pub fn hermiticity_residual(m: MatRef<'_, c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j.min(m.nrows() - 1) {
            best = best.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    best
}

/// Largest entry of `U†U - 1`.
pub fn unitarity_residual(u: MatRef<'_, c64>) -> f64 {
    let g = u.adjoint() * u;
    max_abs_diff(g.as_ref(), identity(u.nrows()).as_ref())
}

pub fn hermitize(m: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Returns the diagonal if every off-diagonal entry is exactly zero.
pub fn exact_diagonal(m: MatRef<'_, c64>) -> Option<Vec<c64>> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j && m[(i, j)] != c64::new(0.0, 0.0) {
                return None;
            }
        }
    }
    Some((0..m.nrows()).map(|i| m[(i, i)]).collect())
}

/// Hermitian eigendecomposition, eigenvalues ascending.
pub fn eigh(h: MatRef<'_, c64>) -> Result<(Vec<f64>, CMat)> {
    let evd = h.self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenConvergence)?;
    let s = evd.S();
    let vals = (0..h.nrows()).map(|i| s[i].re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Real symmetric eigendecomposition, eigenvalues ascending.
pub fn eigh_real(h: MatRef<'_, f64>) -> Result<(Vec<f64>, RMat)> {
    let evd = h.self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenConvergence)?;
    let s = evd.S();
    let vals = (0..h.nrows()).map(|i| s[i]).collect();
    Ok((vals, evd.U().to_owned()))
}

/// `V diag(f(λ)) V†` for an eigensystem of a Hermitian matrix.
pub fn spectral_function(vals: &[f64], vecs: MatRef<'_, c64>, f: impl Fn(f64) -> c64) -> CMat {
    let phases: Vec<c64> = vals.iter().map(|&e| f(e)).collect();
    let scaled = Mat::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] * phases[j]);
    scaled * vecs.adjoint()
}

/// Same as [`spectral_function`] for a real orthogonal eigenbasis.
pub fn spectral_function_real(vals: &[f64], vecs: MatRef<'_, f64>, f: impl Fn(f64) -> c64) -> CMat {
    let phases: Vec<c64> = vals.iter().map(|&e| f(e)).collect();
    let n = vecs.nrows();
    let re = Mat::from_fn(n, n, |i, j| vecs[(i, j)] * phases[j].re);
    let im = Mat::from_fn(n, n, |i, j| vecs[(i, j)] * phases[j].im);
    let re = re * vecs.transpose();
    let im = im * vecs.transpose();
    Mat::from_fn(n, n, |i, j| c64::new(re[(i, j)], im[(i, j)]))
}

/// `e^{-iHt}` through the Hermitian eigendecomposition of `H`.
pub fn expm_hermitian(h: MatRef<'_, c64>, t: f64) -> Result<CMat> {
    if t == 0.0 {
        return Ok(identity(h.nrows()));
    }
    let (vals, vecs) = eigh(h)?;
    Ok(spectral_function(&vals, vecs.as_ref(), |e| cis(-e * t)))
}

/// `e^{-iHt}` for a real symmetric `H`.
pub fn expm_symmetric(h: MatRef<'_, f64>, t: f64) -> Result<CMat> {
    if t == 0.0 {
        return Ok(identity(h.nrows()));
    }
    let (vals, vecs) = eigh_real(h)?;
    Ok(spectral_function_real(&vals, vecs.as_ref(), |e| cis(-e * t)))
}

/// `R v` for real `R` and complex `v`, as one real product with two columns.
pub fn real_mul_vec(r: MatRef<'_, f64>, v: ColRef<'_, c64>) -> CVec {
    let split = Mat::from_fn(v.nrows(), 2, |i, j| if j == 0 { v[i].re } else { v[i].im });
    let out = r * &split;
    Col::from_fn(r.nrows(), |i| c64::new(out[(i, 0)], out[(i, 1)]))
}

/// `Rᵀ v` for real `R` and complex `v`.
pub fn real_t_mul_vec(r: MatRef<'_, f64>, v: ColRef<'_, c64>) -> CVec {
    real_mul_vec(r.transpose(), v)
}

/// `R M` for real `R` and complex `M`.
pub fn real_mul_mat(r: MatRef<'_, f64>, m: MatRef<'_, c64>) -> CMat {
    let re = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re);
    let im = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].im);
    let re = r * &re;
    let im = r * &im;
    Mat::from_fn(r.nrows(), m.ncols(), |i, j| c64::new(re[(i, j)], im[(i, j)]))
}

/// `M R` for complex `M` and real `R`.
pub fn mat_mul_real(m: MatRef<'_, c64>, r: MatRef<'_, f64>) -> CMat {
    let re = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re);
    let im = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].im);
    let re = &re * r;
    let im = &im * r;
    Mat::from_fn(m.nrows(), r.ncols(), |i, j| c64::new(re[(i, j)], im[(i, j)]))
}

/// `⟨a|b⟩`.
pub fn inner(a: ColRef<'_, c64>, b: ColRef<'_, c64>) -> c64 {
    (0..a.nrows()).map(|i| a[i].conj() * b[i]).sum()
}

pub fn norm(v: ColRef<'_, c64>) -> f64 {
    (0..v.nrows()).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨v|A|v⟩` (real part) for a Hermitian `A`.
pub fn expectation(a: MatRef<'_, c64>, v: ColRef<'_, c64>) -> f64 {
    let av = a * v;
    inner(v, av.as_ref()).re
}

/// Eigenbasis of a unitary operator from the Cayley transform
/// `K = i (1 - e^{-iγ}U)(1 + e^{-iγ}U)^{-1}`, which is Hermitian, commutes
/// with `U`, and maps the eigenphase `θ` to `tan((θ - γ)/2)` injectively.
/// The Hermitian solver then hands back an orthonormal basis even inside
/// degenerate clusters.
///
/// Returns `(eigenvectors, max |tan((θ-γ)/2)|)`.
pub(crate) fn cayley_eigenbasis(u: MatRef<'_, c64>, gamma: f64) -> Result<(CMat, f64)> {
    let n = u.nrows();
    let shift = cis(-gamma);
    let w = scale(u, shift);
    let one = c64::new(1.0, 0.0);
    let plus = Mat::from_fn(n, n, |i, j| if i == j { one + w[(i, j)] } else { w[(i, j)] });
    let minus = Mat::from_fn(n, n, |i, j| if i == j { one - w[(i, j)] } else { -w[(i, j)] });
    let lu = plus.partial_piv_lu();
    let x = lu.solve(&minus);
    let k = hermitize(scale(x.as_ref(), I).as_ref());
    if !max_abs(k.as_ref()).is_finite() {
        return Err(Error::EigenConvergence);
    }
    let (vals, vecs) = eigh(k.as_ref())?;
    let spread = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((vecs, spread))
}
