//! Lanczos propagation `e^{-iHt} x` with full reorthogonalization, for
//! Hermitian operators available only as a matrix-vector product.

use faer::Mat;
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_MAX_DIM: usize = 64;
/// Convergence threshold on the last Krylov coefficient of the propagated vector.
pub const COEFF_TOL: f64 = 1e-12;

fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn vnorm(a: &[c64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Outcome of one Krylov propagation.
#[derive(Debug, Clone)]
pub struct KrylovResult {
    pub state: Vec<c64>,
    pub krylov_dim: usize,
    /// Magnitude of the last Krylov coefficient, an error estimate.
    pub tail: f64,
}

/// `e^{-iHt} x` using at most `max_dim` Lanczos vectors.
///
/// The subspace grows until the last coefficient of the propagated vector in
/// the Krylov basis drops below [`COEFF_TOL`] (relative to `‖x‖`), or the
/// recurrence terminates because the subspace is invariant.
pub fn krylov_propagate<F>(apply: F, x: &[c64], t: f64, max_dim: usize) -> Result<KrylovResult>
where
    F: Fn(&[c64], &mut [c64]),
{
    let n = x.len();
    let beta0 = vnorm(x);
    if beta0 == 0.0 || t == 0.0 {
        return Ok(KrylovResult { state: x.to_vec(), krylov_dim: 0, tail: 0.0 });
    }
    let max_dim = max_dim.min(n).max(1);
    let mut basis: Vec<Vec<c64>> = vec![x.iter().map(|v| v / beta0).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![c64::new(0.0, 0.0); n];
    loop {
        let m = basis.len();
        apply(&basis[m - 1], &mut w);
        let a = dot(&basis[m - 1], &w).re;
        alpha.push(a);
        // full reorthogonalization, applied twice
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let b = vnorm(&w);
        let invariant = b < 1e-14 * (a.abs() + beta.last().copied().unwrap_or(0.0)).max(1e-300);
        let (coeffs, tail) = small_propagator(&alpha, &beta, t)?;
        if invariant || tail < COEFF_TOL || m == max_dim {
            if !(invariant || tail < COEFF_TOL) {
                return Err(Error::KrylovConvergence(m));
            }
            let mut out = vec![c64::new(0.0, 0.0); n];
            for (q, c) in basis.iter().zip(&coeffs) {
                let s = c * beta0;
                for (o, qi) in out.iter_mut().zip(q) {
                    *o += s * qi;
                }
            }
            return Ok(KrylovResult { state: out, krylov_dim: m, tail: if invariant { 0.0 } else { tail } });
        }
        beta.push(b);
        basis.push(w.iter().map(|v| v / b).collect());
    }
}

/// `e^{-iTt} e_1` for the tridiagonal Lanczos matrix, and `|last entry|`.
fn small_propagator(alpha: &[f64], beta: &[f64], t: f64) -> Result<(Vec<c64>, f64)> {
    let m = alpha.len();
    let tri = Mat::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let (vals, vecs) = linalg::eigh_real(tri.as_ref())?;
    let coeffs: Vec<c64> = (0..m)
        .map(|i| (0..m).map(|k| linalg::cis(-vals[k] * t) * (vecs[(i, k)] * vecs[(0, k)])).sum())
        .collect();
    let tail = coeffs[m - 1].norm();
    Ok((coeffs, tail))
}

/// Propagates over `t` in the fewest equal sub-steps for which each Krylov
/// call converges within `max_dim`.
pub fn krylov_propagate_adaptive<F>(apply: F, x: &[c64], t: f64, max_dim: usize) -> Result<Vec<c64>>
where
    F: Fn(&[c64], &mut [c64]),
{
    let mut pieces = 1usize;
    loop {
        let dt = t / pieces as f64;
        let mut state = x.to_vec();
        let mut ok = true;
        for _ in 0..pieces {
            match krylov_propagate(&apply, &state, dt, max_dim) {
                Ok(r) => state = r.state,
                Err(Error::KrylovConvergence(_)) => {
                    ok = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if ok {
            return Ok(state);
        }
        if pieces >= 1 << 16 {
            return Err(Error::KrylovConvergence(max_dim));
        }
        pieces *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::haar_unitary;
    use rand::SeedableRng;

    fn dense_apply(h: &crate::linalg::CMat) -> impl Fn(&[c64], &mut [c64]) + '_ {
        move |x, y| {
            for i in 0..h.nrows() {
                y[i] = (0..h.ncols()).map(|j| h[(i, j)] * x[j]).sum();
            }
        }
    }

    #[test]
    fn diagonal_operator_gives_phases() {
        let d: Vec<f64> = (0..20).map(|k| 0.3 * k as f64 - 1.0).collect();
        let x: Vec<c64> = (0..20).map(|k| c64::new(1.0, k as f64 * 0.1)).collect();
        let apply = |a: &[c64], b: &mut [c64]| {
            for k in 0..a.len() {
                b[k] = a[k] * d[k];
            }
        };
        let r = krylov_propagate(apply, &x, 1.7, 64).unwrap();
        for k in 0..20 {
            assert!((r.state[k] - x[k] * linalg::cis(-d[k] * 1.7)).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let x = vec![c64::new(0.6, 0.0), c64::new(0.0, 0.8)];
        let r = krylov_propagate(|a: &[c64], b: &mut [c64]| b.copy_from_slice(a), &x, 0.0, 64).unwrap();
        assert_eq!(r.state, x);
    }

    #[test]
    fn matches_dense_exponential() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u = haar_unitary(128, &mut rng);
        let h = linalg::hermitize((&u + u.adjoint()).as_ref());
        let x: Vec<c64> = (0..128).map(|k| c64::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
        let xs = Mat::from_fn(128, 1, |i, _| x[i]);
        let want = linalg::expm_hermitian(h.as_ref(), 2.0).unwrap() * &xs;
        let got = krylov_propagate_adaptive(dense_apply(&h), &x, 2.0, 64).unwrap();
        let err = (0..128).map(|i| (want[(i, 0)] - got[i]).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        let n0 = vnorm(&x);
        assert!((vnorm(&got) - n0).abs() < 1e-10 * n0);
    }

    #[test]
    fn reports_non_convergence() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let u = haar_unitary(100, &mut rng);
        let h = linalg::scale(linalg::hermitize((&u + u.adjoint()).as_ref()).as_ref(), c64::new(50.0, 0.0));
        let x: Vec<c64> = (0..100).map(|k| c64::new(1.0, k as f64)).collect();
        assert!(matches!(krylov_propagate(dense_apply(&h), &x, 10.0, 8), Err(Error::KrylovConvergence(_))));
        assert!(krylov_propagate_adaptive(dense_apply(&h), &x, 1.0, 32).is_ok());
    }
}
