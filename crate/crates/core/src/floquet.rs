//! Trotter Floquet operators, their spectra, and stroboscopic propagation.

use faer::{Col, Mat};
use serde::{Deserialize, Serialize};

use crate::banded::Banded;
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat, CVec};
use crate::spin::{self, Axis, QuantumState, TopParams};

/// Above this dimension stroboscopic propagation switches from a dense
/// Floquet matrix to Chebyshev products with the banded Hamiltonians.
pub const DENSE_PROPAGATION_LIMIT: usize = 1600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrotterVariant {
    /// `e^{-iH_zτ} e^{-iH_xτ}`
    #[default]
    First,
    /// `e^{-iH_xτ/2} e^{-iH_zτ} e^{-iH_xτ/2}`
    Symmetric,
}

/// Eigenphases in `(-π, π]`, ascending, with column-aligned eigenvectors.
#[derive(Debug, Clone)]
pub struct FloquetSpectrum {
    pub phases: Vec<f64>,
    pub vectors: CMat,
}

impl FloquetSpectrum {
    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    /// Largest `|U v_n - e^{iθ_n} v_n|` over all eigenpairs.
    pub fn eigen_residual(&self, u: &CMat) -> f64 {
        let uv = u * &self.vectors;
        let mut worst = 0.0f64;
        for (n, &th) in self.phases.iter().enumerate() {
            let e = linalg::cis(th);
            for i in 0..self.dim() {
                worst = worst.max((uv[(i, n)] - self.vectors[(i, n)] * e).norm());
            }
        }
        worst
    }

    /// Largest entry of `V†V - 1`.
    pub fn orthonormality_residual(&self) -> f64 {
        linalg::unitarity_residual(self.vectors.as_ref())
    }

    /// `V diag(e^{iθ}) V†`.
    pub fn reconstruct(&self) -> CMat {
        let v = &self.vectors;
        let scaled = Mat::from_fn(self.dim(), self.dim(), |i, j| v[(i, j)] * linalg::cis(self.phases[j]));
        scaled * v.adjoint()
    }

    /// Groups of indices whose phases lie within `tol` of a neighbour,
    /// treating the phase axis as a circle. Singletons are included.
    pub fn clusters(&self, tol: f64) -> Vec<Vec<usize>> {
        let d = self.dim();
        if d == 0 {
            return Vec::new();
        }
        let mut groups: Vec<Vec<usize>> = vec![vec![0]];
        for n in 1..d {
            if self.phases[n] - self.phases[n - 1] < tol {
                groups.last_mut().unwrap().push(n);
            } else {
                groups.push(vec![n]);
            }
        }
        if groups.len() > 1 && self.phases[0] + 2.0 * std::f64::consts::PI - self.phases[d - 1] < tol {
            let first = groups.remove(0);
            groups.last_mut().unwrap().extend(first);
        }
        groups
    }

    /// Number of clusters holding more than one phase.
    pub fn degenerate_cluster_count(&self, tol: f64) -> usize {
        self.clusters(tol).iter().filter(|c| c.len() > 1).count()
    }
}

/// Maps an angle into `(-π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y -= two_pi;
    }
    if y <= -std::f64::consts::PI {
        y += two_pi;
    }
    y
}

/// Diagonal of `e^{-iH_zτ}`.
fn hz_phases(p: &TopParams, t: f64) -> Vec<c64> {
    spin::hz_diagonal(p).into_iter().map(|e| linalg::cis(-e * t)).collect()
}

/// `e^{-iH_x t}`.
pub fn x_rotation(p: &TopParams, t: f64) -> Result<CMat> {
    linalg::expm_symmetric(spin::hx_real(p).as_ref(), t)
}

/// `Q = e^{-iH_xτ/2}`, relating the two Trotter variants by `U_τ = Q† U_{τ,s} Q`.
pub fn half_step_x(p: &TopParams) -> Result<CMat> {
    x_rotation(p, 0.5 * p.tau)
}

pub fn floquet_operator(p: &TopParams) -> Result<CMat> {
    p.validate()?;
    let x = x_rotation(p, p.tau)?;
    let z = hz_phases(p, p.tau);
    Ok(Mat::from_fn(p.dim(), p.dim(), |i, j| z[i] * x[(i, j)]))
}

pub fn symmetric_floquet_operator(p: &TopParams) -> Result<CMat> {
    p.validate()?;
    let q = half_step_x(p)?;
    let z = hz_phases(p, p.tau);
    let zq = Mat::from_fn(p.dim(), p.dim(), |i, j| z[i] * q[(i, j)]);
    Ok(&q * &zq)
}

pub fn trotter_operator(p: &TopParams, variant: TrotterVariant) -> Result<CMat> {
    match variant {
        TrotterVariant::First => floquet_operator(p),
        TrotterVariant::Symmetric => symmetric_floquet_operator(p),
    }
}

/// Exact `e^{-iHt}` for `H = H_x + H_z`.
pub fn ideal_operator(p: &TopParams, t: f64) -> Result<CMat> {
    linalg::expm_symmetric(spin::top_hamiltonian_real(p).as_ref(), t)
}

/// Dense `H = H_x + H_z` as a complex matrix.
pub fn top_hamiltonian(p: &TopParams) -> CMat {
    linalg::to_complex(spin::top_hamiltonian_real(p).as_ref())
}

/// Eigen-decomposition of a unitary matrix.
///
/// Eigenvectors come from the Hermitian Cayley transform of `e^{-iγ}U`
/// (see `linalg::cayley_eigenbasis`), which returns an orthonormal basis even
/// for degenerate phases; the phases themselves are Rayleigh quotients. The
/// reference angle `γ` is moved into the widest spectral gap whenever the
/// first guess sits too close to an eigenphase.
pub fn diagonalize_unitary(u: &CMat) -> Result<FloquetSpectrum> {
    let d = u.nrows();
    if u.ncols() != d {
        return Err(Error::InvalidParameter("matrix is not square".into()));
    }
    let res = linalg::unitarity_residual(u.as_ref());
    if !(res < 1e-9) {
        return Err(Error::NotUnitary(res));
    }
    if d == 0 {
        return Ok(FloquetSpectrum { phases: Vec::new(), vectors: Mat::zeros(0, 0) });
    }
    let mut gamma = std::f64::consts::PI - std::f64::consts::FRAC_1_PI;
    let mut best: Option<(CMat, f64)> = None;
    for _ in 0..3 {
        let (vecs, spread) = match linalg::cayley_eigenbasis(u.as_ref(), gamma) {
            Ok(v) => v,
            Err(_) => {
                gamma += 0.5;
                continue;
            }
        };
        let good = spread < 1e3;
        let phases = rayleigh_phases(u, &vecs);
        if best.as_ref().is_none_or(|b| spread < b.1) {
            best = Some((vecs, spread));
        }
        if good {
            break;
        }
        gamma = widest_gap_centre(&phases);
    }
    let (vecs, _) = best.ok_or(Error::EigenConvergence)?;
    let phases = rayleigh_phases(u, &vecs);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| phases[a].total_cmp(&phases[b]));
    let sorted_phases = order.iter().map(|&k| phases[k]).collect();
    let vectors = Mat::from_fn(d, d, |i, j| vecs[(i, order[j])]);
    Ok(FloquetSpectrum { phases: sorted_phases, vectors })
}

fn rayleigh_phases(u: &CMat, vecs: &CMat) -> Vec<f64> {
    let uv = u * vecs;
    (0..vecs.ncols())
        .map(|n| {
            let mut z = c64::new(0.0, 0.0);
            for i in 0..vecs.nrows() {
                z += vecs[(i, n)].conj() * uv[(i, n)];
            }
            wrap_phase(z.arg())
        })
        .collect()
}

fn widest_gap_centre(phases: &[f64]) -> f64 {
    let mut p = phases.to_vec();
    p.sort_by(f64::total_cmp);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut best = (p[0] + two_pi - p[p.len() - 1], p[p.len() - 1]);
    for w in p.windows(2) {
        if w[1] - w[0] > best.0 {
            best = (w[1] - w[0], w[0]);
        }
    }
    best.1 + 0.5 * best.0
}

/// One stroboscopic step, either as a dense Floquet matrix or, for large
/// spins, as Chebyshev products with the banded factors.
#[derive(Debug, Clone)]
pub enum Stepper {
    Dense(CMat),
    Trotter {
        hx: Banded,
        hz: Vec<f64>,
        tau: f64,
        variant: TrotterVariant,
    },
    Exact {
        h: Banded,
        dt: f64,
    },
}

impl Stepper {
    /// Stepper for the Trotterized dynamics.
    pub fn trotter(p: &TopParams, variant: TrotterVariant) -> Result<Self> {
        p.validate()?;
        if p.dim() <= DENSE_PROPAGATION_LIMIT {
            Ok(Stepper::Dense(trotter_operator(p, variant)?))
        } else {
            Ok(Stepper::Trotter {
                hx: spin::collective_hamiltonian_banded(p.spin, p.h_x, p.j_x, Axis::X)?,
                hz: spin::hz_diagonal(p),
                tau: p.tau,
                variant,
            })
        }
    }

    /// Stepper advancing the exact dynamics by `dt`.
    pub fn ideal(p: &TopParams, dt: f64) -> Result<Self> {
        p.validate()?;
        if p.dim() <= DENSE_PROPAGATION_LIMIT {
            Ok(Stepper::Dense(ideal_operator(p, dt)?))
        } else {
            Ok(Stepper::Exact { h: spin::top_hamiltonian_banded(p), dt })
        }
    }

    pub fn apply(&self, psi: &CVec) -> CVec {
        match self {
            Stepper::Dense(u) => u * psi,
            Stepper::Trotter { hx, hz, tau, variant } => {
                let v: Vec<c64> = (0..psi.nrows()).map(|i| psi[i]).collect();
                let zphase = |v: &mut Vec<c64>| {
                    for (x, &e) in v.iter_mut().zip(hz) {
                        *x *= linalg::cis(-e * tau);
                    }
                };
                let out = match variant {
                    TrotterVariant::First => {
                        let mut w = hx.propagate(&v, *tau);
                        zphase(&mut w);
                        w
                    }
                    TrotterVariant::Symmetric => {
                        let mut w = hx.propagate(&v, 0.5 * tau);
                        zphase(&mut w);
                        hx.propagate(&w, 0.5 * tau)
                    }
                };
                Col::from_fn(out.len(), |i| out[i])
            }
            Stepper::Exact { h, dt } => {
                let v: Vec<c64> = (0..psi.nrows()).map(|i| psi[i]).collect();
                let out = h.propagate(&v, *dt);
                Col::from_fn(out.len(), |i| out[i])
            }
        }
    }
}

/// States after `1, 2, …, n` steps.
pub fn trotter_evolve(psi0: &QuantumState, p: &TopParams, n: usize, variant: TrotterVariant) -> Result<Vec<QuantumState>> {
    if n == 0 {
        return Err(Error::InvalidParameter("step count must be at least 1".into()));
    }
    if psi0.dim() != p.dim() {
        return Err(Error::InvalidParameter(format!("state dimension {} does not match D = {}", psi0.dim(), p.dim())));
    }
    let stepper = Stepper::trotter(p, variant)?;
    Ok(evolve_with(&stepper, psi0, n))
}

/// Repeatedly applies `stepper`, collecting every intermediate state.
pub fn evolve_with(stepper: &Stepper, psi0: &QuantumState, n: usize) -> Vec<QuantumState> {
    let mut out = Vec::with_capacity(n);
    let mut psi = psi0.amplitudes().clone();
    for _ in 0..n {
        psi = stepper.apply(&psi);
        out.push(QuantumState::normalized(psi.clone()).expect("unitary step preserves the norm"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, unitarity_residual};
    use crate::spin::Spin;
    use rand::SeedableRng;

    fn params(twice: u32, tau: f64) -> TopParams {
        TopParams::standard(Spin::from_twice(twice), tau)
    }

    #[test]
    fn zero_tau_gives_identity() {
        let p = params(8, 0.0);
        let id = linalg::identity(p.dim());
        assert!(max_abs_diff(floquet_operator(&p).unwrap().as_ref(), id.as_ref()) < 1e-15);
        assert!(max_abs_diff(symmetric_floquet_operator(&p).unwrap().as_ref(), id.as_ref()) < 1e-15);
    }

    #[test]
    fn operators_are_unitary() {
        for tau in [0.1, 1.0, 3.0] {
            let p = params(17, tau);
            assert!(unitarity_residual(floquet_operator(&p).unwrap().as_ref()) < 1e-12);
            assert!(unitarity_residual(symmetric_floquet_operator(&p).unwrap().as_ref()) < 1e-12);
        }
    }

    #[test]
    fn no_x_field_gives_diagonal_operator() {
        let mut p = params(10, 0.8);
        p.h_x = 0.0;
        p.j_x = 0.0;
        let u = floquet_operator(&p).unwrap();
        assert!(linalg::exact_diagonal(u.as_ref()).is_some() || {
            let mut off = 0.0f64;
            for i in 0..p.dim() {
                for j in 0..p.dim() {
                    if i != j {
                        off = off.max(u[(i, j)].norm());
                    }
                }
            }
            off < 1e-15
        });
    }

    #[test]
    fn symmetric_operator_is_complex_symmetric_and_conjugate() {
        let p = params(12, 0.9);
        let us = symmetric_floquet_operator(&p).unwrap();
        let ust = us.transpose().to_owned();
        assert!(max_abs_diff(us.as_ref(), ust.as_ref()) < 1e-10);
        let q = half_step_x(&p).unwrap();
        let u = floquet_operator(&p).unwrap();
        let conj = q.adjoint() * &us * &q;
        assert!(max_abs_diff(u.as_ref(), conj.as_ref()) < 1e-12);
    }

    #[test]
    fn diagonalize_identity_and_diagonal() {
        let s = diagonalize_unitary(&linalg::identity(5)).unwrap();
        assert!(s.phases.iter().all(|p| p.abs() < 1e-14));
        assert!(s.orthonormality_residual() < 1e-12);
        let u = Mat::from_fn(2, 2, |i, j| {
            if i != j {
                c64::new(0.0, 0.0)
            } else if i == 0 {
                linalg::cis(std::f64::consts::FRAC_PI_2)
            } else {
                linalg::cis(-std::f64::consts::FRAC_PI_2)
            }
        });
        let s = diagonalize_unitary(&u).unwrap();
        assert!((s.phases[0] + std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        assert!((s.phases[1] - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }

    #[test]
    fn diagonalize_minus_identity_maps_to_pi() {
        let u = linalg::scale(linalg::identity(3).as_ref(), c64::new(-1.0, 0.0));
        let s = diagonalize_unitary(&u).unwrap();
        assert!(s.phases.iter().all(|&p| (p - std::f64::consts::PI).abs() < 1e-12));
    }

    #[test]
    fn diagonalize_random_unitary() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u = crate::spectral::haar_unitary(16, &mut rng);
        let s = diagonalize_unitary(&u).unwrap();
        assert!(max_abs_diff(u.as_ref(), s.reconstruct().as_ref()) < 1e-10);
        assert!(s.eigen_residual(&u) < 1e-10);
        assert!(s.orthonormality_residual() < 1e-10);
    }

    #[test]
    fn rejects_non_unitary() {
        let m = linalg::scale(linalg::identity(3).as_ref(), c64::new(1.1, 0.0));
        assert!(matches!(diagonalize_unitary(&m), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn degenerate_spectrum_keeps_orthonormal_basis() {
        // Phases {0.3, 0.3, 0.3, -1, 2} in a random basis.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let v = crate::spectral::haar_unitary(5, &mut rng);
        let phases = [0.3, 0.3, 0.3, -1.0, 2.0];
        let scaled = Mat::from_fn(5, 5, |i, j| v[(i, j)] * linalg::cis(phases[j]));
        let u = scaled * v.adjoint();
        let s = diagonalize_unitary(&u).unwrap();
        assert!(s.orthonormality_residual() < 1e-10);
        assert!(s.eigen_residual(&u) < 1e-10);
        assert_eq!(s.degenerate_cluster_count(1e-8), 1);
    }

    #[test]
    fn spectrum_invariant_under_q_conjugation() {
        let p = params(20, 2.0);
        let a = diagonalize_unitary(&floquet_operator(&p).unwrap()).unwrap();
        let b = diagonalize_unitary(&symmetric_floquet_operator(&p).unwrap()).unwrap();
        for (x, y) in a.phases.iter().zip(&b.phases) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn evolve_single_step_is_matvec() {
        let p = params(6, 0.4);
        let psi = spin::coherent_state(p.spin, 0.7, 0.2);
        let states = trotter_evolve(&psi, &p, 1, TrotterVariant::First).unwrap();
        let direct = floquet_operator(&p).unwrap() * psi.amplitudes();
        for i in 0..p.dim() {
            assert!((states[0].amplitudes()[i] - direct[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn commuting_case_conserves_sz() {
        let mut p = params(9, 0.6);
        p.h_x = 0.0;
        p.j_x = 0.0;
        let psi = spin::coherent_state(p.spin, 1.0, 0.3);
        let z0 = spin::spin_expectations(p.spin, psi.amplitudes())[2];
        for st in trotter_evolve(&psi, &p, 50, TrotterVariant::First).unwrap() {
            let z = spin::spin_expectations(p.spin, st.amplitudes())[2];
            assert!((z - z0).abs() < 1e-12);
            assert!((st.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn banded_stepper_matches_dense() {
        let p = params(30, 0.7);
        let psi = spin::coherent_state(p.spin, 0.9, 0.1);
        for variant in [TrotterVariant::First, TrotterVariant::Symmetric] {
            let dense = Stepper::Dense(trotter_operator(&p, variant).unwrap());
            let band = Stepper::Trotter {
                hx: spin::collective_hamiltonian_banded(p.spin, p.h_x, p.j_x, Axis::X).unwrap(),
                hz: spin::hz_diagonal(&p),
                tau: p.tau,
                variant,
            };
            let a = dense.apply(psi.amplitudes());
            let b = band.apply(psi.amplitudes());
            for i in 0..p.dim() {
                assert!((a[i] - b[i]).norm() < 1e-12);
            }
        }
        let exact = Stepper::Exact { h: spin::top_hamiltonian_banded(&p), dt: 1.3 };
        let dense = Stepper::Dense(ideal_operator(&p, 1.3).unwrap());
        let a = dense.apply(psi.amplitudes());
        let b = exact.apply(psi.amplitudes());
        for i in 0..p.dim() {
            assert!((a[i] - b[i]).norm() < 1e-11);
        }
    }

    #[test]
    fn wrap_phase_branch() {
        assert_eq!(wrap_phase(-std::f64::consts::PI), std::f64::consts::PI);
        assert!((wrap_phase(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_phase(0.5) - 0.5).abs() < 1e-15);
    }
}
