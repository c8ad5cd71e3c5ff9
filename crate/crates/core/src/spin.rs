//! Spin-S operators, coherent states and the collective top Hamiltonians.
//!
//! Basis ordering is descending `S_z`: index `k` holds `m = S - k`, so the
//! fully polarized state `|S, S⟩` is the first basis vector.

use faer::{Col, Mat};
use serde::{Deserialize, Serialize};

use crate::banded::Banded;
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat, CVec, RMat};

/// A spin size stored as the integer `2S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub fn new(s: f64) -> Result<Self> {
        let t = 2.0 * s;
        if !t.is_finite() || t < 0.0 || (t - t.round()).abs() > 1e-12 || t > u32::MAX as f64 {
            return Err(Error::InvalidSpin(s));
        }
        Ok(Spin { twice: t.round() as u32 })
    }

    pub const fn from_twice(twice: u32) -> Self {
        Spin { twice }
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// Hilbert-space dimension `2S + 1`.
    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// Magnetic quantum number of basis index `k`.
    pub fn m(self, k: usize) -> f64 {
        self.value() - k as f64
    }

    /// `S(S+1)`.
    pub fn casimir(self) -> f64 {
        let s = self.value();
        s * (s + 1.0)
    }
}

impl std::fmt::Display for Spin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Coefficients of `H = H_x + H_z` with `H_μ = h_μ S_μ + J_μ S_μ²/(2S+1)`,
/// in units where `J_z = 1`, together with the spin size and Trotter step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopParams {
    pub spin: Spin,
    pub tau: f64,
    pub h_x: f64,
    pub h_z: f64,
    pub j_x: f64,
    pub j_z: f64,
}

impl TopParams {
    /// The field and coupling values used throughout the threshold studies:
    /// `(h_x, J_x, h_z, J_z) = (0.1, 0.7, 0.3, 1)`.
    pub fn standard(spin: Spin, tau: f64) -> Self {
        TopParams { spin, tau, h_x: 0.1, h_z: 0.3, j_x: 0.7, j_z: 1.0 }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be finite and >= 0, got {}", self.tau)));
        }
        if self.spin.twice() == 0 {
            return Err(Error::InvalidParameter("spin size must be at least 1/2".into()));
        }
        for (name, v) in [("h_x", self.h_x), ("h_z", self.h_z), ("J_x", self.j_x), ("J_z", self.j_z)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }
}

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amps: CVec,
}

impl QuantumState {
    pub const NORM_TOL: f64 = 1e-12;

    /// Wraps `amps`, rejecting vectors whose norm differs from one.
    pub fn new(amps: CVec) -> Result<Self> {
        let n = linalg::norm(amps.as_ref());
        if (n - 1.0).abs() > Self::NORM_TOL * (amps.nrows() as f64).max(1.0) {
            return Err(Error::InvalidParameter(format!("state norm is {n}, expected 1")));
        }
        Ok(QuantumState { amps })
    }

    /// Rescales `amps` to unit norm.
    pub fn normalized(mut amps: CVec) -> Result<Self> {
        let n = linalg::norm(amps.as_ref());
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidParameter("cannot normalize a zero vector".into()));
        }
        for i in 0..amps.nrows() {
            amps[i] /= n;
        }
        Ok(QuantumState { amps })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        QuantumState {
            amps: Col::from_fn(dim, |i| if i == index { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) }),
        }
    }

    pub fn dim(&self) -> usize {
        self.amps.nrows()
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amps
    }

    pub fn into_inner(self) -> CVec {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(self.amps.as_ref())
    }
}

/// Dense `(S_x, S_y, S_z)` for one spin size.
#[derive(Debug, Clone)]
pub struct SpinOperatorSet {
    pub spin: Spin,
    pub sx: CMat,
    pub sy: CMat,
    pub sz: CMat,
}

impl SpinOperatorSet {
    pub fn dim(&self) -> usize {
        self.spin.dim()
    }

    pub fn get(&self, axis: Axis) -> &CMat {
        match axis {
            Axis::X => &self.sx,
            Axis::Y => &self.sy,
            Axis::Z => &self.sz,
        }
    }
}

/// `⟨m+1|S_+|m⟩` for the basis index `k` holding `m`, i.e. the entry
/// `(k-1, k)` of `S_+`.
fn ladder(spin: Spin, k: usize) -> f64 {
    let s = spin.value();
    let m = spin.m(k);
    (s * (s + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

pub fn spin_operators(s: f64) -> Result<SpinOperatorSet> {
    Ok(spin_operators_for(Spin::new(s)?))
}

pub fn spin_operators_for(spin: Spin) -> SpinOperatorSet {
    let d = spin.dim();
    let zero = c64::new(0.0, 0.0);
    let sx = Mat::from_fn(d, d, |i, j| {
        if j == i + 1 {
            c64::new(0.5 * ladder(spin, j), 0.0)
        } else if i == j + 1 {
            c64::new(0.5 * ladder(spin, i), 0.0)
        } else {
            zero
        }
    });
    // S_y = (S_+ - S_-)/(2i)
    let sy = Mat::from_fn(d, d, |i, j| {
        if j == i + 1 {
            c64::new(0.0, -0.5 * ladder(spin, j))
        } else if i == j + 1 {
            c64::new(0.0, 0.5 * ladder(spin, i))
        } else {
            zero
        }
    });
    let sz = Mat::from_fn(d, d, |i, j| if i == j { c64::new(spin.m(i), 0.0) } else { zero });
    SpinOperatorSet { spin, sx, sy, sz }
}

/// `S_x` as a real symmetric tridiagonal band.
pub fn sx_banded(spin: Spin) -> Banded {
    let d = spin.dim();
    let mut b = Banded::zeros(d, 1);
    for k in 1..d {
        b.set(k - 1, k, 0.5 * ladder(spin, k));
    }
    b
}

/// `h S_μ + J S_μ²/(2S+1)` for `μ ∈ {x, z}` in banded form (bandwidth 2 for
/// `x`, diagonal for `z`). Both are real in the `S_z` basis.
pub fn collective_hamiltonian_banded(spin: Spin, h: f64, j: f64, axis: Axis) -> Result<Banded> {
    let d = spin.dim();
    let w = j / d as f64;
    match axis {
        Axis::Z => {
            let mut b = Banded::zeros(d, 0);
            for k in 0..d {
                let m = spin.m(k);
                b.set(k, k, h * m + w * m * m);
            }
            Ok(b)
        }
        Axis::X => {
            let sx = sx_banded(spin);
            let sq = sx.square();
            let mut b = Banded::zeros(d, 2);
            for i in 0..d {
                for jj in i..(i + 3).min(d) {
                    b.set(i, jj, h * sx.get(i, jj) + w * sq.get(i, jj));
                }
            }
            Ok(b)
        }
        Axis::Y => Err(Error::InvalidParameter("banded form exists only for the x and z axes".into())),
    }
}

/// `h S_μ + J S_μ²/(2S+1)`.
pub fn collective_hamiltonian(ops: &SpinOperatorSet, h: f64, j: f64, axis: Axis) -> CMat {
    let s = ops.get(axis);
    let sq = s * s;
    let w = j / ops.dim() as f64;
    let mut out = Mat::from_fn(ops.dim(), ops.dim(), |a, b| s[(a, b)] * h + sq[(a, b)] * w);
    // Roundoff in the product can leave a ~1e-17 anti-Hermitian part.
    out = linalg::hermitize(out.as_ref());
    out
}

/// `H_x` as a dense real symmetric matrix.
pub fn hx_real(p: &TopParams) -> RMat {
    collective_hamiltonian_banded(p.spin, p.h_x, p.j_x, Axis::X)
        .expect("x axis has a banded form")
        .to_dense()
}

/// Diagonal of `H_z`.
pub fn hz_diagonal(p: &TopParams) -> Vec<f64> {
    let w = p.j_z / p.dim() as f64;
    (0..p.dim())
        .map(|k| {
            let m = p.spin.m(k);
            p.h_z * m + w * m * m
        })
        .collect()
}

/// Dense `H = H_x + H_z`, real symmetric.
pub fn top_hamiltonian_real(p: &TopParams) -> RMat {
    let mut h = hx_real(p);
    for (k, e) in hz_diagonal(p).into_iter().enumerate() {
        h[(k, k)] += e;
    }
    h
}

/// Banded `H = H_x + H_z`.
pub fn top_hamiltonian_banded(p: &TopParams) -> Banded {
    let mut h = collective_hamiltonian_banded(p.spin, p.h_x, p.j_x, Axis::X).expect("x axis");
    for (k, e) in hz_diagonal(p).into_iter().enumerate() {
        h.set(k, k, h.get(k, k) + e);
    }
    h
}

/// `e^{-iHt}` via the Hermitian eigendecomposition.
pub fn unitary_of(h: &CMat, t: f64) -> Result<CMat> {
    linalg::expm_hermitian(h.as_ref(), t)
}

fn ln_binomials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0f64; n + 1];
    for i in 1..=n {
        lf[i] = lf[i - 1] + (i as f64).ln();
    }
    (0..=n).map(|k| lf[n] - lf[k] - lf[n - k]).collect()
}

/// `|θ, φ⟩ = e^{iθ(S_x sin φ - S_y cos φ)}|S, S⟩` in closed form:
/// `c_k = sqrt(C(2S, k)) cos(θ/2)^{2S-k} sin(θ/2)^k e^{ikφ}`.
pub fn coherent_state(spin: Spin, theta: f64, phi: f64) -> QuantumState {
    let n = spin.twice() as usize;
    let lb = ln_binomials(n);
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let factor = |base: f64, exp: usize| -> Option<(f64, f64)> {
        if exp == 0 {
            Some((0.0, 1.0))
        } else if base == 0.0 {
            None
        } else {
            let sign = if base < 0.0 && exp % 2 == 1 { -1.0 } else { 1.0 };
            Some((exp as f64 * base.abs().ln(), sign))
        }
    };
    let amps = Col::from_fn(n + 1, |k| match (factor(c, n - k), factor(s, k)) {
        (Some((l1, s1)), Some((l2, s2))) => {
            let mag = (0.5 * lb[k] + l1 + l2).exp() * s1 * s2;
            linalg::cis(k as f64 * phi) * mag
        }
        _ => c64::new(0.0, 0.0),
    });
    // Closed form is normalized analytically; rescale away roundoff.
    QuantumState::normalized(amps).expect("coherent state has nonzero norm")
}

/// Expectation values `(⟨S_x⟩, ⟨S_y⟩, ⟨S_z⟩)` using the tridiagonal structure.
pub fn spin_expectations(spin: Spin, psi: &CVec) -> [f64; 3] {
    let d = spin.dim();
    let mut z = 0.0;
    let mut plus = c64::new(0.0, 0.0);
    for k in 0..d {
        z += spin.m(k) * psi[k].norm_sqr();
        if k > 0 {
            // ⟨ψ|S_+|ψ⟩ = Σ conj(ψ_{k-1}) l_k ψ_k
            plus += psi[k - 1].conj() * psi[k] * ladder(spin, k);
        }
    }
    [plus.re, plus.im, z]
}
