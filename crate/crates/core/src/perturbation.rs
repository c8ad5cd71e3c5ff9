//! Second-order Floquet-Magnus expansion of the first-order Trotter step and
//! the long-time corrections it implies for energies and observables.
//!
//! With `U_τ = e^{-iτH_z} e^{-iτH_x} = e^{-iτH_τ}`,
//!
//! ```text
//! H_τ = H + τ C1 + τ² C2 + O(τ³)
//! C1  = (i/2) [H_x, H_z]
//! C2  = -(1/12) [H_x - H_z, [H_x, H_z]]
//! ```
//!
//! Because `[H_x, H_z] = [H, H_z]`, the first-order term is a frame rotation:
//! `H_τ = R (H + τ² D) R† + O(τ³)` with `R = e^{-iτH_z/2}` and
//! `D = C2 - (1/8) [H_z, [H, H_z]]`. The long-time (diagonal-ensemble) value of
//! an observable is expanded in that frame, where only `D` needs
//! Rayleigh-Schrödinger perturbation theory. Every term is a plain sum over
//! eigenstates `λ` of `H`.

use faer::Mat;
use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, I};
use crate::spin::{self, QuantumState, TopParams};

/// Pairs with `|λ₁ - λ₂| < GAP_TOL·‖H‖` are dropped from the `1/(λ₁ - λ₂)` sums.
pub const GAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct FmExpansion {
    pub h: CMat,
    pub hx: CMat,
    pub hz: CMat,
    pub c1: CMat,
    pub c2: CMat,
    pub tau: f64,
}

impl FmExpansion {
    pub fn new(p: &TopParams) -> Result<Self> {
        p.validate()?;
        let hx = linalg::to_complex(spin::hx_real(p).as_ref());
        let hzd = spin::hz_diagonal(p);
        let d = p.dim();
        let hz = Mat::from_fn(d, d, |i, j| if i == j { c64::new(hzd[i], 0.0) } else { c64::new(0.0, 0.0) });
        let h = &hx + &hz;
        let k = linalg::commutator(hx.as_ref(), hz.as_ref());
        let c1 = linalg::scale(k.as_ref(), 0.5 * I);
        let diff = &hx - &hz;
        let c2 = linalg::scale(linalg::commutator(diff.as_ref(), k.as_ref()).as_ref(), c64::new(-1.0 / 12.0, 0.0));
        Ok(FmExpansion { h, hx, hz, c1, c2, tau: p.tau })
    }

    /// `H + τC1` (order 1) or `H + τC1 + τ²C2` (order 2).
    pub fn truncated(&self, order: usize) -> Result<CMat> {
        let t = self.tau;
        match order {
            0 => Ok(self.h.clone()),
            1 => Ok(&self.h + linalg::scale(self.c1.as_ref(), c64::new(t, 0.0))),
            2 => Ok(&self.h + linalg::scale(self.c1.as_ref(), c64::new(t, 0.0)) + linalg::scale(self.c2.as_ref(), c64::new(t * t, 0.0))),
            _ => Err(Error::InvalidParameter(format!("expansion order {order} > 2 is not supported"))),
        }
    }
}

/// Truncated effective Hamiltonian of `U_τ`.
pub fn fm_hamiltonian(p: &TopParams, order: usize) -> Result<CMat> {
    if order > 2 {
        return Err(Error::InvalidParameter(format!("expansion order {order} > 2 is not supported")));
    }
    let fm = FmExpansion::new(p)?;
    Ok(linalg::hermitize(fm.truncated(order)?.as_ref()))
}

/// Eigenbasis of the target `H` and the operators of the expansion written in
/// it. Independent of `τ`, so one instance serves a whole `τ` grid.
#[derive(Debug, Clone)]
pub struct TargetEigensystem {
    pub values: Vec<f64>,
    pub vectors: CMat,
    /// `H_z` in the eigenbasis.
    hz: CMat,
    /// `C1` in the eigenbasis.
    c1: CMat,
    /// `C2` in the eigenbasis.
    c2: CMat,
    /// `D = C2 - (1/8)[H_z, [H, H_z]]` in the eigenbasis.
    d: CMat,
    /// `[H_z, [H_x, H_z]]` in the eigenbasis.
    zzx: CMat,
    gap: f64,
    /// Number of unordered eigenvalue pairs closer than the gap tolerance.
    pub near_degenerate_pairs: usize,
}

impl TargetEigensystem {
    pub fn new(p: &TopParams) -> Result<Self> {
        let fm = FmExpansion::new(p)?;
        let (values, vr) = linalg::eigh_real(spin::top_hamiltonian_real(p).as_ref())?;
        let v = linalg::to_complex(vr.as_ref());
        let vt = v.adjoint().to_owned();
        let rotate = |m: &CMat| -> CMat { &vt * m * &v };
        let k = linalg::commutator(fm.hx.as_ref(), fm.hz.as_ref());
        let zzx = linalg::commutator(fm.hz.as_ref(), k.as_ref());
        let d_op = &fm.c2 - linalg::scale(zzx.as_ref(), c64::new(0.125, 0.0));
        let norm = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let gap = GAP_TOL * norm.max(f64::MIN_POSITIVE);
        let n = values.len();
        let mut near = 0;
        for a in 0..n {
            for b in a + 1..n {
                if (values[a] - values[b]).abs() < gap {
                    near += 1;
                }
            }
        }
        Ok(TargetEigensystem {
            hz: rotate(&fm.hz),
            c1: rotate(&fm.c1),
            c2: rotate(&fm.c2),
            d: rotate(&d_op),
            zzx: rotate(&zzx),
            values,
            vectors: v,
            gap,
            near_degenerate_pairs: near,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    fn coefficients(&self, psi0: &QuantumState) -> Vec<c64> {
        let c = self.vectors.adjoint() * psi0.amplitudes();
        (0..self.dim()).map(|i| c[i]).collect()
    }

    fn to_eigenbasis(&self, a: &CMat) -> CMat {
        self.vectors.adjoint() * a * &self.vectors
    }
}

/// `Σ_λ |⟨ψ0|λ⟩|² ⟨λ|A|λ⟩` for an orthonormal eigensystem (columns of `vectors`).
pub fn diagonal_ensemble_h(psi0: &QuantumState, vectors: &CMat, a: &CMat) -> f64 {
    let c = vectors.adjoint() * psi0.amplitudes();
    let av = a * vectors;
    let mut value = 0.0;
    for l in 0..vectors.ncols() {
        let mut all = c64::new(0.0, 0.0);
        for i in 0..vectors.nrows() {
            all += vectors[(i, l)].conj() * av[(i, l)];
        }
        value += c[l].norm_sqr() * all.re;
    }
    value
}

/// Long-time value `Ā(τ) = a0 + a1 τ + a2 τ² + O(τ³)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableExpansion {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    /// Ordered pairs left out of the `1/(λ₁ - λ₂)` sums.
    pub dropped_pairs: usize,
}

impl ObservableExpansion {
    pub fn value(&self, tau: f64) -> f64 {
        self.a0 + self.a1 * tau + self.a2 * tau * tau
    }

    /// `Ā(τ) - Ā(0)`, the long-time Trotter error of `A`.
    pub fn correction(&self, tau: f64) -> f64 {
        self.a1 * tau + self.a2 * tau * tau
    }
}

/// Coefficients of the long-time value of `A` under the Trotterized dynamics.
pub fn observable_expansion(sys: &TargetEigensystem, psi0: &QuantumState, a: &CMat) -> Result<ObservableExpansion> {
    let n = sys.dim();
    if psi0.dim() != n || a.nrows() != n || a.ncols() != n {
        return Err(Error::InvalidParameter("dimension mismatch".into()));
    }
    let ae = sys.to_eigenbasis(a);
    let hz = &sys.hz;
    let c = sys.coefficients(psi0);
    // g = ⟨λ|H_z|ψ0⟩, h = ⟨λ|H_z²|ψ0⟩
    let g: Vec<c64> = (0..n).map(|l| (0..n).map(|k| hz[(l, k)] * c[k]).sum()).collect();
    let h: Vec<c64> = (0..n).map(|l| (0..n).map(|k| hz[(l, k)] * g[k]).sum()).collect();
    let hza = hz * &ae;
    let hzahz = &hza * hz;
    let hz2a = hz * &hza;

    let (mut a0, mut a1, mut a2) = (0.0, 0.0, 0.0);
    for l in 0..n {
        let p0 = c[l].norm_sqr();
        let all = ae[(l, l)].re;
        let im_cg = (c[l].conj() * g[l]).im;
        let im_hza = hza[(l, l)].im;
        // ⟨λ|[H_z,[H_z,A]]|λ⟩ = 2 Re⟨λ|H_z²A|λ⟩ - 2⟨λ|H_z A H_z|λ⟩
        let dd = 2.0 * hz2a[(l, l)].re - 2.0 * hzahz[(l, l)].re;
        a0 += p0 * all;
        a1 += -im_cg * all - p0 * im_hza;
        a2 += 0.25 * (g[l].norm_sqr() - (c[l].conj() * h[l]).re) * all + im_cg * im_hza - 0.125 * p0 * dd;
    }
    let mut dropped = 0;
    for l in 0..n {
        for k in 0..n {
            if k == l {
                continue;
            }
            let gap = sys.values[l] - sys.values[k];
            if gap.abs() < sys.gap {
                dropped += 1;
                continue;
            }
            let w = sys.d[(k, l)] / gap;
            let amp = c[l] * c[k].conj() * ae[(l, l)].re + ae[(l, k)] * c[l].norm_sqr();
            a2 += 2.0 * (amp * w).re;
        }
    }
    Ok(ObservableExpansion { a0, a1, a2, dropped_pairs: dropped })
}

/// Long-time observable expansion for the parameters `p` (its `τ` is unused).
pub fn observable_correction_long_time(psi0: &QuantumState, p: &TopParams, a: &CMat) -> Result<ObservableExpansion> {
    let sys = TargetEigensystem::new(p)?;
    observable_expansion(&sys, psi0, a)
}

/// `ΔĒ(τ) = e1 τ + e2 τ²` together with the scale `E_{T=∞} - E_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyExpansion {
    pub e1: f64,
    pub e2: f64,
    pub e0: f64,
    pub e_inf: f64,
}

impl EnergyExpansion {
    pub fn delta_e(&self, tau: f64) -> f64 {
        self.e1 * tau + self.e2 * tau * tau
    }

    /// `(q1, q2)` with `Q̄_E = q1 τ + q2 τ²`.
    pub fn q_coefficients(&self) -> Result<(f64, f64)> {
        let norm = self.e_inf - self.e0;
        if norm.abs() < 1e-12 {
            return Err(Error::DegenerateNormalization(norm));
        }
        Ok((self.e1 / norm, self.e2 / norm))
    }

    pub fn q(&self, tau: f64) -> Result<f64> {
        let (q1, q2) = self.q_coefficients()?;
        Ok(q1 * tau + q2 * tau * tau)
    }
}

/// Energy expansion in closed form:
/// `e1 = ⟨C1⟩`,
/// `e2 = ⟨C2⟩ - Σ_λ |c_λ|² ⟨λ|C2|λ⟩ + (1/4) Σ_λ |c_λ|² ⟨λ|[H_z,[H_x,H_z]]|λ⟩`.
pub fn energy_expansion(sys: &TargetEigensystem, psi0: &QuantumState) -> Result<EnergyExpansion> {
    let n = sys.dim();
    if psi0.dim() != n {
        return Err(Error::InvalidParameter("dimension mismatch".into()));
    }
    let c = sys.coefficients(psi0);
    let expect = |m: &CMat| -> c64 {
        let mut s = c64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                s += c[i].conj() * m[(i, j)] * c[j];
            }
        }
        s
    };
    let c1 = expect(&sys.c1);
    let c2 = expect(&sys.c2);
    let scale = sys.values.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if c1.im.abs() > 1e-12 * scale * scale || c2.im.abs() > 1e-12 * scale * scale * scale {
        return Err(Error::InvalidParameter("expectation values are not real".into()));
    }
    let mut diag = 0.0;
    for l in 0..n {
        diag += c[l].norm_sqr() * (-sys.c2[(l, l)].re + 0.25 * sys.zzx[(l, l)].re);
    }
    let e0: f64 = (0..n).map(|l| c[l].norm_sqr() * sys.values[l]).sum();
    let e_inf = sys.values.iter().sum::<f64>() / n as f64;
    Ok(EnergyExpansion { e1: c1.re, e2: c2.re + diag, e0, e_inf })
}

pub fn energy_correction_long_time(psi0: &QuantumState, p: &TopParams) -> Result<EnergyExpansion> {
    let sys = TargetEigensystem::new(p)?;
    energy_expansion(&sys, psi0)
}
