//! Kicked long-range Ising chain of `N` spin-1/2 with Kac-normalized
//! power-law couplings,
//!
//! ```text
//! H_x = h_x Σ_i S_i^x,   H_z = J_{z,α} Σ_{i<j} S_i^z S_j^z / |i-j|^α
//! ```
//!
//! [`PairSum::Ordered`] doubles `H_z` (every pair counted as `(i,j)` and
//! `(j,i)`). In that convention the α = 0 chain maps onto the kicked top with
//! coupling `2(N+1)J_z/N`; with [`PairSum::Unordered`] the factor is `(N+1)/N`.
//!
//! Basis index bits: site 1 is the most significant bit and bit value 0 is
//! `↑`, so the all-up state has index 0. One Trotter period applies the
//! transverse-field rotations first and the diagonal Ising phases second,
//! the same ordering as the kicked top's `e^{-iτH_z} e^{-iτH_x}`.

use std::io::Write;

use faer::Mat;
use num_complex::Complex64 as c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{self, diagonalize_unitary, wrap_phase};
use crate::krylov;
use crate::linalg::{self, CMat};
use crate::spin::{Spin, TopParams};

/// Largest chain for which dynamics is attempted.
pub const MAX_DYNAMICS_SITES: usize = 22;
/// Largest chain for which the Floquet operator is diagonalized.
pub const MAX_DIAGONALIZATION_SITES: usize = 16;

/// `J_z / ((1/(N-1)) Σ_{i<j} |i-j|^{-α})`.
pub fn kac_coupling(n: usize, alpha: f64, j_z: f64) -> f64 {
    assert!(n >= 2, "a chain needs at least two sites");
    // the pair sum grouped by distance d, which occurs N - d times
    let sum: f64 = (1..n).map(|d| (n - d) as f64 * (d as f64).powf(-alpha)).sum();
    j_z / (sum / (n - 1) as f64)
}

/// Rate-function ceiling `ln 2 (1 - 3/N)`.
pub fn lambda_d(n: usize) -> f64 {
    std::f64::consts::LN_2 * (1.0 - 3.0 / n as f64)
}

/// How the Ising pair sum is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSum {
    /// `Σ_{i<j}`
    Unordered,
    /// `Σ_{i≠j}`, twice the unordered sum.
    Ordered,
}

impl PairSum {
    pub fn multiplicity(self) -> f64 {
        match self {
            PairSum::Unordered => 1.0,
            PairSum::Ordered => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub n: usize,
    pub alpha: f64,
    pub h_x: f64,
    pub j_z: f64,
    pub pairs: PairSum,
}

impl ChainParams {
    /// `h_x = J_z/4`, `J_z = 1`, ordered pair sum.
    pub fn standard(n: usize, alpha: f64) -> Self {
        ChainParams { n, alpha, h_x: 0.25, j_z: 1.0, pairs: PairSum::Ordered }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("chain needs N >= 2, got {}", self.n)));
        }
        if self.n > MAX_DYNAMICS_SITES {
            return Err(Error::TooLarge { what: "chain sites", size: self.n, limit: MAX_DYNAMICS_SITES });
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !self.h_x.is_finite() || !self.j_z.is_finite() {
            return Err(Error::InvalidParameter("chain couplings must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn coupling(&self) -> f64 {
        kac_coupling(self.n, self.alpha, self.j_z)
    }
}

/// Chain state in the `2^N` tensor basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub amplitudes: Vec<c64>,
}

impl ChainState {
    pub fn new(amplitudes: Vec<c64>) -> Result<Self> {
        if !amplitudes.len().is_power_of_two() || amplitudes.len() < 2 {
            return Err(Error::InvalidParameter("chain state length must be 2^N".into()));
        }
        let s = ChainState { amplitudes };
        let nrm = s.norm();
        if (nrm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("state norm {nrm} differs from 1")));
        }
        Ok(s)
    }

    pub fn all_up(n: usize) -> Self {
        let mut amplitudes = vec![c64::new(0.0, 0.0); 1 << n];
        amplitudes[0] = c64::new(1.0, 0.0);
        ChainState { amplitudes }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }
}

/// Diagonals and transverse field of one parameter set.
#[derive(Debug, Clone)]
pub struct ChainOperators {
    pub params: ChainParams,
    /// `H_z` on each basis state.
    pub hz: Vec<f64>,
    /// Collective `S_z = N/2 - (number of down spins)`.
    pub sz: Vec<f64>,
}

impl ChainOperators {
    pub fn new(cp: &ChainParams) -> Result<Self> {
        cp.validate()?;
        let n = cp.n;
        let j = cp.coupling() * cp.pairs.multiplicity();
        let weights: Vec<f64> = (0..n).map(|d| if d == 0 { 0.0 } else { (d as f64).powf(-cp.alpha) }).collect();
        let hz = (0..cp.dim())
            .map(|b: usize| {
                let s = |i: usize| if (b >> (n - 1 - i)) & 1 == 0 { 0.5 } else { -0.5 };
                let mut e = 0.0;
                for i in 0..n {
                    for k in i + 1..n {
                        e += s(i) * s(k) * weights[k - i];
                    }
                }
                j * e
            })
            .collect();
        let sz = (0..cp.dim()).map(|b: usize| 0.5 * n as f64 - b.count_ones() as f64).collect();
        Ok(ChainOperators { params: *cp, hz, sz })
    }

    /// `y = H x`.
    pub fn apply_h(&self, x: &[c64], y: &mut [c64]) {
        let n = self.params.n;
        let half = 0.5 * self.params.h_x;
        for b in 0..x.len() {
            let mut acc = x[b] * self.hz[b];
            for i in 0..n {
                acc += x[b ^ (1 << i)] * half;
            }
            y[b] = acc;
        }
    }

    pub fn energy(&self, x: &[c64]) -> f64 {
        let mut y = vec![c64::new(0.0, 0.0); x.len()];
        self.apply_h(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn magnetization(&self, x: &[c64]) -> f64 {
        x.iter().zip(&self.sz).map(|(a, s)| a.norm_sqr() * s).sum()
    }
}

/// One-period Trotter propagator for a fixed `τ`.
#[derive(Debug, Clone)]
pub struct ChainStepper {
    phases: Vec<c64>,
    n: usize,
    cos: f64,
    sin: f64,
}

impl ChainStepper {
    pub fn new(ops: &ChainOperators, tau: f64) -> Self {
        let half = 0.5 * ops.params.h_x * tau;
        ChainStepper {
            phases: ops.hz.iter().map(|e| linalg::cis(-e * tau)).collect(),
            n: ops.params.n,
            cos: half.cos(),
            sin: half.sin(),
        }
    }

    /// `x ← e^{-iτH_z} e^{-iτH_x} x`.
    pub fn step(&self, x: &mut [c64]) {
        let mis = c64::new(0.0, -self.sin);
        for i in 0..self.n {
            let mask = 1usize << i;
            for b in 0..x.len() {
                if b & mask == 0 {
                    let (u, d) = (x[b], x[b | mask]);
                    x[b] = u * self.cos + d * mis;
                    x[b | mask] = u * mis + d * self.cos;
                }
            }
        }
        for (a, p) in x.iter_mut().zip(&self.phases) {
            *a *= p;
        }
    }
}

pub fn chain_trotter_step(state: &ChainState, cp: &ChainParams, tau: f64) -> Result<ChainState> {
    let ops = ChainOperators::new(cp)?;
    if state.dim() != cp.dim() {
        return Err(Error::InvalidParameter("state dimension does not match the chain".into()));
    }
    let mut x = state.amplitudes.clone();
    ChainStepper::new(&ops, tau).step(&mut x);
    Ok(ChainState { amplitudes: x })
}

/// `e^{-iHt}` applied by Lanczos propagation.
pub fn chain_ideal_propagate(ops: &ChainOperators, state: &ChainState, t: f64) -> Result<ChainState> {
    let out = krylov::krylov_propagate_adaptive(|a, b| ops.apply_h(a, b), &state.amplitudes, t, krylov::DEFAULT_MAX_DIM)?;
    Ok(ChainState { amplitudes: out })
}

/// Collective `⟨S_z⟩` after `0…n` Trotter periods from the all-up state.
pub fn collective_sz_trajectory(cp: &ChainParams, tau: f64, n: usize) -> Result<Vec<f64>> {
    let ops = ChainOperators::new(cp)?;
    let stepper = ChainStepper::new(&ops, tau);
    let mut x = ChainState::all_up(cp.n).amplitudes;
    let mut out = Vec::with_capacity(n + 1);
    out.push(ops.magnetization(&x));
    for _ in 0..n {
        stepper.step(&mut x);
        out.push(ops.magnetization(&x));
    }
    Ok(out)
}

/// Basis of one joint eigenspace of global spin flip and site inversion.
/// Each column is stored sparsely as `(index, amplitude)` pairs.
#[derive(Debug, Clone)]
pub struct SymmetrySector {
    pub flip: i8,
    pub inversion: i8,
    pub columns: Vec<Vec<(usize, f64)>>,
}

fn reverse_bits(b: usize, n: usize) -> usize {
    (0..n).fold(0, |acc, i| acc | (((b >> i) & 1) << (n - 1 - i)))
}

impl SymmetrySector {
    pub fn new(n: usize, flip: i8, inversion: i8) -> Self {
        let dim = 1usize << n;
        let all = dim - 1;
        let mut columns = Vec::new();
        for r in 0..dim {
            let rr = reverse_bits(r, n);
            let orbit = [(r, 1.0), (r ^ all, flip as f64), (rr, inversion as f64), (rr ^ all, (flip * inversion) as f64)];
            if orbit.iter().any(|&(b, _)| b < r) {
                continue;
            }
            let mut col: Vec<(usize, f64)> = Vec::new();
            for (b, w) in orbit {
                match col.iter_mut().find(|(k, _)| *k == b) {
                    Some(entry) => entry.1 += w,
                    None => col.push((b, w)),
                }
            }
            col.retain(|&(_, w)| w != 0.0);
            if col.is_empty() {
                continue;
            }
            let nrm = col.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            columns.push(col.into_iter().map(|(b, w)| (b, w / nrm)).collect());
        }
        SymmetrySector { flip, inversion, columns }
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    fn project(&self, x: &[c64]) -> Vec<c64> {
        self.columns.iter().map(|col| col.iter().map(|&(b, w)| x[b] * w).sum()).collect()
    }

    /// The Trotter propagator restricted to this sector.
    pub fn floquet_block(&self, stepper: &ChainStepper, full_dim: usize) -> CMat {
        let d = self.dim();
        let mut u = Mat::<c64>::zeros(d, d);
        let mut x = vec![c64::new(0.0, 0.0); full_dim];
        for (j, col) in self.columns.iter().enumerate() {
            x.iter_mut().for_each(|v| *v = c64::new(0.0, 0.0));
            for &(b, w) in col {
                x[b] = c64::new(w, 0.0);
            }
            stepper.step(&mut x);
            for (i, v) in self.project(&x).into_iter().enumerate() {
                u[(i, j)] = v;
            }
        }
        u
    }
}

/// Dense `2^N × 2^N` Trotter propagator.
pub fn chain_floquet_matrix(cp: &ChainParams, tau: f64) -> Result<CMat> {
    if cp.n > MAX_DIAGONALIZATION_SITES {
        return Err(Error::TooLarge { what: "chain sites for a dense propagator", size: cp.n, limit: MAX_DIAGONALIZATION_SITES });
    }
    let ops = ChainOperators::new(cp)?;
    let stepper = ChainStepper::new(&ops, tau);
    let d = cp.dim();
    let mut u = Mat::<c64>::zeros(d, d);
    let mut x = vec![c64::new(0.0, 0.0); d];
    for c in 0..d {
        x.iter_mut().for_each(|v| *v = c64::new(0.0, 0.0));
        x[c] = c64::new(1.0, 0.0);
        stepper.step(&mut x);
        for (r, v) in x.iter().enumerate() {
            u[(r, c)] = *v;
        }
    }
    Ok(u)
}

/// IPR of `ψ0` in the Floquet eigenbasis, assembled from the symmetry
/// sectors that `ψ0` overlaps, and the number of sector blocks used.
pub fn chain_ipr(cp: &ChainParams, tau: f64, psi0: &ChainState) -> Result<(f64, usize)> {
    if cp.n > MAX_DIAGONALIZATION_SITES {
        return Err(Error::TooLarge { what: "chain sites for diagonalization", size: cp.n, limit: MAX_DIAGONALIZATION_SITES });
    }
    let ops = ChainOperators::new(cp)?;
    let stepper = ChainStepper::new(&ops, tau);
    let mut ipr = 0.0;
    let mut blocks = 0;
    let mut weight = 0.0;
    for (flip, inversion) in [(1i8, 1i8), (-1, 1), (1, -1), (-1, -1)] {
        let sector = SymmetrySector::new(cp.n, flip, inversion);
        let coeffs = sector.project(&psi0.amplitudes);
        let w: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if w < 1e-14 {
            continue;
        }
        weight += w;
        blocks += 1;
        let spec = diagonalize_unitary(&sector.floquet_block(&stepper, cp.dim()))?;
        let ov = spec.vectors.adjoint() * Mat::from_fn(coeffs.len(), 1, |i, _| coeffs[i]);
        ipr += (0..ov.nrows()).map(|m| ov[(m, 0)].norm_sqr().powi(2)).sum::<f64>();
    }
    if (weight - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("symmetry sectors capture weight {weight}")));
    }
    Ok((ipr, blocks))
}

/// Long-time diagnostics of one `(α, τ)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub alpha: f64,
    pub tau: f64,
    pub n_periods: usize,
    pub qe_bar: f64,
    pub dm_bar: f64,
    pub ipr: f64,
    /// `-ln(IPR)/N`.
    pub lambda_ipr: f64,
    /// `λ_IPR / λ_D`.
    pub lambda_ratio: f64,
}

/// Period-averaged `Q_E` and `ΔM` from the all-up state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainAverages {
    pub qe_bar: f64,
    pub dm_bar: f64,
}

/// Averages over periods `1…n_periods`. With `with_ideal = false` the exact
/// reference is skipped and `dm_bar` is NaN.
pub fn chain_averages(cp: &ChainParams, tau: f64, n_periods: usize, with_ideal: bool) -> Result<ChainAverages> {
    if n_periods == 0 {
        return Err(Error::InvalidParameter("n_periods must be at least 1".into()));
    }
    let ops = ChainOperators::new(cp)?;
    let stepper = ChainStepper::new(&ops, tau);
    let psi0 = ChainState::all_up(cp.n);
    let e0 = ops.energy(&psi0.amplitudes);
    let e_inf = ops.hz.iter().sum::<f64>() / cp.dim() as f64;
    let norm = e_inf - e0;
    if norm.abs() < 1e-12 {
        return Err(Error::DegenerateNormalization(norm));
    }
    let s = 0.5 * cp.n as f64;
    let mut x = psi0.amplitudes.clone();
    let mut ideal = psi0;
    let (mut qe, mut dm) = (0.0, 0.0);
    for _ in 0..n_periods {
        stepper.step(&mut x);
        qe += (ops.energy(&x) - e0) / norm;
        if with_ideal {
            ideal = chain_ideal_propagate(&ops, &ideal, tau)?;
            dm += (ops.magnetization(&x) - ops.magnetization(&ideal.amplitudes)) / s;
        }
    }
    let k = n_periods as f64;
    Ok(ChainAverages { qe_bar: qe / k, dm_bar: if with_ideal { dm / k } else { f64::NAN } })
}

pub fn chain_diagnostics(cp: &ChainParams, tau: f64, n_periods: usize) -> Result<ChainDiagnostics> {
    if cp.n > MAX_DIAGONALIZATION_SITES {
        return Err(Error::TooLarge { what: "chain sites for diagonalization", size: cp.n, limit: MAX_DIAGONALIZATION_SITES });
    }
    let avg = chain_averages(cp, tau, n_periods, true)?;
    let (ipr, _) = chain_ipr(cp, tau, &ChainState::all_up(cp.n))?;
    let lambda_ipr = -ipr.ln() / cp.n as f64;
    Ok(ChainDiagnostics {
        alpha: cp.alpha,
        tau,
        n_periods,
        qe_bar: avg.qe_bar,
        dm_bar: avg.dm_bar,
        ipr,
        lambda_ipr,
        lambda_ratio: lambda_ipr / lambda_d(cp.n),
    })
}

/// Every `(α, τ)` combination, in parallel, in row-major order.
pub fn chain_heat_map(n: usize, alphas: &[f64], taus: &[f64], n_periods: usize) -> Result<Vec<ChainDiagnostics>> {
    chain_heat_map_with(&ChainParams::standard(n, 0.0), alphas, taus, n_periods)
}

/// As [`chain_heat_map`], with fields and pair convention taken from `base`
/// (its `alpha` is ignored).
pub fn chain_heat_map_with(base: &ChainParams, alphas: &[f64], taus: &[f64], n_periods: usize) -> Result<Vec<ChainDiagnostics>> {
    let grid: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| taus.iter().map(move |&t| (a, t))).collect();
    grid.par_iter().map(|&(a, t)| chain_diagnostics(&ChainParams { alpha: a, ..*base }, t, n_periods)).collect()
}

/// CSV with columns `alpha, tau, qe_bar, dm_bar, ipr, lambda_ratio`.
pub fn write_heat_map_csv<W: Write>(out: W, rows: &[ChainDiagnostics]) -> Result<()> {
    let io = |e: csv::Error| Error::InvalidParameter(format!("csv output failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "tau", "qe_bar", "dm_bar", "ipr", "lambda_ratio"]).map_err(io)?;
    for r in rows {
        w.write_record(&[
            r.alpha.to_string(),
            r.tau.to_string(),
            format!("{:.12e}", r.qe_bar),
            format!("{:.12e}", r.dm_bar),
            format!("{:.12e}", r.ipr),
            format!("{:.12e}", r.lambda_ratio),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidParameter(format!("csv output failed: {e}")))?;
    Ok(())
}

/// Result of matching the α = 0 chain in its maximal-spin sector to a
/// kicked top with `h_z = J_x = 0` and coupling `factor·J_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    pub n: usize,
    pub factor: f64,
    /// Energy offset of the chain relative to the top.
    pub shift: f64,
    /// Largest deviation of the sector energies from the fitted quadratic.
    pub fit_residual: f64,
    /// Largest eigenphase mismatch after removing the offset.
    pub spectral_residual: f64,
    /// Largest entry of the sector `H_x` minus `h_x S_x`.
    pub field_residual: f64,
}

/// Symmetric (Dicke) states with `k` down spins, `k = 0…N`, as dense
/// columns. Column `k` is the top's basis state `m = N/2 - k`.
fn dicke_basis(n: usize) -> Vec<Vec<f64>> {
    (0..=n)
        .map(|k| {
            let mut v = vec![0.0; 1 << n];
            let members: Vec<usize> = (0..1usize << n).filter(|b| b.count_ones() as usize == k).collect();
            let a = 1.0 / (members.len() as f64).sqrt();
            for b in members {
                v[b] = a;
            }
            v
        })
        .collect()
}

/// Determines the coupling rescaling numerically: regresses the sector
/// energies of `H_z` on `m²`, then checks that the sector Floquet operator
/// and the top's Floquet operator share their spectrum.
pub fn equivalence_oracle(n: usize, h_x: f64, j_z: f64, pairs: PairSum, tau: f64) -> Result<Equivalence> {
    let cp = ChainParams { n, alpha: 0.0, h_x, j_z, pairs };
    let ops = ChainOperators::new(&cp)?;
    let basis = dicke_basis(n);
    let d = n + 1;
    let dense = |f: &dyn Fn(&[c64], &mut [c64])| -> CMat {
        let mut m = Mat::<c64>::zeros(d, d);
        let mut y = vec![c64::new(0.0, 0.0); cp.dim()];
        for (j, col) in basis.iter().enumerate() {
            let x: Vec<c64> = col.iter().map(|&v| c64::new(v, 0.0)).collect();
            f(&x, &mut y);
            for (i, row) in basis.iter().enumerate() {
                m[(i, j)] = row.iter().zip(&y).map(|(a, b)| b * *a).sum();
            }
        }
        m
    };
    let hz_block = dense(&|x, y| {
        for b in 0..x.len() {
            y[b] = x[b] * ops.hz[b];
        }
    });
    let hx_block = dense(&|x, y| {
        ops.apply_h(x, y);
        for b in 0..x.len() {
            y[b] -= x[b] * ops.hz[b];
        }
    });
    let spin = Spin::from_twice(n as u32);
    // least squares E_k = a m_k² + c
    let pts: Vec<(f64, f64)> = (0..d).map(|k| (spin.m(k).powi(2), hz_block[(k, k)].re)).collect();
    let k = d as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / k, sy / k);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let shift = my - slope * mx;
    let fit_residual = pts.iter().map(|p| (p.1 - slope * p.0 - shift).abs()).fold(0.0, f64::max);
    let factor = slope * d as f64 / j_z;

    let top = TopParams { spin, tau, h_x, h_z: 0.0, j_x: 0.0, j_z: factor * j_z };
    let sx_top = crate::spin::spin_operators_for(spin).sx;
    let field_residual = linalg::max_abs_diff(hx_block.as_ref(), linalg::scale(sx_top.as_ref(), c64::new(h_x, 0.0)).as_ref());
    let stepper = ChainStepper::new(&ops, tau);
    let u_chain = dense(&|x, y| {
        y.copy_from_slice(x);
        stepper.step(y);
    });
    let u_chain = linalg::scale(u_chain.as_ref(), linalg::cis(shift * tau));
    let mut a = diagonalize_unitary(&u_chain)?.phases;
    let mut b = diagonalize_unitary(&floquet::floquet_operator(&top)?)?.phases;
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let spectral_residual = a.iter().zip(&b).map(|(x, y)| wrap_phase(x - y).abs()).fold(0.0, f64::max);
    Ok(Equivalence { n, factor, shift, fit_residual, spectral_residual, field_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::Stepper;
    use crate::floquet::TrotterVariant;
    use crate::spin::QuantumState;
    use proptest::prelude::*;

    #[test]
    fn kac_examples() {
        for n in [3, 6, 11] {
            assert!((kac_coupling(n, 0.0, 1.0) - 2.0 / n as f64).abs() < 1e-14);
        }
        assert!((kac_coupling(4, 50.0, 1.0) - 1.0).abs() < 1e-12);
        for a in [0.0, 0.7, 3.0] {
            assert!((kac_coupling(2, a, 1.3) - 1.3).abs() < 1e-14);
        }
        assert!((lambda_d(14) - 0.5447).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn kac_is_monotone_in_alpha(n in 3usize..20, a in 0.0f64..5.0, da in 0.01f64..2.0) {
            prop_assert!(kac_coupling(n, a + da, 1.0) > kac_coupling(n, a, 1.0));
        }

        #[test]
        fn steps_conserve_norm(alpha in 0.0f64..3.0, tau in 0.0f64..4.0, k in 1usize..30) {
            let cp = ChainParams::standard(5, alpha);
            let ops = ChainOperators::new(&cp).unwrap();
            let st = ChainStepper::new(&ops, tau);
            let mut x: Vec<c64> = (0..32).map(|b| c64::new((b as f64).cos(), (b as f64 * 0.7).sin())).collect();
            let n0: f64 = x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            x.iter_mut().for_each(|a| *a /= n0);
            for _ in 0..k { st.step(&mut x); }
            let n1: f64 = x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!((n1 - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_tau_and_zero_field() {
        let cp = ChainParams::standard(4, 1.0);
        let x = ChainState::new((0..16).map(|b| c64::new(0.25, 0.0) * linalg::cis(b as f64)).collect()).unwrap();
        let y = chain_trotter_step(&x, &cp, 0.0).unwrap();
        assert!(x.amplitudes.iter().zip(&y.amplitudes).all(|(a, b)| (a - b).norm() < 1e-15));
        let cp = ChainParams { h_x: 0.0, ..cp };
        let y = chain_trotter_step(&x, &cp, 0.9).unwrap();
        assert!(x.amplitudes.iter().zip(&y.amplitudes).all(|(a, b)| (a.norm() - b.norm()).abs() < 1e-15));
    }

    /// Dense `H` built from explicit Kronecker products of Pauli matrices.
    fn dense_chain_h(cp: &ChainParams) -> CMat {
        let n = cp.n;
        let j = cp.coupling() * cp.pairs.multiplicity();
        let dim = cp.dim();
        let site = |b: usize, i: usize| (b >> (n - 1 - i)) & 1;
        Mat::from_fn(dim, dim, |r, c| {
            let mut v = 0.0;
            if r == c {
                for i in 0..n {
                    for k in i + 1..n {
                        let si = 0.5 - site(r, i) as f64;
                        let sk = 0.5 - site(r, k) as f64;
                        v += j * si * sk / ((k - i) as f64).powf(cp.alpha);
                    }
                }
            } else if (r ^ c).count_ones() == 1 {
                v += 0.5 * cp.h_x;
            }
            c64::new(v, 0.0)
        })
    }

    #[test]
    fn stepper_matches_dense_product() {
        let cp = ChainParams { pairs: PairSum::Unordered, ..ChainParams::standard(5, 1.3) };
        let h = dense_chain_h(&cp);
        let hz = Mat::from_fn(32, 32, |i, j| if i == j { h[(i, j)] } else { c64::new(0.0, 0.0) });
        let hx = &h - &hz;
        let tau = 0.8;
        let u = linalg::expm_hermitian(hz.as_ref(), tau).unwrap() * linalg::expm_hermitian(hx.as_ref(), tau).unwrap();
        let ops = ChainOperators::new(&cp).unwrap();
        let st = ChainStepper::new(&ops, tau);
        for col in [0usize, 5, 31] {
            let mut x = vec![c64::new(0.0, 0.0); 32];
            x[col] = c64::new(1.0, 0.0);
            st.step(&mut x);
            for r in 0..32 {
                assert!((x[r] - u[(r, col)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn krylov_matches_dense_at_eight_sites() {
        let cp = ChainParams::standard(8, 0.9);
        let ops = ChainOperators::new(&cp).unwrap();
        let h = dense_chain_h(&cp);
        let x = ChainState::all_up(8);
        let t = 3.7;
        let got = chain_ideal_propagate(&ops, &x, t).unwrap();
        let want = linalg::expm_hermitian(h.as_ref(), t).unwrap();
        let err = (0..256).map(|r| (got.amplitudes[r] - want[(r, 0)]).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        assert!((got.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sector_ipr_matches_full_diagonalization() {
        let cp = ChainParams::standard(6, 1.5);
        let tau = 2.0;
        let u = chain_floquet_matrix(&cp, tau).unwrap();
        let spec = diagonalize_unitary(&u).unwrap();
        let psi = QuantumState::basis(64, 0);
        let full = crate::spectral::ipr(psi.amplitudes(), &spec);
        let (sector, blocks) = chain_ipr(&cp, tau, &ChainState::all_up(6)).unwrap();
        assert_eq!(blocks, 2);
        assert!((full - sector).abs() < 1e-9, "{full} vs {sector}");
        let dims: usize = [(1, 1), (-1, 1), (1, -1), (-1, -1)].iter().map(|&(f, i)| SymmetrySector::new(6, f, i).dim()).sum();
        assert_eq!(dims, 64);
    }

    #[test]
    fn refuses_large_diagonalization() {
        assert!(matches!(chain_ipr(&ChainParams::standard(17, 1.0), 1.0, &ChainState::all_up(2)), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn equivalence_factor_from_spectra() {
        for (pairs, want) in [(PairSum::Unordered, 7.0 / 6.0), (PairSum::Ordered, 14.0 / 6.0)] {
            let eq = equivalence_oracle(6, 0.25, 1.0, pairs, 0.9).unwrap();
            assert!((eq.factor - want).abs() < 1e-12, "{}", eq.factor);
            assert!(eq.fit_residual < 1e-12);
            assert!(eq.field_residual < 1e-12);
            assert!(eq.spectral_residual < 1e-10);
        }
    }

    #[test]
    fn alpha_zero_chain_tracks_the_top() {
        let n = 6;
        let eq = equivalence_oracle(n, 0.25, 1.0, PairSum::Ordered, 1.1).unwrap();
        let chain = collective_sz_trajectory(&ChainParams::standard(n, 0.0), 1.1, 50).unwrap();
        let top = TopParams { spin: Spin::from_twice(n as u32), tau: 1.1, h_x: 0.25, h_z: 0.0, j_x: 0.0, j_z: eq.factor };
        let stepper = Stepper::trotter(&top, TrotterVariant::First).unwrap();
        let states = crate::floquet::evolve_with(&stepper, &QuantumState::basis(n + 1, 0), 50);
        // `evolve_with` starts after the first step
        for (c, s) in chain[1..].iter().zip(&states) {
            let sz = crate::spin::spin_expectations(top.spin, s.amplitudes())[2];
            assert!((c - sz).abs() < 1e-10);
        }
    }

    #[test]
    fn small_tau_first_order_vanishes() {
        let cp = ChainParams::standard(6, 0.0);
        let ops = ChainOperators::new(&cp).unwrap();
        let h = Mat::from_fn(64, 64, |r, c| {
            let mut x = vec![c64::new(0.0, 0.0); 64];
            x[c] = c64::new(1.0, 0.0);
            let mut y = vec![c64::new(0.0, 0.0); 64];
            ops.apply_h(&x, &mut y);
            y[r]
        });
        let psi = QuantumState::basis(64, 0);
        let e0 = ops.energy(&ChainState::all_up(6).amplitudes);
        let q = |t: f64| {
            let spec = diagonalize_unitary(&chain_floquet_matrix(&cp, t).unwrap()).unwrap();
            let e = crate::observables::diagonal_ensemble_floquet(&psi, &spec, &h).value;
            (e - e0) / (0.0 - e0)
        };
        let (a, b) = (q(0.05), q(0.1));
        // doubling τ multiplies the long-time Q_E by four
        assert!(a > 0.0 && (b / a - 4.0).abs() < 0.2, "{a} {b}");
    }
}
