//! Trotter-error measures: magnetization error, simulation accuracy and
//! fidelity, their running averages, and diagonal-ensemble limits.

use serde::{Deserialize, Serialize};

use crate::banded::Banded;
use crate::error::{Error, Result};
use crate::floquet::{FloquetSpectrum, Stepper, TrotterVariant};
use crate::linalg::{self, c64, CMat, CVec};
use crate::spin::{self, QuantumState, TopParams};

/// Values at `t = τ, 2τ, …, n_t τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub tau: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (1..=self.len()).map(|n| n as f64 * self.tau).collect()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }
}

/// Number of stroboscopic steps `⌊t/τ⌋` that fit in the horizon `t`.
pub fn steps_for_horizon(t: f64, tau: f64) -> usize {
    if tau <= 0.0 {
        return 0;
    }
    // Guard against 200/0.1 = 1999.9999.
    ((t / tau) * (1.0 + 1e-12)).floor() as usize
}

/// Running mean: entry `k` is the mean of the first `k + 1` values.
pub fn temporal_average(ts: &TimeSeries) -> Vec<f64> {
    let mut acc = 0.0;
    ts.values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            acc += v;
            acc / (k + 1) as f64
        })
        .collect()
}

fn banded_expectation(h: &Banded, psi: &CVec) -> f64 {
    let v: Vec<c64> = (0..psi.nrows()).map(|i| psi[i]).collect();
    let mut hv = vec![c64::new(0.0, 0.0); v.len()];
    h.apply(&v, &mut hv);
    v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Energy scale `(E_0, E_{T=∞})` of a state for the target Hamiltonian.
pub fn energy_reference(psi0: &QuantumState, p: &TopParams) -> (f64, f64) {
    let h = spin::top_hamiltonian_banded(p);
    let e0 = banded_expectation(&h, psi0.amplitudes());
    let e_inf = (0..p.dim()).map(|k| h.get(k, k)).sum::<f64>() / p.dim() as f64;
    (e0, e_inf)
}

/// All three error measures from one Trotterized and one exact run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrotterErrors {
    pub magnetization: TimeSeries,
    pub accuracy: TimeSeries,
    pub fidelity: TimeSeries,
    pub e0: f64,
    pub e_inf: f64,
}

pub fn trotter_errors(psi0: &QuantumState, p: &TopParams, n: usize, variant: TrotterVariant) -> Result<TrotterErrors> {
    p.validate()?;
    if psi0.dim() != p.dim() {
        return Err(Error::InvalidParameter(format!("state dimension {} does not match D = {}", psi0.dim(), p.dim())));
    }
    let (e0, e_inf) = energy_reference(psi0, p);
    let norm = e_inf - e0;
    if norm.abs() < 1e-12 {
        return Err(Error::DegenerateNormalization(norm));
    }
    let trotter = Stepper::trotter(p, variant)?;
    let ideal = Stepper::ideal(p, p.tau)?;
    let h = spin::top_hamiltonian_banded(p);
    let s = p.spin.value();
    let mut a = psi0.amplitudes().clone();
    let mut b = psi0.amplitudes().clone();
    let (mut dm, mut qe, mut fid) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        a = trotter.apply(&a);
        b = ideal.apply(&b);
        let za = spin::spin_expectations(p.spin, &a)[2];
        let zb = spin::spin_expectations(p.spin, &b)[2];
        dm.push((za - zb) / s);
        qe.push((banded_expectation(&h, &a) - e0) / norm);
        fid.push(linalg::inner(a.as_ref(), b.as_ref()).norm().min(1.0));
    }
    let tau = p.tau;
    Ok(TrotterErrors {
        magnetization: TimeSeries { tau, values: dm },
        accuracy: TimeSeries { tau, values: qe },
        fidelity: TimeSeries { tau, values: fid },
        e0,
        e_inf,
    })
}

/// `ΔM(nτ) = (⟨S_z⟩_τ - ⟨S_z⟩)/S`.
pub fn magnetization_error(psi0: &QuantumState, p: &TopParams, n: usize) -> Result<TimeSeries> {
    p.validate()?;
    let trotter = Stepper::trotter(p, TrotterVariant::First)?;
    let ideal = Stepper::ideal(p, p.tau)?;
    let s = p.spin.value();
    let mut a = psi0.amplitudes().clone();
    let mut b = a.clone();
    let values = (0..n)
        .map(|_| {
            a = trotter.apply(&a);
            b = ideal.apply(&b);
            (spin::spin_expectations(p.spin, &a)[2] - spin::spin_expectations(p.spin, &b)[2]) / s
        })
        .collect();
    Ok(TimeSeries { tau: p.tau, values })
}

/// `Q_E(nτ) = (E_τ - E_0)/(E_{T=∞} - E_0)`.
pub fn simulation_accuracy(psi0: &QuantumState, p: &TopParams, n: usize) -> Result<TimeSeries> {
    p.validate()?;
    let (e0, e_inf) = energy_reference(psi0, p);
    let norm = e_inf - e0;
    if norm.abs() < 1e-12 {
        return Err(Error::DegenerateNormalization(norm));
    }
    let trotter = Stepper::trotter(p, TrotterVariant::First)?;
    let h = spin::top_hamiltonian_banded(p);
    let mut a = psi0.amplitudes().clone();
    let values = (0..n)
        .map(|_| {
            a = trotter.apply(&a);
            (banded_expectation(&h, &a) - e0) / norm
        })
        .collect();
    Ok(TimeSeries { tau: p.tau, values })
}

/// `F(nτ) = |⟨ψ_τ|ψ⟩|`.
pub fn fidelity(psi0: &QuantumState, p: &TopParams, n: usize) -> Result<TimeSeries> {
    p.validate()?;
    let trotter = Stepper::trotter(p, TrotterVariant::First)?;
    let ideal = Stepper::ideal(p, p.tau)?;
    let mut a = psi0.amplitudes().clone();
    let mut b = a.clone();
    let values = (0..n)
        .map(|_| {
            a = trotter.apply(&a);
            b = ideal.apply(&b);
            linalg::inner(a.as_ref(), b.as_ref()).norm().min(1.0)
        })
        .collect();
    Ok(TimeSeries { tau: p.tau, values })
}

/// Infinite-time average together with the number of degenerate phase
/// clusters that had to be treated blockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalEnsemble {
    pub value: f64,
    pub degenerate_clusters: usize,
}

/// Cluster width below which eigenphases count as degenerate.
pub const CLUSTER_TOL: f64 = 1e-8;

/// `Σ_m |⟨φ_m|ψ0⟩|² ⟨φ_m|A|φ_m⟩`, generalized to `Σ_c ⟨ψ0|P_c A P_c|ψ0⟩`
/// over clusters `c` of (near-)degenerate phases.
pub fn diagonal_ensemble_floquet(psi0: &QuantumState, spec: &FloquetSpectrum, a: &CMat) -> DiagonalEnsemble {
    let overlaps = spec.vectors.adjoint() * psi0.amplitudes();
    let av = a * &spec.vectors;
    let clusters = spec.clusters(CLUSTER_TOL);
    let mut value = 0.0;
    let mut degenerate = 0;
    for c in &clusters {
        if c.len() > 1 {
            degenerate += 1;
        }
        for &m in c {
            for &n in c {
                // conj(c_m) ⟨φ_m|A|φ_n⟩ c_n
                let mut amn = c64::new(0.0, 0.0);
                for i in 0..spec.dim() {
                    amn += spec.vectors[(i, m)].conj() * av[(i, n)];
                }
                value += (overlaps[m].conj() * amn * overlaps[n]).re;
            }
        }
    }
    DiagonalEnsemble { value, degenerate_clusters: degenerate }
}
