//! Eigenvector and eigenphase diagnostics of chaos, random-matrix references
//! and circular-ensemble sampling.

use faer::Mat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::floquet::{self, FloquetSpectrum, TrotterVariant};
use crate::linalg::{self, c64, CMat, CVec};
use crate::rng::stream_rng;
use crate::spin::{self, TopParams};

/// Mean spacing ratio of uncorrelated (Poissonian) levels, `2 ln 2 - 1`.
pub const R_POISSON: f64 = 0.386_294_361_119_890_6;
/// Literature value for β = 1 (orthogonal) ensembles.
pub const R_ORTHOGONAL_LITERATURE: f64 = 0.5307;
/// Literature value for β = 2 (unitary) ensembles; this is also the number
/// commonly quoted for the chaotic kicked top, so it is logged for comparison.
pub const R_UNITARY_LITERATURE: f64 = 0.5996;

/// Phases closer than this are treated as coincident.
pub const SPACING_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Ensemble {
    Cue,
    Coe,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Ipr,
    SpacingRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmtReference {
    pub ensemble: Ensemble,
    pub kind: ValueKind,
    pub dim: usize,
    pub value: f64,
}

impl RmtReference {
    /// Closed-form reference where one exists. The circular-ensemble spacing
    /// ratios have no exact closed form at finite `D` and are obtained from
    /// [`empirical_spacing_ratio`] instead.
    pub fn closed_form(ensemble: Ensemble, kind: ValueKind, dim: usize) -> Option<Self> {
        let value = match (ensemble, kind) {
            (Ensemble::Cue | Ensemble::Coe, ValueKind::Ipr) => rmt_ipr(ensemble, dim),
            (Ensemble::Poisson, ValueKind::SpacingRatio) => R_POISSON,
            (Ensemble::Poisson, ValueKind::Ipr) => return None,
            (_, ValueKind::SpacingRatio) => return None,
        };
        Some(RmtReference { ensemble, kind, dim, value })
    }
}

/// `Σ_m |⟨ψ|φ_m⟩|⁴`.
pub fn ipr(psi: &CVec, spec: &FloquetSpectrum) -> f64 {
    let overlaps = spec.vectors.adjoint() * psi;
    (0..overlaps.nrows()).map(|m| overlaps[m].norm_sqr().powi(2)).sum()
}

/// `IPR` of every column of `basis` against the spectrum.
pub fn ipr_per_vector(basis: &CMat, spec: &FloquetSpectrum) -> Vec<f64> {
    let o = basis.adjoint() * &spec.vectors;
    (0..o.nrows())
        .map(|n| (0..o.ncols()).map(|m| o[(n, m)].norm_sqr().powi(2)).sum())
        .collect()
}

/// `(Σ_{n,m} |⟨ψ_n|φ_m⟩|⁴)^{-1}`: equal to `1/D` when the two bases coincide
/// and to `1` when they are mutually unbiased.
pub fn participation_ratio(basis: &CMat, spec: &FloquetSpectrum) -> f64 {
    1.0 / ipr_per_vector(basis, spec).iter().sum::<f64>()
}

/// Eigenbasis of the target Hamiltonian `H = H_x + H_z` (real, as columns).
pub fn target_eigenbasis(p: &TopParams) -> Result<CMat> {
    let (_, vecs) = linalg::eigh_real(spin::top_hamiltonian_real(p).as_ref())?;
    Ok(linalg::to_complex(vecs.as_ref()))
}

/// PR of the Trotter Floquet operator of `variant` against the eigenbasis of
/// the target Hamiltonian.
pub fn floquet_participation_ratio(p: &TopParams, variant: TrotterVariant) -> Result<f64> {
    let spec = floquet::diagonalize_unitary(&floquet::trotter_operator(p, variant)?)?;
    Ok(participation_ratio(&target_eigenbasis(p)?, &spec))
}

/// Closed-form ensemble-averaged IPR of a fixed state in a random eigenbasis.
pub fn rmt_ipr(ensemble: Ensemble, dim: usize) -> f64 {
    let d = dim as f64;
    match ensemble {
        Ensemble::Cue => 2.0 / (d + 1.0),
        Ensemble::Coe => 3.0 / (d + 2.0),
        Ensemble::Poisson => 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacingRatio {
    pub mean: f64,
    /// Number of spacings that had to be floored at [`SPACING_FLOOR`].
    pub floored: usize,
}

impl SpacingRatio {
    pub fn has_coincident_phases(&self) -> bool {
        self.floored > 0
    }
}

/// Mean of `min(δ_n, δ_{n+1}) / max(δ_n, δ_{n+1})` over all `D` positions
/// on the circle, including the wraparound spacing.
pub fn spacing_ratio_of_phases(phases: &[f64]) -> SpacingRatio {
    let d = phases.len();
    assert!(d >= 3, "spacing ratio needs at least three phases");
    let mut p: Vec<f64> = phases.iter().map(|&x| floquet::wrap_phase(x)).collect();
    p.sort_by(f64::total_cmp);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut floored = 0;
    let gaps: Vec<f64> = (0..d)
        .map(|n| {
            let g = if n + 1 < d { p[n + 1] - p[n] } else { p[0] + two_pi - p[d - 1] };
            if g < SPACING_FLOOR {
                floored += 1;
                SPACING_FLOOR
            } else {
                g
            }
        })
        .collect();
    let sum: f64 = (0..d)
        .map(|n| {
            let (a, b) = (gaps[n], gaps[(n + 1) % d]);
            a.min(b) / a.max(b)
        })
        .sum();
    SpacingRatio { mean: sum / d as f64, floored }
}

pub fn spacing_ratio(spec: &FloquetSpectrum) -> SpacingRatio {
    spacing_ratio_of_phases(&spec.phases)
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
/// `diag(R)` divided out.
pub fn haar_unitary(dim: usize, rng: &mut impl Rng) -> CMat {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let g = Mat::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64::new(re * scale, im * scale)
    });
    let qr = g.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    let phases: Vec<c64> = (0..dim)
        .map(|j| {
            let d = r[(j, j)];
            if d.norm() == 0.0 {
                c64::new(1.0, 0.0)
            } else {
                d / d.norm()
            }
        })
        .collect();
    Mat::from_fn(dim, dim, |i, j| q[(i, j)] * phases[j])
}

/// Circular orthogonal ensemble member `UᵀU` with `U` Haar-random.
pub fn coe_unitary(dim: usize, rng: &mut impl Rng) -> CMat {
    let u = haar_unitary(dim, rng);
    u.transpose() * &u
}

pub fn sample_ensemble(ensemble: Ensemble, dim: usize, seed: u64) -> CMat {
    let mut rng = stream_rng(seed, 0);
    sample_with(ensemble, dim, &mut rng)
}

fn sample_with(ensemble: Ensemble, dim: usize, rng: &mut ChaCha8Rng) -> CMat {
    match ensemble {
        Ensemble::Cue => haar_unitary(dim, rng),
        Ensemble::Coe => coe_unitary(dim, rng),
        Ensemble::Poisson => {
            let phases: Vec<f64> = (0..dim).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
            Mat::from_fn(dim, dim, |i, j| if i == j { linalg::cis(phases[i]) } else { c64::new(0.0, 0.0) })
        }
    }
}

/// Sample mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl MonteCarlo {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        MonteCarlo { mean, std_err: (var / n as f64).sqrt(), samples: n }
    }
}

/// Mean spacing ratio of `samples` independent ensemble members, each drawn
/// from its own stream so the result does not depend on scheduling.
pub fn empirical_spacing_ratio(ensemble: Ensemble, dim: usize, samples: usize, seed: u64) -> MonteCarlo {
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let u = sample_with(ensemble, dim, &mut rng);
            let spec = floquet::diagonalize_unitary(&u).expect("sampled matrices are unitary");
            spacing_ratio(&spec).mean
        })
        .collect();
    MonteCarlo::from_values(&values)
}
