//! Random-quench unitaries, two-design diagnostics and the randomized
//! measurement estimator of the OTOC.

use std::io::Write;

use faer::Col;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{self, TrotterVariant};
use crate::linalg::{self, c64, CMat, CVec, RMat};
use crate::otoc;
use crate::rng::stream_rng;
use crate::spectral::{self, MonteCarlo};
use crate::spin::{self, Spin, TopParams};

/// Second moments below this make the estimator undefined.
pub const MOMENT_FLOOR: f64 = 1e-14;

/// Parameter ranges of a single quench, in units of `1/τ`.
pub const FIELD_RANGE: (f64, f64) = (0.5, 1.5);
pub const COUPLING_RANGE: (f64, f64) = (5.5, 6.5);

/// One quench `e^{-iH_zτ} e^{-iH_xτ}` with freshly drawn coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchDraw {
    pub h_x: f64,
    pub j_x: f64,
    pub h_z: f64,
    pub j_z: f64,
}

impl QuenchDraw {
    pub fn sample(tau: f64, rng: &mut impl Rng) -> Self {
        let mut u = |(lo, hi): (f64, f64)| rng.random_range(lo / tau..hi / tau);
        let h_x = u(FIELD_RANGE);
        let j_x = u(COUPLING_RANGE);
        let h_z = u(FIELD_RANGE);
        let j_z = u(COUPLING_RANGE);
        QuenchDraw { h_x, j_x, h_z, j_z }
    }

    pub fn params(&self, spin: Spin, tau: f64) -> TopParams {
        TopParams { spin, tau, h_x: self.h_x, h_z: self.h_z, j_x: self.j_x, j_z: self.j_z }
    }
}

fn check_quench(tau: f64, eta: usize) -> Result<()> {
    if eta == 0 {
        return Err(Error::InvalidParameter("eta must be at least 1".into()));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("quench tau must be positive, got {tau}")));
    }
    Ok(())
}

/// Fixed ingredients of every quench: the real eigenbasis of `S_x` and the
/// magnetic quantum numbers. Each `e^{-iH_xτ}` is then diagonal in a basis
/// that does not depend on the drawn coefficients.
#[derive(Debug, Clone)]
pub struct QuenchKit {
    spin: Spin,
    tau: f64,
    sx_vectors: RMat,
    sx_values: Vec<f64>,
}

impl QuenchKit {
    pub fn new(spin: Spin, tau: f64) -> Result<Self> {
        check_quench(tau, 1)?;
        let (sx_values, sx_vectors) = linalg::eigh_real(spin::sx_banded(spin).to_dense().as_ref())?;
        Ok(QuenchKit { spin, tau, sx_vectors, sx_values })
    }

    fn x_phases(&self, d: &QuenchDraw) -> Vec<c64> {
        let w = d.j_x / self.spin.dim() as f64;
        self.sx_values.iter().map(|&m| linalg::cis(-(d.h_x * m + w * m * m) * self.tau)).collect()
    }

    fn z_phases(&self, d: &QuenchDraw) -> Vec<c64> {
        let w = d.j_z / self.spin.dim() as f64;
        (0..self.spin.dim())
            .map(|k| {
                let m = self.spin.m(k);
                linalg::cis(-(d.h_z * m + w * m * m) * self.tau)
            })
            .collect()
    }

    /// `u_α ψ`.
    pub fn apply(&self, d: &QuenchDraw, psi: &CVec) -> CVec {
        let r = self.sx_vectors.as_ref();
        let mut y = linalg::real_t_mul_vec(r, psi.as_ref());
        for (yi, ph) in y.iter_mut().zip(self.x_phases(d)) {
            *yi *= ph;
        }
        let mut out = linalg::real_mul_vec(r, y.as_ref());
        for (oi, ph) in out.iter_mut().zip(self.z_phases(d)) {
            *oi *= ph;
        }
        out
    }

    /// `u_α M`.
    pub fn apply_mat(&self, d: &QuenchDraw, m: &CMat) -> CMat {
        let r = self.sx_vectors.as_ref();
        let mut y = linalg::real_mul_mat(r.transpose(), m.as_ref());
        let xp = self.x_phases(d);
        for j in 0..y.ncols() {
            for i in 0..y.nrows() {
                y[(i, j)] *= xp[i];
            }
        }
        let mut out = linalg::real_mul_mat(r, y.as_ref());
        let zp = self.z_phases(d);
        for j in 0..out.ncols() {
            for i in 0..out.nrows() {
                out[(i, j)] *= zp[i];
            }
        }
        out
    }

    /// `u_η ⋯ u_1` for the given draws (first draw applied first).
    pub fn product(&self, draws: &[QuenchDraw]) -> CMat {
        let mut u = linalg::identity(self.spin.dim());
        for d in draws {
            u = self.apply_mat(d, &u);
        }
        u
    }

    pub fn draw(&self, eta: usize, rng: &mut impl Rng) -> Vec<QuenchDraw> {
        (0..eta).map(|_| QuenchDraw::sample(self.tau, rng)).collect()
    }
}

/// `u_η ⋯ u_1` for the given draws, built from dense Floquet operators.
pub fn quench_product(spin: Spin, tau: f64, draws: &[QuenchDraw]) -> Result<CMat> {
    let mut u = linalg::identity(spin.dim());
    for d in draws {
        let step = floquet::floquet_operator(&d.params(spin, tau))?;
        u = &step * &u;
    }
    Ok(u)
}

/// Draws `eta` quenches from `rng` and returns them with their product.
pub fn random_quench(spin: Spin, tau: f64, eta: usize, rng: &mut impl Rng) -> Result<(CMat, Vec<QuenchDraw>)> {
    check_quench(tau, eta)?;
    let kit = QuenchKit::new(spin, tau)?;
    let draws = kit.draw(eta, rng);
    Ok((kit.product(&draws), draws))
}

pub fn random_quench_unitary(spin: Spin, tau: f64, eta: usize, rng: &mut impl Rng) -> Result<CMat> {
    Ok(random_quench(spin, tau, eta, rng)?.0)
}

/// A sample of random-quench unitaries. Member `k` is generated from
/// `stream_rng(seed, k)`.
#[derive(Debug, Clone)]
pub struct QuenchEnsemble {
    pub unitaries: Vec<CMat>,
    pub draws: Vec<Vec<QuenchDraw>>,
    pub eta: usize,
    pub tau: f64,
    pub seed: u64,
}

impl QuenchEnsemble {
    pub fn generate(spin: Spin, tau: f64, eta: usize, size: usize, seed: u64) -> Result<Self> {
        check_quench(tau, eta)?;
        if size == 0 {
            return Err(Error::InvalidParameter("ensemble size must be at least 1".into()));
        }
        let kit = QuenchKit::new(spin, tau)?;
        let members: Vec<(CMat, Vec<QuenchDraw>)> = (0..size)
            .into_par_iter()
            .map(|k| {
                let draws = kit.draw(eta, &mut stream_rng(seed, k as u64));
                (kit.product(&draws), draws)
            })
            .collect();
        let (unitaries, draws) = members.into_iter().unzip();
        Ok(QuenchEnsemble { unitaries, draws, eta, tau, seed })
    }

    pub fn len(&self) -> usize {
        self.unitaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unitaries.is_empty()
    }

    pub fn max_unitarity_residual(&self) -> f64 {
        self.unitaries.iter().map(|u| linalg::unitarity_residual(u.as_ref())).fold(0.0, f64::max)
    }

    /// Mean and standard error of the members' phase spacing ratios.
    pub fn spacing_ratio(&self) -> Result<MonteCarlo> {
        let values: Vec<f64> = self
            .unitaries
            .par_iter()
            .map(|u| floquet::diagonalize_unitary(u).map(|s| spectral::spacing_ratio(&s).mean))
            .collect::<Result<_>>()?;
        Ok(MonteCarlo::from_values(&values))
    }

    pub fn frame_potential(&self) -> f64 {
        frame_potential(&self.unitaries)
    }
}

/// `tr(U†V) = Σ conj(U_ij) V_ij`.
fn overlap(u: &CMat, v: &CMat) -> c64 {
    let mut s = c64::new(0.0, 0.0);
    for j in 0..u.ncols() {
        for i in 0..u.nrows() {
            s += u[(i, j)].conj() * v[(i, j)];
        }
    }
    s
}

/// `(1/|E|²) Σ_{U,V} |tr(U†V)|⁴`, diagonal terms included. With this
/// normalization a finite Haar sample averages to `2 + D⁴/|E|`.
pub fn frame_potential(unitaries: &[CMat]) -> f64 {
    let n = unitaries.len();
    assert!(n > 0, "frame potential of an empty ensemble");
    let d = unitaries[0].nrows() as f64;
    let off: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| {
                    let t = overlap(&unitaries[i], &unitaries[j]).norm_sqr();
                    t * t
                })
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    (n as f64 * d.powi(4) + 2.0 * off) / (n * n) as f64
}

/// `2 + D⁴/|E|`.
pub fn cue_frame_expectation(dim: usize, size: usize) -> f64 {
    2.0 + (dim as f64).powi(4) / size as f64
}

/// Frame potential of independent Haar samples of the same size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameReference {
    pub mean: f64,
    /// Standard deviation across repetitions (not of the mean).
    pub std: f64,
    pub repetitions: usize,
}

pub fn cue_frame_reference(dim: usize, size: usize, repetitions: usize, seed: u64) -> FrameReference {
    let values: Vec<f64> = (0..repetitions)
        .map(|r| {
            let us: Vec<CMat> = (0..size)
                .into_par_iter()
                .map(|k| spectral::haar_unitary(dim, &mut stream_rng(seed ^ (r as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15), k as u64)))
                .collect();
            frame_potential(&us)
        })
        .collect();
    let mc = MonteCarlo::from_values(&values);
    FrameReference { mean: mc.mean, std: mc.std_err * (repetitions as f64).sqrt(), repetitions }
}

/// Settings of the randomized measurement protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedConfig {
    pub n_unitaries: usize,
    pub eta: usize,
    pub quench_tau: f64,
    pub seed: u64,
    /// Input state before randomization; `None` means `|0, 0⟩ = |S, S⟩`.
    pub psi0: Option<CVec>,
}

impl RandomizedConfig {
    pub fn new(n_unitaries: usize, eta: usize, seed: u64) -> Self {
        RandomizedConfig { n_unitaries, eta, quench_tau: 1.0, seed, psi0: None }
    }
}

/// Estimated `F(kτ)/F(0)` for `k = 0…n` and the scale-free deficit `1 - ratio`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedOtoc {
    pub times: Vec<f64>,
    pub ratio: Vec<f64>,
    /// `1 - ratio`, evaluated without cancellation.
    pub deficit: Vec<f64>,
}

impl RandomizedOtoc {
    /// `C = 2 F0 (1 - ratio)` for a given `F(0) = tr(W²)/D`.
    pub fn c_reconstructed(&self, f0: f64) -> Vec<f64> {
        self.deficit.iter().map(|x| 2.0 * f0 * x).collect()
    }
}

/// Statistical-correlation estimate of `F(t)/F(0)` under the first-order
/// Trotter dynamics of `p`.
///
/// For every random unitary `u` the protocol evolves `ψ_u = uψ0` and
/// `Vψ_u`, and records `a = ⟨W(t)⟩_u` and `b = ⟨V†W(t)V⟩_u`. The estimate is
/// `mean(ab) / sqrt(mean(a²) mean(b²))`. The difference `b - a` is
/// propagated as its own vector so that `1 - ratio` survives for `V` close
/// to the identity.
pub fn estimate_otoc_randomized(p: &TopParams, n: usize, w: &CMat, v: &CMat, cfg: &RandomizedConfig) -> Result<RandomizedOtoc> {
    p.validate()?;
    check_quench(cfg.quench_tau, cfg.eta)?;
    let d = p.dim();
    if w.nrows() != d || v.nrows() != d || w.ncols() != d || v.ncols() != d {
        return Err(Error::InvalidParameter(format!("operators must be {d}x{d}")));
    }
    if linalg::hermiticity_residual(w.as_ref()) > 1e-10 {
        return Err(Error::InvalidParameter("W must be Hermitian".into()));
    }
    let tr = linalg::trace(w.as_ref()).norm();
    if tr > 1e-10 * d as f64 {
        return Err(Error::NotTraceless(tr));
    }
    let ur = linalg::unitarity_residual(v.as_ref());
    if ur > 1e-10 {
        return Err(Error::NotUnitary(ur));
    }
    if cfg.n_unitaries == 0 {
        return Err(Error::InvalidParameter("n_unitaries must be at least 1".into()));
    }
    let psi0 = match &cfg.psi0 {
        Some(x) if x.nrows() == d => x.clone(),
        Some(_) => return Err(Error::InvalidParameter("psi0 has the wrong dimension".into())),
        None => Col::from_fn(d, |i| if i == 0 { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) }),
    };
    let u = floquet::trotter_operator(p, TrotterVariant::First)?;
    let kit = QuenchKit::new(p.spin, cfg.quench_tau)?;
    let vm1 = v - linalg::identity(d);

    let samples: Vec<Vec<(f64, f64)>> = (0..cfg.n_unitaries)
        .into_par_iter()
        .map(|k| {
            let draws = kit.draw(cfg.eta, &mut stream_rng(cfg.seed, k as u64));
            let mut psi = draws.iter().fold(psi0.clone(), |x, d| kit.apply(d, &x));
            let mut delta = &vm1 * &psi;
            let mut out = Vec::with_capacity(n + 1);
            for step in 0..=n {
                if step > 0 {
                    psi = &u * &psi;
                    delta = &u * &delta;
                }
                let wpsi = w * &psi;
                let wdelta = w * &delta;
                let a = linalg::inner(psi.as_ref(), wpsi.as_ref()).re;
                // b - a = 2 Re⟨δ|W|ψ⟩ + ⟨δ|W|δ⟩
                let diff = 2.0 * linalg::inner(delta.as_ref(), wpsi.as_ref()).re + linalg::inner(delta.as_ref(), wdelta.as_ref()).re;
                out.push((a, diff));
            }
            out
        })
        .collect();

    let m = cfg.n_unitaries as f64;
    let mut ratio = Vec::with_capacity(n + 1);
    let mut deficit = Vec::with_capacity(n + 1);
    for step in 0..=n {
        let (mut saa, mut sad, mut sdd) = (0.0, 0.0, 0.0);
        for s in &samples {
            let (a, dd) = s[step];
            saa += a * a;
            sad += a * dd;
            sdd += dd * dd;
        }
        let (aa, ad, dd) = (saa / m, sad / m, sdd / m);
        let bb = aa + 2.0 * ad + dd;
        let ab = aa + ad;
        let lowest = aa.min(bb);
        if lowest < MOMENT_FLOOR {
            return Err(Error::VanishingMoment(lowest));
        }
        let root = (aa * bb).sqrt();
        // aa·bb - ab² = aa·dd - ad² (Lagrange identity)
        let gap = (aa * dd - ad * ad).max(0.0);
        let def = if ab + root > 0.0 { gap / (root * (root + ab)) } else { 1.0 - ab / root };
        ratio.push(ab / root);
        deficit.push(def);
    }
    let times = (0..=n).map(|k| k as f64 * p.tau).collect();
    Ok(RandomizedOtoc { times, ratio, deficit })
}

/// One row of the randomized-OTOC comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizedRow {
    pub t: f64,
    pub c_exact: f64,
    pub c_estimated: f64,
    pub n_unitaries: usize,
    pub eta: usize,
    pub seed: u64,
}

/// Exact `C(t)` next to the randomized reconstruction with `F(0) = tr(W²)/D`.
pub fn randomized_comparison(p: &TopParams, n: usize, w: &CMat, v: &CMat, cfg: &RandomizedConfig) -> Result<Vec<RandomizedRow>> {
    let exact = otoc::otoc_c(p, n, w, v)?;
    let est = estimate_otoc_randomized(p, n, w, v, cfg)?;
    let f0 = linalg::trace_of_product(w.as_ref(), w.as_ref()).re / p.dim() as f64;
    let c_est = est.c_reconstructed(f0);
    Ok((0..=n)
        .map(|k| RandomizedRow {
            t: est.times[k],
            c_exact: exact.c_values[k],
            c_estimated: c_est[k],
            n_unitaries: cfg.n_unitaries,
            eta: cfg.eta,
            seed: cfg.seed,
        })
        .collect())
}

pub fn write_randomized_csv<W: Write>(out: W, rows: &[RandomizedRow]) -> Result<()> {
    let io = |e: csv::Error| Error::InvalidParameter(format!("csv output failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidParameter(format!("csv output failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::Spin;

    fn spin(s: f64) -> Spin {
        Spin::new(s).unwrap()
    }

    #[test]
    fn single_quench_is_a_floquet_operator() {
        let mut rng = stream_rng(11, 0);
        let (u, draws) = random_quench(spin(3.0), 0.7, 1, &mut rng).unwrap();
        let f = floquet::floquet_operator(&draws[0].params(spin(3.0), 0.7)).unwrap();
        assert!(linalg::max_abs_diff(u.as_ref(), f.as_ref()) < 1e-12);
    }

    #[test]
    fn draws_are_in_range_and_reproducible() {
        let a = QuenchEnsemble::generate(spin(2.0), 0.5, 4, 6, 9).unwrap();
        let b = QuenchEnsemble::generate(spin(2.0), 0.5, 4, 6, 9).unwrap();
        assert_eq!(a.draws, b.draws);
        for d in a.draws.iter().flatten() {
            assert!((1.0..3.0).contains(&d.h_x) && (1.0..3.0).contains(&d.h_z));
            assert!((11.0..13.0).contains(&d.j_x) && (11.0..13.0).contains(&d.j_z));
        }
        assert!(a.max_unitarity_residual() < 1e-10);
    }

    #[test]
    fn product_order() {
        let mut rng = stream_rng(4, 2);
        let (u, draws) = random_quench(spin(1.5), 1.0, 2, &mut rng).unwrap();
        let u1 = floquet::floquet_operator(&draws[0].params(spin(1.5), 1.0)).unwrap();
        let u2 = floquet::floquet_operator(&draws[1].params(spin(1.5), 1.0)).unwrap();
        assert!(linalg::max_abs_diff(u.as_ref(), (&u2 * &u1).as_ref()) < 1e-12);
        assert!(linalg::max_abs_diff(u.as_ref(), quench_product(spin(1.5), 1.0, &draws).unwrap().as_ref()) < 1e-12);
    }

    #[test]
    fn vector_and_matrix_paths_agree() {
        let kit = QuenchKit::new(spin(5.5), 0.9).unwrap();
        let draws = kit.draw(3, &mut stream_rng(6, 1));
        let u = kit.product(&draws);
        let psi = crate::spin::coherent_state(spin(5.5), 0.7, 1.1).into_inner();
        let by_vec = draws.iter().fold(psi.clone(), |x, d| kit.apply(d, &x));
        let by_mat = &u * &psi;
        let err = (0..psi.nrows()).map(|i| (by_vec[i] - by_mat[i]).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn rejects_bad_quench_settings() {
        let mut rng = stream_rng(0, 0);
        assert!(random_quench_unitary(spin(1.0), 1.0, 0, &mut rng).is_err());
        assert!(random_quench_unitary(spin(1.0), 0.0, 3, &mut rng).is_err());
    }

    #[test]
    fn singleton_frame_potential() {
        let u = spectral::haar_unitary(5, &mut stream_rng(1, 0));
        assert!((frame_potential(&[u]) - 625.0).abs() < 1e-9);
    }

    #[test]
    fn identical_members_saturate_the_frame_potential() {
        let u = spectral::haar_unitary(4, &mut stream_rng(2, 0));
        let f = frame_potential(&[u.clone(), u.clone(), u]);
        assert!((f - 256.0).abs() < 1e-8);
    }

    #[test]
    fn identity_perturbation_gives_unit_ratio() {
        let p = TopParams::standard(spin(4.0), 1.0);
        let (w, _) = otoc::default_operators(p.spin, 0.0);
        let v = linalg::identity(p.dim());
        let est = estimate_otoc_randomized(&p, 5, &w, &v, &RandomizedConfig::new(8, 2, 3)).unwrap();
        for (r, d) in est.ratio.iter().zip(&est.deficit) {
            assert!((r - 1.0).abs() < 1e-14);
            assert_eq!(*d, 0.0);
        }
    }

    #[test]
    fn commuting_start_gives_unit_ratio() {
        let p = TopParams::standard(spin(4.0), 1.0);
        let (w, v) = otoc::default_operators(p.spin, 0.3);
        let est = estimate_otoc_randomized(&p, 3, &w, &v, &RandomizedConfig::new(10, 3, 5)).unwrap();
        assert!((est.ratio[0] - 1.0).abs() < 1e-12);
        assert!(est.deficit[0] < 1e-12);
        assert!(est.deficit[3] > 1e-6);
    }

    #[test]
    fn deficit_matches_direct_ratio() {
        let p = TopParams::standard(spin(3.0), 1.5);
        let (w, v) = otoc::default_operators(p.spin, 0.8);
        let est = estimate_otoc_randomized(&p, 4, &w, &v, &RandomizedConfig::new(12, 3, 8)).unwrap();
        for (r, d) in est.ratio.iter().zip(&est.deficit) {
            assert!((1.0 - r - d).abs() < 1e-12);
        }
    }

    #[test]
    fn estimator_is_deterministic() {
        let p = TopParams::standard(spin(3.0), 1.0);
        let (w, v) = otoc::default_operators(p.spin, 0.1);
        let cfg = RandomizedConfig::new(9, 2, 77);
        let a = estimate_otoc_randomized(&p, 3, &w, &v, &cfg).unwrap();
        let b = estimate_otoc_randomized(&p, 3, &w, &v, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vanishing_moment_is_reported() {
        let p = TopParams::standard(spin(2.0), 1.0);
        let w = faer::Mat::<c64>::zeros(p.dim(), p.dim());
        let v = linalg::identity(p.dim());
        let r = estimate_otoc_randomized(&p, 1, &w, &v, &RandomizedConfig::new(3, 1, 0));
        assert!(matches!(r, Err(Error::VanishingMoment(_))));
    }

    #[test]
    fn rejects_traced_observable() {
        let p = TopParams::standard(spin(2.0), 1.0);
        let w = linalg::identity(p.dim());
        let r = estimate_otoc_randomized(&p, 1, &w, &w, &RandomizedConfig::new(3, 1, 0));
        assert!(matches!(r, Err(Error::NotTraceless(_))));
    }
}
