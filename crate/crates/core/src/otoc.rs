//! Infinite-temperature out-of-time-ordered correlators of the Trotterized
//! top: stroboscopic series, circular-ensemble and infinite-time averages,
//! and exponential growth-rate fits.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{self, FloquetSpectrum, TrotterVariant};
use crate::linalg::{self, c64, CMat};
use crate::spin::{self, Spin, TopParams};

/// Default rotation angle of `V = e^{-iφS_z}`.
pub const DEFAULT_PHI: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtocSeries {
    pub times: Vec<f64>,
    pub c_values: Vec<f64>,
    pub f_values: Vec<c64>,
}

impl OtocSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `W = S_z` and `V = e^{-iφS_z}`.
pub fn default_operators(spin: Spin, phi: f64) -> (CMat, CMat) {
    let d = spin.dim();
    let w = Mat::from_fn(d, d, |i, j| if i == j { c64::new(spin.m(i), 0.0) } else { c64::new(0.0, 0.0) });
    let v = Mat::from_fn(d, d, |i, j| if i == j { linalg::cis(-phi * spin.m(i)) } else { c64::new(0.0, 0.0) });
    (w, v)
}

/// `C = 2(tr(W²)/D - Re F)`.
pub fn c_from_f(w_sq_over_d: f64, f: c64) -> f64 {
    2.0 * (w_sq_over_d - f.re)
}

fn check_commuting(w: &CMat, v: &CMat) -> Result<()> {
    let c = linalg::commutator(w.as_ref(), v.as_ref());
    let r = linalg::max_abs(c.as_ref());
    if r > 1e-12 {
        return Err(Error::NonCommuting(r));
    }
    Ok(())
}

fn check_f_inputs(w: &CMat, v: &CMat) -> Result<()> {
    let tr = linalg::trace(w.as_ref()).norm();
    if tr > 1e-10 {
        return Err(Error::NotTraceless(tr));
    }
    let r = linalg::unitarity_residual(v.as_ref());
    if r > 1e-10 {
        return Err(Error::NotUnitary(r));
    }
    Ok(())
}

fn check_shapes(w: &CMat, v: &CMat, d: usize) -> Result<()> {
    if w.nrows() != d || w.ncols() != d || v.nrows() != d || v.ncols() != d {
        return Err(Error::InvalidParameter(format!("W and V must be {d}x{d}")));
    }
    let h = linalg::hermiticity_residual(w.as_ref());
    if h > 1e-12 {
        return Err(Error::InvalidParameter(format!("W is not Hermitian (residual {h:.3e})")));
    }
    Ok(())
}

/// `(C, F)` for the current Heisenberg operator `w`.
fn otoc_pair(w: &CMat, v: &CMat, v_diag: Option<&[c64]>) -> (f64, c64) {
    let d = w.nrows();
    let inv_d = 1.0 / d as f64;
    match v_diag {
        Some(vd) => {
            // [W, V]_ij = W_ij (v_j - v_i);  tr(W V† W V) = Σ |W_ji|² v_i conj(v_j)
            let mut c = 0.0;
            let mut f = c64::new(0.0, 0.0);
            for j in 0..d {
                for i in 0..d {
                    let a = w[(i, j)].norm_sqr();
                    c += a * (vd[j] - vd[i]).norm_sqr();
                    f += vd[j] * vd[i].conj() * a;
                }
            }
            (c * inv_d, f * inv_d)
        }
        None => {
            let wv = w * v;
            let vw = v * w;
            let k = &wv - &vw;
            let c = (0..d).flat_map(|j| (0..d).map(move |i| (i, j))).map(|(i, j)| k[(i, j)].norm_sqr()).sum::<f64>();
            // tr(W† V† W V) with W Hermitian = tr(V† W V W)
            let vdw = v.adjoint() * w;
            let f = linalg::trace_of_product(vdw.as_ref(), vw.as_ref());
            (c * inv_d, f * inv_d)
        }
    }
}

/// Stroboscopic OTOC series `t = 0, τ, …, nτ` for `W(kτ) = U^{k†} W U^k`.
/// `C` is evaluated from the commutator and `F` from its own trace, so the
/// two can be cross-checked.
pub fn otoc_from_unitary(u: &CMat, tau: f64, n: usize, w: &CMat, v: &CMat) -> Result<OtocSeries> {
    let d = u.nrows();
    check_shapes(w, v, d)?;
    check_commuting(w, v)?;
    let v_diag = linalg::exact_diagonal(v.as_ref());
    let ud = u.adjoint().to_owned();
    let mut wt = w.clone();
    let mut times = Vec::with_capacity(n + 1);
    let mut cs = Vec::with_capacity(n + 1);
    let mut fs = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            let tmp = &ud * &wt;
            wt = &tmp * u;
        }
        let (c, f) = otoc_pair(&wt, v, v_diag.as_deref());
        times.push(k as f64 * tau);
        cs.push(c);
        fs.push(f);
    }
    Ok(OtocSeries { times, c_values: cs, f_values: fs })
}

/// OTOC under the first-order Trotter dynamics.
pub fn otoc_c(p: &TopParams, n: usize, w: &CMat, v: &CMat) -> Result<OtocSeries> {
    otoc_variant(p, n, w, v, TrotterVariant::First)
}

pub fn otoc_variant(p: &TopParams, n: usize, w: &CMat, v: &CMat, variant: TrotterVariant) -> Result<OtocSeries> {
    let u = floquet::trotter_operator(p, variant)?;
    otoc_from_unitary(&u, p.tau, n, w, v)
}

/// `F(kτ)` for `k = 0…n`; requires traceless `W` and unitary `V`.
pub fn otoc_f(p: &TopParams, n: usize, w: &CMat, v: &CMat) -> Result<Vec<c64>> {
    check_f_inputs(w, v)?;
    Ok(otoc_c(p, n, w, v)?.f_values)
}

/// OTOC under the exact dynamics sampled every `dt`.
pub fn otoc_ideal(p: &TopParams, dt: f64, n: usize, w: &CMat, v: &CMat) -> Result<OtocSeries> {
    let u = floquet::ideal_operator(p, dt)?;
    otoc_from_unitary(&u, dt, n, w, v)
}

/// Average of `F` over circular-orthogonal Floquet operators, evaluated in
/// the frame `W̃ = QWQ†`, `Ṽ = QVQ†` with `Q = e^{-iH_xτ/2}` where the
/// symmetrized operator is complex-symmetric.
///
/// The `(D+1)` cross term enters with a positive sign: this is the sign that
/// reproduces both the `V = 1` limit `tr(W²)/D` and direct sampling.
pub fn coe_average_f(p: &TopParams, w: &CMat, v: &CMat) -> Result<f64> {
    check_f_inputs(w, v)?;
    let q = floquet::half_step_x(p)?;
    let wt = &q * w * q.adjoint();
    let vt = &q * v * q.adjoint();
    Ok(coe_average_f_in_frame(&wt, &vt))
}

/// The circular-orthogonal average for operators already in the symmetric
/// frame.
pub fn coe_average_f_in_frame(w: &CMat, v: &CMat) -> f64 {
    let d = w.nrows() as f64;
    let nd = d * d * (d + 1.0) * (d + 3.0);
    let ws = Mat::from_fn(w.nrows(), w.ncols(), |i, j| w[(i, j)].conj());
    let wt = w.transpose().to_owned();
    let vd = v.adjoint().to_owned();
    let tr = |a: &CMat| linalg::trace(a.as_ref());
    let trp = |a: &CMat, b: &CMat| linalg::trace_of_product(a.as_ref(), b.as_ref());

    let v_ws = v * &ws;
    let vd_wt = &vd * &wt;
    let v_wt = v * &wt;
    let vd_ws = &vd * &ws;
    let t1 = trp(&v_ws, &vd_wt);
    let t2 = trp(&v_wt, &vd_ws);
    let tr_v = tr(v);
    let t3 = tr_v.norm_sqr() * trp(w, &w.adjoint().to_owned());
    let t4 = trp(w, w);
    let t5 = tr(&v_wt).norm_sqr();
    let t6 = tr(&v_ws).norm_sqr();
    let wt_ws = &wt * &ws;
    let ws_wt = &ws * &wt;
    let t7 = tr_v * trp(&vd, &wt_ws) + tr_v.conj() * trp(v, &ws_wt);
    let total = (t1 + t2 + t3) * (d + 2.0) - t4 * (d + 4.0) - t5 - t6 + t7 * (d + 1.0);
    total.re / nd
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfiniteTimeAverage {
    pub f_bar: f64,
    /// Nontrivial coincidences among phase differences (within 1e-8).
    pub resonances: usize,
}

/// Long-time mean of `F` from the Floquet eigenbasis:
/// `F̄ = (1/D) Σ_{m,n} (W_mm V†_mn W_nn V_nm + W_mn V†_nn W_nm V_mm)/(1 + δ_mn)`.
pub fn infinite_time_average_f(spec: &FloquetSpectrum, w: &CMat, v: &CMat) -> InfiniteTimeAverage {
    let d = spec.dim();
    let basis = &spec.vectors;
    let we = basis.adjoint() * w * basis;
    let ve = basis.adjoint() * v * basis;
    let mut acc = c64::new(0.0, 0.0);
    for n in 0..d {
        for m in 0..d {
            let vd_mn = ve[(n, m)].conj();
            let vd_nn = ve[(n, n)].conj();
            let term = we[(m, m)] * vd_mn * we[(n, n)] * ve[(n, m)] + we[(m, n)] * vd_nn * we[(n, m)] * ve[(m, m)];
            acc += if m == n { term * 0.5 } else { term };
        }
    }
    InfiniteTimeAverage { f_bar: acc.re / d as f64, resonances: count_resonances(&spec.phases, 1e-8) }
}

fn count_resonances(phases: &[f64], tol: f64) -> usize {
    let mut diffs = Vec::with_capacity(phases.len() * phases.len());
    for (m, a) in phases.iter().enumerate() {
        for (n, b) in phases.iter().enumerate() {
            if m != n {
                diffs.push(floquet::wrap_phase(b - a));
            }
        }
    }
    diffs.sort_by(f64::total_cmp);
    diffs.windows(2).filter(|w| w[1] - w[0] < tol).count()
}

/// Exponential fit `C(t) = a e^{λt} - b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub lambda: f64,
    pub lambda_err: f64,
    pub a: f64,
    pub b: f64,
    /// Fitted time range `[t_start, t_end]`.
    pub window: (f64, f64),
    pub points: usize,
    /// Root-mean-square relative residual of the fit.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FitWindow {
    /// Explicit time range, inclusive.
    Range(f64, f64),
    /// Automatic window for a spin of size `spin`, see [`auto_window`].
    Auto { spin: f64 },
}

/// Fits the exponential growth of `C` inside a window.
pub fn fit_growth_rate(series: &OtocSeries, window: FitWindow) -> Result<GrowthFit> {
    match window {
        FitWindow::Range(t0, t1) => {
            let idx: Vec<usize> = (0..series.len())
                .filter(|&k| series.times[k] >= t0 - 1e-12 && series.times[k] <= t1 + 1e-12)
                .collect();
            fit_indices(series, &idx)
        }
        FitWindow::Auto { spin } => {
            let (t0, t1) = auto_window(series, spin)?;
            fit_growth_rate(series, FitWindow::Range(t0, t1))
        }
    }
}

/// Heuristic window of exponential growth.
///
/// * lower edge: the later of the first step where `C` exceeds ten times
///   its first-step value and the crossover `t = 2/λ` where `e^{λt}`
///   outgrows the early `t²` law;
/// * upper edge: the Ehrenfest estimate `t_E = ln(S)/λ`, cut earlier if the
///   local log-slope drops below 3/4 of its median in the window (the onset
///   of saturation).
///
/// `λ` starts from a log-slope estimate and is refined once with a fit.
/// Windows holding fewer than five samples grow backwards towards the
/// first step, then forwards.
pub fn auto_window(series: &OtocSeries, spin: f64) -> Result<(f64, f64)> {
    let (start, prior) = auto_start(series)?;
    let ln_s = spin.ln();
    let mut lambda = prior;
    let mut window = (0.0, 0.0);
    for pass in 0..2 {
        let (lo, hi) = window_indices(series, start, lambda, ln_s);
        window = (series.times[lo], series.times[hi]);
        if pass == 0 {
            match fit_indices(series, &(lo..=hi).collect::<Vec<_>>()) {
                Ok(f) if f.lambda > 0.0 => lambda = f.lambda,
                _ => break,
            }
        }
    }
    Ok(window)
}

fn window_indices(series: &OtocSeries, start: usize, lambda: f64, ln_s: f64) -> (usize, usize) {
    let n = series.len();
    let t_lo = series.times[start].max(2.0 / lambda);
    let t_e = ln_s / lambda;
    let mut lo = (start..n).find(|&k| series.times[k] >= t_lo - 1e-12).unwrap_or(n - 1);
    let mut hi = lo;
    while hi + 1 < n && series.times[hi + 1] <= t_e + 1e-12 {
        hi += 1;
    }
    if hi > lo + 1 {
        let slopes: Vec<f64> = (lo..hi)
            .map(|k| (series.c_values[k + 1] / series.c_values[k]).ln() / (series.times[k + 1] - series.times[k]))
            .collect();
        let mut sorted = slopes.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        if let Some(cut) = slopes.iter().position(|&s| s < 0.75 * median) {
            hi = lo + cut;
        }
    }
    while hi + 1 - lo < 5 && lo > 1 {
        lo -= 1;
    }
    while hi + 1 - lo < 5 && hi + 1 < n {
        hi += 1;
    }
    (lo, hi)
}

/// First index where `C` exceeds ten times its value at step one, and a
/// log-slope estimate of the rate from there to a tenth of the maximum.
fn auto_start(series: &OtocSeries) -> Result<(usize, f64)> {
    if series.len() < 6 {
        return Err(Error::Fit("series too short".into()));
    }
    let c1 = series.c_values[1];
    let start = (1..series.len())
        .find(|&k| series.c_values[k] > 10.0 * c1)
        .ok_or_else(|| Error::Fit("C never exceeds ten times its first-step value".into()))?;
    let cmax = series.c_values.iter().cloned().fold(f64::MIN, f64::max);
    let mut end = start + 1;
    while end + 1 < series.len() && series.c_values[end] < 0.1 * cmax {
        end += 1;
    }
    let end = end.min(series.len() - 1);
    let dt = series.times[end] - series.times[start];
    let prior = (series.c_values[end] / series.c_values[start]).ln() / dt;
    if !(prior > 0.0) || !prior.is_finite() {
        return Err(Error::Fit("no exponential growth detected".into()));
    }
    Ok((start, prior))
}

fn fit_indices(series: &OtocSeries, idx: &[usize]) -> Result<GrowthFit> {
    if idx.len() < 5 {
        return Err(Error::Fit(format!("window holds {} points, need at least 5", idx.len())));
    }
    let t: Vec<f64> = idx.iter().map(|&k| series.times[k]).collect();
    let y: Vec<f64> = idx.iter().map(|&k| series.c_values[k]).collect();
    if y.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Fit("window contains non-positive values".into()));
    }
    if y.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Fit("window is not monotonically increasing".into()));
    }
    fit_exponential(&t, &y)
}

/// Least squares of `a e^{λt} - b` with relative weights `1/y²`, so every
/// decade of growth counts equally.
///
/// For fixed `λ` the model is linear in `(a, b)` and is solved exactly
/// (variable projection); `λ` is bracketed on a grid and refined by golden
/// section. The uncertainty of `λ` is the Gauss-Newton estimate from
/// `s² (JᵀJ)⁻¹` on the weighted residuals.
pub fn fit_exponential(t: &[f64], y: &[f64]) -> Result<GrowthFit> {
    let n = t.len();
    if n < 4 || y.len() != n {
        return Err(Error::Fit("need at least four samples".into()));
    }
    if y.iter().any(|&v| v == 0.0 || !v.is_finite()) {
        return Err(Error::Fit("samples must be finite and nonzero".into()));
    }
    let t0 = t[0];
    let span = t[n - 1] - t0;
    if !(span > 0.0) {
        return Err(Error::Fit("degenerate time window".into()));
    }
    let w: Vec<f64> = y.iter().map(|v| 1.0 / (v * v)).collect();

    // Shifted time keeps e^{λ(t-t0)} well scaled; `a` is mapped back below.
    let linear = |lam: f64| -> (f64, f64, f64) {
        let e: Vec<f64> = t.iter().map(|&ti| (lam * (ti - t0)).exp()).collect();
        let (mut s1, mut se, mut see, mut sy, mut sey) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            s1 += w[i];
            se += w[i] * e[i];
            see += w[i] * e[i] * e[i];
            sy += w[i] * y[i];
            sey += w[i] * e[i] * y[i];
        }
        let det = s1 * see - se * se;
        if !(det.abs() > 1e-300) || !det.is_finite() {
            return (f64::INFINITY, 0.0, 0.0);
        }
        // y ≈ a e + c with c = -b
        let a = (s1 * sey - se * sy) / det;
        let c = (see * sy - se * sey) / det;
        let rss = (0..n).map(|i| w[i] * (a * e[i] + c - y[i]).powi(2)).sum();
        (rss, a, c)
    };

    let max_rate = 60.0 / span;
    let grid = 600;
    let lam_at = |k: usize| max_rate * (k as f64 / grid as f64);
    let mut best = (f64::INFINITY, 1usize);
    for k in 1..=grid {
        let r = linear(lam_at(k)).0;
        if r < best.0 {
            best = (r, k);
        }
    }
    let mut lo = lam_at(best.1 - 1);
    let mut hi = lam_at((best.1 + 1).min(grid));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (linear(x1).0, linear(x2).0);
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.abs().max(1e-300) {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = linear(x1).0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = linear(x2).0;
        }
    }
    let lam = 0.5 * (lo + hi);
    let (rss, a_s, c_s) = linear(lam);
    if !rss.is_finite() || !(lam > 0.0) {
        return Err(Error::Fit("least squares did not converge".into()));
    }
    if best.1 == grid {
        return Err(Error::Fit("rate ran into the search bound".into()));
    }
    let a = a_s * (-lam * t0).exp();
    let b = -c_s;

    let mut jtj = [[0.0f64; 3]; 3];
    for i in 0..n {
        let e = (lam * (t[i] - t0)).exp();
        let sw = w[i].sqrt();
        let gvec = [e * sw, -sw, a_s * (t[i] - t0) * e * sw];
        for r in 0..3 {
            for c in 0..3 {
                jtj[r][c] += gvec[r] * gvec[c];
            }
        }
    }
    let dof = (n as f64 - 3.0).max(1.0);
    let s2 = rss / dof;
    let lambda_err = invert3(jtj).map(|inv| (s2 * inv[2][2]).max(0.0).sqrt()).unwrap_or(f64::INFINITY);
    Ok(GrowthFit {
        lambda: lam,
        lambda_err,
        a,
        b,
        window: (t[0], t[n - 1]),
        points: n,
        residual: (rss / n as f64).sqrt(),
    })
}

fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            inv[r][c] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    Some(inv)
}

/// `S(S+1)/3`, the value of `tr(S_z²)/D`.
pub fn sz_second_moment(spin: Spin) -> f64 {
    spin.casimir() / 3.0
}

/// `C_COE` for `W = S_z`, `V = e^{-iφS_z}`.
pub fn coe_saturation_c(p: &TopParams, phi: f64) -> Result<f64> {
    let (w, v) = default_operators(p.spin, phi);
    Ok(c_from_f(sz_second_moment(p.spin), c64::new(coe_average_f(p, &w, &v)?, 0.0)))
}

/// Helper used by several callers: the Floquet spectrum of `U_τ`.
pub fn floquet_spectrum(p: &TopParams) -> Result<FloquetSpectrum> {
    floquet::diagonalize_unitary(&floquet::floquet_operator(p)?)
}

/// Dense `S_z` for a spin.
pub fn sz(spin: Spin) -> CMat {
    spin::spin_operators_for(spin).sz
}
