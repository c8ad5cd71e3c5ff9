//! The large-spin limit: stroboscopic map on the unit sphere, Poincaré
//! sections, the continuous-time reference flow and classical versions of
//! the error measures.
//!
//! Angles follow `X = sin θ cos φ`, `Y = sin θ sin φ`, `Z = cos θ`, the same
//! convention as the spin coherent states.

use std::io::Write;

use ode_solvers::{Dopri5, OutputType, System, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::TopParams;

/// Unit vector `(X, Y, Z) = ⟨S⟩/S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSpin {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ClassicalSpin {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        ClassicalSpin { x, y, z }
    }

    pub fn from_angles(theta: f64, phi: f64) -> Self {
        ClassicalSpin { x: theta.sin() * phi.cos(), y: theta.sin() * phi.sin(), z: theta.cos() }
    }

    /// `(θ, φ)` with `θ ∈ [0, π]` and `φ ∈ (-π, π]`.
    pub fn angles(&self) -> (f64, f64) {
        (self.z.clamp(-1.0, 1.0).acos(), self.y.atan2(self.x))
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        ClassicalSpin { x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2)).sqrt()
    }
}

/// One Trotter period without renormalization: a rotation about `x` by
/// `τ(h_x + J_x X)`, then about `z` by `τ(h_z + J_z Z)` with the updated `Z`.
pub fn classical_step_raw(s: &ClassicalSpin, p: &TopParams) -> ClassicalSpin {
    let w1 = p.tau * (p.h_x + p.j_x * s.x);
    let (s1, c1) = w1.sin_cos();
    // (Y + iZ) -> (Y + iZ) e^{iω₁}
    let y1 = s.y * c1 - s.z * s1;
    let z1 = s.y * s1 + s.z * c1;
    let w2 = p.tau * (p.h_z + p.j_z * z1);
    let (s2, c2) = w2.sin_cos();
    // (X + iY) -> (X + iY) e^{iω₂}
    ClassicalSpin { x: s.x * c2 - y1 * s2, y: s.x * s2 + y1 * c2, z: z1 }
}

/// One map step followed by renormalization.
pub fn classical_step(s: &ClassicalSpin, p: &TopParams) -> ClassicalSpin {
    classical_step_raw(s, p).normalized()
}

/// Per-spin classical energy `h_x X + J_x X²/2 + h_z Z + J_z Z²/2`.
pub fn classical_energy(s: &ClassicalSpin, p: &TopParams) -> f64 {
    p.h_x * s.x + 0.5 * p.j_x * s.x * s.x + p.h_z * s.z + 0.5 * p.j_z * s.z * s.z
}

/// Uniform sphere average of the classical energy, `(J_x + J_z)/6`.
pub fn classical_e_infinity(p: &TopParams) -> f64 {
    (p.j_x + p.j_z) / 6.0
}

/// Map orbit together with the norm drift seen before each renormalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    /// Points after steps `0, 1, …, n`.
    pub points: Vec<ClassicalSpin>,
    pub max_step_drift: f64,
}

pub fn iterate_map(s0: &ClassicalSpin, p: &TopParams, n: usize) -> Orbit {
    let mut points = Vec::with_capacity(n + 1);
    let mut s = s0.normalized();
    points.push(s);
    let mut drift = 0.0f64;
    for _ in 0..n {
        let raw = classical_step_raw(&s, p);
        drift = drift.max((raw.norm() - 1.0).abs());
        s = raw.normalized();
        points.push(s);
    }
    Orbit { points, max_step_drift: drift }
}

/// Streaming statistics of a long orbit, without storing it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongOrbit {
    pub steps: usize,
    /// Mean of `Q_E` over steps `1…n`.
    pub qe_bar: f64,
    pub max_step_drift: f64,
    /// `|‖m_n‖ - 1|` after the last renormalized step.
    pub final_norm_error: f64,
    pub last: ClassicalSpin,
}

pub fn long_orbit(s0: &ClassicalSpin, p: &TopParams, n: usize) -> Result<LongOrbit> {
    let s0 = s0.normalized();
    let e0 = classical_energy(&s0, p);
    let norm = classical_e_infinity(p) - e0;
    if norm.abs() < 1e-12 {
        return Err(Error::DegenerateNormalization(norm));
    }
    let mut s = s0;
    let mut acc = 0.0;
    let mut drift = 0.0f64;
    for _ in 0..n {
        let raw = classical_step_raw(&s, p);
        drift = drift.max((raw.norm() - 1.0).abs());
        s = raw.normalized();
        acc += (classical_energy(&s, p) - e0) / norm;
    }
    Ok(LongOrbit {
        steps: n,
        qe_bar: if n > 0 { acc / n as f64 } else { 0.0 },
        max_step_drift: drift,
        final_norm_error: (s.norm() - 1.0).abs(),
        last: s,
    })
}

/// Stroboscopic `(θ, φ)` points of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareCloud {
    pub seed_id: usize,
    pub seed: (f64, f64),
    /// `(θ, φ)` after steps `1…n`.
    pub points: Vec<(f64, f64)>,
    pub max_step_drift: f64,
}

/// Iterates every seed `n_iter` times, in parallel across seeds.
pub fn poincare_section(seeds: &[(f64, f64)], p: &TopParams, n_iter: usize) -> Result<Vec<PoincareCloud>> {
    if n_iter == 0 {
        return Err(Error::InvalidParameter("n_iter must be at least 1".into()));
    }
    Ok(seeds
        .par_iter()
        .enumerate()
        .map(|(id, &(theta, phi))| {
            let mut s = ClassicalSpin::from_angles(theta, phi);
            let mut drift = 0.0f64;
            let points = (0..n_iter)
                .map(|_| {
                    let raw = classical_step_raw(&s, p);
                    drift = drift.max((raw.norm() - 1.0).abs());
                    s = raw.normalized();
                    s.angles()
                })
                .collect();
            PoincareCloud { seed_id: id, seed: (theta, phi), points, max_step_drift: drift }
        })
        .collect())
}

/// Uniform `n_theta × n_phi` grid of seeds, cell-centred in `θ`.
pub fn seed_grid(n_theta: usize, n_phi: usize) -> Vec<(f64, f64)> {
    let pi = std::f64::consts::PI;
    let mut out = Vec::with_capacity(n_theta * n_phi);
    for i in 0..n_theta {
        for j in 0..n_phi {
            let theta = pi * (i as f64 + 0.5) / n_theta as f64;
            let phi = -pi + 2.0 * pi * j as f64 / n_phi as f64;
            out.push((theta, phi));
        }
    }
    out
}

/// CSV with columns `seed_id, step, theta, phi`.
pub fn write_poincare_csv<W: Write>(out: W, clouds: &[PoincareCloud]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidParameter(format!("csv output failed: {e}"));
    w.write_record(["seed_id", "step", "theta", "phi"]).map_err(io)?;
    for c in clouds {
        for (k, &(theta, phi)) in c.points.iter().enumerate() {
            w.write_record(&[c.seed_id.to_string(), (k + 1).to_string(), format!("{theta:.12e}"), format!("{phi:.12e}")])
                .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::InvalidParameter(format!("csv output failed: {e}")))?;
    Ok(())
}

/// Finite-time Lyapunov estimate per map iteration from two seeds `delta0`
/// apart. The separation is renormalized to `delta0` after every step and
/// the logarithmic growth is averaged over the `n` steps; divide by `τ` for a
/// rate per unit time.
pub fn separation_exponent(s0: &ClassicalSpin, p: &TopParams, delta0: f64, n: usize) -> f64 {
    let mut a = s0.normalized();
    let (theta, phi) = a.angles();
    let mut b = ClassicalSpin::from_angles(theta + delta0, phi);
    let mut acc = 0.0;
    for _ in 0..n {
        a = classical_step(&a, p);
        b = classical_step(&b, p);
        let d = a.distance(&b).max(f64::MIN_POSITIVE);
        acc += (d / delta0).ln();
        let scale = delta0 / d;
        b = ClassicalSpin::new(a.x + (b.x - a.x) * scale, a.y + (b.y - a.y) * scale, a.z + (b.z - a.z) * scale).normalized();
    }
    acc / n as f64
}

/// Newton iteration on `(θ, φ)` for a fixed point of the map.
pub fn find_fixed_point(guess: (f64, f64), p: &TopParams) -> Result<ClassicalSpin> {
    let residual = |th: f64, ph: f64| -> [f64; 2] {
        let s = ClassicalSpin::from_angles(th, ph);
        let (t2, p2) = classical_step(&s, p).angles();
        let dphi = crate::floquet::wrap_phase(p2 - ph);
        [t2 - th, dphi]
    };
    let (mut th, mut ph) = guess;
    for _ in 0..100 {
        let r = residual(th, ph);
        if r[0].abs() < 1e-14 && r[1].abs() < 1e-14 {
            return Ok(ClassicalSpin::from_angles(th, ph));
        }
        let h = 1e-7;
        let rt = residual(th + h, ph);
        let rp = residual(th, ph + h);
        let j = [[(rt[0] - r[0]) / h, (rp[0] - r[0]) / h], [(rt[1] - r[1]) / h, (rp[1] - r[1]) / h]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        th -= (j[1][1] * r[0] - j[0][1] * r[1]) / det;
        ph -= (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
    }
    let r = residual(th, ph);
    if r[0].abs() < 1e-12 && r[1].abs() < 1e-12 {
        Ok(ClassicalSpin::from_angles(th, ph))
    } else {
        Err(Error::Fit(format!("fixed-point search did not converge (residual {:.3e})", r[0].hypot(r[1]))))
    }
}

struct SpinFlow {
    p: TopParams,
}

impl System<f64, Vector3<f64>> for SpinFlow {
    /// `dm/dt = ω × m` with `ω = ∇H_cl = (h_x + J_x X, 0, h_z + J_z Z)`,
    /// the sign that matches the Heisenberg equations of the quantum top.
    fn system(&self, _t: f64, m: &Vector3<f64>, dm: &mut Vector3<f64>) {
        let wx = self.p.h_x + self.p.j_x * m[0];
        let wz = self.p.h_z + self.p.j_z * m[2];
        dm[0] = -wz * m[1];
        dm[1] = wz * m[0] - wx * m[2];
        dm[2] = wx * m[1];
    }
}

pub const IDEAL_RTOL: f64 = 1e-10;
pub const IDEAL_ATOL: f64 = 1e-12;

fn integrate_segment(s: &ClassicalSpin, p: &TopParams, t: f64) -> Result<ClassicalSpin> {
    if t == 0.0 {
        return Ok(*s);
    }
    let y0 = Vector3::new(s.x, s.y, s.z);
    let mut solver = Dopri5::from_param(
        SpinFlow { p: *p },
        0.0,
        t,
        t,
        y0,
        IDEAL_RTOL,
        IDEAL_ATOL,
        0.9,
        0.04,
        0.2,
        10.0,
        t,
        0.0,
        100_000,
        1000,
        OutputType::Sparse,
    );
    solver.integrate().map_err(|e| Error::Integrator(format!("{e:?}")))?;
    let y = solver.y_out().last().ok_or_else(|| Error::Integrator("no output".into()))?;
    Ok(ClassicalSpin::new(y[0], y[1], y[2]))
}

/// Classical state after time `t` of the exact (untrotterized) flow, using
/// an adaptive Dormand-Prince 5(4) pair.
pub fn classical_ideal_trajectory(s0: &ClassicalSpin, p: &TopParams, t: f64) -> Result<ClassicalSpin> {
    let mut s = s0.normalized();
    // Segments keep each call well inside the solver's step budget.
    let seg = 50.0;
    let mut done = 0.0;
    while done < t {
        let dt = (t - done).min(seg);
        s = integrate_segment(&s, p, dt)?;
        done += dt;
    }
    Ok(s)
}

/// Exact flow sampled at `0, dt, …, n dt`, each segment integrated separately.
pub fn classical_ideal_samples(s0: &ClassicalSpin, p: &TopParams, dt: f64, n: usize) -> Result<Vec<ClassicalSpin>> {
    let mut out = Vec::with_capacity(n + 1);
    let mut s = s0.normalized();
    out.push(s);
    for _ in 0..n {
        s = classical_ideal_trajectory(&s, p, dt)?;
        out.push(s);
    }
    Ok(out)
}

/// Classical `ΔM` and `Q_E` series along a map orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalObservables {
    /// `Z_map(n) - Z_ideal(nτ)`, empty when no reference is supplied.
    pub dm: Vec<f64>,
    pub qe: Vec<f64>,
    pub e0: f64,
    pub e_inf: f64,
}

/// `orbit` and `ideal` hold points after steps `0…n`.
pub fn classical_observables(orbit: &[ClassicalSpin], ideal: Option<&[ClassicalSpin]>, p: &TopParams) -> Result<ClassicalObservables> {
    let first = orbit.first().ok_or_else(|| Error::InvalidParameter("empty orbit".into()))?;
    let e0 = classical_energy(first, p);
    let e_inf = classical_e_infinity(p);
    let norm = e_inf - e0;
    if norm.abs() < 1e-12 {
        return Err(Error::DegenerateNormalization(norm));
    }
    let qe = orbit.iter().skip(1).map(|s| (classical_energy(s, p) - e0) / norm).collect();
    let dm = match ideal {
        Some(reference) => {
            if reference.len() != orbit.len() {
                return Err(Error::InvalidParameter("orbit and reference differ in length".into()));
            }
            orbit.iter().zip(reference).skip(1).map(|(a, b)| a.z - b.z).collect()
        }
        None => Vec::new(),
    };
    Ok(ClassicalObservables { dm, qe, e0, e_inf })
}
