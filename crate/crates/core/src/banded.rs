//! Real symmetric banded matrices and Chebyshev propagation.
//!
//! The collective Hamiltonians of the top are at most pentadiagonal in the
//! `S_z` basis, so for large spins `e^{-iHt}ψ` is far cheaper through a
//! Chebyshev series of sparse products than through a dense eigensolver.

use faer::Mat;

use crate::linalg::{c64, RMat};

/// Symmetric matrix stored by its upper bands: `bands[b][i] = A[i, i+b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Banded {
    n: usize,
    bands: Vec<Vec<f64>>,
}

impl Banded {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        let bands = (0..=bandwidth).map(|b| vec![0.0; n.saturating_sub(b)]).collect();
        Banded { n, bands }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bands.len() - 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let b = hi - lo;
        if b > self.bandwidth() {
            0.0
        } else {
            self.bands[b][lo]
        }
    }

    /// Sets `A[i,j] = A[j,i] = v`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let b = hi - lo;
        assert!(b <= self.bandwidth(), "entry ({i}, {j}) outside band");
        self.bands[b][lo] = v;
    }

    pub fn to_dense(&self) -> RMat {
        Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// `A²`, which has twice the bandwidth.
    pub fn square(&self) -> Banded {
        let w = self.bandwidth();
        let mut out = Banded::zeros(self.n, 2 * w);
        for i in 0..self.n {
            for j in i..(i + 2 * w + 1).min(self.n) {
                let lo = j.saturating_sub(w);
                let hi = (i + w).min(self.n - 1);
                let mut acc = 0.0;
                for k in lo..=hi {
                    acc += self.get(i, k) * self.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// `out = A x`.
    pub fn apply(&self, x: &[c64], out: &mut [c64]) {
        let n = self.n;
        for (o, (&d, &xi)) in out.iter_mut().zip(self.bands[0].iter().zip(x)) {
            *o = xi * d;
        }
        for (b, band) in self.bands.iter().enumerate().skip(1) {
            for (i, &a) in band.iter().enumerate() {
                if a != 0.0 {
                    out[i] += x[i + b] * a;
                    out[i + b] += x[i] * a;
                }
            }
        }
        debug_assert_eq!(out.len(), n);
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let c = self.bands[0][i];
            let mut r = 0.0;
            for b in 1..=self.bandwidth() {
                if i + b < self.n {
                    r += self.bands[b][i].abs();
                }
                if i >= b {
                    r += self.bands[b][i - b].abs();
                }
            }
            lo = lo.min(c - r);
            hi = hi.max(c + r);
        }
        (lo, hi)
    }

    /// `e^{-iAt} x` by a Chebyshev series.
    pub fn propagate(&self, x: &[c64], t: f64) -> Vec<c64> {
        let bounds = self.spectral_bounds();
        chebyshev_propagate(|v, out| self.apply(v, out), bounds, x, t)
    }
}

/// `J_k(x)` for `k = 0..=kmax`, by Miller's downward recurrence.
pub fn bessel_j_sequence(x: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let start = kmax.max(ax.ceil() as usize) + 40 + (ax.sqrt() * 4.0) as usize;
    let start = start + start % 2;
    let mut jp1 = 0.0f64;
    let mut j = 1e-300f64;
    let mut norm = 0.0f64;
    for k in (0..start).rev() {
        // J_k = (2(k+1)/x) J_{k+1} - J_{k+2}
        let jm = 2.0 * (k + 1) as f64 / ax * j - jp1;
        jp1 = j;
        j = jm;
        if k % 2 == 0 && k > 0 {
            norm += 2.0 * j;
        }
        if k <= kmax {
            out[k] = j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    norm += j;
    for v in out.iter_mut() {
        *v /= norm;
    }
    if x < 0.0 {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// `e^{-iHt} x` for a Hermitian operator given by its action and a spectral
/// enclosure `[lo, hi]`. The series is cut once the Bessel weights drop
/// below `1e-17` past the turning point `k ≈ (hi-lo)t/2`.
pub fn chebyshev_propagate(
    apply: impl Fn(&[c64], &mut [c64]),
    bounds: (f64, f64),
    x: &[c64],
    t: f64,
) -> Vec<c64> {
    let n = x.len();
    if t == 0.0 {
        return x.to_vec();
    }
    let (lo, hi) = bounds;
    let margin = 1e-8 * (hi - lo).abs().max(1.0);
    let (lo, hi) = (lo - margin, hi + margin);
    let a = 0.5 * (hi + lo);
    let b = 0.5 * (hi - lo);
    let z = b * t;
    let kmax = (z.abs() * 1.2 + 60.0 + 8.0 * z.abs().cbrt()) as usize;
    let jk = bessel_j_sequence(z, kmax);

    let scaled = |v: &[c64], out: &mut [c64]| {
        apply(v, out);
        for (o, &vi) in out.iter_mut().zip(v) {
            *o = (*o - vi * a) / b;
        }
    };

    let mut acc: Vec<c64> = x.iter().map(|&v| v * jk[0]).collect();
    let mut prev = x.to_vec();
    let mut cur = vec![c64::new(0.0, 0.0); n];
    scaled(x, &mut cur);
    let minus_i_pow = [c64::new(1.0, 0.0), c64::new(0.0, -1.0), c64::new(-1.0, 0.0), c64::new(0.0, 1.0)];
    let mut next = vec![c64::new(0.0, 0.0); n];
    for k in 1..=kmax {
        let coef = minus_i_pow[k % 4] * (2.0 * jk[k]);
        for (s, &c) in acc.iter_mut().zip(&cur) {
            *s += c * coef;
        }
        if k as f64 > z.abs() && jk[k].abs() < 1e-17 {
            break;
        }
        scaled(&cur, &mut next);
        for (nx, &p) in next.iter_mut().zip(&prev) {
            *nx = *nx * 2.0 - p;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    let global = crate::linalg::cis(-a * t);
    for s in acc.iter_mut() {
        *s *= global;
    }
    acc
}
