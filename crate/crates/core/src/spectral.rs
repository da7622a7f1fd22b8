//! Periodic grids and FFT-backed spectral operators on `[0, 2π)`.
//!
//! Wavenumbers use the symmetric layout `k ∈ {−N/2, …, N/2 − 1}`. The Nyquist
//! mode is zeroed by odd-order operators so that real data stays real.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::su2::SpherePoint;

/// Uniform grid `x_j = 2πj/N`, `j = 0..N`, with `N ≥ 16` a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicGrid {
    n: usize,
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(n));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing `2π/N`.
    pub fn h(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.h() * j as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }
}

/// Spectral operators for one grid size. Cheap to clone; the FFT plans are
/// shared.
#[derive(Clone)]
pub struct Spectral {
    grid: PeriodicGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("n", &self.grid.n).finish()
    }
}

impl Spectral {
    pub fn new(grid: PeriodicGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.n),
            inverse: planner.plan_fft_inverse(grid.n),
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Signed wavenumber of FFT bin `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        let n = self.grid.n;
        if i < n / 2 {
            i as f64
        } else {
            i as f64 - n as f64
        }
    }

    fn nyquist(&self) -> usize {
        self.grid.n / 2
    }

    /// Unnormalized forward DFT.
    pub fn forward(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.grid.n, "sample count does not match grid");
        let mut buf = v.to_vec();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse DFT including the `1/N` factor.
    pub fn inverse(&self, coeffs: &[C64]) -> Vec<C64> {
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        let s = 1.0 / self.grid.n as f64;
        for z in &mut buf {
            *z *= s;
        }
        buf
    }

    fn apply(&self, v: &[C64], mut mult: impl FnMut(usize, f64) -> C64) -> Vec<C64> {
        let mut c = self.forward(v);
        for (i, z) in c.iter_mut().enumerate() {
            *z *= mult(i, self.wavenumber(i));
        }
        self.inverse(&c)
    }

    /// First derivative, Nyquist mode zeroed.
    pub fn derivative(&self, v: &[C64]) -> Vec<C64> {
        let ny = self.nyquist();
        self.apply(v, |i, k| if i == ny { C64::new(0.0, 0.0) } else { C64::new(0.0, k) })
    }

    /// Second derivative (multiplier `−k²`, Nyquist kept).
    pub fn second_derivative(&self, v: &[C64]) -> Vec<C64> {
        self.apply(v, |_, k| C64::new(-k * k, 0.0))
    }

    pub fn derivative_real(&self, v: &[f64]) -> Vec<f64> {
        re(&self.derivative(&cplx(v)))
    }

    pub fn second_derivative_real(&self, v: &[f64]) -> Vec<f64> {
        re(&self.second_derivative(&cplx(v)))
    }

    /// Splits `v` into its mean and the periodic antiderivative `Θ` of the
    /// zero-mean part normalized by `Θ(0) = 0`, so that
    /// `∫₀ˣ v = mean·x + Θ(x)` exactly for trigonometric polynomials.
    pub fn antiderivative(&self, v: &[C64]) -> (C64, Vec<C64>) {
        let n = self.grid.n;
        let mut c = self.forward(v);
        let mean = c[0] / n as f64;
        c[0] = C64::new(0.0, 0.0);
        c[self.nyquist()] = C64::new(0.0, 0.0);
        for (i, z) in c.iter_mut().enumerate().skip(1) {
            let k = self.wavenumber(i);
            if k != 0.0 {
                *z /= C64::new(0.0, k);
            }
        }
        let mut theta = self.inverse(&c);
        let t0 = theta[0];
        for z in &mut theta {
            *z -= t0;
        }
        (mean, theta)
    }

    pub fn antiderivative_real(&self, v: &[f64]) -> (f64, Vec<f64>) {
        let (m, t) = self.antiderivative(&cplx(v));
        (m.re, re(&t))
    }

    /// Values of the trigonometric interpolant at `x_j + s`. The Nyquist mode
    /// is treated as `cos(N x/2)` so that real data stays real.
    pub fn shift(&self, v: &[C64], s: f64) -> Vec<C64> {
        let ny = self.nyquist();
        let half_n = ny as f64;
        self.apply(v, |i, k| {
            if i == ny {
                C64::new((half_n * s).cos(), 0.0)
            } else {
                C64::from_polar(1.0, k * s)
            }
        })
    }

    pub fn shift_real(&self, v: &[f64], s: f64) -> Vec<f64> {
        re(&self.shift(&cplx(v), s))
    }

    /// Relative amplitude of the top octave: `sqrt(Σ_{|k|>N/4} |ĉ_k|² / Σ |ĉ_k|²)`.
    pub fn tail(&self, v: &[C64]) -> f64 {
        let (top, total) = self.tail_energy(v);
        if total == 0.0 {
            0.0
        } else {
            (top / total).sqrt()
        }
    }

    /// Top-octave and total spectral energy.
    fn tail_energy(&self, v: &[C64]) -> (f64, f64) {
        let c = self.forward(v);
        let quarter = self.grid.n as f64 / 4.0;
        let mut top = 0.0;
        let mut total = 0.0;
        for (i, z) in c.iter().enumerate() {
            let e = z.norm_sqr();
            total += e;
            if self.wavenumber(i).abs() > quarter {
                top += e;
            }
        }
        (top, total)
    }

    pub fn tail_real(&self, v: &[f64]) -> f64 {
        self.tail(&cplx(v))
    }

    /// Tail of a sampled curve, with energies summed over components.
    pub fn tail_points(&self, p: &[SpherePoint]) -> f64 {
        let (a, b, c) = split(p);
        let (mut top, mut total) = (0.0, 0.0);
        for v in [a, b, c] {
            let (t, e) = self.tail_energy(&cplx(&v));
            top += t;
            total += e;
        }
        if total == 0.0 {
            0.0
        } else {
            (top / total).sqrt()
        }
    }

    pub fn interpolant(&self, v: &[C64]) -> Interpolant {
        let n = self.grid.n as f64;
        let coeffs = self.forward(v).into_iter().map(|z| z / n).collect();
        Interpolant { coeffs }
    }

    /// Componentwise spectral derivative of a sampled curve.
    pub fn derivative_points(&self, p: &[SpherePoint]) -> Vec<SpherePoint> {
        self.map_points(p, |s, v| s.derivative_real(v))
    }

    pub fn second_derivative_points(&self, p: &[SpherePoint]) -> Vec<SpherePoint> {
        self.map_points(p, |s, v| s.second_derivative_real(v))
    }

    pub fn shift_points(&self, p: &[SpherePoint], s: f64) -> Vec<SpherePoint> {
        self.map_points(p, |sp, v| sp.shift_real(v, s))
    }

    fn map_points(
        &self,
        p: &[SpherePoint],
        f: impl Fn(&Self, &[f64]) -> Vec<f64>,
    ) -> Vec<SpherePoint> {
        let (a, b, c) = split(p);
        join(&f(self, &a), &f(self, &b), &f(self, &c))
    }

    /// Trigonometric resampling onto an `m`-point grid (`m` any positive
    /// size). Modes beyond the target band are dropped; a Nyquist mode that
    /// does not survive is split evenly between `±N/2`.
    pub fn resample(&self, v: &[C64], m: usize) -> Vec<C64> {
        self.interpolant(v).sample(m)
    }
}

/// Trigonometric interpolant through uniform samples, evaluable anywhere.
#[derive(Debug, Clone)]
pub struct Interpolant {
    coeffs: Vec<C64>,
}

impl Interpolant {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Interpolant through `v` taken as uniform samples on `[0, 2π)`, for any
    /// sample count.
    pub fn from_samples(v: &[C64]) -> Self {
        let n = v.len();
        let mut buf = v.to_vec();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        Self { coeffs: buf.into_iter().map(|z| z / n as f64).collect() }
    }

    /// Values on a uniform `m`-point grid; see [`Spectral::resample`].
    pub fn sample(&self, m: usize) -> Vec<C64> {
        let h = 2.0 * PI / m as f64;
        if m >= self.coeffs.len() {
            (0..m).map(|j| self.eval(h * j as f64)).collect()
        } else {
            (0..m).map(|j| self.eval_band(h * j as f64, m / 2)).collect()
        }
    }

    fn is_nyquist(&self, i: usize) -> bool {
        let n = self.coeffs.len();
        n.is_multiple_of(2) && i == n / 2
    }

    fn wavenumber(&self, i: usize) -> i64 {
        let n = self.coeffs.len();
        if 2 * i < n {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    pub fn eval(&self, x: f64) -> C64 {
        let ny = self.coeffs.len() / 2;
        let mut s = C64::new(0.0, 0.0);
        for (i, c) in self.coeffs.iter().enumerate() {
            if self.is_nyquist(i) {
                s += c * (ny as f64 * x).cos();
            } else {
                s += c * C64::from_polar(1.0, self.wavenumber(i) as f64 * x);
            }
        }
        s
    }

    /// Evaluate keeping only `|k| < band`, plus `±band` at half weight when
    /// it is present in the spectrum.
    fn eval_band(&self, x: f64, band: usize) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = self.wavenumber(i);
            let ak = k.unsigned_abs() as usize;
            if ak < band {
                s += c * C64::from_polar(1.0, k as f64 * x);
            } else if ak == band && !self.is_nyquist(i) {
                // ±band both land on the coarse Nyquist mode.
                s += c * (band as f64 * x).cos();
            }
        }
        s
    }

    /// Derivative of the interpolant (Nyquist dropped).
    pub fn eval_derivative(&self, x: f64) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for (i, c) in self.coeffs.iter().enumerate() {
            if self.is_nyquist(i) {
                continue;
            }
            let k = self.wavenumber(i) as f64;
            s += c * C64::new(0.0, k) * C64::from_polar(1.0, k * x);
        }
        s
    }
}

/// Interpolant for each component of a sampled curve.
#[derive(Debug, Clone)]
pub struct PointInterpolant {
    parts: [Interpolant; 3],
}

impl PointInterpolant {
    pub fn new(spec: &Spectral, p: &[SpherePoint]) -> Self {
        let (a, b, c) = split(p);
        Self {
            parts: [
                spec.interpolant(&cplx(&a)),
                spec.interpolant(&cplx(&b)),
                spec.interpolant(&cplx(&c)),
            ],
        }
    }

    pub fn eval(&self, x: f64) -> SpherePoint {
        SpherePoint::new(self.parts[0].eval(x).re, self.parts[1].eval(x).re, self.parts[2].eval(x).re)
    }

    pub fn eval_derivative(&self, x: f64) -> SpherePoint {
        SpherePoint::new(
            self.parts[0].eval_derivative(x).re,
            self.parts[1].eval_derivative(x).re,
            self.parts[2].eval_derivative(x).re,
        )
    }
}

pub fn cplx(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| C64::new(x, 0.0)).collect()
}

pub fn re(v: &[C64]) -> Vec<f64> {
    v.iter().map(|z| z.re).collect()
}

pub fn split(p: &[SpherePoint]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (
        p.iter().map(|q| q.r1).collect(),
        p.iter().map(|q| q.r2).collect(),
        p.iter().map(|q| q.r3).collect(),
    )
}

pub fn join(a: &[f64], b: &[f64], c: &[f64]) -> Vec<SpherePoint> {
    a.iter()
        .zip(b)
        .zip(c)
        .map(|((&x, &y), &z)| SpherePoint::new(x, y, z))
        .collect()
}

/// Periodic trapezoid `h Σ f_j`, summed in index order.
pub fn trapezoid(h: f64, v: impl IntoIterator<Item = f64>) -> f64 {
    h * v.into_iter().sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize) -> Spectral {
        Spectral::new(PeriodicGrid::new(n).unwrap())
    }

    #[test]
    fn grid_validation() {
        assert!(PeriodicGrid::new(16).is_ok());
        assert!(matches!(PeriodicGrid::new(8), Err(Error::InvalidGrid(8))));
        assert!(matches!(PeriodicGrid::new(48), Err(Error::InvalidGrid(48))));
    }

    #[test]
    fn derivative_of_trig_polynomial() {
        let s = spec(32);
        let xs = s.grid().xs();
        let f: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin() + 0.5 * (x).cos()).collect();
        let d = s.derivative_real(&f);
        let dd = s.second_derivative_real(&f);
        for (j, x) in xs.iter().enumerate() {
            assert!((d[j] - (3.0 * (3.0 * x).cos() - 0.5 * x.sin())).abs() < 1e-12);
            assert!((dd[j] - (-9.0 * (3.0 * x).sin() - 0.5 * x.cos())).abs() < 1e-11);
        }
    }

    #[test]
    fn antiderivative_splits_mean() {
        let s = spec(64);
        let xs = s.grid().xs();
        let f: Vec<f64> = xs.iter().map(|x| 2.0 + x.cos()).collect();
        let (mean, theta) = s.antiderivative_real(&f);
        assert!((mean - 2.0).abs() < 1e-14);
        for (j, x) in xs.iter().enumerate() {
            assert!((theta[j] - x.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn shift_and_interpolate_agree() {
        let s = spec(32);
        let xs = s.grid().xs();
        let f: Vec<C64> = xs.iter().map(|x| C64::from_polar(1.0, 2.0 * x) + (5.0 * x).cos()).collect();
        let sh = s.shift(&f, 0.3);
        let it = s.interpolant(&f);
        for (j, x) in xs.iter().enumerate() {
            let exact = C64::from_polar(1.0, 2.0 * (x + 0.3)) + (5.0 * (x + 0.3)).cos();
            assert!((sh[j] - exact).norm() < 1e-13);
            assert!((it.eval(x + 0.3) - exact).norm() < 1e-13);
        }
    }

    #[test]
    fn resample_round_trip() {
        let s = spec(16);
        let xs = s.grid().xs();
        let f: Vec<C64> = xs.iter().map(|x| C64::new(x.sin(), (2.0 * x).cos())).collect();
        let up = s.resample(&f, 64);
        let back = spec(64).resample(&up, 16);
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn tail_flags_rough_data() {
        let s = spec(64);
        let xs = s.grid().xs();
        let smooth: Vec<f64> = xs.iter().map(|x| x.cos()).collect();
        let step: Vec<f64> = xs.iter().map(|&x| if x < PI { 1.0 } else { -1.0 }).collect();
        assert!(s.tail_real(&smooth) < 1e-14);
        assert!(s.tail_real(&step) > 1e-2);
    }

    #[test]
    fn curve_tail_ignores_noise_in_a_flat_component() {
        let s = spec(64);
        let pts: Vec<SpherePoint> = s
            .grid()
            .xs()
            .iter()
            .enumerate()
            .map(|(j, x)| SpherePoint::new(if j % 2 == 0 { 1e-17 } else { -1e-17 }, x.cos(), x.sin()))
            .collect();
        assert!(s.tail_points(&pts) < 1e-14);
    }
}
