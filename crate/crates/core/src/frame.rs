//! Extended frames of the NLS Lax pair and curve reconstruction.
//!
//! Frames are right-multiplied: `E⁻¹E_x = A_x = aλ + u` and
//! `E⁻¹E_t = A_t = σ(aλ² + uλ + Q₋₁)` with `u = [[0, q], [−q̄, 0]]` and
//! `Q₋₁ = i[[−|q|², q_x], [q̄_x, |q|²]]`. The two are compatible exactly when
//! `q` solves the NLS, i.e. `∂_tA_x − ∂_xA_t − [A_x, A_t] = 0`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::curve::CurveState;
use crate::error::{Error, Result};
use crate::lift::LiftResult;
use crate::nls::{InvariantField, NlsTrajectory};
use crate::spectral::{PeriodicGrid, Spectral};
use crate::su2::{basis_a, conjugate, AlgebraElement, GroupElement, Mat2, SpherePoint};

/// Pre-projection unitarity deviation that aborts a frame integration.
pub const UNITARY_DRIFT_LIMIT: f64 = 1e-4;
/// Entry size that aborts a complex-parameter integration.
pub const OVERFLOW_LIMIT: f64 = 1e12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// The two halves of the Lax connection at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionPair {
    pub ax: Mat2,
    pub at: Mat2,
}

pub fn potential(q: C64) -> Mat2 {
    Mat2::new(ZERO, q, -q.conj(), ZERO)
}

/// `Q₋₁ = i[[−|q|², q_x], [q̄_x, |q|²]]`.
pub fn q_minus_one(q: C64, qx: C64) -> Mat2 {
    let i = C64::new(0.0, 1.0);
    let m = q.norm_sqr();
    Mat2::new(-i * m, i * qx, i * qx.conj(), i * m)
}

/// Connection at one sample from `q`, `q_x`.
pub fn connection_at(q: C64, qx: C64, lambda: C64, sigma: f64) -> ConnectionPair {
    let a = basis_a();
    let u = potential(q);
    let ax = a.scale(lambda) + u;
    let at = (a.scale(lambda * lambda) + u.scale(lambda) + q_minus_one(q, qx)).scale_re(sigma);
    ConnectionPair { ax, at }
}

/// Connection at every grid point (`q_x` spectral).
pub fn connection(spec: &Spectral, q: &InvariantField, lambda: C64) -> Vec<ConnectionPair> {
    let qx = spec.derivative(&q.values);
    q.values
        .iter()
        .zip(&qx)
        .map(|(&v, &d)| connection_at(v, d, lambda, q.sigma))
        .collect()
}

/// Sup norm over grid points and interior time levels of
/// `∂_tA_x − ∂_xA_t − [A_x, A_t]`, with central differences in `t` over the
/// half-step cache and spectral derivatives in `x`.
pub fn zero_curvature_residual(spec: &Spectral, traj: &NlsTrajectory, lambda: C64) -> f64 {
    let fields = &traj.fields;
    let tau = 0.5 * traj.dt;
    let mut worst: f64 = 0.0;
    for i in 1..fields.len().saturating_sub(1) {
        let prev = connection(spec, &fields[i - 1], lambda);
        let next = connection(spec, &fields[i + 1], lambda);
        let cur = connection(spec, &fields[i], lambda);
        let mut dat = [[Vec::new(), Vec::new()], [Vec::new(), Vec::new()]];
        for (r, row) in dat.iter_mut().enumerate() {
            for (c, slot) in row.iter_mut().enumerate() {
                let entry: Vec<C64> = cur.iter().map(|p| p.at[(r, c)]).collect();
                *slot = spec.derivative(&entry);
            }
        }
        for j in 0..cur.len() {
            let dtax = (next[j].ax - prev[j].ax).scale_re(1.0 / (2.0 * tau));
            let dxat = Mat2::new(dat[0][0][j], dat[0][1][j], dat[1][0][j], dat[1][1][j]);
            let r = dtax - dxat - cur[j].ax.commutator(&cur[j].at);
            worst = worst.max(r.max_abs());
        }
    }
    worst
}

/// Frames on the grid at one time and spectral parameter.
#[derive(Debug, Clone)]
pub struct FrameField {
    pub grid: PeriodicGrid,
    pub frames: Vec<GroupElement>,
    pub t: f64,
    pub lambda: C64,
    /// Largest pre-projection unitarity (real λ) or determinant (complex λ)
    /// deviation met so far.
    pub drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameOptions {
    /// Keep every `save_every`-th step (the last step is always kept).
    pub save_every: usize,
    /// Also keep the steps just before and after each kept step, so that
    /// time derivatives can be formed there.
    pub neighbors: bool,
}

impl Default for FrameOptions {
    fn default() -> Self {
        Self { save_every: 1, neighbors: false }
    }
}

impl FrameOptions {
    pub fn every(save_every: usize) -> Self {
        Self { save_every, ..Self::default() }
    }

    fn keeps(&self, n: usize, steps: usize) -> bool {
        let se = self.save_every.max(1);
        let hit = |m: usize| m.is_multiple_of(se) || m == steps;
        hit(n) || (self.neighbors && (hit(n + 1) || (n >= 1 && hit(n - 1))))
    }
}

fn rk4(e: Mat2, a0: &Mat2, a1: &Mat2, a2: &Mat2, h: f64) -> Mat2 {
    let k1 = e * *a0;
    let k2 = (e + k1.scale_re(0.5 * h)) * *a1;
    let k3 = (e + k2.scale_re(0.5 * h)) * *a1;
    let k4 = (e + k3.scale_re(h)) * *a2;
    e + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(h / 6.0)
}

/// Repairs a frame after an integration step. Real-parameter frames are
/// projected back onto SU(2); complex ones are rescaled to unit determinant.
/// Returns the pre-repair deviation.
fn repair(m: &mut Mat2, unitary: bool) -> f64 {
    if unitary {
        let dev = m.unitarity_deviation();
        *m = m.project_su2();
        dev
    } else {
        let dev = (m.det() - 1.0).norm();
        *m = m.normalize_det();
        dev
    }
}

fn check(dev: f64, m: &Mat2, unitary: bool, t: f64) -> Result<()> {
    if !m.is_finite() || !dev.is_finite() {
        return Err(Error::NonFinite(t));
    }
    if unitary && dev > UNITARY_DRIFT_LIMIT {
        return Err(Error::UnitaryDrift { deviation: dev, t });
    }
    let big = m.max_abs();
    if !unitary && big > OVERFLOW_LIMIT {
        return Err(Error::Overflow(big));
    }
    Ok(())
}

/// Integrates `E_t = E·A_t(q(x_j, t), λ)` at every grid point from the
/// initial frames, by classical RK4 over the trajectory's half-step cache.
pub fn evolve_frames(
    spec: &Spectral,
    initial: &[GroupElement],
    traj: &NlsTrajectory,
    lambda: C64,
    opts: &FrameOptions,
) -> Result<Vec<FrameField>> {
    let unitary = lambda.im == 0.0;
    let grid = spec.grid();
    let dt = traj.dt;
    let steps = traj.steps();
    let mut cur: Vec<Mat2> = initial.iter().map(|g| g.m).collect();
    let wrap = |frames: &[Mat2], t: f64, drift: f64| FrameField {
        grid,
        frames: frames
            .iter()
            .map(|&m| GroupElement { m, unitary })
            .collect(),
        t,
        lambda,
        drift,
    };
    let mut out = vec![wrap(&cur, traj.fields[0].t, 0.0)];
    let at = |i: usize| -> Vec<Mat2> {
        connection(spec, traj.half(i), lambda).into_iter().map(|p| p.at).collect()
    };
    let mut a0 = at(0);
    let mut drift: f64 = 0.0;
    for n in 0..steps {
        let a1 = at(2 * n + 1);
        let a2 = at(2 * n + 2);
        let t_new = traj.half(2 * n + 2).t;
        let devs: Vec<f64> = cur
            .par_iter_mut()
            .enumerate()
            .map(|(j, e)| {
                *e = rk4(*e, &a0[j], &a1[j], &a2[j], dt);
                repair(e, unitary)
            })
            .collect();
        for (dev, m) in devs.iter().zip(&cur) {
            check(*dev, m, unitary, t_new)?;
            drift = drift.max(*dev);
        }
        if opts.keeps(n + 1, steps) {
            out.push(wrap(&cur, t_new, drift));
        }
        a0 = a2;
    }
    Ok(out)
}

/// Frames at `λ₀ = −c₀` started from the periodic lift `f̃`.
pub fn evolve_frame(
    spec: &Spectral,
    lift: &LiftResult,
    traj: &NlsTrajectory,
    opts: &FrameOptions,
) -> Result<Vec<FrameField>> {
    evolve_frames(spec, &lift.frame_tilde, traj, C64::new(-lift.c0, 0.0), opts)
}

/// Integrates `E_x = E·A_x(q(x, t), λ)` from `x_{N−1}` to `2π` with RK4 on
/// the trigonometric interpolant of `q`, returning `E(2π, t)`.
pub fn frame_past_last_sample(
    spec: &Spectral,
    frame: &FrameField,
    q: &InvariantField,
    substeps: usize,
) -> Mat2 {
    let grid = spec.grid();
    let n = grid.len();
    let interp = spec.interpolant(&q.values);
    let a = basis_a().scale(frame.lambda);
    let ax = |x: f64| a + potential(interp.eval(x));
    let h = grid.h() / substeps as f64;
    let x0 = grid.x(n - 1);
    let mut e = frame.frames[n - 1].m;
    for s in 0..substeps {
        let x = x0 + h * s as f64;
        e = rk4(e, &ax(x), &ax(x + 0.5 * h), &ax(x + h), h);
    }
    e
}

/// `‖E(2π, t) − ε E(0, t)‖` for the branch sign `ε`.
pub fn closure_deviation(spec: &Spectral, frame: &FrameField, q: &InvariantField, sign: f64) -> f64 {
    let end = frame_past_last_sample(spec, frame, q, 8);
    (end - frame.frames[0].m.scale_re(sign)).norm()
}

/// Reconstructed curves and the sphere deviation they carried before
/// renormalization.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub curves: Vec<CurveState>,
    /// Per output time, largest `| |γ| − 1 |` before projection.
    pub sphere_deviation: Vec<f64>,
}

impl Reconstruction {
    pub fn max_sphere_deviation(&self) -> f64 {
        self.sphere_deviation.iter().copied().fold(0.0, f64::max)
    }
}

/// `η = E a E⁻¹` as points of ℝ³, taking the skew-Hermitian part so that
/// scalar and non-unitary factors cannot leak into the curve.
pub fn eta_points(frame: &FrameField) -> Vec<SpherePoint> {
    let a = AlgebraElement::new(1.0, 0.0, 0.0);
    frame
        .frames
        .iter()
        .map(|g| {
            if g.unitary {
                conjugate(g, a).point()
            } else {
                AlgebraElement::from_matrix_projected(&(g.m * basis_a() * g.m.inverse())).point()
            }
        })
        .collect()
}

/// `γ(x, t) = η(x + 2c₀t, t)`, shifted by trigonometric interpolation and
/// projected onto S².
pub fn reconstruct(spec: &Spectral, frames: &[FrameField], c0: f64) -> Reconstruction {
    let mut curves = Vec::with_capacity(frames.len());
    let mut sphere_deviation = Vec::with_capacity(frames.len());
    for f in frames {
        let eta = eta_points(f);
        let shifted = spec.shift_points(&eta, 2.0 * c0 * f.t);
        let (curve, dev) = CurveState::projected(f.grid, shifted, f.t);
        curves.push(curve);
        sphere_deviation.push(dev);
    }
    Reconstruction { curves, sphere_deviation }
}

/// How `γ_xx` is evaluated in [`pde_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XDerivative {
    /// Spectral, for periodic curves.
    Spectral,
    /// Fourth-order central differences on interior samples, for curves that
    /// need not close.
    FiniteDifference,
}

/// Fourth-order central second difference at `j`, `2 ≤ j < N − 2`.
pub fn fd2(v: &[SpherePoint], j: usize, h: f64) -> SpherePoint {
    (v[j - 2] * -1.0 + v[j - 1] * 16.0 - v[j] * 30.0 + v[j + 1] * 16.0 - v[j + 2]) * (1.0 / (12.0 * h * h))
}

/// Fourth-order central first difference at `j`, `2 ≤ j < N − 2`.
pub fn fd1(v: &[SpherePoint], j: usize, h: f64) -> SpherePoint {
    (v[j - 2] - v[j - 1] * 8.0 + v[j + 1] * 8.0 - v[j + 2]) * (1.0 / (12.0 * h))
}

/// Sup over interior time levels of `‖γ_t − γ × γ_xx‖`, with `γ_t` by
/// central differences over uniformly spaced frames.
pub fn pde_residual(spec: &Spectral, curves: &[CurveState], mode: XDerivative) -> f64 {
    assert!(curves.len() >= 3, "need at least three time levels");
    let mut worst: f64 = 0.0;
    for i in 1..curves.len() - 1 {
        let dt = curves[i + 1].t - curves[i - 1].t;
        let g = &curves[i].points;
        let h = curves[i].grid.h();
        let (range, gxx): (std::ops::Range<usize>, Vec<SpherePoint>) = match mode {
            XDerivative::Spectral => (0..g.len(), spec.second_derivative_points(g)),
            XDerivative::FiniteDifference => {
                let n = g.len();
                let mut d = vec![SpherePoint::zero(); n];
                for (j, slot) in d.iter_mut().enumerate().take(n - 2).skip(2) {
                    *slot = fd2(g, j, h);
                }
                (2..n - 2, d)
            }
        };
        for j in range {
            let gt = (curves[i + 1].points[j] - curves[i - 1].points[j]) * (1.0 / dt);
            worst = worst.max((gt - g[j].cross(gxx[j])).norm());
        }
    }
    worst
}
