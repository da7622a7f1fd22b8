//! Vortex filaments `α_t = α_x × α_xx` from Schrödinger curves.
//!
//! Two routes are provided. The flow route integrates a sphere curve
//! `γ = α_x` in `x`. The Sym route lifts an arclength filament to a parallel
//! normal frame with constant twist, solves the NLS for its invariant and
//! reads the filament off the `λ`-derivative `η = E_λ E⁻¹` of the extended
//! frame.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::curve::CurveState;
use crate::error::{Error, Result};
use crate::frame::{evolve_frames, FrameField, FrameOptions, XDerivative, fd1, fd2};
use crate::nls::{nls_solve, InvariantField, NlsOptions, NlsTrajectory};
use crate::spectral::{PointInterpolant, Spectral};
use crate::su2::{basis_a, conjugate, su2_from_rotation, AlgebraElement, GroupElement, Mat2, SpherePoint};

/// A sampled filament in ℝ³.
#[derive(Debug, Clone, PartialEq)]
pub struct FilamentState {
    pub grid: crate::spectral::PeriodicGrid,
    pub points: Vec<SpherePoint>,
    pub t: f64,
    /// Set when `|α_x| = 1` is claimed.
    pub arclength: bool,
}

impl FilamentState {
    pub fn mean(&self) -> SpherePoint {
        let n = self.points.len() as f64;
        self.points.iter().fold(SpherePoint::zero(), |acc, &p| acc + p) * (1.0 / n)
    }

    /// Largest `| |α_x| − 1 |` with spectral `α_x`.
    pub fn speed_deviation(&self, spec: &Spectral) -> f64 {
        spec.derivative_points(&self.points)
            .iter()
            .map(|d| (d.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64, time_scale: f64) -> Self {
        Self {
            grid: self.grid,
            points: self.points.iter().map(|&p| p * s).collect(),
            t: self.t * time_scale,
            arclength: self.arclength && s == 1.0,
        }
    }
}

/// Raised, not thrown, when a Schrödinger curve has nonzero mean so that its
/// filament cannot close.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonClosedWarning {
    pub t: f64,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct FlowFilament {
    pub states: Vec<FilamentState>,
    pub warnings: Vec<NonClosedWarning>,
}

/// Threshold on `|mean γ|` above which a [`NonClosedWarning`] is recorded.
pub const MEAN_TOLERANCE: f64 = 1e-8;

/// `α(x, t) = ∫₀ˣ γ(s, t) ds + c(t)` with `c(0) = 0` and
/// `c′(t) = γ × γ_x(0, t)` integrated by the trapezoidal rule.
pub fn filament_from_flow(spec: &Spectral, curves: &[CurveState]) -> FlowFilament {
    let mut states = Vec::with_capacity(curves.len());
    let mut warnings = Vec::new();
    let mut c = SpherePoint::zero();
    let mut prev: Option<(f64, SpherePoint)> = None;
    for curve in curves {
        let gx0 = spec.derivative_points(&curve.points)[0];
        let rate = curve.points[0].cross(gx0);
        if let Some((t_prev, r_prev)) = prev {
            c += (r_prev + rate) * (0.5 * (curve.t - t_prev));
        }
        prev = Some((curve.t, rate));

        let (a, b, d) = crate::spectral::split(&curve.points);
        let (ma, ta) = spec.antiderivative_real(&a);
        let (mb, tb) = spec.antiderivative_real(&b);
        let (md, td) = spec.antiderivative_real(&d);
        let mean = SpherePoint::new(ma, mb, md);
        if mean.norm() > MEAN_TOLERANCE {
            warnings.push(NonClosedWarning { t: curve.t, mean: mean.norm() });
        }
        let points = (0..curve.len())
            .map(|j| SpherePoint::new(ta[j], tb[j], td[j]) + mean * curve.grid.x(j) + c)
            .collect();
        states.push(FilamentState { grid: curve.grid, points, t: curve.t, arclength: true });
    }
    FlowFilament { states, warnings }
}

/// An arclength filament of length `2π` and the scale that undoes it.
#[derive(Debug, Clone)]
pub struct Reparametrized {
    pub state: FilamentState,
    /// Original length over `2π`.
    pub scale: f64,
    pub length: f64,
}

/// Resamples a closed curve at equal arclength and rescales it to length `2π`.
pub fn arclength_reparametrize(spec: &Spectral, points: &[SpherePoint]) -> Result<Reparametrized> {
    let grid = spec.grid();
    let n = grid.len();
    let d = spec.derivative_points(points);
    let speed: Vec<f64> = d.iter().map(|p| p.norm()).collect();
    let min_speed = speed.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_speed >= 1e-8) {
        return Err(Error::DegenerateSpeed(min_speed));
    }
    let (mean_speed, theta) = spec.antiderivative_real(&speed);
    let length = 2.0 * PI * mean_speed;
    let s_interp = spec.interpolant(&crate::spectral::cplx(&theta));
    let v_interp = spec.interpolant(&crate::spectral::cplx(&speed));
    let p_interp = PointInterpolant::new(spec, points);
    let cumulative = |x: f64| mean_speed * x + s_interp.eval(x).re;
    let scale = length / (2.0 * PI);
    let mut out = Vec::with_capacity(n);
    let mut x = 0.0;
    for k in 0..n {
        let target = length * k as f64 / n as f64;
        for _ in 0..50 {
            let dx = (cumulative(x) - target) / v_interp.eval(x).re;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        out.push(p_interp.eval(x) * (1.0 / scale));
    }
    Ok(Reparametrized {
        state: FilamentState { grid, points: out, t: 0.0, arclength: true },
        scale,
        length,
    })
}

/// Orthonormal frame `(e₀, n₁, n₂)` along a filament with `e₀ = α_x` and
/// constant normal twist `(n₁)_x · n₂ = c₀`.
#[derive(Debug, Clone)]
pub struct HFrame {
    pub e0: Vec<SpherePoint>,
    pub n1: Vec<SpherePoint>,
    pub n2: Vec<SpherePoint>,
    /// `(n₁)_x · n₂` from spectral derivatives.
    pub omega: Vec<f64>,
    pub c0: f64,
}

impl HFrame {
    /// Largest orthonormality defect over all samples.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.e0.len() {
            let (e, a, b) = (self.e0[j], self.n1[j], self.n2[j]);
            for d in [e.dot(a), e.dot(b), a.dot(b), e.dot(e) - 1.0, a.dot(a) - 1.0, b.dot(b) - 1.0] {
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    pub fn rotation_at(&self, j: usize) -> [[f64; 3]; 3] {
        let (e, a, b) = (self.e0[j].to_array(), self.n1[j].to_array(), self.n2[j].to_array());
        [[e[0], a[0], b[0]], [e[1], a[1], b[1]], [e[2], a[2], b[2]]]
    }
}

#[derive(Debug, Clone)]
pub struct HFrameLift {
    pub frame: HFrame,
    /// `q₀ = (i/2)(ζ₁ + iζ₂)` with `ζ_k = (e₀)_x · n_k`, for `σ = 1`.
    pub q0: InvariantField,
    /// SU(2) element whose adjoint action is `[e₀ n₁ n₂](0)`.
    pub phi: GroupElement,
    pub c0: f64,
    /// Largest orthonormality defect met during transport, before repair.
    pub transport_defect: f64,
}

const TRANSPORT_SUBSTEPS: usize = 4;

/// `n′ = −(e₀′ · n) e₀`.
fn transport_rate(e: SpherePoint, de: SpherePoint, n: SpherePoint) -> SpherePoint {
    e * -de.dot(n)
}

fn orthonormalize(e: SpherePoint, n: SpherePoint) -> SpherePoint {
    (n - e * e.dot(n)).normalized()
}

/// Builds the periodic h-frame: parallel transport of a normal, holonomy
/// angle `Δ`, then a linear-in-`x` rotation by `c₀x` with `c₀ = −Δ/2π`.
pub fn hframe_lift(spec: &Spectral, filament: &FilamentState) -> Result<HFrameLift> {
    let grid = spec.grid();
    let n = grid.len();
    let h = grid.h();
    if !filament.arclength {
        return Err(Error::InvalidConfig("h-frame lift needs an arclength filament".into()));
    }
    let tail = spec.tail_points(&filament.points);
    if !(tail <= crate::curve::DEFAULT_TAIL_THRESHOLD) {
        return Err(Error::NotClosed(tail));
    }
    let e0: Vec<SpherePoint> =
        spec.derivative_points(&filament.points).into_iter().map(SpherePoint::normalized).collect();
    let de = spec.derivative_points(&e0);
    // Samples at every quarter of a substep: index m is the offset m·h/(2S).
    let offsets: Vec<(Vec<SpherePoint>, Vec<SpherePoint>)> = (0..=2 * TRANSPORT_SUBSTEPS)
        .map(|m| {
            let s = m as f64 * h / (2 * TRANSPORT_SUBSTEPS) as f64;
            (spec.shift_points(&e0, s), spec.shift_points(&de, s))
        })
        .collect();

    let axes = [
        SpherePoint::new(1.0, 0.0, 0.0),
        SpherePoint::new(0.0, 1.0, 0.0),
        SpherePoint::new(0.0, 0.0, 1.0),
    ];
    let start = axes
        .into_iter()
        .fold((axes[0], f64::INFINITY), |acc, ax| {
            let c = ax.dot(e0[0]).abs();
            if c < acc.1 { (ax, c) } else { acc }
        })
        .0;
    let mut nv = orthonormalize(e0[0], start);
    let mut transported = Vec::with_capacity(n);
    let mut transport_defect: f64 = 0.0;
    transported.push(nv);
    let hs = h / TRANSPORT_SUBSTEPS as f64;
    for j in 0..n {
        for k in 0..TRANSPORT_SUBSTEPS {
            let at = |m: usize| (offsets[2 * k + m].0[j], offsets[2 * k + m].1[j]);
            let ((ea, da), (em, dm), (eb, db)) = (at(0), at(1), at(2));
            let k1 = transport_rate(ea, da, nv);
            let k2 = transport_rate(em, dm, nv + k1 * (0.5 * hs));
            let k3 = transport_rate(em, dm, nv + k2 * (0.5 * hs));
            let k4 = transport_rate(eb, db, nv + k3 * hs);
            nv += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (hs / 6.0);
        }
        let eb = e0[(j + 1) % n];
        let defect = eb.dot(nv).abs().max((nv.norm() - 1.0).abs());
        transport_defect = transport_defect.max(defect);
        if defect > 1e-6 || !defect.is_finite() {
            return Err(Error::FrameDegenerate(defect));
        }
        nv = orthonormalize(eb, nv);
        if j + 1 < n {
            transported.push(nv);
        }
    }
    // nv is now n₁ transported once around; measure its angle in the start plane.
    let n1_0 = transported[0];
    let n2_0 = e0[0].cross(n1_0);
    let delta = nv.dot(n2_0).atan2(nv.dot(n1_0));
    let mut c0 = -delta / (2.0 * PI);
    if c0 <= -0.5 {
        c0 += 1.0;
    }

    let mut n1 = Vec::with_capacity(n);
    let mut n2 = Vec::with_capacity(n);
    for j in 0..n {
        let (s, c) = (c0 * grid.x(j)).sin_cos();
        let m = transported[j];
        let b = e0[j].cross(m);
        n1.push(m * c + b * s);
        n2.push(b * c - m * s);
    }
    let dn1 = spec.derivative_points(&n1);
    let omega: Vec<f64> = dn1.iter().zip(&n2).map(|(d, b)| d.dot(*b)).collect();
    let q0: Vec<C64> = (0..n)
        .map(|j| {
            let z1 = de[j].dot(n1[j]);
            let z2 = de[j].dot(n2[j]);
            C64::new(-0.5 * z2, 0.5 * z1)
        })
        .collect();
    let frame = HFrame { e0, n1, n2, omega, c0 };
    let defect = frame.orthonormality_defect();
    if defect > 1e-6 {
        return Err(Error::FrameDegenerate(defect));
    }
    let phi = su2_from_rotation(&frame.rotation_at(0));
    Ok(HFrameLift {
        q0: InvariantField::new(grid, q0, filament.t, 1.0),
        frame,
        phi,
        c0,
        transport_defect,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymOptions {
    /// Step `δλ` of the central difference in `λ`.
    pub delta: f64,
    pub save_every: usize,
}

impl Default for SymOptions {
    fn default() -> Self {
        Self { delta: 1e-4, save_every: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct SymResult {
    pub states: Vec<FilamentState>,
    /// Sup difference between the `δλ` and `δλ/2` estimates of `η`.
    pub derivative_gap: f64,
    /// `|∮ E a E⁻¹ dx|` per output time.
    pub closure_gap: Vec<f64>,
}

/// `E_x = E·(aλ + u(x, 0))` from `E(0) = φ`, one RK4 step per grid cell.
fn initial_frames(spec: &Spectral, phi: &GroupElement, q0: &InvariantField, lambda: f64) -> Vec<GroupElement> {
    let n = spec.len();
    let h = spec.grid().h();
    let mid = spec.shift(&q0.values, 0.5 * h);
    let a = basis_a().scale_re(lambda);
    let conn = |q: C64| a + crate::frame::potential(q);
    let mut e = phi.m;
    let mut out = Vec::with_capacity(n);
    out.push(GroupElement::unitary(e));
    for j in 0..n - 1 {
        let (a0, a1, a2) = (conn(q0.values[j]), conn(mid[j]), conn(q0.values[j + 1]));
        let k1 = e * a0;
        let k2 = (e + k1.scale_re(0.5 * h)) * a1;
        let k3 = (e + k2.scale_re(0.5 * h)) * a1;
        let k4 = (e + k3.scale_re(h)) * a2;
        e = (e + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(h / 6.0)).project_su2();
        out.push(GroupElement::unitary(e));
    }
    out
}

fn frames_at(
    spec: &Spectral,
    phi: &GroupElement,
    traj: &NlsTrajectory,
    lambda: f64,
    save_every: usize,
) -> Result<Vec<FrameField>> {
    let init = initial_frames(spec, phi, &traj.fields[0], lambda);
    evolve_frames(spec, &init, traj, C64::new(lambda, 0.0), &FrameOptions::every(save_every))
}

fn eta_estimate(plus: &FrameField, minus: &FrameField, center: &FrameField, step: f64) -> Vec<SpherePoint> {
    (0..center.frames.len())
        .map(|j| {
            let d = (plus.frames[j].m - minus.frames[j].m).scale_re(1.0 / (2.0 * step));
            AlgebraElement::from_matrix_projected(&(d * center.frames[j].m.adjoint())).point()
        })
        .collect()
}

/// Sym-formula reconstruction `α̃(x, t) = η(x − 2c₀t, t) − η(0, 0) + α₀(0)`.
pub fn sym_reconstruct(
    spec: &Spectral,
    phi: &GroupElement,
    traj: &NlsTrajectory,
    c0: f64,
    alpha0_origin: SpherePoint,
    opts: &SymOptions,
) -> Result<SymResult> {
    let d = opts.delta;
    let se = opts.save_every;
    let center = frames_at(spec, phi, traj, c0, se)?;
    let plus = frames_at(spec, phi, traj, c0 + d, se)?;
    let minus = frames_at(spec, phi, traj, c0 - d, se)?;
    let plus_half = frames_at(spec, phi, traj, c0 + 0.5 * d, se)?;
    let minus_half = frames_at(spec, phi, traj, c0 - 0.5 * d, se)?;
    let h = spec.grid().h();
    let a = AlgebraElement::new(1.0, 0.0, 0.0);

    let mut derivative_gap: f64 = 0.0;
    let mut etas = Vec::with_capacity(center.len());
    let mut closure_gap = Vec::with_capacity(center.len());
    for i in 0..center.len() {
        let coarse = eta_estimate(&plus[i], &minus[i], &center[i], d);
        let fine = eta_estimate(&plus_half[i], &minus_half[i], &center[i], 0.5 * d);
        let gap = coarse.iter().zip(&fine).map(|(p, q)| p.distance(*q)).fold(0.0, f64::max);
        derivative_gap = derivative_gap.max(gap);
        let tangent_sum = center[i]
            .frames
            .iter()
            .fold(SpherePoint::zero(), |acc, g| acc + conjugate(g, a).point());
        closure_gap.push((tangent_sum * h).norm());
        etas.push(fine);
    }
    if derivative_gap > 1e-3 || !derivative_gap.is_finite() {
        return Err(Error::DerivativeNoise(derivative_gap));
    }
    let origin = etas[0][0];
    let states = center
        .iter()
        .zip(etas)
        .map(|(f, eta)| {
            let shifted = spec.shift_points(&eta, -2.0 * c0 * f.t);
            FilamentState {
                grid: f.grid,
                points: shifted.into_iter().map(|p| p - origin + alpha0_origin).collect(),
                t: f.t,
                arclength: true,
            }
        })
        .collect();
    Ok(SymResult { states, derivative_gap, closure_gap })
}

/// A full Sym-route run from an arbitrary closed seed.
#[derive(Debug, Clone)]
pub struct SymRun {
    pub reparam: Reparametrized,
    pub lift: HFrameLift,
    pub traj: NlsTrajectory,
    /// Output in the seed's own length and time units.
    pub result: SymResult,
}

/// Reparametrizes `seed` by arclength, lifts it, solves the NLS and
/// reconstructs up to physical time `t_final` with physical step `dt`.
pub fn solve_vfe_sym(
    spec: &Spectral,
    seed: &[SpherePoint],
    t_final: f64,
    dt: f64,
    nls: &NlsOptions,
    opts: &SymOptions,
) -> Result<SymRun> {
    let reparam = arclength_reparametrize(spec, seed)?;
    let s = reparam.scale;
    let lift = hframe_lift(spec, &reparam.state)?;
    let traj = nls_solve(spec, &lift.q0, t_final / (s * s), dt / (s * s), nls)?;
    let mut result = sym_reconstruct(spec, &lift.phi, &traj, lift.c0, reparam.state.points[0], opts)?;
    result.states = result.states.iter().map(|st| st.scaled(s, s * s)).collect();
    for g in &mut result.closure_gap {
        *g *= s;
    }
    Ok(SymRun { reparam, lift, traj, result })
}

/// Sup over interior time levels of `|α_t − α_x × α_xx|`.
pub fn vfe_residual(spec: &Spectral, states: &[FilamentState], mode: XDerivative) -> f64 {
    assert!(states.len() >= 3, "need at least three time levels");
    let mut worst: f64 = 0.0;
    for i in 1..states.len() - 1 {
        let dt = states[i + 1].t - states[i - 1].t;
        let p = &states[i].points;
        let n = p.len();
        let h = states[i].grid.h();
        let (range, dx, dxx) = match mode {
            XDerivative::Spectral => (0..n, spec.derivative_points(p), spec.second_derivative_points(p)),
            XDerivative::FiniteDifference => {
                let mut d1 = vec![SpherePoint::zero(); n];
                let mut d2 = vec![SpherePoint::zero(); n];
                for j in 2..n - 2 {
                    d1[j] = fd1(p, j, h);
                    d2[j] = fd2(p, j, h);
                }
                (2..n - 2, d1, d2)
            }
        };
        for j in range {
            let at = (states[i + 1].points[j] - states[i - 1].points[j]) * (1.0 / dt);
            worst = worst.max((at - dx[j].cross(dxx[j])).norm());
        }
    }
    worst
}

/// The curve `E a E⁻¹` of an h-frame lift's initial frames, for checks.
pub fn lift_tangent(spec: &Spectral, lift: &HFrameLift) -> Vec<SpherePoint> {
    let a = AlgebraElement::new(1.0, 0.0, 0.0);
    initial_frames(spec, &lift.phi, &lift.q0, lift.c0)
        .iter()
        .map(|g| conjugate(g, a).point())
        .collect()
}

/// `A_x` at `λ` for checks against the h-frame connection.
pub fn frame_connection(lambda: f64, q: C64) -> Mat2 {
    basis_a().scale_re(lambda) + crate::frame::potential(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{LibraryCurve, LibraryFilament};
    use crate::diagnostics::stationary_great_circle;
    use crate::spectral::PeriodicGrid;

    fn spec(n: usize) -> Spectral {
        Spectral::new(PeriodicGrid::new(n).unwrap())
    }

    fn great_circle_curves(s: &Spectral, times: &[f64]) -> Vec<CurveState> {
        times
            .iter()
            .map(|&t| CurveState { t, ..CurveState::sample(s.grid(), |x| stationary_great_circle(x, t)) })
            .collect()
    }

    #[test]
    fn flow_route_great_circle() {
        let s = spec(64);
        let times: Vec<f64> = (0..=10).map(|i| 0.1 * i as f64).collect();
        let flow = filament_from_flow(&s, &great_circle_curves(&s, &times));
        assert!(flow.warnings.is_empty());
        for st in &flow.states {
            for (j, p) in st.points.iter().enumerate() {
                let x = s.grid().x(j);
                // (t, sin x, −cos x) shifted by the free translation (0, 0, 1).
                let expected = SpherePoint::new(st.t, x.sin(), 1.0 - x.cos());
                assert!(p.distance(expected) < 1e-12);
            }
        }
    }

    #[test]
    fn flow_route_fixed_point_is_a_line() {
        let s = spec(16);
        let curves = vec![LibraryCurve::FixedPoint.sample(s.grid())];
        let flow = filament_from_flow(&s, &curves);
        assert_eq!(flow.warnings.len(), 1);
        for (j, p) in flow.states[0].points.iter().enumerate() {
            assert!(p.distance(SpherePoint::new(s.grid().x(j), 0.0, 0.0)) < 1e-13);
        }
    }

    #[test]
    fn reparametrize_circle_is_identity() {
        let s = spec(64);
        let pts = LibraryFilament::Circle.sample(s.grid());
        let r = arclength_reparametrize(&s, &pts).unwrap();
        assert!((r.scale - 1.0).abs() < 1e-14);
        for (a, b) in r.state.points.iter().zip(&pts) {
            assert!(a.distance(*b) < 1e-13);
        }
    }

    #[test]
    fn reparametrize_ellipse() {
        let s = spec(256);
        let r = arclength_reparametrize(&s, &LibraryFilament::SmokeRing.sample(s.grid())).unwrap();
        assert!(r.state.speed_deviation(&s) < 1e-8, "{:e}", r.state.speed_deviation(&s));
        // Length of (cos x, sin x, cos x) is ∫√(1 + sin²x) dx; compare a
        // high-resolution midpoint rule.
        let m = 200_000;
        let hm = 2.0 * PI / m as f64;
        let oracle: f64 = (0..m).map(|k| (1.0 + ((k as f64 + 0.5) * hm).sin().powi(2)).sqrt() * hm).sum();
        assert!((r.length - oracle).abs() < 1e-8);
        let r2 = arclength_reparametrize(&spec(512), &LibraryFilament::SmokeRing.sample(spec(512).grid())).unwrap();
        assert!((r.length - r2.length).abs() < 1e-8);
        // The base point is kept, and by symmetry a quarter of the length is
        // reached at x = π/2.
        let seed = LibraryFilament::SmokeRing.eval(0.0) * (1.0 / r.scale);
        assert!(r.state.points[0].distance(seed) < 1e-12);
        let quarter = LibraryFilament::SmokeRing.eval(PI / 2.0) * (1.0 / r.scale);
        assert!(r.state.points[64].distance(quarter) < 1e-10);
    }

    #[test]
    fn reparametrize_keeps_base_point() {
        let s = spec(256);
        let pts: Vec<SpherePoint> = s.grid().xs().iter().map(|&x| LibraryFilament::SmokeRing.eval(x + 0.3)).collect();
        let r = arclength_reparametrize(&s, &pts).unwrap();
        assert!(r.state.points[0].distance(pts[0] * (1.0 / r.scale)) < 1e-12);
        assert!(r.state.speed_deviation(&s) < 1e-8);
    }

    #[test]
    fn degenerate_speed() {
        let s = spec(16);
        let pts = vec![SpherePoint::new(1.0, 2.0, 3.0); 16];
        assert!(matches!(arclength_reparametrize(&s, &pts), Err(Error::DegenerateSpeed(_))));
    }

    #[test]
    fn circle_hframe() {
        let s = spec(64);
        let st = FilamentState {
            grid: s.grid(),
            points: LibraryFilament::Circle.sample(s.grid()),
            t: 0.0,
            arclength: true,
        };
        let lift = hframe_lift(&s, &st).unwrap();
        assert!(lift.c0.abs() < 1e-12);
        for q in &lift.q0.values {
            assert!((q.norm() - 0.5).abs() < 1e-8);
        }
        assert!(lift.frame.orthonormality_defect() < 1e-8);
    }

    #[test]
    fn straight_segment_rejected() {
        // Not closed: the speed is fine but the derivative data is not periodic.
        let s = spec(32);
        let pts: Vec<_> = s.grid().xs().into_iter().map(|x| SpherePoint::new(x, 0.0, 0.0)).collect();
        let st = FilamentState { grid: s.grid(), points: pts, t: 0.0, arclength: true };
        assert!(matches!(hframe_lift(&s, &st), Err(Error::NotClosed(_))));
    }

    #[test]
    fn hframe_lift_is_consistent() {
        let s = spec(256);
        let r = arclength_reparametrize(&s, &LibraryFilament::SmokeRing.sample(s.grid())).unwrap();
        let lift = hframe_lift(&s, &r.state).unwrap();
        let f = &lift.frame;
        assert!(f.orthonormality_defect() < 1e-8);
        for w in &f.omega {
            assert!((w - lift.c0).abs() < 1e-8, "{w} {}", lift.c0);
        }
        // Integrating E_x = E(ac₀ + u) from φ reproduces the tangent.
        let tangent = lift_tangent(&s, &lift);
        for (t, e) in tangent.iter().zip(&f.e0) {
            assert!(t.distance(*e) < 1e-8);
        }
        assert!(s.tail(&lift.q0.values) < 1e-8);
    }

    #[test]
    fn sym_circle_translates() {
        let s = spec(64);
        let run = solve_vfe_sym(
            &s,
            &LibraryFilament::Circle.sample(s.grid()),
            0.5,
            1e-3,
            &NlsOptions::default(),
            &SymOptions { save_every: 50, ..Default::default() },
        )
        .unwrap();
        for st in &run.result.states {
            let m = st.mean();
            assert!((m.r3 - st.t).abs() < 0.02 * st.t.max(1e-3), "t = {}: {:?}", st.t, m);
            assert!(m.r1.abs() < 1e-6 && m.r2.abs() < 1e-6);
        }
    }

    #[test]
    fn both_routes_agree_on_great_circle() {
        let s = spec(128);
        let times: Vec<f64> = (0..=10).map(|i| 0.05 * i as f64).collect();
        let flow = filament_from_flow(&s, &great_circle_curves(&s, &times));
        let seed = &flow.states[0].points;
        let run = solve_vfe_sym(
            &s,
            seed,
            0.5,
            1e-3,
            &NlsOptions::default(),
            &SymOptions { save_every: 50, ..Default::default() },
        )
        .unwrap();
        assert!((run.reparam.scale - 1.0).abs() < 1e-12);
        for (a, b) in run.result.states.iter().zip(&flow.states) {
            assert!((a.t - b.t).abs() < 1e-12);
            for (p, q) in a.points.iter().zip(&b.points) {
                assert!(p.distance(*q) < 1e-3, "t = {}: {:e}", a.t, p.distance(*q));
            }
        }
    }

    #[test]
    fn smoke_ring_floats_up() {
        let s = spec(128);
        let run = solve_vfe_sym(
            &s,
            &LibraryFilament::SmokeRing.sample(s.grid()),
            1.0,
            1e-3,
            &NlsOptions::default(),
            &SymOptions { save_every: 100, ..Default::default() },
        )
        .unwrap();
        let z: Vec<f64> = run.result.states.iter().map(|st| st.mean().r3).collect();
        assert!(z.windows(2).all(|w| w[1] > w[0]), "{z:?}");
        assert!(run.result.closure_gap.iter().all(|g| *g < 1e-6));
        let scale = run.reparam.scale;
        for st in &run.result.states {
            // |α_x| equals the scale in the seed's own units.
            let d = s.derivative_points(&st.points);
            for v in d {
                assert!((v.norm() - scale).abs() < 1e-6 * scale);
            }
        }
    }

    #[test]
    fn sym_output_solves_vfe() {
        let s = spec(128);
        let res = |dt: f64| {
            let run = solve_vfe_sym(
                &s,
                &LibraryFilament::SmokeRing.sample(s.grid()),
                0.1,
                dt,
                &NlsOptions::default(),
                &SymOptions::default(),
            )
            .unwrap();
            // Residual in the arclength variable: undo the length scale.
            let sc = run.reparam.scale;
            let states: Vec<FilamentState> =
                run.result.states.iter().map(|st| st.scaled(1.0 / sc, 1.0 / (sc * sc))).collect();
            vfe_residual(&s, &states, XDerivative::Spectral)
        };
        let (r1, r2) = (res(2e-3), res(1e-3));
        assert!(r2 < r1 && r1 / r2 > 3.0, "{r1:e} {r2:e}");
    }
}
