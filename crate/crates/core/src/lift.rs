//! Lifting a closed curve on S² to a periodic SU(2) frame and extracting its
//! NLS invariant.
//!
//! The steps are: pick the eigenvector frame `F` with `F a F⁻¹ = γ₀`, gauge
//! it by a diagonal factor so that `f⁻¹f_x` is off-diagonal, read off the
//! invariant `q₀ = (f⁻¹f_x)₁₂`, measure the monodromy `f(0)⁻¹f(2π)`, and
//! finally remove the monodromy phase to get the periodic frame `f̃` and
//! invariant `q̃₀`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::curve::{CurveState, DEFAULT_TAIL_THRESHOLD};
use crate::error::{Error, Result};
use crate::spectral::{Interpolant, Spectral};
use crate::su2::{conjugate, exp_a, rotation_between, to_algebra, GroupElement, Mat2, SpherePoint};

/// Default margin `ε_sing` on `r₁ > −1 + ε_sing`.
pub const EPS_SING: f64 = 1e-6;
/// Default distance from `(−1, 0, 0)` below which a safety rotation is applied.
pub const SAFETY_RADIUS: f64 = 0.5;
/// Smallest clearance from `(−1, 0, 0)` a safety rotation must reach.
pub const MIN_CLEARANCE: f64 = 0.1;

const SINGULAR: SpherePoint = SpherePoint::new(-1.0, 0.0, 0.0);

/// Which of the two monodromy representatives to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchPolicy {
    /// `c₀ ∈ (−1/2, 1/2]` with an explicit sign `ε`.
    #[default]
    Projective,
    /// `(c₀ + 1, −ε)`.
    Alternate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftOptions {
    pub eps_sing: f64,
    pub safety_radius: f64,
    pub branch: BranchPolicy,
    pub tail_threshold: f64,
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self {
            eps_sing: EPS_SING,
            safety_radius: SAFETY_RADIUS,
            branch: BranchPolicy::Projective,
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
        }
    }
}

/// The eigenvector frame `F(p)` with `F a F⁻¹ = p`.
pub fn diagonalizing_frame(p: SpherePoint, eps_sing: f64) -> Result<GroupElement> {
    let SpherePoint { r1, r2, r3 } = p;
    if r1 <= -1.0 + eps_sing {
        return Err(Error::SingularPoint { r1, r2, r3 });
    }
    let s = (1.0 + r1).sqrt();
    let d = C64::new(s / 2f64.sqrt(), 0.0);
    let w = C64::new(0.0, 1.0 / (2f64.sqrt() * s));
    let m = Mat2::new(d, w * C64::new(r2, r3), w * C64::new(r2, -r3), d);
    Ok(GroupElement::unitary(m))
}

/// Fibonacci-lattice directions on S².
fn fibonacci_sphere(n: usize) -> impl Iterator<Item = SpherePoint> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n).map(move |i| {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        SpherePoint::new(r * phi.cos(), r * phi.sin(), z)
    })
}

/// Moves the curve away from the frame singularity at `(−1, 0, 0)`.
///
/// Returns the identity when the curve already keeps `radius` away.
/// Otherwise the lattice direction farthest from every sample is rotated onto
/// `(−1, 0, 0)`; the returned element `R` acts by `p ↦ R p R⁻¹`. Fails when
/// no direction clears the curve by `min(radius, MIN_CLEARANCE)`.
pub fn avoid_singularity(curve: &CurveState, radius: f64) -> Result<(GroupElement, CurveState)> {
    let min_dist = |d: SpherePoint| {
        curve.points.iter().map(|p| p.distance(d)).fold(f64::INFINITY, f64::min)
    };
    let current = min_dist(SINGULAR);
    if current >= radius {
        return Ok((GroupElement::identity(), curve.clone()));
    }
    let (best, dist) = fibonacci_sphere(4096)
        .map(|d| (d, min_dist(d)))
        .fold((SINGULAR, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
    let floor = radius.min(MIN_CLEARANCE);
    if dist < floor {
        return Err(Error::NoSafeRotation { radius: floor });
    }
    if dist <= current {
        return Ok((GroupElement::identity(), curve.clone()));
    }
    let rot = rotation_between(best, SINGULAR);
    let points = curve
        .points
        .iter()
        .map(|&p| conjugate(&rot, to_algebra(p)).point().normalized())
        .collect();
    Ok((rot, CurveState { grid: curve.grid, points, t: curve.t }))
}

/// Output of [`gauge_offdiagonal`]: the gauged frame `f = F k` and the data
/// needed to evaluate its connection between grid points.
#[derive(Debug, Clone)]
pub struct GaugedFrame {
    pub f: Vec<GroupElement>,
    pub q0: Vec<C64>,
    /// Mean of the diagonal density `μ`, where `(F⁻¹F_x)₁₁ = iμ/2`.
    pub mu_mean: f64,
    /// Sup norm of the remaining diagonal part of `f⁻¹f_x`.
    pub residual: f64,
    p: Interpolant,
    theta: Interpolant,
}

impl GaugedFrame {
    /// `q₀(x) = p(x) e^{iθ(x)}` at an arbitrary `x`.
    pub fn q0_at(&self, x: f64) -> C64 {
        let theta = self.mu_mean * x + self.theta.eval(x).re;
        self.p.eval(x) * C64::from_polar(1.0, theta)
    }
}

fn offdiag(q: C64) -> Mat2 {
    Mat2::new(C64::new(0.0, 0.0), q, -q.conj(), C64::new(0.0, 0.0))
}

/// Gauges eigenvector-frame samples so that `f⁻¹f_x` is off-diagonal.
pub fn gauge_offdiagonal(frames: &[GroupElement], spec: &Spectral) -> Result<GaugedFrame> {
    let n = spec.len();
    assert_eq!(frames.len(), n, "sample count does not match grid");
    let mut dfs = [[Vec::new(), Vec::new()], [Vec::new(), Vec::new()]];
    for (r, row) in dfs.iter_mut().enumerate() {
        for (c, slot) in row.iter_mut().enumerate() {
            let entry: Vec<C64> = frames.iter().map(|g| g.m[(r, c)]).collect();
            *slot = spec.derivative(&entry);
        }
    }
    let mut mu = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    for (j, g) in frames.iter().enumerate() {
        let fx = Mat2::new(dfs[0][0][j], dfs[0][1][j], dfs[1][0][j], dfs[1][1][j]);
        let conn = g.inverse().m * fx;
        mu.push((conn[(0, 0)] - conn[(1, 1)]).im);
        p.push(conn[(0, 1)]);
    }
    let (mu_mean, theta) = spec.antiderivative_real(&mu);
    let dtheta = spec.derivative_real(&theta);
    let residual = mu
        .iter()
        .zip(&dtheta)
        .map(|(m, d)| (m - mu_mean - d).abs())
        .fold(0.0, f64::max);
    if residual > 1e-6 || !residual.is_finite() {
        return Err(Error::GaugeResidual(residual));
    }
    let grid = spec.grid();
    let mut f = Vec::with_capacity(n);
    let mut q0 = Vec::with_capacity(n);
    for j in 0..n {
        let th = mu_mean * grid.x(j) + theta[j];
        f.push(GroupElement::unitary(frames[j].m * exp_a(-th)));
        q0.push(p[j] * C64::from_polar(1.0, th));
    }
    let theta_c: Vec<C64> = theta.iter().map(|&t| C64::new(t, 0.0)).collect();
    Ok(GaugedFrame {
        f,
        q0,
        mu_mean,
        residual,
        p: spec.interpolant(&p),
        theta: spec.interpolant(&theta_c),
    })
}

/// Monodromy data of the gauged frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Holonomy {
    pub c0: f64,
    pub branch_sign: f64,
    pub monodromy: GroupElement,
}

const HOLONOMY_SUBSTEPS: usize = 8;

/// Integrates `f_x = f·u(x)` across the last grid interval, forms
/// `M = f(0)⁻¹ f(2π)` and writes `M = ε·diag(e^{iπc₀}, e^{−iπc₀})` with
/// `c₀ ∈ (−1/2, 1/2]`.
pub fn holonomy(gauged: &GaugedFrame, spec: &Spectral) -> Result<Holonomy> {
    let grid = spec.grid();
    let n = grid.len();
    let x0 = grid.x(n - 1);
    let h = grid.h() / HOLONOMY_SUBSTEPS as f64;
    let mut f = gauged.f[n - 1].m;
    for s in 0..HOLONOMY_SUBSTEPS {
        let x = x0 + h * s as f64;
        let a0 = offdiag(gauged.q0_at(x));
        let a1 = offdiag(gauged.q0_at(x + 0.5 * h));
        let a2 = offdiag(gauged.q0_at(x + h));
        let k1 = f * a0;
        let k2 = (f + k1.scale_re(0.5 * h)) * a1;
        let k3 = (f + k2.scale_re(0.5 * h)) * a1;
        let k4 = (f + k3.scale_re(h)) * a2;
        f = f + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(h / 6.0);
    }
    let m = gauged.f[0].inverse().m * f;
    let off = m[(0, 1)].norm().max(m[(1, 0)].norm());
    if off > 1e-6 || !off.is_finite() {
        return Err(Error::NonDiagonalMonodromy(off));
    }
    let raw = m[(0, 0)].arg() / PI;
    let (c0, branch_sign) = if raw > 0.5 {
        (raw - 1.0, -1.0)
    } else if raw <= -0.5 {
        (raw + 1.0, -1.0)
    } else {
        (raw, 1.0)
    };
    Ok(Holonomy { c0, branch_sign, monodromy: GroupElement::unitary(m) })
}

/// The periodic lift of a closed curve.
#[derive(Debug, Clone)]
pub struct LiftResult {
    pub frame_tilde: Vec<GroupElement>,
    pub q0_tilde: Vec<C64>,
    pub c0: f64,
    pub branch_sign: f64,
    pub monodromy: GroupElement,
    /// Safety rotation applied before lifting; already folded into
    /// `frame_tilde` by left multiplication with its inverse.
    pub rotation: GroupElement,
    pub gauge_residual: f64,
}

/// Removes the monodromy phase: `f̃_j = f_j exp(−c₀ a x_j)`,
/// `q̃₀_j = q₀_j e^{ic₀x_j}`.
pub fn periodic_gauge(gauged: &GaugedFrame, hol: &Holonomy, spec: &Spectral) -> LiftResult {
    let grid = spec.grid();
    let frame_tilde = gauged
        .f
        .iter()
        .enumerate()
        .map(|(j, g)| GroupElement::unitary(g.m * exp_a(-hol.c0 * grid.x(j))))
        .collect();
    let q0_tilde = gauged
        .q0
        .iter()
        .enumerate()
        .map(|(j, q)| q * C64::from_polar(1.0, hol.c0 * grid.x(j)))
        .collect();
    LiftResult {
        frame_tilde,
        q0_tilde,
        c0: hol.c0,
        branch_sign: hol.branch_sign,
        monodromy: hol.monodromy,
        rotation: GroupElement::identity(),
        gauge_residual: gauged.residual,
    }
}

/// Full lift of a sampled closed curve.
///
/// If a safety rotation `R` is needed, the curve is lifted in rotated
/// position and the frames are left-multiplied by `R⁻¹`, so that
/// `f̃ a f̃⁻¹` reproduces the original curve while `q̃₀` and `c₀` are
/// unchanged.
pub fn lift_curve(curve: &CurveState, spec: &Spectral, opts: &LiftOptions) -> Result<LiftResult> {
    curve.validate(spec, opts.tail_threshold)?;
    let (rot, rotated) = avoid_singularity(curve, opts.safety_radius)?;
    let frames = rotated
        .points
        .iter()
        .map(|&p| diagonalizing_frame(p, opts.eps_sing))
        .collect::<Result<Vec<_>>>()?;
    let gauged = gauge_offdiagonal(&frames, spec)?;
    let mut hol = holonomy(&gauged, spec)?;
    if opts.branch == BranchPolicy::Alternate {
        hol.c0 += 1.0;
        hol.branch_sign = -hol.branch_sign;
    }
    let mut lift = periodic_gauge(&gauged, &hol, spec);
    let unrot = rot.inverse();
    for g in &mut lift.frame_tilde {
        *g = unrot.compose(g);
    }
    lift.rotation = rot;
    Ok(lift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::LibraryCurve;
    use crate::spectral::PeriodicGrid;
    use crate::su2::{basis_a, AlgebraElement};

    const I: C64 = C64 { re: 0.0, im: 1.0 };

    fn spec(n: usize) -> Spectral {
        Spectral::new(PeriodicGrid::new(n).unwrap())
    }

    fn curve_of(f: &GroupElement) -> SpherePoint {
        conjugate(f, AlgebraElement::new(1.0, 0.0, 0.0)).point()
    }

    #[test]
    fn frame_examples() {
        let f = diagonalizing_frame(SpherePoint::new(1.0, 0.0, 0.0), EPS_SING).unwrap();
        assert!((f.m - Mat2::identity()).norm() < 1e-15);

        let f = diagonalizing_frame(SpherePoint::new(0.0, 1.0, 0.0), EPS_SING).unwrap();
        let r = 1.0 / 2f64.sqrt();
        let expected = Mat2::new(C64::new(r, 0.0), I * r, I * r, C64::new(r, 0.0));
        assert!((f.m - expected).norm() < 1e-15);
        // F a F⁻¹ by direct multiplication.
        let b = f.m * basis_a() * f.m.adjoint();
        assert!((b - AlgebraElement::new(0.0, 1.0, 0.0).matrix()).norm() < 1e-15);
    }

    #[test]
    fn frame_rejects_singular_point() {
        let err = diagonalizing_frame(SpherePoint::new(-1.0, 0.0, 0.0), EPS_SING).unwrap_err();
        assert!(matches!(err, Error::SingularPoint { .. }));
    }

    #[test]
    fn great_circle_gauge_matches_closed_form() {
        let s = spec(64);
        let curve = LibraryCurve::GreatCircle.sample(s.grid());
        let frames: Vec<_> =
            curve.points.iter().map(|&p| diagonalizing_frame(p, EPS_SING).unwrap()).collect();
        let g = gauge_offdiagonal(&frames, &s).unwrap();
        let r = 1.0 / 2f64.sqrt();
        for (j, x) in s.grid().xs().into_iter().enumerate() {
            let e = C64::from_polar(1.0, x / 2.0);
            let expected = Mat2::new(e * r, I * e * r, I * e.conj() * r, e.conj() * r);
            assert!((g.f[j].m - expected).norm() < 1e-13);
            assert!((g.q0[j] + 0.5).norm() < 1e-13);
        }
        assert!((g.mu_mean + 1.0).abs() < 1e-14);
    }

    #[test]
    fn fixed_point_lift_is_trivial() {
        let s = spec(32);
        let lift =
            lift_curve(&LibraryCurve::FixedPoint.sample(s.grid()), &s, &LiftOptions::default())
                .unwrap();
        assert_eq!(lift.c0, 0.0);
        assert_eq!(lift.branch_sign, 1.0);
        assert!((lift.monodromy.m - Mat2::identity()).norm() < 1e-15);
        for (f, q) in lift.frame_tilde.iter().zip(&lift.q0_tilde) {
            assert!((f.m - Mat2::identity()).norm() < 1e-15);
            assert!(q.norm() < 1e-15);
        }
    }

    #[test]
    fn great_circle_branches() {
        let s = spec(64);
        let curve = LibraryCurve::GreatCircle.sample(s.grid());
        let lift = lift_curve(&curve, &s, &LiftOptions::default()).unwrap();
        assert!(lift.c0.abs() < 1e-12);
        assert_eq!(lift.branch_sign, -1.0);
        assert!((lift.monodromy.m + Mat2::identity()).norm() < 1e-10);
        for q in &lift.q0_tilde {
            assert!((q + 0.5).norm() < 1e-12);
        }

        let opts = LiftOptions { branch: BranchPolicy::Alternate, ..Default::default() };
        let alt = lift_curve(&curve, &s, &opts).unwrap();
        assert!((alt.c0 - 1.0).abs() < 1e-12);
        assert_eq!(alt.branch_sign, 1.0);
        for (j, x) in s.grid().xs().into_iter().enumerate() {
            assert!((alt.q0_tilde[j] + C64::from_polar(0.5, x)).norm() < 1e-12);
        }
    }

    #[test]
    fn lift_round_trips_library_curves() {
        let s = spec(256);
        for c in LibraryCurve::ALL {
            let curve = c.sample(s.grid());
            let lift = lift_curve(&curve, &s, &LiftOptions::default()).unwrap();
            for (f, p) in lift.frame_tilde.iter().zip(&curve.points) {
                assert!(f.m.unitarity_deviation() < 1e-12);
                assert!((f.det() - 1.0).norm() < 1e-12);
                assert!(curve_of(f).distance(*p) < 1e-8, "{}", c.name());
            }
            assert!(s.tail(&lift.q0_tilde) < DEFAULT_TAIL_THRESHOLD, "{}", c.name());
        }
    }

    #[test]
    fn viviani_gauge_residual_small() {
        let s = spec(512);
        let curve = LibraryCurve::Viviani.sample(s.grid());
        let frames: Vec<_> =
            curve.points.iter().map(|&p| diagonalizing_frame(p, EPS_SING).unwrap()).collect();
        let g = gauge_offdiagonal(&frames, &s).unwrap();
        assert!(g.residual < 1e-8);
    }

    #[test]
    fn viviani_holonomy_converges() {
        // Oracle: the same monodromy integrated at N = 8192.
        let lift_at = |n: usize| {
            let s = spec(n);
            lift_curve(&LibraryCurve::Viviani.sample(s.grid()), &s, &LiftOptions::default())
                .unwrap()
        };
        let reference = lift_at(8192);
        assert!(reference.c0.is_finite());
        for n in [256, 512, 1024] {
            assert!((lift_at(n).c0 - reference.c0).abs() < 1e-6, "N = {n}");
        }
    }

    #[test]
    fn curve_through_singularity_is_rotated() {
        let s = spec(128);
        // Great circle through (−1, 0, 0).
        let curve = CurveState::sample(s.grid(), |x| SpherePoint::new(x.cos(), x.sin(), 0.0));
        let (rot, rotated) = avoid_singularity(&curve, SAFETY_RADIUS).unwrap();
        assert!(rot.m.norm() > 0.0 && (rot.m - Mat2::identity()).norm() > 1e-3);
        let dmin = rotated.points.iter().map(|p| p.distance(SINGULAR)).fold(f64::INFINITY, f64::min);
        assert!(dmin >= SAFETY_RADIUS);

        let lift = lift_curve(&curve, &s, &LiftOptions::default()).unwrap();
        for (f, p) in lift.frame_tilde.iter().zip(&curve.points) {
            assert!(curve_of(f).distance(*p) < 1e-10);
        }
    }

    #[test]
    fn safe_curve_is_not_rotated() {
        let s = spec(32);
        let curve = LibraryCurve::GreatCircle.sample(s.grid());
        let (rot, rotated) = avoid_singularity(&curve, SAFETY_RADIUS).unwrap();
        assert_eq!(rot, GroupElement::identity());
        assert_eq!(rotated, curve);
    }

    #[test]
    fn dense_curve_has_no_safe_rotation() {
        // A spiral that sweeps the whole sphere densely.
        let s = spec(4096);
        let curve = CurveState::sample(s.grid(), |x| {
            let z = (x / 2.0).cos();
            let r = (1.0 - z * z).sqrt();
            SpherePoint::new(r * (60.0 * x).cos(), r * (60.0 * x).sin(), z)
        });
        assert!(matches!(
            avoid_singularity(&curve, 0.5),
            Err(Error::NoSafeRotation { .. })
        ));
    }
}
