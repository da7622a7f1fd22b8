//! Bäcklund (dressing) transformation of a computed frame by a simple
//! rational factor with a pole at a non-real `α`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::curve::CurveState;
use crate::error::{Error, Result};
use crate::frame::{
    connection_at, fd1, fd2, frame_past_last_sample, pde_residual, potential, FrameField,
    XDerivative, OVERFLOW_LIMIT,
};
use crate::lift::LiftResult;
use crate::nls::{InvariantField, NlsTrajectory};
use crate::spectral::Spectral;
use crate::su2::{basis_a, AlgebraElement, GroupElement, Mat2, SpherePoint};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Pole `α`, line `V` and evaluation parameter `λ₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtParams {
    pub alpha: C64,
    pub v: [C64; 2],
    pub lambda0: f64,
}

impl BtParams {
    /// Normalizes `V` to unit length with its first nonzero component real
    /// and positive.
    pub fn new(alpha: C64, v: [C64; 2], lambda0: f64) -> Result<Self> {
        if alpha.im.abs() < 1e-8 {
            return Err(Error::InvalidConfig(format!("pole {alpha} must be off the real axis")));
        }
        let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidConfig("line vector must be nonzero".into()));
        }
        let lead = if v[0].norm() > 0.0 { v[0] } else { v[1] };
        let phase = C64::from_polar(1.0, -lead.arg()) / n;
        Ok(Self { alpha, v: [v[0] * phase, v[1] * phase], lambda0 })
    }
}

/// A rank-one Hermitian projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projector(pub Mat2);

impl Projector {
    /// Projection onto the line spanned by `v`.
    pub fn onto(v: [C64; 2]) -> Self {
        let n2 = v[0].norm_sqr() + v[1].norm_sqr();
        let m = Mat2::new(
            v[0] * v[0].conj() / n2,
            v[0] * v[1].conj() / n2,
            v[1] * v[0].conj() / n2,
            v[1] * v[1].conj() / n2,
        );
        Self(m)
    }

    pub fn perp(&self) -> Mat2 {
        Mat2::identity() - self.0
    }

    /// Largest of `‖P − P*‖`, `‖P² − P‖` and `|tr P − 1|`.
    pub fn defect(&self) -> f64 {
        let p = self.0;
        (p - p.adjoint()).norm().max((p * p - p).norm()).max((p.trace() - ONE).norm())
    }
}

/// `k_{α,π}(λ) = I + ((α − ᾱ)/(λ − α)) π^⊥`.
///
/// The determinant is `(λ − ᾱ)/(λ − α)`, of modulus one for real `λ`, where
/// `k` is unitary.
pub fn simple_factor(alpha: C64, pi: &Projector, lambda: C64) -> Result<GroupElement> {
    if (lambda - alpha).norm() < 1e-12 {
        return Err(Error::PoleHit);
    }
    let c = (alpha - alpha.conj()) / (lambda - alpha);
    Ok(GroupElement::complexified(Mat2::identity() + pi.perp().scale(c)))
}

/// `k_{α,π}(λ)⁻¹ = I + ((ᾱ − α)/(λ − ᾱ)) π^⊥`.
pub fn simple_factor_inverse(alpha: C64, pi: &Projector, lambda: C64) -> Result<GroupElement> {
    if (lambda - alpha.conj()).norm() < 1e-12 {
        return Err(Error::PoleHit);
    }
    let c = (alpha.conj() - alpha) / (lambda - alpha.conj());
    Ok(GroupElement::complexified(Mat2::identity() + pi.perp().scale(c)))
}

fn rk4(e: Mat2, a0: &Mat2, a1: &Mat2, a2: &Mat2, h: f64) -> Mat2 {
    let k1 = e * *a0;
    let k2 = (e + k1.scale_re(0.5 * h)) * *a1;
    let k3 = (e + k2.scale_re(0.5 * h)) * *a1;
    let k4 = (e + k3.scale_re(h)) * *a2;
    e + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(h / 6.0)
}

fn renormalize(m: Mat2) -> Result<Mat2> {
    let m = m.normalize_det();
    let big = m.max_abs();
    if !big.is_finite() {
        return Err(Error::NonFinite(big));
    }
    if big > OVERFLOW_LIMIT {
        return Err(Error::Overflow(big));
    }
    Ok(m)
}

/// `E_x = E·(aα + u(x, t))` along one time slice from the seam value at
/// `x = 0`, one RK4 step per grid interval with midpoint potentials from a
/// spectral half-cell shift.
fn integrate_slice(spec: &Spectral, start: Mat2, q: &InvariantField, alpha: C64) -> Result<Vec<Mat2>> {
    let n = spec.len();
    let h = spec.grid().h();
    let mid = spec.shift(&q.values, 0.5 * h);
    let a = basis_a().scale(alpha);
    let mut out = Vec::with_capacity(n);
    let mut e = start;
    out.push(e);
    for j in 0..n - 1 {
        let a0 = a + potential(q.values[j]);
        let a1 = a + potential(mid[j]);
        let a2 = a + potential(q.values[j + 1]);
        e = renormalize(rk4(e, &a0, &a1, &a2, h))?;
        out.push(e);
    }
    Ok(out)
}

/// Frames at a complex spectral parameter: RK4 in `t` along `x = 0` from
/// `f̃(0)`, then RK4 in `x` along each kept time slice.
pub fn frame_at_complex_lambda(
    spec: &Spectral,
    lift: &LiftResult,
    traj: &NlsTrajectory,
    alpha: C64,
    save_every: usize,
) -> Result<Vec<FrameField>> {
    let save_every = save_every.max(1);
    let steps = traj.steps();
    let dt = traj.dt;
    let seam_at = |i: usize| {
        let f = traj.half(i);
        let qx0 = spec.derivative(&f.values)[0];
        connection_at(f.values[0], qx0, alpha, f.sigma).at
    };
    let mut seam = vec![(0usize, lift.frame_tilde[0].m)];
    let mut e = lift.frame_tilde[0].m;
    let mut a0 = seam_at(0);
    for n in 0..steps {
        let a1 = seam_at(2 * n + 1);
        let a2 = seam_at(2 * n + 2);
        e = renormalize(rk4(e, &a0, &a1, &a2, dt))?;
        if (n + 1) % save_every == 0 || n + 1 == steps {
            seam.push((n + 1, e));
        }
        a0 = a2;
    }
    seam.into_par_iter()
        .map(|(n, e0)| {
            let q = traj.at_step(n);
            let frames = integrate_slice(spec, e0, q, alpha)?;
            let drift = frames.iter().map(|m| (m.det() - ONE).norm()).fold(0.0, f64::max);
            Ok(FrameField {
                grid: spec.grid(),
                frames: frames.into_iter().map(GroupElement::complexified).collect(),
                t: q.t,
                lambda: alpha,
                drift,
            })
        })
        .collect()
}

/// Output of [`bt_apply`].
#[derive(Debug, Clone)]
pub struct BtResult {
    /// `q̃ = ũ₁₂` at the kept times.
    pub q_tilde: Vec<InvariantField>,
    pub curves: Vec<CurveState>,
    /// Largest `| |γ̃| − 1 |` before renormalization.
    pub sphere_deviation: f64,
    /// Largest defect of the projections `π̃`.
    pub projector_defect: f64,
    /// `‖q̃_t − iσ(q̃_xx + 2|q̃|²q̃)‖_sup` over interior samples and times.
    pub nls_residual: f64,
    /// [`pde_residual`] of `γ̃` with finite differences in `x`.
    pub pde_residual: f64,
    /// `|γ̃(2π, t) − γ̃(0, t)|` per kept time. Reported, not enforced.
    pub closure_deviation: Vec<f64>,
}

fn dressed_curve_point(e: &Mat2) -> (SpherePoint, f64) {
    let g = AlgebraElement::from_matrix_projected(&(*e * basis_a() * e.inverse())).point();
    let dev = (g.norm() - 1.0).abs();
    (g.normalized(), dev)
}

/// Applies the transformation at every kept time. `e_real` holds the frames
/// at `λ₀` and `e_alpha` those at `α`, on the same times.
pub fn bt_apply(
    spec: &Spectral,
    lift: &LiftResult,
    traj: &NlsTrajectory,
    e_real: &[FrameField],
    e_alpha: &[FrameField],
    params: &BtParams,
) -> Result<BtResult> {
    assert_eq!(e_real.len(), e_alpha.len(), "frame sequences must share times");
    let alpha = params.alpha;
    let lambda0 = C64::new(params.lambda0, 0.0);
    let pi = Projector::onto(params.v);
    let k_left = simple_factor(alpha, &pi, lambda0)?.m;
    let dalpha = alpha - alpha.conj();
    let shift_c0 = -params.lambda0;
    let grid = spec.grid();
    let i = C64::new(0.0, 1.0);

    let mut q_tilde = Vec::with_capacity(e_real.len());
    let mut curves = Vec::with_capacity(e_real.len());
    let mut closure_deviation = Vec::with_capacity(e_real.len());
    let mut sphere_deviation: f64 = 0.0;
    let mut projector_defect: f64 = 0.0;

    for (er, ea) in e_real.iter().zip(e_alpha) {
        assert!((er.t - ea.t).abs() < 1e-9, "frame times differ");
        let step = ((er.t - traj.fields[0].t) / traj.dt).round() as usize;
        let q = traj.at_step(step);
        let dress = |e_l: &Mat2, e_a: &Mat2| -> Result<(C64, Mat2, f64)> {
            let vt = e_a.inverse() * params.v;
            let norm = (vt[0].norm_sqr() + vt[1].norm_sqr()).sqrt();
            if norm < 1e-12 || !norm.is_finite() {
                return Err(Error::DegenerateLine(norm));
            }
            let pt = Projector::onto(vt);
            let k_right = simple_factor_inverse(alpha, &pt, lambda0)?.m;
            // ũ − u = (α − ᾱ)[a, π̃], whose (1,2) entry is (α − ᾱ)·i·π̃₁₂.
            Ok((dalpha * i * pt.0[(0, 1)], k_left * *e_l * k_right, pt.defect()))
        };
        let mut qt = Vec::with_capacity(grid.len());
        let mut eta = Vec::with_capacity(grid.len());
        for j in 0..grid.len() {
            let (dq, et, defect) = dress(&er.frames[j].m, &ea.frames[j].m)?;
            projector_defect = projector_defect.max(defect);
            qt.push(q.values[j] + dq);
            let (p, dev) = dressed_curve_point(&et);
            sphere_deviation = sphere_deviation.max(dev);
            eta.push(p);
        }
        // Closure: carry both frames one more cell to x = 2π.
        let end_real = frame_past_last_sample(spec, er, q, 8);
        let end_alpha = frame_past_last_sample(spec, ea, q, 8);
        let (_, et_end, _) = dress(&end_real, &end_alpha)?;
        let (g_end, _) = dressed_curve_point(&et_end);
        closure_deviation.push(g_end.distance(eta[0]));

        let shifted = if shift_c0 == 0.0 { eta } else { spec.shift_points(&eta, 2.0 * shift_c0 * er.t) };
        let (curve, _) = CurveState::projected(grid, shifted, er.t);
        curves.push(curve);
        q_tilde.push(InvariantField::new(grid, qt, er.t, q.sigma));
    }

    let nls_residual = nls_residual_fd(&q_tilde);
    let pde = if curves.len() >= 3 { pde_residual(spec, &curves, XDerivative::FiniteDifference) } else { 0.0 };
    let _ = lift;
    Ok(BtResult {
        q_tilde,
        curves,
        sphere_deviation,
        projector_defect,
        nls_residual,
        pde_residual: pde,
        closure_deviation,
    })
}

/// `‖q_t − iσ(q_xx + 2|q|²q)‖_sup` with central differences in `t` and
/// fourth-order central differences in `x` on interior samples.
pub fn nls_residual_fd(fields: &[InvariantField]) -> f64 {
    if fields.len() < 3 {
        return 0.0;
    }
    let n = fields[0].values.len();
    let h = fields[0].grid.h();
    let mut worst: f64 = 0.0;
    for k in 1..fields.len() - 1 {
        let dt = fields[k + 1].t - fields[k - 1].t;
        let sigma = fields[k].sigma;
        let v = &fields[k].values;
        let re: Vec<SpherePoint> = v.iter().map(|z| SpherePoint::new(z.re, z.im, 0.0)).collect();
        for j in 2..n - 2 {
            let d2 = fd2(&re, j, h);
            let qxx = C64::new(d2.r1, d2.r2);
            let qt = (fields[k + 1].values[j] - fields[k - 1].values[j]) / dt;
            let rhs = C64::new(0.0, sigma) * (qxx + 2.0 * v[j].norm_sqr() * v[j]);
            worst = worst.max((qt - rhs).norm());
        }
    }
    worst
}

/// First `x`-derivative of a complex field by fourth-order central
/// differences on interior samples (zero at the two samples on each end).
pub fn derivative_fd(field: &InvariantField) -> Vec<C64> {
    let n = field.values.len();
    let h = field.grid.h();
    let re: Vec<SpherePoint> = field.values.iter().map(|z| SpherePoint::new(z.re, z.im, 0.0)).collect();
    (0..n)
        .map(|j| {
            if j < 2 || j + 2 >= n {
                ZERO
            } else {
                let d = fd1(&re, j, h);
                C64::new(d.r1, d.r2)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::LibraryCurve;
    use crate::frame::{evolve_frame, FrameOptions};
    use crate::lift::{lift_curve, LiftOptions};
    use crate::nls::{nls_solve, NlsOptions};
    use crate::spectral::PeriodicGrid;
    use crate::su2::{basis_b, exp_traceless};
    use proptest::prelude::*;

    fn spec(n: usize) -> Spectral {
        Spectral::new(PeriodicGrid::new(n).unwrap())
    }

    #[test]
    fn params_normalize_line() {
        let p = BtParams::new(C64::new(1.0, -1.0), [C64::new(0.0, 2.0), C64::new(2.0, 0.0)], 0.0).unwrap();
        assert!((p.v[0] - C64::new(2f64.sqrt() / 2.0, 0.0)).norm() < 1e-15);
        assert!((p.v[1] - C64::new(0.0, -(2f64.sqrt()) / 2.0)).norm() < 1e-15);
        assert!(BtParams::new(C64::new(1.0, 0.0), [ONE, ZERO], 0.0).is_err());
    }

    #[test]
    fn diagonal_factor() {
        let alpha = C64::new(1.0, -1.0);
        let pi = Projector::onto([ONE, ZERO]);
        let k = simple_factor(alpha, &pi, ZERO).unwrap().m;
        // 1 + (α − ᾱ)/(0 − α) = 1 + (−2i)/(−1 + i) = i.
        let expected = Mat2::diag(ONE, C64::new(0.0, 1.0));
        assert!((k - expected).norm() < 1e-15);
    }

    #[test]
    fn pole_hit() {
        let alpha = C64::new(0.5, 2.0);
        let pi = Projector::onto([ONE, ONE]);
        assert!(matches!(simple_factor(alpha, &pi, alpha), Err(Error::PoleHit)));
    }

    #[test]
    fn factor_is_unitary_on_real_axis() {
        let alpha = C64::new(1.0, -1.0);
        let pi = Projector::onto([ONE, C64::new(0.0, 1.0)]);
        let k = simple_factor(alpha, &pi, C64::new(0.3, 0.0)).unwrap().m;
        assert!(k.unitarity_deviation() < 1e-14);
    }

    proptest! {
        #[test]
        fn factor_inverse(
            ar in -2.0f64..2.0, ai in 0.1f64..2.0, neg in any::<bool>(),
            v0 in -1.0f64..1.0, v1 in -1.0f64..1.0, v2 in -1.0f64..1.0, v3 in -1.0f64..1.0,
            lr in -3.0f64..3.0, li in -3.0f64..3.0,
        ) {
            let alpha = C64::new(ar, if neg { -ai } else { ai });
            let v = [C64::new(v0, v1), C64::new(v2 + 1.5, v3)];
            let pi = Projector::onto(v);
            let lambda = C64::new(lr, li);
            prop_assume!((lambda - alpha).norm() > 1e-3 && (lambda - alpha.conj()).norm() > 1e-3);
            prop_assert!(pi.defect() < 1e-12);
            let k = simple_factor(alpha, &pi, lambda).unwrap().m;
            let ki = simple_factor_inverse(alpha, &pi, lambda).unwrap().m;
            prop_assert!(((k * ki) - Mat2::identity()).norm() < 1e-12 * (1.0 + k.norm() * ki.norm()));
        }
    }

    #[test]
    fn vacuum_frames_are_exponentials() {
        let s = spec(256);
        let lift = lift_curve(&LibraryCurve::FixedPoint.sample(s.grid()), &s, &LiftOptions::default()).unwrap();
        let q0 = InvariantField::new(s.grid(), lift.q0_tilde.clone(), 0.0, 1.0);
        let traj = nls_solve(&s, &q0, 0.2, 0.01, &NlsOptions::default()).unwrap();
        let alpha = C64::new(0.5, 0.7);
        let frames = frame_at_complex_lambda(&s, &lift, &traj, alpha, 5).unwrap();
        for f in &frames {
            for (j, e) in f.frames.iter().enumerate() {
                let x = s.grid().x(j);
                let exact = exp_traceless(&basis_a().scale(alpha * x + alpha * alpha * f.t));
                assert!((e.m - exact).norm() < 1e-9 * exact.norm(), "{:e}", (e.m - exact).norm());
            }
        }
    }

    fn great_circle(
        n: usize,
        t: f64,
        dt: f64,
    ) -> (Spectral, LiftResult, NlsTrajectory) {
        let s = spec(n);
        let lift = lift_curve(&LibraryCurve::GreatCircle.sample(s.grid()), &s, &LiftOptions::default()).unwrap();
        let q0 = InvariantField::new(s.grid(), lift.q0_tilde.clone(), 0.0, 1.0);
        let traj = nls_solve(&s, &q0, t, dt, &NlsOptions::default()).unwrap();
        (s, lift, traj)
    }

    #[test]
    fn great_circle_complex_frames_match_closed_form() {
        let (s, lift, traj) = great_circle(256, 0.5, 1e-3);
        let alpha = C64::new(1.0, -1.0);
        let frames = frame_at_complex_lambda(&s, &lift, &traj, alpha, 100).unwrap();
        let a = basis_a();
        let m = a.scale(alpha * alpha - 0.5) - basis_b().scale(alpha);
        for f in &frames {
            let t = f.t;
            let e0 = lift.frame_tilde[0].m * exp_traceless(&(a.scale_re(0.5) + m).scale_re(t))
                * exp_traceless(&a.scale_re(-0.5 * t));
            let q = C64::from_polar(0.5, 0.5 * t) * -1.0;
            let ax = a.scale(alpha) + potential(q);
            for (j, e) in f.frames.iter().enumerate() {
                let exact = e0 * exp_traceless(&ax.scale_re(s.grid().x(j)));
                assert!((e.m - exact).norm() < 1e-6 * (1.0 + exact.norm()), "t = {t}, j = {j}: {:e}", (e.m - exact).norm());
                assert!((e.det() - ONE).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn vacuum_with_diagonal_line_is_fixed() {
        let s = spec(32);
        let lift = lift_curve(&LibraryCurve::FixedPoint.sample(s.grid()), &s, &LiftOptions::default()).unwrap();
        let q0 = InvariantField::new(s.grid(), lift.q0_tilde.clone(), 0.0, 1.0);
        let traj = nls_solve(&s, &q0, 0.05, 0.01, &NlsOptions::default()).unwrap();
        let params = BtParams::new(C64::new(1.0, -1.0), [ONE, ZERO], 0.0).unwrap();
        let er = evolve_frame(&s, &lift, &traj, &FrameOptions::default()).unwrap();
        let ea = frame_at_complex_lambda(&s, &lift, &traj, params.alpha, 1).unwrap();
        let bt = bt_apply(&s, &lift, &traj, &er, &ea, &params).unwrap();
        for f in &bt.q_tilde {
            assert!(f.values.iter().all(|z| z.norm() < 1e-14));
        }
    }

    #[test]
    fn great_circle_soliton() {
        let (s, lift, traj) = great_circle(256, 0.2, 1e-3);
        let params = BtParams::new(C64::new(1.0, -1.0), [ONE, C64::new(0.0, 1.0)], -lift.c0).unwrap();
        let er = evolve_frame(&s, &lift, &traj, &FrameOptions::default()).unwrap();
        let ea = frame_at_complex_lambda(&s, &lift, &traj, params.alpha, 1).unwrap();
        let bt = bt_apply(&s, &lift, &traj, &er, &ea, &params).unwrap();
        assert!(bt.projector_defect < 1e-8);
        assert!(bt.sphere_deviation < 1e-5);
        assert!(bt.nls_residual < 1e-3, "{:e}", bt.nls_residual);
        for (f, q) in bt.q_tilde.iter().zip(traj.fields.iter().step_by(2)) {
            for (a, b) in f.values.iter().zip(&q.values) {
                assert!((a - b).norm() <= params.alpha.im.abs() + 1e-12);
            }
        }
        // The transformed invariant is genuinely new.
        let diff = bt.q_tilde[0].values.iter().zip(&traj.fields[0].values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff > 1e-2);
        assert!(bt.closure_deviation.iter().all(|d| d.is_finite()));
    }
}
