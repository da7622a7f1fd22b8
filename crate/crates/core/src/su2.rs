//! The su(2)/SU(2) algebra every other module is built on.
//!
//! ℝ³ is identified with traceless skew-Hermitian 2×2 matrices through the
//! basis
//!
//! ```text
//! a = diag(i/2, -i/2),   b = [[0, 1/2], [-1/2, 0]],   c = [[0, i/2], [i/2, 0]]
//! ```
//!
//! so that `(r1, r2, r3) ↦ r1·a + r2·b + r3·c`. Under this map the matrix
//! commutator is the cross product and conjugation by a unitary matrix is a
//! rotation.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// A point of ℝ³. Points on the unit sphere are produced by
/// [`SpherePoint::normalized`] or checked with [`SpherePoint::sphere_deviation`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpherePoint {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl SpherePoint {
    pub const fn new(r1: f64, r2: f64, r3: f64) -> Self {
        Self { r1, r2, r3 }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.r1, self.r2, self.r3]
    }

    pub fn dot(self, o: Self) -> f64 {
        self.r1 * o.r1 + self.r2 * o.r2 + self.r3 * o.r3
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.r2 * o.r3 - self.r3 * o.r2,
            self.r3 * o.r1 - self.r1 * o.r3,
            self.r1 * o.r2 - self.r2 * o.r1,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Radial projection onto S². The zero vector maps to itself.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            self
        } else {
            self * (1.0 / n)
        }
    }

    /// `| |p|² − 1 |`.
    pub fn sphere_deviation(self) -> f64 {
        (self.dot(self) - 1.0).abs()
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.r1.is_finite() && self.r2.is_finite() && self.r3.is_finite()
    }
}

impl Add for SpherePoint {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.r1 + o.r1, self.r2 + o.r2, self.r3 + o.r3)
    }
}

impl AddAssign for SpherePoint {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for SpherePoint {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.r1 - o.r1, self.r2 - o.r2, self.r3 - o.r3)
    }
}

impl Neg for SpherePoint {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.r1, -self.r2, -self.r3)
    }
}

impl Mul<f64> for SpherePoint {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.r1 * s, self.r2 * s, self.r3 * s)
    }
}

/// A 2×2 complex matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const fn new(m00: C64, m01: C64, m10: C64, m11: C64) -> Self {
        Self([[m00, m01], [m10, m11]])
    }

    pub const fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn zero() -> Self {
        Self::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub fn diag(d0: C64, d1: C64) -> Self {
        Self::new(d0, ZERO, ZERO, d1)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Self::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn det(&self) -> C64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Inverse by the adjugate formula; the caller guarantees `det ≠ 0`.
    pub fn inverse(&self) -> Self {
        let m = &self.0;
        let d = self.det();
        Self::new(m[1][1] / d, -m[0][1] / d, -m[1][0] / d, m[0][0] / d)
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Self::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        let m = &self.0;
        Self::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn commutator(&self, o: &Self) -> Self {
        *self * *o - *o * *self
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `(X − X*)/2`.
    pub fn skew_hermitian_part(&self) -> Self {
        (*self - self.adjoint()).scale_re(0.5)
    }

    /// `(X + X*)/2`.
    pub fn hermitian_part(&self) -> Self {
        (*self + self.adjoint()).scale_re(0.5)
    }

    /// `‖M*M − I‖_F`.
    pub fn unitarity_deviation(&self) -> f64 {
        (self.adjoint() * *self - Self::identity()).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Nearest element of SU(2) in the Frobenius norm.
    ///
    /// SU(2) is the unit sphere of the real subspace `{[[α, β], [−β̄, ᾱ]]}`, so
    /// the nearest point is the orthogonal projection onto that subspace,
    /// rescaled to unit quaternion norm.
    pub fn project_su2(&self) -> Self {
        let m = &self.0;
        let alpha = (m[0][0] + m[1][1].conj()) * 0.5;
        let beta = (m[0][1] - m[1][0].conj()) * 0.5;
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        let (alpha, beta) = (alpha / n, beta / n);
        Self::new(alpha, beta, -beta.conj(), alpha.conj())
    }

    /// Rescale to unit determinant (principal square root of `det`).
    pub fn normalize_det(&self) -> Self {
        self.scale(ONE / self.det().sqrt())
    }
}

impl Index<(usize, usize)> for Mat2 {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.0[r][c]
    }
}

impl IndexMut<(usize, usize)> for Mat2 {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.0[r][c]
    }
}

impl Add for Mat2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (a, b) = (&self.0, &o.0);
        Self::new(a[0][0] + b[0][0], a[0][1] + b[0][1], a[1][0] + b[1][0], a[1][1] + b[1][1])
    }
}

impl Sub for Mat2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let (a, b) = (&self.0, &o.0);
        Self::new(a[0][0] - b[0][0], a[0][1] - b[0][1], a[1][0] - b[1][0], a[1][1] - b[1][1])
    }
}

impl Neg for Mat2 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale_re(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (&self.0, &o.0);
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Mul<[C64; 2]> for Mat2 {
    type Output = [C64; 2];
    fn mul(self, v: [C64; 2]) -> [C64; 2] {
        let a = &self.0;
        [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
    }
}

/// The basis matrix `a = diag(i/2, −i/2)`.
pub fn basis_a() -> Mat2 {
    Mat2::diag(I * 0.5, -I * 0.5)
}

/// The basis matrix `b = [[0, 1/2], [−1/2, 0]]`.
pub fn basis_b() -> Mat2 {
    Mat2::new(ZERO, ONE * 0.5, -ONE * 0.5, ZERO)
}

/// The basis matrix `c = [[0, i/2], [i/2, 0]]`.
pub fn basis_c() -> Mat2 {
    Mat2::new(ZERO, I * 0.5, I * 0.5, ZERO)
}

/// An element of su(2), stored as its coefficient triple in `{a, b, c}`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AlgebraElement {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl AlgebraElement {
    pub const fn new(r1: f64, r2: f64, r3: f64) -> Self {
        Self { r1, r2, r3 }
    }

    pub fn point(self) -> SpherePoint {
        SpherePoint::new(self.r1, self.r2, self.r3)
    }

    /// `r1·a + r2·b + r3·c`.
    pub fn matrix(self) -> Mat2 {
        Mat2::new(
            C64::new(0.0, 0.5 * self.r1),
            C64::new(0.5 * self.r2, 0.5 * self.r3),
            C64::new(-0.5 * self.r2, 0.5 * self.r3),
            C64::new(0.0, -0.5 * self.r1),
        )
    }

    /// Coefficients of the traceless skew-Hermitian part of `m`, without
    /// membership checks.
    pub fn from_matrix_projected(m: &Mat2) -> Self {
        let s = m.skew_hermitian_part();
        let d = (s[(0, 0)] - s[(1, 1)]) * 0.5;
        Self::new(2.0 * d.im, 2.0 * s[(0, 1)].re, 2.0 * s[(0, 1)].im)
    }

    /// Coefficients of `m`, failing with [`Error::NotInAlgebra`] when the
    /// trace or the Hermitian part exceeds 1e−10.
    pub fn from_matrix(m: &Mat2) -> Result<Self> {
        let trace = m.trace().norm();
        let hermitian = m.hermitian_part().norm();
        if trace > 1e-10 || hermitian > 1e-10 {
            return Err(Error::NotInAlgebra { trace, hermitian });
        }
        Ok(Self::from_matrix_projected(m))
    }

    pub fn norm(self) -> f64 {
        self.point().norm()
    }
}

impl Add for AlgebraElement {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.r1 + o.r1, self.r2 + o.r2, self.r3 + o.r3)
    }
}

impl Mul<f64> for AlgebraElement {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.r1 * s, self.r2 * s, self.r3 * s)
    }
}

impl Neg for AlgebraElement {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

/// A 2×2 frame matrix. `unitary` marks genuine SU(2) elements; complexified
/// SL(2,ℂ) frames (complex spectral parameter) carry `unitary = false`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    pub m: Mat2,
    pub unitary: bool,
}

impl GroupElement {
    pub fn unitary(m: Mat2) -> Self {
        Self { m, unitary: true }
    }

    pub fn complexified(m: Mat2) -> Self {
        Self { m, unitary: false }
    }

    pub fn identity() -> Self {
        Self::unitary(Mat2::identity())
    }

    pub fn inverse(&self) -> Self {
        let m = if self.unitary { self.m.adjoint() } else { self.m.inverse() };
        Self { m, unitary: self.unitary }
    }

    pub fn det(&self) -> C64 {
        self.m.det()
    }

    pub fn compose(&self, o: &Self) -> Self {
        Self { m: self.m * o.m, unitary: self.unitary && o.unitary }
    }

    /// The rotation `v ↦ g v g⁻¹` of ℝ³, as a row-major 3×3 matrix.
    pub fn rotation(&self) -> [[f64; 3]; 3] {
        let cols = [
            conjugate(self, AlgebraElement::new(1.0, 0.0, 0.0)),
            conjugate(self, AlgebraElement::new(0.0, 1.0, 0.0)),
            conjugate(self, AlgebraElement::new(0.0, 0.0, 1.0)),
        ];
        let mut r = [[0.0; 3]; 3];
        for (j, c) in cols.iter().enumerate() {
            r[0][j] = c.r1;
            r[1][j] = c.r2;
            r[2][j] = c.r3;
        }
        r
    }
}

/// `(r1, r2, r3) ↦ r1·a + r2·b + r3·c`.
pub fn to_algebra(p: SpherePoint) -> AlgebraElement {
    AlgebraElement::new(p.r1, p.r2, p.r3)
}

/// Inverse of [`to_algebra`] on matrices.
pub fn from_algebra(m: &Mat2) -> Result<SpherePoint> {
    AlgebraElement::from_matrix(m).map(AlgebraElement::point)
}

/// Matrix commutator `XY − YX`.
pub fn bracket(x: AlgebraElement, y: AlgebraElement) -> AlgebraElement {
    AlgebraElement::from_matrix_projected(&x.matrix().commutator(&y.matrix()))
}

/// `g X g⁻¹` for a unitary `g`.
pub fn conjugate(g: &GroupElement, x: AlgebraElement) -> AlgebraElement {
    debug_assert!(g.unitary, "conjugate expects an SU(2) element");
    AlgebraElement::from_matrix_projected(&(g.m * x.matrix() * g.inverse().m))
}

/// Closed-form exponential `cos(|v|/2)·I + sin(|v|/2)/(|v|/2)·X`.
pub fn exp_algebra(x: AlgebraElement) -> GroupElement {
    let theta = x.norm();
    let half = 0.5 * theta;
    let (c, s) = if theta < 1e-6 {
        let h2 = half * half;
        (
            1.0 - h2 / 2.0 + h2 * h2 / 24.0 - h2 * h2 * h2 / 720.0,
            1.0 - h2 / 6.0 + h2 * h2 / 120.0 - h2 * h2 * h2 / 5040.0,
        )
    } else {
        (half.cos(), half.sin() / half)
    };
    GroupElement::unitary(Mat2::identity().scale_re(c) + x.matrix().scale_re(s))
}

/// `exp(θ·a) = diag(e^{iθ/2}, e^{−iθ/2})`, the one-parameter subgroup used by
/// every gauge and holonomy step.
pub fn exp_a(theta: f64) -> Mat2 {
    Mat2::diag(C64::from_polar(1.0, 0.5 * theta), C64::from_polar(1.0, -0.5 * theta))
}

/// Exponential of a traceless complex 2×2 matrix:
/// `exp(X) = cosh(s)·I + sinh(s)/s·X` with `s² = −det X`.
pub fn exp_traceless(x: &Mat2) -> Mat2 {
    let s2 = -x.det();
    let s = s2.sqrt();
    let (ch, sh) = if s.norm() < 1e-6 {
        (ONE + s2 / 2.0 + s2 * s2 / 24.0, ONE + s2 / 6.0 + s2 * s2 / 120.0)
    } else {
        (s.cosh(), s.sinh() / s)
    };
    Mat2::identity().scale(ch) + x.scale(sh)
}

/// The SU(2) element whose adjoint action is the rotation `r` (row major,
/// `r ∈ SO(3)`), with the sign fixed by a non-negative scalar part.
pub fn su2_from_rotation(r: &[[f64; 3]; 3]) -> GroupElement {
    // Shepperd's method: pick the largest diagonal combination for stability.
    let tr = r[0][0] + r[1][1] + r[2][2];
    let (w, x, y, z) = if tr > 0.0 {
        let s = (tr + 1.0).sqrt() * 2.0;
        (0.25 * s, (r[2][1] - r[1][2]) / s, (r[0][2] - r[2][0]) / s, (r[1][0] - r[0][1]) / s)
    } else if r[0][0] > r[1][1] && r[0][0] > r[2][2] {
        let s = (1.0 + r[0][0] - r[1][1] - r[2][2]).sqrt() * 2.0;
        ((r[2][1] - r[1][2]) / s, 0.25 * s, (r[0][1] + r[1][0]) / s, (r[0][2] + r[2][0]) / s)
    } else if r[1][1] > r[2][2] {
        let s = (1.0 + r[1][1] - r[0][0] - r[2][2]).sqrt() * 2.0;
        ((r[0][2] - r[2][0]) / s, (r[0][1] + r[1][0]) / s, 0.25 * s, (r[1][2] + r[2][1]) / s)
    } else {
        let s = (1.0 + r[2][2] - r[0][0] - r[1][1]).sqrt() * 2.0;
        ((r[1][0] - r[0][1]) / s, (r[0][2] + r[2][0]) / s, (r[1][2] + r[2][1]) / s, 0.25 * s)
    };
    let sign = if w < 0.0 { -1.0 } else { 1.0 };
    let n = (w * w + x * x + y * y + z * z).sqrt() * sign;
    // Rotation by θ about n̂ is exp(θ·n̂) = cos(θ/2) I + sin(θ/2)·(2 n̂ in su(2)).
    let m = Mat2::identity().scale_re(w / n)
        + AlgebraElement::new(2.0 * x / n, 2.0 * y / n, 2.0 * z / n).matrix();
    GroupElement::unitary(m.project_su2())
}

/// An SU(2) element rotating the unit vector `from` onto the unit vector `to`
/// along the great circle joining them.
pub fn rotation_between(from: SpherePoint, to: SpherePoint) -> GroupElement {
    let from = from.normalized();
    let to = to.normalized();
    let cos = from.dot(to).clamp(-1.0, 1.0);
    let mut axis = from.cross(to);
    if axis.norm() < 1e-12 {
        if cos > 0.0 {
            return GroupElement::identity();
        }
        // Antipodal: any axis orthogonal to `from` works.
        let trial = if from.r1.abs() < 0.9 {
            SpherePoint::new(1.0, 0.0, 0.0)
        } else {
            SpherePoint::new(0.0, 1.0, 0.0)
        };
        axis = from.cross(trial);
    }
    let angle = cos.acos();
    exp_algebra(to_algebra(axis.normalized() * angle))
}
