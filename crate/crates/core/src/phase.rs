//! Phase-space and 2x2 complex linear-algebra primitives.
//!
//! Everything downstream is built from three small pieces:
//!
//! * the symplectic form `Omega = [[0, 1], [-1, 0]]`,
//! * the Hermitian form `h_Omega(a, b) = (1/2i) a^dag Omega b`, which plays
//!   the role of an inner product for frame vectors (`h_Omega(a, a) = 1`
//!   normalises a frame, and `a, conj(a)` then span C^2),
//! * closed-form exponentials of 2x2 complex matrices, which realise the
//!   linearised flow `S(t) = exp(t Omega K'')`.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::Num;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Default tolerance on `|h_Omega(a,a) - 1|` for frame-normalisation checks.
pub const DEFAULT_FRAME_TOL: f64 = 1e-8;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum PhaseError {
    /// The expansion frame vector fails `h_Omega(a, a) = 1`.
    #[error("frame vector not normalised: |h_Omega(a,a) - 1| = {deviation:.3e}")]
    FrameNotNormalised { deviation: f64 },
}

/// A two-component column vector over `E` (real phase points, complex frame
/// vectors); components are indexed as position `q` and momentum `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec2<E> {
    pub q: E,
    pub p: E,
}

/// Real phase-space point `z = (q, p)`.
pub type PhasePoint<T> = Vec2<T>;
/// Complex frame vector `a = (a_q, a_p)`.
pub type ComplexVec2<T> = Vec2<Complex<T>>;

impl<E> Vec2<E> {
    pub const fn new(q: E, p: E) -> Self {
        Vec2 { q, p }
    }
}

impl<E: Copy + Num> Vec2<E> {
    pub fn zero() -> Self {
        Vec2::new(E::zero(), E::zero())
    }

    /// Bilinear dot product (no conjugation).
    pub fn dot(&self, other: &Self) -> E {
        self.q * other.q + self.p * other.p
    }

    pub fn scale(&self, s: E) -> Self {
        Vec2::new(self.q * s, self.p * s)
    }
}

impl<E: Copy + Num + Neg<Output = E>> Vec2<E> {
    /// `Omega v = (v_p, -v_q)`.
    pub fn omega(&self) -> Self {
        Vec2::new(self.p, -self.q)
    }
}

impl<T: Real> PhasePoint<T> {
    pub fn to_complex(&self) -> ComplexVec2<T> {
        Vec2::new(Complex::new(self.q, T::zero()), Complex::new(self.p, T::zero()))
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite()
    }

    pub fn norm(&self) -> T {
        (self.q * self.q + self.p * self.p).sqrt()
    }
}

impl<T: Real> ComplexVec2<T> {
    pub fn conj(&self) -> Self {
        Vec2::new(self.q.conj(), self.p.conj())
    }

    pub fn re(&self) -> PhasePoint<T> {
        Vec2::new(self.q.re, self.p.re)
    }

    pub fn im(&self) -> PhasePoint<T> {
        Vec2::new(self.q.im, self.p.im)
    }

    pub fn max_abs(&self) -> T {
        self.q.norm().max(self.p.norm())
    }
}

impl<E: Copy + Add<Output = E>> Add for Vec2<E> {
    type Output = Vec2<E>;
    fn add(self, rhs: Self) -> Self {
        Vec2::new(self.q + rhs.q, self.p + rhs.p)
    }
}

impl<E: Copy + Sub<Output = E>> Sub for Vec2<E> {
    type Output = Vec2<E>;
    fn sub(self, rhs: Self) -> Self {
        Vec2::new(self.q - rhs.q, self.p - rhs.p)
    }
}

impl<E: Copy + Neg<Output = E>> Neg for Vec2<E> {
    type Output = Vec2<E>;
    fn neg(self) -> Self {
        Vec2::new(-self.q, -self.p)
    }
}

/// 2x2 matrix over `E`, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2<E> {
    pub m: [[E; 2]; 2],
}

impl<E> Mat2<E> {
    pub const fn new(m00: E, m01: E, m10: E, m11: E) -> Self {
        Mat2 { m: [[m00, m01], [m10, m11]] }
    }
}

impl<E: Copy + Num + Neg<Output = E>> Mat2<E> {
    pub fn zero() -> Self {
        Mat2::new(E::zero(), E::zero(), E::zero(), E::zero())
    }

    pub fn identity() -> Self {
        Mat2::new(E::one(), E::zero(), E::zero(), E::one())
    }

    /// The symplectic form, rows `(0, 1)`, `(-1, 0)`.
    pub fn omega() -> Self {
        Mat2::new(E::zero(), E::one(), -E::one(), E::zero())
    }

    pub fn diag(d0: E, d1: E) -> Self {
        Mat2::new(d0, E::zero(), E::zero(), d1)
    }

    /// Outer product `u v^T` (no conjugation).
    pub fn outer(u: &Vec2<E>, v: &Vec2<E>) -> Self {
        Mat2::new(u.q * v.q, u.q * v.p, u.p * v.q, u.p * v.p)
    }

    pub fn transpose(&self) -> Self {
        Mat2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn trace(&self) -> E {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> E {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn scale(&self, s: E) -> Self {
        Mat2::new(self.m[0][0] * s, self.m[0][1] * s, self.m[1][0] * s, self.m[1][1] * s)
    }

    pub fn mul_vec(&self, v: &Vec2<E>) -> Vec2<E> {
        Vec2::new(
            self.m[0][0] * v.q + self.m[0][1] * v.p,
            self.m[1][0] * v.q + self.m[1][1] * v.p,
        )
    }

    /// Inverse by the adjugate; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.is_zero() {
            return None;
        }
        Some(Mat2::new(
            self.m[1][1] / d,
            -self.m[0][1] / d,
            -self.m[1][0] / d,
            self.m[0][0] / d,
        ))
    }

    pub fn symmetrize(&self) -> Self {
        let two = E::one() + E::one();
        Mat2::new(
            self.m[0][0],
            (self.m[0][1] + self.m[1][0]) / two,
            (self.m[0][1] + self.m[1][0]) / two,
            self.m[1][1],
        )
    }
}

impl<E: Copy + Add<Output = E>> Add for Mat2<E> {
    type Output = Mat2<E>;
    fn add(self, r: Self) -> Self {
        Mat2::new(
            self.m[0][0] + r.m[0][0],
            self.m[0][1] + r.m[0][1],
            self.m[1][0] + r.m[1][0],
            self.m[1][1] + r.m[1][1],
        )
    }
}

impl<E: Copy + Sub<Output = E>> Sub for Mat2<E> {
    type Output = Mat2<E>;
    fn sub(self, r: Self) -> Self {
        Mat2::new(
            self.m[0][0] - r.m[0][0],
            self.m[0][1] - r.m[0][1],
            self.m[1][0] - r.m[1][0],
            self.m[1][1] - r.m[1][1],
        )
    }
}

impl<E: Copy + Neg<Output = E>> Neg for Mat2<E> {
    type Output = Mat2<E>;
    fn neg(self) -> Self {
        Mat2::new(-self.m[0][0], -self.m[0][1], -self.m[1][0], -self.m[1][1])
    }
}

impl<E: Copy + Num> Mul for Mat2<E> {
    type Output = Mat2<E>;
    fn mul(self, r: Self) -> Self {
        Mat2::new(
            self.m[0][0] * r.m[0][0] + self.m[0][1] * r.m[1][0],
            self.m[0][0] * r.m[0][1] + self.m[0][1] * r.m[1][1],
            self.m[1][0] * r.m[0][0] + self.m[1][1] * r.m[1][0],
            self.m[1][0] * r.m[0][1] + self.m[1][1] * r.m[1][1],
        )
    }
}

impl<T: Real> Mat2<T> {
    pub fn to_complex(&self) -> Mat2<Complex<T>> {
        let c = |x: T| Complex::new(x, T::zero());
        Mat2::new(c(self.m[0][0]), c(self.m[0][1]), c(self.m[1][0]), c(self.m[1][1]))
    }

    pub fn max_abs(&self) -> T {
        self.m[0][0]
            .abs()
            .max(self.m[0][1].abs())
            .max(self.m[1][0].abs())
            .max(self.m[1][1].abs())
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (self.m[0][1] - self.m[1][0]).abs() <= tol * T::one().max(self.max_abs())
    }

    /// Symmetric positive definite test via leading minors.
    pub fn is_spd(&self, tol: T) -> bool {
        self.is_symmetric(tol) && self.m[0][0] > T::zero() && self.det() > T::zero()
    }

    /// Real matrix exponential `exp(t M)` through the complex closed form.
    pub fn exp_real(&self, t: T) -> Mat2<T> {
        self.to_complex().exp_scaled(t).re()
    }
}

impl<T: Real> Mat2<Complex<T>> {
    pub fn re(&self) -> Mat2<T> {
        Mat2::new(self.m[0][0].re, self.m[0][1].re, self.m[1][0].re, self.m[1][1].re)
    }

    pub fn im(&self) -> Mat2<T> {
        Mat2::new(self.m[0][0].im, self.m[0][1].im, self.m[1][0].im, self.m[1][1].im)
    }

    pub fn adjoint(&self) -> Self {
        Mat2::new(
            self.m[0][0].conj(),
            self.m[1][0].conj(),
            self.m[0][1].conj(),
            self.m[1][1].conj(),
        )
    }

    pub fn max_abs(&self) -> T {
        self.m[0][0]
            .norm()
            .max(self.m[0][1].norm())
            .max(self.m[1][0].norm())
            .max(self.m[1][1].norm())
    }

    /// `exp(t M)`.
    ///
    /// Closed form from the eigen-decomposition,
    /// `exp(A) = e^mu (cosh(d) I + sinh(d)/d (A - mu I))` with `mu = tr A / 2`
    /// and `d^2 = mu^2 - det A`; falls back to a scaled-and-squared Taylor
    /// series when the eigenvalue gap `2|d|` drops below `1e-8 ||A||`, where
    /// the eigen form loses accuracy.
    pub fn exp_scaled(&self, t: T) -> Self {
        let a = self.scale(Complex::new(t, T::zero()));
        let half = Complex::new(T::of(0.5), T::zero());
        let mu = a.trace() * half;
        let d2 = mu * mu - a.det();
        let d = d2.sqrt();
        let gap = (d.norm() + d.norm()).max(T::zero());
        let scale = a.max_abs().max(T::one() * T::epsilon());
        if gap <= T::of(1e-8) * scale {
            return a.exp_series();
        }
        let v = a - Mat2::diag(mu, mu);
        let cosh = d.cosh();
        let sinhc = d.sinh() / d;
        let emu = mu.exp();
        (Mat2::diag(cosh, cosh) + v.scale(sinhc)).scale(emu)
    }

    /// Scaling-and-squaring Taylor series; exact fallback for (near-)degenerate
    /// generators.
    fn exp_series(&self) -> Self {
        let mut s = 0u32;
        let mut norm = self.max_abs();
        while norm > T::of(0.5) {
            norm /= T::of(2.0);
            s += 1;
        }
        let pow = Complex::new(T::of(0.5).powi(s as i32), T::zero());
        let a = self.scale(pow);
        let mut term: Mat2<Complex<T>> = Mat2::identity();
        let mut sum = term;
        for k in 1..32 {
            let inv_k = Complex::new(T::one() / T::of(k as f64), T::zero());
            term = (term * a).scale(inv_k);
            sum = sum + term;
            if term.max_abs() < T::epsilon() {
                break;
            }
        }
        let mut out = sum;
        for _ in 0..s {
            out = out * out;
        }
        out
    }
}

/// The Hermitian form `h_Omega(a, b) = (1/2i) a^dag Omega b`.
///
/// Sesquilinear (conjugate-linear in `a`); `h_Omega(a, a)` is real for every
/// `a` and equals 1 on normalised frame vectors.
pub fn hermitian_form<T: Real>(a: &ComplexVec2<T>, b: &ComplexVec2<T>) -> Complex<T> {
    let num = a.q.conj() * b.p - a.p.conj() * b.q;
    num / Complex::new(T::zero(), T::of(2.0))
}

fn frame_deviation<T: Real>(a: &ComplexVec2<T>) -> T {
    (hermitian_form(a, a).re - T::one()).abs()
}

/// Expand `b` over the frame `{a, conj(a)}`:
/// `b = c_plus a + c_minus conj(a)` with
/// `(c_plus, c_minus) = (h_Omega(a, b), -h_Omega(conj(a), b))`.
pub fn expand_in_frame<T: Real>(
    b: &ComplexVec2<T>,
    a: &ComplexVec2<T>,
) -> Result<(Complex<T>, Complex<T>), PhaseError> {
    expand_in_frame_tol(b, a, T::of(DEFAULT_FRAME_TOL))
}

pub fn expand_in_frame_tol<T: Real>(
    b: &ComplexVec2<T>,
    a: &ComplexVec2<T>,
    tol: T,
) -> Result<(Complex<T>, Complex<T>), PhaseError> {
    let dev = frame_deviation(a);
    if dev > tol {
        return Err(PhaseError::FrameNotNormalised {
            deviation: dev.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok((hermitian_form(a, b), -hermitian_form(&a.conj(), b)))
}

/// `exp(t M)` for a complex 2x2 generator.
pub fn mat_exp_2x2<T: Real>(m: &Mat2<Complex<T>>, t: T) -> Mat2<Complex<T>> {
    m.exp_scaled(t)
}
