//! Scalar traits the whole crate is generic over.
//!
//! `Real` is the floating-point type used for geometry, quadrature and real
//! fields (`f32` or `f64`). `Field` is the entry type of sparse matrices and
//! coefficient vectors, which is either a `Real` or a `Complex<Real>`.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive, Zero};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::Neg;

/// Real floating-point scalar.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
    + Field<Real = Self>
{
    /// Machine epsilon, as a plain constant.
    const EPS: f64;

    /// Converts an `f64` literal. Never fails for `f32`/`f64`.
    fn lit(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64;
}

impl Real for f64 {
    const EPS: f64 = f64::EPSILON;

    #[inline(always)]
    fn lit(v: f64) -> Self {
        v
    }

    #[inline(always)]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

impl Real for f32 {
    const EPS: f64 = f32::EPSILON as f64;

    #[inline(always)]
    fn lit(v: f64) -> Self {
        v as f32
    }

    #[inline(always)]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

/// Entry type of matrices and coefficient vectors: a real or a complex number.
pub trait Field: Copy + NumAssign + Neg<Output = Self> + Sum + Default + Debug + Send + Sync + 'static {
    type Real: Real;

    const IS_COMPLEX: bool;

    fn from_real(r: Self::Real) -> Self;
    fn conj(self) -> Self;
    fn re(self) -> Self::Real;
    fn im(self) -> Self::Real;
    fn modulus_sqr(self) -> Self::Real;

    #[inline(always)]
    fn modulus(self) -> Self::Real {
        self.modulus_sqr().sqrt()
    }

    #[inline(always)]
    fn scale(self, s: Self::Real) -> Self {
        self * Self::from_real(s)
    }

    fn is_finite_value(self) -> bool {
        self.re().is_finite() && self.im().is_finite()
    }
}

macro_rules! impl_real_field {
    ($t:ty) => {
        impl Field for $t {
            type Real = $t;
            const IS_COMPLEX: bool = false;

            #[inline(always)]
            fn from_real(r: $t) -> Self {
                r
            }
            #[inline(always)]
            fn conj(self) -> Self {
                self
            }
            #[inline(always)]
            fn re(self) -> $t {
                self
            }
            #[inline(always)]
            fn im(self) -> $t {
                0.0
            }
            #[inline(always)]
            fn modulus_sqr(self) -> $t {
                self * self
            }
            #[inline(always)]
            fn modulus(self) -> $t {
                self.abs()
            }
        }
    };
}

impl<T: Real> Field for Complex<T> {
    type Real = T;
    const IS_COMPLEX: bool = true;

    #[inline(always)]
    fn from_real(r: T) -> Self {
        Complex::new(r, T::zero())
    }
    #[inline(always)]
    fn conj(self) -> Self {
        Complex::new(self.re, -self.im)
    }
    #[inline(always)]
    fn re(self) -> T {
        self.re
    }
    #[inline(always)]
    fn im(self) -> T {
        self.im
    }
    #[inline(always)]
    fn modulus_sqr(self) -> T {
        self.re * self.re + self.im * self.im
    }
    #[inline(always)]
    fn scale(self, s: T) -> Self {
        Complex::new(self.re * s, self.im * s)
    }
}

impl_real_field!(f32);
impl_real_field!(f64);

/// Euclidean norm of a coefficient vector.
pub fn norm2<E: Field>(v: &[E]) -> E::Real {
    v.iter()
        .map(|x| x.modulus_sqr())
        .fold(E::Real::zero(), |a, b| a + b)
        .sqrt()
}

/// Hermitian dot product `Σ conj(a_i) b_i`.
pub fn dot<E: Field>(a: &[E], b: &[E]) -> E {
    a.iter().zip(b).map(|(&x, &y)| x.conj() * y).sum()
}

/// `y += alpha * x`
pub fn axpy<E: Field>(alpha: E, x: &[E], y: &mut [E]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
