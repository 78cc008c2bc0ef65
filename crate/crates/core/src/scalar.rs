//! Scalar fields for matrix entries: fast double-precision complex numbers,
//! and exact complex rationals for oracle comparisons.

use crate::rational::{to_f64, Q};
use num::complex::Complex;
use num::{One, Zero};
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

pub type C64 = Complex<f64>;
pub type ExactComplex = Complex<Q>;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn from_q(x: &Q) -> Self;
    fn to_c64(&self) -> C64;
    fn modulus(&self) -> f64 {
        self.to_c64().norm()
    }
}

impl Scalar for C64 {
    fn from_q(x: &Q) -> Self {
        C64::new(to_f64(x), 0.0)
    }
    fn to_c64(&self) -> C64 {
        *self
    }
    fn modulus(&self) -> f64 {
        self.norm()
    }
}

impl Scalar for ExactComplex {
    fn from_q(x: &Q) -> Self {
        Complex::new(x.clone(), Q::zero())
    }
    fn to_c64(&self) -> C64 {
        C64::new(to_f64(&self.re), to_f64(&self.im))
    }
}
