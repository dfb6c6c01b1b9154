//! Dense elimination generic over f64 and binary multiprecision floats.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub type Mp = FBig<HalfEven, 2>;

pub trait Real: Clone + PartialOrd + std::fmt::Debug
where
    for<'a> &'a Self: Add<&'a Self, Output = Self>
        + Sub<&'a Self, Output = Self>
        + Mul<&'a Self, Output = Self>
        + Div<&'a Self, Output = Self>
        + Neg<Output = Self>,
{
    /// Converts exactly (binary value of `x`); `bits` is the working precision.
    fn from_f64(x: f64, bits: usize) -> Self;
    fn to_f64(&self) -> f64;
    fn exp(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn abs(&self) -> Self {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }
    fn is_negative(&self) -> bool;
    /// Natural log of |x| as an f64 (used only for bookkeeping).
    fn ln_abs_f64(&self) -> f64;
}

impl Real for f64 {
    fn from_f64(x: f64, _bits: usize) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn is_negative(&self) -> bool {
        *self < 0.0
    }
    fn ln_abs_f64(&self) -> f64 {
        f64::abs(*self).ln()
    }
}

impl Real for Mp {
    fn from_f64(x: f64, bits: usize) -> Self {
        Mp::try_from(x)
            .expect("finite value")
            .with_precision(bits)
            .value()
    }
    fn to_f64(&self) -> f64 {
        FBig::to_f64(self).value()
    }
    fn exp(&self) -> Self {
        FBig::exp(self)
    }
    fn is_zero(&self) -> bool {
        self.repr().is_zero()
    }
    fn is_negative(&self) -> bool {
        self < &Mp::ZERO
    }
    fn ln_abs_f64(&self) -> f64 {
        // Split off the binary exponent so huge or tiny magnitudes stay representable.
        let r = self.repr();
        let digits = r.digits() as isize;
        let exp = r.exponent() + digits;
        let m = Mp::from_parts(r.significand().clone(), -digits);
        Real::to_f64(&m).abs().ln() + exp as f64 * std::f64::consts::LN_2
    }
}

/// LU factorisation with partial pivoting, row-major storage.
#[derive(Debug, Clone)]
pub struct Lu<T: Real>
where
    for<'a> &'a T: Add<&'a T, Output = T>
        + Sub<&'a T, Output = T>
        + Mul<&'a T, Output = T>
        + Div<&'a T, Output = T>
        + Neg<Output = T>,
{
    n: usize,
    a: Vec<T>,
    perm: Vec<usize>,
    sign_flips: usize,
}

impl<T: Real> Lu<T>
where
    for<'a> &'a T: Add<&'a T, Output = T>
        + Sub<&'a T, Output = T>
        + Mul<&'a T, Output = T>
        + Div<&'a T, Output = T>
        + Neg<Output = T>,
{
    pub fn factor(n: usize, mut a: Vec<T>) -> Result<Self, String> {
        assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut flips = 0;
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best.is_zero() {
                return Err(format!("zero pivot in column {}", k));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                flips += 1;
            }
            let piv = a[k * n + k].clone();
            for i in k + 1..n {
                let l = &a[i * n + k] / &piv;
                if !l.is_zero() {
                    for j in k + 1..n {
                        let t = &l * &a[k * n + j];
                        a[i * n + j] = &a[i * n + j] - &t;
                    }
                }
                a[i * n + k] = l;
            }
        }
        Ok(Self {
            n,
            a,
            perm,
            sign_flips: flips,
        })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p].clone()).collect();
        for i in 0..n {
            for j in 0..i {
                let t = &self.a[i * n + j] * &y[j];
                y[i] = &y[i] - &t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = &self.a[i * n + j] * &y[j];
                y[i] = &y[i] - &t;
            }
            y[i] = &y[i] / &self.a[i * n + i];
        }
        y
    }

    /// (log|det|, sign of det)
    pub fn log_abs_det(&self) -> (f64, f64) {
        let mut s = if self.sign_flips % 2 == 0 { 1.0 } else { -1.0 };
        let mut l = 0.0;
        for i in 0..self.n {
            let d = &self.a[i * self.n + i];
            if d.is_negative() {
                s = -s;
            }
            l += d.ln_abs_f64();
        }
        (l, s)
    }
}

pub fn mp(x: f64, bits: usize) -> Mp {
    <Mp as Real>::from_f64(x, bits)
}
