//! Exact dyadic rationals `num / 2^k`.
//!
//! Parity coefficients of an `n`-bit function and the GHZ angle increments
//! derived from them (in units of π) are all dyadic, so this small type
//! keeps those computations free of floating point.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A rational number whose denominator is a power of two.
///
/// Always stored in lowest terms: either the numerator is odd or the
/// exponent is zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(i64, i64)", into = "(i64, i64)")]
pub struct Dyadic {
    num: i64,
    log2_den: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, log2_den: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, log2_den: 0 };

    pub fn new(num: i64, log2_den: u32) -> Self {
        Self { num, log2_den }.normalized()
    }

    pub fn integer(num: i64) -> Self {
        Self { num, log2_den: 0 }
    }

    /// Builds `num / den`, failing unless `den` is a positive power of two.
    pub fn from_fraction(num: i64, den: i64) -> Result<Self> {
        if den <= 0 || (den & (den - 1)) != 0 {
            return Err(Error::InvalidParameter(format!(
                "denominator {den} is not a positive power of two"
            )));
        }
        Ok(Self::new(num, den.trailing_zeros()))
    }

    fn normalized(mut self) -> Self {
        if self.num == 0 {
            self.log2_den = 0;
            return self;
        }
        let shift = self.num.trailing_zeros().min(self.log2_den);
        self.num >>= shift;
        self.log2_den -= shift;
        self
    }

    pub fn numerator(self) -> i64 {
        self.num
    }

    pub fn denominator(self) -> i64 {
        1i64 << self.log2_den
    }

    pub fn log2_denominator(self) -> u32 {
        self.log2_den
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    /// Reduces modulo 2 into `[0, 2)`.
    pub fn rem_two(self) -> Self {
        let modulus = 2i64 << self.log2_den;
        Self::new(self.num.rem_euclid(modulus), self.log2_den)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / (self.log2_den as f64).exp2()
    }

    fn aligned(self, other: Self) -> (i64, i64, u32) {
        let den = self.log2_den.max(other.log2_den);
        (
            self.num << (den - self.log2_den),
            other.num << (den - other.log2_den),
            den,
        )
    }
}

impl TryFrom<(i64, i64)> for Dyadic {
    type Error = Error;
    fn try_from((num, den): (i64, i64)) -> Result<Self> {
        Self::from_fraction(num, den)
    }
}

impl From<Dyadic> for (i64, i64) {
    fn from(d: Dyadic) -> Self {
        (d.numerator(), d.denominator())
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Self) -> Self {
        let (a, b, den) = self.aligned(rhs);
        Dyadic::new(a + b, den)
    }
}

impl AddAssign for Dyadic {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Self {
        Dyadic {
            num: -self.num,
            log2_den: self.log2_den,
        }
    }
}

impl Mul<i64> for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: i64) -> Self {
        Dyadic::new(self.num * rhs, self.log2_den)
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(*other);
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.log2_den == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.denominator())
        }
    }
}
