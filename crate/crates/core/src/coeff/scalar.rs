//! Exact coefficient fields.
//!
//! Everything above this module is generic over [`Scalar`]; the Weyl algebra
//! additionally needs the imaginary unit and asks for [`ComplexScalar`].

use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rational = BigRational;
pub type GaussianRational = Complex<BigRational>;

/// An exact field of coefficients.
///
/// Arithmetic goes through the `*_ref` methods so that generic code never has
/// to spell out higher-ranked bounds on `&Self` operators.
pub trait Scalar: Clone + fmt::Debug + PartialEq + Send + Sync + 'static + Zero + One {
    fn from_rational(q: Rational) -> Self;

    fn add_ref(&self, other: &Self) -> Self;
    fn sub_ref(&self, other: &Self) -> Self;
    fn mul_ref(&self, other: &Self) -> Self;
    fn neg_ref(&self) -> Self;

    /// Multiplicative inverse, `None` for zero.
    fn inv(&self) -> Option<Self>;

    /// The imaginary unit if the field contains one.
    fn imaginary_unit() -> Option<Self>;

    /// Canonical text, e.g. `-3/2`, `1/2-3/4*i`, `-i`.
    fn canonical(&self) -> String;

    /// True when the canonical text is a sum (needs parentheses as a factor).
    fn is_compound(&self) -> bool;

    fn from_i64(n: i64) -> Self {
        Self::from_rational(Rational::from_integer(BigInt::from(n)))
    }

    fn from_ratio(n: i64, d: i64) -> Self {
        Self::from_rational(Rational::new(BigInt::from(n), BigInt::from(d)))
    }

    fn add_assign_ref(&mut self, other: &Self) {
        *self = self.add_ref(other);
    }

    fn is_minus_one(&self) -> bool {
        self.add_ref(&Self::one()).is_zero()
    }
}

/// A field containing `i` with `i² = -1`.
pub trait ComplexScalar: Scalar {
    fn i() -> Self {
        Self::imaginary_unit().expect("complex scalar without imaginary unit")
    }
}

pub(crate) fn rational_text(q: &Rational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl Scalar for Rational {
    fn from_rational(q: Rational) -> Self {
        q
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn add_assign_ref(&mut self, other: &Self) {
        *self += other;
    }
    fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(self.recip())
        }
    }
    fn imaginary_unit() -> Option<Self> {
        None
    }
    fn canonical(&self) -> String {
        rational_text(self)
    }
    fn is_compound(&self) -> bool {
        false
    }
}

impl Scalar for GaussianRational {
    fn from_rational(q: Rational) -> Self {
        Complex::new(q, Rational::zero())
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        // real operands are the common case
        if self.im.is_zero() && other.im.is_zero() {
            return Complex::new(&self.re * &other.re, Rational::zero());
        }
        self * other
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn add_assign_ref(&mut self, other: &Self) {
        self.re += &other.re;
        self.im += &other.im;
    }
    fn inv(&self) -> Option<Self> {
        let norm = &self.re * &self.re + &self.im * &self.im;
        if norm.is_zero() {
            None
        } else {
            Some(Complex::new(&self.re / &norm, -&self.im / &norm))
        }
    }
    fn imaginary_unit() -> Option<Self> {
        Some(Complex::new(Rational::zero(), Rational::one()))
    }
    fn canonical(&self) -> String {
        let imag = |q: &Rational| -> String {
            if q.is_one() {
                "i".to_string()
            } else {
                format!("{}*i", rational_text(q))
            }
        };
        match (self.re.is_zero(), self.im.is_zero()) {
            (true, true) => "0".to_string(),
            (false, true) => rational_text(&self.re),
            (true, false) => {
                if self.im.is_negative() {
                    format!("-{}", imag(&-&self.im))
                } else {
                    imag(&self.im)
                }
            }
            (false, false) => {
                let sign = if self.im.is_negative() { '-' } else { '+' };
                format!("{}{}{}", rational_text(&self.re), sign, imag(&self.im.abs()))
            }
        }
    }
    fn is_compound(&self) -> bool {
        !self.re.is_zero() && !self.im.is_zero()
    }
}

impl ComplexScalar for GaussianRational {}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(re: (i64, i64), im: (i64, i64)) -> GaussianRational {
        Complex::new(
            Rational::new(re.0.into(), re.1.into()),
            Rational::new(im.0.into(), im.1.into()),
        )
    }

    #[test]
    fn canonical_text() {
        assert_eq!(g((0, 1), (0, 1)).canonical(), "0");
        assert_eq!(g((-3, 2), (0, 1)).canonical(), "-3/2");
        assert_eq!(g((0, 1), (1, 1)).canonical(), "i");
        assert_eq!(g((0, 1), (-1, 2)).canonical(), "-1/2*i");
        assert_eq!(g((1, 2), (-3, 4)).canonical(), "1/2-3/4*i");
        assert_eq!(g((2, 1), (1, 1)).canonical(), "2+i");
    }

    #[test]
    fn inverse_exists_iff_norm_nonzero() {
        assert!(Scalar::inv(&GaussianRational::zero()).is_none());
        let z = g((1, 1), (1, 1));
        let w = Scalar::inv(&z).unwrap();
        assert_eq!(z.mul_ref(&w), GaussianRational::one());
        assert_eq!(w, g((1, 2), (-1, 2)));
    }

    #[test]
    fn i_squared_is_minus_one() {
        let i = GaussianRational::i();
        assert!(i.mul_ref(&i).is_minus_one());
    }
}
