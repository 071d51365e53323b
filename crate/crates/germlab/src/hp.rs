//! Arbitrary-precision complex scalar built on MPFR reals.
//!
//! [`HPC`] stores real and imaginary parts as [`rug::Float`] and implements
//! the arithmetic and elementary functions the rest of the crate needs, with
//! explicit control of the logarithm's branch cut: sectorial solutions on the
//! attracting petal use the cut along the positive real axis
//! ([`LogBranch::Positive`], argument in (0, 2π]), the repelling petal uses
//! the principal cut ([`LogBranch::Principal`], argument in (-π, π]).
//!
//! Precision is carried by the operands; binary operations promote to the
//! larger operand precision. [`bits`] converts a decimal-digit request into
//! MPFR bits with guard room.

use rug::float::Constant;
use rug::Float;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Branch convention for complex logarithms and arguments.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum LogBranch {
    /// Cut along the negative real axis; argument in (-π, π].
    Principal,
    /// Cut along the positive real axis; argument in (0, 2π].
    Positive,
}

/// Bits of mantissa for a requested number of decimal digits, with guard bits.
pub fn bits(digits: u32) -> u32 {
    (digits as f64 * std::f64::consts::LOG2_10).ceil() as u32 + 8
}

/// π at the given precision.
pub fn pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi)
}

/// 2π at the given precision.
pub fn two_pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi) * 2u32
}

/// Euler–Mascheroni constant γ at the given precision.
pub fn euler_gamma(prec: u32) -> Float {
    Float::with_val(prec, Constant::Euler)
}

/// Real scalar from f64 at the given precision.
pub fn real(prec: u32, x: f64) -> Float {
    Float::with_val(prec, x)
}

/// Parse a decimal real at the given precision.
pub fn parse_real(prec: u32, s: &str) -> crate::Result<Float> {
    Float::parse(s.trim())
        .map(|p| Float::with_val(prec, p))
        .map_err(|e| crate::Error::Io(format!("cannot parse real {s:?}: {e}")))
}

fn at_prec(f: &Float, p: u32) -> Float {
    if f.prec() == p {
        f.clone()
    } else {
        Float::with_val(p, f)
    }
}

/// Complex number with MPFR real and imaginary parts.
#[derive(Clone, Debug)]
pub struct HPC {
    pub re: Float,
    pub im: Float,
}

impl HPC {
    pub fn new(re: Float, im: Float) -> Self {
        let p = re.prec().max(im.prec());
        HPC {
            re: at_prec(&re, p),
            im: at_prec(&im, p),
        }
    }

    pub fn from_f64(prec: u32, re: f64, im: f64) -> Self {
        HPC {
            re: Float::with_val(prec, re),
            im: Float::with_val(prec, im),
        }
    }

    pub fn from_re(re: Float) -> Self {
        let p = re.prec();
        HPC {
            re,
            im: Float::new(p),
        }
    }

    pub fn zero(prec: u32) -> Self {
        HPC {
            re: Float::new(prec),
            im: Float::new(prec),
        }
    }

    pub fn one(prec: u32) -> Self {
        HPC {
            re: Float::with_val(prec, 1),
            im: Float::new(prec),
        }
    }

    pub fn i_unit(prec: u32) -> Self {
        HPC {
            re: Float::new(prec),
            im: Float::with_val(prec, 1),
        }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().max(self.im.prec())
    }

    pub fn with_prec(&self, p: u32) -> Self {
        HPC {
            re: at_prec(&self.re, p),
            im: at_prec(&self.im, p),
        }
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        HPC {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    /// Multiplication by i.
    pub fn mul_i(&self) -> Self {
        HPC {
            re: -self.im.clone(),
            im: self.re.clone(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        HPC {
            re: self.re.clone() * s,
            im: self.im.clone() * s,
        }
    }

    pub fn scale_f(&self, s: &Float) -> Self {
        let p = self.prec().max(s.prec());
        HPC {
            re: at_prec(&self.re, p) * s,
            im: at_prec(&self.im, p) * s,
        }
    }

    /// Exact-rounding division by a small integer.
    pub fn unscale_u(&self, m: u32) -> Self {
        HPC {
            re: self.re.clone() / m,
            im: self.im.clone() / m,
        }
    }

    pub fn norm_sqr(&self) -> Float {
        let p = self.prec();
        let rr = at_prec(&self.re, p).square();
        let ii = at_prec(&self.im, p).square();
        rr + ii
    }

    pub fn abs(&self) -> Float {
        let p = self.prec();
        at_prec(&self.re, p).hypot(&self.im)
    }

    pub fn recip(&self) -> Self {
        let n = self.norm_sqr();
        HPC {
            re: self.re.clone() / &n,
            im: -self.im.clone() / &n,
        }
    }

    /// Argument with the requested branch cut.
    pub fn arg(&self, branch: LogBranch) -> Float {
        let p = self.prec();
        let a = at_prec(&self.im, p).atan2(&at_prec(&self.re, p));
        match branch {
            LogBranch::Principal => a,
            LogBranch::Positive => {
                if a <= 0u32 {
                    a + two_pi(p)
                } else {
                    a
                }
            }
        }
    }

    /// Complex logarithm with the requested branch cut.
    pub fn ln(&self, branch: LogBranch) -> Self {
        HPC {
            re: self.abs().ln(),
            im: self.arg(branch),
        }
    }

    pub fn exp(&self) -> Self {
        let p = self.prec();
        let r = at_prec(&self.re, p).exp();
        let (s, c) = at_prec(&self.im, p).sin_cos(Float::new(p));
        HPC {
            re: c * &r,
            im: s * &r,
        }
    }

    /// Principal square root.
    pub fn sqrt(&self) -> Self {
        self.powf(&real(self.prec(), 0.5))
    }

    /// Principal power z^t for real exponent t (z ≠ 0).
    pub fn powf(&self, t: &Float) -> Self {
        let l = self.ln(LogBranch::Principal);
        l.scale_f(t).exp()
    }

    /// Integer power by repeated squaring.
    pub fn powi(&self, n: u32) -> Self {
        let p = self.prec();
        let mut acc = HPC::one(p);
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            k >>= 1;
        }
        acc
    }

    /// Decimal rendering with the given number of significant digits.
    pub fn to_decimal_strings(&self, digits: usize) -> (String, String) {
        (
            format!("{:.*e}", digits.saturating_sub(1), self.re),
            format!("{:.*e}", digits.saturating_sub(1), self.im),
        )
    }
}

impl fmt::Display for HPC {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (r, i) = self.to_decimal_strings(17);
        write!(f, "{r} + {i}i")
    }
}

impl Add for &HPC {
    type Output = HPC;
    fn add(self, o: &HPC) -> HPC {
        let p = self.prec().max(o.prec());
        HPC {
            re: at_prec(&self.re, p) + &o.re,
            im: at_prec(&self.im, p) + &o.im,
        }
    }
}

impl Sub for &HPC {
    type Output = HPC;
    fn sub(self, o: &HPC) -> HPC {
        let p = self.prec().max(o.prec());
        HPC {
            re: at_prec(&self.re, p) - &o.re,
            im: at_prec(&self.im, p) - &o.im,
        }
    }
}

impl Mul for &HPC {
    type Output = HPC;
    fn mul(self, o: &HPC) -> HPC {
        let p = self.prec().max(o.prec());
        let ar = at_prec(&self.re, p);
        let ai = at_prec(&self.im, p);
        let re = ar.clone() * &o.re - ai.clone() * &o.im;
        let im = ar * &o.im + ai * &o.re;
        HPC { re, im }
    }
}

impl Div for &HPC {
    type Output = HPC;
    fn div(self, o: &HPC) -> HPC {
        let p = self.prec().max(o.prec());
        let n = o.with_prec(p).norm_sqr();
        let num = self * &o.conj();
        HPC {
            re: num.re / &n,
            im: num.im / &n,
        }
    }
}

impl Neg for &HPC {
    type Output = HPC;
    fn neg(self) -> HPC {
        HPC {
            re: -self.re.clone(),
            im: -self.im.clone(),
        }
    }
}

/// Sequential sum with a fixed order (deterministic across runs).
pub fn sum(terms: &[HPC], prec: u32) -> HPC {
    let mut acc = HPC::zero(prec);
    for t in terms {
        acc = &acc + t;
    }
    acc
}
