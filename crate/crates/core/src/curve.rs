//! Short Weierstrass curves `y^2 = x^3 + ax + b` over Q and their reductions.

use std::fmt;

use num_rational::Ratio;

use crate::arith::reduce_signed;
use crate::error::{Error, Result};

/// Rational j-invariant with 128-bit numerator and denominator.
pub type JInvariant = Ratio<i128>;

/// The thirteen rational CM j-invariants with the discriminant of the CM order.
pub const CM_J_INVARIANTS: [(i128, i64); 13] = [
    (0, -3),
    (1728, -4),
    (-3375, -7),
    (8000, -8),
    (-32768, -11),
    (54000, -12),
    (287496, -16),
    (-884736, -19),
    (-12288000, -27),
    (16581375, -28),
    (-884736000, -43),
    (-147197952000, -67),
    (-262537412640768000, -163),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmClass {
    NonCm,
    /// CM by the imaginary quadratic order of this (negative) discriminant.
    Cm { disc: i64 },
}

impl CmClass {
    pub fn is_cm(self) -> bool {
        matches!(self, CmClass::Cm { .. })
    }

    pub fn disc(self) -> Option<i64> {
        match self {
            CmClass::NonCm => None,
            CmClass::Cm { disc } => Some(disc),
        }
    }
}

/// `-16(4a^3 + 27b^2)`.
pub fn discriminant(a: i64, b: i64) -> Result<i128> {
    let overflow = || Error::CoefficientOverflow { a, b };
    let (a1, b1) = (a as i128, b as i128);
    let a3 = a1
        .checked_mul(a1)
        .and_then(|v| v.checked_mul(a1))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(overflow)?;
    let b2 = b1
        .checked_mul(b1)
        .and_then(|v| v.checked_mul(27))
        .ok_or_else(overflow)?;
    let delta = a3
        .checked_add(b2)
        .and_then(|v| v.checked_mul(-16))
        .ok_or_else(overflow)?;
    if delta == 0 {
        return Err(Error::SingularCurve { a, b });
    }
    Ok(delta)
}

/// `j = 1728 * 4a^3 / (4a^3 + 27b^2)`.
pub fn j_invariant(a: i64, b: i64) -> Result<JInvariant> {
    let overflow = || Error::CoefficientOverflow { a, b };
    let delta = discriminant(a, b)?;
    let a1 = a as i128;
    let four_a3 = a1
        .checked_mul(a1)
        .and_then(|v| v.checked_mul(a1))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(overflow)?;
    let num = four_a3.checked_mul(1728).ok_or_else(overflow)?;
    // 4a^3 + 27b^2 = -delta/16 exactly
    Ok(Ratio::new(num, -delta / 16))
}

/// Classify a rational j-invariant against the finite list of CM j-invariants over Q.
pub fn classify_cm(j: &JInvariant) -> CmClass {
    if !j.is_integer() {
        return CmClass::NonCm;
    }
    let j = *j.numer();
    CM_J_INVARIANTS
        .iter()
        .find(|(cj, _)| *cj == j)
        .map_or(CmClass::NonCm, |&(_, disc)| CmClass::Cm { disc })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalCurve {
    pub a: i64,
    pub b: i64,
    pub delta: i128,
    pub cm: CmClass,
    /// Asserted by configuration, never verified.
    pub serre_curve: bool,
    pub label: String,
}

impl RationalCurve {
    /// Builds the curve and classifies CM from its j-invariant.
    pub fn new(label: impl Into<String>, a: i64, b: i64) -> Result<Self> {
        let delta = discriminant(a, b)?;
        let cm = classify_cm(&j_invariant(a, b)?);
        Ok(RationalCurve {
            a,
            b,
            delta,
            cm,
            serre_curve: false,
            label: label.into(),
        })
    }

    pub fn with_serre_curve(mut self, flag: bool) -> Self {
        self.serre_curve = flag;
        self
    }

    pub fn j_invariant(&self) -> JInvariant {
        j_invariant(self.a, self.b).expect("validated at construction")
    }

    /// True when `p` is excluded from every table: 2, 3 and divisors of the model's discriminant.
    pub fn is_bad_prime(&self, p: u64) -> bool {
        p == 2 || p == 3 || self.delta % p as i128 == 0
    }

    pub fn reduce(&self, p: u64) -> Result<ReducedCurve> {
        reduce(self, p)
    }

    /// The quadratic twist `y^2 = x^3 + a d^2 x + b d^3`.
    pub fn twist(&self, d: i64) -> Result<RationalCurve> {
        let a = self
            .a
            .checked_mul(d * d)
            .ok_or(Error::CoefficientOverflow { a: self.a, b: self.b })?;
        let b = self
            .b
            .checked_mul(d * d * d)
            .ok_or(Error::CoefficientOverflow { a: self.a, b: self.b })?;
        Ok(RationalCurve::new(format!("{}^({d})", self.label), a, b)?
            .with_serre_curve(false))
    }
}

impl fmt::Display for RationalCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: y^2 = x^3 + ({})x + ({})", self.label, self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReducedCurve {
    pub p: u64,
    pub a_mod: u64,
    pub b_mod: u64,
}

impl ReducedCurve {
    /// Reduction of `y^2 = x^3 + ax + b` mod `p` without the good-reduction check.
    pub fn from_coeffs(a: i128, b: i128, p: u64) -> Self {
        ReducedCurve {
            p,
            a_mod: reduce_signed(a, p),
            b_mod: reduce_signed(b, p),
        }
    }

    /// `4a^3 + 27b^2 mod p` is nonzero.
    pub fn is_nonsingular(&self) -> bool {
        use crate::arith::mul_mod;
        let p = self.p;
        let a3 = mul_mod(mul_mod(self.a_mod, self.a_mod, p), self.a_mod, p);
        let b2 = mul_mod(self.b_mod, self.b_mod, p);
        (mul_mod(4 % p, a3, p) + mul_mod(27 % p, b2, p)) % p != 0
    }
}

pub fn reduce(curve: &RationalCurve, p: u64) -> Result<ReducedCurve> {
    if !crate::arith::is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if curve.delta % p as i128 == 0 {
        return Err(Error::BadReduction { p });
    }
    Ok(ReducedCurve::from_coeffs(curve.a as i128, curve.b as i128, p))
}
