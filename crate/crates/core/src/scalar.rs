//! Numeric back-ends for probabilities.
//!
//! Every model, chain and distribution is generic over [`Scalar`]. Two
//! implementations are provided: [`Exact`] (arbitrary precision rationals,
//! used for verification) and `f64` (used for large instances).

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Exact rational probability.
pub type Exact = BigRational;

/// Numeric mode of a computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NumericMode {
    #[default]
    Exact,
    Float,
}

impl std::str::FromStr for NumericMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(NumericMode::Exact),
            "float" => Ok(NumericMode::Float),
            other => Err(format!("unknown numeric mode '{other}'")),
        }
    }
}

/// Field operations needed by the solvers, plus the mode-specific notion of
/// "equal" (exact for rationals, tolerance based for floats).
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    /// Absolute tolerance used by [`Scalar::approx_eq`]. Zero for exact types.
    const TOLERANCE: f64;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_u64(n: u64) -> Self {
        Self::from_big_ratio(BigInt::from(n), BigInt::one())
    }

    fn from_big_ratio(num: BigInt, den: BigInt) -> Self;

    /// Converts an exact rational, rounding if the target is a float.
    fn from_exact(value: &Exact) -> Self {
        Self::from_big_ratio(value.numer().clone(), value.denom().clone())
    }

    fn to_f64(&self) -> f64;

    /// Exact value of this number (floats convert without rounding).
    fn to_exact(&self) -> Exact;

    fn abs_value(&self) -> Self;

    fn is_exact() -> bool;

    /// `|self - other| <= tol` for floats, exact equality for rationals.
    fn approx_eq_tol(&self, other: &Self, tol: f64) -> bool {
        if Self::is_exact() {
            self == other
        } else {
            (self.to_f64() - other.to_f64()).abs() <= tol
        }
    }

    fn approx_eq(&self, other: &Self) -> bool {
        self.approx_eq_tol(other, Self::TOLERANCE)
    }

    fn is_negligible(&self) -> bool {
        self.approx_eq(&Self::zero())
    }

    /// Output form: reduced fraction for rationals, 17 significant digits for floats.
    fn render(&self) -> String;
}

impl Scalar for Exact {
    const TOLERANCE: f64 = 0.0;

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_big_ratio(num: BigInt, den: BigInt) -> Self {
        BigRational::new(num, den)
    }

    fn from_exact(value: &Exact) -> Self {
        value.clone()
    }

    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }

    fn to_exact(&self) -> Exact {
        self.clone()
    }

    fn abs_value(&self) -> Self {
        self.abs()
    }

    fn is_exact() -> bool {
        true
    }

    fn render(&self) -> String {
        if self.is_integer() {
            format!("{}/1", self.numer())
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
}

impl Scalar for f64 {
    const TOLERANCE: f64 = 1e-9;

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_big_ratio(num: BigInt, den: BigInt) -> Self {
        ratio_to_f64(&BigRational::new(num, den))
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_exact(&self) -> Exact {
        BigRational::from_float(*self).unwrap_or_else(BigRational::zero)
    }

    fn abs_value(&self) -> Self {
        self.abs()
    }

    fn is_exact() -> bool {
        false
    }

    fn render(&self) -> String {
        render_f64(*self)
    }
}

/// 17 significant digits, plain notation when reasonable.
pub fn render_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..16).contains(&mag) {
        let decimals = (16 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.16e}")
    }
}

/// Rational to the nearest representable float, robust for huge numerators
/// and denominators.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    // Scale both to ~60 significant bits before dividing.
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift_n = (nb - 60).max(0);
    let shift_d = (db - 60).max(0);
    let n = (r.numer() >> shift_n as usize).to_f64().unwrap_or(0.0);
    let d = (r.denom() >> shift_d as usize).to_f64().unwrap_or(1.0);
    n / d * 2f64.powi((shift_n - shift_d) as i32)
}

/// Parses `p/q`, an integer, or a decimal with optional exponent into an
/// exact rational.
pub fn parse_rational(text: &str) -> Option<Exact> {
    let s = text.trim();
    if s.is_empty() || s.len() > 4096 {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_decimal(n.trim())?;
        let d = parse_decimal(d.trim())?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Option<Exact> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = s[pos + 1..].parse().ok()?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    if exponent.abs() > 1000 {
        return None;
    }
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let numer: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().ok()? };
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Some(if negative { -value } else { value })
}
