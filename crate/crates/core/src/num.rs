//! Exact rational numbers and model time.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Exact rational used for probabilities and finite times.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRationalError(pub String);

/// Parses `"p/q"`, plain integers, and decimal literals with an optional
/// exponent (`"0.25"`, `"1e-3"`) into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| err())?;
        let den = BigInt::from_str(den.trim()).map_err(|_| err())?;
        if den.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(num, den));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = s[pos + 1..].parse().map_err(|_| err())?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut value = Rational::from_integer(BigInt::from_str(&all_digits).map_err(|_| err())?);
    let scale = exponent - frac_part.len() as i32;
    let ten = Rational::from_integer(BigInt::from(10));
    if scale >= 0 {
        value *= num_traits::pow(ten, scale as usize);
    } else {
        value /= num_traits::pow(ten, scale.unsigned_abs() as usize);
    }
    Ok(if negative { -value } else { value })
}

/// Canonical text form: integers as `"3"`, everything else as `"p/q"`.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn rational_to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

pub fn rational_from_int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn is_probability(value: &Rational) -> bool {
    !value.is_negative() && *value <= Rational::one()
}

/// Non-negative model time, possibly infinite (passive states).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Duration {
    Finite(Rational),
    Infinite,
}

impl Duration {
    pub fn zero() -> Self {
        Duration::Finite(Rational::zero())
    }

    /// Builds a finite duration; negative values are rejected.
    pub fn finite(value: Rational) -> Option<Self> {
        (!value.is_negative()).then_some(Duration::Finite(value))
    }

    pub fn from_int(value: u64) -> Self {
        Duration::Finite(Rational::from_integer(BigInt::from(value)))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Duration::Infinite)
    }

    pub fn as_finite(&self) -> Option<&Rational> {
        match self {
            Duration::Finite(v) => Some(v),
            Duration::Infinite => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Duration::Finite(v) => rational_to_f64(v),
            Duration::Infinite => f64::INFINITY,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ParseRationalError> {
        let t = text.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Duration::Infinite);
        }
        let value = parse_rational(t)?;
        Duration::finite(value).ok_or_else(|| ParseRationalError(text.to_string()))
    }
}

impl PartialOrd for Duration {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Duration {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Duration::Finite(a), Duration::Finite(b)) => a.cmp(b),
            (Duration::Finite(_), Duration::Infinite) => Ordering::Less,
            (Duration::Infinite, Duration::Finite(_)) => Ordering::Greater,
            (Duration::Infinite, Duration::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Duration::Finite(v) => f.write_str(&format_rational(v)),
            Duration::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Duration {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Duration {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = RationalText::deserialize(deserializer)?;
        Duration::parse(&text.0).map_err(serde::de::Error::custom)
    }
}

/// Accepts a JSON string or number and keeps its literal text so that it
/// can be parsed exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalText(pub String);

impl<'de> Deserialize<'de> for RationalText {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(deserializer)? {
            serde_json::Value::String(s) => Ok(RationalText(s)),
            serde_json::Value::Number(n) => Ok(RationalText(n.to_string())),
            other => Err(serde::de::Error::custom(format!(
                "expected a number or rational string, found {other}"
            ))),
        }
    }
}

impl Serialize for RationalText {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

/// serde adapter for exact rationals stored as text.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        let text = RationalText::deserialize(deserializer)?;
        parse_rational(&text.0).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_and_decimal_forms() {
        assert_eq!(parse_rational("3/20").unwrap(), ratio(3, 20));
        assert_eq!(parse_rational("0.15").unwrap(), ratio(3, 20));
        assert_eq!(parse_rational("1e-3").unwrap(), ratio(1, 1000));
        assert_eq!(parse_rational("2.5E1").unwrap(), ratio(25, 1));
        assert_eq!(parse_rational("-.5").unwrap(), ratio(-1, 2));
        assert_eq!(parse_rational("7").unwrap(), ratio(7, 1));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "1/0", "abc", "1.2.3", ".", "1e", "0x10"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn infinity_dominates_finite_durations() {
        let big = Duration::Finite(ratio(1_000_000_000, 1));
        assert!(Duration::Infinite > big);
        assert_eq!(Duration::parse("inf").unwrap(), Duration::Infinite);
        assert!(Duration::parse("-1").is_err());
    }

    #[test]
    fn format_is_canonical() {
        assert_eq!(format_rational(&ratio(4, 2)), "2");
        assert_eq!(format_rational(&ratio(2, 4)), "1/2");
        assert_eq!(Duration::Finite(ratio(3, 2)).to_string(), "3/2");
    }
}
