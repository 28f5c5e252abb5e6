//! Exact rational numbers and their canonical text form.
//!
//! Every probability, spectrum value and residual in this crate is a
//! [`Rational`]. The canonical text form is lowest-terms `num/den`, with the
//! denominator omitted when it is 1. Input additionally accepts finite decimal
//! strings (`0.15`, `-2.5`), converted exactly over a power-of-ten denominator.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational literal {literal:?}: {reason}")]
pub struct ParseRationalError {
    pub literal: String,
    pub reason: &'static str,
}

fn parse_error(literal: &str, reason: &'static str) -> ParseRationalError {
    ParseRationalError {
        literal: literal.to_string(),
        reason,
    }
}

fn parse_int(digits: &str, literal: &str) -> Result<BigInt, ParseRationalError> {
    if digits.is_empty() {
        return Err(parse_error(literal, "missing digits"));
    }
    digits
        .parse::<BigInt>()
        .map_err(|_| parse_error(literal, "not an integer"))
}

/// Parses `n`, `n/d` or a finite decimal such as `-0.35`.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(parse_error(text, "empty"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_int(num.trim(), text)?;
        let den = parse_int(den.trim(), text)?;
        if den.is_zero() {
            return Err(parse_error(text, "zero denominator"));
        }
        return Ok(Rational::new(num, den));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    if body.starts_with(['-', '+']) {
        return Err(parse_error(text, "repeated sign"));
    }
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(parse_error(text, "missing digits"));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(parse_error(text, "unexpected character"));
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = parse_int(&digits, text)?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let value = Rational::new(numer, denom);
    Ok(if negative { -value } else { value })
}

/// Canonical lowest-terms rendering (`3/10`, `-1/5`, `1`).
pub fn format_rational(value: &Rational) -> String {
    // BigRational is always kept reduced with a positive denominator.
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn rational(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn integer(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn is_probability(value: &Rational) -> bool {
    !value.is_negative() && *value <= Rational::one()
}

/// Serde adapter storing a [`Rational`] as its canonical string.
pub mod serde_rational {
    use super::{format_rational, parse_rational, Rational};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_rational(&text).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decimals_convert_exactly() {
        assert_eq!(parse_rational("0.15").unwrap(), rational(3, 20));
        assert_eq!(parse_rational("-2.5").unwrap(), rational(-5, 2));
        assert_eq!(parse_rational(".5").unwrap(), rational(1, 2));
        assert_eq!(parse_rational("7").unwrap(), integer(7));
        assert_eq!(parse_rational("+3.").unwrap(), integer(3));
    }

    #[test]
    fn fractions_are_reduced() {
        let v = parse_rational("20/100").unwrap();
        assert_eq!(format_rational(&v), "1/5");
        assert_eq!(format_rational(&parse_rational("-6/-4").unwrap()), "3/2");
        assert_eq!(format_rational(&parse_rational("4/-8").unwrap()), "-1/2");
    }

    #[test]
    fn malformed_literals_are_rejected() {
        for bad in ["", "1/0", "abc", "1.2.3", "--1", "1/", "/3", "0x10", "1e3", "."] {
            assert!(parse_rational(bad).is_err(), "{bad:?} should not parse");
        }
    }

    proptest! {
        #[test]
        fn canonical_form_round_trips(n in -10_000i64..10_000, d in 1i64..10_000) {
            let v = rational(n, d);
            let text = format_rational(&v);
            prop_assert_eq!(parse_rational(&text).unwrap(), v);
        }
    }
}
