//! Exact parsing of rational literals: `p/q`, integers, and decimals.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Pow, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RationalError {
    #[error("malformed rational {0:?}")]
    Malformed(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

/// Parses `INT "/" INT`, a plain integer, or a decimal, all exactly.
pub fn parse_rational(text: &str) -> Result<BigRational, RationalError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(RationalError::Malformed(text.to_string()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| RationalError::Malformed(text.to_string()))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| RationalError::Malformed(text.to_string()))?;
        if d.is_zero() {
            return Err(RationalError::ZeroDenominator(text.to_string()));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let int_part = if int_part.is_empty() || int_part == "-" {
            format!("{int_part}0")
        } else {
            int_part.to_string()
        };
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(RationalError::Malformed(text.to_string()));
        }
        let negative = int_part.starts_with('-');
        let whole: BigInt = int_part
            .parse()
            .map_err(|_| RationalError::Malformed(text.to_string()))?;
        let frac: BigInt = frac_part
            .parse()
            .map_err(|_| RationalError::Malformed(text.to_string()))?;
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let frac_ratio = BigRational::new(frac, scale);
        let whole_ratio = BigRational::from_integer(whole);
        return Ok(if negative {
            whole_ratio - frac_ratio
        } else {
            whole_ratio + frac_ratio
        });
    }
    let n: BigInt = s
        .parse()
        .map_err(|_| RationalError::Malformed(text.to_string()))?;
    Ok(BigRational::from_integer(n))
}

/// Renders a rational canonically: `p/q` in lowest terms, or `p` for integers.
pub fn render_rational(value: &BigRational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}
