//! Exact money arithmetic in integer micro-units.
//!
//! One currency unit is 1_000_000 micro-units. Every operation is exact:
//! scaling by a grid fraction fails if the result does not land on the
//! micro-unit grid, and overflow is a hard error, never a wrap.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Micro-units per currency unit.
pub const MICROS_PER_UNIT: i64 = 1_000_000;

/// Denominator of the fixed rational grid used for predispositions and
/// provider types.
pub const FRAC_DENOM: u32 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MoneyError {
    #[error("money arithmetic overflow")]
    Overflow,
    #[error("scaling {amount} micro-units by {numer}/{denom} does not land on the micro-unit grid")]
    InexactScale { amount: i64, numer: u32, denom: u32 },
    #[error("invalid money literal {literal:?}: {reason}")]
    Parse { literal: String, reason: String },
}

/// A signed amount of money, stored as an exact count of micro-units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_micros(micros: i64) -> Money {
        Money(micros)
    }

    /// Whole currency units, failing on overflow.
    pub fn from_units(units: i64) -> Result<Money, MoneyError> {
        units
            .checked_mul(MICROS_PER_UNIT)
            .map(Money)
            .ok_or(MoneyError::Overflow)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    pub fn checked_add(self, rhs: Money) -> Result<Money, MoneyError> {
        self.0.checked_add(rhs.0).map(Money).ok_or(MoneyError::Overflow)
    }

    pub fn checked_sub(self, rhs: Money) -> Result<Money, MoneyError> {
        self.0.checked_sub(rhs.0).map(Money).ok_or(MoneyError::Overflow)
    }

    pub fn checked_neg(self) -> Result<Money, MoneyError> {
        self.0.checked_neg().map(Money).ok_or(MoneyError::Overflow)
    }

    pub fn checked_mul(self, factor: i64) -> Result<Money, MoneyError> {
        self.0.checked_mul(factor).map(Money).ok_or(MoneyError::Overflow)
    }

    /// Exact scaling by a grid fraction. Errors if the product is not an
    /// integer count of micro-units.
    pub fn scale(self, frac: UnitFrac) -> Result<Money, MoneyError> {
        let wide = i128::from(self.0) * i128::from(frac.numer());
        let denom = i128::from(FRAC_DENOM);
        if wide % denom != 0 {
            return Err(MoneyError::InexactScale {
                amount: self.0,
                numer: frac.numer(),
                denom: FRAC_DENOM,
            });
        }
        let scaled = wide / denom;
        i64::try_from(scaled).map(Money).map_err(|_| MoneyError::Overflow)
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl std::ops::Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        self.checked_add(rhs).expect("money overflow")
    }
}

impl std::ops::Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        self.checked_sub(rhs).expect("money overflow")
    }
}

impl std::ops::Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        self.checked_neg().expect("money overflow")
    }
}

impl std::iter::Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, |acc, m| acc + m)
    }
}

impl fmt::Display for Money {
    /// Always six fractional digits, `.` separator, leading `-` for
    /// negative amounts.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(
            f,
            "{sign}{}.{:06}",
            abs / MICROS_PER_UNIT as u64,
            abs % MICROS_PER_UNIT as u64
        )
    }
}

fn parse_decimal_micros(s: &str) -> Result<i64, String> {
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1i64, rest),
        None => (1i64, s.strip_prefix('+').unwrap_or(s)),
    };
    if body.is_empty() {
        return Err("empty literal".into());
    }
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err("no digits".into());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(format!("invalid integer part {int_part:?}"));
    }
    if !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(format!("invalid fractional part {frac_part:?}"));
    }
    if frac_part.len() > 6 {
        return Err(format!(
            "{} fractional digits exceed the 6-digit micro-unit precision",
            frac_part.len()
        ));
    }
    let units: i64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| "integer part out of range".to_string())?
    };
    let mut micros: i64 = 0;
    if !frac_part.is_empty() {
        let scale = 10i64.pow(6 - frac_part.len() as u32);
        let raw: i64 = frac_part.parse().map_err(|_| "fractional part out of range".to_string())?;
        micros = raw * scale;
    }
    units
        .checked_mul(MICROS_PER_UNIT)
        .and_then(|u| u.checked_add(micros))
        .and_then(|m| m.checked_mul(sign))
        .ok_or_else(|| "amount out of range".to_string())
}

impl FromStr for Money {
    type Err = MoneyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_decimal_micros(s)
            .map(Money)
            .map_err(|reason| MoneyError::Parse { literal: s.to_string(), reason })
    }
}

/// A rational in [0, 1] on the fixed grid with denominator 1_000_000.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitFrac(u32);

impl UnitFrac {
    pub const ZERO: UnitFrac = UnitFrac(0);
    pub const ONE: UnitFrac = UnitFrac(FRAC_DENOM);

    pub fn new(numer: u32) -> Result<UnitFrac, MoneyError> {
        if numer > FRAC_DENOM {
            return Err(MoneyError::Parse {
                literal: format!("{numer}/{FRAC_DENOM}"),
                reason: "fraction above 1".into(),
            });
        }
        Ok(UnitFrac(numer))
    }

    pub const fn numer(self) -> u32 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for UnitFrac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Shortest decimal that round-trips on the grid.
        let mut numer = self.0;
        let mut digits = 6;
        while digits > 0 && numer % 10 == 0 {
            numer /= 10;
            digits -= 1;
        }
        if digits == 0 {
            write!(f, "{}", self.0 / FRAC_DENOM)
        } else {
            write!(f, "{}.{:0width$}", self.0 / FRAC_DENOM, numer, width = digits)
        }
    }
}

impl FromStr for UnitFrac {
    type Err = MoneyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let micros = parse_decimal_micros(s)
            .map_err(|reason| MoneyError::Parse { literal: s.to_string(), reason })?;
        if !(0..=i64::from(FRAC_DENOM)).contains(&micros) {
            return Err(MoneyError::Parse {
                literal: s.to_string(),
                reason: "value outside [0, 1]".into(),
            });
        }
        Ok(UnitFrac(micros as u32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints_micros() {
        let m: Money = "12.500000".parse().unwrap();
        assert_eq!(m.micros(), 12_500_000);
        assert_eq!(m.to_string(), "12.500000");
        assert_eq!("-0.000001".parse::<Money>().unwrap().micros(), -1);
        assert_eq!("3".parse::<Money>().unwrap().micros(), 3_000_000);
        assert_eq!("0.5".parse::<Money>().unwrap().micros(), 500_000);
    }

    #[test]
    fn seventh_fractional_digit_is_rejected() {
        let err = "0.3333333".parse::<Money>().unwrap_err();
        assert!(matches!(err, MoneyError::Parse { .. }));
        assert!("0.1234567".parse::<UnitFrac>().is_err());
    }

    #[test]
    fn scale_is_exact_or_errors() {
        let v = Money::from_units(10).unwrap();
        let half: UnitFrac = "0.5".parse().unwrap();
        assert_eq!(v.scale(half).unwrap(), Money::from_units(5).unwrap());

        // 1 micro-unit cannot be halved on the grid.
        let err = Money::from_micros(1).scale(half).unwrap_err();
        assert!(matches!(err, MoneyError::InexactScale { .. }));
    }

    #[test]
    fn overflow_is_an_error() {
        let big = Money::from_micros(i64::MAX);
        assert_eq!(big.checked_add(Money::from_micros(1)), Err(MoneyError::Overflow));
        assert!(Money::from_units(i64::MAX).is_err());
    }

    #[test]
    fn unit_frac_bounds() {
        assert!("1.000001".parse::<UnitFrac>().is_err());
        assert!("-0.1".parse::<UnitFrac>().is_err());
        assert_eq!("1".parse::<UnitFrac>().unwrap(), UnitFrac::ONE);
        assert_eq!(UnitFrac::new(250_000).unwrap().to_string(), "0.25");
    }
}
