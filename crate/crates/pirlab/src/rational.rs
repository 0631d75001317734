//! Exact rationals and their decimal rendering.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{param, Result};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn binom(n: i64, k: i64) -> BigInt {
    if k < 0 || n < 0 || k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

pub fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

pub fn pow2(e: u32) -> BigInt {
    BigInt::one() << e as usize
}

pub fn lcm_all<'a>(values: impl IntoIterator<Item = &'a Q>) -> BigInt {
    values.into_iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Renders `x` with exactly `places` decimals, rounding half to even.
pub fn to_decimal(x: &Q, places: usize) -> String {
    let scale = BigInt::from(10u32).pow(places as u32);
    let neg = x.is_negative();
    let scaled = x.abs() * Q::from_integer(scale.clone());
    let (mut whole, rem) = scaled.numer().div_rem(scaled.denom());
    let twice = rem * 2u32;
    match twice.cmp(scaled.denom()) {
        std::cmp::Ordering::Greater => whole += 1u32,
        std::cmp::Ordering::Equal if whole.is_odd() => whole += 1u32,
        _ => {}
    }
    let (int_part, frac_part) = whole.div_rem(&scale);
    let sign = if neg && !whole.is_zero() { "-" } else { "" };
    if places == 0 {
        return format!("{sign}{int_part}");
    }
    format!("{sign}{int_part}.{:0>width$}", frac_part.to_string(), width = places)
}

/// Renders as `p/q`, or `p` for integers.
pub fn to_fraction(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn parse_fraction(s: &str) -> Result<Q> {
    let parse_int =
        |t: &str| t.trim().parse::<BigInt>().map_err(|_| crate::Error::Parameter(format!("bad rational `{s}`")));
    match s.split_once('/') {
        Some((n, d)) => {
            let d = parse_int(d)?;
            if d.is_zero() {
                return param(format!("zero denominator in `{s}`"));
            }
            Ok(Q::new(parse_int(n)?, d))
        }
        None => Ok(Q::from_integer(parse_int(s)?)),
    }
}

/// Serde adapter writing rationals as `"p/q"` strings.
pub mod serde_fraction {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&to_fraction(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_fraction(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_even_rounding() {
        assert_eq!(to_decimal(&q(1, 8), 2), "0.12");
        assert_eq!(to_decimal(&q(3, 8), 2), "0.38");
        assert_eq!(to_decimal(&q(6, 17), 5), "0.35294");
        assert_eq!(to_decimal(&q(12, 43), 5), "0.27907");
        assert_eq!(to_decimal(&q(7, 20), 5), "0.35000");
        assert_eq!(to_decimal(&q(-1, 3), 3), "-0.333");
        assert_eq!(to_decimal(&q(5, 2), 0), "2");
    }

    #[test]
    fn fraction_round_trip() {
        for x in [q(84, 305), qi(4), q(-3, 7)] {
            assert_eq!(parse_fraction(&to_fraction(&x)).unwrap(), x);
        }
        assert!(parse_fraction("1/0").is_err());
        assert!(parse_fraction("x").is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binom(5, 2), BigInt::from(10));
        assert_eq!(binom(1, 2), BigInt::zero());
        assert_eq!(binom(3, -1), BigInt::zero());
    }
}
