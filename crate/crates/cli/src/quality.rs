//! Chain-quality bounds in exact rational arithmetic.
//!
//! An adversary that must control a fraction `f` of the blocks in a window
//! needs hash power at least `t = f / (1 + f)`, since with hash power `t` it
//! controls up to `t / (1 - t)` of the chain.

use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QualityError {
    #[error("threshold {0} is outside (1/2, 1)")]
    OutOfRange(BigRational),
    #[error("hash power {0} is outside [0, 1)")]
    HashPowerOutOfRange(BigRational),
    #[error("cannot parse {0:?} as a fraction or decimal")]
    Parse(String),
}

/// Minimum adversarial hash power `t = f / (1 + f)` for threshold `f`.
pub fn quality_bound(f: &BigRational) -> Result<BigRational, QualityError> {
    let half = BigRational::new(1.into(), 2.into());
    if *f <= half || *f >= BigRational::one() {
        return Err(QualityError::OutOfRange(f.clone()));
    }
    Ok(f / (BigRational::one() + f))
}

/// Fraction of the chain controllable with hash power `t`: `t / (1 - t)`.
pub fn chain_fraction(t: &BigRational) -> Result<BigRational, QualityError> {
    if *t < BigRational::zero() || *t >= BigRational::one() {
        return Err(QualityError::HashPowerOutOfRange(t.clone()));
    }
    Ok(t / (BigRational::one() - t))
}

/// Parses `a/b`, an integer, or a decimal such as `0.75`.
pub fn parse_rational(s: &str) -> Result<BigRational, QualityError> {
    let bad = || QualityError::Parse(s.to_string());
    let s = s.trim();
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{int}{frac}");
        let text = format!("{digits}/1{}", "0".repeat(frac.len()));
        return BigRational::from_str(&text).map_err(|_| bad());
    }
    BigRational::from_str(s).map_err(|_| bad())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn two_thirds() {
        assert_eq!(quality_bound(&q(2, 3)).unwrap(), q(2, 5));
        assert_eq!(chain_fraction(&q(2, 5)).unwrap(), q(2, 3));
        assert!(chain_fraction(&q(2, 5)).unwrap() < q(3, 4));
    }

    #[test]
    fn round_trip_over_samples() {
        for (a, b) in [(51, 100), (3, 5), (7, 8), (999, 1000), (501, 1000)] {
            let f = q(a, b);
            assert_eq!(chain_fraction(&quality_bound(&f).unwrap()).unwrap(), f);
        }
    }

    #[test]
    fn range_checks() {
        for f in [q(1, 2), q(1, 1), q(1, 3), q(3, 2)] {
            assert!(matches!(
                quality_bound(&f),
                Err(QualityError::OutOfRange(_))
            ));
        }
        assert!(chain_fraction(&q(1, 1)).is_err());
        assert!(chain_fraction(&q(-1, 3)).is_err());
        assert_eq!(chain_fraction(&q(0, 1)).unwrap(), q(0, 1));
    }

    #[test]
    fn parsing() {
        assert_eq!(parse_rational("2/3").unwrap(), q(2, 3));
        assert_eq!(parse_rational("0.75").unwrap(), q(3, 4));
        assert_eq!(parse_rational("1").unwrap(), q(1, 1));
        for s in ["", "a/b", "0.", "1/0", ".5x"] {
            assert!(parse_rational(s).is_err(), "{s}");
        }
    }
}
