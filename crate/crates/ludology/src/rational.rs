//! Exact rational probabilities.
//!
//! Probabilities are kept as arbitrary-precision rationals end to end, so
//! equality tests and sums are exact. Floating point never enters probability
//! comparisons.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact probability type used throughout the crate.
pub type Prob = BigRational;

/// Builds a probability from an integer numerator/denominator pair.
pub fn prob(num: i64, den: i64) -> Prob {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Renders a rational as `num/den` (or just `num` when the denominator is 1),
/// the form used in all serialized output.
pub fn format_prob(p: &Prob) -> String {
    if p.denom().is_one() {
        format!("{}", p.numer())
    } else {
        format!("{}/{}", p.numer(), p.denom())
    }
}

/// Parses the `num/den` form accepted in descriptions and JSON.
pub fn parse_prob(s: &str) -> Option<Prob> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim().parse::<BigInt>().ok()?, d.trim().parse::<BigInt>().ok()?),
        None => (s.parse::<BigInt>().ok()?, BigInt::one()),
    };
    if den.is_zero() {
        return None;
    }
    Some(BigRational::new(num, den))
}

/// True iff `p` lies in the half-open interval (0, 1] required of a
/// consequence weight.
pub fn is_valid_weight(p: &Prob) -> bool {
    p.is_positive() && *p <= BigRational::one()
}

/// Serde adapter serializing probabilities in the `num/den` wire form.
pub mod serde_prob {
    use super::*;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Prob, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_prob(p))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Prob, D::Error> {
        let text = String::deserialize(d)?;
        parse_prob(&text).ok_or_else(|| D::Error::custom(format!("invalid rational '{text}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_whole_and_fractional() {
        assert_eq!(format_prob(&prob(1, 2)), "1/2");
        assert_eq!(format_prob(&prob(1, 1)), "1");
        assert_eq!(format_prob(&prob(2, 4)), "1/2");
    }

    #[test]
    fn parses_what_it_prints() {
        for p in [prob(1, 2), prob(1, 1), prob(3, 7), prob(2, 3)] {
            assert_eq!(parse_prob(&format_prob(&p)), Some(p));
        }
        assert_eq!(parse_prob("1/0"), None);
        assert_eq!(parse_prob("x"), None);
    }

    #[test]
    fn weight_bounds() {
        assert!(is_valid_weight(&prob(1, 1)));
        assert!(is_valid_weight(&prob(1, 1000)));
        assert!(!is_valid_weight(&prob(0, 1)));
        assert!(!is_valid_weight(&prob(3, 2)));
        assert!(!is_valid_weight(&prob(-1, 2)));
    }
}
