//! Exact 256-bit amounts. Wei balances, token values and supplies never go
//! through floating point.

use std::fmt;
use std::ops::Neg;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[allow(clippy::manual_div_ceil)]
mod wide {
    uint::construct_uint! {
        /// Unsigned 256-bit integer.
        pub struct U256(4);
    }
}
pub use wide::U256;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AmountError {
    #[error("empty integer field")]
    Empty,
    #[error("not a plain decimal integer: {0:?}")]
    NotDecimal(String),
    #[error("integer exceeds 2^256: {0}")]
    Overflow(String),
    #[error("amount arithmetic overflowed")]
    ArithmeticOverflow,
    #[error("amount arithmetic went negative")]
    Underflow,
}

/// Parses an unsigned decimal integer. Signs, separators, exponents and
/// fractional parts are rejected.
pub fn parse_u256(text: &str) -> Result<U256, AmountError> {
    if text.is_empty() {
        return Err(AmountError::Empty);
    }
    if !text.bytes().all(|b| b.is_ascii_digit()) {
        return Err(AmountError::NotDecimal(text.to_string()));
    }
    U256::from_dec_str(text).map_err(|_| AmountError::Overflow(text.to_string()))
}

pub(crate) mod u256_decimal {
    use super::*;

    pub fn serialize<S: Serializer>(v: &U256, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<U256, D::Error> {
        let s = String::deserialize(d)?;
        parse_u256(&s).map_err(serde::de::Error::custom)
    }
}

/// Ether amount in wei (10^18 wei = 1 ether).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Wei(pub U256);

impl Wei {
    pub const ZERO: Wei = Wei(U256([0; 4]));

    pub fn from_u64(v: u64) -> Self {
        Wei(U256::from(v))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn checked_add(self, other: Wei) -> Option<Wei> {
        self.0.checked_add(other.0).map(Wei)
    }

    pub fn checked_sub(self, other: Wei) -> Option<Wei> {
        self.0.checked_sub(other.0).map(Wei)
    }
}

impl fmt::Display for Wei {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Debug for Wei {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} wei", self.0)
    }
}

impl FromStr for Wei {
    type Err = AmountError;
    fn from_str(s: &str) -> Result<Self, AmountError> {
        parse_u256(s).map(Wei)
    }
}

impl From<u64> for Wei {
    fn from(v: u64) -> Self {
        Wei::from_u64(v)
    }
}

impl Serialize for Wei {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Wei {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        u256_decimal::deserialize(d).map(Wei)
    }
}

/// Signed wei delta in sign-magnitude form: 256-bit magnitude plus a sign
/// bit. Zero is always non-negative.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SignedWei {
    negative: bool,
    magnitude: U256,
}

impl SignedWei {
    pub const ZERO: SignedWei = SignedWei {
        negative: false,
        magnitude: U256([0; 4]),
    };

    pub fn positive(w: Wei) -> Self {
        SignedWei {
            negative: false,
            magnitude: w.0,
        }
    }

    pub fn negative(w: Wei) -> Self {
        SignedWei {
            negative: !w.0.is_zero(),
            magnitude: w.0,
        }
    }

    pub fn is_negative(&self) -> bool {
        self.negative
    }

    pub fn is_zero(&self) -> bool {
        self.magnitude.is_zero()
    }

    pub fn magnitude(&self) -> Wei {
        Wei(self.magnitude)
    }

    pub fn checked_add(self, other: SignedWei) -> Option<SignedWei> {
        if self.negative == other.negative {
            let m = self.magnitude.checked_add(other.magnitude)?;
            return Some(SignedWei {
                negative: self.negative && !m.is_zero(),
                magnitude: m,
            });
        }
        let (big, small) = if self.magnitude >= other.magnitude {
            (self, other)
        } else {
            (other, self)
        };
        let m = big.magnitude - small.magnitude;
        Some(SignedWei {
            negative: big.negative && !m.is_zero(),
            magnitude: m,
        })
    }

    pub fn checked_sub(self, other: SignedWei) -> Option<SignedWei> {
        self.checked_add(-other)
    }

    /// The value as an unsigned amount, or `None` when negative.
    pub fn to_wei(self) -> Option<Wei> {
        (!self.negative).then_some(Wei(self.magnitude))
    }

    /// Negative values clamp to zero.
    pub fn clamp_to_wei(self) -> Wei {
        self.to_wei().unwrap_or(Wei::ZERO)
    }

    /// Adds this delta to an unsigned balance.
    pub fn apply_to(self, balance: Wei) -> Result<Wei, AmountError> {
        if self.negative {
            balance.checked_sub(Wei(self.magnitude)).ok_or(AmountError::Underflow)
        } else {
            balance
                .checked_add(Wei(self.magnitude))
                .ok_or(AmountError::ArithmeticOverflow)
        }
    }
}

impl Neg for SignedWei {
    type Output = SignedWei;
    fn neg(self) -> SignedWei {
        SignedWei {
            negative: !self.negative && !self.magnitude.is_zero(),
            magnitude: self.magnitude,
        }
    }
}

impl PartialOrd for SignedWei {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SignedWei {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        match (self.negative, other.negative) {
            (false, true) => Greater,
            (true, false) => Less,
            (false, false) => self.magnitude.cmp(&other.magnitude),
            (true, true) => other.magnitude.cmp(&self.magnitude),
        }
    }
}

impl fmt::Display for SignedWei {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negative {
            write!(f, "-{}", self.magnitude)
        } else {
            write!(f, "{}", self.magnitude)
        }
    }
}

impl fmt::Debug for SignedWei {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self} wei")
    }
}

impl FromStr for SignedWei {
    type Err = AmountError;
    fn from_str(s: &str) -> Result<Self, AmountError> {
        match s.strip_prefix('-') {
            Some(rest) => Ok(SignedWei::negative(Wei(parse_u256(rest)?))),
            None => Ok(SignedWei::positive(Wei(parse_u256(s)?))),
        }
    }
}

impl Serialize for SignedWei {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SignedWei {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Lossy conversion used for histogram interpolation and reporting only.
pub fn u256_to_f64(v: U256) -> f64 {
    let bits = v.bits();
    if bits <= 64 {
        return v.low_u64() as f64;
    }
    let shift = bits - 64;
    let top = (v >> shift).low_u64() as f64;
    top * 2f64.powi(shift as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_scientific_and_signs() {
        assert!(matches!(parse_u256("1e18"), Err(AmountError::NotDecimal(_))));
        assert!(matches!(parse_u256("+5"), Err(AmountError::NotDecimal(_))));
        assert!(matches!(parse_u256("1,000"), Err(AmountError::NotDecimal(_))));
        assert_eq!(parse_u256(""), Err(AmountError::Empty));
        let max = U256::max_value().to_string();
        assert_eq!(parse_u256(&max).unwrap(), U256::max_value());
        assert!(matches!(
            parse_u256("115792089237316195423570985008687907853269984665640564039457584007913129639936"),
            Err(AmountError::Overflow(_))
        ));
    }

    #[test]
    fn signed_display_and_zero_normalisation() {
        let z = SignedWei::negative(Wei::ZERO);
        assert!(!z.is_negative());
        assert_eq!((-SignedWei::ZERO).to_string(), "0");
        let a = SignedWei::positive(Wei::from_u64(5));
        let b = SignedWei::negative(Wei::from_u64(7));
        assert_eq!(a.checked_add(b).unwrap().to_string(), "-2");
        assert_eq!("-2".parse::<SignedWei>().unwrap(), a.checked_add(b).unwrap());
        assert!(b.apply_to(Wei::from_u64(3)).is_err());
        assert_eq!(b.apply_to(Wei::from_u64(10)).unwrap(), Wei::from_u64(3));
    }

    #[test]
    fn lossy_float_is_close() {
        let v = U256::exp10(30);
        let f = u256_to_f64(v);
        assert!((f / 1e30 - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn signed_addition_matches_i128(a in -(1i128 << 100)..(1i128 << 100), b in -(1i128 << 100)..(1i128 << 100)) {
            let conv = |x: i128| if x < 0 {
                SignedWei::negative(Wei(U256::from(x.unsigned_abs())))
            } else {
                SignedWei::positive(Wei(U256::from(x as u128)))
            };
            prop_assert_eq!(conv(a).checked_add(conv(b)).unwrap(), conv(a + b));
            prop_assert_eq!(conv(a).checked_sub(conv(b)).unwrap(), conv(a - b));
            prop_assert_eq!(conv(a).cmp(&conv(b)), a.cmp(&b));
        }
    }
}
