//! Canonical `0x`-prefixed lowercase hex codec for hashes, addresses and
//! opaque byte strings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HexError {
    #[error("missing 0x prefix")]
    MissingPrefix,
    #[error("odd number of hex digits ({0})")]
    OddLength(usize),
    #[error("{field}: expected {expected} bytes, got {actual}")]
    Length {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid hex digit {digit:?} at offset {offset}")]
    InvalidDigit { digit: char, offset: usize },
}

fn nibble(c: u8) -> Option<u8> {
    match c {
        b'0'..=b'9' => Some(c - b'0'),
        b'a'..=b'f' => Some(c - b'a' + 10),
        b'A'..=b'F' => Some(c - b'A' + 10),
        _ => None,
    }
}

/// Decodes `0x…` text into bytes. With `expected_len` set, the decoded value
/// must be exactly that many bytes long.
pub fn decode_hex(text: &str, expected_len: Option<usize>) -> Result<Vec<u8>, HexError> {
    decode_hex_field(text, expected_len, "bytes")
}

pub(crate) fn decode_hex_field(
    text: &str,
    expected_len: Option<usize>,
    field: &'static str,
) -> Result<Vec<u8>, HexError> {
    let digits = text
        .strip_prefix("0x")
        .ok_or(HexError::MissingPrefix)?
        .as_bytes();
    if let Some(expected) = expected_len {
        if digits.len() != expected * 2 {
            return Err(HexError::Length {
                field,
                expected,
                actual: digits.len() / 2,
            });
        }
    }
    if digits.len() % 2 != 0 {
        return Err(HexError::OddLength(digits.len()));
    }
    let mut out = Vec::with_capacity(digits.len() / 2);
    for (i, pair) in digits.chunks_exact(2).enumerate() {
        let hi = nibble(pair[0]).ok_or(HexError::InvalidDigit {
            digit: pair[0] as char,
            offset: 2 + 2 * i,
        })?;
        let lo = nibble(pair[1]).ok_or(HexError::InvalidDigit {
            digit: pair[1] as char,
            offset: 3 + 2 * i,
        })?;
        out.push(hi << 4 | lo);
    }
    Ok(out)
}

const DIGITS: &[u8; 16] = b"0123456789abcdef";

pub fn encode_hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(2 + bytes.len() * 2);
    s.push_str("0x");
    for b in bytes {
        s.push(DIGITS[(b >> 4) as usize] as char);
        s.push(DIGITS[(b & 0x0f) as usize] as char);
    }
    s
}

macro_rules! fixed_bytes {
    ($(#[$meta:meta])* $name:ident, $len:expr, $field:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const LEN: usize = $len;

            pub fn from_hex(text: &str) -> Result<Self, HexError> {
                let v = decode_hex_field(text, Some($len), $field)?;
                let mut out = [0u8; $len];
                out.copy_from_slice(&v);
                Ok(Self(out))
            }

            pub fn as_bytes(&self) -> &[u8] {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&encode_hex(&self.0))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&encode_hex(&self.0))
            }
        }

        impl FromStr for $name {
            type Err = HexError;
            fn from_str(s: &str) -> Result<Self, HexError> {
                Self::from_hex(s)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&encode_hex(&self.0))
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                Self::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

fixed_bytes!(
    /// 32-byte block or transaction hash.
    HashId, 32, "hash"
);
fixed_bytes!(
    /// 20-byte account or contract address.
    AccountAddress, 20, "address"
);
fixed_bytes!(
    /// 4-byte function selector.
    Sighash, 4, "sighash"
);

/// Variable-length byte string (block extra data, calldata, bytecode).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ByteString(pub Vec<u8>);

impl ByteString {
    pub fn from_hex(text: &str) -> Result<Self, HexError> {
        decode_hex(text, None).map(ByteString)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for ByteString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&encode_hex(&self.0))
    }
}

impl fmt::Debug for ByteString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&encode_hex(&self.0))
    }
}

impl Serialize for ByteString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode_hex(&self.0))
    }
}

impl<'de> Deserialize<'de> for ByteString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decodes_identity_hash() {
        let text = format!("0x{}01", "00".repeat(31));
        let v = decode_hex(&text, Some(32)).unwrap();
        assert_eq!(v.len(), 32);
        assert_eq!(v[31], 1);
        assert!(v[..31].iter().all(|&b| b == 0));
    }

    #[test]
    fn rejects_short_address() {
        assert!(matches!(
            decode_hex("0xabc", Some(20)),
            Err(HexError::Length { expected: 20, .. })
        ));
        assert!(matches!(
            AccountAddress::from_hex("0xabc"),
            Err(HexError::Length { field: "address", .. })
        ));
        assert!(matches!(decode_hex("0xabc", None), Err(HexError::OddLength(3))));
    }

    #[test]
    fn rejects_bad_digit_and_prefix() {
        assert!(matches!(
            decode_hex("0x0g", None),
            Err(HexError::InvalidDigit { digit: 'g', .. })
        ));
        assert_eq!(decode_hex("abcd", None), Err(HexError::MissingPrefix));
    }

    #[test]
    fn mixed_case_input_is_canonicalised() {
        let a = AccountAddress::from_hex("0xABCDEF0123456789abcdefABCDEF0123456789ab").unwrap();
        assert_eq!(a.to_string(), "0xabcdef0123456789abcdefabcdef0123456789ab");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trips_against_reference_codec(bytes in proptest::collection::vec(any::<u8>(), 32), upper in any::<bool>()) {
            let reference = hex::encode(&bytes);
            let text = if upper { format!("0x{}", reference.to_uppercase()) } else { format!("0x{reference}") };
            let decoded = decode_hex(&text, Some(32)).unwrap();
            prop_assert_eq!(&decoded, &bytes);
            prop_assert_eq!(encode_hex(&decoded), text.to_lowercase());
            prop_assert_eq!(HashId::from_hex(&text).unwrap().to_string(), format!("0x{reference}"));
        }
    }
}
