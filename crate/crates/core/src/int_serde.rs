//! JSON encoding for arbitrary-precision integers.
//!
//! Values that fit in an `i64` are written as plain JSON numbers; anything
//! larger is written as a decimal string. Both forms are accepted on input.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct JsonInt(pub BigInt);

impl From<&BigInt> for JsonInt {
    fn from(x: &BigInt) -> Self {
        JsonInt(x.clone())
    }
}

impl From<JsonInt> for BigInt {
    fn from(x: JsonInt) -> Self {
        x.0
    }
}

impl Serialize for JsonInt {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.0.to_i64() {
            Some(v) => serializer.serialize_i64(v),
            None => serializer.serialize_str(&self.0.to_string()),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawInt {
    Signed(i64),
    Unsigned(u64),
    Text(String),
}

impl<'de> Deserialize<'de> for JsonInt {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match RawInt::deserialize(deserializer)
            .map_err(|_| D::Error::custom("expected an integer or a decimal integer string"))?
        {
            RawInt::Signed(v) => Ok(JsonInt(v.into())),
            RawInt::Unsigned(v) => Ok(JsonInt(v.into())),
            RawInt::Text(s) => s
                .trim()
                .parse::<BigInt>()
                .map(JsonInt)
                .map_err(|_| D::Error::custom(format!("invalid integer string {s:?}"))),
        }
    }
}

pub(crate) mod bigint {
    use super::*;

    pub fn serialize<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        JsonInt::from(x).serialize(s)
    }
}

pub(crate) mod bigint_vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<JsonInt> = xs.iter().map(JsonInt::from).collect();
        v.serialize(s)
    }
}
