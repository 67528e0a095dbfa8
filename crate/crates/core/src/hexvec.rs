//! Serde adapter: `Vec<f32>` as a hex string of little-endian 32-bit floats.
//!
//! This is the representation wire format shared with the model adapter, so
//! vectors survive a line-oriented round trip bit-exactly.

use serde::{de, Deserialize, Deserializer, Serializer};

pub fn encode(v: &[f32]) -> String {
    let mut bytes = Vec::with_capacity(v.len() * 4);
    for x in v {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    hex::encode(bytes)
}

pub fn decode(s: &str) -> Result<Vec<f32>, String> {
    let bytes = hex::decode(s).map_err(|e| format!("invalid hex vector: {e}"))?;
    if bytes.len() % 4 != 0 {
        return Err(format!("hex vector has {} bytes, not a multiple of 4", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn serialize<S: Serializer>(v: &[f32], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&encode(v))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f32>, D::Error> {
    let s = String::deserialize(d)?;
    decode(&s).map_err(de::Error::custom)
}
