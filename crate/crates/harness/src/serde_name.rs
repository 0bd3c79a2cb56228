//! Benchmark names as their lowercase strings.

use crfmnes::BenchmarkName;
use serde::{de::Error, Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(name: &BenchmarkName, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(name.as_str())
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BenchmarkName, D::Error> {
    let raw = String::deserialize(d)?;
    raw.parse().map_err(D::Error::custom)
}
