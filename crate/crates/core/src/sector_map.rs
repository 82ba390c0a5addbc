//! Serializes maps keyed by winding sectors as lists of `[[wx, wy], value]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn serialize<V: Serialize, S: Serializer>(map: &BTreeMap<(i64, i64), V>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(map.iter())
}

pub fn deserialize<'de, V: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(i64, i64), V>, D::Error> {
    let items: Vec<((i64, i64), V)> = Vec::deserialize(d)?;
    Ok(items.into_iter().collect())
}
