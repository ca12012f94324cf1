//! Canonical JSON: object keys sorted, floats in shortest round-trip form,
//! no insignificant whitespace.

use serde::Serialize;

use crate::error::Result;

pub fn to_canonical_value<T: Serialize>(value: &T) -> Result<serde_json::Value> {
    // serde_json's default map is ordered, so a round-trip through Value sorts keys
    Ok(serde_json::to_value(value)?)
}

pub fn to_canonical_string<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string(&to_canonical_value(value)?)?)
}

pub fn to_canonical_pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&to_canonical_value(value)?)?)
}
