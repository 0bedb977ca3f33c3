//! Canonical JSON encoding: object keys sorted, compact separators.

use alloc::string::String;

use serde::Serialize;

/// Serializes `value` with every object's keys in sorted order. Two equal
/// values always produce the same bytes.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    // `serde_json::Value` keeps objects in a BTreeMap, so going through it
    // sorts keys at every depth.
    let tree = serde_json::to_value(value).expect("in-memory values always serialize");
    serde_json::to_string(&tree).expect("a json value always serializes")
}

/// Pretty-printed variant with the same key order.
pub fn to_canonical_json_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    let tree = serde_json::to_value(value).expect("in-memory values always serialize");
    serde_json::to_string_pretty(&tree).expect("a json value always serializes")
}
