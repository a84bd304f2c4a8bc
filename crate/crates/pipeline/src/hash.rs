//! Stable content hashes.

use serde_json::Value;
use sha2::{Digest, Sha256};

/// SHA-256 over length-prefixed parts, hex encoded. Prefixing keeps
/// `["ab", "c"]` and `["a", "bc"]` apart.
pub fn digest_parts(parts: &[&[u8]]) -> String {
    hex::encode(sha256_parts(parts))
}

fn sha256_parts(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

/// Sorted-key compact JSON, so equal values hash equally regardless of
/// how they were built.
pub fn canonical_json(v: &Value) -> Vec<u8> {
    // serde_json's default map is a BTreeMap, so keys serialize sorted.
    serde_json::to_vec(v).expect("json value serializes")
}

pub fn params_hash(v: &Value) -> String {
    digest_parts(&[&canonical_json(v)])
}

/// A 64-bit seed derived from arbitrary labels.
pub fn seed_from(parts: &[&[u8]]) -> u64 {
    let d = sha256_parts(parts);
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn known_digest() {
        // sha256 of eight zero bytes (the length prefix of an empty part)
        assert_eq!(
            digest_parts(&[b""]),
            "af5570f5a1810b7af78caf4bc70a660f0df51e42baf91d4de5b2328de0e83dfc"
        );
    }

    #[test]
    fn parts_are_delimited() {
        assert_ne!(digest_parts(&[b"ab", b"c"]), digest_parts(&[b"a", b"bc"]));
    }

    #[test]
    fn key_order_does_not_matter() {
        let a: Value = serde_json::from_str(r#"{"x":1,"y":{"b":2,"a":3}}"#).unwrap();
        let b = json!({"y": {"a": 3, "b": 2}, "x": 1});
        assert_eq!(params_hash(&a), params_hash(&b));
        assert_eq!(canonical_json(&a), br#"{"x":1,"y":{"a":3,"b":2}}"#);
    }
}
