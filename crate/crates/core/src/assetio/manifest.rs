use super::{AssetIoError, LabelMap};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, HashSet};

/// One stage of an asset's generation history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub prompt: String,
    pub param_hash: String,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: String,
    pub class_id: u32,
    pub class_name: String,
    pub provenance: Vec<StageRecord>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoolManifest {
    pub entries: Vec<ManifestEntry>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl PoolManifest {
    pub fn validate(&self, labels: Option<&LabelMap>) -> Result<(), AssetIoError> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(AssetIoError::Validation(format!("duplicate asset id {:?}", e.id)));
            }
            if let Some(map) = labels {
                if !map.contains(e.class_id) {
                    return Err(AssetIoError::Validation(format!(
                        "asset {:?} has class id {} not in the label map",
                        e.id, e.class_id
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn read_manifest(bytes: &[u8], labels: Option<&LabelMap>) -> Result<PoolManifest, AssetIoError> {
    let m: PoolManifest = serde_json::from_slice(bytes)?;
    m.validate(labels)?;
    Ok(m)
}

/// Pretty JSON with fields in schema order and unknown keys sorted after
/// them.
pub fn write_manifest(manifest: &PoolManifest) -> Result<Vec<u8>, AssetIoError> {
    manifest.validate(None)?;
    let mut out = serde_json::to_vec_pretty(manifest)?;
    out.push(b'\n');
    Ok(out)
}
