use super::AssetIoError;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

const SCANNET20: &str = include_str!("../../fixtures/scannet20.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: u32,
    pub name: String,
    pub canonical_height_m: f64,
}

/// The active set of semantic classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    pub classes: Vec<ClassEntry>,
}

impl LabelMap {
    pub fn from_json(bytes: &[u8]) -> Result<Self, AssetIoError> {
        let map: LabelMap = serde_json::from_slice(bytes)?;
        map.validate()?;
        Ok(map)
    }

    /// The 20 ScanNet benchmark classes with placeholder canonical heights.
    pub fn scannet20() -> Self {
        Self::from_json(SCANNET20.as_bytes()).expect("bundled label map is valid")
    }

    pub fn validate(&self) -> Result<(), AssetIoError> {
        let mut ids = HashSet::new();
        let mut names = HashSet::new();
        for c in &self.classes {
            if !ids.insert(c.id) {
                return Err(AssetIoError::Validation(format!("duplicate class id {}", c.id)));
            }
            if !names.insert(c.name.as_str()) {
                return Err(AssetIoError::Validation(format!("duplicate class name {:?}", c.name)));
            }
            if !(c.canonical_height_m > 0.0 && c.canonical_height_m.is_finite()) {
                return Err(AssetIoError::Validation(format!(
                    "class {:?} has non-positive canonical height",
                    c.name
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: u32) -> Option<&ClassEntry> {
        self.classes.iter().find(|c| c.id == id)
    }

    pub fn by_name(&self, name: &str) -> Option<&ClassEntry> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn contains(&self, id: u32) -> bool {
        self.get(id).is_some()
    }
}
