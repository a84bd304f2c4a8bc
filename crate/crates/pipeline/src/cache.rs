//! On-disk content-addressed artifact cache.
//!
//! Layout: `<root>/<stage>/<request key>.json` holds the [`ArtifactRecord`]
//! and `<request key>.bin` the payload. The request key hashes what is known
//! before execution (stage, parent ids, params); the artifact id also
//! covers the payload and is re-derived on every load.

use crate::hash::digest_parts;
use crate::stage::StageKind;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub id: String,
    pub stage: StageKind,
    pub inputs: Vec<String>,
    pub params_hash: String,
    pub payload_path: String,
    /// Seconds since the Unix epoch. Not part of any hash.
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub record: ArtifactRecord,
    pub payload: Arc<Vec<u8>>,
}

impl Artifact {
    pub fn id(&self) -> &str {
        &self.record.id
    }
}

pub fn request_key(stage: StageKind, parents: &[&str], params_hash: &str) -> String {
    let mut parts: Vec<&[u8]> = vec![b"request", stage.as_str().as_bytes(), params_hash.as_bytes()];
    parts.extend(parents.iter().map(|p| p.as_bytes()));
    digest_parts(&parts)
}

pub fn artifact_id(stage: StageKind, parents: &[&str], params_hash: &str, payload: &[u8]) -> String {
    let count = (parents.len() as u64).to_le_bytes();
    let mut parts: Vec<&[u8]> = vec![b"artifact", stage.as_str().as_bytes(), params_hash.as_bytes(), &count];
    parts.extend(parents.iter().map(|p| p.as_bytes()));
    parts.push(payload);
    digest_parts(&parts)
}

#[derive(Debug, Clone)]
pub struct ArtifactStore {
    root: PathBuf,
}

impl ArtifactStore {
    pub fn open(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn paths(&self, stage: StageKind, key: &str) -> (PathBuf, PathBuf) {
        let dir = self.root.join(stage.as_str());
        (dir.join(format!("{key}.json")), dir.join(format!("{key}.bin")))
    }

    /// The cached artifact for this request, if present and intact.
    /// Records that fail verification are treated as absent.
    pub fn load(&self, stage: StageKind, parents: &[&str], params_hash: &str) -> std::io::Result<Option<Artifact>> {
        let key = request_key(stage, parents, params_hash);
        let (rec_path, bin_path) = self.paths(stage, &key);
        let rec_bytes = match std::fs::read(&rec_path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        let Ok(record) = serde_json::from_slice::<ArtifactRecord>(&rec_bytes) else {
            return Ok(None);
        };
        let payload = match std::fs::read(&bin_path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        let ids: Vec<&str> = record.inputs.iter().map(String::as_str).collect();
        let intact = record.stage == stage
            && ids == parents
            && record.params_hash == params_hash
            && record.id == artifact_id(stage, parents, params_hash, &payload);
        Ok(intact.then(|| Artifact {
            record,
            payload: Arc::new(payload),
        }))
    }

    pub fn store(&self, stage: StageKind, parents: &[&str], params_hash: &str, payload: Vec<u8>) -> std::io::Result<Artifact> {
        let key = request_key(stage, parents, params_hash);
        let (rec_path, bin_path) = self.paths(stage, &key);
        let dir = rec_path.parent().expect("stage dir");
        std::fs::create_dir_all(dir)?;
        let record = ArtifactRecord {
            id: artifact_id(stage, parents, params_hash, &payload),
            stage,
            inputs: parents.iter().map(|p| p.to_string()).collect(),
            params_hash: params_hash.to_string(),
            payload_path: bin_path
                .strip_prefix(&self.root)
                .unwrap_or(&bin_path)
                .to_string_lossy()
                .into_owned(),
            created_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        // payload first, so a crash never leaves a record without its bytes
        write_atomic(dir, &bin_path, &payload)?;
        write_atomic(dir, &rec_path, &serde_json::to_vec_pretty(&record).expect("record serializes"))?;
        Ok(Artifact {
            record,
            payload: Arc::new(payload),
        })
    }
}

fn write_atomic(dir: &Path, dest: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(dest).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        assert_eq!(store.load(StageKind::DepthEstimate, &["p"], "h").unwrap(), None);
        let a = store.store(StageKind::DepthEstimate, &["p"], "h", b"xyz".to_vec()).unwrap();
        assert_eq!(a.record.payload_path, format!("depth_estimate/{}.bin", request_key(StageKind::DepthEstimate, &["p"], "h")));
        let b = store.load(StageKind::DepthEstimate, &["p"], "h").unwrap().unwrap();
        assert_eq!(a, b);
        assert_eq!(store.load(StageKind::DepthEstimate, &["q"], "h").unwrap(), None);
        assert_eq!(store.load(StageKind::DepthEstimate, &["p"], "g").unwrap(), None);
        assert_eq!(store.load(StageKind::DragEdit, &["p"], "h").unwrap(), None);
    }

    #[test]
    fn tampered_payload_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let a = store.store(StageKind::TextToImage, &[], "h", b"img".to_vec()).unwrap();
        std::fs::write(dir.path().join(&a.record.payload_path), b"other").unwrap();
        assert_eq!(store.load(StageKind::TextToImage, &[], "h").unwrap(), None);
    }

    #[test]
    fn ids_cover_every_field() {
        let base = artifact_id(StageKind::DragEdit, &["a"], "h", b"x");
        assert_ne!(base, artifact_id(StageKind::ImageTo3D, &["a"], "h", b"x"));
        assert_ne!(base, artifact_id(StageKind::DragEdit, &["b"], "h", b"x"));
        assert_ne!(base, artifact_id(StageKind::DragEdit, &["a"], "g", b"x"));
        assert_ne!(base, artifact_id(StageKind::DragEdit, &["a"], "h", b"y"));
        assert_ne!(artifact_id(StageKind::DragEdit, &["a", "b"], "h", b"x"), artifact_id(StageKind::DragEdit, &["ab"], "h", b"x"));
    }
}
