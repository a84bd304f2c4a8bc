use crate::stage::{ServiceEndpoint, StageKind};
use crate::PipelineError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use virtfusion_core::assetio::{LabelMap, DEFAULT_POINTS_PER_OBJECT};
use virtfusion_core::composer::ComposerConfig;
use virtfusion_core::objectpool::{SizeTable, DEFAULT_JITTER};
use virtfusion_core::promptgen::PromptOptions;

pub const CACHE_ENV: &str = "VIRTFUSION_CACHE";

/// Structures, textures and drags per structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "P")]
    pub p: usize,
}

impl Default for Counts {
    fn default() -> Self {
        Self { n: 10, m: 8, p: 5 }
    }
}

/// Drag planning inside the pipeline, in pixels of the stage images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DragSettings {
    pub mu: f64,
    pub sigma: f64,
    pub n_handles: usize,
}

impl Default for DragSettings {
    fn default() -> Self {
        Self {
            mu: 5.0,
            sigma: 1.25,
            n_handles: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub classes: Vec<String>,
    pub counts: Counts,
    pub scene_count: usize,
    pub composer: ComposerConfig,
    /// Slot spacing of the bird-view grid, meters.
    pub pitch: f64,
    /// Stages without an entry use the mock.
    pub endpoints: Vec<ServiceEndpoint>,
    pub label_map: Option<PathBuf>,
    pub size_table: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub seed: u64,
    pub points_per_object: usize,
    pub image_size: u32,
    pub drag: DragSettings,
    pub prompt_options: PromptOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            classes: Vec::new(),
            counts: Counts::default(),
            scene_count: 0,
            composer: ComposerConfig::default(),
            pitch: 1.5,
            endpoints: Vec::new(),
            label_map: None,
            size_table: None,
            cache_dir: PathBuf::from("cache"),
            out_dir: PathBuf::from("dataset"),
            workers: 4,
            seed: 0,
            points_per_object: DEFAULT_POINTS_PER_OBJECT,
            image_size: 64,
            drag: DragSettings::default(),
            prompt_options: PromptOptions::default(),
        }
    }
}

impl PipelineConfig {
    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory, and `VIRTFUSION_CACHE` replaces `cache_dir`.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
        let mut cfg: PipelineConfig =
            serde_json::from_slice(&bytes).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.apply_env();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.cache_dir);
        fix(&mut self.out_dir);
        if let Some(p) = self.label_map.as_mut() {
            fix(p);
        }
        if let Some(p) = self.size_table.as_mut() {
            fix(p);
        }
    }

    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
            self.cache_dir = PathBuf::from(dir);
        }
    }

    pub fn check(&self) -> Result<(), PipelineError> {
        let Counts { n, m, p } = self.counts;
        if n == 0 || m == 0 || p == 0 {
            return Err(PipelineError::Config("counts N, M and P must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(PipelineError::Config("workers must be at least 1".into()));
        }
        if self.points_per_object == 0 {
            return Err(PipelineError::Config("points_per_object must be at least 1".into()));
        }
        if !(2..=4096).contains(&self.image_size) {
            return Err(PipelineError::Config("image_size must be within 2..=4096".into()));
        }
        let mut seen = BTreeMap::new();
        for e in &self.endpoints {
            e.check()?;
            if seen.insert(e.stage, ()).is_some() {
                return Err(PipelineError::Config(format!("more than one endpoint for {}", e.stage)));
            }
        }
        for (i, c) in self.classes.iter().enumerate() {
            if self.classes[..i].contains(c) {
                return Err(PipelineError::Config(format!("class {c:?} listed twice")));
            }
        }
        Ok(())
    }

    /// One endpoint per generative stage, mock where unconfigured.
    pub fn endpoint_map(&self) -> BTreeMap<StageKind, ServiceEndpoint> {
        StageKind::GENERATIVE
            .iter()
            .map(|&s| {
                let e = self
                    .endpoints
                    .iter()
                    .find(|e| e.stage == s)
                    .cloned()
                    .unwrap_or_else(|| ServiceEndpoint::mock(s));
                (s, e)
            })
            .collect()
    }

    pub fn labels(&self) -> Result<LabelMap, PipelineError> {
        match &self.label_map {
            None => Ok(LabelMap::scannet20()),
            Some(p) => {
                let bytes = std::fs::read(p).map_err(|e| PipelineError::io(p, e))?;
                LabelMap::from_json(&bytes).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn sizes(&self, labels: &LabelMap) -> Result<SizeTable, PipelineError> {
        let table = match &self.size_table {
            None => SizeTable::from_label_map(labels, DEFAULT_JITTER),
            Some(p) => {
                let bytes = std::fs::read(p).map_err(|e| PipelineError::io(p, e))?;
                SizeTable::from_json(&bytes)
            }
        };
        table.map_err(|e| PipelineError::Config(e.to_string()))
    }
}
