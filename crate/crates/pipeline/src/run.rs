//! Stage execution with caching and single-flight, and the per-class and
//! full-dataset drivers.

use crate::cache::{request_key, Artifact, ArtifactStore};
use crate::config::PipelineConfig;
use crate::hash::{params_hash, seed_from};
use crate::image::decode_rgb;
use crate::stage::{call_stage, ServiceEndpoint, StageKind, StageRequest};
use crate::PipelineError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use virtfusion_core::assetio::{
    parse_obj, read_manifest, read_scene_ply, sample_mesh, write_manifest, write_scene_ply, LabelMap, ManifestEntry, PoolManifest, SceneFile,
    SceneMeta, StageRecord,
};
use virtfusion_core::composer::{generate_batch, validate_scene, ComposerConfig, SceneTemplate};
use virtfusion_core::dragplan::{plan_drag, DragConfig};
use virtfusion_core::objectpool::{capacity, class_stats, normalize_size, CapacityReport, ObjectAsset, SizeTable};
use virtfusion_core::promptgen::{
    collect_prompts, parse_reply, ChatClient, ChatRequest, ChatResponse, ClientError, PromptKind, PromptOptions,
    PromptTemplate,
};
use virtfusion_core::rng;

/// Decides whether a stage output is usable. Rejected outputs are
/// recorded as failures.
pub trait RejectionHook: Send + Sync {
    fn accept(&self, stage: StageKind, payload: &[u8]) -> bool;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct AcceptAll;

impl RejectionHook for AcceptAll {
    fn accept(&self, _stage: StageKind, _payload: &[u8]) -> bool {
        true
    }
}

/// A stage that did not produce its output, and how many pool assets
/// were lost with it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: StageKind,
    pub class: String,
    /// Which (structure, texture, drag) branch failed, e.g. `n=1 m=0`.
    pub branch: String,
    pub message: String,
    pub lost_assets: usize,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounters {
    /// Requests sent to an endpoint.
    pub executions: u64,
    /// Requests answered from the cache.
    pub cache_hits: u64,
}

type Cell = Arc<OnceLock<Result<Artifact, String>>>;

pub struct Runner {
    cfg: PipelineConfig,
    endpoints: BTreeMap<StageKind, ServiceEndpoint>,
    store: ArtifactStore,
    labels: LabelMap,
    sizes: SizeTable,
    hook: Box<dyn RejectionHook>,
    inflight: Mutex<HashMap<String, Cell>>,
    executions: AtomicU64,
    cache_hits: AtomicU64,
    workers: rayon::ThreadPool,
}

fn error_chain(e: &dyn std::error::Error) -> String {
    let mut msg = e.to_string();
    let mut cur = e.source();
    while let Some(c) = cur {
        msg.push_str(": ");
        msg.push_str(&c.to_string());
        cur = c.source();
    }
    msg
}

impl Runner {
    pub fn new(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.check()?;
        let labels = cfg.labels()?;
        let sizes = cfg.sizes(&labels)?;
        let store = ArtifactStore::open(&cfg.cache_dir).map_err(|e| PipelineError::io(&cfg.cache_dir, e))?;
        let workers = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))?;
        Ok(Self {
            endpoints: cfg.endpoint_map(),
            cfg,
            store,
            labels,
            sizes,
            hook: Box::new(AcceptAll),
            inflight: Mutex::new(HashMap::new()),
            executions: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
            workers,
        })
    }

    pub fn with_hook(mut self, hook: impl RejectionHook + 'static) -> Self {
        self.hook = Box::new(hook);
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn labels(&self) -> &LabelMap {
        &self.labels
    }

    pub fn counters(&self) -> RunCounters {
        RunCounters {
            executions: self.executions.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
        }
    }

    /// Runs `stage` on the payloads of `inputs`, or returns the cached
    /// result. `lineage` artifacts are recorded as parents without being
    /// sent. Concurrent identical requests share one execution.
    pub fn execute(&self, stage: StageKind, params: &Value, inputs: &[&Artifact], lineage: &[&Artifact]) -> Result<Artifact, String> {
        let parents: Vec<&str> = inputs.iter().chain(lineage).map(|a| a.id()).collect();
        let ph = params_hash(params);
        let key = request_key(stage, &parents, &ph);
        let cell = self.inflight.lock().expect("inflight lock").entry(key.clone()).or_default().clone();
        let result = cell
            .get_or_init(|| self.execute_uncached(stage, params, inputs, &parents, &ph))
            .clone();
        let mut map = self.inflight.lock().expect("inflight lock");
        if map.get(&key).is_some_and(|c| Arc::ptr_eq(c, &cell)) {
            map.remove(&key);
        }
        result
    }

    fn execute_uncached(
        &self,
        stage: StageKind,
        params: &Value,
        inputs: &[&Artifact],
        parents: &[&str],
        ph: &str,
    ) -> Result<Artifact, String> {
        if let Some(hit) = self.store.load(stage, parents, ph).map_err(|e| format!("cache read: {e}"))? {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        let endpoint = &self.endpoints[&stage];
        let request = StageRequest {
            stage,
            params: params.clone(),
            inputs: inputs.iter().map(|a| a.payload.to_vec()).collect(),
        };
        self.executions.fetch_add(1, Ordering::Relaxed);
        let mut outputs = call_stage(endpoint, &request).map_err(|e| error_chain(&e))?;
        if outputs.len() != 1 {
            return Err(format!("{stage}: expected one output, got {}", outputs.len()));
        }
        let payload = outputs.pop().expect("one output");
        if !self.hook.accept(stage, &payload) {
            return Err(format!("{stage}: output rejected by quality hook"));
        }
        self.store
            .store(stage, parents, ph, payload)
            .map_err(|e| format!("cache write: {e}"))
    }
}

/// Chat client that routes through the PromptGen stage, keeping the
/// artifact behind every reply.
struct StageChat<'a> {
    runner: &'a Runner,
    replies: Mutex<Vec<Artifact>>,
}

impl ChatClient for StageChat<'_> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        let mut replies = self.replies.lock().expect("reply lock");
        let params = json!({
            "system": request.system,
            "user": request.user,
            "max_items": request.max_items,
            "attempt": replies.len(),
        });
        let art = self
            .runner
            .execute(StageKind::PromptGen, &params, &[], &[])
            .map_err(ClientError::new)?;
        let text = String::from_utf8(art.payload.to_vec())
            .map_err(|e| ClientError::with_cause("prompt reply is not UTF-8", e))?;
        replies.push(art);
        Ok(ChatResponse { text })
    }
}

/// A prompt together with the PromptGen artifact whose reply held it.
struct SourcedPrompt {
    text: String,
    source: Artifact,
}

fn gather_prompts(
    runner: &Runner,
    kind: PromptKind,
    class: &str,
    n: usize,
    opts: &PromptOptions,
) -> Result<Vec<SourcedPrompt>, String> {
    let chat = StageChat {
        runner,
        replies: Mutex::new(Vec::new()),
    };
    let set = collect_prompts(&chat, &PromptTemplate::default_for(kind), class, n, opts).map_err(|e| error_chain(&e))?;
    let replies = chat.replies.into_inner().expect("reply lock");
    let parsed: Vec<Vec<String>> = replies
        .iter()
        .map(|a| parse_reply(&String::from_utf8_lossy(&a.payload)))
        .collect();
    let suffix = opts
        .qualifiers
        .iter()
        .map(|q| q.trim())
        .filter(|q| !q.is_empty())
        .collect::<Vec<_>>()
        .join(", ");
    set.prompts
        .into_iter()
        .map(|text| {
            let item = if suffix.is_empty() {
                text.as_str()
            } else {
                text.strip_suffix(&format!(", {suffix}")).unwrap_or(&text)
            };
            let i = parsed
                .iter()
                .position(|items| items.iter().any(|it| it == item))
                .ok_or_else(|| format!("prompt {text:?} not found in any reply"))?;
            Ok(SourcedPrompt {
                source: replies[i].clone(),
                text,
            })
        })
        .collect()
}

fn record(stage: StageKind, prompt: &str, art: &Artifact) -> StageRecord {
    let mut extra = BTreeMap::new();
    extra.insert("artifact".to_string(), Value::String(art.id().to_string()));
    extra.insert("parents".to_string(), json!(art.record.inputs));
    StageRecord {
        stage: stage.as_str().to_string(),
        prompt: prompt.to_string(),
        param_hash: art.record.params_hash.clone(),
        extra,
    }
}

/// True when the chain starts at PromptGen, follows the generative stage
/// order and each record names the previous one's artifact as a parent.
pub fn provenance_complete(chain: &[StageRecord]) -> bool {
    if chain.len() != StageKind::GENERATIVE.len() {
        return false;
    }
    let artifact = |r: &StageRecord| r.extra.get("artifact").and_then(Value::as_str).map(str::to_string);
    let parents = |r: &StageRecord| -> Vec<String> {
        r.extra
            .get("parents")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
            .unwrap_or_default()
    };
    chain.iter().zip(StageKind::GENERATIVE).enumerate().all(|(i, (r, s))| {
        r.stage == s.as_str()
            && artifact(r).is_some()
            && (i == 0 || artifact(&chain[i - 1]).is_some_and(|prev| parents(r).contains(&prev)))
    })
}

#[derive(Debug, Clone)]
pub struct PoolAsset {
    pub entry: ManifestEntry,
    pub asset: ObjectAsset,
}

#[derive(Debug, Clone)]
pub struct ClassOutcome {
    pub class_name: String,
    pub class_id: u32,
    pub assets: Vec<PoolAsset>,
    pub failures: Vec<Failure>,
}

impl ClassOutcome {
    pub fn manifest(&self) -> PoolManifest {
        PoolManifest {
            entries: self.assets.iter().map(|a| a.entry.clone()).collect(),
            extra: BTreeMap::new(),
        }
    }
}

pub fn asset_id(class: &str, n: usize, m: usize, p: usize) -> String {
    let slug: String = class
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    format!("{slug}_{n:03}_{m:03}_{p:03}")
}

struct Branch<'a> {
    runner: &'a Runner,
    class: &'a str,
    class_id: u32,
}

impl Branch<'_> {
    fn fail(&self, stage: StageKind, branch: String, message: String, lost: usize) -> Vec<Result<PoolAsset, Failure>> {
        vec![Err(Failure {
            stage,
            class: self.class.to_string(),
            branch,
            message,
            lost_assets: lost,
        })]
    }

    fn structure(&self, n: usize, prompt: &SourcedPrompt, textures: &[SourcedPrompt]) -> Vec<Result<PoolAsset, Failure>> {
        let cfg = &self.runner.cfg;
        let lost = textures.len() * cfg.counts.p;
        let params = json!({
            "prompt": prompt.text,
            "seed": cfg.seed,
            "width": cfg.image_size,
            "height": cfg.image_size,
        });
        let img = match self.runner.execute(StageKind::TextToImage, &params, &[], &[&prompt.source]) {
            Ok(a) => a,
            Err(e) => return self.fail(StageKind::TextToImage, format!("n={n}"), e, lost),
        };
        let depth = match self.runner.execute(StageKind::DepthEstimate, &json!({}), &[&img], &[]) {
            Ok(a) => a,
            Err(e) => return self.fail(StageKind::DepthEstimate, format!("n={n}"), e, lost),
        };
        let chain = vec![
            record(StageKind::PromptGen, &prompt.text, &prompt.source),
            record(StageKind::TextToImage, &prompt.text, &img),
            record(StageKind::DepthEstimate, "", &depth),
        ];
        textures
            .par_iter()
            .enumerate()
            .flat_map_iter(|(m, tex)| self.texture(n, m, tex, &img, &depth, &chain))
            .collect()
    }

    fn texture(
        &self,
        n: usize,
        m: usize,
        tex: &SourcedPrompt,
        img: &Artifact,
        depth: &Artifact,
        chain: &[StageRecord],
    ) -> Vec<Result<PoolAsset, Failure>> {
        let cfg = &self.runner.cfg;
        let p_count = cfg.counts.p;
        let params = json!({"prompt": tex.text, "seed": cfg.seed});
        let textured = match self.runner.execute(StageKind::TextureAugment, &params, &[img, depth], &[&tex.source]) {
            Ok(a) => a,
            Err(e) => return self.fail(StageKind::TextureAugment, format!("n={n} m={m}"), e, p_count),
        };
        let mask = match decode_rgb(&textured.payload) {
            Ok(im) => im.foreground_mask(),
            Err(e) => return self.fail(StageKind::TextureAugment, format!("n={n} m={m}"), error_chain(&e), p_count),
        };
        let mut chain = chain.to_vec();
        chain.push(record(StageKind::TextureAugment, &tex.text, &textured));
        (0..p_count)
            .into_par_iter()
            .map(|p| self.drag(n, m, p, &textured, &mask, &chain))
            .collect()
    }

    fn drag(
        &self,
        n: usize,
        m: usize,
        p: usize,
        textured: &Artifact,
        mask: &virtfusion_core::dragplan::ObjectMask,
        chain: &[StageRecord],
    ) -> Result<PoolAsset, Failure> {
        let cfg = &self.runner.cfg;
        let branch = format!("n={n} m={m} p={p}");
        let failure = |stage, message| Failure {
            stage,
            class: self.class.to_string(),
            branch: branch.clone(),
            message,
            lost_assets: 1,
        };
        let drag_cfg = DragConfig {
            mu: cfg.drag.mu,
            sigma: cfg.drag.sigma,
            n_handles: cfg.drag.n_handles,
            seed: cfg.seed,
        };
        let mut r = rng::child(seed_from(&[b"drag", &cfg.seed.to_le_bytes(), textured.id().as_bytes()]), p as u64);
        let plan = plan_drag(mask, &drag_cfg, textured.id(), &mut r).map_err(|e| failure(StageKind::DragEdit, error_chain(&e)))?;
        let plan_json = serde_json::to_value(&plan).expect("plan serializes");
        let dragged = self
            .runner
            .execute(StageKind::DragEdit, &json!({ "plan": plan_json }), &[textured], &[])
            .map_err(|e| failure(StageKind::DragEdit, e))?;
        let mesh = self
            .runner
            .execute(StageKind::ImageTo3D, &json!({"remove_background": true}), &[&dragged], &[])
            .map_err(|e| failure(StageKind::ImageTo3D, e))?;

        let id = asset_id(self.class, n, m, p);
        let mut chain = chain.to_vec();
        chain.push(record(StageKind::DragEdit, "", &dragged));
        chain.push(record(StageKind::ImageTo3D, "", &mesh));
        let asset = self
            .ingest(&mesh, &id, chain.clone())
            .map_err(|e| failure(StageKind::PoolIngest, e))?;
        Ok(PoolAsset {
            entry: ManifestEntry {
                id: id.clone(),
                path: format!("{id}.ply"),
                class_id: self.class_id,
                class_name: self.class.to_string(),
                provenance: chain,
                extra: BTreeMap::new(),
            },
            asset,
        })
    }

    fn ingest(&self, mesh: &Artifact, id: &str, provenance: Vec<StageRecord>) -> Result<ObjectAsset, String> {
        let cfg = &self.runner.cfg;
        let obj = parse_obj(&mesh.payload).map_err(|e| error_chain(&e))?;
        let mut r = rng::seeded(seed_from(&[b"ingest", &cfg.seed.to_le_bytes(), mesh.id().as_bytes()]));
        let cloud = sample_mesh(&obj, cfg.points_per_object, &mut r).map_err(|e| error_chain(&e))?;
        let asset =
            ObjectAsset::from_cloud(cloud, self.class_id, id.to_string(), provenance).map_err(|e| error_chain(&e))?;
        normalize_size(&asset, &self.runner.sizes, &mut r).map_err(|e| error_chain(&e))
    }
}

/// Generates the N·M·P assets of one class. Stage failures are recorded
/// in the outcome with the number of assets they cost.
pub fn run_class(runner: &Runner, class: &str) -> Result<ClassOutcome, PipelineError> {
    let class_id = runner
        .labels
        .by_name(class)
        .ok_or_else(|| PipelineError::Class {
            class: class.to_string(),
            message: "not in the label map".into(),
        })?
        .id;
    let counts = runner.cfg.counts;
    let mut outcome = ClassOutcome {
        class_name: class.to_string(),
        class_id,
        assets: Vec::new(),
        failures: Vec::new(),
    };
    let branch = Branch { runner, class, class_id };
    runner.workers.install(|| {
        let structural = gather_prompts(runner, PromptKind::Structural, class, counts.n, &runner.cfg.prompt_options);
        let textures = gather_prompts(runner, PromptKind::Texture, class, counts.m, &PromptOptions { qualifiers: vec![] });
        let (structural, textures) = match (structural, textures) {
            (Ok(s), Ok(t)) => (s, t),
            (Err(e), _) | (_, Err(e)) => {
                outcome.failures.push(Failure {
                    stage: StageKind::PromptGen,
                    class: class.to_string(),
                    branch: "prompts".into(),
                    message: e,
                    lost_assets: counts.n * counts.m * counts.p,
                });
                return;
            }
        };
        let shortfall = counts.n * counts.m * counts.p - structural.len() * textures.len() * counts.p;
        if shortfall > 0 {
            outcome.failures.push(Failure {
                stage: StageKind::PromptGen,
                class: class.to_string(),
                branch: "prompts".into(),
                message: format!(
                    "got {} of {} structural and {} of {} texture prompts",
                    structural.len(),
                    counts.n,
                    textures.len(),
                    counts.m
                ),
                lost_assets: shortfall,
            });
        }
        let results: Vec<Result<PoolAsset, Failure>> = structural
            .par_iter()
            .enumerate()
            .flat_map_iter(|(n, prompt)| branch.structure(n, prompt, &textures))
            .collect();
        for r in results {
            match r {
                Ok(a) => outcome.assets.push(a),
                Err(f) => outcome.failures.push(f),
            }
        }
    });
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub scene_id: String,
    pub path: String,
    pub points: usize,
    pub raw_points: usize,
    pub placed: usize,
    pub skipped_slots: Vec<u32>,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub assets: usize,
    pub scenes: usize,
    pub capacity: CapacityReport,
    pub failures: Vec<Failure>,
    pub counters: RunCounters,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| PipelineError::io(path, e))
}

fn pretty(v: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("report serializes");
    out.push(b'\n');
    out
}

/// Asset clouds as single-object PLY files (semantic label = class,
/// instance 0).
pub fn asset_scene(asset: &ObjectAsset, seed: u64) -> SceneFile {
    SceneFile {
        cloud: asset.cloud().clone(),
        meta: SceneMeta {
            scene_id: asset.asset_id.clone(),
            seed,
            template_id: "asset".into(),
            background_class: asset.class_id(),
            ..SceneMeta::default()
        },
    }
}

/// Composes `count` scenes from `pool` and writes them, with a
/// `summary.json`, into `dir`.
pub fn compose_scenes(
    pool: &[ObjectAsset],
    template: &SceneTemplate,
    cfg: &ComposerConfig,
    count: usize,
    dir: &Path,
) -> Result<Vec<SceneFile>, PipelineError> {
    if pool.is_empty() {
        return Err(PipelineError::Config("no pool assets to compose scenes from".into()));
    }
    let batch = generate_batch(pool, template, cfg, count)?;
    let mut scenes = Vec::with_capacity(batch.len());
    let mut summaries = Vec::with_capacity(batch.len());
    for c in batch {
        let id = c.scene.meta.scene_id.clone();
        let path = format!("{id}.ply");
        write_file(&dir.join(&path), &write_scene_ply(&c.scene)?)?;
        summaries.push(SceneSummary {
            scene_id: id,
            path,
            points: c.scene.cloud.len(),
            raw_points: c.raw_points,
            placed: c.scene.meta.instance_classes.len(),
            skipped_slots: c.scene.meta.skipped_slots.clone(),
            violations: validate_scene(&c.scene, cfg, cfg.margin).violations.len(),
        });
        scenes.push(c.scene);
    }
    write_file(
        &dir.join("summary.json"),
        &pretty(&json!({
            "template": template,
            "composer": cfg,
            "scenes": summaries,
        })),
    )?;
    Ok(scenes)
}

/// Reads a pool directory written by [`run_full`]: `manifest.json` plus
/// one PLY per entry.
pub fn load_pool(dir: &Path, labels: Option<&LabelMap>) -> Result<Vec<ObjectAsset>, PipelineError> {
    let path = dir.join("manifest.json");
    let bytes = std::fs::read(&path).map_err(|e| PipelineError::io(&path, e))?;
    let manifest = read_manifest(&bytes, labels)?;
    manifest
        .entries
        .into_iter()
        .map(|e| {
            let p = dir.join(&e.path);
            let ply = std::fs::read(&p).map_err(|err| PipelineError::io(&p, err))?;
            let scene = read_scene_ply(&ply)?;
            ObjectAsset::from_cloud(scene.cloud, e.class_id, e.id.clone(), e.provenance).map_err(|err| PipelineError::Class {
                class: e.class_name,
                message: format!("asset {}: {err}", e.id),
            })
        })
        .collect()
}

/// Runs every configured class, writes `pool/`, then composes scenes into
/// `scenes/` and writes `report.json` in the output directory.
pub fn run_full(runner: &Runner) -> Result<RunSummary, PipelineError> {
    let cfg = &runner.cfg;
    let out = &cfg.out_dir;
    let outcomes: Vec<ClassOutcome> = cfg
        .classes
        .iter()
        .map(|c| run_class(runner, c))
        .collect::<Result<_, _>>()?;
    let assets: Vec<&PoolAsset> = outcomes.iter().flat_map(|o| &o.assets).collect();
    let failures: Vec<Failure> = outcomes.iter().flat_map(|o| o.failures.iter().cloned()).collect();

    let pool_dir = out.join("pool");
    let files: Vec<(PathBuf, Vec<u8>)> = runner.workers.install(|| {
        assets
            .par_iter()
            .map(|a| Ok((pool_dir.join(&a.entry.path), write_scene_ply(&asset_scene(&a.asset, cfg.seed))?)))
            .collect::<Result<_, PipelineError>>()
    })?;
    for (path, bytes) in &files {
        write_file(path, bytes)?;
    }
    let mut manifest = PoolManifest {
        entries: assets.iter().map(|a| a.entry.clone()).collect(),
        extra: BTreeMap::new(),
    };
    manifest.extra.insert("failures".into(), json!(failures));
    write_file(&pool_dir.join("manifest.json"), &write_manifest(&manifest)?)?;

    let cap = capacity(
        cfg.classes.len() as u64,
        cfg.counts.n as u64,
        cfg.counts.m as u64,
        cfg.counts.p as u64,
    )
    .map_err(|e| PipelineError::Config(e.to_string()))?;

    let mut scenes = Vec::new();
    if cfg.scene_count > 0 {
        let template = SceneTemplate::for_k(cfg.composer.k, cfg.pitch)?;
        let ccfg = ComposerConfig {
            seed: cfg.seed,
            ..cfg.composer.clone()
        };
        let pool: Vec<ObjectAsset> = assets.iter().map(|a| a.asset.clone()).collect();
        scenes = runner
            .workers
            .install(|| compose_scenes(&pool, &template, &ccfg, cfg.scene_count, &out.join("scenes")))?;
    }

    let pool_scenes: Vec<SceneFile> = assets.iter().map(|a| asset_scene(&a.asset, cfg.seed)).collect();
    let report = json!({
        "capacity": cap,
        "assets_produced": assets.len(),
        "assets_lost": failures.iter().map(|f| f.lost_assets).sum::<usize>(),
        "failures": failures,
        "class_stats": class_stats(&scenes).with_names(&runner.labels),
        "pool_class_stats": class_stats(&pool_scenes).with_names(&runner.labels),
    });
    write_file(&out.join("report.json"), &pretty(&report))?;

    Ok(RunSummary {
        out_dir: out.clone(),
        assets: assets.len(),
        scenes: scenes.len(),
        capacity: cap,
        failures,
        counters: runner.counters(),
    })
}
