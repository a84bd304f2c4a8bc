//! Compositional scene generation over a bird-view slot template.
//!
//! Objects are drawn from the pool, dropped onto consecutive template
//! slots with a random yaw, pushed aside when their footprint collides
//! with something already placed, labeled with their slot's instance id,
//! downsampled to the point budget and finally spun as a whole scene.

use crate::assetio::{SceneFile, SceneMeta};
use crate::geometry::{
    apply_transform, bounding_box, downsample, merge, xy_overlap, Aabb, GeometryError, LabeledCloud,
    YawTransform,
};
use crate::objectpool::ObjectAsset;
use crate::rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;
use thiserror::Error;

/// Slack applied when re-checking disjointness on stored scenes, which
/// hold coordinates at `f32` precision.
pub const VALIDATION_TOLERANCE_M: f64 = 1e-5;

const FLOOR_SPACING_M: f64 = 0.05;
const FLOOR_BORDER_M: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub id: u32,
    pub center: [f64; 2],
}

/// Numbered placement positions seen from above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTemplate {
    pub id: String,
    pub slots: Vec<Slot>,
    pub pitch: f64,
}

impl SceneTemplate {
    /// Row-major grid centered on the origin; slot 1 is the top-left
    /// corner and ids increase along +x.
    pub fn grid(rows: usize, cols: usize, pitch: f64) -> Result<Self, ComposeError> {
        Self::grid_k(rows, cols, rows * cols, pitch)
    }

    /// The smallest near-square grid holding `k` slots, keeping the first `k`.
    pub fn for_k(k: usize, pitch: f64) -> Result<Self, ComposeError> {
        let cols = (k as f64).sqrt().ceil().max(1.0) as usize;
        let rows = k.div_ceil(cols).max(1);
        Self::grid_k(rows, cols, k, pitch)
    }

    fn grid_k(rows: usize, cols: usize, k: usize, pitch: f64) -> Result<Self, ComposeError> {
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(ComposeError::Config("pitch must be positive".into()));
        }
        let half_c = (cols as f64 - 1.0) / 2.0;
        let half_r = (rows as f64 - 1.0) / 2.0;
        let slots = (0..k)
            .map(|i| {
                let (r, c) = (i / cols, i % cols);
                Slot {
                    id: i as u32 + 1,
                    center: [(c as f64 - half_c) * pitch, (half_r - r as f64) * pitch],
                }
            })
            .collect();
        Ok(Self {
            id: format!("grid{rows}x{cols}-k{k}-p{pitch}"),
            slots,
            pitch,
        })
    }

    pub fn k(&self) -> usize {
        self.slots.len()
    }
}

impl Default for SceneTemplate {
    fn default() -> Self {
        Self::grid(3, 3, 1.5).expect("valid default grid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComposerConfig {
    /// Objects per scene; must equal the template's slot count.
    pub k: usize,
    /// Maximum points per scene.
    pub tau: usize,
    pub margin: f64,
    pub shift_step: f64,
    pub max_shift: f64,
    pub seed: u64,
    /// Adds a flat floor slab of background points under the objects.
    pub floor: bool,
    pub floor_class: u32,
}

impl Default for ComposerConfig {
    fn default() -> Self {
        Self {
            k: 9,
            tau: 200_000,
            margin: 0.05,
            shift_step: 0.05,
            max_shift: 3.0,
            seed: 0,
            floor: false,
            floor_class: 2,
        }
    }
}

impl ComposerConfig {
    /// Defaults matched to `template`: its slot count and twice its pitch
    /// as the shift budget.
    pub fn for_template(template: &SceneTemplate) -> Self {
        Self {
            k: template.k(),
            max_shift: 2.0 * template.pitch,
            ..Self::default()
        }
    }

    pub fn check(&self, template: &SceneTemplate) -> Result<(), ComposeError> {
        if self.k != template.k() {
            return Err(ComposeError::Config(format!(
                "k = {} but template {} has {} slots",
                self.k,
                template.id,
                template.k()
            )));
        }
        if self.tau == 0 {
            return Err(ComposeError::Config("tau must be positive".into()));
        }
        if !(self.shift_step > 0.0) || !(self.margin >= 0.0) || !(self.max_shift >= 0.0) {
            return Err(ComposeError::Config(
                "need shift_step > 0, margin >= 0, max_shift >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Where one slot's object ended up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub slot: u32,
    pub asset_id: String,
    pub class_id: u32,
    /// `None` when the object was skipped.
    pub instance: Option<u32>,
    pub shift: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    pub scene: SceneFile,
    pub placements: Vec<Placement>,
    /// Point count before downsampling.
    pub raw_points: usize,
}

/// Finds the first clear offset for `candidate`: zero if it is already
/// clear, else steps of `step` along +x up to `max_shift`, then the same
/// along +y. `None` when both directions are exhausted.
pub fn find_shift(candidate: &Aabb, placed: &[Aabb], margin: f64, step: f64, max_shift: f64) -> Option<[f64; 2]> {
    let clear = |b: &Aabb| !placed.iter().any(|p| xy_overlap(b, p, margin));
    if clear(candidate) {
        return Some([0.0, 0.0]);
    }
    let steps = (max_shift / step + 1e-9).floor() as usize;
    for axis in 0..2 {
        for j in 1..=steps {
            let mut offset = [0.0; 3];
            offset[axis] = j as f64 * step;
            if clear(&candidate.translated(offset)) {
                return Some([offset[0], offset[1]]);
            }
        }
    }
    None
}

fn floor_slab(bounds: &Aabb, class_id: u32) -> LabeledCloud {
    let x0 = bounds.min[0] - FLOOR_BORDER_M;
    let y0 = bounds.min[1] - FLOOR_BORDER_M;
    let nx = ((bounds.max[0] - bounds.min[0] + 2.0 * FLOOR_BORDER_M) / FLOOR_SPACING_M).ceil() as usize + 1;
    let ny = ((bounds.max[1] - bounds.min[1] + 2.0 * FLOOR_BORDER_M) / FLOOR_SPACING_M).ceil() as usize + 1;
    let mut slab = LabeledCloud::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let p = [x0 + i as f64 * FLOOR_SPACING_M, y0 + j as f64 * FLOOR_SPACING_M, 0.0];
            slab.push(p, [150, 150, 150], class_id, 0).expect("finite");
        }
    }
    slab
}

pub fn compose<R: Rng + ?Sized>(
    pool: &[ObjectAsset],
    template: &SceneTemplate,
    cfg: &ComposerConfig,
    rng: &mut R,
) -> Result<Composition, ComposeError> {
    if pool.is_empty() {
        return Err(ComposeError::Config("object pool is empty".into()));
    }
    cfg.check(template)?;

    let mut placed_boxes: Vec<Aabb> = Vec::with_capacity(cfg.k);
    let mut placed_clouds: Vec<LabeledCloud> = Vec::with_capacity(cfg.k);
    let mut placements = Vec::with_capacity(cfg.k);
    let mut instance_classes = BTreeMap::new();
    let mut skipped = Vec::new();

    for slot in &template.slots {
        let asset = &pool[rng.random_range(0..pool.len())];
        let mut cloud = asset.cloud().clone();
        let c = cloud.centroid().expect("assets are non-empty");
        let min_z = bounding_box(&cloud)?.min[2];
        cloud.translate([slot.center[0] - c[0], slot.center[1] - c[1], -min_z]);

        let yaw = rng.random::<f64>() * TAU;
        let spin = YawTransform::rotation(yaw, [slot.center[0], slot.center[1], 0.0])?;
        let mut cloud = apply_transform(&cloud, &spin)?;

        let bb = bounding_box(&cloud)?;
        let mut placement = Placement {
            slot: slot.id,
            asset_id: asset.asset_id.clone(),
            class_id: asset.class_id(),
            instance: None,
            shift: [0.0, 0.0],
        };
        match find_shift(&bb, &placed_boxes, cfg.margin, cfg.shift_step, cfg.max_shift) {
            Some(shift) => {
                cloud.translate([shift[0], shift[1], 0.0]);
                // Ids are compacted over skips so they stay contiguous.
                let instance = placed_clouds.len() as u32 + 1;
                cloud.set_labels(asset.class_id(), instance);
                instance_classes.insert(instance, asset.class_id());
                placed_boxes.push(bb.translated([shift[0], shift[1], 0.0]));
                placed_clouds.push(cloud);
                placement.instance = Some(instance);
                placement.shift = shift;
            }
            None => skipped.push(slot.id),
        }
        placements.push(placement);
    }

    let mut scene = merge(&placed_clouds);
    let background_class = if cfg.floor && !placed_boxes.is_empty() {
        let mut bounds = placed_boxes[0];
        for b in &placed_boxes[1..] {
            for k in 0..3 {
                bounds.min[k] = bounds.min[k].min(b.min[k]);
                bounds.max[k] = bounds.max[k].max(b.max[k]);
            }
        }
        scene.extend_from(&floor_slab(&bounds, cfg.floor_class));
        cfg.floor_class
    } else {
        0
    };
    let raw_points = scene.len();
    if scene.len() > cfg.tau {
        scene = downsample(&scene, cfg.tau, rng);
    }

    let scene_yaw = rng.random::<f64>() * TAU;
    let pivot = scene.centroid().map_or([0.0, 0.0], |c| [c[0], c[1]]);
    let spin = YawTransform::rotation(scene_yaw, [pivot[0], pivot[1], 0.0])?;
    let mut cloud = apply_transform(&scene, &spin)?;
    cloud.quantize_f32();

    let meta = SceneMeta {
        scene_id: String::new(),
        seed: cfg.seed,
        template_id: template.id.clone(),
        background_class,
        instance_classes,
        scene_yaw: spin.angle(),
        scene_pivot: pivot,
        skipped_slots: skipped,
        extra: BTreeMap::new(),
    };
    Ok(Composition {
        scene: SceneFile { cloud, meta },
        placements,
        raw_points,
    })
}

/// `count` independent scenes; scene `i` draws from a generator derived
/// from `(cfg.seed, i)`, so the batch is reproducible and order-stable
/// under parallel execution.
pub fn generate_batch(
    pool: &[ObjectAsset],
    template: &SceneTemplate,
    cfg: &ComposerConfig,
    count: usize,
) -> Result<Vec<Composition>, ComposeError> {
    (0..count)
        .into_par_iter()
        .map(|i| generate_one(pool, template, cfg, i))
        .collect()
}

/// Scene `index` of the batch [`generate_batch`] would produce.
pub fn generate_one(
    pool: &[ObjectAsset],
    template: &SceneTemplate,
    cfg: &ComposerConfig,
    index: usize,
) -> Result<Composition, ComposeError> {
    let mut rng = rng::child(cfg.seed, index as u64);
    let mut c = compose(pool, template, cfg, &mut rng)?;
    c.scene.meta.scene_id = scene_name(index);
    Ok(c)
}

pub fn scene_name(index: usize) -> String {
    format!("scene_{index:05}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Overlap { a: u32, b: u32 },
    NonContiguousIds { ids: Vec<u32> },
    UnmappedInstance { instance: u32 },
    LabelMismatch { point: usize, sem: u32, ins: u32, expected: u32 },
    TooManyPoints { count: usize, tau: usize },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Machine check of a composed scene's postconditions. Footprints are
/// compared in the pre-rotation frame recorded in the scene metadata.
pub fn validate_scene(scene: &SceneFile, cfg: &ComposerConfig, margin: f64) -> ValidationReport {
    let mut violations = Vec::new();
    let meta = &scene.meta;
    let cloud = &scene.cloud;

    if cloud.len() > cfg.tau {
        violations.push(Violation::TooManyPoints {
            count: cloud.len(),
            tau: cfg.tau,
        });
    }

    let ids: Vec<u32> = meta.instance_classes.keys().copied().collect();
    if ids.iter().enumerate().any(|(i, &id)| id != i as u32 + 1) {
        violations.push(Violation::NonContiguousIds { ids: ids.clone() });
    }

    let mut unmapped = BTreeSet::new();
    let mut mismatch = None;
    for (i, (&sem, &ins)) in cloud.sem().iter().zip(cloud.ins()).enumerate() {
        let expected = if ins == 0 {
            Some(meta.background_class)
        } else {
            meta.instance_classes.get(&ins).copied()
        };
        match expected {
            None => {
                unmapped.insert(ins);
            }
            Some(e) if e != sem && mismatch.is_none() => {
                mismatch = Some(Violation::LabelMismatch {
                    point: i,
                    sem,
                    ins,
                    expected: e,
                });
            }
            _ => {}
        }
    }
    violations.extend(unmapped.into_iter().map(|instance| Violation::UnmappedInstance { instance }));
    violations.extend(mismatch);

    let unspin = YawTransform::rotation(-meta.scene_yaw, [meta.scene_pivot[0], meta.scene_pivot[1], 0.0]);
    let mut boxes: BTreeMap<u32, Aabb> = BTreeMap::new();
    if let Ok(unspin) = unspin {
        for (p, &ins) in cloud.points().iter().zip(cloud.ins()) {
            if ins == 0 {
                continue;
            }
            let q = unspin.apply_point(*p);
            boxes
                .entry(ins)
                .and_modify(|b| {
                    for (k, v) in q.iter().enumerate() {
                        b.min[k] = b.min[k].min(*v);
                        b.max[k] = b.max[k].max(*v);
                    }
                })
                .or_insert(Aabb { min: q, max: q });
        }
    }
    let check_margin = (margin - VALIDATION_TOLERANCE_M).max(0.0);
    let boxes: Vec<(u32, Aabb)> = boxes.into_iter().collect();
    for (i, (a_id, a)) in boxes.iter().enumerate() {
        for (b_id, b) in &boxes[i + 1..] {
            if xy_overlap(a, b, check_margin) {
                violations.push(Violation::Overlap { a: *a_id, b: *b_id });
            }
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assetio::{read_scene_ply, write_scene_ply, LabelMap};
    use crate::objectpool::assign_class;
    use crate::rng::seeded;

    /// A box-shaped object sampled on its surface-ish volume.
    fn block(w: f64, d: f64, h: f64, n: usize, seed: u64) -> LabeledCloud {
        let mut r = seeded(seed);
        let pts = (0..n)
            .map(|_| [r.random_range(0.0..w), r.random_range(0.0..d), r.random_range(0.0..h)])
            .collect();
        LabeledCloud::from_points(pts, [200, 100, 50]).unwrap()
    }

    fn asset(class: u32, w: f64, d: f64, h: f64, n: usize) -> ObjectAsset {
        assign_class(&block(w, d, h, n, class as u64), class, &LabelMap::scannet20())
            .unwrap()
            .with_id(format!("a{class}"))
    }

    #[test]
    fn default_template_layout() {
        let t = SceneTemplate::default();
        assert_eq!(t.k(), 9);
        assert_eq!(t.slots[0].center, [-1.5, 1.5]);
        assert_eq!(t.slots[4].center, [0.0, 0.0]);
        assert_eq!(t.slots[8].center, [1.5, -1.5]);
        assert_eq!(t.slots.iter().map(|s| s.id).collect::<Vec<_>>(), (1..=9).collect::<Vec<_>>());
        assert_eq!(SceneTemplate::for_k(5, 1.0).unwrap().k(), 5);
    }

    #[test]
    fn single_asset_fills_all_nine_slots() {
        let pool = [asset(5, 0.5, 0.5, 0.9, 500)];
        let t = SceneTemplate::default();
        let cfg = ComposerConfig::for_template(&t);
        let c = compose(&pool, &t, &cfg, &mut seeded(1)).unwrap();
        let ids: BTreeSet<u32> = c.scene.cloud.ins().iter().copied().collect();
        assert_eq!(ids, (1..=9).collect());
        assert!(c.scene.cloud.sem().iter().all(|&s| s == 5));
        assert!(c.scene.meta.skipped_slots.is_empty());
        assert!(validate_scene(&c.scene, &cfg, cfg.margin).is_ok());
    }

    #[test]
    fn oversized_scene_downsampled_to_tau() {
        let pool: Vec<_> = (0..9).map(|i| asset(i + 1, 0.6, 0.6, 1.0, 30_000)).collect();
        let t = SceneTemplate::default();
        let cfg = ComposerConfig::for_template(&t);
        let c = compose(&pool, &t, &cfg, &mut seeded(2)).unwrap();
        assert_eq!(c.raw_points, 270_000);
        assert_eq!(c.scene.cloud.len(), 200_000);
    }

    #[test]
    fn under_budget_keeps_everything() {
        let pool = [asset(5, 0.5, 0.5, 0.9, 1000)];
        let t = SceneTemplate::default();
        let cfg = ComposerConfig::for_template(&t);
        assert_eq!(compose(&pool, &t, &cfg, &mut seeded(3)).unwrap().scene.cloud.len(), 9000);
    }

    #[test]
    fn config_errors() {
        let t = SceneTemplate::default();
        let cfg = ComposerConfig::for_template(&t);
        assert!(matches!(compose(&[], &t, &cfg, &mut seeded(0)), Err(ComposeError::Config(_))));
        let bad = ComposerConfig { k: 4, ..cfg };
        assert!(matches!(
            compose(&[asset(5, 1.0, 1.0, 1.0, 10)], &t, &bad, &mut seeded(0)),
            Err(ComposeError::Config(_))
        ));
    }

    #[test]
    fn shift_clears_oversized_neighbor() {
        let a = Aabb::new([-1.0, -1.0, 0.0], [1.0, 1.0, 1.0]).unwrap();
        // 2 m footprint centered 1.5 m to the right
        let b = Aabb::new([0.5, -1.0, 0.0], [2.5, 1.0, 1.0]).unwrap();
        let s = find_shift(&b, &[a], 0.05, 0.05, 3.0).unwrap();
        // 1-D oracle: need b.min + d - m > a.max + m, so d > 0.6
        let needed = a.max[0] - b.min[0] + 2.0 * 0.05;
        assert_eq!(s[1], 0.0);
        assert!(s[0] > needed && s[0] - needed <= 0.05 + 1e-12, "{s:?}");
        assert!(!xy_overlap(&a, &b.translated([s[0], 0.0, 0.0]), 0.05));
    }

    #[test]
    fn exhausted_shift_is_skipped() {
        let wall = Aabb::new([-1.0, -1.0, 0.0], [10.0, 10.0, 1.0]).unwrap();
        let b = Aabb::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]).unwrap();
        assert_eq!(find_shift(&b, &[wall], 0.05, 0.05, 3.0), None);
    }

    #[test]
    fn skipped_slots_are_recorded_and_ids_compacted() {
        // 5 m wide objects on a 1.5 m grid cannot all fit within the shift budget.
        let pool = [asset(5, 5.0, 5.0, 1.0, 200)];
        let t = SceneTemplate::default();
        let cfg = ComposerConfig::for_template(&t);
        let c = compose(&pool, &t, &cfg, &mut seeded(4)).unwrap();
        let meta = &c.scene.meta;
        assert!(!meta.skipped_slots.is_empty());
        let placed = 9 - meta.skipped_slots.len() as u32;
        assert_eq!(meta.instance_classes.keys().copied().collect::<Vec<_>>(), (1..=placed).collect::<Vec<_>>());
        assert_eq!(c.placements.iter().filter(|p| p.instance.is_none()).count(), meta.skipped_slots.len());
        assert!(validate_scene(&c.scene, &cfg, cfg.margin).is_ok());
    }

    #[test]
    fn coincident_instances_reported_once() {
        let mut cloud = LabeledCloud::with_capacity(4);
        for ins in [1, 2] {
            cloud.push([0.0, 0.0, 0.0], [0; 3], 5, ins).unwrap();
            cloud.push([1.0, 1.0, 1.0], [0; 3], 5, ins).unwrap();
        }
        let mut meta = SceneMeta::default();
        meta.instance_classes.insert(1, 5);
        meta.instance_classes.insert(2, 5);
        let report = validate_scene(&SceneFile { cloud, meta }, &ComposerConfig::default(), 0.05);
        assert_eq!(report.violations, vec![Violation::Overlap { a: 1, b: 2 }]);
    }

    #[test]
    fn validation_flags_each_kind() {
        let mut cloud = LabeledCloud::with_capacity(3);
        cloud.push([0.0; 3], [0; 3], 5, 1).unwrap();
        cloud.push([5.0, 0.0, 0.0], [0; 3], 6, 3).unwrap();
        cloud.push([9.0, 0.0, 0.0], [0; 3], 1, 7).unwrap();
        let mut meta = SceneMeta::default();
        meta.instance_classes.insert(1, 5);
        meta.instance_classes.insert(3, 7);
        let cfg = ComposerConfig {
            tau: 2,
            ..ComposerConfig::default()
        };
        let v = validate_scene(&SceneFile { cloud, meta }, &cfg, 0.05).violations;
        assert!(v.contains(&Violation::TooManyPoints { count: 3, tau: 2 }));
        assert!(v.contains(&Violation::NonContiguousIds { ids: vec![1, 3] }));
        assert!(v.contains(&Violation::UnmappedInstance { instance: 7 }));
        assert!(v.iter().any(|x| matches!(x, Violation::LabelMismatch { ins: 3, expected: 7, .. })));
    }

    #[test]
    fn scene_rotation_preserves_labels_and_distances() {
        let pool = [asset(5, 0.5, 0.4, 0.9, 300), asset(7, 0.8, 0.8, 0.7, 300)];
        let t = SceneTemplate::default();
        let cfg = ComposerConfig::for_template(&t);
        let c = compose(&pool, &t, &cfg, &mut seeded(9)).unwrap();
        let m = &c.scene.meta;
        assert!(m.scene_yaw >= 0.0 && m.scene_yaw < TAU);
        // undo the recorded scene spin: every instance must sit near a slot center
        let unspin = YawTransform::rotation(-m.scene_yaw, [m.scene_pivot[0], m.scene_pivot[1], 0.0]).unwrap();
        let flat = apply_transform(&c.scene.cloud, &unspin).unwrap();
        for p in &c.placements {
            let inst = p.instance.unwrap();
            let idx: Vec<usize> = (0..flat.len()).filter(|&i| flat.ins()[i] == inst).collect();
            let part = flat.select(&idx);
            assert!(part.sem().iter().all(|&s| s == p.class_id));
            let cen = part.centroid().unwrap();
            let slot = t.slots[p.slot as usize - 1].center;
            let dx = cen[0] - slot[0] - p.shift[0];
            let dy = cen[1] - slot[1] - p.shift[1];
            assert!((dx * dx + dy * dy).sqrt() < 1e-4, "slot {} off by {dx},{dy}", p.slot);
        }
    }

    #[test]
    fn floor_slab_is_background() {
        let pool = [asset(5, 0.5, 0.5, 0.9, 100)];
        let t = SceneTemplate::default();
        let cfg = ComposerConfig {
            floor: true,
            ..ComposerConfig::for_template(&t)
        };
        let c = compose(&pool, &t, &cfg, &mut seeded(5)).unwrap();
        assert_eq!(c.scene.meta.background_class, 2);
        assert!(c.scene.cloud.ins().contains(&0));
        c.scene.check_labels().unwrap();
        assert!(validate_scene(&c.scene, &cfg, cfg.margin).is_ok());
    }

    #[test]
    fn batch_is_deterministic_and_round_trips() {
        let pool = [asset(5, 0.5, 0.5, 0.9, 200), asset(3, 1.2, 0.6, 0.9, 200)];
        let t = SceneTemplate::default();
        let cfg = ComposerConfig {
            seed: 77,
            ..ComposerConfig::for_template(&t)
        };
        assert!(generate_batch(&pool, &t, &cfg, 0).unwrap().is_empty());
        let a = generate_batch(&pool, &t, &cfg, 6).unwrap();
        let b = generate_batch(&pool, &t, &cfg, 6).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let bytes = write_scene_ply(&x.scene).unwrap();
            assert_eq!(bytes, write_scene_ply(&y.scene).unwrap());
            assert_eq!(read_scene_ply(&bytes).unwrap(), x.scene);
        }
        assert_ne!(a[0].scene.cloud, a[1].scene.cloud);
        assert_eq!(a[3].scene.meta.scene_id, "scene_00003");
    }
}
