//! The class-labeled object pool: per-class size normalization, label
//! assignment, capacity accounting and class-distribution statistics.

use crate::assetio::{LabelMap, SceneFile};
use crate::geometry::{bounding_box, LabeledCloud};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use thiserror::Error;

/// Classes holding less than this share of all points are long-tail.
pub const LONG_TAIL_FRACTION: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoolError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("asset {0:?} has zero height")]
    DegenerateAsset(String),
    #[error("asset cloud is empty")]
    EmptyAsset,
    #[error("capacity {0} overflows")]
    Overflow(String),
}

/// One pooled object: every point carries `class_id` and instance 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectAsset {
    cloud: LabeledCloud,
    class_id: u32,
    pub asset_id: String,
    pub provenance: Vec<crate::assetio::StageRecord>,
}

impl ObjectAsset {
    pub fn cloud(&self) -> &LabeledCloud {
        &self.cloud
    }

    pub fn class_id(&self) -> u32 {
        self.class_id
    }

    pub fn with_id(mut self, asset_id: impl Into<String>) -> Self {
        self.asset_id = asset_id.into();
        self
    }
}

/// Canonical height and scale jitter per class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeSpec {
    pub canonical_height_m: f64,
    pub jitter_lo: f64,
    pub jitter_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SizeTable {
    classes: BTreeMap<u32, SizeSpec>,
}

pub const DEFAULT_JITTER: (f64, f64) = (0.9, 1.1);

impl SizeTable {
    pub fn from_label_map(map: &LabelMap, jitter: (f64, f64)) -> Result<Self, PoolError> {
        let mut t = SizeTable::default();
        for c in &map.classes {
            t.insert(
                c.id,
                SizeSpec {
                    canonical_height_m: c.canonical_height_m,
                    jitter_lo: jitter.0,
                    jitter_hi: jitter.1,
                },
            )?;
        }
        Ok(t)
    }

    pub fn insert(&mut self, class_id: u32, spec: SizeSpec) -> Result<(), PoolError> {
        if !(spec.canonical_height_m > 0.0 && spec.canonical_height_m.is_finite()) {
            return Err(PoolError::Config(format!(
                "class {class_id}: canonical height must be positive"
            )));
        }
        if !(spec.jitter_lo > 0.0 && spec.jitter_lo <= spec.jitter_hi && spec.jitter_hi.is_finite()) {
            return Err(PoolError::Config(format!(
                "class {class_id}: need 0 < jitter_lo <= jitter_hi"
            )));
        }
        self.classes.insert(class_id, spec);
        Ok(())
    }

    pub fn get(&self, class_id: u32) -> Option<&SizeSpec> {
        self.classes.get(&class_id)
    }

    /// Parses `{"classes": {"<id>": {canonical_height_m, jitter_lo, jitter_hi}}}`.
    pub fn from_json(bytes: &[u8]) -> Result<Self, PoolError> {
        let raw: SizeTable = serde_json::from_slice(bytes).map_err(|e| PoolError::Config(format!("size table: {e}")))?;
        let mut t = SizeTable::default();
        for (id, spec) in raw.classes {
            t.insert(id, spec)?;
        }
        Ok(t)
    }
}

/// Labels every point with `class_id` and clears instance ids.
pub fn assign_class(cloud: &LabeledCloud, class_id: u32, labels: &LabelMap) -> Result<ObjectAsset, PoolError> {
    if !labels.contains(class_id) {
        return Err(PoolError::Config(format!("unknown class id {class_id}")));
    }
    ObjectAsset::from_cloud(cloud.clone(), class_id, String::new(), Vec::new())
}

impl ObjectAsset {
    /// Wraps a cloud as an asset, overwriting its labels.
    pub fn from_cloud(
        mut cloud: LabeledCloud,
        class_id: u32,
        asset_id: String,
        provenance: Vec<crate::assetio::StageRecord>,
    ) -> Result<Self, PoolError> {
        if cloud.is_empty() {
            return Err(PoolError::EmptyAsset);
        }
        cloud.set_labels(class_id, 0);
        Ok(Self {
            cloud,
            class_id,
            asset_id,
            provenance,
        })
    }
}

/// Scales the asset uniformly about its centroid so its height is the
/// class's canonical height times a jitter factor, then rests it on z = 0
/// with its (x, y) centroid at the origin.
pub fn normalize_size<R: Rng + ?Sized>(
    asset: &ObjectAsset,
    table: &SizeTable,
    rng: &mut R,
) -> Result<ObjectAsset, PoolError> {
    let spec = table
        .get(asset.class_id)
        .ok_or_else(|| PoolError::Config(format!("class {} missing from size table", asset.class_id)))?;
    let bb = bounding_box(&asset.cloud).map_err(|_| PoolError::EmptyAsset)?;
    let height = bb.max[2] - bb.min[2];
    if !(height > 0.0) {
        return Err(PoolError::DegenerateAsset(asset.asset_id.clone()));
    }
    let jitter = if spec.jitter_lo == spec.jitter_hi {
        spec.jitter_lo
    } else {
        rng.random_range(spec.jitter_lo..=spec.jitter_hi)
    };
    let factor = spec.canonical_height_m * jitter / height;

    let mut cloud = asset.cloud.clone();
    let c = cloud.centroid().expect("non-empty");
    cloud.scale_about(c, factor);
    let min_z = c[2] + (bb.min[2] - c[2]) * factor;
    cloud.translate([-c[0], -c[1], -min_z]);
    Ok(ObjectAsset {
        cloud,
        ..asset.clone()
    })
}

/// Number of distinct objects the generator can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct CapacityReport {
    pub C: u64,
    pub N: u64,
    pub M: u64,
    pub P: u64,
    pub total: u64,
}

/// classes × structures × textures × drag variants, without wraparound.
pub fn capacity(classes: u64, structures: u64, textures: u64, drags: u64) -> Result<CapacityReport, PoolError> {
    let total = classes
        .checked_mul(structures)
        .and_then(|v| v.checked_mul(textures))
        .and_then(|v| v.checked_mul(drags))
        .ok_or_else(|| PoolError::Overflow(format!("{classes}×{structures}×{textures}×{drags}")))?;
    Ok(CapacityReport {
        C: classes,
        N: structures,
        M: textures,
        P: drags,
        total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStat {
    pub class_id: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_name: Option<String>,
    pub point_count: u64,
    pub fraction: f64,
    pub object_count: u64,
    pub long_tail: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassStats {
    pub total_points: u64,
    pub long_tail_threshold: f64,
    pub classes: Vec<ClassStat>,
}

impl ClassStats {
    pub fn get(&self, class_id: u32) -> Option<&ClassStat> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }

    pub fn long_tail(&self) -> impl Iterator<Item = &ClassStat> {
        self.classes.iter().filter(|c| c.long_tail)
    }

    pub fn with_names(mut self, labels: &LabelMap) -> Self {
        for c in &mut self.classes {
            c.class_name = labels.get(c.class_id).map(|e| e.name.clone());
        }
        self
    }

    /// Horizontal bar chart of class fractions.
    pub fn to_svg(&self) -> String {
        let row = 22.0;
        let label_w = 160.0;
        let bar_w = 400.0;
        let height = row * self.classes.len() as f64 + 30.0;
        let max = self.classes.iter().map(|c| c.fraction).fold(0.0, f64::max).max(1e-12);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="12">"#,
            label_w + bar_w + 80.0
        );
        for (i, c) in self.classes.iter().enumerate() {
            let y = 10.0 + row * i as f64;
            let name = c.class_name.clone().unwrap_or_else(|| c.class_id.to_string());
            let fill = if c.long_tail { "#d62728" } else { "#1f77b4" };
            let _ = writeln!(
                s,
                r#"  <text x="4" y="{}">{}</text><rect x="{label_w}" y="{y}" width="{:.2}" height="{}" fill="{fill}"/><text x="{:.2}" y="{}">{:.2}%</text>"#,
                y + 14.0,
                xml_escape(&name),
                bar_w * c.fraction / max,
                row - 6.0,
                label_w + bar_w * c.fraction / max + 4.0,
                y + 14.0,
                100.0 * c.fraction
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Per-class point tallies across scenes; objects are distinct
/// (scene, instance) pairs.
pub fn class_stats(scenes: &[SceneFile]) -> ClassStats {
    let mut points: BTreeMap<u32, u64> = BTreeMap::new();
    let mut objects: BTreeMap<u32, BTreeSet<(usize, u32)>> = BTreeMap::new();
    for (si, scene) in scenes.iter().enumerate() {
        for (&sem, &ins) in scene.cloud.sem().iter().zip(scene.cloud.ins()) {
            *points.entry(sem).or_default() += 1;
            let set = objects.entry(sem).or_default();
            if ins != 0 {
                set.insert((si, ins));
            }
        }
    }
    let total: u64 = points.values().sum();
    let classes = points
        .iter()
        .map(|(&class_id, &count)| {
            let fraction = count as f64 / total as f64;
            ClassStat {
                class_id,
                class_name: None,
                point_count: count,
                fraction,
                object_count: objects.get(&class_id).map_or(0, |s| s.len() as u64),
                long_tail: fraction < LONG_TAIL_FRACTION,
            }
        })
        .collect();
    ClassStats {
        total_points: total,
        long_tail_threshold: LONG_TAIL_FRACTION,
        classes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assetio::SceneMeta;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn column(height: f64, n: usize) -> LabeledCloud {
        let pts = (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                [3.0 + 0.2 * (t * 7.0).sin(), -1.0 + 0.3 * t, 5.0 + height * t]
            })
            .collect();
        LabeledCloud::from_points(pts, [9, 9, 9]).unwrap()
    }

    fn fixed_table(class_id: u32, h: f64) -> SizeTable {
        let mut t = SizeTable::default();
        t.insert(
            class_id,
            SizeSpec {
                canonical_height_m: h,
                jitter_lo: 1.0,
                jitter_hi: 1.0,
            },
        )
        .unwrap();
        t
    }

    fn z_extent(c: &LabeledCloud) -> f64 {
        let b = bounding_box(c).unwrap();
        b.max[2] - b.min[2]
    }

    #[test]
    fn chair_normalized_to_canonical_height() {
        let labels = LabelMap::scannet20();
        let asset = assign_class(&column(2.0, 50), 5, &labels).unwrap();
        let out = normalize_size(&asset, &fixed_table(5, 0.9), &mut seeded(0)).unwrap();
        assert!((z_extent(out.cloud()) - 0.9).abs() < 1e-6);
        assert_eq!(out.cloud().len(), 50);
    }

    #[test]
    fn canonical_height_is_fixed_point() {
        let labels = LabelMap::scannet20();
        let asset = assign_class(&column(0.9, 20), 5, &labels).unwrap();
        let out = normalize_size(&asset, &fixed_table(5, 0.9), &mut seeded(0)).unwrap();
        assert!((z_extent(out.cloud()) - 0.9).abs() < 1e-6);
    }

    #[test]
    fn output_rests_on_floor_centered() {
        let labels = LabelMap::scannet20();
        let asset = assign_class(&column(1.3, 40), 7, &labels).unwrap();
        let table = SizeTable::from_label_map(&labels, DEFAULT_JITTER).unwrap();
        let out = normalize_size(&asset, &table, &mut seeded(3)).unwrap();
        let b = bounding_box(out.cloud()).unwrap();
        assert!(b.min[2].abs() < 1e-6);
        let c = out.cloud().centroid().unwrap();
        assert!(c[0].abs() < 1e-6 && c[1].abs() < 1e-6);
        let h = z_extent(out.cloud());
        assert!((0.75 * 0.9 - 1e-9..=0.75 * 1.1 + 1e-9).contains(&h), "{h}");
    }

    #[test]
    fn normalize_errors() {
        let labels = LabelMap::scannet20();
        let flat = LabeledCloud::from_points(vec![[0.0, 0.0, 1.0], [1.0, 0.0, 1.0]], [0; 3]).unwrap();
        let asset = assign_class(&flat, 5, &labels).unwrap();
        assert!(matches!(
            normalize_size(&asset, &fixed_table(5, 1.0), &mut seeded(0)),
            Err(PoolError::DegenerateAsset(_))
        ));
        let asset = assign_class(&column(1.0, 5), 7, &labels).unwrap();
        assert!(matches!(
            normalize_size(&asset, &fixed_table(5, 1.0), &mut seeded(0)),
            Err(PoolError::Config(_))
        ));
    }

    #[test]
    fn size_table_rejects_bad_specs() {
        let mut t = SizeTable::default();
        let bad = SizeSpec {
            canonical_height_m: 1.0,
            jitter_lo: 1.2,
            jitter_hi: 1.1,
        };
        assert!(t.insert(1, bad).is_err());
        assert!(t
            .insert(1, SizeSpec { canonical_height_m: 0.0, ..bad })
            .is_err());
    }

    #[test]
    fn assign_class_cases() {
        let labels = LabelMap {
            classes: vec![
                crate::assetio::ClassEntry { id: 0, name: "unlabeled".into(), canonical_height_m: 1.0 },
                crate::assetio::ClassEntry { id: 5, name: "chair".into(), canonical_height_m: 1.0 },
            ],
        };
        let a = assign_class(&column(1.0, 10), 5, &labels).unwrap();
        assert!(a.cloud().sem().iter().all(|&s| s == 5));
        assert!(a.cloud().ins().iter().all(|&s| s == 0));
        let b = assign_class(&column(1.0, 10), 0, &labels).unwrap();
        assert!(b.cloud().sem().iter().all(|&s| s == 0));

        let mut prior = column(1.0, 10);
        prior.set_labels(3, 7);
        let c = assign_class(&prior, 5, &labels).unwrap();
        assert!(c.cloud().sem().iter().all(|&s| s == 5) && c.cloud().ins().iter().all(|&s| s == 0));
        assert_eq!(c.class_id(), 5);
        assert!(matches!(assign_class(&prior, 99, &labels), Err(PoolError::Config(_))));
    }

    #[test]
    fn capacity_cases() {
        // enumeration oracle
        let mut count = 0u64;
        for _c in 0..2 {
            for _n in 0..3 {
                for _m in 0..4 {
                    for _p in 0..5 {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(capacity(2, 3, 4, 5).unwrap().total, count);
        assert_eq!(capacity(7, 0, 3, 3).unwrap().total, 0);
        assert_eq!(capacity(1, 1, 1, 1).unwrap().total, 1);
        assert!(matches!(capacity(u64::MAX, 2, 1, 1), Err(PoolError::Overflow(_))));
    }

    fn scene(labels: &[(u32, u32)]) -> SceneFile {
        let mut cloud = LabeledCloud::with_capacity(labels.len());
        let mut meta = SceneMeta::default();
        for &(sem, ins) in labels {
            cloud.push([0.0; 3], [0; 3], sem, ins).unwrap();
            if ins > 0 {
                meta.instance_classes.insert(ins, sem);
            }
        }
        SceneFile { cloud, meta }
    }

    #[test]
    fn stats_arithmetic() {
        let mut labels = vec![(5, 1); 99];
        labels.push((33, 2));
        let s = class_stats(&[scene(&labels)]);
        assert_eq!(s.total_points, 100);
        assert!((s.get(5).unwrap().fraction - 0.99).abs() < 1e-12);
        assert!((s.get(33).unwrap().fraction - 0.01).abs() < 1e-12);
        assert!(!s.get(33).unwrap().long_tail, "exactly 1% is not below 1%");

        let doubled = class_stats(&[scene(&labels), scene(&labels)]);
        assert_eq!(doubled.get(5).unwrap().point_count, 198);
        assert_eq!(doubled.get(5).unwrap().object_count, 2);
        assert_eq!(doubled.get(5).unwrap().fraction, s.get(5).unwrap().fraction);
    }

    #[test]
    fn empty_stats() {
        let s = class_stats(&[]);
        assert_eq!(s.total_points, 0);
        assert!(s.classes.is_empty());
    }

    #[test]
    fn size_table_json() {
        let t = SizeTable::from_json(br#"{"classes":{"5":{"canonical_height_m":0.9,"jitter_lo":1.0,"jitter_hi":1.0}}}"#).unwrap();
        assert_eq!(t.get(5).unwrap().canonical_height_m, 0.9);
        let bad = br#"{"classes":{"5":{"canonical_height_m":-1,"jitter_lo":1.0,"jitter_hi":1.0}}}"#;
        assert!(matches!(SizeTable::from_json(bad), Err(PoolError::Config(_))));
    }

    #[test]
    fn stats_match_per_point_tally() {
        let mut rng = seeded(42);
        let scenes: Vec<SceneFile> = (0..10)
            .map(|_| {
                let n = rng.random_range(1..200);
                let labels: Vec<(u32, u32)> = (0..n)
                    .map(|_| {
                        let ins = rng.random_range(0..6u32);
                        (if ins == 0 { 0 } else { ins % 3 + 1 }, ins)
                    })
                    .collect();
                scene(&labels)
            })
            .collect();
        let stats = class_stats(&scenes);
        let mut total = 0u64;
        for class in 0..4u32 {
            let mut pts = 0u64;
            let mut objs = BTreeSet::new();
            for (si, s) in scenes.iter().enumerate() {
                for i in 0..s.cloud.len() {
                    if s.cloud.sem()[i] == class {
                        pts += 1;
                        if s.cloud.ins()[i] != 0 {
                            objs.insert((si, s.cloud.ins()[i]));
                        }
                    }
                }
            }
            total += pts;
            if pts > 0 {
                let st = stats.get(class).unwrap();
                assert_eq!(st.point_count, pts);
                assert_eq!(st.object_count, objs.len() as u64);
            }
        }
        assert_eq!(stats.total_points, total);
        let sum: f64 = stats.classes.iter().map(|c| c.fraction).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn svg_marks_long_tail() {
        let mut labels = vec![(5, 1); 200];
        labels.push((33, 2));
        let svg = class_stats(&[scene(&labels)]).with_names(&LabelMap::scannet20()).to_svg();
        assert!(svg.starts_with("<svg") && svg.contains("toilet") && svg.contains("#d62728"));
    }

    proptest! {
        #[test]
        fn capacity_symmetric(a in 0u64..1000, b in 0u64..1000, c in 0u64..1000, d in 0u64..1000) {
            let t = capacity(a, b, c, d).unwrap().total;
            prop_assert_eq!(t, capacity(d, c, b, a).unwrap().total);
            prop_assert_eq!(t, capacity(b, a, d, c).unwrap().total);
        }

        #[test]
        fn normalization_scales_uniformly(h in 0.1f64..5.0, target in 0.2f64..3.0, seed in any::<u64>()) {
            let labels = LabelMap::scannet20();
            let src = column(h, 12);
            let asset = assign_class(&src, 5, &labels).unwrap();
            let out = normalize_size(&asset, &fixed_table(5, target), &mut seeded(seed)).unwrap();
            let d = |c: &LabeledCloud, i: usize, j: usize| {
                let (a, b) = (c.points()[i], c.points()[j]);
                ((a[0]-b[0]).powi(2) + (a[1]-b[1]).powi(2) + (a[2]-b[2]).powi(2)).sqrt()
            };
            let ratio = d(out.cloud(), 0, 11) / d(&src, 0, 11);
            for (i, j) in [(1, 5), (2, 9), (3, 4)] {
                prop_assert!((d(out.cloud(), i, j) / d(&src, i, j) - ratio).abs() < 1e-6 * ratio);
            }
        }
    }
}
