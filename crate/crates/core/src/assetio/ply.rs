//! Labeled scene PLY: binary little-endian, one vertex element with
//! `x y z` floats, `red green blue` uchars and `semantic_label
//! instance_label` ushorts. Scene metadata rides in `comment vfz:key=value`
//! header lines.

use super::AssetIoError;
use crate::geometry::LabeledCloud;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write;

const RECORD_BYTES: usize = 3 * 4 + 3 + 2 * 2;
const COMMENT_PREFIX: &str = "vfz:";

const PROPERTIES: [(&str, &str); 8] = [
    ("float", "x"),
    ("float", "y"),
    ("float", "z"),
    ("uchar", "red"),
    ("uchar", "green"),
    ("uchar", "blue"),
    ("ushort", "semantic_label"),
    ("ushort", "instance_label"),
];

/// Scene-level metadata stored alongside the points.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneMeta {
    pub scene_id: String,
    pub seed: u64,
    pub template_id: String,
    /// Semantic class of points with instance id 0.
    pub background_class: u32,
    /// Instance id -> semantic class id.
    pub instance_classes: BTreeMap<u32, u32>,
    /// Final whole-scene yaw and the (x, y) pivot it was applied about.
    pub scene_yaw: f64,
    pub scene_pivot: [f64; 2],
    /// Template slots whose object could not be placed.
    pub skipped_slots: Vec<u32>,
    /// Unrecognized `vfz:` keys, preserved verbatim.
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneFile {
    pub cloud: LabeledCloud,
    pub meta: SceneMeta,
}

impl SceneFile {
    /// Checks that every labeled instance is mapped and that each point's
    /// semantic label agrees with its instance's class.
    pub fn check_labels(&self) -> Result<(), AssetIoError> {
        let m = &self.meta;
        for (i, (&sem, &ins)) in self.cloud.sem().iter().zip(self.cloud.ins()).enumerate() {
            let expected = if ins == 0 {
                m.background_class
            } else {
                *m.instance_classes.get(&ins).ok_or_else(|| {
                    AssetIoError::SceneInvariant(format!("point {i}: instance {ins} missing from class map"))
                })?
            };
            if sem != expected {
                return Err(AssetIoError::SceneInvariant(format!(
                    "point {i}: semantic label {sem} but instance {ins} maps to {expected}"
                )));
            }
        }
        Ok(())
    }
}

fn check_value(key: &str, value: &str) -> Result<(), AssetIoError> {
    if value.contains(['\n', '\r']) || key.contains(['\n', '\r', '=']) || key.is_empty() {
        return Err(AssetIoError::Metadata(format!("{key:?} cannot be stored in a header comment")));
    }
    Ok(())
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

const RESERVED_KEYS: [&str; 8] = [
    "scene_id",
    "seed",
    "template_id",
    "background_class",
    "instance_classes",
    "scene_yaw",
    "scene_pivot",
    "skipped_slots",
];

fn meta_pairs(m: &SceneMeta) -> Vec<(String, String)> {
    let mut pairs = vec![
        ("scene_id".to_string(), m.scene_id.clone()),
        ("seed".into(), m.seed.to_string()),
        ("template_id".into(), m.template_id.clone()),
        ("background_class".into(), m.background_class.to_string()),
        (
            "instance_classes".into(),
            join(m.instance_classes.iter().map(|(i, c)| format!("{i}:{c}"))),
        ),
        ("scene_yaw".into(), m.scene_yaw.to_string()),
        ("scene_pivot".into(), join(m.scene_pivot)),
        ("skipped_slots".into(), join(&m.skipped_slots)),
    ];
    pairs.extend(m.extra.iter().map(|(k, v)| (k.clone(), v.clone())));
    pairs
}

fn label16(what: &'static str, value: u32) -> Result<u16, AssetIoError> {
    u16::try_from(value).map_err(|_| AssetIoError::LabelRange { what, value })
}

pub fn write_scene_ply(scene: &SceneFile) -> Result<Vec<u8>, AssetIoError> {
    scene.check_labels()?;
    if let Some(k) = scene.meta.extra.keys().find(|k| RESERVED_KEYS.contains(&k.as_str())) {
        return Err(AssetIoError::Metadata(format!("extra key {k:?} shadows a built-in field")));
    }
    let cloud = &scene.cloud;
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    for (k, v) in meta_pairs(&scene.meta) {
        check_value(&k, &v)?;
        writeln!(header, "comment {COMMENT_PREFIX}{k}={v}").expect("write to String");
    }
    writeln!(header, "element vertex {}", cloud.len()).expect("write to String");
    for (ty, name) in PROPERTIES {
        writeln!(header, "property {ty} {name}").expect("write to String");
    }
    header.push_str("end_header\n");

    let mut out = Vec::with_capacity(header.len() + cloud.len() * RECORD_BYTES);
    out.extend_from_slice(header.as_bytes());
    for i in 0..cloud.len() {
        for c in cloud.points()[i] {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
        out.extend_from_slice(&cloud.colors()[i]);
        out.extend_from_slice(&label16("semantic label", cloud.sem()[i])?.to_le_bytes());
        out.extend_from_slice(&label16("instance label", cloud.ins()[i])?.to_le_bytes());
    }
    Ok(out)
}

fn ply_err(msg: impl Into<String>) -> AssetIoError {
    AssetIoError::Ply(msg.into())
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, AssetIoError> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|s| s.parse().map_err(|_| ply_err(format!("bad {key} entry {s:?}"))))
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, AssetIoError> {
    v.parse().map_err(|_| ply_err(format!("bad {key} value {v:?}")))
}

fn apply_meta(meta: &mut SceneMeta, key: &str, v: &str) -> Result<(), AssetIoError> {
    match key {
        "scene_id" => meta.scene_id = v.to_string(),
        "seed" => meta.seed = parse_scalar(key, v)?,
        "template_id" => meta.template_id = v.to_string(),
        "background_class" => meta.background_class = parse_scalar(key, v)?,
        "instance_classes" => {
            for pair in parse_list::<String>(key, v)? {
                let (i, c) = pair
                    .split_once(':')
                    .ok_or_else(|| ply_err(format!("bad instance_classes entry {pair:?}")))?;
                meta.instance_classes
                    .insert(parse_scalar(key, i)?, parse_scalar(key, c)?);
            }
        }
        "scene_yaw" => meta.scene_yaw = parse_scalar(key, v)?,
        "scene_pivot" => {
            let p: Vec<f64> = parse_list(key, v)?;
            meta.scene_pivot = p
                .try_into()
                .map_err(|_| ply_err("scene_pivot needs two components"))?;
        }
        "skipped_slots" => meta.skipped_slots = parse_list(key, v)?,
        _ => {
            meta.extra.insert(key.to_string(), v.to_string());
        }
    }
    Ok(())
}

pub fn read_scene_ply(bytes: &[u8]) -> Result<SceneFile, AssetIoError> {
    const END: &[u8] = b"\nend_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| ply_err("missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| ply_err("header is not UTF-8"))?;
    let body = &bytes[end + END.len()..];

    let mut lines = header.lines().map(|l| l.trim_end_matches('\r'));
    if lines.next() != Some("ply") {
        return Err(ply_err("missing 'ply' magic"));
    }
    let mut meta = SceneMeta::default();
    let mut format_seen = false;
    let mut count: Option<usize> = None;
    let mut props = Vec::new();
    for line in lines {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                let rest: Vec<_> = tok.collect();
                if rest != ["binary_little_endian", "1.0"] {
                    return Err(ply_err(format!("unsupported format {:?}", rest.join(" "))));
                }
                format_seen = true;
            }
            Some("comment") => {
                let text = line.trim_start()["comment".len()..].trim_start();
                if let Some(kv) = text.strip_prefix(COMMENT_PREFIX) {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| ply_err(format!("metadata comment without '=': {text:?}")))?;
                    apply_meta(&mut meta, k, v)?;
                }
            }
            Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().unwrap_or("");
                if name != "vertex" || count.is_some() {
                    return Err(ply_err(format!("unexpected element {name:?}")));
                }
                let n = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| ply_err("bad vertex count"))?;
                count = Some(n);
            }
            Some("property") => {
                if count.is_none() {
                    return Err(ply_err("property before element"));
                }
                let ty = tok.next().unwrap_or("");
                let name = tok.next().unwrap_or("");
                props.push((ty.to_string(), name.to_string()));
            }
            Some(other) => return Err(ply_err(format!("unknown header keyword {other:?}"))),
        }
    }
    if !format_seen {
        return Err(ply_err("missing format line"));
    }
    let count = count.ok_or_else(|| ply_err("missing vertex element"))?;
    for (i, (ty, name)) in props.iter().enumerate() {
        match PROPERTIES.get(i) {
            Some((t, n)) if t == ty && n == name => {}
            _ => return Err(ply_err(format!("unexpected property '{ty} {name}' at position {i}"))),
        }
    }
    if props.len() != PROPERTIES.len() {
        return Err(ply_err(format!(
            "missing required property '{} {}'",
            PROPERTIES[props.len()].0,
            PROPERTIES[props.len()].1
        )));
    }
    let needed = count
        .checked_mul(RECORD_BYTES)
        .ok_or_else(|| ply_err("vertex count overflows"))?;
    if body.len() < needed {
        return Err(ply_err(format!(
            "truncated body: {} bytes for {count} vertices ({needed} needed)",
            body.len()
        )));
    }
    if body.len() > needed {
        return Err(ply_err(format!("{} trailing bytes after vertex data", body.len() - needed)));
    }

    let mut cloud = LabeledCloud::with_capacity(count);
    for rec in body.chunks_exact(RECORD_BYTES) {
        let f = |o: usize| f32::from_le_bytes(rec[o..o + 4].try_into().unwrap()) as f64;
        let u = |o: usize| u16::from_le_bytes(rec[o..o + 2].try_into().unwrap()) as u32;
        cloud.push([f(0), f(4), f(8)], [rec[12], rec[13], rec[14]], u(15), u(17))?;
    }
    let scene = SceneFile { cloud, meta };
    scene.check_labels()?;
    Ok(scene)
}

/// JSON copy of the scene metadata for tools that drop PLY comments.
pub fn write_scene_sidecar(meta: &SceneMeta) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(meta).expect("metadata serializes");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_point() -> SceneFile {
        let cloud = LabeledCloud::new(vec![[0.0; 3]], vec![[255, 0, 0]], vec![5], vec![1]).unwrap();
        let mut meta = SceneMeta {
            scene_id: "s0".into(),
            template_id: "grid3x3".into(),
            ..Default::default()
        };
        meta.instance_classes.insert(1, 5);
        SceneFile { cloud, meta }
    }

    #[test]
    fn empty_scene_round_trip() {
        let s = SceneFile::default();
        let bytes = write_scene_ply(&s).unwrap();
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.contains("element vertex 0\n"));
        assert!(text.ends_with("end_header\n"));
        assert_eq!(read_scene_ply(&bytes).unwrap(), s);
    }

    #[test]
    fn single_point_round_trip() {
        let s = one_point();
        let bytes = write_scene_ply(&s).unwrap();
        assert_eq!(read_scene_ply(&bytes).unwrap(), s);
    }

    #[test]
    fn header_layout_is_fixed() {
        let bytes = write_scene_ply(&one_point()).unwrap();
        let text = String::from_utf8_lossy(&bytes);
        let expected = "ply\nformat binary_little_endian 1.0\n\
comment vfz:scene_id=s0\ncomment vfz:seed=0\ncomment vfz:template_id=grid3x3\n\
comment vfz:background_class=0\ncomment vfz:instance_classes=1:5\ncomment vfz:scene_yaw=0\n\
comment vfz:scene_pivot=0,0\ncomment vfz:skipped_slots=\nelement vertex 1\n\
property float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\n\
property uchar blue\nproperty ushort semantic_label\nproperty ushort instance_label\nend_header\n";
        assert!(text.starts_with(expected), "{text}");
        assert_eq!(bytes.len(), expected.len() + RECORD_BYTES);
    }

    #[test]
    fn label_out_of_range_on_write() {
        let cloud = LabeledCloud::new(vec![[0.0; 3]], vec![[0; 3]], vec![70_000], vec![0]).unwrap();
        let s = SceneFile {
            cloud,
            meta: SceneMeta {
                background_class: 70_000,
                ..Default::default()
            },
        };
        assert!(matches!(write_scene_ply(&s), Err(AssetIoError::LabelRange { value: 70_000, .. })));
    }

    #[test]
    fn inconsistent_labels_rejected_both_ways() {
        let mut s = one_point();
        s.cloud.sem_mut()[0] = 6;
        assert!(matches!(write_scene_ply(&s), Err(AssetIoError::SceneInvariant(_))));

        let good = write_scene_ply(&one_point()).unwrap();
        let mut bad = good.clone();
        let n = bad.len();
        bad[n - 4] = 6; // semantic label low byte
        assert!(matches!(read_scene_ply(&bad), Err(AssetIoError::SceneInvariant(_))));
    }

    #[test]
    fn malformed_inputs_name_the_offense() {
        let good = write_scene_ply(&one_point()).unwrap();
        let err = read_scene_ply(&good[..good.len() - 1]).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");

        let swapped = String::from_utf8_lossy(&good).replace("property ushort instance_label", "property ushort weird");
        let err = read_scene_ply(swapped.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("weird"), "{err}");

        let ascii = String::from_utf8_lossy(&good).replace("binary_little_endian", "ascii");
        assert!(read_scene_ply(ascii.as_bytes()).unwrap_err().to_string().contains("format"));

        let missing = String::from_utf8_lossy(&good).replace("property ushort instance_label\n", "");
        let err = read_scene_ply(missing.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("instance_label"), "{err}");

        assert!(read_scene_ply(b"not a ply").is_err());
    }

    #[test]
    fn unknown_metadata_is_preserved() {
        let mut s = one_point();
        s.meta.extra.insert("note".into(), "hello world".into());
        let back = read_scene_ply(&write_scene_ply(&s).unwrap()).unwrap();
        assert_eq!(back.meta.extra["note"], "hello world");
        s.meta.extra.insert("bad".into(), "a\nb".into());
        assert!(matches!(write_scene_ply(&s), Err(AssetIoError::Metadata(_))));
    }

    #[test]
    fn sidecar_is_json() {
        let v: serde_json::Value = serde_json::from_slice(&write_scene_sidecar(&one_point().meta)).unwrap();
        assert_eq!(v["instance_classes"]["1"], 5);
    }

    fn arb_scene() -> impl Strategy<Value = SceneFile> {
        let point = (prop::array::uniform3(-100.0f32..100.0), prop::array::uniform3(any::<u8>()), 0u32..4);
        (prop::collection::vec(point, 0..64), any::<u64>(), -7.0f64..7.0, prop::array::uniform2(-9.0f64..9.0))
            .prop_map(|(pts, seed, yaw, pivot)| {
                let classes = [3u32, 5, 7, 11];
                let mut cloud = LabeledCloud::with_capacity(pts.len());
                let mut meta = SceneMeta {
                    scene_id: format!("scene_{seed}"),
                    seed,
                    template_id: "t".into(),
                    background_class: 0,
                    scene_yaw: yaw,
                    scene_pivot: pivot,
                    ..Default::default()
                };
                for (p, c, ins) in pts {
                    let sem = if ins == 0 { 0 } else { classes[ins as usize] };
                    if ins > 0 {
                        meta.instance_classes.insert(ins, sem);
                    }
                    cloud.push([p[0] as f64, p[1] as f64, p[2] as f64], c, sem, ins).unwrap();
                }
                SceneFile { cloud, meta }
            })
    }

    proptest! {
        #[test]
        fn ply_round_trip_is_exact(s in arb_scene()) {
            let bytes = write_scene_ply(&s).unwrap();
            let back = read_scene_ply(&bytes).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(write_scene_ply(&back).unwrap(), bytes);
        }
    }
}
