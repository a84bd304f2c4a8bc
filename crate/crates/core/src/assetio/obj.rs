use super::AssetIoError;
use crate::geometry::{Point3, Rgb};
use std::fmt::Write;

/// Triangle mesh with optional per-vertex colors.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshAsset {
    vertices: Vec<Point3>,
    faces: Vec<[u32; 3]>,
    colors: Option<Vec<Rgb>>,
}

impl MeshAsset {
    pub fn new(
        vertices: Vec<Point3>,
        faces: Vec<[u32; 3]>,
        colors: Option<Vec<Rgb>>,
    ) -> Result<Self, AssetIoError> {
        if let Some(c) = &colors {
            if c.len() != vertices.len() {
                return Err(AssetIoError::InvalidMesh(format!(
                    "{} colors for {} vertices",
                    c.len(),
                    vertices.len()
                )));
            }
        }
        if vertices.iter().any(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(AssetIoError::InvalidMesh("non-finite vertex".into()));
        }
        let n = vertices.len();
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i as usize >= n)) {
            return Err(AssetIoError::InvalidMesh(format!(
                "face {f:?} references a vertex beyond {n}"
            )));
        }
        Ok(Self {
            vertices,
            faces,
            colors,
        })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn colors(&self) -> Option<&[Rgb]> {
        self.colors.as_deref()
    }
}

fn obj_err(line: usize, msg: impl Into<String>) -> AssetIoError {
    AssetIoError::Obj {
        line,
        msg: msg.into(),
    }
}

fn color_channel(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Parses a text OBJ. `v x y z r g b` vertex colors (floats in `[0, 1]`)
/// are honored; polygons are fan-triangulated; materials, normals,
/// texture coordinates and groups are skipped.
pub fn parse_obj(bytes: &[u8]) -> Result<MeshAsset, AssetIoError> {
    let text = std::str::from_utf8(bytes).map_err(|e| obj_err(0, format!("not UTF-8: {e}")))?;
    let mut vertices = Vec::new();
    let mut colors: Vec<Option<Rgb>> = Vec::new();
    let mut faces = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let nums = tok
                    .map(|t| {
                        t.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| obj_err(line_no, format!("non-numeric vertex component {t:?}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let color = match nums.len() {
                    3 | 4 => None,
                    6 => Some([color_channel(nums[3]), color_channel(nums[4]), color_channel(nums[5])]),
                    7 => Some([color_channel(nums[4]), color_channel(nums[5]), color_channel(nums[6])]),
                    k => return Err(obj_err(line_no, format!("vertex has {k} components"))),
                };
                vertices.push([nums[0], nums[1], nums[2]]);
                colors.push(color);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tok {
                    let first = t.split('/').next().unwrap_or("");
                    let v: i64 = first
                        .parse()
                        .map_err(|_| obj_err(line_no, format!("bad face index {t:?}")))?;
                    let n = vertices.len() as i64;
                    let resolved = if v > 0 { v - 1 } else { n + v };
                    if v == 0 || resolved < 0 || resolved >= n {
                        return Err(obj_err(
                            line_no,
                            format!("face index {v} out of range for {n} vertices"),
                        ));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(obj_err(line_no, "face with fewer than 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }

    let colors = if colors.iter().any(Option::is_some) {
        Some(colors.into_iter().map(|c| c.unwrap_or([128, 128, 128])).collect())
    } else {
        None
    };
    MeshAsset::new(vertices, faces, colors)
}

/// Serializes a mesh so that `parse_obj` reproduces it exactly.
pub fn write_obj(mesh: &MeshAsset) -> Vec<u8> {
    let mut out = String::new();
    for (i, v) in mesh.vertices.iter().enumerate() {
        match &mesh.colors {
            Some(c) => {
                let [r, g, b] = c[i];
                writeln!(
                    out,
                    "v {} {} {} {} {} {}",
                    v[0],
                    v[1],
                    v[2],
                    r as f64 / 255.0,
                    g as f64 / 255.0,
                    b as f64 / 255.0
                )
            }
            None => writeln!(out, "v {} {} {}", v[0], v[1], v[2]),
        }
        .expect("write to String");
    }
    for f in &mesh.faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).expect("write to String");
    }
    out.into_bytes()
}
