//! Point-cloud value types and the rigid/box operations shared by every
//! other module.
//!
//! Labels live in parallel per-point arrays so that merging and
//! downsampling keep every point's color and labels attached to it.

use rand::seq::SliceRandom;
use rand::Rng;
use std::f64::consts::TAU;
use thiserror::Error;

pub type Point3 = [f64; 3];
pub type Rgb = [u8; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("array length mismatch: {points} points, {colors} colors, {sem} semantic labels, {ins} instance labels")]
    LengthMismatch {
        points: usize,
        colors: usize,
        sem: usize,
        ins: usize,
    },
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("operation requires a non-empty cloud")]
    EmptyInput,
}

/// Colored points with per-point semantic and instance labels.
///
/// Instance id 0 means "not assigned to an object".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledCloud {
    points: Vec<Point3>,
    colors: Vec<Rgb>,
    sem: Vec<u32>,
    ins: Vec<u32>,
}

impl LabeledCloud {
    pub fn new(
        points: Vec<Point3>,
        colors: Vec<Rgb>,
        sem: Vec<u32>,
        ins: Vec<u32>,
    ) -> Result<Self, GeometryError> {
        let n = points.len();
        if colors.len() != n || sem.len() != n || ins.len() != n {
            return Err(GeometryError::LengthMismatch {
                points: n,
                colors: colors.len(),
                sem: sem.len(),
                ins: ins.len(),
            });
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(GeometryError::NonFinite(i));
        }
        Ok(Self {
            points,
            colors,
            sem,
            ins,
        })
    }

    /// Unlabeled cloud with a single color for every point.
    pub fn from_points(points: Vec<Point3>, color: Rgb) -> Result<Self, GeometryError> {
        let n = points.len();
        Self::new(points, vec![color; n], vec![0; n], vec![0; n])
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            points: Vec::with_capacity(n),
            colors: Vec::with_capacity(n),
            sem: Vec::with_capacity(n),
            ins: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, point: Point3, color: Rgb, sem: u32, ins: u32) -> Result<(), GeometryError> {
        if point.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite(self.points.len()));
        }
        self.points.push(point);
        self.colors.push(color);
        self.sem.push(sem);
        self.ins.push(ins);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn colors(&self) -> &[Rgb] {
        &self.colors
    }

    pub fn sem(&self) -> &[u32] {
        &self.sem
    }

    pub fn ins(&self) -> &[u32] {
        &self.ins
    }

    pub fn sem_mut(&mut self) -> &mut [u32] {
        &mut self.sem
    }

    pub fn ins_mut(&mut self) -> &mut [u32] {
        &mut self.ins
    }

    pub fn set_labels(&mut self, sem: u32, ins: u32) {
        self.sem.fill(sem);
        self.ins.fill(ins);
    }

    /// Mean of all points, `None` when empty.
    pub fn centroid(&self) -> Option<Point3> {
        if self.points.is_empty() {
            return None;
        }
        let mut acc = [0.0; 3];
        for p in &self.points {
            for k in 0..3 {
                acc[k] += p[k];
            }
        }
        let n = self.points.len() as f64;
        Some([acc[0] / n, acc[1] / n, acc[2] / n])
    }

    /// Adds `offset` to every point.
    pub fn translate(&mut self, offset: Point3) {
        for p in &mut self.points {
            for k in 0..3 {
                p[k] += offset[k];
            }
        }
    }

    /// Uniform scale about `center`.
    pub fn scale_about(&mut self, center: Point3, factor: f64) {
        for p in &mut self.points {
            for k in 0..3 {
                p[k] = center[k] + (p[k] - center[k]) * factor;
            }
        }
    }

    /// Rounds every coordinate to the nearest `f32`, the precision stored in
    /// scene files.
    pub fn quantize_f32(&mut self) {
        for p in &mut self.points {
            for c in p.iter_mut() {
                *c = *c as f32 as f64;
            }
        }
    }

    /// Keeps the points whose index is listed in `keep` (ascending).
    pub fn select(&self, keep: &[usize]) -> LabeledCloud {
        LabeledCloud {
            points: keep.iter().map(|&i| self.points[i]).collect(),
            colors: keep.iter().map(|&i| self.colors[i]).collect(),
            sem: keep.iter().map(|&i| self.sem[i]).collect(),
            ins: keep.iter().map(|&i| self.ins[i]).collect(),
        }
    }

    pub fn extend_from(&mut self, other: &LabeledCloud) {
        self.points.extend_from_slice(&other.points);
        self.colors.extend_from_slice(&other.colors);
        self.sem.extend_from_slice(&other.sem);
        self.ins.extend_from_slice(&other.ins);
    }
}

/// Axis-aligned bounding box, `min <= max` componentwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn new(min: Point3, max: Point3) -> Result<Self, GeometryError> {
        if (0..3).any(|k| !(min[k] <= max[k])) {
            return Err(GeometryError::InvalidArgument(format!(
                "box min {min:?} exceeds max {max:?}"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn extent(&self) -> Point3 {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn translated(&self, offset: Point3) -> Aabb {
        Aabb {
            min: [self.min[0] + offset[0], self.min[1] + offset[1], self.min[2] + offset[2]],
            max: [self.max[0] + offset[0], self.max[1] + offset[1], self.max[2] + offset[2]],
        }
    }
}

/// Rotation about the vertical axis through `pivot`, followed by a
/// translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawTransform {
    angle: f64,
    pub pivot: Point3,
    pub translation: Point3,
}

impl YawTransform {
    pub fn new(angle: f64, pivot: Point3, translation: Point3) -> Result<Self, GeometryError> {
        if !angle.is_finite()
            || pivot.iter().chain(translation.iter()).any(|c| !c.is_finite())
        {
            return Err(GeometryError::InvalidArgument(
                "transform parameters must be finite".into(),
            ));
        }
        let mut angle = angle.rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative inputs
        if angle >= TAU {
            angle = 0.0;
        }
        Ok(Self {
            angle,
            pivot,
            translation,
        })
    }

    pub fn rotation(angle: f64, pivot: Point3) -> Result<Self, GeometryError> {
        Self::new(angle, pivot, [0.0; 3])
    }

    /// Angle in `[0, 2π)`.
    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn apply_point(&self, p: Point3) -> Point3 {
        let (s, c) = self.angle.sin_cos();
        let dx = p[0] - self.pivot[0];
        let dy = p[1] - self.pivot[1];
        [
            self.pivot[0] + c * dx - s * dy + self.translation[0],
            self.pivot[1] + s * dx + c * dy + self.translation[1],
            p[2] + self.translation[2],
        ]
    }
}

pub fn apply_transform(cloud: &LabeledCloud, t: &YawTransform) -> Result<LabeledCloud, GeometryError> {
    // Re-validate: the struct fields are public, so a caller may have
    // written non-finite values after construction.
    YawTransform::new(t.angle, t.pivot, t.translation)?;
    let mut out = cloud.clone();
    for p in &mut out.points {
        *p = t.apply_point(*p);
    }
    Ok(out)
}

pub fn bounding_box(cloud: &LabeledCloud) -> Result<Aabb, GeometryError> {
    points_bounding_box(cloud.points())
}

pub fn points_bounding_box(points: &[Point3]) -> Result<Aabb, GeometryError> {
    let first = points.first().ok_or(GeometryError::EmptyInput)?;
    let mut min = *first;
    let mut max = *first;
    for p in &points[1..] {
        for k in 0..3 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    Ok(Aabb { min, max })
}

/// Bird-view overlap: the x and y intervals, each inflated by `margin` on
/// both sides, must both intersect. Touching intervals count as
/// intersecting. z is ignored.
pub fn xy_overlap(a: &Aabb, b: &Aabb, margin: f64) -> bool {
    (0..2).all(|k| a.min[k] - margin <= b.max[k] + margin && b.min[k] - margin <= a.max[k] + margin)
}

pub fn merge(clouds: &[LabeledCloud]) -> LabeledCloud {
    let total = clouds.iter().map(LabeledCloud::len).sum();
    let mut out = LabeledCloud::with_capacity(total);
    for c in clouds {
        out.extend_from(c);
    }
    out
}

/// Uniformly keeps `target` points without replacement, preserving the
/// relative order of survivors. Clouds at or below `target` are returned
/// unchanged.
pub fn downsample<R: Rng + ?Sized>(cloud: &LabeledCloud, target: usize, rng: &mut R) -> LabeledCloud {
    if cloud.len() <= target {
        return cloud.clone();
    }
    let mut idx: Vec<usize> = (0..cloud.len()).collect();
    let (chosen, _) = idx.partial_shuffle(rng, target);
    let mut keep = chosen.to_vec();
    keep.sort_unstable();
    cloud.select(&keep)
}
