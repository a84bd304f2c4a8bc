use super::{AssetIoError, MeshAsset};
use crate::geometry::{LabeledCloud, Point3};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

/// Points sampled per object unless configured otherwise. Nine objects
/// then exceed the default 200k scene budget, so downsampling is exercised.
pub const DEFAULT_POINTS_PER_OBJECT: usize = 30_000;

const GRAY: [u8; 3] = [128, 128, 128];

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn triangle_area(a: Point3, b: Point3, c: Point3) -> f64 {
    let u = sub(b, a);
    let v = sub(c, a);
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    0.5 * (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt()
}

/// Area-uniform surface sampling: a face is picked with probability
/// proportional to its area, then a point uniformly inside it.
/// Vertex colors are interpolated barycentrically; labels are left at 0.
pub fn sample_mesh<R: Rng + ?Sized>(mesh: &MeshAsset, n: usize, rng: &mut R) -> Result<LabeledCloud, AssetIoError> {
    if n == 0 {
        return Err(AssetIoError::InvalidArgument("sample count must be at least 1".into()));
    }
    let v = mesh.vertices();
    let areas: Vec<f64> = mesh
        .faces()
        .iter()
        .map(|f| triangle_area(v[f[0] as usize], v[f[1] as usize], v[f[2] as usize]))
        .collect();
    let faces = WeightedIndex::new(&areas).map_err(|_| AssetIoError::DegenerateMesh)?;

    let mut cloud = LabeledCloud::with_capacity(n);
    for _ in 0..n {
        let f = mesh.faces()[faces.sample(rng)];
        let mut s: f64 = rng.random();
        let mut t: f64 = rng.random();
        if s + t > 1.0 {
            s = 1.0 - s;
            t = 1.0 - t;
        }
        let w = [1.0 - s - t, s, t];
        let corners = f.map(|i| v[i as usize]);
        let mut p = [0.0; 3];
        for (wk, c) in w.iter().zip(&corners) {
            for k in 0..3 {
                p[k] += wk * c[k];
            }
        }
        let color = match mesh.colors() {
            Some(colors) => {
                let cs = f.map(|i| colors[i as usize]);
                std::array::from_fn(|ch| {
                    let val: f64 = (0..3).map(|k| w[k] * cs[k][ch] as f64).sum();
                    val.round().clamp(0.0, 255.0) as u8
                })
            }
            None => GRAY,
        };
        cloud.push(p, color, 0, 0)?;
    }
    Ok(cloud)
}
