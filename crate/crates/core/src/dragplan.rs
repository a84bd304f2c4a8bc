//! Automatic drag-edit planning: pick seed points on the object, a random
//! direction for each, and a Gaussian drag distance.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DragError {
    #[error("mask has no foreground pixels")]
    NoForeground,
    #[error("{needed} handles requested but only {available} foreground pixels")]
    InsufficientSupport { needed: usize, available: usize },
    #[error("invalid drag config: {0}")]
    Config(String),
    #[error("invalid mask: {0}")]
    Mask(String),
    #[error("plan parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DragConfig {
    /// Mean drag distance in pixels.
    pub mu: f64,
    /// Standard deviation of the drag distance in pixels.
    pub sigma: f64,
    pub n_handles: usize,
    pub seed: u64,
}

impl Default for DragConfig {
    fn default() -> Self {
        Self {
            mu: 40.0,
            sigma: 10.0,
            n_handles: 1,
            seed: 0,
        }
    }
}

impl DragConfig {
    pub fn check(&self) -> Result<(), DragError> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) || !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(DragError::Config("mu and sigma must be finite and non-negative".into()));
        }
        if !(1..=2).contains(&self.n_handles) {
            return Err(DragError::Config(format!("n_handles must be 1 or 2, got {}", self.n_handles)));
        }
        Ok(())
    }
}

/// Foreground bitmap, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl ObjectMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, DragError> {
        if bits.len() != width as usize * height as usize {
            return Err(DragError::Mask(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let bits = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self { width, height, bits }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height && self.bits[(y * self.width + x) as usize]
    }

    /// Object pixels as `(x, y)`, row-major.
    pub fn foreground(&self) -> Vec<(u32, u32)> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| (i as u32 % self.width, i as u32 / self.width))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DragInstruction {
    pub handle: [u32; 2],
    pub target: [f64; 2],
    /// Drag distance before clamping the target into the image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DragPlan {
    pub image_ref: String,
    /// `[width, height]` of the image the plan was made for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_size: Option<[u32; 2]>,
    pub instructions: Vec<DragInstruction>,
}

impl DragPlan {
    fn check_bounds(&self) -> Result<(), DragError> {
        for (i, ins) in self.instructions.iter().enumerate() {
            if ins.target.iter().any(|c| !c.is_finite() || *c < 0.0) {
                return Err(DragError::Parse(format!("instruction {i}: target {:?} out of bounds", ins.target)));
            }
            if let Some([w, h]) = self.image_size {
                let inside = |p: [f64; 2]| p[0] <= (w.max(1) - 1) as f64 && p[1] <= (h.max(1) - 1) as f64;
                if ins.handle[0] >= w || ins.handle[1] >= h {
                    return Err(DragError::Parse(format!("instruction {i}: handle {:?} out of bounds", ins.handle)));
                }
                if !inside(ins.target) {
                    return Err(DragError::Parse(format!("instruction {i}: target {:?} out of bounds", ins.target)));
                }
            }
        }
        Ok(())
    }
}

/// Normal(mu, sigma²) conditioned on being non-negative.
fn truncated_normal<R: Rng + ?Sized>(mu: f64, sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return mu;
    }
    let normal = Normal::new(mu, sigma).expect("sigma checked finite and positive");
    loop {
        let d = normal.sample(rng);
        if d >= 0.0 {
            return d;
        }
    }
}

pub fn plan_drag<R: Rng + ?Sized>(
    mask: &ObjectMask,
    cfg: &DragConfig,
    image_ref: &str,
    rng: &mut R,
) -> Result<DragPlan, DragError> {
    cfg.check()?;
    let fg = mask.foreground();
    if fg.is_empty() {
        return Err(DragError::NoForeground);
    }
    if fg.len() < cfg.n_handles {
        return Err(DragError::InsufficientSupport {
            needed: cfg.n_handles,
            available: fg.len(),
        });
    }
    let max_x = (mask.width - 1) as f64;
    let max_y = (mask.height - 1) as f64;
    let picks = index::sample(rng, fg.len(), cfg.n_handles).into_vec();
    let instructions = picks
        .into_iter()
        .map(|i| {
            let (hx, hy) = fg[i];
            let theta = rng.random::<f64>() * TAU;
            let d = truncated_normal(cfg.mu, cfg.sigma, rng);
            let tx = (hx as f64 + d * theta.cos()).clamp(0.0, max_x);
            let ty = (hy as f64 + d * theta.sin()).clamp(0.0, max_y);
            DragInstruction {
                handle: [hx, hy],
                target: [tx, ty],
                distance: Some(d),
            }
        })
        .collect();
    Ok(DragPlan {
        image_ref: image_ref.to_string(),
        image_size: Some([mask.width, mask.height]),
        instructions,
    })
}

pub fn serialize_plan(plan: &DragPlan) -> Vec<u8> {
    serde_json::to_vec(plan).expect("plan serializes")
}

pub fn deserialize_plan(bytes: &[u8]) -> Result<DragPlan, DragError> {
    let plan: DragPlan = serde_json::from_slice(bytes).map_err(|e| DragError::Parse(e.to_string()))?;
    plan.check_bounds()?;
    Ok(plan)
}
