//! Deterministic in-process stand-ins for the external model services.
//! Each takes a [`StageRequest`] and returns exactly one output payload.

use crate::hash::seed_from;
use crate::image::{decode_gray16, decode_rgb, encode_gray16, encode_rgb, GrayImage16, RgbImage};
use crate::stage::{StageError, StageKind, StageRequest};
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::Value;
use virtfusion_core::assetio::{write_obj, MeshAsset};
use virtfusion_core::diffmath::{build_schedule, forward_sample, linear_betas};
use virtfusion_core::dragplan::DragPlan;
use virtfusion_core::promptgen::{ChatRequest, MockChatClient};
use virtfusion_core::rng::seeded;

pub const DEFAULT_IMAGE_SIZE: u32 = 64;
const WHITE: [u8; 3] = [255, 255, 255];

pub fn serve(request: &StageRequest) -> Result<Vec<Vec<u8>>, StageError> {
    let out = match request.stage {
        StageKind::PromptGen => prompt_gen(&request.params)?,
        StageKind::TextToImage => encode_rgb(&text_to_image(&request.params)?),
        StageKind::DepthEstimate => encode_gray16(&depth_estimate(&decode_rgb(input(request, 0)?)?)),
        StageKind::TextureAugment => {
            let img = decode_rgb(input(request, 0)?)?;
            let depth = decode_gray16(input(request, 1)?)?;
            encode_rgb(&texture_augment(&img, &depth, str_param(&request.params, "prompt")?)?)
        }
        StageKind::DragEdit => {
            let plan: DragPlan = serde_json::from_value(param(&request.params, "plan")?.clone())
                .map_err(|e| StageError::Payload(format!("drag plan: {e}")))?;
            encode_rgb(&drag_edit(&decode_rgb(input(request, 0)?)?, &plan))
        }
        StageKind::ImageTo3D => {
            let remove = request.params.get("remove_background").and_then(Value::as_bool).unwrap_or(true);
            write_obj(&image_to_3d(&decode_rgb(input(request, 0)?)?, remove)?)
        }
        other => return Err(StageError::Config(format!("no mock for {other}"))),
    };
    Ok(vec![out])
}

fn input(request: &StageRequest, i: usize) -> Result<&[u8], StageError> {
    request
        .inputs
        .get(i)
        .map(Vec::as_slice)
        .ok_or_else(|| StageError::Payload(format!("{} expects input #{i}", request.stage)))
}

fn param<'a>(params: &'a Value, key: &str) -> Result<&'a Value, StageError> {
    params
        .get(key)
        .ok_or_else(|| StageError::Payload(format!("missing param {key:?}")))
}

fn str_param<'a>(params: &'a Value, key: &str) -> Result<&'a str, StageError> {
    param(params, key)?
        .as_str()
        .ok_or_else(|| StageError::Payload(format!("param {key:?} must be a string")))
}

fn u64_param(params: &Value, key: &str, default: u64) -> Result<u64, StageError> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| StageError::Payload(format!("param {key:?} must be a non-negative integer"))),
    }
}

fn prompt_gen(params: &Value) -> Result<Vec<u8>, StageError> {
    let request: ChatRequest =
        serde_json::from_value(params.clone()).map_err(|e| StageError::Payload(format!("chat request: {e}")))?;
    Ok(MockChatClient::reply(&request).into_bytes())
}

fn palette(seed: u64, lo: u8, hi: u8) -> [u8; 3] {
    let span = (hi - lo) as u64 + 1;
    [0, 1, 2].map(|k| lo + ((seed >> (16 * k)) % span) as u8)
}

/// A silhouette drawn from the prompt: a body block, a top slab and
/// supports, dark enough to separate from the white backdrop.
fn clean_image(width: u32, height: u32, shape_seed: u64) -> RgbImage {
    let mut r = seeded(shape_seed);
    let color = palette(r.random(), 25, 140);
    let (w, h) = (width as f64, height as f64);
    let body_w = r.random_range(0.35..0.65) * w;
    let body_h = r.random_range(0.25..0.45) * h;
    let top_h = r.random_range(0.05..0.15) * h;
    let legs = r.random_range(0..=4u32);
    let leg_h = r.random_range(0.1..0.25) * h;
    let x0 = (w - body_w) / 2.0;
    let y_top = 0.12 * h;
    let y_body = y_top + top_h;
    let y_legs = y_body + body_h;

    let mut img = RgbImage::filled(width, height, WHITE);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let in_top = fy >= y_top && fy < y_body && fx >= x0 - 0.05 * w && fx < x0 + body_w + 0.05 * w;
            let in_body = fy >= y_body && fy < y_legs && fx >= x0 && fx < x0 + body_w;
            let in_leg = fy >= y_legs && fy < y_legs + leg_h && legs > 0 && {
                let pitch = body_w / legs as f64;
                let u = (fx - x0) / pitch;
                u >= 0.0 && u < legs as f64 && u.fract() > 0.3 && u.fract() < 0.7
            };
            if in_top || in_body || in_leg {
                let shade = if in_top { 0.8 } else { 1.0 };
                img.set(x, y, color.map(|c| (c as f64 * shade) as u8));
            }
        }
    }
    img
}

/// Renders the silhouette and passes it through a few forward-diffusion
/// steps, which leaves a faint sensor-like grain.
pub fn text_to_image(params: &Value) -> Result<RgbImage, StageError> {
    let prompt = str_param(params, "prompt")?;
    let seed = u64_param(params, "seed", 0)?;
    let width = u64_param(params, "width", DEFAULT_IMAGE_SIZE as u64)? as u32;
    let height = u64_param(params, "height", DEFAULT_IMAGE_SIZE as u64)? as u32;
    if width == 0 || height == 0 || width > 4096 || height > 4096 {
        return Err(StageError::Payload(format!("image size {width}x{height} out of range")));
    }
    let clean = clean_image(width, height, seed_from(&[prompt.as_bytes(), &seed.to_le_bytes()]));

    let sched = build_schedule(&linear_betas(4, 1e-5, 5e-4)).expect("fixed betas are valid");
    let x0: Vec<f64> = clean.data.iter().map(|&v| v as f64 / 127.5 - 1.0).collect();
    let mut rng = seeded(seed_from(&[b"grain", prompt.as_bytes(), &seed.to_le_bytes()]));
    let eps: Vec<f64> = (0..x0.len()).map(|_| rng.sample(StandardNormal)).collect();
    let xt = forward_sample(&x0, sched.steps(), &eps, &sched).expect("shapes match");
    let data = xt.iter().map(|x| ((x + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8).collect();
    Ok(RgbImage { width, height, data })
}

/// Radial gradient: nearest at the image center, zero at the corners.
pub fn depth_estimate(img: &RgbImage) -> GrayImage16 {
    let (cx, cy) = (img.width as f64 / 2.0, img.height as f64 / 2.0);
    let r_max = (cx * cx + cy * cy).sqrt().max(f64::MIN_POSITIVE);
    let data = (0..img.height)
        .flat_map(|y| (0..img.width).map(move |x| (x, y)))
        .map(|(x, y)| {
            let r = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)).sqrt();
            (65535.0 * (1.0 - r / r_max).max(0.0)).round() as u16
        })
        .collect();
    GrayImage16 {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Repaints foreground pixels with a prompt-derived tint and stripe
/// pattern, shaded by depth. The backdrop is left alone.
pub fn texture_augment(img: &RgbImage, depth: &GrayImage16, prompt: &str) -> Result<RgbImage, StageError> {
    if (img.width, img.height) != (depth.width, depth.height) {
        return Err(StageError::Payload(format!(
            "depth {}x{} does not match image {}x{}",
            depth.width, depth.height, img.width, img.height
        )));
    }
    let h = seed_from(&[prompt.as_bytes()]);
    let tint = palette(h, 30, 150);
    let stripe = 2 + (h >> 48) as u32 % 6;
    let mut out = img.clone();
    for y in 0..img.height {
        for x in 0..img.width {
            if !img.is_foreground(x, y) {
                continue;
            }
            let [r, g, b] = img.get(x, y);
            let lum = (r as f64 + g as f64 + b as f64) / (3.0 * 255.0);
            let near = depth.get(x, y) as f64 / 65535.0;
            let band = if ((x + y) / stripe).is_multiple_of(2) { 1.0 } else { 0.8 };
            let k = (0.6 + 0.4 * lum) * (0.7 + 0.3 * near) * band;
            out.set(x, y, tint.map(|c| (c as f64 * k).round() as u8));
        }
    }
    Ok(out)
}

/// Moves content from each handle toward its target with a Gaussian
/// falloff around the target; pulled-in pixels from outside the frame
/// are backdrop.
pub fn drag_edit(img: &RgbImage, plan: &DragPlan) -> RgbImage {
    let radius = (0.15 * img.width.min(img.height) as f64).max(2.0);
    let mut out = RgbImage::filled(img.width, img.height, WHITE);
    for y in 0..img.height {
        for x in 0..img.width {
            let (qx, qy) = (x as f64, y as f64);
            let (mut dx, mut dy) = (0.0, 0.0);
            for ins in &plan.instructions {
                let (tx, ty) = (ins.target[0], ins.target[1]);
                let w = (-((qx - tx).powi(2) + (qy - ty).powi(2)) / (2.0 * radius * radius)).exp();
                dx += w * (tx - ins.handle[0] as f64);
                dy += w * (ty - ins.handle[1] as f64);
            }
            let (sx, sy) = ((qx - dx).round(), (qy - dy).round());
            if sx >= 0.0 && sy >= 0.0 && sx < img.width as f64 && sy < img.height as f64 {
                out.set(x, y, img.get(sx as u32, sy as u32));
            }
        }
    }
    out
}

/// Thickness of the extruded height field relative to the image width.
const RELIEF: f64 = 0.3;

/// Extrudes the silhouette into a closed-ish slab: image rows become
/// height, columns width, and darker pixels bulge further in depth.
pub fn image_to_3d(img: &RgbImage, remove_background: bool) -> Result<MeshAsset, StageError> {
    let (w, h) = (img.width, img.height);
    let keep = |x: u32, y: u32| !remove_background || img.is_foreground(x, y);
    let scale = 1.0 / w.max(h) as f64;
    let mut index = vec![u32::MAX; (w * h) as usize];
    let mut vertices = Vec::new();
    let mut colors = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !keep(x, y) {
                continue;
            }
            let c = img.get(x, y);
            let lum = (c[0] as f64 + c[1] as f64 + c[2] as f64) / (3.0 * 255.0);
            let half = 0.5 * RELIEF * (0.5 + 0.5 * (1.0 - lum));
            let (px, pz) = (x as f64 * scale, (h - 1 - y) as f64 * scale);
            index[(y * w + x) as usize] = vertices.len() as u32;
            vertices.push([px, -half, pz]);
            vertices.push([px, half, pz]);
            colors.push(c);
            colors.push(c);
        }
    }
    let mut faces = Vec::new();
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            let corners = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)].map(|(cx, cy)| index[(cy * w + cx) as usize]);
            if corners.contains(&u32::MAX) {
                continue;
            }
            let [a, b, c, d] = corners;
            faces.push([a, b, c]);
            faces.push([a, c, d]);
            faces.push([a + 1, c + 1, b + 1]);
            faces.push([a + 1, d + 1, c + 1]);
        }
    }
    if faces.is_empty() {
        return Err(StageError::Payload("image has no foreground region to lift".into()));
    }
    MeshAsset::new(vertices, faces, Some(colors)).map_err(|e| StageError::Payload(e.to_string()))
}
