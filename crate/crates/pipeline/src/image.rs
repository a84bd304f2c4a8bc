//! PNG payloads exchanged between stages: 8-bit RGB images and 16-bit
//! grayscale depth maps.

use crate::StageError;
use std::io::Cursor;
use virtfusion_core::dragplan::ObjectMask;

/// Pixels whose mean channel is at or above this are background.
pub const BACKGROUND_LEVEL: u8 = 230;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    /// Row-major `[r, g, b]` triples.
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let data = rgb.repeat((width * height) as usize);
        Self { width, height, data }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y * self.width + x) as usize;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x) as usize;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn is_foreground(&self, x: u32, y: u32) -> bool {
        let [r, g, b] = self.get(x, y);
        (r as u32 + g as u32 + b as u32) < 3 * BACKGROUND_LEVEL as u32
    }

    pub fn foreground_mask(&self) -> ObjectMask {
        ObjectMask::from_fn(self.width, self.height, |x, y| self.is_foreground(x, y))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage16 {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u16>,
}

impl GrayImage16 {
    pub fn get(&self, x: u32, y: u32) -> u16 {
        self.data[(y * self.width + x) as usize]
    }
}

fn encode(width: u32, height: u32, color: png::ColorType, depth: png::BitDepth, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, width, height);
    enc.set_color(color);
    enc.set_depth(depth);
    let mut w = enc.write_header().expect("in-memory PNG header");
    w.write_image_data(data).expect("buffer matches header");
    w.finish().expect("in-memory PNG");
    out
}

pub fn encode_rgb(img: &RgbImage) -> Vec<u8> {
    encode(img.width, img.height, png::ColorType::Rgb, png::BitDepth::Eight, &img.data)
}

pub fn encode_gray16(img: &GrayImage16) -> Vec<u8> {
    let bytes: Vec<u8> = img.data.iter().flat_map(|v| v.to_be_bytes()).collect();
    encode(img.width, img.height, png::ColorType::Grayscale, png::BitDepth::Sixteen, &bytes)
}

fn decode(bytes: &[u8]) -> Result<(png::OutputInfo, Vec<u8>), StageError> {
    let bad = |e: png::DecodingError| StageError::Payload(format!("png: {e}"));
    let mut reader = png::Decoder::new(Cursor::new(bytes)).read_info().map_err(bad)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| StageError::Payload("png: image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(bad)?;
    buf.truncate(info.buffer_size());
    Ok((info, buf))
}

pub fn decode_rgb(bytes: &[u8]) -> Result<RgbImage, StageError> {
    let (info, data) = decode(bytes)?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(StageError::Payload(format!(
            "expected 8-bit RGB PNG, got {:?} {:?}",
            info.color_type, info.bit_depth
        )));
    }
    Ok(RgbImage {
        width: info.width,
        height: info.height,
        data,
    })
}

pub fn decode_gray16(bytes: &[u8]) -> Result<GrayImage16, StageError> {
    let (info, data) = decode(bytes)?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(StageError::Payload(format!(
            "expected 16-bit grayscale PNG, got {:?} {:?}",
            info.color_type, info.bit_depth
        )));
    }
    Ok(GrayImage16 {
        width: info.width,
        height: info.height,
        data: data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect(),
    })
}

/// Reads a mask PNG: any 8-bit RGB, gray or gray+alpha image, with
/// non-background pixels counted as object.
pub fn decode_mask(bytes: &[u8]) -> Result<ObjectMask, StageError> {
    let (info, data) = decode(bytes)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(StageError::Payload(format!("mask must be 8-bit, got {:?}", info.bit_depth)));
    }
    let channels = info.color_type.samples();
    let (w, h) = (info.width, info.height);
    let level = |x: u32, y: u32| -> u32 {
        let i = channels * (y * w + x) as usize;
        match info.color_type {
            png::ColorType::Rgb | png::ColorType::Rgba => (data[i] as u32 + data[i + 1] as u32 + data[i + 2] as u32) / 3,
            _ => data[i] as u32,
        }
    };
    match info.color_type {
        // binary masks: white marks the object
        png::ColorType::Grayscale | png::ColorType::GrayscaleAlpha => Ok(ObjectMask::from_fn(w, h, |x, y| level(x, y) >= 128)),
        png::ColorType::Rgb | png::ColorType::Rgba => Ok(ObjectMask::from_fn(w, h, |x, y| level(x, y) < BACKGROUND_LEVEL as u32)),
        other => Err(StageError::Payload(format!("unsupported mask color type {other:?}"))),
    }
}

pub fn encode_mask(mask: &ObjectMask) -> Vec<u8> {
    let data: Vec<u8> = (0..mask.height())
        .flat_map(|y| (0..mask.width()).map(move |x| (x, y)))
        .map(|(x, y)| if mask.get(x, y) { 255 } else { 0 })
        .collect();
    encode(mask.width(), mask.height(), png::ColorType::Grayscale, png::BitDepth::Eight, &data)
}
