//! 8-bit grayscale images, resizing, and tensor preprocessing.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::fmath;
use crate::tensor::Tensor;

/// Single-channel 8-bit image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageU8 {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl ImageU8 {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::Dim(format!(
                "{height}x{width} image needs {} bytes, got {}",
                height * width,
                pixels.len()
            )));
        }
        Ok(ImageU8 { height, width, pixels })
    }

    pub fn filled(height: usize, width: usize, value: u8) -> Self {
        ImageU8 { height, width, pixels: vec![value; height * width] }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.pixels[r * self.width + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        self.pixels[r * self.width + c] = v;
    }

    pub fn mean(&self) -> f64 {
        if self.pixels.is_empty() {
            return 0.0;
        }
        let sum: u64 = self.pixels.iter().map(|&p| p as u64).sum();
        sum as f64 / self.pixels.len() as f64
    }
}

/// Per-channel normalization statistics; std floored at 1e-6.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl NormStats {
    pub fn single(mean: f32, std: f32) -> Self {
        NormStats { mean: vec![mean], std: vec![std.max(1e-6)] }
    }
}

/// Canonical RGB statistics used to normalize inputs for models
/// pretrained on large photo collections.
pub fn pretrained_norm_stats() -> NormStats {
    NormStats {
        mean: vec![0.485, 0.456, 0.406],
        std: vec![0.229, 0.224, 0.225],
    }
}

/// Bilinear resize (half-pixel centers, clamped edges).
pub fn resize_bilinear(img: &ImageU8, out_h: usize, out_w: usize) -> ImageU8 {
    if out_h == img.height && out_w == img.width {
        return img.clone();
    }
    let mut out = ImageU8::filled(out_h, out_w, 0);
    let sy = img.height as f32 / out_h as f32;
    let sx = img.width as f32 / out_w as f32;
    for oy in 0..out_h {
        let fy = ((oy as f32 + 0.5) * sy - 0.5).max(0.0);
        let y0 = (fy as usize).min(img.height - 1);
        let y1 = (y0 + 1).min(img.height - 1);
        let wy = fy - y0 as f32;
        for ox in 0..out_w {
            let fx = ((ox as f32 + 0.5) * sx - 0.5).max(0.0);
            let x0 = (fx as usize).min(img.width - 1);
            let x1 = (x0 + 1).min(img.width - 1);
            let wx = fx - x0 as f32;
            let a = img.get(y0, x0) as f32;
            let b = img.get(y0, x1) as f32;
            let c = img.get(y1, x0) as f32;
            let d = img.get(y1, x1) as f32;
            let top = a + (b - a) * wx;
            let bot = c + (d - c) * wx;
            let v = top + (bot - top) * wy;
            out.set(oy, ox, fmath::round(v).clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Bilinear resize returning floats in [0, 1] (no intermediate rounding).
pub fn resize_bilinear_f32(img: &ImageU8, out_h: usize, out_w: usize) -> Vec<f32> {
    let mut out = vec![0f32; out_h * out_w];
    if out_h == img.height && out_w == img.width {
        for (o, &p) in out.iter_mut().zip(img.pixels()) {
            *o = p as f32 / 255.0;
        }
        return out;
    }
    let sy = img.height as f32 / out_h as f32;
    let sx = img.width as f32 / out_w as f32;
    for oy in 0..out_h {
        let fy = ((oy as f32 + 0.5) * sy - 0.5).max(0.0);
        let y0 = (fy as usize).min(img.height - 1);
        let y1 = (y0 + 1).min(img.height - 1);
        let wy = fy - y0 as f32;
        for ox in 0..out_w {
            let fx = ((ox as f32 + 0.5) * sx - 0.5).max(0.0);
            let x0 = (fx as usize).min(img.width - 1);
            let x1 = (x0 + 1).min(img.width - 1);
            let wx = fx - x0 as f32;
            let a = img.get(y0, x0) as f32;
            let b = img.get(y0, x1) as f32;
            let c = img.get(y1, x0) as f32;
            let d = img.get(y1, x1) as f32;
            let top = a + (b - a) * wx;
            let bot = c + (d - c) * wx;
            out[oy * out_w + ox] = (top + (bot - top) * wy) / 255.0;
        }
    }
    out
}

/// Resizes to `target` x `target`, scales to [0, 1] floats, and applies
/// optional normalization; shape `[1, target, target]`.
///
/// With `pretrained_path` the image is instead resized to 224, replicated
/// to three channels and normalized with the canonical pretrained-model
/// statistics; shape `[3, 224, 224]`.
pub fn preprocess(
    img: &ImageU8,
    target: usize,
    pretrained_path: bool,
    norm: Option<&NormStats>,
) -> Result<Tensor<f32>> {
    if target < 8 {
        return Err(Error::Config(format!("preprocess target {target} below minimum 8")));
    }
    if pretrained_path {
        let plane = resize_bilinear_f32(img, 224, 224);
        let stats = pretrained_norm_stats();
        let mut data = Vec::with_capacity(3 * 224 * 224);
        for ch in 0..3 {
            let (m, s) = (stats.mean[ch], stats.std[ch]);
            data.extend(plane.iter().map(|&v| (v - m) / s));
        }
        return Tensor::new(vec![3, 224, 224], data);
    }
    let mut plane = resize_bilinear_f32(img, target, target);
    if let Some(stats) = norm {
        let (m, s) = (stats.mean[0], stats.std[0].max(1e-6));
        plane.iter_mut().for_each(|v| *v = (*v - m) / s);
    }
    Tensor::new(vec![1, target, target], plane)
}

/// Stacks per-sample tensors of identical shape into a batch.
pub fn stack_batch(samples: &[Tensor<f32>]) -> Result<Tensor<f32>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Dim("cannot stack an empty batch".into()))?;
    let shape = first.shape().to_vec();
    let mut data = Vec::with_capacity(samples.len() * first.numel());
    for s in samples {
        if s.shape() != shape.as_slice() {
            return Err(Error::Dim("stack_batch inputs must share a shape".into()));
        }
        data.extend_from_slice(s.data());
    }
    let mut full = vec![samples.len()];
    full.extend_from_slice(&shape);
    Tensor::new(full, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preprocess_without_resampling_is_division() {
        let mut img = ImageU8::filled(16, 16, 0);
        for (i, p) in img.pixels_mut().iter_mut().enumerate() {
            *p = (i % 256) as u8;
        }
        let t = preprocess(&img, 16, false, None).unwrap();
        assert_eq!(t.shape(), &[1, 16, 16]);
        for (v, &p) in t.data().iter().zip(img.pixels()) {
            assert_eq!(*v, p as f32 / 255.0);
        }
    }

    #[test]
    fn constant_image_preprocesses_to_constant() {
        let img = ImageU8::filled(32, 32, 128);
        let t = preprocess(&img, 16, false, None).unwrap();
        for &v in t.data() {
            assert!((v - 128.0 / 255.0).abs() < 1e-6);
        }
    }

    #[test]
    fn pretrained_path_shape_and_norm() {
        let img = ImageU8::filled(64, 64, 255);
        let t = preprocess(&img, 256, true, None).unwrap();
        assert_eq!(t.shape(), &[3, 224, 224]);
        let stats = pretrained_norm_stats();
        for ch in 0..3 {
            let expect = (1.0 - stats.mean[ch]) / stats.std[ch];
            let v = t.data()[ch * 224 * 224];
            assert!((v - expect).abs() < 1e-5);
        }
    }

    #[test]
    fn resize_identity_when_same_size() {
        let mut img = ImageU8::filled(8, 8, 0);
        for (i, p) in img.pixels_mut().iter_mut().enumerate() {
            *p = (i * 3 % 256) as u8;
        }
        assert_eq!(resize_bilinear(&img, 8, 8), img);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let img = ImageU8::filled(100, 100, 77);
        let out = resize_bilinear(&img, 37, 53);
        assert!(out.pixels().iter().all(|&p| p == 77));
    }
}
