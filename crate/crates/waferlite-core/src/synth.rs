//! Procedural generator for wafer-like grayscale images.
//!
//! Electroluminescence-style imaging: the plate glows bright, faults are
//! darker structures on it. Every image is a pure function of
//! (class, seed, size). The returned mask marks defect pixels for the
//! classes whose fault is local; globally-defective classes (low level,
//! displaced, wafer-on-pin) return an empty mask.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Dataset, Sample, WaferClass};
use crate::image::ImageU8;
use crate::rng::{self, tags, Rng};
use crate::scalar::fmath;

/// Alpha mask (0 untouched, 255 full defect strength) plus its class.
#[derive(Debug, Clone)]
pub struct DefectMask {
    pub image: ImageU8,
    pub class: WaferClass,
}

impl DefectMask {
    pub fn mass(&self) -> u64 {
        self.image.pixels().iter().map(|&p| p as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.image.pixels().iter().all(|&p| p == 0)
    }
}

/// Fraction of the frame edge left dark around the plate.
pub const PLATE_MARGIN_FRAC: f32 = 0.04;

/// Plate bounds `[lo, hi)` on both axes for a given frame size.
pub fn plate_bounds(size: usize) -> (usize, usize) {
    let m = fmath::round(PLATE_MARGIN_FRAC * size as f32) as usize;
    (m, size - m)
}

struct Canvas {
    size: usize,
    v: Vec<f32>,
}

impl Canvas {
    fn new(size: usize) -> Self {
        Canvas { size, v: vec![0.0; size * size] }
    }

    #[inline]
    fn at(&mut self, y: usize, x: usize) -> &mut f32 {
        &mut self.v[y * self.size + x]
    }

    fn quantize(&self) -> ImageU8 {
        let px = self.v.iter().map(|&f| fmath::round(f).clamp(0.0, 255.0) as u8).collect();
        ImageU8::new(self.size, self.size, px).expect("canvas dims")
    }
}

fn draw_background(c: &mut Canvas, rng: &mut Rng) {
    for v in c.v.iter_mut() {
        *v = 12.0 + rng.range_f32(-4.0, 4.0);
    }
}

/// Bright plate with speckle noise and a mild vignette, optionally drawn
/// at an offset (for the displaced class).
fn draw_plate(c: &mut Canvas, rng: &mut Rng, dy: i32, dx: i32) {
    let s = c.size;
    let (lo, hi) = plate_bounds(s);
    let base = rng.range_f32(205.0, 215.0);
    let vig = rng.range_f32(0.04, 0.10);
    let noise = rng.range_f32(6.0, 10.0);
    let half = (hi - lo) as f32 / 2.0;
    let cy = lo as f32 + half + dy as f32;
    let cx = lo as f32 + half + dx as f32;
    for y in 0..s as i32 {
        for x in 0..s as i32 {
            // consume the stream per pixel so the speckle pattern does
            // not depend on the offset
            let n = rng.range_f32(-noise, noise);
            let py = y - dy;
            let px = x - dx;
            if py < lo as i32 || py >= hi as i32 || px < lo as i32 || px >= hi as i32 {
                continue;
            }
            let ry = (y as f32 - cy) / half;
            let rx = (x as f32 - cx) / half;
            let r2 = (ry * ry + rx * rx) / 2.0;
            *c.at(y as usize, x as usize) = base * (1.0 - vig * r2) + n;
        }
    }
}

/// Multiplies pixels under `alpha` toward darkness: v *= 1 - strength*a.
fn darken(c: &mut Canvas, alpha: &[f32], strength: f32) {
    for (v, &a) in c.v.iter_mut().zip(alpha) {
        *v *= 1.0 - strength * a.clamp(0.0, 1.0);
    }
}

fn alpha_to_mask(alpha: &[f32], size: usize, class: WaferClass) -> DefectMask {
    let px = alpha.iter().map(|&a| fmath::round(a.clamp(0.0, 1.0) * 255.0) as u8).collect();
    DefectMask { image: ImageU8::new(size, size, px).expect("mask dims"), class }
}

fn empty_mask(size: usize, class: WaferClass) -> DefectMask {
    DefectMask { image: ImageU8::filled(size, size, 0), class }
}

/// Soft-edged disc stamped into an alpha buffer.
fn stamp_disc(alpha: &mut [f32], size: usize, cy: f32, cx: f32, radius: f32) {
    let r = radius + 1.0;
    let y0 = (cy - r).max(0.0) as usize;
    let y1 = ((cy + r) as usize + 1).min(size);
    let x0 = (cx - r).max(0.0) as usize;
    let x1 = ((cx + r) as usize + 1).min(size);
    for y in y0..y1 {
        for x in x0..x1 {
            let d = fmath::hypot(y as f32 - cy, x as f32 - cx);
            let a = (radius + 0.5 - d).clamp(0.0, 1.0);
            let slot = &mut alpha[y * size + x];
            if a > *slot {
                *slot = a;
            }
        }
    }
}

/// Anti-aliased thick segment in an alpha buffer.
fn stamp_segment(alpha: &mut [f32], size: usize, p0: (f32, f32), p1: (f32, f32), thickness: f32) {
    let (y0, x0) = p0;
    let (y1, x1) = p1;
    let min_y = (y0.min(y1) - thickness - 1.0).max(0.0) as usize;
    let max_y = ((y0.max(y1) + thickness + 1.0) as usize + 1).min(size);
    let min_x = (x0.min(x1) - thickness - 1.0).max(0.0) as usize;
    let max_x = ((x0.max(x1) + thickness + 1.0) as usize + 1).min(size);
    let dy = y1 - y0;
    let dx = x1 - x0;
    let len2 = (dy * dy + dx * dx).max(1e-9);
    for y in min_y..max_y {
        for x in min_x..max_x {
            let t = (((y as f32 - y0) * dy + (x as f32 - x0) * dx) / len2).clamp(0.0, 1.0);
            let py = y0 + t * dy;
            let px = x0 + t * dx;
            let d = fmath::hypot(y as f32 - py, x as f32 - px);
            let a = (thickness / 2.0 + 0.5 - d).clamp(0.0, 1.0);
            let slot = &mut alpha[y * size + x];
            if a > *slot {
                *slot = a;
            }
        }
    }
}

fn circle_recipe(c: &mut Canvas, rng: &mut Rng) -> Vec<f32> {
    let s = c.size as f32;
    let (lo, hi) = plate_bounds(c.size);
    let inset = 0.22 * s;
    let cy = rng.range_f32(lo as f32 + inset, hi as f32 - inset);
    let cx = rng.range_f32(lo as f32 + inset, hi as f32 - inset);
    let radius = rng.range_f32(0.08, 0.20) * s;
    let thickness = (rng.range_f32(0.015, 0.04) * s).max(1.2);
    let mut alpha = vec![0f32; c.size * c.size];
    for y in 0..c.size {
        for x in 0..c.size {
            let d = fmath::hypot(y as f32 - cy, x as f32 - cx);
            let a = (thickness / 2.0 + 0.5 - (d - radius).abs()).clamp(0.0, 1.0);
            alpha[y * c.size + x] = a;
        }
    }
    let strength = rng.range_f32(0.35, 0.7);
    darken(c, &alpha, strength);
    alpha
}

fn crack_recipe(c: &mut Canvas, rng: &mut Rng) -> Vec<f32> {
    let s = c.size as f32;
    let (lo, hi) = plate_bounds(c.size);
    let (lof, hif) = (lo as f32, hi as f32 - 1.0);
    // start on a random plate edge, walk inward with heavy jitter
    let edge = rng.below(4);
    let along = rng.range_f32(lof + 2.0, hif - 2.0);
    let (mut y, mut x, mut theta) = match edge {
        0 => (lof, along, core::f32::consts::FRAC_PI_2),  // top, heading down
        1 => (hif, along, -core::f32::consts::FRAC_PI_2), // bottom, heading up
        2 => (along, lof, 0.0),                           // left, heading right
        _ => (along, hif, core::f32::consts::PI),         // right, heading left
    };
    theta += rng.range_f32(-0.5, 0.5);
    let steps = (rng.range_f32(0.4, 0.9) * s) as usize;
    let thickness = 1.0 + rng.f32();
    let mut alpha = vec![0f32; c.size * c.size];
    for _ in 0..steps {
        stamp_disc(&mut alpha, c.size, y, x, thickness / 2.0);
        // per-step jitter is what makes a crack jagged vs. a scratch
        theta += rng.range_f32(-0.4, 0.4);
        y += fmath::sin(theta);
        x += fmath::cos(theta);
        if y < lof || y > hif || x < lof || x > hif {
            break;
        }
    }
    let strength = rng.range_f32(0.35, 0.65);
    darken(c, &alpha, strength);
    alpha
}

fn scratch_recipe(c: &mut Canvas, rng: &mut Rng) -> Vec<f32> {
    let s = c.size as f32;
    let (lo, hi) = plate_bounds(c.size);
    let (lof, hif) = (lo as f32 + 2.0, hi as f32 - 3.0);
    let cy = rng.range_f32(lof, hif);
    let cx = rng.range_f32(lof, hif);
    let theta = rng.range_f32(0.0, core::f32::consts::PI);
    let half_len = rng.range_f32(0.15, 0.4) * s;
    let dy = fmath::sin(theta) * half_len;
    let dx = fmath::cos(theta) * half_len;
    let clampf = |v: f32| v.clamp(lof, hif);
    let p0 = (clampf(cy - dy), clampf(cx - dx));
    let p1 = (clampf(cy + dy), clampf(cx + dx));
    let thickness = 1.0 + rng.f32();
    let mut alpha = vec![0f32; c.size * c.size];
    stamp_segment(&mut alpha, c.size, p0, p1, thickness);
    let strength = rng.range_f32(0.35, 0.65);
    darken(c, &alpha, strength);
    alpha
}

fn splinter_recipe(c: &mut Canvas, rng: &mut Rng) -> Vec<f32> {
    let s = c.size;
    let (lo, hi) = plate_bounds(s);
    let side = (hi - lo) as f32;
    // a triangular notch cut from a plate corner
    let corner = rng.below(4);
    let (cy, cx) = match corner {
        0 => (lo as f32, lo as f32),
        1 => (lo as f32, (hi - 1) as f32),
        2 => ((hi - 1) as f32, lo as f32),
        _ => ((hi - 1) as f32, (hi - 1) as f32),
    };
    let d1 = rng.range_f32(0.12, 0.3) * side;
    let d2 = rng.range_f32(0.12, 0.3) * side;
    let sy = if corner < 2 { 1.0 } else { -1.0 };
    let sx = if corner % 2 == 0 { 1.0 } else { -1.0 };
    let p1 = (cy + sy * d1, cx);
    let p2 = (cy, cx + sx * d2);
    let mut alpha = vec![0f32; s * s];
    let sign = |a: (f32, f32), b: (f32, f32), p: (f32, f32)| -> f32 {
        (b.1 - a.1) * (p.0 - a.0) - (b.0 - a.0) * (p.1 - a.1)
    };
    for y in lo..hi {
        for x in lo..hi {
            let p = (y as f32, x as f32);
            let d0 = sign((cy, cx), p1, p);
            let d1s = sign(p1, p2, p);
            let d2s = sign(p2, (cy, cx), p);
            let has_neg = d0 < 0.0 || d1s < 0.0 || d2s < 0.0;
            let has_pos = d0 > 0.0 || d1s > 0.0 || d2s > 0.0;
            if !(has_neg && has_pos) {
                alpha[y * s + x] = 1.0;
            }
        }
    }
    // the notch removes the glowing material entirely
    let bg_level = 14.0;
    for (v, &a) in c.v.iter_mut().zip(alpha.iter()) {
        if a > 0.0 {
            *v = bg_level + (*v - bg_level) * (1.0 - a) * 0.05;
        }
    }
    alpha
}

fn wafer_on_pin_recipe(c: &mut Canvas, rng: &mut Rng) {
    let s = c.size as f32;
    let (lo, hi) = plate_bounds(c.size);
    let blobs = 2 + rng.below(3);
    for _ in 0..blobs {
        let cy = rng.range_f32(lo as f32 + 0.1 * s, hi as f32 - 0.1 * s);
        let cx = rng.range_f32(lo as f32 + 0.1 * s, hi as f32 - 0.1 * s);
        let radius = rng.range_f32(0.06, 0.13) * s;
        let peak = rng.range_f32(170.0, 230.0);
        let span = (3.0 * radius) as i32;
        for oy in -span..=span {
            for ox in -span..=span {
                let y = cy as i32 + oy;
                let x = cx as i32 + ox;
                if y < 0 || x < 0 || y >= c.size as i32 || x >= c.size as i32 {
                    continue;
                }
                let d = fmath::hypot(oy as f32, ox as f32) / radius;
                let v = peak * fmath::exp(-2.0 * d * d);
                let slot = c.at(y as usize, x as usize);
                if v > *slot {
                    *slot = v;
                }
            }
        }
    }
}

/// Renders one wafer image plus a mask of its local defect pixels.
pub fn generate_wafer(class: WaferClass, seed: u64, size: usize) -> (ImageU8, DefectMask) {
    assert!(size >= 32, "wafer size must be at least 32, got {size}");
    let mut rng = Rng::stream(seed, tags::SYNTH, class.code() as u64, size as u64);
    let mut canvas = Canvas::new(size);
    draw_background(&mut canvas, &mut rng);

    let mask = match class {
        WaferClass::Good => {
            draw_plate(&mut canvas, &mut rng, 0, 0);
            empty_mask(size, class)
        }
        WaferClass::LowLevel => {
            draw_plate(&mut canvas, &mut rng, 0, 0);
            let scale = rng.range_f32(0.25, 0.40);
            for v in canvas.v.iter_mut() {
                *v *= scale;
            }
            empty_mask(size, class)
        }
        WaferClass::Circle => {
            draw_plate(&mut canvas, &mut rng, 0, 0);
            let alpha = circle_recipe(&mut canvas, &mut rng);
            alpha_to_mask(&alpha, size, class)
        }
        WaferClass::Crack => {
            draw_plate(&mut canvas, &mut rng, 0, 0);
            let alpha = crack_recipe(&mut canvas, &mut rng);
            alpha_to_mask(&alpha, size, class)
        }
        WaferClass::Displaced => {
            let mag = rng.range_f32(0.18, 0.32) * size as f32;
            let angle = rng.range_f32(0.0, 2.0 * core::f32::consts::PI);
            let dy = fmath::round(mag * fmath::sin(angle)) as i32;
            let dx = fmath::round(mag * fmath::cos(angle)) as i32;
            draw_plate(&mut canvas, &mut rng, dy, dx);
            empty_mask(size, class)
        }
        WaferClass::WaferOnPin => {
            wafer_on_pin_recipe(&mut canvas, &mut rng);
            empty_mask(size, class)
        }
        WaferClass::Splinter => {
            draw_plate(&mut canvas, &mut rng, 0, 0);
            let alpha = splinter_recipe(&mut canvas, &mut rng);
            alpha_to_mask(&alpha, size, class)
        }
        WaferClass::Scratch => {
            draw_plate(&mut canvas, &mut rng, 0, 0);
            let alpha = scratch_recipe(&mut canvas, &mut rng);
            alpha_to_mask(&alpha, size, class)
        }
    };
    (canvas.quantize(), mask)
}

/// Seed for sample `index` of `class`; streams are independent so sample
/// generation can run in any order.
pub fn sample_seed(seed: u64, class: WaferClass, index: u64) -> u64 {
    rng::mix(seed ^ rng::mix(0x57AF ^ class.code() as u64) ^ rng::mix(index.wrapping_add(0x9E37)))
}

/// Reference per-class counts scaled by `scale`, rounding half-up, with
/// a floor of 4 for every class that remains nonzero.
pub fn scaled_counts(scale: f64) -> [usize; 8] {
    let mut out = [0usize; 8];
    for (i, class) in WaferClass::ALL.iter().enumerate() {
        let exact = class.reference_count() as f64 * scale;
        let rounded = libm::floor(exact + 0.5) as usize;
        out[i] = if exact > 0.0 { rounded.max(4) } else { 0 };
    }
    out
}

/// Generates an in-memory dataset with the given per-class counts.
pub fn generate_samples(counts: &[usize; 8], seed: u64, size: usize) -> Dataset {
    let mut ds = Dataset::empty_full();
    for (label, class) in WaferClass::ALL.iter().enumerate() {
        for i in 0..counts[label] {
            let (image, _) = generate_wafer(*class, sample_seed(seed, *class, i as u64), size);
            ds.samples.push(Sample {
                id: format!("{}_{i:05}", class.name()),
                image,
                label,
            });
        }
    }
    ds
}
