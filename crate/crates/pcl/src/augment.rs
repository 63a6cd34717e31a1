//! Position-preserving spatial augmentations and 2N batch assembly.
//!
//! Augmentations act only in-plane, so the z-position of a slice — the
//! quantity pair mining keys on — is copied through untouched. Transform
//! order is fixed (translate, then rotate, then scale) so a seed pins the
//! output exactly.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::volume::{Slice2D, SliceBatch};

/// Augmentation magnitude ranges. The defaults are deliberately mild;
/// they are configuration, not claims.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AugConfig {
    /// Max |shift| as a fraction of image extent, per axis.
    pub max_translate: f64,
    /// Max |rotation| in degrees.
    pub max_rotate: f64,
    /// Multiplicative scale range (lo, hi) with lo <= 1 <= hi.
    pub scale_range: (f64, f64),
}

impl Default for AugConfig {
    fn default() -> Self {
        AugConfig {
            max_translate: 0.1,
            max_rotate: 15.0,
            scale_range: (0.9, 1.1),
        }
    }
}

impl AugConfig {
    /// No-op transform ranges; augmented output equals the input.
    pub fn identity() -> Self {
        AugConfig {
            max_translate: 0.0,
            max_rotate: 0.0,
            scale_range: (1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.max_translate) {
            return Err(Error::Config(format!(
                "max_translate must lie in [0, 0.5], got {}",
                self.max_translate
            )));
        }
        if self.max_rotate < 0.0 {
            return Err(Error::Config("max_rotate must be >= 0".into()));
        }
        let (lo, hi) = self.scale_range;
        if !(lo <= 1.0 && 1.0 <= hi) {
            return Err(Error::Config(format!(
                "scale range must bracket 1, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// Augmented mini-batch: entries 2i and 2i+1 are two independent
/// augmentations of source slice i.
#[derive(Debug, Clone)]
pub struct AugBatch {
    pub slices: Vec<Slice2D>,
}

impl AugBatch {
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.position).collect()
    }

    pub fn volume_ids(&self) -> Vec<&str> {
        self.slices.iter().map(|s| s.volume_id.as_str()).collect()
    }
}

/// Bilinear sample with zero fill outside the grid.
fn sample_zero(pixels: &[f64], w: usize, h: usize, u: f64, v: f64) -> f64 {
    let x0 = u.floor();
    let y0 = v.floor();
    let fx = u - x0;
    let fy = v - y0;
    let mut acc = 0.0;
    for (dy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
        if wy == 0.0 {
            continue;
        }
        let yy = y0 + dy;
        if yy < 0.0 || yy >= h as f64 {
            continue;
        }
        for (dx, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
            if wx == 0.0 {
                continue;
            }
            let xx = x0 + dx;
            if xx < 0.0 || xx >= w as f64 {
                continue;
            }
            acc += wy * wx * pixels[yy as usize * w + xx as usize];
        }
    }
    acc
}

/// Nearest-neighbor sample with zero (background) fill outside the grid.
fn sample_nearest(labels: &[u16], w: usize, h: usize, u: f64, v: f64) -> u16 {
    let x = u.round();
    let y = v.round();
    if x < 0.0 || y < 0.0 || x >= w as f64 || y >= h as f64 {
        return 0;
    }
    labels[y as usize * w + x as usize]
}

/// Applies `inverse`, mapping each output pixel to its source coordinate.
fn warp(s: &Slice2D, inverse: impl Fn(f64, f64) -> (f64, f64)) -> Slice2D {
    let (w, h) = (s.width, s.height);
    let mut pixels = vec![0.0f64; w * h];
    let mut label = s.label.as_ref().map(|_| vec![0u16; w * h]);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = inverse(x as f64, y as f64);
            pixels[y * w + x] = sample_zero(&s.pixels, w, h, u, v);
            if let (Some(out), Some(src)) = (label.as_mut(), s.label.as_ref()) {
                out[y * w + x] = sample_nearest(src, w, h, u, v);
            }
        }
    }
    Slice2D {
        pixels,
        label,
        ..s.clone()
    }
}

/// Shift image content by (tx, ty) pixels.
pub(crate) fn translate_image(s: &Slice2D, tx: f64, ty: f64) -> Slice2D {
    warp(s, |x, y| (x - tx, y - ty))
}

/// Rotate image content about the image center. With y pointing down, a
/// positive angle moves the top row toward the right edge.
pub(crate) fn rotate_image(s: &Slice2D, degrees: f64) -> Slice2D {
    let rad = degrees.to_radians();
    let (sin, cos) = rad.sin_cos();
    let cx = (s.width - 1) as f64 / 2.0;
    let cy = (s.height - 1) as f64 / 2.0;
    warp(s, |x, y| {
        let dx = x - cx;
        let dy = y - cy;
        (cx + cos * dx + sin * dy, cy - sin * dx + cos * dy)
    })
}

/// Scale image content about the image center.
pub(crate) fn scale_image(s: &Slice2D, factor: f64) -> Slice2D {
    let cx = (s.width - 1) as f64 / 2.0;
    let cy = (s.height - 1) as f64 / 2.0;
    warp(s, |x, y| (cx + (x - cx) / factor, cy + (y - cy) / factor))
}

/// One random augmentation: sampled translation, rotation, and scale in
/// that order, bilinear with zero fill. Position and provenance metadata
/// pass through unchanged.
pub fn random_augment(s: &Slice2D, cfg: &AugConfig, rng: &mut Rng) -> Slice2D {
    let tx = rng.range(-cfg.max_translate, cfg.max_translate) * s.width as f64;
    let ty = rng.range(-cfg.max_translate, cfg.max_translate) * s.height as f64;
    let deg = rng.range(-cfg.max_rotate, cfg.max_rotate);
    let factor = rng.range(cfg.scale_range.0, cfg.scale_range.1);
    let out = translate_image(s, tx, ty);
    let out = rotate_image(&out, deg);
    scale_image(&out, factor)
}

/// Builds the 2N contrastive batch: two independent augmentations per
/// source slice, twin-interleaved.
pub fn make_contrastive_batch(b: &SliceBatch, cfg: &AugConfig, rng: &mut Rng) -> AugBatch {
    let mut slices = Vec::with_capacity(2 * b.len());
    for s in &b.slices {
        slices.push(random_augment(s, cfg, rng));
        slices.push(random_augment(s, cfg, rng));
    }
    AugBatch { slices }
}
