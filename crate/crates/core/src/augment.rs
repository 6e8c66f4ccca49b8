//! Scan-simulation augmentation for grayscale score images.
//!
//! Eight operations run in a fixed order, each applied independently with
//! `apply_probability`. Every operation draws from its own ChaCha8 stream
//! (stream index = operation index) seeded from the caller's seed, so
//! enabling or disabling one operation never changes the draws of another.

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image must be non-empty, got {0}x{1}")]
    Empty(u32, u32),
    #[error("expected {expected} pixels, got {got}")]
    Size { expected: usize, got: usize },
    #[error("pixel {0} out of [0, 1]: {1}")]
    Range(usize, f32),
    #[error(transparent)]
    Codec(#[from] image::ImageError),
}

/// Grayscale image, row-major, intensities in `[0, 1]` with 1 = white.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<f32>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<f32>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Empty(width, height));
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(ImageError::Size { expected, got: pixels.len() });
        }
        if let Some((i, v)) = pixels.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(ImageError::Range(i, *v));
        }
        Ok(RasterImage { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, value: f32) -> Self {
        assert!(width > 0 && height > 0);
        RasterImage {
            width,
            height,
            pixels: vec![value.clamp(0.0, 1.0); width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        RasterImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|v| f(*v).clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn from_gray(img: &image::GrayImage) -> Result<Self, ImageError> {
        let pixels = img.as_raw().iter().map(|v| f32::from(*v) / 255.0).collect();
        RasterImage::new(img.width(), img.height(), pixels)
    }

    pub fn to_gray(&self) -> image::GrayImage {
        let raw = self.pixels.iter().map(|v| (v * 255.0).round() as u8).collect();
        image::GrayImage::from_raw(self.width, self.height, raw).expect("buffer matches dimensions")
    }

    /// Load any image format the codec understands, converted to grayscale.
    pub fn load(path: &Path) -> Result<Self, ImageError> {
        RasterImage::from_gray(&image::open(path)?.to_luma8())
    }

    pub fn save_png(&self, path: &Path) -> Result<(), ImageError> {
        self.to_gray().save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    /// SHA-256 over dimensions and the exact pixel bit patterns.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.width.to_le_bytes());
        h.update(self.height.to_le_bytes());
        for v in &self.pixels {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    HorizontalShift,
    Rotation,
    VerticalShift,
    Morphology,
    EdgeNoise,
    PixelNegate,
    Contrast,
    Brightness,
}

impl Op {
    /// Pipeline order.
    pub const ALL: [Op; 8] = [
        Op::HorizontalShift,
        Op::Rotation,
        Op::VerticalShift,
        Op::Morphology,
        Op::EdgeNoise,
        Op::PixelNegate,
        Op::Contrast,
        Op::Brightness,
    ];

    pub fn index(self) -> usize {
        Op::ALL.iter().position(|o| *o == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            Op::HorizontalShift => "h-shift",
            Op::Rotation => "rotate",
            Op::VerticalShift => "v-shift",
            Op::Morphology => "morph",
            Op::EdgeNoise => "edge-noise",
            Op::PixelNegate => "negate",
            Op::Contrast => "contrast",
            Op::Brightness => "brightness",
        }
    }

    pub fn from_name(s: &str) -> Option<Op> {
        Op::ALL.into_iter().find(|o| o.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    /// Indexed by [`Op::index`].
    pub enabled: [bool; 8],
    pub apply_probability: f64,
    pub h_shift_max: f64,
    pub rot_max_degrees: f64,
    pub v_shift_max: f64,
    pub morph_semi_axes: (f64, f64),
    pub edge_noise_p_max: f64,
    pub negate_p_max: f64,
    pub contrast_log2: (f64, f64),
    pub brightness: (f64, f64),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            enabled: [true; 8],
            apply_probability: 0.5,
            h_shift_max: 8.0,
            rot_max_degrees: 1.0,
            v_shift_max: 4.0,
            morph_semi_axes: (1.0, 0.5),
            edge_noise_p_max: 0.20,
            negate_p_max: 0.01,
            contrast_log2: (-1.0, 1.0),
            brightness: (-0.5, 0.2),
        }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        AugmentConfig {
            enabled: [false; 8],
            ..AugmentConfig::default()
        }
    }

    pub fn only(op: Op) -> Self {
        let mut c = AugmentConfig::disabled();
        c.enabled[op.index()] = true;
        c
    }

    pub fn is_enabled(&self, op: Op) -> bool {
        self.enabled[op.index()]
    }

    pub fn set_enabled(&mut self, op: Op, on: bool) {
        self.enabled[op.index()] = on;
    }

    pub fn validate(&self) -> Result<(), String> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(format!("{name} must be in [0, 1], got {p}"))
            }
        };
        prob("apply_probability", self.apply_probability)?;
        prob("edge_noise_p_max", self.edge_noise_p_max)?;
        prob("negate_p_max", self.negate_p_max)?;
        for (name, v) in [
            ("h_shift_max", self.h_shift_max),
            ("rot_max_degrees", self.rot_max_degrees),
            ("v_shift_max", self.v_shift_max),
            ("morph semi-axis x", self.morph_semi_axes.0),
            ("morph semi-axis y", self.morph_semi_axes.1),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        for (name, (lo, hi)) in [("contrast_log2", self.contrast_log2), ("brightness", self.brightness)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(format!("{name} range is invalid: [{lo}, {hi}]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Morph {
    /// Grayscale dilation (max filter): light regions grow, strokes thin.
    Dilate,
    /// Grayscale erosion (min filter): dark strokes thicken.
    Erode,
}

/// One operation that fired, with its drawn magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Applied {
    HorizontalShift(f64),
    Rotation(f64),
    VerticalShift(f64),
    Morphology(Morph),
    EdgeNoise(f64),
    PixelNegate(f64),
    /// Base-2 logarithm of the contrast factor.
    Contrast(f64),
    Brightness(f64),
}

impl Applied {
    pub fn op(&self) -> Op {
        match self {
            Applied::HorizontalShift(_) => Op::HorizontalShift,
            Applied::Rotation(_) => Op::Rotation,
            Applied::VerticalShift(_) => Op::VerticalShift,
            Applied::Morphology(_) => Op::Morphology,
            Applied::EdgeNoise(_) => Op::EdgeNoise,
            Applied::PixelNegate(_) => Op::PixelNegate,
            Applied::Contrast(_) => Op::Contrast,
            Applied::Brightness(_) => Op::Brightness,
        }
    }

    /// Scalar magnitude; morphology maps to 0 (dilate) or 1 (erode).
    pub fn magnitude(&self) -> f64 {
        match *self {
            Applied::HorizontalShift(v)
            | Applied::Rotation(v)
            | Applied::VerticalShift(v)
            | Applied::EdgeNoise(v)
            | Applied::PixelNegate(v)
            | Applied::Contrast(v)
            | Applied::Brightness(v) => v,
            Applied::Morphology(m) => f64::from(u8::from(m == Morph::Erode)),
        }
    }
}

/// Generator for one operation's sub-stream.
pub fn op_rng(seed: u64, op: Op) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(op.index() as u64);
    rng
}

/// Per-file seed: `seed` xor the first 8 bytes of SHA-256(file id).
pub fn derive_seed(seed: u64, file_id: &str) -> u64 {
    let d = Sha256::digest(file_id.as_bytes());
    seed ^ u64::from_le_bytes(d[..8].try_into().unwrap())
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

pub fn augment(img: &RasterImage, cfg: &AugmentConfig, seed: u64) -> RasterImage {
    augment_traced(img, cfg, seed).0
}

/// Run the pipeline and report which operations fired, in order.
pub fn augment_traced(img: &RasterImage, cfg: &AugmentConfig, seed: u64) -> (RasterImage, Vec<Applied>) {
    let mut out = img.clone();
    let mut trace = Vec::new();
    for op in Op::ALL {
        if !cfg.is_enabled(op) {
            continue;
        }
        let mut rng = op_rng(seed, op);
        if rng.gen::<f64>() >= cfg.apply_probability {
            continue;
        }
        let applied = match op {
            Op::HorizontalShift => Applied::HorizontalShift(uniform(&mut rng, -cfg.h_shift_max, cfg.h_shift_max)),
            Op::Rotation => Applied::Rotation(uniform(&mut rng, -cfg.rot_max_degrees, cfg.rot_max_degrees)),
            Op::VerticalShift => Applied::VerticalShift(uniform(&mut rng, -cfg.v_shift_max, cfg.v_shift_max)),
            Op::Morphology => Applied::Morphology(if rng.gen::<bool>() { Morph::Erode } else { Morph::Dilate }),
            Op::EdgeNoise => Applied::EdgeNoise(uniform(&mut rng, 0.0, cfg.edge_noise_p_max)),
            Op::PixelNegate => Applied::PixelNegate(uniform(&mut rng, 0.0, cfg.negate_p_max)),
            Op::Contrast => Applied::Contrast(uniform(&mut rng, cfg.contrast_log2.0, cfg.contrast_log2.1)),
            Op::Brightness => Applied::Brightness(uniform(&mut rng, cfg.brightness.0, cfg.brightness.1)),
        };
        out = match applied {
            Applied::HorizontalShift(dx) => shift(&out, dx, 0.0),
            Applied::Rotation(deg) => rotate(&out, deg),
            Applied::VerticalShift(dy) => shift(&out, 0.0, dy),
            Applied::Morphology(m) => morph(&out, m, &ellipse_kernel(cfg.morph_semi_axes.0, cfg.morph_semi_axes.1)),
            Applied::EdgeNoise(p) => edge_negate(&out, p, &mut rng),
            Applied::PixelNegate(p) => negate_pixels(&out, p, &mut rng),
            Applied::Contrast(l) => contrast(&out, l),
            Applied::Brightness(b) => brightness(&out, b),
        };
        trace.push(applied);
    }
    (out, trace)
}

/// Bilinear sample; anything outside the image reads as white.
fn sample(img: &RasterImage, x: f64, y: f64) -> f32 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let at = |xi: f64, yi: f64| -> f64 {
        if xi < 0.0 || yi < 0.0 || xi >= f64::from(img.width) || yi >= f64::from(img.height) {
            1.0
        } else {
            f64::from(img.get(xi as u32, yi as u32))
        }
    };
    let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1.0, y0) * fx;
    let bottom = at(x0, y0 + 1.0) * (1.0 - fx) + at(x0 + 1.0, y0 + 1.0) * fx;
    ((top * (1.0 - fy) + bottom * fy) as f32).clamp(0.0, 1.0)
}

fn resample(img: &RasterImage, src: impl Fn(f64, f64) -> (f64, f64)) -> RasterImage {
    let mut pixels = Vec::with_capacity(img.pixels.len());
    for y in 0..img.height {
        for x in 0..img.width {
            let (sx, sy) = src(f64::from(x), f64::from(y));
            pixels.push(sample(img, sx, sy));
        }
    }
    RasterImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}

/// Translate content by `(dx, dy)` pixels; positive moves right/down.
pub fn shift(img: &RasterImage, dx: f64, dy: f64) -> RasterImage {
    resample(img, |x, y| (x - dx, y - dy))
}

/// Rotate counter-clockwise by `degrees` about the image center.
pub fn rotate(img: &RasterImage, degrees: f64) -> RasterImage {
    let (s, c) = degrees.to_radians().sin_cos();
    let cx = (f64::from(img.width) - 1.0) / 2.0;
    let cy = (f64::from(img.height) - 1.0) / 2.0;
    // Inverse map: destination -> source, y axis pointing down.
    resample(img, |x, y| {
        let (u, v) = (x - cx, y - cy);
        (c * u - s * v + cx, s * u + c * v + cy)
    })
}

/// Offsets `(dx, dy)` of the 3x3 cells inside the ellipse with the given semi-axes.
pub fn ellipse_kernel(ax: f64, ay: f64) -> Vec<(i32, i32)> {
    let mut k = Vec::new();
    for dy in -1i32..=1 {
        for dx in -1i32..=1 {
            let term = |d: i32, a: f64| if d == 0 { 0.0 } else if a == 0.0 { f64::INFINITY } else { (f64::from(d) / a).powi(2) };
            if term(dx, ax) + term(dy, ay) <= 1.0 {
                k.push((dx, dy));
            }
        }
    }
    k
}

pub fn morph(img: &RasterImage, kind: Morph, kernel: &[(i32, i32)]) -> RasterImage {
    let (w, h) = (img.width as i32, img.height as i32);
    let mut pixels = Vec::with_capacity(img.pixels.len());
    for y in 0..h {
        for x in 0..w {
            let vals = kernel.iter().filter_map(|(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                (nx >= 0 && ny >= 0 && nx < w && ny < h).then(|| img.get(nx as u32, ny as u32))
            });
            let v = match kind {
                Morph::Dilate => vals.fold(f32::NEG_INFINITY, f32::max),
                Morph::Erode => vals.fold(f32::INFINITY, f32::min),
            };
            pixels.push(if v.is_finite() { v } else { img.get(x as u32, y as u32) });
        }
    }
    RasterImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}

/// Pixels whose clamped 3x3 neighborhood, binarized at 0.5, mixes black and white.
pub fn edge_mask(img: &RasterImage) -> Vec<bool> {
    let (w, h) = (img.width as usize, img.height as usize);
    let white: Vec<bool> = img.pixels.iter().map(|v| *v >= 0.5).collect();
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut mask = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut any_white = false;
            let mut any_black = false;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let nx = clamp(x as isize + dx, w);
                    let ny = clamp(y as isize + dy, h);
                    if white[ny * w + nx] {
                        any_white = true;
                    } else {
                        any_black = true;
                    }
                }
            }
            mask[y * w + x] = any_white && any_black;
        }
    }
    mask
}

/// Negate each edge pixel (see [`edge_mask`]) independently with probability `p`.
pub fn edge_negate(img: &RasterImage, p: f64, rng: &mut impl Rng) -> RasterImage {
    let mask = edge_mask(img);
    let mut out = img.clone();
    for (v, eligible) in out.pixels.iter_mut().zip(mask) {
        if eligible && rng.gen::<f64>() < p {
            *v = 1.0 - *v;
        }
    }
    out
}

/// Negate every pixel independently with probability `p`.
pub fn negate_pixels(img: &RasterImage, p: f64, rng: &mut impl Rng) -> RasterImage {
    let mut out = img.clone();
    for v in out.pixels.iter_mut() {
        if rng.gen::<f64>() < p {
            *v = 1.0 - *v;
        }
    }
    out
}

/// Scale deviations from the mean intensity by `2^log2_factor`.
pub fn contrast(img: &RasterImage, log2_factor: f64) -> RasterImage {
    let f = log2_factor.exp2() as f32;
    let mean = (img.pixels.iter().map(|v| f64::from(*v)).sum::<f64>() / img.pixels.len() as f64) as f32;
    img.map(|v| mean + (v - mean) * f)
}

/// Add `delta` to every intensity.
pub fn brightness(img: &RasterImage, delta: f64) -> RasterImage {
    let d = delta as f32;
    img.map(|v| v + d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn staff_image() -> RasterImage {
        let (w, h) = (48u32, 24u32);
        let mut px = vec![1.0f32; (w * h) as usize];
        for y in [4u32, 8, 12, 16, 20] {
            for x in 0..w {
                px[(y * w + x) as usize] = 0.0;
            }
        }
        for y in 6..14 {
            px[(y * w + 20) as usize] = 0.1;
            px[(y * w + 21) as usize] = 0.3;
        }
        RasterImage::new(w, h, px).unwrap()
    }

    #[test]
    fn disabled_is_identity() {
        let img = staff_image();
        for seed in 0..20 {
            assert_eq!(augment(&img, &AugmentConfig::disabled(), seed), img);
        }
    }

    #[test]
    fn brightness_clamps() {
        let img = RasterImage::filled(5, 3, 0.5);
        let out = brightness(&img, -0.5);
        assert!(out.pixels().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn kernel_is_horizontal_bar() {
        assert_eq!(ellipse_kernel(1.0, 0.5), vec![(-1, 0), (0, 0), (1, 0)]);
        assert_eq!(ellipse_kernel(1.0, 1.0).len(), 5);
    }

    #[test]
    fn integer_shift_and_fill() {
        let img = staff_image();
        let s = shift(&img, 3.0, 0.0);
        for y in 0..img.height() {
            for x in 0..3 {
                assert_eq!(s.get(x, y), 1.0);
            }
            for x in 3..img.width() {
                assert_eq!(s.get(x, y), img.get(x - 3, y));
            }
        }
        assert_eq!(rotate(&img, 0.0), img);
    }

    #[test]
    fn edge_noise_leaves_uniform_images() {
        let mut rng = op_rng(1, Op::EdgeNoise);
        for v in [0.0, 1.0, 0.7] {
            let img = RasterImage::filled(7, 5, v);
            assert_eq!(edge_negate(&img, 0.2, &mut rng), img);
        }
        let img = staff_image();
        assert_eq!(edge_negate(&img, 0.0, &mut rng), img);
    }

    #[test]
    fn deterministic_and_in_range() {
        let img = staff_image();
        let mut cfg = AugmentConfig::default();
        cfg.apply_probability = 1.0;
        let a = augment_traced(&img, &cfg, 99);
        let b = augment_traced(&img, &cfg, 99);
        assert_eq!(a, b);
        assert_eq!(a.1.iter().map(Applied::op).collect::<Vec<_>>(), Op::ALL.to_vec());
        assert!(a.0.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!((a.0.width(), a.0.height()), (img.width(), img.height()));
    }

    #[test]
    fn streams_are_independent() {
        let img = staff_image();
        let all = augment_traced(&img, &AugmentConfig::default(), 5).1;
        let mut cfg = AugmentConfig::default();
        cfg.set_enabled(Op::Rotation, false);
        let without = augment_traced(&img, &cfg, 5).1;
        let expect: Vec<Applied> = all.into_iter().filter(|a| a.op() != Op::Rotation).collect();
        assert_eq!(without, expect);
    }

    #[test]
    fn png_round_trip() {
        let img = staff_image().map(|v| (v * 255.0).round() / 255.0);
        let dir = std::env::temp_dir().join(format!("lmx-aug-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("a.png");
        img.save_png(&path).unwrap();
        assert_eq!(RasterImage::load(&path).unwrap(), img);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
