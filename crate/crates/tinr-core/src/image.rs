//! Image I/O, mipmap pyramid construction, and training-set assembly.
//!
//! Pixels are stored as 64-bit reals in `[0,1]`, three channels, row-major.
//! Mip levels are always resampled from the base image (never cascaded) with
//! an area-correct triangle filter, and every pixel of every level becomes
//! one equally weighted training sample at its pixel-center UV(T) coordinate.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::InrModel;
use crate::tensor::Matrix;

pub const DEFAULT_MIP_LEVELS: usize = 6;

/// Normalized H x W x 3 pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Image {
            width,
            height,
            pixels: vec![0.0; width * height * 3],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height * 3 {
            return Err(Error::shape(
                "Image::from_pixels",
                format!("{width}x{height}x3"),
                format!("data len {}", pixels.len()),
            ));
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    /// Fills every pixel with one RGB color.
    pub fn constant(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&rgb);
        }
        Image {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// 8-bit quantization used on save: clamp then round(p * 255).
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let dynamic = image::open(path.as_ref())?;
    // Grayscale and alpha sources are folded to plain RGB.
    let rgb = dynamic.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let pixels = rgb.as_raw().iter().map(|&b| b as f64 / 255.0).collect();
    Image::from_pixels(w, h, pixels)
}

pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let buf = image::RgbImage::from_raw(img.width as u32, img.height as u32, img.to_rgb8())
        .expect("buffer length matches dimensions");
    buf.save(path.as_ref())?;
    Ok(())
}

// ── Resampling ───────────────────────────────────────────────────────

struct FilterTaps {
    // (first source index, normalized weights) per output position
    taps: Vec<(usize, Vec<f64>)>,
}

// Triangle (tent) filter taps for one axis. The kernel is widened by the
// downscale factor so reductions average full source extents instead of
// point-sampling.
fn triangle_taps(in_len: usize, out_len: usize) -> FilterTaps {
    let scale = in_len as f64 / out_len as f64;
    let support = scale.max(1.0);
    let mut taps = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let center = (i as f64 + 0.5) * scale - 0.5;
        let lo = (center - support).ceil() as isize;
        let hi = (center + support).floor() as isize;
        let mut weights = Vec::with_capacity((hi - lo + 1) as usize);
        let mut total = 0.0;
        for j in lo..=hi {
            let w = 1.0 - ((j as f64 - center) / support).abs();
            let w = w.max(0.0);
            weights.push(w);
            total += w;
        }
        for w in &mut weights {
            *w /= total;
        }
        // Edge taps are clamped by folding their weight into the border pixel.
        let first = lo.max(0) as usize;
        let mut folded = vec![0.0; (hi.min(in_len as isize - 1) - lo.max(0) + 1).max(1) as usize];
        for (k, w) in weights.into_iter().enumerate() {
            let j = (lo + k as isize).clamp(0, in_len as isize - 1) as usize;
            folded[j - first] += w;
        }
        taps.push((first, folded));
    }
    FilterTaps { taps }
}

/// Area-correct bilinear (triangle-filter) resampling of the whole image.
pub fn resample(img: &Image, out_w: usize, out_h: usize) -> Image {
    assert!(out_w > 0 && out_h > 0);
    if out_w == img.width && out_h == img.height {
        return img.clone();
    }
    let h_taps = triangle_taps(img.width, out_w);
    let v_taps = triangle_taps(img.height, out_h);

    // Horizontal pass: img.height rows of out_w pixels.
    let mut mid = vec![0.0; out_w * img.height * 3];
    for y in 0..img.height {
        let src = &img.pixels[y * img.width * 3..(y + 1) * img.width * 3];
        let dst = &mut mid[y * out_w * 3..(y + 1) * out_w * 3];
        for (x, (first, weights)) in h_taps.taps.iter().enumerate() {
            let mut acc = [0.0; 3];
            for (k, &w) in weights.iter().enumerate() {
                let s = (first + k) * 3;
                acc[0] += w * src[s];
                acc[1] += w * src[s + 1];
                acc[2] += w * src[s + 2];
            }
            dst[x * 3..x * 3 + 3].copy_from_slice(&acc);
        }
    }

    // Vertical pass.
    let mut out = vec![0.0; out_w * out_h * 3];
    for (y, (first, weights)) in v_taps.taps.iter().enumerate() {
        let dst = &mut out[y * out_w * 3..(y + 1) * out_w * 3];
        for (k, &w) in weights.iter().enumerate() {
            let src = &mid[(first + k) * out_w * 3..(first + k + 1) * out_w * 3];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    Image {
        width: out_w,
        height: out_h,
        pixels: out,
    }
}

// ── Mipmap pyramid ───────────────────────────────────────────────────

/// Ordered mip chain; level 0 is the base image.
#[derive(Debug, Clone)]
pub struct MipmapPyramid {
    levels: Vec<Image>,
}

impl MipmapPyramid {
    pub fn from_levels(levels: Vec<Image>) -> Self {
        MipmapPyramid { levels }
    }

    pub fn level(&self, l: usize) -> &Image {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[Image] {
        &self.levels
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn base(&self) -> &Image {
        &self.levels[0]
    }
}

/// Dimensions of level `l`: `ceil(base / 2^l)`.
pub fn level_dims(base_w: usize, base_h: usize, l: usize) -> (usize, usize) {
    let d = 1usize << l;
    (base_w.div_ceil(d), base_h.div_ceil(d))
}

/// Builds the pyramid by resampling the base image down to every level
/// (not by cascaded halving, which would accumulate filter error).
pub fn build_pyramid(base: &Image, levels: usize) -> Result<MipmapPyramid> {
    if levels < 1 {
        return Err(Error::Config("pyramid needs at least one level".into()));
    }
    let min_side = 1usize << (levels - 1);
    if base.width < min_side || base.height < min_side {
        return Err(Error::Config(format!(
            "image {}x{} too small for {} mip levels (needs {} px per side)",
            base.width, base.height, levels, min_side
        )));
    }
    let mut out = Vec::with_capacity(levels);
    out.push(base.clone());
    for l in 1..levels {
        let (w, h) = level_dims(base.width, base.height, l);
        out.push(resample(base, w, h));
    }
    Ok(MipmapPyramid { levels: out })
}

// ── Training dataset ─────────────────────────────────────────────────

/// One pixel-center coordinate paired with its target color. `t` is the
/// normalized mip level, present only for pyramid training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSample {
    pub u: f64,
    pub v: f64,
    pub t: Option<f64>,
    pub rgb: [f64; 3],
}

fn level_t(l: usize, levels: usize) -> f64 {
    if levels <= 1 {
        0.0
    } else {
        l as f64 / (levels - 1) as f64
    }
}

fn push_level_samples(samples: &mut Vec<TrainingSample>, img: &Image, t: Option<f64>) {
    let (w, h) = (img.width, img.height);
    for y in 0..h {
        for x in 0..w {
            samples.push(TrainingSample {
                u: (x as f64 + 0.5) / w as f64,
                v: (y as f64 + 0.5) / h as f64,
                t,
                rgb: img.get(x, y),
            });
        }
    }
}

/// Row-major samples of a single image; one per pixel, no `t`.
pub fn build_dataset(img: &Image) -> Vec<TrainingSample> {
    let mut samples = Vec::with_capacity(img.width * img.height);
    push_level_samples(&mut samples, img, None);
    samples
}

/// Level-major, row-major samples over the whole pyramid with
/// `t = l / (levels - 1)`. Every pixel weighs the same, so finer levels
/// dominate the loss purely through their sample counts.
pub fn build_mipmap_dataset(pyr: &MipmapPyramid) -> Vec<TrainingSample> {
    let levels = pyr.level_count();
    let total: usize = pyr.levels.iter().map(|i| i.width * i.height).sum();
    let mut samples = Vec::with_capacity(total);
    for (l, img) in pyr.levels.iter().enumerate() {
        push_level_samples(&mut samples, img, Some(level_t(l, levels)));
    }
    samples
}

/// Splits samples into a coordinate matrix (batch x input_dim) and target
/// matrix (batch x 3) for the training loop.
pub fn dataset_matrices(samples: &[TrainingSample]) -> Result<(Matrix, Matrix)> {
    if samples.is_empty() {
        return Err(Error::Config("empty training dataset".into()));
    }
    let with_t = samples[0].t.is_some();
    let dim = if with_t { 3 } else { 2 };
    let mut coords = Vec::with_capacity(samples.len() * dim);
    let mut targets = Vec::with_capacity(samples.len() * 3);
    for s in samples {
        if s.t.is_some() != with_t {
            return Err(Error::Config("mixed uv/uvt samples in one dataset".into()));
        }
        coords.push(s.u);
        coords.push(s.v);
        if let Some(t) = s.t {
            coords.push(t);
        }
        targets.extend_from_slice(&s.rgb);
    }
    Ok((
        Matrix::from_vec(samples.len(), dim, coords)?,
        Matrix::from_vec(samples.len(), 3, targets)?,
    ))
}

// ── Decoding ─────────────────────────────────────────────────────────

/// Evaluates the model over the pixel-center grid and clamps to `[0,1]`.
/// `t` must be present exactly when the model takes a third coordinate.
pub fn decode_image(model: &InrModel, width: usize, height: usize, t: Option<f64>) -> Result<Image> {
    let dim = model.spec.input_dim;
    match (dim, t) {
        (2, None) | (3, Some(_)) => {}
        _ => {
            return Err(Error::shape(
                "decode_image",
                format!("model input_dim {dim}"),
                format!("t {}", t.map_or("absent".to_string(), |t| t.to_string())),
            ));
        }
    }

    // Rows decode independently; band the grid for the worker pool.
    let band_rows = (4096 / width.max(1)).max(1);
    let bands: Vec<(usize, usize)> = (0..height)
        .step_by(band_rows)
        .map(|y| (y, (y + band_rows).min(height)))
        .collect();
    let decoded: Result<Vec<Vec<f64>>> = bands
        .par_iter()
        .map(|&(y0, y1)| {
            let rows = y1 - y0;
            let mut coords = Vec::with_capacity(rows * width * dim);
            for y in y0..y1 {
                for x in 0..width {
                    coords.push((x as f64 + 0.5) / width as f64);
                    coords.push((y as f64 + 0.5) / height as f64);
                    if let Some(t) = t {
                        coords.push(t);
                    }
                }
            }
            let m = Matrix::from_vec(rows * width, dim, coords)?;
            let out = model.forward(&m)?;
            Ok(out.data().iter().map(|&v| v.clamp(0.0, 1.0)).collect())
        })
        .collect();
    let mut pixels = Vec::with_capacity(width * height * 3);
    for band in decoded? {
        pixels.extend_from_slice(&band);
    }
    Image::from_pixels(width, height, pixels)
}

/// Decodes every mip level of a UVT model at its discrete `t`.
pub fn decode_pyramid(
    model: &InrModel,
    base_w: usize,
    base_h: usize,
    levels: usize,
) -> Result<MipmapPyramid> {
    if levels < 1 {
        return Err(Error::Config("pyramid needs at least one level".into()));
    }
    let mut out = Vec::with_capacity(levels);
    for l in 0..levels {
        let (w, h) = level_dims(base_w, base_h, l);
        out.push(decode_image(model, w, h, Some(level_t(l, levels)))?);
    }
    Ok(MipmapPyramid { levels: out })
}

/// Packs pyramid levels left-to-right, top-aligned, with a 2 px black gutter,
/// for visual inspection.
pub fn pyramid_atlas(pyr: &MipmapPyramid) -> Image {
    const GUTTER: usize = 2;
    let width: usize = pyr.levels.iter().map(|i| i.width).sum::<usize>()
        + GUTTER * (pyr.level_count().saturating_sub(1));
    let height = pyr.levels.iter().map(|i| i.height).max().unwrap_or(0);
    let mut atlas = Image::new(width, height);
    let mut x0 = 0;
    for img in &pyr.levels {
        for y in 0..img.height {
            for x in 0..img.width {
                atlas.set(x0 + x, y, img.get(x, y));
            }
        }
        x0 += img.width + GUTTER;
    }
    atlas
}
