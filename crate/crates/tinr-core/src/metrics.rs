//! Quality and complexity metrics: MAE, MSE, PSNR, SSIM, Laplacian variance,
//! bits per pixel.
//!
//! Pixel-difference metrics work on the 0-255 scale with MAX = 255; the PSNR
//! convention is `10 log10(255^2 / MSE)`. SSIM follows the luminance/contrast/
//! structure decomposition on the Y channel with configurable stabilizers and
//! exponents, in either whole-image (global) or 11x11 Gaussian window mode.

use crate::error::{Error, Result};
use crate::image::Image;

pub const MAX_I: f64 = 255.0;

fn check_dims(a: &Image, b: &Image, context: &'static str) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::shape(
            context,
            format!("{}x{}", a.width(), a.height()),
            format!("{}x{}", b.width(), b.height()),
        ));
    }
    Ok(())
}

/// Mean absolute pixel difference on the 0-255 scale.
pub fn mae(a: &Image, b: &Image) -> Result<f64> {
    check_dims(a, b, "mae")?;
    let n = a.pixels().len() as f64;
    Ok(a.pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| ((x - y) * MAX_I).abs())
        .sum::<f64>()
        / n)
}

/// Mean squared pixel difference on the 0-255 scale.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_dims(a, b, "mse")?;
    let n = a.pixels().len() as f64;
    Ok(a.pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = (x - y) * MAX_I;
            d * d
        })
        .sum::<f64>()
        / n)
}

/// `10 log10(255^2 / mse)` in dB; zero MSE reports infinity.
pub fn psnr(mse_255: f64) -> Result<f64> {
    if mse_255 < 0.0 {
        return Err(Error::Domain(format!("psnr needs mse >= 0, got {mse_255}")));
    }
    if mse_255 == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (MAX_I * MAX_I / mse_255).log10())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SsimWindow {
    /// Whole-image statistics, the primary mode.
    Global,
    /// 11x11 Gaussian (sigma 1.5) sliding window, averaged over valid
    /// positions.
    Gaussian11,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub window: SsimWindow,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig {
            c1: (0.01 * MAX_I) * (0.01 * MAX_I),
            c2: (0.03 * MAX_I) * (0.03 * MAX_I),
            c3: (0.03 * MAX_I) * (0.03 * MAX_I) / 2.0,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            window: SsimWindow::Global,
        }
    }
}

impl SsimConfig {
    pub fn gaussian_local() -> Self {
        SsimConfig {
            window: SsimWindow::Gaussian11,
            ..SsimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c2 > 0.0 && self.c3 > 0.0) {
            return Err(Error::Config("ssim stabilizers must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.gamma > 0.0) {
            return Err(Error::Config("ssim exponents must be positive".into()));
        }
        Ok(())
    }
}

// Y channel on the 0-255 scale.
fn luma_plane(img: &Image) -> Vec<f64> {
    img.pixels()
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) * MAX_I)
        .collect()
}

fn ssim_terms(
    mu_a: f64,
    mu_b: f64,
    var_a: f64,
    var_b: f64,
    cov: f64,
    cfg: &SsimConfig,
) -> f64 {
    let sigma_a = var_a.max(0.0).sqrt();
    let sigma_b = var_b.max(0.0).sqrt();
    let l = (2.0 * mu_a * mu_b + cfg.c1) / (mu_a * mu_a + mu_b * mu_b + cfg.c1);
    let c = (2.0 * sigma_a * sigma_b + cfg.c2) / (var_a + var_b + cfg.c2);
    let s = (cov + cfg.c3) / (sigma_a * sigma_b + cfg.c3);
    l.powf(cfg.alpha) * c.powf(cfg.beta) * s.powf(cfg.gamma)
}

/// Structural similarity of `a` against `b` per the configured window mode.
pub fn ssim(a: &Image, b: &Image, cfg: &SsimConfig) -> Result<f64> {
    check_dims(a, b, "ssim")?;
    cfg.validate()?;
    let ya = luma_plane(a);
    let yb = luma_plane(b);
    match cfg.window {
        SsimWindow::Global => {
            let n = ya.len() as f64;
            let mu_a = ya.iter().sum::<f64>() / n;
            let mu_b = yb.iter().sum::<f64>() / n;
            let mut var_a = 0.0;
            let mut var_b = 0.0;
            let mut cov = 0.0;
            for (&x, &y) in ya.iter().zip(&yb) {
                var_a += (x - mu_a) * (x - mu_a);
                var_b += (y - mu_b) * (y - mu_b);
                cov += (x - mu_a) * (y - mu_b);
            }
            var_a /= n;
            var_b /= n;
            cov /= n;
            Ok(ssim_terms(mu_a, mu_b, var_a, var_b, cov, cfg))
        }
        SsimWindow::Gaussian11 => {
            const K: usize = 11;
            let (w, h) = (a.width(), a.height());
            if w < K || h < K {
                return Err(Error::Domain(format!(
                    "image {w}x{h} too small for an 11x11 ssim window"
                )));
            }
            // normalized 2D Gaussian, sigma 1.5
            let sigma = 1.5;
            let g1: Vec<f64> = (0..K)
                .map(|i| {
                    let d = i as f64 - (K as f64 - 1.0) / 2.0;
                    (-d * d / (2.0 * sigma * sigma)).exp()
                })
                .collect();
            let mut weights = vec![0.0; K * K];
            let mut total = 0.0;
            for y in 0..K {
                for x in 0..K {
                    let v = g1[y] * g1[x];
                    weights[y * K + x] = v;
                    total += v;
                }
            }
            for v in &mut weights {
                *v /= total;
            }

            let mut acc = 0.0;
            let mut count = 0usize;
            for y0 in 0..=(h - K) {
                for x0 in 0..=(w - K) {
                    let mut mu_a = 0.0;
                    let mut mu_b = 0.0;
                    let mut aa = 0.0;
                    let mut bb = 0.0;
                    let mut ab = 0.0;
                    for ky in 0..K {
                        for kx in 0..K {
                            let wgt = weights[ky * K + kx];
                            let xa = ya[(y0 + ky) * w + (x0 + kx)];
                            let xb = yb[(y0 + ky) * w + (x0 + kx)];
                            mu_a += wgt * xa;
                            mu_b += wgt * xb;
                            aa += wgt * xa * xa;
                            bb += wgt * xb * xb;
                            ab += wgt * xa * xb;
                        }
                    }
                    let var_a = aa - mu_a * mu_a;
                    let var_b = bb - mu_b * mu_b;
                    let cov = ab - mu_a * mu_b;
                    acc += ssim_terms(mu_a, mu_b, var_a, var_b, cov, cfg);
                    count += 1;
                }
            }
            Ok(acc / count as f64)
        }
    }
}

/// Variance of the 4-neighbor Laplacian response over interior pixels of the
/// grayscale (channel mean, 0-255 scale) image; the focus/sharpness measure
/// used for corpus selection. Interior-only so linear ramps are annihilated
/// exactly.
pub fn lapv(img: &Image) -> Result<f64> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::Domain(format!(
            "lapv needs at least 3x3 pixels, got {w}x{h}"
        )));
    }
    let gray: Vec<f64> = img
        .pixels()
        .chunks_exact(3)
        .map(|p| (p[0] + p[1] + p[2]) / 3.0 * MAX_I)
        .collect();
    let mut responses = Vec::with_capacity((w - 2) * (h - 2));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let r = (gray[(y - 1) * w + x] + gray[(y + 1) * w + x])
                + (gray[y * w + x - 1] + gray[y * w + x + 1])
                - 4.0 * gray[y * w + x];
            responses.push(r);
        }
    }
    let n = responses.len() as f64;
    let mean = responses.iter().sum::<f64>() / n;
    Ok(responses.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n)
}

/// Compressed size over base-image pixels: `params * 32 / (W * H)`.
pub fn bits_per_pixel(param_count: usize, width: usize, height: usize) -> f64 {
    assert!(width * height > 0, "bits_per_pixel needs a non-empty image");
    param_count as f64 * 32.0 / (width * height) as f64
}

/// Buckets a bitrate to the nearest 2 bits; ties round away from zero.
pub fn bucket_bpp(bpp: f64) -> f64 {
    2.0 * (bpp / 2.0).round()
}

/// Per-model evaluation row; one line of the sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    /// Model identifier (file stem or generated job name).
    pub id: String,
    /// Source image name.
    pub image: String,
    /// Architecture tag (`mlp`, `sine_mlp`, `fourier_mlp`, `hash_mlp`).
    pub arch: String,
    pub width: usize,
    pub depth: usize,
    pub optimizer: String,
    pub learning_rate: f64,
    pub epochs: usize,
    pub params: usize,
    pub bpp: f64,
    pub bucket: f64,
    pub mae: f64,
    pub mse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
    /// Wall-clock training time; omitted from reports unless timing is
    /// explicitly requested, to keep sweep output byte-reproducible.
    pub train_seconds: Option<f64>,
}
