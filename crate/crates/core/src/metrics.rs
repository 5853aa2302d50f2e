//! Image quality metrics on [0, 1]-ranged tensors: PSNR and windowed SSIM.

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

/// SSIM window: 11 x 11 Gaussian, sigma 1.5, on a unit dynamic range with
/// the canonical stabilisers.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_L: f64 = 1.0;

/// PSNR and SSIM of a target against a reference.
#[derive(Debug, Clone)]
pub struct QualityReport {
    pub target: String,
    pub reference: String,
    /// Decibels; `f64::INFINITY` when the images are identical.
    pub psnr_db: f64,
    pub ssim: f64,
}

/// Peak signal-to-noise ratio in dB with unit peak: `10 log10(1 / MSE)`,
/// the MSE averaged over all channels and pixels. Identical images yield the
/// infinity sentinel.
pub fn psnr(target: &ImageTensor, reference: &ImageTensor) -> Result<f64> {
    target.ensure_same_shape(reference, "psnr images")?;
    let mse = target.zip_map(reference, |a, b| a - b).norm_sq() / target.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Mean local structural similarity over all fully interior 11 x 11 windows,
/// computed per channel and averaged across channels. Symmetric in its
/// arguments; exactly 1 for identical images.
pub fn ssim(target: &ImageTensor, reference: &ImageTensor) -> Result<f64> {
    target.ensure_same_shape(reference, "ssim images")?;
    let (channels, height, width) = target.shape();
    if height < SSIM_WINDOW || width < SSIM_WINDOW {
        return Err(Error::Shape(format!(
            "ssim needs images at least {SSIM_WINDOW}x{SSIM_WINDOW} (got {height}x{width})"
        )));
    }

    let window = gaussian_window();
    let c1 = (SSIM_K1 * SSIM_L) * (SSIM_K1 * SSIM_L);
    let c2 = (SSIM_K2 * SSIM_L) * (SSIM_K2 * SSIM_L);

    let mut total = 0.0;
    for c in 0..channels {
        let x = target.channel(c);
        let y = reference.channel(c);
        let xy: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| a * b).collect();
        let xx: Vec<f64> = x.iter().map(|a| a * a).collect();
        let yy: Vec<f64> = y.iter().map(|b| b * b).collect();

        let m1 = filter_valid(x, height, width, &window);
        let m2 = filter_valid(y, height, width, &window);
        let m11 = filter_valid(&xx, height, width, &window);
        let m22 = filter_valid(&yy, height, width, &window);
        let m12 = filter_valid(&xy, height, width, &window);

        let mut acc = 0.0;
        for i in 0..m1.len() {
            let var1 = m11[i] - m1[i] * m1[i];
            let var2 = m22[i] - m2[i] * m2[i];
            let cov = m12[i] - m1[i] * m2[i];
            let num = (2.0 * m1[i] * m2[i] + c1) * (2.0 * cov + c2);
            let den = (m1[i] * m1[i] + m2[i] * m2[i] + c1) * (var1 + var2 + c2);
            acc += num / den;
        }
        total += acc / m1.len() as f64;
    }
    Ok(total / channels as f64)
}

pub fn quality(
    target: &ImageTensor,
    reference: &ImageTensor,
    target_id: &str,
    reference_id: &str,
) -> Result<QualityReport> {
    Ok(QualityReport {
        target: target_id.to_string(),
        reference: reference_id.to_string(),
        psnr_db: psnr(target, reference)?,
        ssim: ssim(target, reference)?,
    })
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let centre = (SSIM_WINDOW / 2) as f64;
    let inv = 1.0 / (2.0 * SSIM_SIGMA * SSIM_SIGMA);
    let mut sum = 0.0;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - centre;
        *v = (-d * d * inv).exp();
        sum += *v;
    }
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Separable valid-mode filtering of one row-major plane: rows first, then
/// columns; output is (height - W + 1) x (width - W + 1).
fn filter_valid(plane: &[f64], height: usize, width: usize, window: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let out_w = width - SSIM_WINDOW + 1;
    let out_h = height - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; height * out_w];
    for r in 0..height {
        for c in 0..out_w {
            let mut acc = 0.0;
            for (t, w) in window.iter().enumerate() {
                acc += w * plane[r * width + c + t];
            }
            rows[r * out_w + c] = acc;
        }
    }
    let mut out = vec![0.0; out_h * out_w];
    for r in 0..out_h {
        for c in 0..out_w {
            let mut acc = 0.0;
            for (t, w) in window.iter().enumerate() {
                acc += w * rows[(r + t) * out_w + c];
            }
            out[r * out_w + c] = acc;
        }
    }
    out
}

/// Format a value with six significant digits, plain decimal notation, for
/// the metrics tables.
pub fn format_sig6(value: f64) -> String {
    if !value.is_finite() {
        return if value.is_nan() {
            "nan".to_string()
        } else if value > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    if value == 0.0 {
        return "0.00000".to_string();
    }
    let exponent = value.abs().log10().floor() as i32;
    let decimals = (5 - exponent).max(0) as usize;
    format!("{value:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::*;

    #[test]
    fn identical_images_hit_the_sentinels() {
        let x = deterministic_tensor(3, 16, 16, 1);
        assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
        assert_eq!(ssim(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn uniform_error_gives_twenty_db() {
        let x = ImageTensor::constant(1, 12, 12, 0.4);
        let y = ImageTensor::constant(1, 12, 12, 0.5);
        assert_close(psnr(&x, &y).unwrap(), 20.0, 1e-12);
        // Shift symmetry: only |c| matters.
        let z = ImageTensor::constant(1, 12, 12, 0.3);
        assert_close(psnr(&z, &y).unwrap(), psnr(&y, &z).unwrap(), 1e-12);
    }

    #[test]
    fn psnr_matches_two_pass_oracle() {
        let x = deterministic_tensor(2, 9, 7, 2);
        let y = deterministic_tensor(2, 9, 7, 3);
        let mut acc = 0.0;
        for (a, b) in x.data().iter().zip(y.data().iter()) {
            acc += (a - b) * (a - b);
        }
        let mse = acc / x.len() as f64;
        assert_close(psnr(&x, &y).unwrap(), 10.0 * (1.0 / mse).log10(), 1e-12);
    }

    #[test]
    fn negated_structure_scores_negative() {
        let x = ImageTensor::from_fn(1, 16, 16, |_, r, c| ((r + c) % 2) as f64);
        let neg = x.map(|v| 1.0 - v);
        let score = ssim(&x, &neg).unwrap();
        assert!(score < 0.0, "got {score}");
        assert!(score < ssim(&x, &x).unwrap());
    }

    #[test]
    fn constant_images_reduce_to_the_luminance_term() {
        let x = ImageTensor::constant(1, 11, 11, 0.5);
        let y = ImageTensor::constant(1, 11, 11, 0.6);
        let c1 = 1e-4;
        let expected = (2.0 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1);
        assert_close(ssim(&x, &y).unwrap(), expected, 1e-12);
    }

    #[test]
    fn ssim_is_symmetric() {
        let x = deterministic_tensor(3, 14, 13, 4);
        let y = deterministic_tensor(3, 14, 13, 5);
        assert_close(ssim(&x, &y).unwrap(), ssim(&y, &x).unwrap(), 1e-12);
    }

    #[test]
    fn small_images_are_rejected() {
        let x = deterministic_tensor(1, 10, 16, 6);
        assert!(matches!(ssim(&x, &x), Err(Error::Shape(_))));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let x = deterministic_tensor(1, 12, 12, 7);
        let y = deterministic_tensor(1, 12, 13, 8);
        assert!(psnr(&x, &y).is_err());
        assert!(ssim(&x, &y).is_err());
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig6(26.018345), "26.0183");
        assert_eq!(format_sig6(0.78691234), "0.786912");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(-3.14159265), "-3.14159");
        assert_eq!(format_sig6(f64::INFINITY), "inf");
        assert_eq!(format_sig6(0.0), "0.00000");
    }
}
