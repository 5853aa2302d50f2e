//! Periodic (wrap-around) convolution, kernel padding and finite-difference
//! gradients. Everything here uses circular boundary handling so the spatial
//! and frequency-domain paths describe the exact same operator.

use crate::error::{Error, Result};
use crate::fft::{dft2, idft2};
use crate::tensor::{BlurKernel, GeneralizedKernel, ImageTensor, SpectrumTensor};

/// Anything indexable as a centred odd square kernel.
pub trait KernelSource {
    fn size(&self) -> usize;
    /// Entry at centred offset `(u, v)`, each in `[-size/2, size/2]`.
    fn entry(&self, u: isize, v: isize) -> f64;

    fn radius(&self) -> usize {
        self.size() / 2
    }
}

impl KernelSource for BlurKernel {
    fn size(&self) -> usize {
        self.size()
    }
    fn entry(&self, u: isize, v: isize) -> f64 {
        self.get(u, v)
    }
}

impl KernelSource for GeneralizedKernel {
    fn size(&self) -> usize {
        self.size()
    }
    fn entry(&self, u: isize, v: isize) -> f64 {
        self.get(u, v)
    }
}

impl<K: KernelSource + ?Sized> KernelSource for &K {
    fn size(&self) -> usize {
        (**self).size()
    }
    fn entry(&self, u: isize, v: isize) -> f64 {
        (**self).entry(u, v)
    }
}

fn check_fits<K: KernelSource>(k: &K, height: usize, width: usize) -> Result<()> {
    if k.size() > height.min(width) {
        return Err(Error::Shape(format!(
            "kernel size {} exceeds min image dimension {}",
            k.size(),
            height.min(width)
        )));
    }
    Ok(())
}

/// Embed a centred kernel into a `channels x height x width` tensor with
/// wrap-around placement: offset `(u, v)` lands at `(u mod a, v mod b)`,
/// identically in every channel. Per-channel sums equal the kernel sum.
pub fn pad_kernel<K: KernelSource>(
    k: &K,
    channels: usize,
    height: usize,
    width: usize,
) -> Result<ImageTensor> {
    check_fits(k, height, width)?;
    let r = k.radius() as isize;
    let mut out = ImageTensor::zeros(channels, height, width);
    for u in -r..=r {
        for v in -r..=r {
            let row = u.rem_euclid(height as isize) as usize;
            let col = v.rem_euclid(width as isize) as usize;
            let val = k.entry(u, v);
            for c in 0..channels {
                out.set(c, row, col, val);
            }
        }
    }
    Ok(out)
}

/// Frequency response of a kernel on a single `height x width` plane.
pub fn kernel_spectrum<K: KernelSource>(
    k: &K,
    height: usize,
    width: usize,
) -> Result<SpectrumTensor> {
    Ok(dft2(&pad_kernel(k, 1, height, width)?))
}

/// Periodic convolution `(k * x)(c,w,h) = sum_{u,v} k(u,v) x(c, w-u mod a, h-v mod b)`.
///
/// Small kernels run the exact spatial sum; larger ones go through the
/// frequency domain (the two paths agree to ~1e-12 relative).
pub fn periodic_convolve<K: KernelSource>(k: &K, x: &ImageTensor) -> Result<ImageTensor> {
    if k.size() <= SPATIAL_KERNEL_LIMIT {
        periodic_convolve_spatial(k, x)
    } else {
        periodic_convolve_fft(k, x)
    }
}

/// Kernels up to this size use the direct spatial sum.
pub const SPATIAL_KERNEL_LIMIT: usize = 7;

/// Direct spatial evaluation of the periodic convolution.
pub fn periodic_convolve_spatial<K: KernelSource>(k: &K, x: &ImageTensor) -> Result<ImageTensor> {
    let (channels, height, width) = x.shape();
    check_fits(k, height, width)?;
    let r = k.radius() as isize;
    let a = height as isize;
    let b = width as isize;

    // Wrap tables keep the inner loop free of rem_euclid.
    let offsets: Vec<isize> = (-r..=r).collect();
    let row_wrap: Vec<Vec<usize>> = offsets
        .iter()
        .map(|&u| (0..a).map(|w| (w - u).rem_euclid(a) as usize).collect())
        .collect();
    let col_wrap: Vec<Vec<usize>> = offsets
        .iter()
        .map(|&v| (0..b).map(|h| (h - v).rem_euclid(b) as usize).collect())
        .collect();

    let mut out = ImageTensor::zeros(channels, height, width);
    for c in 0..channels {
        for w in 0..height {
            for h in 0..width {
                let mut acc = 0.0;
                for (ui, &u) in offsets.iter().enumerate() {
                    let src_row = row_wrap[ui][w];
                    for (vi, &v) in offsets.iter().enumerate() {
                        acc += k.entry(u, v) * x.get(c, src_row, col_wrap[vi][h]);
                    }
                }
                out.set(c, w, h, acc);
            }
        }
    }
    Ok(out)
}

/// Frequency-domain evaluation: inverse transform of the padded-kernel
/// spectrum times the image spectrum.
pub fn periodic_convolve_fft<K: KernelSource>(k: &K, x: &ImageTensor) -> Result<ImageTensor> {
    let (channels, height, width) = x.shape();
    check_fits(k, height, width)?;
    let kspec = kernel_spectrum(k, height, width)?;
    let xspec = dft2(x);
    let mut prod = SpectrumTensor::zeros(channels, height, width);
    let plane = height * width;
    for c in 0..channels {
        for i in 0..plane {
            let z = xspec.data()[c * plane + i] * kspec.data()[i];
            prod.data_mut()[c * plane + i] = z;
        }
    }
    Ok(idft2(&prod))
}

/// Finite-difference direction for [`gradient`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientDirection {
    /// Differences along columns: `x(c,w,h) - x(c,w,(h-1) mod b)`.
    Horizontal,
    /// Differences along rows: `x(c,w,h) - x(c,(w-1) mod a,h)`.
    Vertical,
}

pub const GRADIENT_DIRECTIONS: [GradientDirection; 2] =
    [GradientDirection::Horizontal, GradientDirection::Vertical];

/// The difference filter embedded in a 3x3 grid, so the one convolution and
/// padding path serves blur kernels and gradient operators alike.
pub fn gradient_kernel(direction: GradientDirection) -> GeneralizedKernel {
    let mut data = vec![0.0; 9];
    data[4] = 1.0; // centre (0,0)
    match direction {
        GradientDirection::Horizontal => data[5] = -1.0, // offset (0,1)
        GradientDirection::Vertical => data[7] = -1.0,   // offset (1,0)
    }
    GeneralizedKernel::new(3, data).expect("static 3x3 kernel")
}

/// Circular finite difference of `x`, per channel.
///
/// Exactly equals `periodic_convolve(gradient_kernel(direction), x)`; the
/// direct subtraction below is just the fast path for the two-tap filter.
pub fn gradient(x: &ImageTensor, direction: GradientDirection) -> ImageTensor {
    let (channels, height, width) = x.shape();
    let mut out = ImageTensor::zeros(channels, height, width);
    match direction {
        GradientDirection::Horizontal => {
            for c in 0..channels {
                for w in 0..height {
                    for h in 0..width {
                        let prev = if h == 0 { width - 1 } else { h - 1 };
                        out.set(c, w, h, x.get(c, w, h) - x.get(c, w, prev));
                    }
                }
            }
        }
        GradientDirection::Vertical => {
            for c in 0..channels {
                for w in 0..height {
                    let prev = if w == 0 { height - 1 } else { w - 1 };
                    for h in 0..width {
                        out.set(c, w, h, x.get(c, w, h) - x.get(c, prev, h));
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::*;

    /// Quadruple-loop oracle, written independently of the production path.
    fn convolve_oracle<K: KernelSource>(k: &K, x: &ImageTensor) -> ImageTensor {
        let (channels, height, width) = x.shape();
        let r = k.radius() as isize;
        let a = height as isize;
        let b = width as isize;
        ImageTensor::from_fn(channels, height, width, |c, w, h| {
            let mut acc = 0.0;
            for u in -r..=r {
                for v in -r..=r {
                    let row = (w as isize - u).rem_euclid(a) as usize;
                    let col = (h as isize - v).rem_euclid(b) as usize;
                    acc += k.entry(u, v) * x.get(c, row, col);
                }
            }
            acc
        })
    }

    #[test]
    fn identity_kernel_pads_to_origin() {
        let k = BlurKernel::delta(1).unwrap();
        let padded = pad_kernel(&k, 3, 4, 5).unwrap();
        for c in 0..3 {
            assert_eq!(padded.get(c, 0, 0), 1.0);
        }
        assert_close(padded.sum(), 3.0, 0.0);
    }

    #[test]
    fn pad_wraps_corners() {
        // 3x3 kernel on a 1x4x4 target: offset (-1,-1) lands at (3,3),
        // offset (1,1) stays at (1,1).
        let data: Vec<f64> = (1..=9).map(f64::from).collect();
        let k = GeneralizedKernel::new(3, data).unwrap();
        let padded = pad_kernel(&k, 1, 4, 4).unwrap();
        assert_eq!(padded.get(0, 3, 3), k.get(-1, -1));
        assert_eq!(padded.get(0, 1, 1), k.get(1, 1));
        assert_eq!(padded.get(0, 0, 0), k.get(0, 0));
        assert_eq!(padded.get(0, 3, 1), k.get(-1, 1));
        assert_eq!(padded.get(0, 2, 2), 0.0);
        assert_close(padded.sum(), k.data().iter().sum(), 1e-12);
    }

    #[test]
    fn pad_rejects_oversized_kernel() {
        let k = BlurKernel::delta(5).unwrap();
        assert!(matches!(pad_kernel(&k, 1, 4, 8), Err(Error::Shape(_))));
    }

    #[test]
    fn delta_kernel_is_identity() {
        let x = deterministic_tensor(2, 6, 5, 11);
        for s in [1usize, 3, 5] {
            let k = BlurKernel::delta(s).unwrap();
            let y = periodic_convolve(&k, &x).unwrap();
            assert_eq!(y, x);
        }
    }

    #[test]
    fn uniform_kernel_preserves_constant_image() {
        let kappa = 0.62;
        let x = ImageTensor::constant(1, 5, 5, kappa);
        let k = BlurKernel::from_weights(3, vec![1.0; 9]).unwrap();
        let y = periodic_convolve(&k, &x).unwrap();
        for &v in y.data() {
            assert_close(v, kappa, 1e-12);
        }
    }

    #[test]
    fn spatial_path_matches_direct_sum_exactly() {
        let x = deterministic_tensor(1, 8, 8, 5);
        let k = deterministic_generalized(5, 6);
        let fast = periodic_convolve_spatial(&k, &x).unwrap();
        let slow = convolve_oracle(&k, &x);
        assert_eq!(fast, slow);
    }

    #[test]
    fn fft_path_matches_spatial_path() {
        for (s, a, b, seed) in [(1, 4, 4, 1), (3, 7, 5, 2), (5, 8, 11, 3), (7, 9, 16, 4)] {
            let x = deterministic_tensor(2, a, b, seed);
            let k = deterministic_kernel(s, seed + 100);
            let spatial = periodic_convolve_spatial(&k, &x).unwrap();
            let fft = periodic_convolve_fft(&k, &x).unwrap();
            let scale = spatial.norm_sq().sqrt().max(1.0);
            assert!(max_abs_diff(spatial.data(), fft.data()) / scale < 1e-9);
        }
    }

    #[test]
    fn convolution_is_linear() {
        let x = deterministic_tensor(1, 6, 6, 21);
        let y = deterministic_tensor(1, 6, 6, 22);
        let k = deterministic_kernel(3, 23);
        let (alpha, beta) = (1.7, -0.4);
        let combo = x.zip_map(&y, |a, b| alpha * a + beta * b);
        let lhs = periodic_convolve(&k, &combo).unwrap();
        let kx = periodic_convolve(&k, &x).unwrap();
        let ky = periodic_convolve(&k, &y).unwrap();
        let rhs = kx.zip_map(&ky, |a, b| alpha * a + beta * b);
        assert!(max_abs_diff(lhs.data(), rhs.data()) < 1e-10);
    }

    #[test]
    fn simplex_kernel_preserves_brightness() {
        let x = deterministic_tensor(3, 9, 7, 31);
        let k = deterministic_kernel(5, 32);
        let y = periodic_convolve(&k, &x).unwrap();
        assert_rel_close(y.sum(), x.sum(), 1e-9);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let x = ImageTensor::constant(2, 4, 4, 0.8);
        for dir in GRADIENT_DIRECTIONS {
            assert!(gradient(&x, dir).data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn horizontal_gradient_is_circular_difference() {
        let x = ImageTensor::new(1, 1, 4, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let g = gradient(&x, GradientDirection::Horizontal);
        assert_eq!(g.data(), &[-3.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn gradient_matches_embedded_kernel_convolution() {
        let x = deterministic_tensor(2, 5, 6, 41);
        for dir in GRADIENT_DIRECTIONS {
            let direct = gradient(&x, dir);
            let via_conv = periodic_convolve_spatial(&gradient_kernel(dir), &x).unwrap();
            assert_eq!(direct, via_conv);
        }
    }

    #[test]
    fn parseval_holds_for_gradient_images() {
        let x = deterministic_tensor(2, 6, 9, 51);
        let g = gradient(&x, GradientDirection::Horizontal);
        let spatial = g.norm_sq();
        let spectral = crate::fft::dft2(&g).norm_sq() / (6.0 * 9.0);
        assert_rel_close(spectral, spatial, 1e-9);
    }
}
