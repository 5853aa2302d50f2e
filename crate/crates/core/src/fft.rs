//! Channel-wise 2-D DFT and inverse.
//!
//! The forward transform is unnormalised,
//! `X(c,w,h) = sum_{u,v} x(c,u,v) exp[-2*pi*i (u*w/a + v*h/b)]`,
//! and the inverse carries the `1/(a*b)` factor, so `idft2(dft2(x)) == x`.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::tensor::{ImageTensor, SpectrumTensor};

/// Maximum imaginary magnitude tolerated when inverting a spectrum that is
/// supposed to come from a real signal.
pub const IMAG_RESIDUE_TOL: f64 = 1e-8;

/// Forward channel-wise 2-D DFT.
pub fn dft2(x: &ImageTensor) -> SpectrumTensor {
    let (channels, height, width) = x.shape();
    let mut out = SpectrumTensor::zeros(channels, height, width);
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(width);
    let col_fft = planner.plan_fft_forward(height);

    let plane = height * width;
    for c in 0..channels {
        let src = x.channel(c);
        let dst = &mut out.data_mut()[c * plane..(c + 1) * plane];
        for (d, &s) in dst.iter_mut().zip(src.iter()) {
            *d = Complex::new(s, 0.0);
        }
        transform_plane(dst, height, width, row_fft.as_ref(), col_fft.as_ref());
    }
    out
}

/// Forward transform of already-complex data, channel-wise.
pub fn dft2_complex(x: &SpectrumTensor) -> SpectrumTensor {
    let (channels, height, width) = x.shape();
    let mut out = x.clone();
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(width);
    let col_fft = planner.plan_fft_forward(height);
    let plane = height * width;
    for c in 0..channels {
        let dst = &mut out.data_mut()[c * plane..(c + 1) * plane];
        transform_plane(dst, height, width, row_fft.as_ref(), col_fft.as_ref());
    }
    out
}

/// Inverse channel-wise 2-D DFT, keeping the real part.
///
/// The imaginary residue is discarded; use [`idft2_strict`] when the input is
/// expected to be conjugate-symmetric and a large residue should be an error.
pub fn idft2(spectrum: &SpectrumTensor) -> ImageTensor {
    idft2_full(spectrum).0
}

/// Inverse transform that fails with [`Error::SymmetryViolation`] if the
/// imaginary residue exceeds [`IMAG_RESIDUE_TOL`].
pub fn idft2_strict(spectrum: &SpectrumTensor) -> Result<ImageTensor> {
    let (real, residue) = idft2_full(spectrum);
    if residue > IMAG_RESIDUE_TOL {
        return Err(Error::SymmetryViolation {
            residue,
            tolerance: IMAG_RESIDUE_TOL,
        });
    }
    Ok(real)
}

/// Inverse transform returning the real part together with the maximum
/// imaginary magnitude left over.
pub fn idft2_full(spectrum: &SpectrumTensor) -> (ImageTensor, f64) {
    let (channels, height, width) = spectrum.shape();
    let mut buf = spectrum.data().to_vec();
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_inverse(width);
    let col_fft = planner.plan_fft_inverse(height);

    let plane = height * width;
    let scale = 1.0 / (height * width) as f64;
    let mut out = ImageTensor::zeros(channels, height, width);
    let mut residue = 0.0f64;
    for c in 0..channels {
        let dst = &mut buf[c * plane..(c + 1) * plane];
        transform_plane(dst, height, width, row_fft.as_ref(), col_fft.as_ref());
        let real = &mut out.data_mut()[c * plane..(c + 1) * plane];
        for (r, z) in real.iter_mut().zip(dst.iter()) {
            *r = z.re * scale;
            residue = residue.max((z.im * scale).abs());
        }
    }
    (out, residue)
}

/// In-place 2-D transform of one row-major plane: rows first, then columns.
fn transform_plane(
    plane: &mut [Complex<f64>],
    height: usize,
    width: usize,
    row_fft: &dyn rustfft::Fft<f64>,
    col_fft: &dyn rustfft::Fft<f64>,
) {
    for row in plane.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    // Columns via transpose, transform, transpose back.
    let mut transposed = vec![Complex::new(0.0, 0.0); plane.len()];
    for r in 0..height {
        for c in 0..width {
            transposed[c * height + r] = plane[r * width + c];
        }
    }
    for col in transposed.chunks_exact_mut(height) {
        col_fft.process(col);
    }
    for r in 0..height {
        for c in 0..width {
            plane[r * width + c] = transposed[c * height + r];
        }
    }
}

#[cfg(test)]
pub(crate) mod naive {
    //! Literal double-sum evaluation of the transform definition, used as the
    //! independent oracle for the fast path.

    use super::*;

    pub fn dft2_naive(x: &ImageTensor) -> SpectrumTensor {
        let (channels, height, width) = x.shape();
        let mut out = SpectrumTensor::zeros(channels, height, width);
        let a = height as f64;
        let b = width as f64;
        for c in 0..channels {
            for w in 0..height {
                for h in 0..width {
                    let mut acc = Complex::new(0.0, 0.0);
                    for u in 0..height {
                        for v in 0..width {
                            let phase = -2.0
                                * std::f64::consts::PI
                                * ((u * w) as f64 / a + (v * h) as f64 / b);
                            acc += Complex::from_polar(x.get(c, u, v), phase);
                        }
                    }
                    out.set(c, w, h, acc);
                }
            }
        }
        out
    }

    pub fn idft2_naive(spectrum: &SpectrumTensor) -> ImageTensor {
        let (channels, height, width) = spectrum.shape();
        let mut out = ImageTensor::zeros(channels, height, width);
        let a = height as f64;
        let b = width as f64;
        let scale = 1.0 / (a * b);
        for c in 0..channels {
            for u in 0..height {
                for v in 0..width {
                    let mut acc = Complex::new(0.0, 0.0);
                    for w in 0..height {
                        for h in 0..width {
                            let phase = 2.0
                                * std::f64::consts::PI
                                * ((u * w) as f64 / a + (v * h) as f64 / b);
                            acc += spectrum.get(c, w, h) * Complex::from_polar(1.0, phase);
                        }
                    }
                    out.set(c, u, v, acc.re * scale);
                }
            }
        }
        out
    }
}
