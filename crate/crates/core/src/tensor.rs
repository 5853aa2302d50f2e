use rustfft::num_complex::Complex;

use crate::error::{Error, Result};

/// Real-valued multi-channel image, stored channel-major with row-major
/// planes. Pixel images live in `[0, 1]` by convention; gradient images and
/// noisy frames are unrestricted.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Shape("all tensor dimensions must be >= 1".into()));
        }
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "data length {} does not match {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn constant(channels: usize, height: usize, width: usize, value: f64) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    /// Build from a per-entry function of `(channel, row, col)`.
    pub fn from_fn<F: FnMut(usize, usize, usize) -> f64>(
        channels: usize,
        height: usize,
        width: usize,
        mut f: F,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for row in 0..height {
                for col in 0..width {
                    data.push(f(c, row, col));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, c: usize, row: usize, col: usize) -> f64 {
        self.data[(c * self.height + row) * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, c: usize, row: usize, col: usize, value: f64) {
        self.data[(c * self.height + row) * self.width + col] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// One channel plane as a contiguous row-major slice.
    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn same_shape(&self, other: &ImageTensor) -> bool {
        self.shape() == other.shape()
    }

    pub fn ensure_same_shape(&self, other: &ImageTensor, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Squared Frobenius norm over all channels and pixels.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> ImageTensor {
        ImageTensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &ImageTensor, f: F) -> ImageTensor {
        debug_assert!(self.same_shape(other));
        ImageTensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&x, &y)| f(x, y))
                .collect(),
        }
    }

    /// Column-stacked vectorisation: channel-major, then column-major within
    /// each channel plane.
    pub fn vectorize(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for c in 0..self.channels {
            for col in 0..self.width {
                for row in 0..self.height {
                    out.push(self.get(c, row, col));
                }
            }
        }
        out
    }

    /// Inverse of [`vectorize`]: rebuild a tensor of the given shape.
    pub fn devectorize(
        v: &[f64],
        channels: usize,
        height: usize,
        width: usize,
    ) -> Result<ImageTensor> {
        if v.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "vector length {} does not match {}x{}x{}",
                v.len(),
                channels,
                height,
                width
            )));
        }
        let mut out = ImageTensor::zeros(channels, height, width);
        let mut i = 0;
        for c in 0..channels {
            for col in 0..width {
                for row in 0..height {
                    out.set(c, row, col, v[i]);
                    i += 1;
                }
            }
        }
        Ok(out)
    }
}

/// Square odd-sized kernel on the probability simplex: entries are
/// non-negative and sum to one, so convolution preserves overall brightness.
/// Indexed by centred offsets `(u, v)` in `[-radius, radius]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel {
    size: usize,
    data: Vec<f64>,
}

pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

impl BlurKernel {
    pub fn new(size: usize, data: Vec<f64>) -> Result<Self> {
        check_kernel_shape(size, data.len())?;
        if data.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Shape(
                "blur kernel entries must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = data.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::Shape(format!(
                "blur kernel entries must sum to 1 (got {sum:.15})"
            )));
        }
        Ok(Self { size, data })
    }

    /// Normalise arbitrary non-negative weights onto the simplex.
    pub fn from_weights(size: usize, weights: Vec<f64>) -> Result<Self> {
        check_kernel_shape(size, weights.len())?;
        if weights.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Shape(
                "kernel weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Shape("kernel weights sum to zero".into()));
        }
        let data = weights.into_iter().map(|v| v / sum).collect();
        Ok(Self { size, data })
    }

    /// Identity element of the convolution: all mass at the centre.
    pub fn delta(size: usize) -> Result<Self> {
        check_kernel_shape(size, size * size)?;
        let mut data = vec![0.0; size * size];
        data[(size * size) / 2] = 1.0;
        Ok(Self { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Half-width `s'` with `s = 2s' + 1`.
    pub fn radius(&self) -> usize {
        self.size / 2
    }

    /// Entry at centred offset `(u, v)`, both in `[-radius, radius]`.
    #[inline]
    pub fn get(&self, u: isize, v: isize) -> f64 {
        let r = self.radius() as isize;
        debug_assert!(u.abs() <= r && v.abs() <= r);
        self.data[((u + r) * self.size as isize + (v + r)) as usize]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// Unconstrained precursor of a [`BlurKernel`]: same geometry, entries of
/// any sign. Produced by the lasso step before simplex projection.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedKernel {
    size: usize,
    data: Vec<f64>,
}

impl GeneralizedKernel {
    pub fn new(size: usize, data: Vec<f64>) -> Result<Self> {
        check_kernel_shape(size, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                stage: "generalized kernel construction",
            });
        }
        Ok(Self { size, data })
    }

    pub fn zeros(size: usize) -> Result<Self> {
        check_kernel_shape(size, size * size)?;
        Ok(Self {
            size,
            data: vec![0.0; size * size],
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    #[inline]
    pub fn get(&self, u: isize, v: isize) -> f64 {
        let r = self.radius() as isize;
        debug_assert!(u.abs() <= r && v.abs() <= r);
        self.data[((u + r) * self.size as isize + (v + r)) as usize]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

impl From<BlurKernel> for GeneralizedKernel {
    fn from(k: BlurKernel) -> Self {
        GeneralizedKernel {
            size: k.size,
            data: k.data,
        }
    }
}

fn check_kernel_shape(size: usize, len: usize) -> Result<()> {
    if size == 0 || size % 2 == 0 {
        return Err(Error::Shape(format!("kernel size must be odd (got {size})")));
    }
    if len != size * size {
        return Err(Error::Shape(format!(
            "kernel data length {len} does not match {size}x{size}"
        )));
    }
    Ok(())
}

/// Complex frequency-domain image with the same `(channel, row, col)` layout
/// as [`ImageTensor`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<Complex<f64>>,
}

impl SpectrumTensor {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<Complex<f64>>,
    ) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "spectrum length {} does not match {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![Complex::new(0.0, 0.0); channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    pub fn get(&self, c: usize, row: usize, col: usize) -> Complex<f64> {
        self.data[(c * self.height + row) * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, c: usize, row: usize, col: usize, value: Complex<f64>) {
        self.data[(c * self.height + row) * self.width + col] = value;
    }

    pub fn data(&self) -> &[Complex<f64>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<f64>] {
        &mut self.data
    }

    /// Sum of squared magnitudes over all entries.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}
