//! Frequency-domain least-squares solvers.
//!
//! Three layers: the closed-form multi-frame Wiener combination, the
//! half-quadratic-splitting x-update / IRLS gamma-update pair, and the outer
//! beta-schedule driver that alternates them to minimise
//! `lambda1 * sum_i ||y_i - k_i * x||^2 + sum_j ||grad_j x||_alpha^alpha`.

use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::convolve::{
    gradient, gradient_kernel, kernel_spectrum, periodic_convolve, GradientDirection,
    GRADIENT_DIRECTIONS,
};
use crate::error::{Error, Result};
use crate::fft::{dft2, idft2};
use crate::tensor::{BlurKernel, ImageTensor, SpectrumTensor};

/// Additive guard for every spectral denominator entry; the data and
/// splitting terms can both vanish at high frequencies when all kernel
/// spectra share a zero.
pub const DENOMINATOR_GUARD: f64 = 1e-12;

/// Magnitude below which a ridgeless Wiener denominator counts as singular.
pub const SINGULAR_SPECTRUM_TOL: f64 = 1e-12;

/// Parameters of the beta-continuation schedule and the penalised objective.
#[derive(Debug, Clone, PartialEq)]
pub struct HqsSchedule {
    /// Initial splitting weight.
    pub beta_init: f64,
    /// The loop stops once beta exceeds this.
    pub beta_max: f64,
    /// Multiplicative beta growth per stage (> 1).
    pub growth: f64,
    /// Inner alternations per beta stage.
    pub inner_iters: usize,
    /// Smoothing floor inside the IRLS weight.
    pub epsilon: f64,
    /// Gradient-prior exponent in (0, 2].
    pub alpha: f64,
    /// Weight of the data term.
    pub lambda1: f64,
}

impl HqsSchedule {
    /// Default schedule with the given data weight.
    pub fn with_lambda(lambda1: f64) -> Self {
        Self {
            beta_init: 1.0,
            beta_max: 1e20,
            growth: 2.0,
            inner_iters: 5,
            epsilon: 1e-9,
            alpha: 0.80,
            lambda1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.beta_init > 0.0
            && self.beta_max >= self.beta_init
            && self.growth > 1.0
            && self.inner_iters > 0
            && self.epsilon > 0.0
            && self.alpha > 0.0
            && self.alpha <= 2.0
            && self.lambda1 > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid solver schedule: {self:?}")))
        }
    }

    /// Number of beta stages the outer loop will execute.
    pub fn stage_count(&self) -> usize {
        let mut beta = self.beta_init;
        let mut count = 0;
        while beta <= self.beta_max {
            count += 1;
            beta *= self.growth;
        }
        count
    }
}

/// The pair of auxiliary gradient images introduced by the splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryPair {
    pub gamma_h: ImageTensor,
    pub gamma_v: ImageTensor,
}

impl AuxiliaryPair {
    pub fn zeros_like(x: &ImageTensor) -> Self {
        let (c, a, b) = x.shape();
        Self {
            gamma_h: ImageTensor::zeros(c, a, b),
            gamma_v: ImageTensor::zeros(c, a, b),
        }
    }

    fn get(&self, dir: GradientDirection) -> &ImageTensor {
        match dir {
            GradientDirection::Horizontal => &self.gamma_h,
            GradientDirection::Vertical => &self.gamma_v,
        }
    }
}

fn validate_problem(
    frames: &[ImageTensor],
    kernels: &[BlurKernel],
) -> Result<(usize, usize, usize)> {
    if frames.is_empty() {
        return Err(Error::Shape("at least one frame is required".into()));
    }
    if frames.len() != kernels.len() {
        return Err(Error::Shape(format!(
            "{} frames but {} kernels",
            frames.len(),
            kernels.len()
        )));
    }
    let shape = frames[0].shape();
    for (i, f) in frames.iter().enumerate() {
        if f.shape() != shape {
            return Err(Error::Shape(format!(
                "frame {i} has shape {:?}, expected {shape:?}",
                f.shape()
            )));
        }
    }
    Ok(shape)
}

/// Per-frame data-term spectra. Transforms run in parallel; the sums are
/// folded in frame order so results are reproducible bit-for-bit regardless
/// of worker scheduling.
fn accumulate_data_spectra(
    frames: &[ImageTensor],
    kernels: &[BlurKernel],
) -> Result<(Vec<Complex<f64>>, Vec<f64>)> {
    let (channels, height, width) = validate_problem(frames, kernels)?;
    let plane = height * width;

    let per_frame: Vec<Result<(SpectrumTensor, SpectrumTensor)>> = frames
        .par_iter()
        .zip(kernels.par_iter())
        .map(|(y, k)| Ok((kernel_spectrum(k, height, width)?, dft2(y))))
        .collect();

    let mut numerator = vec![Complex::new(0.0, 0.0); channels * plane];
    let mut denominator = vec![0.0f64; plane];
    for item in per_frame {
        let (kspec, yspec) = item?;
        for i in 0..plane {
            denominator[i] += kspec.data()[i].norm_sqr();
        }
        for c in 0..channels {
            for i in 0..plane {
                numerator[c * plane + i] += kspec.data()[i].conj() * yspec.data()[c * plane + i];
            }
        }
    }
    Ok((numerator, denominator))
}

/// Closed-form minimiser of `sum_i ||y_i - k_i * x||_F^2` in the frequency
/// domain, optionally stabilised with an additive ridge on the denominator.
///
/// With `ridge = 0` this is the exact normal-equation solution
/// `F^-1( sum_i conj(F(k_i)) F(y_i) / sum_i |F(k_i)|^2 )`; it fails with
/// [`Error::SingularSpectrum`] if the joint kernel spectrum has a zero.
pub fn multiframe_wiener(
    frames: &[ImageTensor],
    kernels: &[BlurKernel],
    ridge: f64,
) -> Result<ImageTensor> {
    let (channels, height, width) = validate_problem(frames, kernels)?;
    let (numerator, denominator) = accumulate_data_spectra(frames, kernels)?;
    let plane = height * width;

    if ridge == 0.0 {
        let min_mag = denominator.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_mag < SINGULAR_SPECTRUM_TOL {
            return Err(Error::SingularSpectrum(SINGULAR_SPECTRUM_TOL));
        }
    }

    let mut out = SpectrumTensor::zeros(channels, height, width);
    for c in 0..channels {
        for i in 0..plane {
            out.data_mut()[c * plane + i] = numerator[c * plane + i] / (denominator[i] + ridge);
        }
    }
    Ok(idft2(&out))
}

/// Precomputed spectra shared by every x-update of one solve: the data-term
/// accumulations (already scaled by `2 * lambda1`) and the gradient-filter
/// responses.
struct XUpdateContext {
    channels: usize,
    height: usize,
    width: usize,
    data_num: Vec<Complex<f64>>,
    data_den: Vec<f64>,
    grad_h: Vec<Complex<f64>>,
    grad_v: Vec<Complex<f64>>,
    grad_den: Vec<f64>,
}

impl XUpdateContext {
    fn build(frames: &[ImageTensor], kernels: &[BlurKernel], lambda1: f64) -> Result<Self> {
        let (channels, height, width) = validate_problem(frames, kernels)?;
        let (mut data_num, mut data_den) = accumulate_data_spectra(frames, kernels)?;
        for z in data_num.iter_mut() {
            *z *= 2.0 * lambda1;
        }
        for d in data_den.iter_mut() {
            *d *= 2.0 * lambda1;
        }
        let grad_h =
            kernel_spectrum(&gradient_kernel(GradientDirection::Horizontal), height, width)?;
        let grad_v =
            kernel_spectrum(&gradient_kernel(GradientDirection::Vertical), height, width)?;
        let grad_den: Vec<f64> = grad_h
            .data()
            .iter()
            .zip(grad_v.data().iter())
            .map(|(h, v)| h.norm_sqr() + v.norm_sqr())
            .collect();
        Ok(Self {
            channels,
            height,
            width,
            data_num,
            data_den,
            grad_h: grad_h.data().to_vec(),
            grad_v: grad_v.data().to_vec(),
            grad_den,
        })
    }

    fn x_update(&self, aux: &AuxiliaryPair, beta: f64) -> ImageTensor {
        let plane = self.height * self.width;
        let gh = dft2(aux.get(GradientDirection::Horizontal));
        let gv = dft2(aux.get(GradientDirection::Vertical));
        let mut out = SpectrumTensor::zeros(self.channels, self.height, self.width);
        for c in 0..self.channels {
            for i in 0..plane {
                let ci = c * plane + i;
                let split =
                    self.grad_h[i].conj() * gh.data()[ci] + self.grad_v[i].conj() * gv.data()[ci];
                let num = self.data_num[ci] + split * beta;
                let den = self.data_den[i] + beta * self.grad_den[i] + DENOMINATOR_GUARD;
                out.data_mut()[ci] = num / den;
            }
        }
        idft2(&out)
    }
}

/// One closed-form x-update of the splitting: combines the data term (weight
/// `2 * lambda1`) with the gradient-consistency term (weight `beta`) in the
/// frequency domain.
pub fn hqs_x_update(
    frames: &[ImageTensor],
    kernels: &[BlurKernel],
    aux: &AuxiliaryPair,
    sched: &HqsSchedule,
    beta: f64,
) -> Result<ImageTensor> {
    if beta <= 0.0 {
        return Err(Error::Config("beta must be positive".into()));
    }
    let ctx = XUpdateContext::build(frames, kernels, sched.lambda1)?;
    aux.gamma_h.ensure_same_shape(&frames[0], "gamma_h")?;
    aux.gamma_v.ensure_same_shape(&frames[0], "gamma_v")?;
    Ok(ctx.x_update(aux, beta))
}

/// One reweighted-least-squares step for the gradient auxiliary variable:
/// `gamma = beta * gx / (beta + alpha * (gamma_prev^2 + eps)^(alpha/2 - 1))`
/// elementwise, where `gx` is the current gradient image.
pub fn irls_gamma_update(
    gx: &ImageTensor,
    gamma_prev: &ImageTensor,
    beta: f64,
    sched: &HqsSchedule,
) -> ImageTensor {
    debug_assert!(beta > 0.0);
    let exponent = sched.alpha / 2.0 - 1.0;
    gx.zip_map(gamma_prev, |g, p| {
        let weight = sched.alpha * (p * p + sched.epsilon).powf(exponent);
        beta * g / (beta + weight)
    })
}

/// Penalised multi-frame deconvolution via beta continuation.
///
/// While `beta <= beta_max`, runs `inner_iters` alternations of the IRLS
/// gamma-update (both directions) and the closed-form x-update, then grows
/// beta. The auxiliaries warm-start across stages: re-zeroing them would put
/// the IRLS weight at its `eps^(alpha/2-1)` ceiling once per stage and shear
/// off high frequencies that the data term can no longer restore at large
/// beta. Deterministic given inputs.
pub fn solve_penalized_ls(
    frames: &[ImageTensor],
    kernels: &[BlurKernel],
    sched: &HqsSchedule,
    x0: &ImageTensor,
) -> Result<ImageTensor> {
    sched.validate()?;
    let ctx = XUpdateContext::build(frames, kernels, sched.lambda1)?;
    x0.ensure_same_shape(&frames[0], "initial image")?;

    let mut x = x0.clone();
    let mut aux = AuxiliaryPair::zeros_like(&x);
    let mut beta = sched.beta_init;
    while beta <= sched.beta_max {
        for _ in 0..sched.inner_iters {
            let gx_h = gradient(&x, GradientDirection::Horizontal);
            let gx_v = gradient(&x, GradientDirection::Vertical);
            aux.gamma_h = irls_gamma_update(&gx_h, &aux.gamma_h, beta, sched);
            aux.gamma_v = irls_gamma_update(&gx_v, &aux.gamma_v, beta, sched);
            x = ctx.x_update(&aux, beta);
        }
        if !x.is_finite() {
            return Err(Error::NonFinite {
                stage: "penalized least-squares iterate",
            });
        }
        beta *= sched.growth;
    }
    Ok(x)
}

/// Data misfit plus the literal L_alpha gradient prior; the quantity the
/// continuation drives down, used for run logs and regression checks.
pub fn penalized_objective(
    frames: &[ImageTensor],
    kernels: &[BlurKernel],
    x: &ImageTensor,
    sched: &HqsSchedule,
) -> Result<f64> {
    let mut data = 0.0;
    for (y, k) in frames.iter().zip(kernels.iter()) {
        let kx = periodic_convolve(k, x)?;
        data += y.zip_map(&kx, |a, b| a - b).norm_sq();
    }
    let mut prior = 0.0;
    for dir in GRADIENT_DIRECTIONS {
        prior += gradient(x, dir)
            .data()
            .iter()
            .map(|g| g.abs().powf(sched.alpha))
            .sum::<f64>();
    }
    Ok(sched.lambda1 * data + prior)
}

/// Splitting objective at fixed beta with the epsilon-smoothed prior
/// `(gamma^2 + eps)^(alpha/2)` — the surrogate the IRLS step actually
/// descends, so it is non-increasing over the inner alternations.
pub fn splitting_objective(
    frames: &[ImageTensor],
    kernels: &[BlurKernel],
    x: &ImageTensor,
    aux: &AuxiliaryPair,
    sched: &HqsSchedule,
    beta: f64,
) -> Result<f64> {
    let mut data = 0.0;
    for (y, k) in frames.iter().zip(kernels.iter()) {
        let kx = periodic_convolve(k, x)?;
        data += y.zip_map(&kx, |a, b| a - b).norm_sq();
    }
    let mut prior = 0.0;
    let mut consistency = 0.0;
    for dir in GRADIENT_DIRECTIONS {
        let gamma = aux.get(dir);
        prior += gamma
            .data()
            .iter()
            .map(|g| (g * g + sched.epsilon).powf(sched.alpha / 2.0))
            .sum::<f64>();
        let gx = gradient(x, dir);
        consistency += gamma.zip_map(&gx, |a, b| a - b).norm_sq();
    }
    Ok(sched.lambda1 * data + prior + beta / 2.0 * consistency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::*;

    fn mixed_kernel(size: usize, seed: u64) -> BlurKernel {
        // Half delta, half random mass: keeps the spectrum well away from zero.
        let random = deterministic_kernel(size, seed);
        let mut weights = random.data().to_vec();
        for w in weights.iter_mut() {
            *w *= 0.5;
        }
        weights[(size * size) / 2] += 0.5;
        BlurKernel::from_weights(size, weights).unwrap()
    }

    #[test]
    fn wiener_with_delta_kernel_is_identity() {
        let y = deterministic_tensor(2, 8, 8, 1);
        let out = multiframe_wiener(&[y.clone()], &[BlurKernel::delta(3).unwrap()], 0.0).unwrap();
        assert!(max_abs_diff(out.data(), y.data()) < 1e-12);
    }

    #[test]
    fn wiener_recovers_consistent_noiseless_frames() {
        let x = deterministic_tensor(1, 12, 10, 2);
        let kernels: Vec<BlurKernel> = (0..3).map(|i| mixed_kernel(3, 10 + i)).collect();
        let frames: Vec<ImageTensor> = kernels
            .iter()
            .map(|k| periodic_convolve(k, &x).unwrap())
            .collect();
        let out = multiframe_wiener(&frames, &kernels, 0.0).unwrap();
        assert!(max_abs_diff(out.data(), x.data()) < 1e-8);
    }

    #[test]
    fn wiener_zeroes_the_stationarity_residual() {
        // First-order conditions in the frequency domain, per real and
        // imaginary part, evaluated independently of the solver path.
        let n = 3;
        let kernels: Vec<BlurKernel> = (0..n).map(|i| deterministic_kernel(3, 20 + i)).collect();
        let frames: Vec<ImageTensor> = (0..n as u64)
            .map(|i| deterministic_tensor(1, 8, 8, 30 + i))
            .collect();
        let xhat = multiframe_wiener(&frames, &kernels, 0.0).unwrap();

        let xspec = dft2(&xhat);
        let mut den = vec![0.0; 64];
        let mut num = vec![Complex::new(0.0, 0.0); 64];
        for (k, y) in kernels.iter().zip(frames.iter()) {
            let ks = kernel_spectrum(k, 8, 8).unwrap();
            let ys = dft2(y);
            for i in 0..64 {
                den[i] += ks.data()[i].norm_sqr();
                num[i] += ks.data()[i].conj() * ys.data()[i];
            }
        }
        let scale = den.iter().cloned().fold(0.0, f64::max);
        for i in 0..64 {
            let grad_re = 2.0 * xspec.data()[i].re * den[i] - 2.0 * num[i].re;
            let grad_im = 2.0 * xspec.data()[i].im * den[i] - 2.0 * num[i].im;
            assert!(grad_re.abs() / scale < 1e-8, "residual {grad_re} at {i}");
            assert!(grad_im.abs() / scale < 1e-8, "residual {grad_im} at {i}");
        }

        // And the output ties or beats random perturbations.
        let objective = |x: &ImageTensor| -> f64 {
            kernels
                .iter()
                .zip(frames.iter())
                .map(|(k, y)| {
                    let kx = periodic_convolve(k, x).unwrap();
                    y.zip_map(&kx, |a, b| a - b).norm_sq()
                })
                .sum()
        };
        let base = objective(&xhat);
        let mut rng = seeded_rng(99);
        for _ in 0..50 {
            let noise = deterministic_tensor(1, 8, 8, rand::Rng::gen(&mut rng));
            let perturbed = xhat.zip_map(&noise, |x, e| x + 1e-3 * (e - 0.5));
            assert!(objective(&perturbed) >= base - 1e-12);
        }
    }

    #[test]
    fn wiener_detects_singular_spectrum() {
        // Entries 1/2 at offsets (0,-1) and (0,1) give the response
        // cos(2 pi h / b), which vanishes at h = 1 when b = 4.
        let mut weights = vec![0.0; 9];
        weights[3] = 0.5;
        weights[5] = 0.5;
        let k = BlurKernel::from_weights(3, weights).unwrap();
        let y = deterministic_tensor(1, 4, 4, 3);
        match multiframe_wiener(&[y.clone()], &[k.clone()], 0.0) {
            Err(Error::SingularSpectrum(_)) => {}
            other => panic!("expected singular spectrum, got {other:?}"),
        }
        // A ridge makes it well-posed.
        assert!(multiframe_wiener(&[y], &[k], 1e-3).is_ok());
    }

    #[test]
    fn x_update_reduces_to_wiener_as_beta_vanishes() {
        let kernels: Vec<BlurKernel> = (0..2).map(|i| mixed_kernel(3, 40 + i)).collect();
        let frames: Vec<ImageTensor> = (0..2u64)
            .map(|i| deterministic_tensor(1, 8, 6, 50 + i))
            .collect();
        let sched = HqsSchedule::with_lambda(1.0);
        let aux = AuxiliaryPair::zeros_like(&frames[0]);
        let hqs = hqs_x_update(&frames, &kernels, &aux, &sched, 1e-12).unwrap();
        let wiener = multiframe_wiener(&frames, &kernels, 0.0).unwrap();
        assert!(max_abs_diff(hqs.data(), wiener.data()) < 1e-6);
    }

    #[test]
    fn x_update_keeps_consistent_stationary_point() {
        let x0 = deterministic_tensor(2, 8, 8, 60);
        let kernels: Vec<BlurKernel> = (0..3).map(|i| mixed_kernel(3, 70 + i)).collect();
        let frames: Vec<ImageTensor> = kernels
            .iter()
            .map(|k| periodic_convolve(k, &x0).unwrap())
            .collect();
        let aux = AuxiliaryPair {
            gamma_h: gradient(&x0, GradientDirection::Horizontal),
            gamma_v: gradient(&x0, GradientDirection::Vertical),
        };
        let sched = HqsSchedule::with_lambda(667.0);
        let out = hqs_x_update(&frames, &kernels, &aux, &sched, 8.0).unwrap();
        assert!(max_abs_diff(out.data(), x0.data()) < 1e-8);
    }

    #[test]
    fn x_update_minimizes_the_quadratic() {
        let kernels: Vec<BlurKernel> = (0..2).map(|i| deterministic_kernel(3, 80 + i)).collect();
        let frames: Vec<ImageTensor> = (0..2u64)
            .map(|i| deterministic_tensor(1, 6, 6, 90 + i))
            .collect();
        let aux = AuxiliaryPair {
            gamma_h: deterministic_tensor(1, 6, 6, 92),
            gamma_v: deterministic_tensor(1, 6, 6, 93),
        };
        let sched = HqsSchedule::with_lambda(3.0);
        let beta = 0.7;
        let xhat = hqs_x_update(&frames, &kernels, &aux, &sched, beta).unwrap();

        let quad = |x: &ImageTensor| -> f64 {
            let mut data = 0.0;
            for (y, k) in frames.iter().zip(kernels.iter()) {
                let kx = periodic_convolve(k, x).unwrap();
                data += y.zip_map(&kx, |a, b| a - b).norm_sq();
            }
            let mut split = 0.0;
            split += aux
                .gamma_h
                .zip_map(&gradient(x, GradientDirection::Horizontal), |a, b| a - b)
                .norm_sq();
            split += aux
                .gamma_v
                .zip_map(&gradient(x, GradientDirection::Vertical), |a, b| a - b)
                .norm_sq();
            sched.lambda1 * data + beta / 2.0 * split
        };
        let base = quad(&xhat);
        let mut rng = seeded_rng(101);
        for _ in 0..20 {
            let noise = deterministic_tensor(1, 6, 6, rand::Rng::gen(&mut rng));
            let perturbed = xhat.zip_map(&noise, |x, e| x + 1e-3 * (e - 0.5));
            assert!(quad(&perturbed) >= base - 1e-12);
        }
    }

    #[test]
    fn gamma_update_of_zero_gradient_is_zero() {
        let gx = ImageTensor::zeros(1, 4, 4);
        let prev = deterministic_tensor(1, 4, 4, 1);
        let sched = HqsSchedule::with_lambda(1.0);
        let out = irls_gamma_update(&gx, &prev, 2.0, &sched);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gamma_update_matches_ridge_shrinkage_at_alpha_two() {
        let gx = deterministic_tensor(1, 4, 4, 2);
        let prev = deterministic_tensor(1, 4, 4, 3);
        let mut sched = HqsSchedule::with_lambda(1.0);
        sched.alpha = 2.0;
        sched.epsilon = 1e-300;
        let beta = 1.3;
        let out = irls_gamma_update(&gx, &prev, beta, &sched);
        let expected = gx.map(|g| beta * g / (beta + 2.0));
        assert!(max_abs_diff(out.data(), expected.data()) < 1e-12);
    }

    #[test]
    fn gamma_fixed_point_matches_grid_search() {
        // Scalar problem: minimise |g|^alpha + beta/2 (g - gx)^2.
        let (gx, beta, alpha) = (0.5, 1.0, 0.8);
        let mut sched = HqsSchedule::with_lambda(1.0);
        sched.alpha = alpha;
        let gx_t = ImageTensor::constant(1, 1, 1, gx);
        let mut gamma = ImageTensor::constant(1, 1, 1, 0.5);
        for _ in 0..500 {
            gamma = irls_gamma_update(&gx_t, &gamma, beta, &sched);
        }
        let fixed_point = gamma.get(0, 0, 0);

        let objective = |g: f64| -> f64 { g.abs().powf(alpha) + beta / 2.0 * (g - gx) * (g - gx) };
        let mut best = (f64::INFINITY, 0.0);
        let mut g = -1.0;
        while g <= 1.0 {
            let val = objective(g);
            if val < best.0 {
                best = (val, g);
            }
            g += 1e-5;
        }
        assert!(
            (fixed_point - best.1).abs() < 1e-3,
            "fixed point {fixed_point} vs grid argmin {}",
            best.1
        );
    }

    #[test]
    fn beta_schedule_runs_sixty_seven_stages() {
        let sched = HqsSchedule::with_lambda(1.0);
        assert_eq!(sched.stage_count(), 67);
    }

    #[test]
    fn continuation_recovers_consistent_frames() {
        let x = deterministic_tensor(1, 16, 16, 7);
        let kernels: Vec<BlurKernel> = (0..3).map(|i| mixed_kernel(3, 200 + i)).collect();
        let frames: Vec<ImageTensor> = kernels
            .iter()
            .map(|k| periodic_convolve(k, &x).unwrap())
            .collect();
        let sched = HqsSchedule::with_lambda(1e6);
        let out = solve_penalized_ls(&frames, &kernels, &sched, &frames[0]).unwrap();
        let mse = out.zip_map(&x, |a, b| a - b).norm_sq() / x.len() as f64;
        let psnr = 10.0 * (1.0 / mse).log10();
        assert!(psnr > 60.0, "psnr {psnr}");
    }

    #[test]
    fn denoising_lowers_the_penalized_objective() {
        let clean = deterministic_tensor(1, 16, 16, 8).map(|v| 0.2 + 0.6 * v);
        let k = mixed_kernel(3, 300);
        let blurred = periodic_convolve(&k, &clean).unwrap();
        let noise = deterministic_tensor(1, 16, 16, 9);
        let noisy = blurred.zip_map(&noise, |b, e| b + 0.05 * (2.0 * e - 1.0));
        let sched = HqsSchedule::with_lambda(2000.0);
        let frames = [noisy.clone()];
        let kernels = [k];
        let out = solve_penalized_ls(&frames, &kernels, &sched, &noisy).unwrap();
        let obj_out = penalized_objective(&frames, &kernels, &out, &sched).unwrap();
        let obj_in = penalized_objective(&frames, &kernels, &noisy, &sched).unwrap();
        assert!(obj_out <= obj_in, "objective rose: {obj_out} > {obj_in}");
    }

    #[test]
    fn inner_iterations_descend_the_splitting_objective() {
        let kernels: Vec<BlurKernel> = (0..2).map(|i| deterministic_kernel(3, 400 + i)).collect();
        let frames: Vec<ImageTensor> = (0..2u64)
            .map(|i| deterministic_tensor(1, 8, 8, 410 + i))
            .collect();
        let sched = HqsSchedule::with_lambda(5.0);
        for beta in [0.5, 4.0, 64.0] {
            let mut x = frames[0].clone();
            let mut aux = AuxiliaryPair::zeros_like(&x);
            let mut prev = f64::INFINITY;
            for _ in 0..sched.inner_iters {
                let gx_h = gradient(&x, GradientDirection::Horizontal);
                let gx_v = gradient(&x, GradientDirection::Vertical);
                aux.gamma_h = irls_gamma_update(&gx_h, &aux.gamma_h, beta, &sched);
                aux.gamma_v = irls_gamma_update(&gx_v, &aux.gamma_v, beta, &sched);
                x = hqs_x_update(&frames, &kernels, &aux, &sched, beta).unwrap();
                let obj = splitting_objective(&frames, &kernels, &x, &aux, &sched, beta).unwrap();
                assert!(
                    obj <= prev + 1e-9 * prev.abs().max(1.0),
                    "objective rose at beta {beta}: {obj} > {prev}"
                );
                prev = obj;
            }
        }
    }

    #[test]
    fn continuation_is_deterministic() {
        let kernels: Vec<BlurKernel> = (0..2).map(|i| deterministic_kernel(3, 500 + i)).collect();
        let frames: Vec<ImageTensor> = (0..2u64)
            .map(|i| deterministic_tensor(1, 8, 8, 510 + i))
            .collect();
        let sched = HqsSchedule::with_lambda(667.0);
        let a = solve_penalized_ls(&frames, &kernels, &sched, &frames[0]).unwrap();
        let b = solve_penalized_ls(&frames, &kernels, &sched, &frames[0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn both_deconvolution_forms_agree_on_nondegenerate_spectra() {
        // Single-ratio form vs weighted sum of per-frame deconvolutions,
        // compared entrywise in the frequency domain where every per-frame
        // spectrum is bounded away from zero.
        let n = 3;
        let kernels: Vec<BlurKernel> = (0..n).map(|i| mixed_kernel(3, 600 + i)).collect();
        let frames: Vec<ImageTensor> = (0..n as u64)
            .map(|i| deterministic_tensor(1, 8, 8, 610 + i))
            .collect();
        let kspecs: Vec<SpectrumTensor> = kernels
            .iter()
            .map(|k| kernel_spectrum(k, 8, 8).unwrap())
            .collect();
        let yspecs: Vec<SpectrumTensor> = frames.iter().map(dft2).collect();

        for i in 0..64 {
            if kspecs.iter().any(|ks| ks.data()[i].norm() <= 1e-6) {
                continue;
            }
            let den: f64 = kspecs.iter().map(|ks| ks.data()[i].norm_sqr()).sum();
            let num: Complex<f64> = kspecs
                .iter()
                .zip(yspecs.iter())
                .map(|(ks, ys)| ks.data()[i].conj() * ys.data()[i])
                .sum();
            let single_ratio = num / den;
            let weighted: Complex<f64> = kspecs
                .iter()
                .zip(yspecs.iter())
                .map(|(ks, ys)| {
                    let deconvolved = ys.data()[i] / ks.data()[i];
                    ks.data()[i].norm_sqr() / den * deconvolved
                })
                .sum();
            assert!(
                (single_ratio - weighted).norm() <= 1e-8 * single_ratio.norm().max(1.0),
                "forms disagree at bin {i}"
            );
        }
    }
}
