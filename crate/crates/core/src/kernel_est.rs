//! Per-frame blur-kernel estimation: a gradient-domain lasso over the
//! kernel support, followed by Euclidean projection onto the probability
//! simplex.
//!
//! The least-squares part of `||grad y - q * grad x||_F^2` reduces, over the
//! s^2 support positions of the padded kernel, to a quadratic form with a
//! Gram matrix built from the power spectrum of the sharp image. The matrix
//! depends only on offset differences, so it comes from one autocorrelation
//! table instead of the literal quadruple sum.

use nalgebra::DMatrix;

use crate::convolve::{gradient, GRADIENT_DIRECTIONS};
use crate::error::{Error, Result};
use crate::fft::{dft2, dft2_complex};
use crate::tensor::{BlurKernel, GeneralizedKernel, ImageTensor, SpectrumTensor};

/// Relative ridge added to the Gram diagonal before factoring; the quadratic
/// form is only strictly positive when the image spectrum has no zeros.
pub const GRAM_RIDGE_REL: f64 = 1e-10;

/// Convergence thresholds for the lasso solve. The gap stop alone would
/// accept low objective suboptimality with the coefficients still far from
/// stationary on near-consistent systems, so it is gated on the KKT
/// certificate.
pub const LASSO_COORD_TOL: f64 = 1e-10;
pub const LASSO_GAP_TOL: f64 = 1e-9;
pub const LASSO_KKT_TOL: f64 = 1e-7;
pub const LASSO_MAX_SWEEPS: usize = 100_000;

/// Reduced normal-equation operator for one kernel-estimation problem:
/// the s^2 x s^2 Gram matrix `A`, its upper-triangular Cholesky factor `B`
/// (of the ridged matrix), and optionally the right-hand side `z'`.
#[derive(Debug, Clone)]
pub struct GramOperator {
    support: usize,
    matrix: DMatrix<f64>,
    ridge: f64,
    chol_upper: DMatrix<f64>,
    rhs: Vec<f64>,
    z_norm_sq: f64,
}

impl GramOperator {
    /// Factor an s^2 x s^2 Gram matrix, adding the relative ridge first.
    pub fn from_matrix(matrix: DMatrix<f64>, support: usize) -> Result<Self> {
        let dim = support * support;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Shape(format!(
                "gram matrix is {}x{}, expected {dim}x{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        // All diagonal entries equal the squared image norm; scale the ridge
        // off the first one.
        let ridge = GRAM_RIDGE_REL * matrix[(0, 0)];
        let mut ridged = matrix.clone();
        for j in 0..dim {
            ridged[(j, j)] += ridge;
        }
        let chol = nalgebra::Cholesky::new(ridged).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            support,
            matrix,
            ridge,
            chol_upper: chol.l().transpose(),
            rhs: Vec::new(),
            z_norm_sq: 0.0,
        })
    }

    /// Attach the right-hand side `z'` and precompute `||z||^2` with
    /// `z = B^-T z'` for the duality gap.
    pub fn with_rhs(mut self, rhs: Vec<f64>) -> Result<Self> {
        if rhs.len() != self.dim() {
            return Err(Error::Shape(format!(
                "rhs length {} does not match support dimension {}",
                rhs.len(),
                self.dim()
            )));
        }
        let z = self
            .chol_upper
            .transpose()
            .solve_lower_triangular(&nalgebra::DVector::from_column_slice(&rhs))
            .ok_or(Error::NotPositiveDefinite)?;
        self.z_norm_sq = z.norm_squared();
        self.rhs = rhs;
        Ok(self)
    }

    pub fn support(&self) -> usize {
        self.support
    }

    /// Number of reduced unknowns, `s^2`.
    pub fn dim(&self) -> usize {
        self.support * self.support
    }

    /// The raw Gram matrix (without the stabilising ridge).
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Upper-triangular factor `B` with `B^T B = A + ridge I`.
    pub fn cholesky_upper(&self) -> &DMatrix<f64> {
        &self.chol_upper
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Ridged Gram entry.
    #[inline]
    fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)] + if i == j { self.ridge } else { 0.0 }
    }

    /// `(A + ridge I) q` for a candidate coefficient vector.
    fn apply(&self, q: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let mut out = vec![0.0; dim];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &qj) in q.iter().enumerate() {
                acc += self.entry(i, j) * qj;
            }
            *o = acc;
        }
        out
    }

    /// Value of the lasso objective `||z - B q||^2 + mu ||q||_1` up to the
    /// constant `||z||^2` shared by all candidates... including it, in fact,
    /// so objectives are comparable across candidates.
    pub fn lasso_objective(&self, q: &[f64], mu: f64) -> f64 {
        let aq = self.apply(q);
        let quad: f64 = q.iter().zip(aq.iter()).map(|(x, y)| x * y).sum();
        let lin: f64 = q.iter().zip(self.rhs.iter()).map(|(x, y)| x * y).sum();
        let l1: f64 = q.iter().map(|x| x.abs()).sum();
        self.z_norm_sq - 2.0 * lin + quad + mu * l1
    }

    /// Maximum violation of the stationarity conditions: the smooth-part
    /// gradient must sit within [-mu, mu] at zeros and equal -mu sign(q)
    /// at non-zeros.
    pub fn kkt_residual(&self, q: &[f64], mu: f64) -> f64 {
        let aq = self.apply(q);
        let mut worst = 0.0f64;
        for j in 0..self.dim() {
            let two_g = 2.0 * (self.rhs[j] - aq[j]);
            let viol = if q[j] == 0.0 {
                (two_g.abs() - mu).max(0.0)
            } else {
                (two_g - mu * q[j].signum()).abs()
            };
            worst = worst.max(viol);
        }
        worst
    }
}

/// Periodic autocorrelation table of the summed power spectrum:
/// `r(du, dv) = (1/ab) Re F(P)(du, dv)` with `P = sum_c |F(x)|^2`.
fn autocorrelation_table(xspec: &SpectrumTensor) -> ImageTensor {
    let (channels, height, width) = xspec.shape();
    let plane = height * width;
    let power = ImageTensor::from_fn(1, height, width, |_, w, h| {
        (0..channels)
            .map(|c| xspec.data()[c * plane + w * width + h].norm_sqr())
            .sum()
    });
    let transformed = dft2(&power);
    let scale = 1.0 / (height * width) as f64;
    // Real image with symmetric power spectrum: the transform is real.
    ImageTensor::from_fn(1, height, width, |_, w, h| transformed.get(0, w, h).re * scale)
}

fn support_offsets(support: usize) -> Vec<(isize, isize)> {
    let r = (support / 2) as isize;
    let mut offsets = Vec::with_capacity(support * support);
    for u in -r..=r {
        for v in -r..=r {
            offsets.push((u, v));
        }
    }
    offsets
}

fn check_support(support: usize, height: usize, width: usize) -> Result<()> {
    if support == 0 || support % 2 == 0 {
        return Err(Error::Shape(format!(
            "kernel support must be odd (got {support})"
        )));
    }
    if support > height.min(width) {
        return Err(Error::Shape(format!(
            "kernel support {support} exceeds min image dimension {}",
            height.min(width)
        )));
    }
    Ok(())
}

/// Gram matrix restricted to the kernel support, from the image spectrum.
fn gram_matrix_from_spectrum(xspec: &SpectrumTensor, support: usize) -> DMatrix<f64> {
    let (_, height, width) = xspec.shape();
    let table = autocorrelation_table(xspec);
    let offsets = support_offsets(support);
    let dim = offsets.len();
    DMatrix::from_fn(dim, dim, |g, m| {
        let du = (offsets[g].0 - offsets[m].0).rem_euclid(height as isize) as usize;
        let dv = (offsets[g].1 - offsets[m].1).rem_euclid(width as isize) as usize;
        table.get(0, du, dv)
    })
}

/// Right-hand side restricted to the kernel support, from the cross spectrum
/// `Q = sum_c conj(F(y)) F(x)`.
fn rhs_from_spectra(
    xspec: &SpectrumTensor,
    yspec: &SpectrumTensor,
    support: usize,
) -> Vec<f64> {
    let (channels, height, width) = xspec.shape();
    let plane = height * width;
    let mut cross = SpectrumTensor::zeros(1, height, width);
    for c in 0..channels {
        for i in 0..plane {
            let q = yspec.data()[c * plane + i].conj() * xspec.data()[c * plane + i];
            cross.data_mut()[i] += q;
        }
    }
    let transformed = dft2_complex(&cross);
    let scale = 1.0 / (height * width) as f64;
    support_offsets(support)
        .iter()
        .map(|&(u, v)| {
            let row = u.rem_euclid(height as isize) as usize;
            let col = v.rem_euclid(width as isize) as usize;
            transformed.get(0, row, col).re * scale
        })
        .collect()
}

/// Build the factored Gram operator of a sharp image for the given support.
///
/// Fails with [`Error::NotPositiveDefinite`] when the image is degenerate
/// (for example constant, so its spectrum vanishes off DC).
pub fn build_gram(x_hat: &ImageTensor, support: usize) -> Result<GramOperator> {
    let (_, height, width) = x_hat.shape();
    check_support(support, height, width)?;
    let xspec = dft2(x_hat);
    GramOperator::from_matrix(gram_matrix_from_spectrum(&xspec, support), support)
}

/// Right-hand side of the normal equations for observed image `y` against
/// sharp image `x_hat`, restricted to the support of `gram`.
pub fn build_rhs(x_hat: &ImageTensor, y: &ImageTensor, gram: &GramOperator) -> Result<Vec<f64>> {
    x_hat.ensure_same_shape(y, "rhs images")?;
    Ok(rhs_from_spectra(&dft2(x_hat), &dft2(y), gram.support()))
}

fn soft_threshold(value: f64, threshold: f64) -> f64 {
    if value > threshold {
        value - threshold
    } else if value < -threshold {
        value + threshold
    } else {
        0.0
    }
}

/// Cyclic coordinate descent for
/// `min_q ||z - B q||_2^2 + mu ||q||_1`
/// over the reduced support variables. Convergence is certified by the
/// duality gap (or a vanishing sweep update), never by sweep count.
pub fn solve_lasso(gram: &GramOperator, mu: f64) -> Result<GeneralizedKernel> {
    if mu < 0.0 {
        return Err(Error::Config("mu must be non-negative".into()));
    }
    if gram.rhs.len() != gram.dim() {
        return Err(Error::Config("gram operator has no right-hand side".into()));
    }
    let dim = gram.dim();
    let mut q = vec![0.0f64; dim];
    let mut aq = vec![0.0f64; dim];
    let diag: Vec<f64> = (0..dim).map(|j| gram.entry(j, j)).collect();

    for _sweep in 0..LASSO_MAX_SWEEPS {
        let mut max_delta = 0.0f64;
        for j in 0..dim {
            let cj = gram.rhs[j] - (aq[j] - diag[j] * q[j]);
            let new_q = soft_threshold(cj, mu / 2.0) / diag[j];
            let delta = new_q - q[j];
            if delta != 0.0 {
                for (m, a) in aq.iter_mut().enumerate() {
                    *a += gram.entry(m, j) * delta;
                }
                q[j] = new_q;
            }
            max_delta = max_delta.max(delta.abs());
        }
        let stalled = max_delta < LASSO_COORD_TOL;
        if stalled
            || (duality_gap(gram, &q, &aq, mu) < LASSO_GAP_TOL
                && kkt_from_products(gram, &q, &aq, mu) < 0.5 * LASSO_KKT_TOL)
        {
            return GeneralizedKernel::new(gram.support, q);
        }
    }
    Err(Error::NoConvergence {
        sweeps: LASSO_MAX_SWEEPS,
    })
}

/// Stationarity violation computed from the incrementally tracked `A q`.
fn kkt_from_products(gram: &GramOperator, q: &[f64], aq: &[f64], mu: f64) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..q.len() {
        let two_g = 2.0 * (gram.rhs[j] - aq[j]);
        let viol = if q[j] == 0.0 {
            (two_g.abs() - mu).max(0.0)
        } else {
            (two_g - mu * q[j].signum()).abs()
        };
        worst = worst.max(viol);
    }
    worst
}

/// Primal-dual gap at `q` with the residual-scaled dual point.
fn duality_gap(gram: &GramOperator, q: &[f64], aq: &[f64], mu: f64) -> f64 {
    let quad: f64 = q.iter().zip(aq.iter()).map(|(x, y)| x * y).sum();
    let lin: f64 = q.iter().zip(gram.rhs.iter()).map(|(x, y)| x * y).sum();
    let l1: f64 = q.iter().map(|x| x.abs()).sum();
    let res_norm_sq = (gram.z_norm_sq - 2.0 * lin + quad).max(0.0);
    let primal = res_norm_sq + mu * l1;

    // Scale theta = 2 r into the dual-feasible set ||B^T theta||_inf <= mu.
    let grad_inf = gram
        .rhs
        .iter()
        .zip(aq.iter())
        .map(|(z, a)| 2.0 * (z - a).abs())
        .fold(0.0f64, f64::max);
    let scale = if grad_inf > mu && grad_inf > 0.0 {
        mu / grad_inf
    } else {
        1.0
    };
    let r_dot_z = gram.z_norm_sq - lin;
    let dual = 2.0 * scale * r_dot_z - scale * scale * res_norm_sq;
    primal - dual
}

/// Euclidean projection of a vector onto the probability simplex
/// (non-negative entries summing to one).
pub fn project_to_simplex(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        }
    }
    values.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Projection of a generalized kernel onto the simplex of blur kernels: the
/// unique nearest kernel in Frobenius norm.
pub fn project_simplex(q: &GeneralizedKernel) -> BlurKernel {
    let projected = project_to_simplex(q.data());
    // The exact projection sums to one; normalising only absorbs the last
    // ulps of rounding from the threshold subtraction.
    BlurKernel::from_weights(q.size(), projected).expect("projection lands on the simplex")
}

/// Estimate one frame's blur kernel from the current sharp image.
///
/// Builds the normal equations in the gradient domain (summing the two
/// direction contributions into one s^2 system), solves the lasso with
/// weight `mu`, and projects the result onto the simplex.
pub fn estimate_kernel(
    y: &ImageTensor,
    x_hat: &ImageTensor,
    mu: f64,
    support: usize,
) -> Result<BlurKernel> {
    y.ensure_same_shape(x_hat, "kernel estimation images")?;
    let (_, height, width) = x_hat.shape();
    check_support(support, height, width)?;

    let dim = support * support;
    let mut matrix = DMatrix::zeros(dim, dim);
    let mut rhs = vec![0.0; dim];
    for dir in GRADIENT_DIRECTIONS {
        let gx = dft2(&gradient(x_hat, dir));
        let gy = dft2(&gradient(y, dir));
        matrix += gram_matrix_from_spectrum(&gx, support);
        for (acc, term) in rhs.iter_mut().zip(rhs_from_spectra(&gx, &gy, support)) {
            *acc += term;
        }
    }
    let gram = GramOperator::from_matrix(matrix, support)?.with_rhs(rhs)?;
    let q = solve_lasso(&gram, mu)?;
    Ok(project_simplex(&q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolve::periodic_convolve;
    use crate::test_util::*;
    use rand::Rng;

    /// Literal quadruple-sum Gram entry, straight from the definition.
    fn literal_gram(x_hat: &ImageTensor, support: usize) -> DMatrix<f64> {
        let (channels, height, width) = x_hat.shape();
        let xspec = dft2(x_hat);
        let offsets = support_offsets(support);
        let (a, b) = (height as f64, width as f64);
        let dim = offsets.len();
        DMatrix::from_fn(dim, dim, |g, m| {
            let (u, v) = offsets[g];
            let (th, eta) = offsets[m];
            let mut acc = 0.0;
            for c in 0..channels {
                for w in 0..height {
                    for h in 0..width {
                        let phase = 2.0 * std::f64::consts::PI
                            * ((u - th) as f64 * w as f64 / a + (v - eta) as f64 * h as f64 / b);
                        acc += xspec.get(c, w, h).norm_sqr() * phase.cos();
                    }
                }
            }
            acc / (a * b)
        })
    }

    /// Literal right-hand side from the definition.
    fn literal_rhs(x_hat: &ImageTensor, y: &ImageTensor, support: usize) -> Vec<f64> {
        let (channels, height, width) = x_hat.shape();
        let xspec = dft2(x_hat);
        let yspec = dft2(y);
        let (a, b) = (height as f64, width as f64);
        support_offsets(support)
            .iter()
            .map(|&(u, v)| {
                let mut acc = 0.0;
                for c in 0..channels {
                    for w in 0..height {
                        for h in 0..width {
                            let cross = yspec.get(c, w, h).conj() * xspec.get(c, w, h);
                            let phase = 2.0 * std::f64::consts::PI
                                * (u as f64 * w as f64 / a + v as f64 * h as f64 / b);
                            acc += cross.re * phase.cos() + cross.im * phase.sin();
                        }
                    }
                }
                acc / (a * b)
            })
            .collect()
    }

    #[test]
    fn gram_fast_path_matches_literal_sum() {
        for (c, a, b, s, seed) in [(1, 4, 4, 3, 1u64), (2, 8, 8, 3, 2), (3, 6, 6, 5, 3), (1, 8, 4, 1, 4)]
        {
            let x = deterministic_tensor(c, a, b, seed);
            let fast = build_gram(&x, s).unwrap();
            let literal = literal_gram(&x, s);
            let diff = (fast.matrix() - &literal).abs().max();
            assert!(diff < 1e-9, "gram mismatch {diff} for {c}x{a}x{b} s={s}");
        }
    }

    #[test]
    fn gram_of_unit_impulse_matches_literal() {
        let mut x = ImageTensor::zeros(1, 4, 4);
        x.set(0, 0, 0, 1.0);
        let fast = build_gram(&x, 3).unwrap();
        let literal = literal_gram(&x, 3);
        assert!((fast.matrix() - &literal).abs().max() < 1e-12);
        // Flat unit power spectrum: the autocorrelation is a delta, so the
        // reduced Gram is the identity.
        for g in 0..9 {
            for m in 0..9 {
                let expected = if g == m { 1.0 } else { 0.0 };
                assert_close(fast.matrix()[(g, m)], expected, 1e-12);
            }
        }
    }

    #[test]
    fn gram_diagonal_is_the_squared_image_norm() {
        let x = deterministic_tensor(2, 6, 5, 9);
        let gram = build_gram(&x, 3).unwrap();
        for j in 0..gram.dim() {
            assert_rel_close(gram.matrix()[(j, j)], x.norm_sq(), 1e-10);
        }
    }

    #[test]
    fn gram_quadratic_form_is_positive() {
        let x = deterministic_tensor(3, 6, 6, 10);
        let gram = build_gram(&x, 3).unwrap();
        let mut rng = seeded_rng(11);
        for _ in 0..100 {
            let r: Vec<f64> = (0..gram.dim()).map(|_| rng.gen::<f64>() - 0.5).collect();
            let quad: f64 = gram
                .matrix()
                .row_iter()
                .enumerate()
                .map(|(i, row)| r[i] * row.iter().zip(r.iter()).map(|(m, x)| m * x).sum::<f64>())
                .sum();
            assert!(quad > 0.0, "quadratic form not positive: {quad}");
        }
    }

    #[test]
    fn constant_image_gradients_are_not_positive_definite() {
        let x = ImageTensor::constant(1, 8, 8, 0.5);
        match estimate_kernel(&x, &x, 0.01, 3) {
            Err(Error::NotPositiveDefinite) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn rhs_fast_path_matches_literal_sum() {
        let x = deterministic_tensor(2, 6, 4, 12);
        let y = deterministic_tensor(2, 6, 4, 13);
        let gram = build_gram(&x, 3).unwrap();
        let fast = build_rhs(&x, &y, &gram).unwrap();
        let literal = literal_rhs(&x, &y, 3);
        assert!(max_abs_diff(&fast, &literal) < 1e-9);
    }

    #[test]
    fn scalar_identity_kernel_is_recovered() {
        // y == x_hat with a 1x1 support: the unpenalised solution is q = 1.
        let x = deterministic_tensor(1, 5, 5, 14);
        let gram = build_gram(&x, 1).unwrap();
        let rhs = build_rhs(&x, &x, &gram).unwrap();
        let gram = gram.with_rhs(rhs).unwrap();
        let q = solve_lasso(&gram, 0.0).unwrap();
        assert_close(q.data()[0], 1.0, 1e-8);
    }

    #[test]
    fn normal_equations_recover_a_known_kernel() {
        let x = deterministic_tensor(1, 10, 9, 15);
        let k = deterministic_kernel(3, 16);
        let y = periodic_convolve(&k, &x).unwrap();
        let gram = build_gram(&x, 3).unwrap();
        let rhs = build_rhs(&x, &y, &gram).unwrap();
        let gram = gram.with_rhs(rhs).unwrap();
        let q = solve_lasso(&gram, 0.0).unwrap();
        assert!(max_abs_diff(q.data(), k.data()) < 1e-8);
    }

    #[test]
    fn full_shrinkage_above_the_threshold() {
        let x = deterministic_tensor(1, 6, 6, 17);
        let y = deterministic_tensor(1, 6, 6, 18);
        let gram = build_gram(&x, 3).unwrap();
        let rhs = build_rhs(&x, &y, &gram).unwrap();
        let mu = 2.0 * rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gram = gram.with_rhs(rhs).unwrap();
        let q = solve_lasso(&gram, mu).unwrap();
        assert!(q.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unpenalized_lasso_matches_direct_solve() {
        let x = deterministic_tensor(1, 8, 8, 19);
        let y = deterministic_tensor(1, 8, 8, 20);
        let gram = build_gram(&x, 3).unwrap();
        let rhs = build_rhs(&x, &y, &gram).unwrap();
        let gram = gram.with_rhs(rhs.clone()).unwrap();
        let q = solve_lasso(&gram, 0.0).unwrap();

        let mut ridged = gram.matrix().clone();
        for j in 0..gram.dim() {
            ridged[(j, j)] += gram.ridge();
        }
        let direct = nalgebra::Cholesky::new(ridged)
            .unwrap()
            .solve(&nalgebra::DVector::from_column_slice(&rhs));
        assert!(max_abs_diff(q.data(), direct.as_slice()) < 1e-8);
    }

    #[test]
    fn lasso_beats_random_candidates_and_satisfies_kkt() {
        let x = deterministic_tensor(1, 8, 8, 21);
        let k = deterministic_kernel(3, 22);
        let noise = deterministic_tensor(1, 8, 8, 23);
        let y = periodic_convolve(&k, &x)
            .unwrap()
            .zip_map(&noise, |a, e| a + 0.05 * (e - 0.5));
        let gram = build_gram(&x, 3).unwrap();
        let rhs = build_rhs(&x, &y, &gram).unwrap();
        let gram = gram.with_rhs(rhs).unwrap();
        let mu = 0.05;
        let q = solve_lasso(&gram, mu).unwrap();
        assert!(gram.kkt_residual(q.data(), mu) < 1e-7);

        let best = gram.lasso_objective(q.data(), mu);
        let mut rng = seeded_rng(24);
        for _ in 0..1000 {
            let candidate: Vec<f64> = (0..gram.dim())
                .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * 0.5)
                .collect();
            let scaled = project_to_simplex(&candidate);
            assert!(gram.lasso_objective(&scaled, mu) >= best - 1e-12);
            assert!(gram.lasso_objective(&candidate, mu) >= best - 1e-12);
        }
    }

    #[test]
    fn projection_is_identity_on_the_simplex() {
        let k = deterministic_kernel(3, 25);
        let q: GeneralizedKernel = k.clone().into();
        let back = project_simplex(&q);
        assert!(max_abs_diff(back.data(), k.data()) < 1e-12);
    }

    #[test]
    fn projection_snaps_to_a_vertex() {
        let mut data = vec![0.0; 9];
        data[0] = 2.0;
        let q = GeneralizedKernel::new(3, data).unwrap();
        let k = project_simplex(&q);
        assert_close(k.data()[0], 1.0, 1e-15);
        assert!(k.data()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn projection_matches_grid_search_on_four_entries() {
        let mut rng = seeded_rng(26);
        let q: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * 2.0 - 0.5).collect();
        let projected = project_to_simplex(&q);

        // Two-stage dense search over the 3-simplex: coarse 1e-2 grid, then
        // a 1e-3 refinement around the coarse argmin.
        let objective = |v: &[f64; 4]| -> f64 {
            v.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
        };
        let search = |lo: [f64; 3], hi: [f64; 3], step: f64| -> ([f64; 4], f64) {
            let mut best = ([0.0; 4], f64::INFINITY);
            let mut v0 = lo[0];
            while v0 <= hi[0] + 1e-12 {
                let mut v1 = lo[1];
                while v1 <= hi[1] + 1e-12 && v0 + v1 <= 1.0 + 1e-12 {
                    let mut v2 = lo[2];
                    while v2 <= hi[2] + 1e-12 && v0 + v1 + v2 <= 1.0 + 1e-12 {
                        let v3 = 1.0 - v0 - v1 - v2;
                        if v3 >= -1e-12 {
                            let cand = [v0, v1, v2, v3.max(0.0)];
                            let val = objective(&cand);
                            if val < best.1 {
                                best = (cand, val);
                            }
                        }
                        v2 += step;
                    }
                    v1 += step;
                }
                v0 += step;
            }
            best
        };
        let (coarse, _) = search([0.0; 3], [1.0; 3], 1e-2);
        let lo = [
            (coarse[0] - 0.015).max(0.0),
            (coarse[1] - 0.015).max(0.0),
            (coarse[2] - 0.015).max(0.0),
        ];
        let hi = [
            (coarse[0] + 0.015).min(1.0),
            (coarse[1] + 0.015).min(1.0),
            (coarse[2] + 0.015).min(1.0),
        ];
        let (fine, _) = search(lo, hi, 1e-3);

        let dist: f64 = projected
            .iter()
            .zip(fine.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(dist < 2e-3, "projection {projected:?} vs grid {fine:?}");
    }

    #[test]
    fn projection_is_permutation_equivariant_and_nonexpansive() {
        let mut rng = seeded_rng(27);
        for _ in 0..20 {
            let q1: Vec<f64> = (0..9).map(|_| rng.gen::<f64>() * 3.0 - 1.0).collect();
            let q2: Vec<f64> = (0..9).map(|_| rng.gen::<f64>() * 3.0 - 1.0).collect();
            let p1 = project_to_simplex(&q1);
            let p2 = project_to_simplex(&q2);

            // Joint permutation (rotation by 4) commutes with the projection.
            let rotate = |v: &[f64]| -> Vec<f64> {
                (0..v.len()).map(|i| v[(i + 4) % v.len()]).collect()
            };
            let rotated = project_to_simplex(&rotate(&q1));
            assert!(max_abs_diff(&rotated, &rotate(&p1)) < 1e-12);

            // 1-Lipschitz in Euclidean norm.
            let dist = |a: &[f64], b: &[f64]| -> f64 {
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            };
            assert!(dist(&p1, &p2) <= dist(&q1, &q2) + 1e-12);
        }
    }

    #[test]
    fn estimate_kernel_recovers_noiseless_blur() {
        let x = deterministic_tensor(1, 16, 16, 28).map(|v| 0.1 + 0.8 * v);
        let k = deterministic_kernel(3, 29);
        let y = periodic_convolve(&k, &x).unwrap();
        let estimated = estimate_kernel(&y, &x, 1e-10, 3).unwrap();
        assert!(max_abs_diff(estimated.data(), k.data()) < 1e-6);
    }
}
