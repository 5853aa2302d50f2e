//! Manifold-based denoising of a sample cloud: estimate a contraction
//! direction for each point from a radial neighbour average, then replace the
//! point by a cylindrically weighted average that moves it towards the
//! latent manifold the samples scatter around.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

/// Displacements shorter than this make the contraction direction
/// meaningless.
pub const DEGENERATE_DIRECTION_TOL: f64 = 1e-12;

/// An ordered cloud of equal-dimension sample vectors, with optional tensor
/// shape metadata for devectorising.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Vec<Vec<f64>>,
    shape: Option<(usize, usize, usize)>,
}

impl SampleSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Shape(format!(
                "a sample set needs at least 2 points (got {})",
                points.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::Shape("sample vectors must share one non-zero dimension".into()));
        }
        Ok(Self {
            points,
            shape: None,
        })
    }

    /// Vectorise a stack of equally shaped tensors.
    pub fn from_tensors(tensors: &[ImageTensor]) -> Result<Self> {
        if tensors.len() < 2 {
            return Err(Error::Shape(format!(
                "a sample set needs at least 2 points (got {})",
                tensors.len()
            )));
        }
        let shape = tensors[0].shape();
        for t in tensors {
            t.ensure_same_shape(&tensors[0], "sample tensors")?;
        }
        Ok(Self {
            points: tensors.iter().map(|t| t.vectorize()).collect(),
            shape: Some(shape),
        })
    }

    /// Rebuild tensors from the vectors; requires shape metadata.
    pub fn to_tensors(&self) -> Result<Vec<ImageTensor>> {
        let (c, a, b) = self.shape.ok_or_else(|| {
            Error::Shape("sample set carries no tensor shape metadata".into())
        })?;
        self.points
            .iter()
            .map(|p| ImageTensor::devectorize(p, c, a, b))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn shape(&self) -> Option<(usize, usize, usize)> {
        self.shape
    }

    fn with_points(&self, points: Vec<Vec<f64>>) -> Self {
        Self {
            points,
            shape: self.shape,
        }
    }
}

/// Radii and falloff exponent of the two weighting stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldParams {
    /// Neighbourhood radius (both for the direction estimate and the normal
    /// component of the cylinder).
    pub r1: f64,
    /// Cylinder length along the contraction direction; much larger than r1.
    pub r2: f64,
    /// Falloff exponent (>= 2).
    pub k_exp: u32,
    /// Neighbour count below which a point is flagged as under-sampled.
    pub min_neighbors: usize,
}

impl ManifoldParams {
    pub fn new(r1: f64, r2: f64, k_exp: u32, min_neighbors: usize) -> Result<Self> {
        if !(r1 > 0.0) || !(r2 > 0.0) {
            return Err(Error::Config("radii must be positive".into()));
        }
        if r2 < 2.0 * r1 {
            return Err(Error::Config(format!(
                "r2 must dominate r1 (need r2 >= 2*r1, got r1={r1}, r2={r2})"
            )));
        }
        if k_exp < 2 {
            return Err(Error::Config("k_exp must be >= 2".into()));
        }
        Ok(Self {
            r1,
            r2,
            k_exp,
            min_neighbors,
        })
    }

    /// Conventional cylinder length of ten neighbourhood radii.
    pub fn with_default_r2(r1: f64, k_exp: u32, min_neighbors: usize) -> Result<Self> {
        Self::new(r1, 10.0 * r1, k_exp, min_neighbors)
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b.iter()).map(|(x, y)| x - y).collect()
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Radial weight `(1 - d^2/r1^2)^k` inside the ball, zero outside.
fn radial_weight(dist_sq: f64, p: &ManifoldParams) -> f64 {
    let ratio = dist_sq / (p.r1 * p.r1);
    if ratio <= 1.0 {
        (1.0 - ratio).powi(p.k_exp as i32)
    } else {
        0.0
    }
}

/// Axial weight: unit plateau up to r2/2, smooth falloff to zero at r2.
fn axial_weight(dist: f64, p: &ManifoldParams) -> f64 {
    if dist <= p.r2 / 2.0 {
        1.0
    } else if dist < p.r2 {
        let t = (2.0 * dist - p.r2) / p.r2;
        (1.0 - t * t).powi(p.k_exp as i32)
    } else {
        0.0
    }
}

/// Neighbour average inside the r1-ball around sample `i` (excluding `i`),
/// with polynomially decaying weights; the first estimate of the projection
/// of `z_i` onto the manifold.
pub fn contraction_target(set: &SampleSet, i: usize, p: &ManifoldParams) -> Result<Vec<f64>> {
    let z_i = set.point(i);
    let mut total = 0.0;
    let mut acc = vec![0.0; set.dim()];
    for (j, z_j) in set.points().iter().enumerate() {
        if j == i {
            continue;
        }
        let w = radial_weight(norm_sq(&sub(z_j, z_i)), p);
        if w > 0.0 {
            total += w;
            for (a, x) in acc.iter_mut().zip(z_j.iter()) {
                *a += w * x;
            }
        }
    }
    if total <= 0.0 {
        return Err(Error::NoNeighbors { indices: vec![i] });
    }
    for a in acc.iter_mut() {
        *a /= total;
    }
    Ok(acc)
}

/// Rank-one orthogonal projector onto the contraction direction, stored as
/// the unit displacement rather than the full outer-product matrix.
#[derive(Debug, Clone)]
pub struct ContractionDirection {
    unit: Vec<f64>,
}

impl ContractionDirection {
    /// Direction of `target - z_i`; fails when the displacement is
    /// (numerically) zero.
    pub fn new(z_i: &[f64], target: &[f64], index: usize) -> Result<Self> {
        let diff = sub(target, z_i);
        let norm = norm_sq(&diff).sqrt();
        if norm < DEGENERATE_DIRECTION_TOL {
            return Err(Error::DegenerateDirection { index });
        }
        Ok(Self {
            unit: diff.into_iter().map(|x| x / norm).collect(),
        })
    }

    pub fn from_unit(unit: Vec<f64>) -> Self {
        debug_assert!((norm_sq(&unit) - 1.0).abs() < 1e-9);
        Self { unit }
    }

    pub fn unit(&self) -> &[f64] {
        &self.unit
    }

    /// Component of `w` along the direction (the projector applied to `w`).
    pub fn axial(&self, w: &[f64]) -> Vec<f64> {
        let scale = dot(&self.unit, w);
        self.unit.iter().map(|u| scale * u).collect()
    }

    /// Split `w` into (axial, normal) with `axial + normal == w`.
    pub fn split(&self, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let axial = self.axial(w);
        let normal = sub(w, &axial);
        (axial, normal)
    }
}

/// Cylindrically weighted neighbour average around sample `i` for a given
/// contraction direction: plateau/falloff weight along the direction,
/// ball weight across it.
pub fn local_contraction_with_direction(
    set: &SampleSet,
    i: usize,
    direction: &ContractionDirection,
    p: &ManifoldParams,
) -> Result<Vec<f64>> {
    let z_i = set.point(i);
    let mut total = 0.0;
    let mut acc = vec![0.0; set.dim()];
    for (j, z_j) in set.points().iter().enumerate() {
        if j == i {
            continue;
        }
        let diff = sub(z_j, z_i);
        let (axial, normal) = direction.split(&diff);
        let w = axial_weight(norm_sq(&axial).sqrt(), p) * radial_weight(norm_sq(&normal), p);
        if w > 0.0 {
            total += w;
            for (a, x) in acc.iter_mut().zip(z_j.iter()) {
                *a += w * x;
            }
        }
    }
    if total <= 0.0 {
        return Err(Error::NoNeighbors { indices: vec![i] });
    }
    for a in acc.iter_mut() {
        *a /= total;
    }
    Ok(acc)
}

/// Full local contraction of sample `i`: estimate the direction from the
/// neighbour average, then apply the cylindrical weighting. Errors with
/// [`Error::DegenerateDirection`] when the neighbour average coincides with
/// the sample (callers usually fall back to that average).
pub fn local_contraction(set: &SampleSet, i: usize, p: &ManifoldParams) -> Result<Vec<f64>> {
    let target = contraction_target(set, i, p)?;
    let direction = ContractionDirection::new(set.point(i), &target, i)?;
    local_contraction_with_direction(set, i, &direction, p)
}

/// Per-point record of what the fit did.
#[derive(Debug, Clone)]
pub struct PointDiagnostics {
    pub index: usize,
    /// Neighbours strictly inside the r1-ball (excluding the point itself).
    pub neighbors: usize,
    /// Euclidean displacement applied to the point.
    pub displacement: f64,
    /// The direction estimate was degenerate and the plain neighbour average
    /// was used instead.
    pub degenerate_direction: bool,
    /// Fewer than `min_neighbors` neighbours were available.
    pub under_sampled: bool,
}

/// Result of fitting: the contracted cloud plus per-point diagnostics.
#[derive(Debug, Clone)]
pub struct ManifoldFit {
    pub enhanced: SampleSet,
    pub diagnostics: Vec<PointDiagnostics>,
}

/// Project every sample onto the estimated manifold. All projections read
/// the original cloud, so the result is independent of evaluation order;
/// points whose r1-ball is empty are aggregated into one error.
pub fn fit_manifold(set: &SampleSet, p: &ManifoldParams) -> Result<ManifoldFit> {
    let results: Vec<Result<(Vec<f64>, PointDiagnostics)>> = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let z_i = set.point(i);
            let neighbors = set
                .points()
                .iter()
                .enumerate()
                .filter(|(j, z_j)| *j != i && norm_sq(&sub(z_j, z_i)) <= p.r1 * p.r1)
                .count();
            let target = contraction_target(set, i, p)?;
            let (enhanced, degenerate) = match ContractionDirection::new(z_i, &target, i) {
                Ok(direction) => (
                    local_contraction_with_direction(set, i, &direction, p)?,
                    false,
                ),
                Err(Error::DegenerateDirection { .. }) => (target, true),
                Err(other) => return Err(other),
            };
            let displacement = norm_sq(&sub(&enhanced, z_i)).sqrt();
            Ok((
                enhanced,
                PointDiagnostics {
                    index: i,
                    neighbors,
                    displacement,
                    degenerate_direction: degenerate,
                    under_sampled: neighbors < p.min_neighbors,
                },
            ))
        })
        .collect();

    let mut failed = Vec::new();
    let mut points = Vec::with_capacity(set.len());
    let mut diagnostics = Vec::with_capacity(set.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((point, diag)) => {
                points.push(point);
                diagnostics.push(diag);
            }
            Err(Error::NoNeighbors { .. }) => failed.push(i),
            Err(other) => return Err(other),
        }
    }
    if !failed.is_empty() {
        return Err(Error::NoNeighbors { indices: failed });
    }
    Ok(ManifoldFit {
        enhanced: set.with_points(points),
        diagnostics,
    })
}

/// Smallest radius (padded by 1%) such that every point has at least
/// `min_neighbors` others within it: the maximum over points of the
/// `min_neighbors`-th nearest-neighbour distance.
pub fn suggest_radius(set: &SampleSet, min_neighbors: usize) -> Result<f64> {
    if min_neighbors == 0 {
        return Err(Error::Config("min_neighbors must be >= 1".into()));
    }
    if set.len() <= min_neighbors {
        return Err(Error::Config(format!(
            "need more than {min_neighbors} samples to guarantee {min_neighbors} neighbours (got {})",
            set.len()
        )));
    }
    let mut worst = 0.0f64;
    for (i, z_i) in set.points().iter().enumerate() {
        let mut dists: Vec<f64> = set
            .points()
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, z_j)| norm_sq(&sub(z_j, z_i)).sqrt())
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        worst = worst.max(dists[min_neighbors - 1]);
    }
    Ok(worst * 1.01)
}
