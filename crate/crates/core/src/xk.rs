//! Alternating estimation of the sharp image and the per-frame blur kernels,
//! with cosine-similarity early stopping, followed by single-frame
//! deconvolution of every input with its estimated kernel.

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::kernel_est::estimate_kernel;
use crate::solvers::{penalized_objective, solve_penalized_ls};
use crate::tensor::{BlurKernel, ImageTensor};

/// State of the alternation after the latest outer iteration.
#[derive(Debug, Clone)]
pub struct XkState {
    /// Joint sharp-image estimate (kept for diagnostics; the pipeline
    /// consumes the kernels and per-frame deconvolutions).
    pub x_hat: ImageTensor,
    /// Current kernel estimates, one per frame, all on the simplex.
    pub kernels: Vec<BlurKernel>,
    /// Outer iterations actually executed.
    pub iteration: usize,
    /// Minimum over frames of the cosine similarity between the two most
    /// recent kernel iterates; `None` until the second iteration.
    pub similarity_floor: Option<f64>,
}

/// One line of the alternation run log.
#[derive(Debug, Clone)]
pub struct XkLogEntry {
    pub iteration: usize,
    pub min_cosine_similarity: Option<f64>,
    pub objective: f64,
}

impl XkLogEntry {
    pub fn render(&self) -> String {
        let sim = self
            .min_cosine_similarity
            .map(|s| format!("{s:.6}"))
            .unwrap_or_else(|| "n/a".to_string());
        format!(
            "iteration {:>3}  min_cosine_similarity {sim}  objective {:.6e}",
            self.iteration, self.objective
        )
    }
}

/// Everything the alternation produces.
#[derive(Debug, Clone)]
pub struct XkOutcome {
    pub state: XkState,
    /// Per-frame deconvolved images.
    pub deconvolved: Vec<ImageTensor>,
    pub log: Vec<XkLogEntry>,
}

/// Isotropic Gaussian kernel sampled at integer offsets and normalised onto
/// the simplex.
pub fn init_gaussian_kernel(size: usize, sigma: f64) -> Result<BlurKernel> {
    if sigma <= 0.0 {
        return Err(Error::Config(format!("sigma must be positive (got {sigma})")));
    }
    let r = (size / 2) as isize;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut weights = Vec::with_capacity(size * size);
    for u in -r..=r {
        for v in -r..=r {
            weights.push((-((u * u + v * v) as f64) * inv).exp());
        }
    }
    BlurKernel::from_weights(size, weights)
}

/// Cosine similarity of two kernels of the same support; in (0, 1] for
/// simplex kernels.
pub fn cosine_similarity(k1: &BlurKernel, k2: &BlurKernel) -> f64 {
    assert_eq!(k1.size(), k2.size(), "kernel supports must match");
    let dot: f64 = k1.data().iter().zip(k2.data().iter()).map(|(a, b)| a * b).sum();
    let n1: f64 = k1.data().iter().map(|a| a * a).sum::<f64>().sqrt();
    let n2: f64 = k2.data().iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (n1 * n2)
}

/// Run the alternation on a stack of frames.
///
/// Each outer iteration solves the joint penalised problem for the sharp
/// image (initialised from the first frame) and re-estimates every kernel in
/// the gradient domain; it stops early once the minimum consecutive kernel
/// cosine similarity reaches `tau` (the check is skipped on the first
/// iteration, which has no predecessor). Afterwards each frame is
/// deconvolved on its own with the single-frame data weight.
pub fn run_xk(frames: &[ImageTensor], cfg: &PipelineConfig) -> Result<XkOutcome> {
    cfg.validate()?;
    if frames.len() < 2 {
        return Err(Error::Shape(format!(
            "alternating estimation needs at least 2 frames (got {})",
            frames.len()
        )));
    }
    let init = init_gaussian_kernel(cfg.kernel_size, cfg.resolved_init_sigma())?;
    let mut kernels = vec![init; frames.len()];
    let joint = cfg.joint_schedule();
    let single = cfg.single_schedule();

    let mut log = Vec::new();
    let mut x_hat = frames[0].clone();
    let mut iteration = 0;
    let mut similarity_floor = None;
    for t in 1..=cfg.outer_iters {
        x_hat = solve_penalized_ls(frames, &kernels, &joint, &frames[0])
            .map_err(|e| e.in_stage("joint sharp-image estimation"))?;

        let new_kernels: Vec<BlurKernel> = frames
            .par_iter()
            .enumerate()
            .map(|(i, y)| {
                estimate_kernel(y, &x_hat, cfg.mu, cfg.kernel_size).map_err(|e| e.on_frame(i))
            })
            .collect::<Result<_>>()?;

        similarity_floor = if t > 1 {
            Some(
                kernels
                    .iter()
                    .zip(new_kernels.iter())
                    .map(|(old, new)| cosine_similarity(new, old))
                    .fold(f64::INFINITY, f64::min),
            )
        } else {
            None
        };
        kernels = new_kernels;
        iteration = t;

        let objective = penalized_objective(frames, &kernels, &x_hat, &joint)?;
        log.push(XkLogEntry {
            iteration: t,
            min_cosine_similarity: similarity_floor,
            objective,
        });

        if similarity_floor.is_some_and(|s| s >= cfg.tau) {
            break;
        }
    }

    let deconvolved: Vec<ImageTensor> = frames
        .par_iter()
        .zip(kernels.par_iter())
        .enumerate()
        .map(|(i, (y, k))| {
            solve_penalized_ls(
                std::slice::from_ref(y),
                std::slice::from_ref(k),
                &single,
                y,
            )
            .map_err(|e| e.on_frame(i))
        })
        .collect::<Result<_>>()?;

    Ok(XkOutcome {
        state: XkState {
            x_hat,
            kernels,
            iteration,
            similarity_floor,
        },
        deconvolved,
        log,
    })
}
