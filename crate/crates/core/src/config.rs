//! Pipeline tuning parameters and the flat `key=value` config-file format.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::solvers::HqsSchedule;

/// A radius that is either fixed or derived from the data at run time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusSetting {
    Auto,
    Fixed(f64),
}

impl RadiusSetting {
    fn parse(value: &str, key: &str) -> Result<Self> {
        if value.eq_ignore_ascii_case("auto") {
            Ok(RadiusSetting::Auto)
        } else {
            Ok(RadiusSetting::Fixed(parse_f64(value, key)?))
        }
    }
}

impl std::fmt::Display for RadiusSetting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RadiusSetting::Auto => write!(f, "auto"),
            RadiusSetting::Fixed(v) => write!(f, "{v}"),
        }
    }
}

/// Every tuning parameter of the estimation/enhancement/reconstruction
/// pipeline, with the validated defaults for the full-scale setup.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Kernel support `s` (odd).
    pub kernel_size: usize,
    /// Data weight for the joint multi-frame estimation problem.
    pub lambda1_joint: f64,
    /// Data weight for single-frame deconvolution and final reconstruction.
    pub lambda1_single: f64,
    /// L1 weight of the kernel lasso.
    pub mu: f64,
    /// Gradient-prior exponent.
    pub alpha: f64,
    /// Maximum outer alternations of the estimation loop.
    pub outer_iters: usize,
    /// Early-stop threshold on the minimum consecutive kernel cosine
    /// similarity.
    pub tau: f64,
    /// Neighbourhood radius for manifold fitting.
    pub r1: RadiusSetting,
    /// Cylinder length for manifold fitting (auto = 10 * r1).
    pub r2: RadiusSetting,
    /// Falloff exponent of the manifold-fitting weights.
    pub k_exp: u32,
    /// Neighbour count targeted when `r1` is auto-derived.
    pub min_neighbors: usize,
    /// Std-dev of the Gaussian kernel initialisation (auto = s / 6).
    pub init_sigma: Option<f64>,
    /// Simulation / run seed.
    pub seed: u64,
    /// Beta-continuation schedule shared by all penalised solves.
    pub beta_init: f64,
    pub beta_max: f64,
    pub beta_growth: f64,
    pub inner_iters: usize,
    pub epsilon: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            kernel_size: 25,
            lambda1_joint: 667.0,
            lambda1_single: 2000.0,
            mu: 0.04,
            alpha: 0.80,
            outer_iters: 10,
            tau: 0.9980,
            r1: RadiusSetting::Auto,
            r2: RadiusSetting::Auto,
            k_exp: 2,
            min_neighbors: 5,
            init_sigma: None,
            seed: 0,
            beta_init: 1.0,
            beta_max: 1e20,
            beta_growth: 2.0,
            inner_iters: 5,
            epsilon: 1e-9,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(Error::Config(format!(
                "kernel_size must be odd (got {})",
                self.kernel_size
            )));
        }
        if self.outer_iters == 0 {
            return Err(Error::Config("outer_iters must be >= 1".into()));
        }
        if self.mu < 0.0 {
            return Err(Error::Config("mu must be non-negative".into()));
        }
        if self.k_exp < 2 {
            return Err(Error::Config("k_exp must be >= 2".into()));
        }
        if let RadiusSetting::Fixed(r) = self.r1 {
            if r <= 0.0 {
                return Err(Error::Config("r1 must be positive".into()));
            }
        }
        if let RadiusSetting::Fixed(r) = self.r2 {
            if r <= 0.0 {
                return Err(Error::Config("r2 must be positive".into()));
            }
        }
        if let Some(sigma) = self.init_sigma {
            if sigma <= 0.0 {
                return Err(Error::Config("init_sigma must be positive".into()));
            }
        }
        self.joint_schedule().validate()?;
        self.single_schedule().validate()
    }

    /// Schedule for the joint multi-frame estimation solve.
    pub fn joint_schedule(&self) -> HqsSchedule {
        self.schedule(self.lambda1_joint)
    }

    /// Schedule for single-frame deconvolution and the final reconstruction.
    pub fn single_schedule(&self) -> HqsSchedule {
        self.schedule(self.lambda1_single)
    }

    fn schedule(&self, lambda1: f64) -> HqsSchedule {
        HqsSchedule {
            beta_init: self.beta_init,
            beta_max: self.beta_max,
            growth: self.beta_growth,
            inner_iters: self.inner_iters,
            epsilon: self.epsilon,
            alpha: self.alpha,
            lambda1,
        }
    }

    /// Std-dev used for the Gaussian kernel initialisation.
    pub fn resolved_init_sigma(&self) -> f64 {
        self.init_sigma
            .unwrap_or(self.kernel_size as f64 / 6.0)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    /// Parse the flat `key=value` format: one key per line, `#` starts a
    /// comment, unknown keys are errors.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "kernel_size" => cfg.kernel_size = parse_usize(value, key)?,
                "lambda1_joint" => cfg.lambda1_joint = parse_f64(value, key)?,
                "lambda1_single" => cfg.lambda1_single = parse_f64(value, key)?,
                "mu" => cfg.mu = parse_f64(value, key)?,
                "alpha" => cfg.alpha = parse_f64(value, key)?,
                "outer_iters" => cfg.outer_iters = parse_usize(value, key)?,
                "tau" => cfg.tau = parse_f64(value, key)?,
                "r1" => cfg.r1 = RadiusSetting::parse(value, key)?,
                "r2" => cfg.r2 = RadiusSetting::parse(value, key)?,
                "k_exp" => cfg.k_exp = parse_usize(value, key)? as u32,
                "min_neighbors" => cfg.min_neighbors = parse_usize(value, key)?,
                "init_sigma" => {
                    cfg.init_sigma = if value.eq_ignore_ascii_case("auto") {
                        None
                    } else {
                        Some(parse_f64(value, key)?)
                    }
                }
                "seed" => cfg.seed = parse_u64(value, key)?,
                "beta_init" => cfg.beta_init = parse_f64(value, key)?,
                "beta_max" => cfg.beta_max = parse_f64(value, key)?,
                "beta_growth" => cfg.beta_growth = parse_f64(value, key)?,
                "inner_iters" => cfg.inner_iters = parse_usize(value, key)?,
                "epsilon" => cfg.epsilon = parse_f64(value, key)?,
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Echo the configuration back in the config-file format, suitable for
    /// re-feeding into any subcommand.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "kernel_size = {}", self.kernel_size);
        let _ = writeln!(out, "lambda1_joint = {}", self.lambda1_joint);
        let _ = writeln!(out, "lambda1_single = {}", self.lambda1_single);
        let _ = writeln!(out, "mu = {}", self.mu);
        let _ = writeln!(out, "alpha = {}", self.alpha);
        let _ = writeln!(out, "outer_iters = {}", self.outer_iters);
        let _ = writeln!(out, "tau = {}", self.tau);
        let _ = writeln!(out, "r1 = {}", self.r1);
        let _ = writeln!(out, "r2 = {}", self.r2);
        let _ = writeln!(out, "k_exp = {}", self.k_exp);
        let _ = writeln!(out, "min_neighbors = {}", self.min_neighbors);
        match self.init_sigma {
            Some(sigma) => {
                let _ = writeln!(out, "init_sigma = {sigma}");
            }
            None => {
                let _ = writeln!(out, "init_sigma = auto");
            }
        }
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "beta_init = {}", self.beta_init);
        let _ = writeln!(out, "beta_max = {}", self.beta_max);
        let _ = writeln!(out, "beta_growth = {}", self.beta_growth);
        let _ = writeln!(out, "inner_iters = {}", self.inner_iters);
        let _ = writeln!(out, "epsilon = {}", self.epsilon);
        out
    }
}

fn parse_f64(value: &str, key: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("{key}: expected a number, got {value:?}")))
}

fn parse_usize(value: &str, key: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got {value:?}")))
}

fn parse_u64(value: &str, key: &str) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got {value:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_overrides_and_comments() {
        let cfg = PipelineConfig::parse_str(
            "# pipeline settings\nkernel_size = 7\nmu=0.02  # trailing comment\nr1 = 3.5\n\ninit_sigma = auto\n",
        )
        .unwrap();
        assert_eq!(cfg.kernel_size, 7);
        assert_eq!(cfg.mu, 0.02);
        assert_eq!(cfg.r1, RadiusSetting::Fixed(3.5));
        assert_eq!(cfg.init_sigma, None);
        // Untouched keys keep their defaults.
        assert_eq!(cfg.lambda1_joint, 667.0);
        assert_eq!(cfg.tau, 0.9980);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = PipelineConfig::parse_str("lambda_three = 4\n").unwrap_err();
        assert!(err.to_string().contains("unknown key"));
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = PipelineConfig::default();
        cfg.kernel_size = 7;
        cfg.r1 = RadiusSetting::Fixed(2.25);
        cfg.seed = 17;
        let parsed = PipelineConfig::parse_str(&cfg.echo()).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn even_kernel_size_is_invalid() {
        assert!(PipelineConfig::parse_str("kernel_size = 8\n").is_err());
    }
}
