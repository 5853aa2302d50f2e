//! Command-line front end: simulation, estimation, manifold enhancement,
//! reconstruction, baselines, metrics and the r1 sweep, all exchanging
//! tensors as PTF files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rsa_deconv::config::{PipelineConfig, RadiusSetting};
use rsa_deconv::error::{Error, Result};
use rsa_deconv::io;
use rsa_deconv::manifold::{fit_manifold, suggest_radius, ManifoldParams, PointDiagnostics, SampleSet};
use rsa_deconv::metrics::{format_sig6, psnr, ssim};
use rsa_deconv::pipeline::{
    artifact_metrics, metrics_csv, reconstruct, run_baselines, run_imr, sweep_csv, sweep_r1,
    RunArtifacts,
};
use rsa_deconv::sim::{blur_dataset, KernelFamily, SimulationSpec, PRNG_ID};
use rsa_deconv::tensor::ImageTensor;
use rsa_deconv::xk::{run_xk, XkLogEntry};

#[derive(Parser)]
#[command(
    name = "rsa-deconv",
    about = "Multi-frame blind deconvolution with manifold-based denoising",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate angle-dependent blurred frames from a sharp source image.
    Simulate {
        /// Source image: a .png or .ptf path, or `synthetic:AxB` for the
        /// built-in RGB test scene.
        #[arg(long)]
        source: String,
        /// Number of rotation angles / frames.
        #[arg(long, default_value_t = 36)]
        n: usize,
        /// Kernel support (odd).
        #[arg(long, default_value_t = 25)]
        s: usize,
        /// Gaussian noise standard deviation.
        #[arg(long, default_value_t = 0.05)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// PSF family: oriented-line or oriented-sparse.
        #[arg(long, default_value = "oriented-line")]
        family: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate blur kernels and per-frame deconvolved images.
    Estimate {
        /// Directory of frame .ptf files.
        #[arg(long)]
        frames: PathBuf,
        /// key=value config file (defaults when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Enhance a stack of tensors by manifold fitting.
    ManifoldFit {
        /// Directory of input .ptf files.
        #[arg(long = "in")]
        input: PathBuf,
        /// Neighbourhood radius, or `auto`.
        #[arg(long, default_value = "auto")]
        r1: String,
        /// Cylinder length, or `auto` (10 * r1).
        #[arg(long, default_value = "auto")]
        r2: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Non-blind multi-frame reconstruction from frames and kernels.
    Reconstruct {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        kernels: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output .ptf file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline: estimate, enhance, reconvolve, reconstruct.
    RunAll {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Ground-truth .ptf; enables metrics.csv.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// The four comparison reconstructions and their metrics table.
    Baselines {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print PSNR and SSIM of a target against a reference.
    Metrics {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Sensitivity of the reconstruction to the manifold radius.
    SweepR1 {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Radius grid as start:stop:step.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            source,
            n,
            s,
            sigma,
            seed,
            family,
            out,
        } => cmd_simulate(&source, n, s, sigma, seed, &family, &out),
        Command::Estimate { frames, config, out } => cmd_estimate(&frames, config.as_deref(), &out),
        Command::ManifoldFit {
            input,
            r1,
            r2,
            config,
            out,
        } => cmd_manifold_fit(&input, &r1, &r2, config.as_deref(), &out),
        Command::Reconstruct {
            frames,
            kernels,
            config,
            out,
        } => cmd_reconstruct(&frames, &kernels, config.as_deref(), &out),
        Command::RunAll {
            frames,
            config,
            truth,
            out,
        } => cmd_run_all(&frames, config.as_deref(), truth.as_deref(), &out),
        Command::Baselines {
            frames,
            truth,
            config,
            out,
        } => cmd_baselines(&frames, &truth, config.as_deref(), &out),
        Command::Metrics { target, reference } => cmd_metrics(&target, &reference),
        Command::SweepR1 {
            frames,
            truth,
            grid,
            config,
            out,
        } => cmd_sweep(&frames, &truth, &grid, config.as_deref(), &out),
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::from_file(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_source(spec: &str) -> Result<ImageTensor> {
    if let Some(dims) = spec.strip_prefix("synthetic:") {
        let (a, b) = dims
            .split_once('x')
            .ok_or_else(|| Error::Config(format!("expected synthetic:AxB, got {spec:?}")))?;
        let height: usize = a
            .parse()
            .map_err(|_| Error::Config(format!("bad height in {spec:?}")))?;
        let width: usize = b
            .parse()
            .map_err(|_| Error::Config(format!("bad width in {spec:?}")))?;
        return Ok(rsa_deconv::sim::synthetic_scene(3, height, width));
    }
    let path = Path::new(spec);
    match path.extension().and_then(|e| e.to_str()) {
        Some("ptf") => io::read_ptf(path),
        Some("png") => io::read_png(path),
        _ => Err(Error::Config(format!(
            "source must be .png, .ptf or synthetic:AxB (got {spec:?})"
        ))),
    }
}

fn cmd_simulate(
    source: &str,
    n: usize,
    s: usize,
    sigma: f64,
    seed: u64,
    family: &str,
    out: &Path,
) -> Result<()> {
    let source_image = load_source(source)?;
    let mut spec = SimulationSpec::new(source_image);
    spec.n_angles = n;
    spec.kernel_size = s;
    spec.noise_sigma = sigma;
    spec.seed = seed;
    spec.kernel_family = family.parse::<KernelFamily>()?;

    let data = blur_dataset(&spec)?;
    fs::create_dir_all(out)?;
    io::write_ptf(&out.join("truth.ptf"), &spec.source)?;
    io::write_ptf_stack(&out.join("frames"), "y", &data.frames)?;
    io::write_ptf_stack(&out.join("conv_true"), "conv", &data.convolved)?;
    io::write_kernel_stack(&out.join("kernels_true"), "k", &data.kernels)?;
    io::write_png(&out.join("previews").join("truth.png"), &spec.source)?;
    io::write_png(
        &out.join("previews").join("frame_000.png"),
        &data.frames[0].map(|v| v.clamp(0.0, 1.0)),
    )?;
    io::write_kernel_png(&out.join("previews").join("kernel_000.png"), &data.kernels[0])?;

    let echo = format!(
        "# simulation\nsource = {source}\nn = {n}\ns = {s}\nsigma = {sigma}\nseed = {seed}\nfamily = {family}\n# prng: {PRNG_ID}\n"
    );
    fs::write(out.join("config-echo.txt"), echo)?;
    println!(
        "simulated {} frames of {:?} into {}",
        data.frames.len(),
        spec.source.shape(),
        out.display()
    );
    Ok(())
}

fn write_xk_log(path: &Path, log: &[XkLogEntry]) -> Result<()> {
    let text: String = log.iter().map(|e| e.render() + "\n").collect();
    fs::write(path, text)?;
    Ok(())
}

fn cmd_estimate(frames_dir: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let frames = io::read_ptf_dir(frames_dir)?;
    let outcome = run_xk(&frames, &cfg)?;

    fs::create_dir_all(out)?;
    io::write_kernel_stack(&out.join("kernels"), "k", &outcome.state.kernels)?;
    for (i, k) in outcome.state.kernels.iter().enumerate() {
        io::write_kernel_png(&out.join("kernels_png").join(format!("k_{i:03}.png")), k)?;
    }
    io::write_ptf_stack(&out.join("xtilde"), "x", &outcome.deconvolved)?;
    io::write_ptf(&out.join("xhat.ptf"), &outcome.state.x_hat)?;
    write_xk_log(&out.join("run.log"), &outcome.log)?;
    fs::write(out.join("config-echo.txt"), cfg.echo())?;
    println!(
        "estimated {} kernels after {} outer iterations into {}",
        outcome.state.kernels.len(),
        outcome.state.iteration,
        out.display()
    );
    Ok(())
}

fn diagnostics_tsv(diags: &[PointDiagnostics], r1: f64, r2: f64) -> String {
    let mut text = format!("# r1={r1} r2={r2}\nindex\tneighbors\tdisplacement\tdegenerate_direction\tunder_sampled\n");
    for d in diags {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            d.index,
            d.neighbors,
            format_sig6(d.displacement),
            d.degenerate_direction,
            d.under_sampled
        ));
    }
    text
}

fn cmd_manifold_fit(
    input: &Path,
    r1: &str,
    r2: &str,
    config: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    if !r1.eq_ignore_ascii_case("auto") {
        cfg.r1 = RadiusSetting::Fixed(
            r1.parse()
                .map_err(|_| Error::Config(format!("bad r1 {r1:?}")))?,
        );
    }
    if !r2.eq_ignore_ascii_case("auto") {
        cfg.r2 = RadiusSetting::Fixed(
            r2.parse()
                .map_err(|_| Error::Config(format!("bad r2 {r2:?}")))?,
        );
    }

    let tensors = io::read_ptf_dir(input)?;
    let set = SampleSet::from_tensors(&tensors)?;
    let r1 = match cfg.r1 {
        RadiusSetting::Fixed(r) => r,
        RadiusSetting::Auto => suggest_radius(&set, cfg.min_neighbors)?,
    };
    let r2 = match cfg.r2 {
        RadiusSetting::Fixed(r) => r,
        RadiusSetting::Auto => 10.0 * r1,
    };
    let params = ManifoldParams::new(r1, r2, cfg.k_exp, cfg.min_neighbors)?;
    let fit = fit_manifold(&set, &params)?;

    io::write_ptf_stack(&out.join("xstar"), "enh", &fit.enhanced.to_tensors()?)?;
    fs::write(out.join("diagnostics.tsv"), diagnostics_tsv(&fit.diagnostics, r1, r2))?;
    println!(
        "enhanced {} samples (r1 = {}, r2 = {}) into {}",
        set.len(),
        format_sig6(r1),
        format_sig6(r2),
        out.display()
    );
    Ok(())
}

fn cmd_reconstruct(
    frames_dir: &Path,
    kernels_dir: &Path,
    config: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let cfg = load_config(config)?;
    let frames = io::read_ptf_dir(frames_dir)?;
    let kernels = io::read_kernel_dir(kernels_dir)?;
    let image = reconstruct(&frames, &kernels, &cfg)?;
    io::write_ptf(out, &image)?;
    println!("reconstructed {:?} into {}", image.shape(), out.display());
    Ok(())
}

fn emit_artifacts(out: &Path, artifacts: &RunArtifacts, cfg: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(out)?;
    io::write_kernel_stack(&out.join("kernels"), "k", &artifacts.kernels)?;
    for (i, k) in artifacts.kernels.iter().enumerate() {
        io::write_kernel_png(&out.join("kernels_png").join(format!("k_{i:03}.png")), k)?;
    }
    io::write_ptf_stack(&out.join("xtilde"), "x", &artifacts.x_tilde)?;
    io::write_ptf_stack(&out.join("xstar"), "enh", &artifacts.x_star)?;
    io::write_ptf_stack(&out.join("ytilde"), "y", &artifacts.y_tilde)?;
    io::write_ptf(&out.join("final.ptf"), &artifacts.x_final)?;
    io::write_png(
        &out.join("final.png"),
        &artifacts.x_final.map(|v| v.clamp(0.0, 1.0)),
    )?;
    io::write_ptf(&out.join("xhat.ptf"), &artifacts.x_hat_joint)?;
    write_xk_log(&out.join("run.log"), &artifacts.xk_log)?;
    fs::write(
        out.join("manifold-diagnostics.tsv"),
        diagnostics_tsv(
            &artifacts.manifold_diagnostics,
            artifacts.resolved_r1,
            artifacts.resolved_r2,
        ),
    )?;
    let echo = format!(
        "{}# resolved: r1 = {}, r2 = {}, xk_iterations = {}\n",
        cfg.echo(),
        artifacts.resolved_r1,
        artifacts.resolved_r2,
        artifacts.xk_iterations
    );
    fs::write(out.join("config-echo.txt"), echo)?;
    Ok(())
}

fn cmd_run_all(
    frames_dir: &Path,
    config: Option<&Path>,
    truth: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let cfg = load_config(config)?;
    let frames = io::read_ptf_dir(frames_dir)?;
    let artifacts = run_imr(&frames, &cfg)?;
    emit_artifacts(out, &artifacts, &cfg)?;

    if let Some(truth_path) = truth {
        let reference = io::read_ptf(truth_path)?;
        let rows = artifact_metrics(&artifacts, &reference)?;
        fs::write(out.join("metrics.csv"), metrics_csv(&rows))?;
    }
    println!(
        "pipeline finished (xk iterations: {}, r1 = {}) -> {}",
        artifacts.xk_iterations,
        format_sig6(artifacts.resolved_r1),
        out.display()
    );
    Ok(())
}

fn cmd_baselines(
    frames_dir: &Path,
    truth_path: &Path,
    config: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let cfg = load_config(config)?;
    let frames = io::read_ptf_dir(frames_dir)?;
    let truth = io::read_ptf(truth_path)?;
    let report = run_baselines(&frames, &truth, &cfg)?;

    fs::create_dir_all(out)?;
    for (name, image) in [
        ("blind-raw", &report.blind_raw),
        ("blind-premf", &report.blind_premf),
        ("wiener-no-prior", &report.wiener_no_prior),
        ("proposed", &report.proposed),
    ] {
        io::write_ptf(&out.join(format!("{name}.ptf")), image)?;
        io::write_png(
            &out.join(format!("{name}.png")),
            &image.map(|v| v.clamp(0.0, 1.0)),
        )?;
    }
    fs::write(out.join("metrics.csv"), metrics_csv(&report.rows))?;
    for row in &report.rows {
        println!(
            "{:<16} psnr {} dB  ssim {}",
            row.name,
            format_sig6(row.psnr_db),
            format_sig6(row.ssim)
        );
    }
    Ok(())
}

fn cmd_metrics(target: &Path, reference: &Path) -> Result<()> {
    let t = io::read_ptf(target)?;
    let r = io::read_ptf(reference)?;
    println!("psnr_db = {}", format_sig6(psnr(&t, &r)?));
    println!("ssim = {}", format_sig6(ssim(&t, &r)?));
    Ok(())
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "grid must be start:stop:step, got {spec:?}"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid start {:?}", parts[0])))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid stop {:?}", parts[1])))?;
    let step: f64 = parts[2]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid step {:?}", parts[2])))?;
    if step <= 0.0 || stop < start {
        return Err(Error::Config(format!("degenerate grid {spec:?}")));
    }
    let mut grid = Vec::new();
    let mut v = start;
    while v <= stop + 1e-9 * step {
        grid.push(v);
        v = start + step * (grid.len() as f64);
    }
    Ok(grid)
}

fn cmd_sweep(
    frames_dir: &Path,
    truth_path: &Path,
    grid_spec: &str,
    config: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let cfg = load_config(config)?;
    let frames = io::read_ptf_dir(frames_dir)?;
    let truth = io::read_ptf(truth_path)?;
    let grid = parse_grid(grid_spec)?;
    let rows = sweep_r1(&frames, &truth, &cfg, &grid)?;
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(out, sweep_csv(&rows))?;
    let best = rows
        .iter()
        .max_by(|a, b| a.psnr_db.partial_cmp(&b.psnr_db).expect("finite psnr"))
        .expect("non-empty grid");
    println!(
        "swept {} radii; best psnr {} dB at r1 = {} -> {}",
        rows.len(),
        format_sig6(best.psnr_db),
        format_sig6(best.r1),
        out.display()
    );
    Ok(())
}
