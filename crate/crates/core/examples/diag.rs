// scratch: tune speckle strength for spectral conditioning
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rsa_deconv::config::PipelineConfig;
use rsa_deconv::convolve::*;
use rsa_deconv::metrics::psnr;
use rsa_deconv::sim::*;
use rsa_deconv::solvers::*;
use rsa_deconv::tensor::*;

fn line_weights(s: usize, theta: f64) -> Vec<f64> {
    let r = (s / 2) as isize;
    let half = 0.4 * s as f64;
    let dir = (theta.sin(), theta.cos());
    let mut w = Vec::new();
    for u in -r..=r {
        for v in -r..=r {
            let t = (u as f64 * dir.0 + v as f64 * dir.1).clamp(-half, half);
            let du = u as f64 - t * dir.0;
            let dv = v as f64 - t * dir.1;
            w.push((1.0 - (du * du + dv * dv).sqrt()).max(0.0));
        }
    }
    w
}

fn main() {
    let scene = synthetic_scene(3, 64, 64);
    let s = 7usize;
    let n = 12usize;
    for (spikes, lo, hi) in [(7usize, 0.05f64, 0.15f64), (4, 0.10, 0.30), (14, 0.02, 0.10), (7, 0.10, 0.20)] {
        let mut kernels = Vec::new();
        for i in 0..n {
            let theta = std::f64::consts::PI * i as f64 / n as f64;
            let mut w = line_weights(s, theta);
            let mass: f64 = w.iter().sum();
            let mut rng = ChaCha12Rng::seed_from_u64(7);
            rng.set_stream((1 << 32) + i as u64);
            for _ in 0..spikes {
                let idx = rng.gen_range(0..s * s);
                w[idx] += mass * rng.gen_range(lo..hi);
            }
            kernels.push(BlurKernel::from_weights(s, w).unwrap());
        }
        let mut frac = 0.0;
        let mut aniso_min: f64 = f64::INFINITY;
        for k in &kernels {
            let ks = kernel_spectrum(k, 64, 64).unwrap();
            let mags: Vec<f64> = ks.data().iter().map(|z| z.norm()).collect();
            frac += mags.iter().filter(|&&m| m < 0.05).count() as f64 / mags.len() as f64;
            // anisotropy
            let r = (s / 2) as isize;
            let (mut mu, mut mv) = (0.0, 0.0);
            for u in -r..=r { for v in -r..=r { mu += k.get(u,v) * u as f64; mv += k.get(u,v) * v as f64; } }
            let (mut suu, mut svv, mut suv) = (0.0, 0.0, 0.0);
            for u in -r..=r { for v in -r..=r {
                let w = k.get(u,v); let du = u as f64 - mu; let dv = v as f64 - mv;
                suu += w*du*du; svv += w*dv*dv; suv += w*du*dv;
            }}
            let tr = suu + svv; let det = suu*svv - suv*suv;
            let disc = (tr*tr/4.0 - det).max(0.0).sqrt();
            aniso_min = aniso_min.min(((tr/2.0+disc)/(tr/2.0-disc).max(1e-12)).sqrt());
        }
        frac /= n as f64;

        // x_tilde with true kernels on noisy frames
        let mut specsim = SimulationSpec::new(scene.clone());
        specsim.seed = 7; specsim.n_angles = n; specsim.kernel_size = s;
        let cfg = PipelineConfig { kernel_size: s, ..PipelineConfig::default() };
        let single = cfg.single_schedule();
        let mut mean_psnr = 0.0;
        for i in 0..3 {
            let conv = periodic_convolve(&kernels[i], &scene).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(7);
            rng.set_stream(i as u64);
            let mut frame = conv.clone();
            for v in frame.data_mut() {
                let e: f64 = rng.sample(rand_distr::StandardNormal);
                *v += 0.05 * e;
            }
            let xt = solve_penalized_ls(
                std::slice::from_ref(&frame),
                std::slice::from_ref(&kernels[i]),
                &single, &frame).unwrap();
            mean_psnr += psnr(&xt, &scene).unwrap() / 3.0;
        }
        println!("spikes={spikes} amp={lo}..{hi}: frac(|K|<0.05) {frac:.3}, min aniso {aniso_min:.2}, x_tilde psnr {mean_psnr:.2}");
    }
}
