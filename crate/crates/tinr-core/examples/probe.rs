use tinr_core::image::{decode_image, Image};
use tinr_core::metrics::{mse, psnr};
use tinr_core::network::{ActivationKind, EncoderConfig, NetworkSpec};
use tinr_core::optim::{default_config, OptimizerKind};
use tinr_core::train::{train, TrainJob};

// deterministic smooth synthetic texture
fn texture(w: usize, h: usize) -> Image {
    let mut img = Image::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let u = (x as f64 + 0.5) / w as f64;
            let v = (y as f64 + 0.5) / h as f64;
            let r = 0.5 + 0.35 * (std::f64::consts::TAU * (2.0 * u + v)).sin();
            let g = 0.5 + 0.3 * (std::f64::consts::TAU * (3.0 * v)).cos() * (std::f64::consts::TAU * u).sin();
            let b = 0.5 + 0.25 * (std::f64::consts::TAU * (u + 2.0 * v)).cos();
            img.set(x, y, [r, g, b]);
        }
    }
    img
}

fn main() {
    let base = texture(32, 32);
    let spec = NetworkSpec::new(2, 128, 1, ActivationKind::Relu, EncoderConfig::fourier_octaves(8)).unwrap();
    let mut job = TrainJob::new(spec, default_config(ActivationKind::Relu, OptimizerKind::Adam));
    job.epochs = 500;
    job.seed = 7;
    job.snapshot_epochs = vec![];
    let t0 = std::time::Instant::now();
    let out = train(&job, &base, None).unwrap();
    let decoded = decode_image(&out.model, 32, 32, None).unwrap();
    let p = psnr(mse(&decoded, &base).unwrap()).unwrap();
    println!("criterion4 probe: psnr {:.2} dB in {:.1}s", p, t0.elapsed().as_secs_f64());
    for (i, l) in out.loss_curve.iter().enumerate() {
        if i % 100 == 0 || i == 499 { println!("  epoch {:4}  loss {:.3e}", i + 1, l); }
    }
}
