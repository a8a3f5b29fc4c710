//! Phantom CT slices for running the pipeline without a real dataset.
//!
//! Every image is a flat background with a few low-amplitude plane waves.
//! The waves have whole-cycle frequencies, so they average to exactly zero
//! over the image. Cancer images add a bright elliptical blob with a soft
//! rim. Both classes then get additive Gaussian noise.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};
use znnrad::ingest::write_pgm;
use znnrad::seed;
use znnrad::{GrayImage, Label};

use crate::config::SyntheticSettings;
use crate::error::CliError;

const BACKGROUND: f64 = 0.35;
const BLOB_GAIN: f64 = 0.3;
/// Radial width of the blob's linear fall-off, relative to its semi-axes.
const RIM: f64 = 0.2;

pub fn phantom(label: Label, index: usize, size: usize, noise_sigma: f64, seed: u64) -> GrayImage {
    let mut rng = seed::stream(seed, 0x5EED_0000 + label as u64, index as u64);
    let waves: Vec<[f64; 4]> = (0..3)
        .map(|_| {
            [
                f64::from(rng.random_range(1..=6u8)),
                f64::from(rng.random_range(0..=6u8)),
                rng.random_range(0.0..TAU),
                rng.random_range(0.01..0.04),
            ]
        })
        .collect();
    let n = size as f64;
    let blob = (label == Label::Cancer).then(|| {
        let cy = rng.random_range(0.3 * n..0.7 * n);
        let cx = rng.random_range(0.3 * n..0.7 * n);
        let a = rng.random_range(0.1 * n..0.2 * n);
        let b = rng.random_range(0.1 * n..0.2 * n);
        let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
        (cy, cx, a, b, theta.sin(), theta.cos())
    });
    let normal = Normal::new(0.0, noise_sigma).expect("sigma validated non-negative");
    GrayImage::from_clamped(size, size, {
        let mut px = Vec::with_capacity(size * size);
        for r in 0..size {
            for c in 0..size {
                let (y, x) = (r as f64, c as f64);
                let mut v = BACKGROUND;
                for &[fx, fy, phase, amp] in &waves {
                    v += amp * (TAU * (fx * x + fy * y) / n + phase).cos();
                }
                if let Some((cy, cx, a, b, s, co)) = blob {
                    let (dy, dx) = (y - cy, x - cx);
                    let (u, w) = (dx * co + dy * s, -dx * s + dy * co);
                    let rho = ((u / a).powi(2) + (w / b).powi(2)).sqrt();
                    v += BLOB_GAIN * ((1.0 + RIM - rho) / RIM).clamp(0.0, 1.0);
                }
                if noise_sigma > 0.0 {
                    v += normal.sample(&mut rng);
                }
                px.push(v);
            }
        }
        px
    })
    .expect("square image of validated size")
}

/// Digest of the generator settings, recorded in the dataset manifest.
pub fn settings_digest(settings: &SyntheticSettings, seed: u64) -> String {
    let text = format!(
        "n_per_class={}\nimage_size={}\nnoise_sigma={:?}\nseed={seed}\n",
        settings.n_per_class, settings.image_size, settings.noise_sigma
    );
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Writes `cancer/` and `noncancer/` PGM phantoms plus `manifest.csv`.
pub fn generate(out_dir: &Path, settings: &SyntheticSettings, seed: u64) -> Result<Vec<PathBuf>, CliError> {
    if settings.n_per_class < 2 {
        return Err(CliError::Config(format!("n_per_class must be >= 2, got {}", settings.n_per_class)));
    }
    if settings.image_size < 8 {
        return Err(CliError::Config(format!("image_size must be >= 8, got {}", settings.image_size)));
    }
    if !(settings.noise_sigma >= 0.0 && settings.noise_sigma.is_finite()) {
        return Err(CliError::Config(format!("noise_sigma must be >= 0, got {}", settings.noise_sigma)));
    }
    let mut written = Vec::new();
    let mut manifest = String::from("source_id,label,sha256\n");
    for label in Label::ALL {
        let dir = out_dir.join(label.as_str());
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        for k in 0..settings.n_per_class {
            let image = phantom(label, k, settings.image_size, settings.noise_sigma, seed);
            let name = format!("{}_{k:04}.pgm", label.as_str());
            let path = dir.join(&name);
            write_pgm(&path, &image)?;
            let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            manifest.push_str(&format!("{}/{name},{label},{}\n", label.as_str(), hex::encode(Sha256::digest(&bytes))));
            written.push(path);
        }
    }
    manifest.push_str(&format!("# config_digest={}\n", settings_digest(settings, seed)));
    let path = out_dir.join("manifest.csv");
    fs::write(&path, manifest).map_err(|e| CliError::io(&path, e))?;
    written.push(path);
    Ok(written)
}
