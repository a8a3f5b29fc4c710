use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use znnrad::ukf_denoise::{denoise_image, filter_scanline, unscented_update, UkfState};
use znnrad::{GrayImage, UkfParams};

/// Textbook scalar Kalman filter for a random walk observed directly.
fn linear_kf(line: &[f64], q: f64, r: f64) -> Vec<f64> {
    let (mut x, mut p) = (line[0], r);
    line.iter()
        .map(|&z| {
            let prior = p + q;
            let k = prior / (prior + r);
            x += k * (z - x);
            p = (1.0 - k) * prior;
            x
        })
        .collect()
}

proptest! {
    #[test]
    fn scalar_ukf_equals_linear_kalman(
        line in prop::collection::vec(0.0f64..1.0, 100),
        q in 1e-6f64..1e-1,
        r in 1e-4f64..1.0,
        beta in 0.1f64..10.0,
    ) {
        let params = UkfParams { beta, process_noise_q: q, measurement_noise_r: r, ..Default::default() };
        let ukf = filter_scanline(&line, &params).unwrap();
        let kf = linear_kf(&line, q, r);
        for (a, b) in ukf.iter().zip(&kf) {
            prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn posterior_variance_bounded_by_prior_and_noise(
        variance in 0.0f64..10.0,
        q in 0.0f64..1.0,
        r in 1e-6f64..10.0,
        z in -5.0f64..5.0,
    ) {
        let params = UkfParams { process_noise_q: q, measurement_noise_r: r, ..Default::default() };
        let next = unscented_update(&UkfState::scalar(0.0, variance), z, &params).unwrap();
        let post = next.covariance[(0, 0)];
        prop_assert!(post >= -1e-12);
        prop_assert!(post <= variance + q + 1e-12);
        prop_assert!(post <= r * (1.0 + 1e-12));
    }
}

fn ramp(lo: f64, hi: f64) -> GrayImage {
    GrayImage::from_fn(64, 64, |_, c| lo + (hi - lo) * c as f64 / 63.0).unwrap()
}

fn noisy(clean: &GrayImage, sigma: f64, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).unwrap();
    clean.map_clamped(|p| p + normal.sample(&mut rng))
}

#[test]
fn denoising_gradient_phantom_reduces_mse() {
    let clean = ramp(0.2, 0.8);
    let input = noisy(&clean, 0.1, 42);
    let out = denoise_image(&input, &UkfParams::default()).unwrap();
    let before = input.mean_squared_error(&clean);
    let after = out.mean_squared_error(&clean);
    assert!(after <= 0.7 * before, "mse {before} -> {after}");
}

#[test]
fn denoising_is_deterministic() {
    let input = noisy(&ramp(0.0, 1.0), 0.1, 7);
    let a = denoise_image(&input, &UkfParams::default()).unwrap();
    let b = denoise_image(&input, &UkfParams::default()).unwrap();
    assert_eq!(a.digest(), b.digest());
}

/// A second pass should barely move the error against the clean image.
/// Scanline lag on a slope compounds instead, so this is kept as a record.
#[test]
#[ignore = "does not hold for a causal random-walk scanline filter on sloped phantoms"]
fn second_pass_changes_mse_by_under_five_percent() {
    let clean = ramp(0.2, 0.8);
    let once = denoise_image(&noisy(&clean, 0.1, 42), &UkfParams::default()).unwrap();
    let twice = denoise_image(&once, &UkfParams::default()).unwrap();
    let (a, b) = (once.mean_squared_error(&clean), twice.mean_squared_error(&clean));
    assert!((b - a).abs() < 0.05 * a, "mse {a} -> {b}");
}
