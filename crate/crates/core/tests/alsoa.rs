use std::convert::Infallible;

use proptest::prelude::*;
use znnrad::alsoa::{evaluate_fitness, optimize};
use znnrad::diezin::{residual_trace, DieznnError, LinearSystem};
use znnrad::{AlsoaConfig, DieznnParams, NoiseSpec};

fn sphere(x: &[f64]) -> Result<f64, Infallible> {
    Ok(x.iter().map(|v| v * v).sum())
}

#[test]
fn sphere_2d_converges_for_most_seeds() {
    let hits = (0..20u64)
        .filter(|&seed| {
            let config = AlsoaConfig { max_iterations: 200, ..AlsoaConfig::new(vec![(-5.0, 5.0); 2], seed) };
            optimize(&sphere, &config).unwrap().best_fitness < 1e-2
        })
        .count();
    assert!(hits >= 18, "{hits}/20 seeds converged");
}

#[test]
fn shifted_parabola_finds_two() {
    let objective = |x: &[f64]| -> Result<f64, Infallible> { Ok((x[0] - 2.0).powi(2)) };
    for seed in 0..20u64 {
        let config = AlsoaConfig {
            population_m: 10,
            max_iterations: 100,
            ..AlsoaConfig::new(vec![(-10.0, 10.0)], seed)
        };
        let best = optimize(&objective, &config).unwrap().best_position[0];
        assert!((best - 2.0).abs() < 0.05, "seed {seed}: {best}");
    }
}

/// Fitness of a DIEZNN gain candidate: the final residual on a scalar system.
fn gain_fitness(x: &[f64]) -> Result<f64, DieznnError> {
    let params = DieznnParams { eta: x[0], mu: x[1], ..DieznnParams::default() };
    let system = LinearSystem::scalar(1.0, 1.0)?;
    Ok(residual_trace(&system, &params, &NoiseSpec::none())?.last().unwrap().1)
}

#[test]
fn failing_candidates_score_infinity() {
    // stiff double-integral gain: RK4 at h = 0.01 blows up
    assert!(matches!(gain_fitness(&[1.0, 1e4]), Err(DieznnError::Divergence { .. })));
    assert_eq!(evaluate_fitness(&[1.0, 1e4], &gain_fitness), f64::INFINITY);
    // violates the step stability guard
    assert_eq!(evaluate_fitness(&[500.0, 2.0], &gain_fitness), f64::INFINITY);
    assert!(evaluate_fitness(&[5.0, 2.0], &gain_fitness).is_finite());
    let nan = |_: &[f64]| -> Result<f64, Infallible> { Ok(f64::NAN) };
    assert_eq!(evaluate_fitness(&[0.0], &nan), f64::INFINITY);
}

#[test]
fn history_is_non_increasing_with_infinite_candidates() {
    let config = AlsoaConfig { max_iterations: 20, ..AlsoaConfig::new(vec![(0.5, 300.0), (0.1, 1000.0)], 9) };
    let result = optimize(&gain_fitness, &config).unwrap();
    assert_eq!(result.history.len(), 21);
    assert!(result.history.windows(2).all(|w| w[1] <= w[0]));
    assert!(result.best_fitness.is_finite());
}

#[test]
fn thread_count_does_not_change_result() {
    let config = AlsoaConfig::new(vec![(-3.0, 3.0); 3], 77);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| optimize(&sphere, &config))
    };
    assert_eq!(run(1).unwrap(), run(4).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn best_position_stays_in_bounds(
        seed in any::<u64>(),
        bounds in prop::collection::vec((-100.0f64..100.0, 0.01f64..50.0), 1..4),
        iterations in 0usize..30,
    ) {
        let bounds: Vec<(f64, f64)> = bounds.into_iter().map(|(lo, w)| (lo, lo + w)).collect();
        let config = AlsoaConfig { max_iterations: iterations, ..AlsoaConfig::new(bounds.clone(), seed) };
        let result = optimize(&sphere, &config).unwrap();
        prop_assert_eq!(result.history.len(), iterations + 1);
        for (x, (lo, hi)) in result.best_position.iter().zip(&bounds) {
            prop_assert!(lo <= x && x <= hi);
        }
        prop_assert!(result.history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(result, optimize(&sphere, &config).unwrap());
    }
}
