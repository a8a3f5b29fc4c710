use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use znnrad::diezin::{
    build_system, dieznn_step, predict, residual_trace, shows_unbounded_growth, train, Integrator, LinearSystem,
    Standardizer, Variant, ZnnState,
};
use znnrad::{DieznnParams, FeatureVector, Label, NoiseSpec};

fn unit_system() -> LinearSystem<f64> {
    LinearSystem::scalar(1.0, 1.0).unwrap()
}

/// Signed error trajectory of the scalar system from `w(0) = 0`.
fn error_path(params: &DieznnParams, noise: &NoiseSpec) -> Vec<(f64, f64)> {
    let sys = unit_system();
    let mut state = ZnnState::zero(&sys);
    let mut out = vec![(0.0, state.error[0])];
    for _ in 0..params.steps() {
        state = dieznn_step(&state, &sys, params, noise).unwrap();
        out.push((state.clock, state.error[0]));
    }
    out
}

/// Default gains put the characteristic roots at -1, -2, -2; with `T(0) = -1`
/// and zero integrals the solution is `-e^{-s} + 4 s e^{-2s}`.
fn closed_form(s: f64) -> f64 {
    -(-s).exp() + 4.0 * s * (-2.0 * s).exp()
}

#[test]
fn default_dynamics_match_closed_form() {
    let params = DieznnParams::default();
    let sup = error_path(&params, &NoiseSpec::none())
        .iter()
        .map(|&(s, e)| (e - closed_form(s)).abs())
        .fold(0.0, f64::max);
    assert!(sup <= 1e-6, "sup error {sup}");
}

#[test]
fn default_step_tracks_fine_reference() {
    let coarse = DieznnParams::default();
    let fine = DieznnParams { step_h: 1e-4, ..coarse };
    for noise in [NoiseSpec::none(), NoiseSpec::linear(1.0, 0.5)] {
        let a = error_path(&coarse, &noise);
        let b = error_path(&fine, &noise);
        let sup = a.iter().enumerate().map(|(k, &(_, e))| (e - b[k * 100].1).abs()).fold(0.0, f64::max);
        assert!(sup <= 1e-3, "{noise:?}: sup error {sup}");
    }
}

#[test]
fn plain_znn_follows_exponential_law() {
    let params = DieznnParams { eta: 1.0, step_h: 0.001, horizon_s: 5.0, ..DieznnParams::default() }
        .with_variant(Variant::Znn);
    for (s, e) in error_path(&params, &NoiseSpec::none()) {
        let expected = -(-s).exp();
        assert!((e - expected).abs() <= 1e-2 * expected.abs(), "s={s}: {e} vs {expected}");
    }
}

#[test]
fn euler_error_halves_with_step() {
    let reference = error_path(
        &DieznnParams { step_h: 1e-4, ..DieznnParams::default() },
        &NoiseSpec::none(),
    );
    let sup_error = |h: f64| {
        let params = DieznnParams { step_h: h, integrator: Integrator::Euler, ..DieznnParams::default() };
        let stride = (h / 1e-4).round() as usize;
        error_path(&params, &NoiseSpec::none())
            .iter()
            .enumerate()
            .map(|(k, &(_, e))| (e - reference[k * stride].1).abs())
            .fold(0.0, f64::max)
    };
    let ratio = sup_error(0.02) / sup_error(0.01);
    assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}");
}

#[test]
fn variants_rank_under_linear_noise() {
    let noise = NoiseSpec::linear(1.0, 0.5);
    let final_residual = |v: Variant| {
        residual_trace(&unit_system(), &DieznnParams::default().with_variant(v), &noise).unwrap().last().unwrap().1
    };
    let (d, i, z) = (final_residual(Variant::Dieznn), final_residual(Variant::Ieznn), final_residual(Variant::Znn));
    assert!(d <= 1e-3, "dieznn {d}");
    assert!(d < i && i < z, "{d} {i} {z}");
}

#[test]
fn integral_term_rejects_constant_noise() {
    let params = DieznnParams::default().with_variant(Variant::Ieznn);
    let trace = residual_trace(&unit_system(), &params, &NoiseSpec::constant(1.0)).unwrap();
    assert!(trace.last().unwrap().1 <= 1e-3);
}

#[test]
fn plain_znn_grows_under_linear_noise() {
    let params = DieznnParams::default().with_variant(Variant::Znn);
    let trace = residual_trace(&unit_system(), &params, &NoiseSpec::linear(1.0, 0.5)).unwrap();
    assert!(shows_unbounded_growth(&trace));
    let quiet = residual_trace(&unit_system(), &DieznnParams::default(), &NoiseSpec::linear(1.0, 0.5)).unwrap();
    assert!(!shows_unbounded_growth(&quiet));
}

#[test]
fn plain_znn_trace_is_monotone_without_noise() {
    let params = DieznnParams::default().with_variant(Variant::Znn);
    let trace = residual_trace(&unit_system(), &params, &NoiseSpec::none()).unwrap();
    assert!(trace.windows(2).all(|w| w[1].1 <= w[0].1));
}

/// Stated for every variant, but the default gains give a non-monotone
/// residual (zero crossings near s = 0.36 and 2.15).
#[test]
#[ignore = "default DIEZNN residual is not monotone; see default_dynamics_match_closed_form"]
fn dieznn_trace_is_monotone_after_transient() {
    let params = DieznnParams::default();
    let trace = residual_trace(&unit_system(), &params, &NoiseSpec::none()).unwrap();
    let start = trace.len() / 20;
    assert!(trace[start..].windows(2).all(|w| w[1].1 <= w[0].1));
}

fn blobs(n: usize, seed: u64) -> Vec<FeatureVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.3).unwrap();
    (0..2 * n)
        .map(|k| {
            let (label, centre) = if k % 2 == 0 { (Label::Cancer, 1.5) } else { (Label::NonCancer, -1.5) };
            let mut v = [0.0; 8];
            for (d, x) in v.iter_mut().enumerate() {
                *x = centre * (d as f64 + 1.0) + noise.sample(&mut rng) + 10.0 * d as f64;
            }
            FeatureVector::from_array(v, Some(label))
        })
        .collect()
}

#[test]
fn separable_blobs_are_learned() {
    let data = blobs(40, 3);
    let model = train(&data, &DieznnParams::default(), &NoiseSpec::none()).unwrap();
    assert!(model.final_residual <= 1e-4 * model.initial_residual);
    let correct = data.iter().filter(|f| predict(&model, f).0 == f.label.unwrap()).count();
    assert_eq!(correct, data.len());
}

#[test]
fn state_bookkeeping_is_consistent() {
    let data = blobs(10, 11);
    let standardizer = Standardizer::fit(&data).unwrap();
    let rows: Vec<_> = data.iter().map(|f| standardizer.transform(f)).collect();
    let sys = build_system(&rows, 1e-2).unwrap();
    let params = DieznnParams::default();
    let noise = NoiseSpec::linear(1.0, 0.5);
    let mut state = ZnnState::zero(&sys);
    for k in 1..=300u64 {
        state = dieznn_step(&state, &sys, &params, &noise).unwrap();
        assert_eq!(state.steps, k);
        assert!((state.clock - k as f64 * params.step_h).abs() <= 1e-12);
        for (r, e) in sys.residual(&state.weights).iter().zip(&state.error) {
            assert!((r - e).abs() <= 1e-10, "{r} vs {e}");
        }
    }
}

#[test]
fn standardizing_twice_is_identity() {
    let data = blobs(15, 5);
    let once: Vec<_> = {
        let s = Standardizer::fit(&data).unwrap();
        data.iter().map(|f| s.transform(f)).collect()
    };
    let again = Standardizer::fit(&once).unwrap();
    for f in &once {
        for (a, b) in again.transform(f).to_array().iter().zip(f.to_array()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}
