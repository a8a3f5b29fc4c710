//! Linear classifier trained by zeroing-neural-network dynamics.
//!
//! Training solves the ridge normal equations `A w = b` with
//! `A = XᵀX + λI`, `b = Xᵀy`. Rather than solving directly, the error
//! `T(s) = A w(s) - b` is driven to zero by
//!
//! ```text
//! dT/ds = -η T - φ ∫T - μ² ∬T + G(s)
//! ```
//!
//! where `G(s) = c0 + c1 s` is injected additive noise. The single integral
//! term rejects constant noise and the double integral rejects linear noise.
//! With `η = 2μ + 1`, `φ = μ² + 2μ` the characteristic roots are
//! `-1, -μ, -μ`. Weights are recovered from the error through one cached
//! Cholesky factorization of `A`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ewt_features::FeatureVector;
use crate::ingest::Label;
use crate::linalg::{Cholesky, SquareMatrix};
use crate::Scalar;

pub const FEATURE_DIM: usize = 8;
/// Features plus the bias column.
pub const SYSTEM_DIM: usize = FEATURE_DIM + 1;
pub const MODEL_FORMAT_VERSION: u32 = 1;

const STANDARDIZED_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum DieznnError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("gram matrix is not positive definite")]
    Singular,
    #[error("dynamics diverged at s = {clock} (params {params})")]
    Divergence {
        params: String,
        clock: f64,
        /// `(clock, residual norm)` up to the last finite step.
        trace: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `dT/ds = -η T`
    Znn,
    /// adds `-φ ∫T`
    Ieznn,
    /// adds `-φ ∫T - μ² ∬T`
    Dieznn,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Znn, Variant::Ieznn, Variant::Dieznn];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Znn => "znn",
            Variant::Ieznn => "ieznn",
            Variant::Dieznn => "dieznn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Scalar"))]
pub struct DieznnParams<T> {
    pub eta: T,
    pub phi: T,
    pub mu: T,
    pub step_h: T,
    pub horizon_s: T,
    pub ridge_lambda: T,
    pub variant: Variant,
    #[serde(default)]
    pub integrator: Integrator,
}

impl<T: Scalar> Default for DieznnParams<T> {
    fn default() -> Self {
        Self {
            eta: T::lit(5.0),
            phi: T::lit(8.0),
            mu: T::lit(2.0),
            step_h: T::lit(0.01),
            horizon_s: T::lit(10.0),
            ridge_lambda: T::lit(1e-2),
            variant: Variant::Dieznn,
            integrator: Integrator::Rk4,
        }
    }
}

impl<T: Scalar> DieznnParams<T> {
    /// Coefficients tied to `μ` so the error dynamics factor as `(λ+1)(λ+μ)²`.
    pub fn factored_poles(mu: T) -> Self {
        let two = T::lit(2.0);
        Self { eta: two * mu + T::one(), phi: mu * mu + two * mu, mu, ..Self::default() }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn steps(&self) -> usize {
        (self.horizon_s / self.step_h).round().to_usize().unwrap_or(0)
    }

    pub fn describe(&self) -> String {
        format!(
            "variant={} eta={} phi={} mu={} h={} S={} lambda={}",
            self.variant.as_str(),
            self.eta,
            self.phi,
            self.mu,
            self.step_h,
            self.horizon_s,
            self.ridge_lambda
        )
    }

    pub fn validate(&self) -> Result<(), DieznnError> {
        let bad = |msg: String| Err(DieznnError::InvalidParams(msg));
        let finite = [self.eta, self.phi, self.mu, self.step_h, self.horizon_s, self.ridge_lambda];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad(format!("non-finite parameter in {}", self.describe()));
        }
        if self.eta <= T::zero() {
            return bad(format!("eta must be > 0, got {}", self.eta));
        }
        if self.variant != Variant::Znn && self.phi <= T::zero() {
            return bad(format!("phi must be > 0, got {}", self.phi));
        }
        if self.variant == Variant::Dieznn && self.mu <= T::zero() {
            return bad(format!("mu must be > 0, got {}", self.mu));
        }
        if self.step_h <= T::zero() || self.horizon_s <= T::zero() {
            return bad("step and horizon must be > 0".into());
        }
        if self.step_h > self.horizon_s {
            return bad(format!("step {} exceeds horizon {}", self.step_h, self.horizon_s));
        }
        if self.step_h * self.eta >= T::lit(2.0) {
            return bad(format!("step*eta = {} must be < 2", self.step_h * self.eta));
        }
        if self.ridge_lambda < T::zero() {
            return bad(format!("ridge_lambda must be >= 0, got {}", self.ridge_lambda));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    None,
    Constant,
    Linear,
}

/// Additive noise `G(s) = c0 + c1 s` on every error component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Scalar"))]
pub struct NoiseSpec<T> {
    pub kind: NoiseKind,
    pub c0: T,
    pub c1: T,
}

impl<T: Scalar> Default for NoiseSpec<T> {
    fn default() -> Self {
        Self::none()
    }
}

impl<T: Scalar> NoiseSpec<T> {
    pub fn none() -> Self {
        Self { kind: NoiseKind::None, c0: T::zero(), c1: T::zero() }
    }

    pub fn constant(c0: T) -> Self {
        Self { kind: NoiseKind::Constant, c0, c1: T::zero() }
    }

    pub fn linear(c0: T, c1: T) -> Self {
        Self { kind: NoiseKind::Linear, c0, c1 }
    }

    pub fn at(&self, s: T) -> T {
        match self.kind {
            NoiseKind::None => T::zero(),
            NoiseKind::Constant => self.c0,
            NoiseKind::Linear => self.c0 + self.c1 * s,
        }
    }

    pub fn validate(&self) -> Result<(), DieznnError> {
        let ok = match self.kind {
            NoiseKind::None => self.c0 == T::zero() && self.c1 == T::zero(),
            NoiseKind::Constant => self.c1 == T::zero() && self.c0.is_finite(),
            NoiseKind::Linear => self.c0.is_finite() && self.c1.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(DieznnError::InvalidParams(format!("inconsistent noise spec {self:?}")))
        }
    }
}

/// Ridge normal equations with a cached factorization of the Gram matrix.
#[derive(Debug, Clone)]
pub struct LinearSystem<T> {
    gram: SquareMatrix<T>,
    target: Vec<T>,
    factor: Cholesky<T>,
}

impl<T: Scalar> LinearSystem<T> {
    pub fn new(gram: SquareMatrix<T>, target: Vec<T>) -> Result<Self, DieznnError> {
        if gram.dim() != target.len() {
            return Err(DieznnError::Training(format!(
                "gram is {0}x{0} but target has {1} entries",
                gram.dim(),
                target.len()
            )));
        }
        let factor = Cholesky::factor(&gram).ok_or(DieznnError::Singular)?;
        Ok(Self { gram, target, factor })
    }

    /// One-dimensional system `a w = b`.
    pub fn scalar(a: T, b: T) -> Result<Self, DieznnError> {
        Self::new(SquareMatrix::from_row_major(1, vec![a]).unwrap(), vec![b])
    }

    pub fn gram(&self) -> &SquareMatrix<T> {
        &self.gram
    }

    pub fn target(&self) -> &[T] {
        &self.target
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    /// `A w - b`.
    pub fn residual(&self, weights: &[T]) -> Vec<T> {
        self.gram.mul_vec(weights).into_iter().zip(&self.target).map(|(a, &b)| a - b).collect()
    }

    /// Weights whose residual equals `error`.
    pub fn weights_for_error(&self, error: &[T]) -> Vec<T> {
        let rhs: Vec<T> = error.iter().zip(&self.target).map(|(&e, &b)| e + b).collect();
        self.factor.solve(&rhs)
    }
}

/// Per-column affine map to zero mean and unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    pub mean: [T; FEATURE_DIM],
    pub scale: [T; FEATURE_DIM],
}

impl<T: Scalar> Standardizer<T> {
    /// Population statistics; constant columns keep scale 1.
    pub fn fit(rows: &[FeatureVector<T>]) -> Result<Self, DieznnError> {
        if rows.is_empty() {
            return Err(DieznnError::Training("cannot standardize zero samples".into()));
        }
        let n = T::from_usize_lossy(rows.len());
        let mut mean = [T::zero(); FEATURE_DIM];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.to_array()) {
                *m = *m + v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut var = [T::zero(); FEATURE_DIM];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.to_array()).zip(mean) {
                *s = *s + (v - m) * (v - m);
            }
        }
        let scale = var.map(|s| {
            let sd = (s / n).sqrt();
            if sd > T::lit(1e-12) {
                sd
            } else {
                T::one()
            }
        });
        Ok(Self { mean, scale })
    }

    pub fn identity() -> Self {
        Self { mean: [T::zero(); FEATURE_DIM], scale: [T::one(); FEATURE_DIM] }
    }

    pub fn transform(&self, f: &FeatureVector<T>) -> FeatureVector<T> {
        let mut values = f.to_array();
        for ((v, m), s) in values.iter_mut().zip(self.mean).zip(self.scale) {
            *v = (*v - m) / s;
        }
        FeatureVector { degenerate: f.degenerate, ..FeatureVector::from_array(values, f.label) }
    }
}

fn encode(label: Label) -> f64 {
    match label {
        Label::Cancer => 1.0,
        Label::NonCancer => -1.0,
    }
}

fn check_standardized<T: Scalar>(rows: &[FeatureVector<T>]) -> Result<(), DieznnError> {
    let n = T::from_usize_lossy(rows.len());
    let tol = T::lit(STANDARDIZED_TOL);
    for col in 0..FEATURE_DIM {
        let mean = rows.iter().fold(T::zero(), |s, r| s + r.to_array()[col]) / n;
        let var = rows.iter().fold(T::zero(), |s, r| {
            let d = r.to_array()[col] - mean;
            s + d * d
        }) / n;
        if mean.abs() > tol || !((var - T::one()).abs() <= tol || var <= tol) {
            return Err(DieznnError::Training(format!(
                "feature column {} is not standardized (mean {mean}, variance {var})",
                FeatureVector::<T>::NAMES[col]
            )));
        }
    }
    Ok(())
}

/// Builds `A = XᵀX + λI`, `b = Xᵀy` from standardized, labeled features
/// (`y = +1` for cancer, `-1` otherwise; last column of `X` is constant 1).
pub fn build_system<T: Scalar>(rows: &[FeatureVector<T>], ridge_lambda: T) -> Result<LinearSystem<T>, DieznnError> {
    if rows.len() < 2 {
        return Err(DieznnError::Training(format!("need at least 2 samples, got {}", rows.len())));
    }
    let labels: Vec<Label> = rows
        .iter()
        .map(|r| r.label.ok_or_else(|| DieznnError::Training("unlabeled training sample".into())))
        .collect::<Result<_, _>>()?;
    if !Label::ALL.iter().all(|l| labels.contains(l)) {
        return Err(DieznnError::Training("training data must contain both classes".into()));
    }
    if ridge_lambda < T::zero() {
        return Err(DieznnError::InvalidParams(format!("ridge_lambda must be >= 0, got {ridge_lambda}")));
    }
    check_standardized(rows)?;

    let mut gram = SquareMatrix::zeros(SYSTEM_DIM);
    let mut target = vec![T::zero(); SYSTEM_DIM];
    for (row, label) in rows.iter().zip(labels) {
        let x = design_row(row);
        let y = T::lit(encode(label));
        for i in 0..SYSTEM_DIM {
            target[i] = target[i] + x[i] * y;
            for j in 0..SYSTEM_DIM {
                gram[(i, j)] = gram[(i, j)] + x[i] * x[j];
            }
        }
    }
    for i in 0..SYSTEM_DIM {
        gram[(i, i)] = gram[(i, i)] + ridge_lambda;
    }
    LinearSystem::new(gram, target)
}

fn design_row<T: Scalar>(f: &FeatureVector<T>) -> [T; SYSTEM_DIM] {
    let mut x = [T::one(); SYSTEM_DIM];
    x[..FEATURE_DIM].copy_from_slice(&f.to_array());
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZnnState<T> {
    pub weights: Vec<T>,
    /// `T(s) = A w(s) - b`
    pub error: Vec<T>,
    pub integral: Vec<T>,
    pub double_integral: Vec<T>,
    pub clock: T,
    pub steps: u64,
}

impl<T: Scalar> ZnnState<T> {
    /// Starts from the given weights with empty integral accumulators.
    pub fn start(system: &LinearSystem<T>, weights: Vec<T>) -> Self {
        let error = system.residual(&weights);
        let d = system.dim();
        Self {
            weights,
            error,
            integral: vec![T::zero(); d],
            double_integral: vec![T::zero(); d],
            clock: T::zero(),
            steps: 0,
        }
    }

    /// `w(0) = 0`, hence `T(0) = -b`.
    pub fn zero(system: &LinearSystem<T>) -> Self {
        Self::start(system, vec![T::zero(); system.dim()])
    }

    pub fn residual_norm(&self) -> T {
        self.error.iter().fold(T::zero(), |s, &e| s + e * e).sqrt()
    }
}

/// Right-hand side of the error dynamics for one component.
#[inline]
fn error_rate<T: Scalar>(p: &DieznnParams<T>, g: T, e: T, i: T, j: T) -> T {
    let mut rate = -p.eta * e + g;
    if p.variant != Variant::Znn {
        rate = rate - p.phi * i;
    }
    if p.variant == Variant::Dieznn {
        rate = rate - p.mu * p.mu * j;
    }
    rate
}

/// Advances the error dynamics by one step of `params.step_h`.
pub fn dieznn_step<T: Scalar>(
    state: &ZnnState<T>,
    system: &LinearSystem<T>,
    params: &DieznnParams<T>,
    noise: &NoiseSpec<T>,
) -> Result<ZnnState<T>, DieznnError> {
    let h = params.step_h;
    let s = state.clock;
    let d = state.error.len();
    let mut error = Vec::with_capacity(d);
    let mut integral = Vec::with_capacity(d);
    let mut double_integral = Vec::with_capacity(d);
    match params.integrator {
        Integrator::Euler => {
            let g = noise.at(s);
            for k in 0..d {
                let (e, i, j) = (state.error[k], state.integral[k], state.double_integral[k]);
                error.push(e + h * error_rate(params, g, e, i, j));
                integral.push(i + h * e);
                double_integral.push(j + h * i);
            }
        }
        Integrator::Rk4 => {
            let half = T::lit(0.5);
            let sixth = T::one() / T::lit(6.0);
            let two = T::lit(2.0);
            let (g0, g_mid, g1) = (noise.at(s), noise.at(s + half * h), noise.at(s + h));
            for k in 0..d {
                let (e, i, j) = (state.error[k], state.integral[k], state.double_integral[k]);
                // state (e, i, j) evolves as (rate, e, i)
                let k1 = (error_rate(params, g0, e, i, j), e, i);
                let (e2, i2, j2) = (e + half * h * k1.0, i + half * h * k1.1, j + half * h * k1.2);
                let k2 = (error_rate(params, g_mid, e2, i2, j2), e2, i2);
                let (e3, i3, j3) = (e + half * h * k2.0, i + half * h * k2.1, j + half * h * k2.2);
                let k3 = (error_rate(params, g_mid, e3, i3, j3), e3, i3);
                let (e4, i4, j4) = (e + h * k3.0, i + h * k3.1, j + h * k3.2);
                let k4 = (error_rate(params, g1, e4, i4, j4), e4, i4);
                error.push(e + h * sixth * (k1.0 + two * k2.0 + two * k3.0 + k4.0));
                integral.push(i + h * sixth * (k1.1 + two * k2.1 + two * k3.1 + k4.1));
                double_integral.push(j + h * sixth * (k1.2 + two * k2.2 + two * k3.2 + k4.2));
            }
        }
    }
    let steps = state.steps + 1;
    let clock = T::from_u64(steps).unwrap() * h;
    if error.iter().chain(&integral).chain(&double_integral).any(|v| !v.is_finite()) {
        return Err(DieznnError::Divergence { params: params.describe(), clock: clock.to_f64_lossy(), trace: Vec::new() });
    }
    let weights = system.weights_for_error(&error);
    Ok(ZnnState { weights, error, integral, double_integral, clock, steps })
}

/// Runs from `w(0) = 0` to the horizon, recording every state's residual.
fn integrate<T: Scalar>(
    system: &LinearSystem<T>,
    params: &DieznnParams<T>,
    noise: &NoiseSpec<T>,
) -> Result<(ZnnState<T>, Vec<(T, T)>), DieznnError> {
    params.validate()?;
    noise.validate()?;
    let mut state = ZnnState::zero(system);
    let mut trace = Vec::with_capacity(params.steps() + 1);
    trace.push((state.clock, state.residual_norm()));
    for _ in 0..params.steps() {
        state = match dieznn_step(&state, system, params, noise) {
            Ok(next) => next,
            Err(DieznnError::Divergence { params, clock, .. }) => {
                let trace = trace.iter().map(|&(c, r): &(T, T)| (c.to_f64_lossy(), r.to_f64_lossy())).collect();
                return Err(DieznnError::Divergence { params, clock, trace });
            }
            Err(e) => return Err(e),
        };
        trace.push((state.clock, state.residual_norm()));
    }
    Ok((state, trace))
}

/// `(clock, ‖T‖)` at every step from `w(0) = 0`.
pub fn residual_trace<T: Scalar>(
    system: &LinearSystem<T>,
    params: &DieznnParams<T>,
    noise: &NoiseSpec<T>,
) -> Result<Vec<(T, T)>, DieznnError> {
    integrate(system, params, noise).map(|(_, trace)| trace)
}

/// True when the residual keeps rising through the second half of the run:
/// `r(S/2) < r(3S/4) < r(S)` with at least 1% growth per quarter.
pub fn shows_unbounded_growth<T: Scalar>(trace: &[(T, T)]) -> bool {
    let n = trace.len();
    if n < 4 {
        return false;
    }
    let at = |frac: usize| trace[(n - 1) * frac / 4].1;
    let grow = T::lit(1.01);
    at(3) > at(2) * grow && at(4) > at(3) * grow
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct ClassifierModel<T> {
    pub format_version: u32,
    pub weights: [T; FEATURE_DIM],
    pub bias: T,
    pub threshold: T,
    pub standardizer: Standardizer<T>,
    pub params: DieznnParams<T>,
    pub noise: NoiseSpec<T>,
    pub initial_residual: T,
    pub final_residual: T,
    pub training_trace: Vec<(T, T)>,
}

impl<T: Scalar> ClassifierModel<T> {
    /// Score of an already standardized feature vector.
    pub fn score_standardized(&self, x: &FeatureVector<T>) -> T {
        x.to_array().iter().zip(&self.weights).fold(self.bias, |s, (&xi, &wi)| s + xi * wi)
    }
}

/// Standardizes, builds the normal equations and evolves the error to the horizon.
pub fn train<T: Scalar>(
    features: &[FeatureVector<T>],
    params: &DieznnParams<T>,
    noise: &NoiseSpec<T>,
) -> Result<ClassifierModel<T>, DieznnError> {
    params.validate()?;
    let standardizer = Standardizer::fit(features)?;
    let rows: Vec<_> = features.iter().map(|f| standardizer.transform(f)).collect();
    let system = build_system(&rows, params.ridge_lambda)?;
    let (state, trace) = integrate(&system, params, noise)?;
    let mut weights = [T::zero(); FEATURE_DIM];
    weights.copy_from_slice(&state.weights[..FEATURE_DIM]);
    Ok(ClassifierModel {
        format_version: MODEL_FORMAT_VERSION,
        weights,
        bias: state.weights[FEATURE_DIM],
        threshold: T::zero(),
        standardizer,
        params: *params,
        noise: *noise,
        initial_residual: trace[0].1,
        final_residual: state.residual_norm(),
        training_trace: trace,
    })
}

/// Label and score for raw (unstandardized) features. A score equal to the
/// threshold is classified as non-cancer.
pub fn predict<T: Scalar>(model: &ClassifierModel<T>, features: &FeatureVector<T>) -> (Label, T) {
    let score = model.score_standardized(&model.standardizer.transform(features));
    let label = if score > model.threshold { Label::Cancer } else { Label::NonCancer };
    (label, score)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(values: [f64; 8], label: Label) -> FeatureVector<f64> {
        FeatureVector::from_array(values, Some(label))
    }

    #[test]
    fn zero_error_is_equilibrium() {
        let sys = LinearSystem::scalar(2.0, 1.0).unwrap();
        let params = DieznnParams::default();
        let mut state = ZnnState::start(&sys, vec![0.5]);
        assert_eq!(state.error, vec![0.0]);
        for _ in 0..100 {
            state = dieznn_step(&state, &sys, &params, &NoiseSpec::none()).unwrap();
        }
        assert_eq!(state.error, vec![0.0]);
        assert!((state.weights[0] - 0.5f64).abs() < 1e-15);
    }

    #[test]
    fn two_sample_gram_by_hand() {
        let rows = [
            fv([1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], Label::Cancer),
            fv([-1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], Label::NonCancer),
        ];
        let sys = build_system(&rows, 0.5).unwrap();
        let g = sys.gram();
        assert_eq!(g[(0, 0)], 2.5);
        assert_eq!(g[(0, 1)], -2.0);
        assert_eq!(g[(1, 1)], 2.5);
        assert_eq!(g[(0, 8)], 0.0);
        assert_eq!(g[(8, 8)], 2.5);
        assert_eq!(g[(3, 3)], 0.5);
        assert_eq!(sys.target()[0], 2.0);
        assert_eq!(sys.target()[1], -2.0);
        assert_eq!(sys.target()[8], 0.0);
    }

    #[test]
    fn ridge_adds_lambda_to_diagonal() {
        let rows = [
            fv([1.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0], Label::Cancer),
            fv([-1.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0], Label::NonCancer),
        ];
        let a = build_system(&rows, 0.25).unwrap();
        let b = build_system(&rows, 1.25).unwrap();
        for i in 0..SYSTEM_DIM {
            for j in 0..SYSTEM_DIM {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(b.gram()[(i, j)] - a.gram()[(i, j)], want);
            }
        }
    }

    #[test]
    fn unstandardized_and_single_class_rejected() {
        let raw = [fv([3.0; 8], Label::Cancer), fv([5.0; 8], Label::NonCancer)];
        assert!(matches!(build_system(&raw, 0.1), Err(DieznnError::Training(_))));
        let one = [fv([1.0; 8], Label::Cancer), fv([-1.0; 8], Label::Cancer)];
        assert!(matches!(build_system(&one, 0.1), Err(DieznnError::Training(_))));
    }

    #[test]
    fn param_guards() {
        let p = DieznnParams::<f64> { step_h: 0.5, eta: 4.0, ..Default::default() };
        assert!(p.validate().is_err());
        let p = DieznnParams::<f64> { step_h: 20.0, ..Default::default() };
        assert!(p.validate().is_err());
        let p = DieznnParams::<f64> { phi: 0.0, mu: 0.0, ..Default::default() }.with_variant(Variant::Znn);
        assert!(p.validate().is_ok());
        assert!(p.with_variant(Variant::Dieznn).validate().is_err());
    }

    #[test]
    fn eq21_preset_matches_defaults_at_mu_two() {
        let p = DieznnParams::<f64>::factored_poles(2.0);
        let d = DieznnParams::<f64>::default();
        assert_eq!((p.eta, p.phi, p.mu), (d.eta, d.phi, d.mu));
    }

    #[test]
    fn divergence_reports_partial_trace() {
        let sys = LinearSystem::scalar(1.0, 1.0).unwrap();
        let params = DieznnParams {
            eta: 1.0,
            phi: 1e6,
            step_h: 0.1,
            horizon_s: 1000.0,
            integrator: Integrator::Euler,
            variant: Variant::Ieznn,
            ..Default::default()
        };
        match residual_trace(&sys, &params, &NoiseSpec::none()) {
            Err(DieznnError::Divergence { trace, params, .. }) => {
                assert!(!trace.is_empty());
                assert!(params.contains("phi=1000000"));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn zero_model_ties_to_noncancer() {
        let model = ClassifierModel {
            format_version: MODEL_FORMAT_VERSION,
            weights: [0.0; 8],
            bias: 0.0,
            threshold: 0.0,
            standardizer: Standardizer::identity(),
            params: DieznnParams::default(),
            noise: NoiseSpec::none(),
            initial_residual: 1.0,
            final_residual: 1.0,
            training_trace: vec![],
        };
        assert_eq!(predict(&model, &fv([0.3; 8], Label::Cancer)), (Label::NonCancer, 0.0));
    }

    #[test]
    fn noise_spec_consistency() {
        assert!(NoiseSpec { kind: NoiseKind::None, c0: 1.0, c1: 0.0 }.validate().is_err());
        assert!(NoiseSpec::linear(1.0, 0.5).validate().is_ok());
        assert_eq!(NoiseSpec::linear(1.0, 0.5).at(2.0), 2.0);
    }
}
