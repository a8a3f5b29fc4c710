//! Artificial lizard search optimization (minimization over a box).
//!
//! Each lizard carries a position, body and tail angles and a torque.
//! An iteration resamples every torque, runs an exploration jump (an angular
//! update followed by a bounded step along a direction set by the angles) and
//! an exploitation jump that contracts the position towards the best known
//! point `kbest`:
//!
//! ```text
//! x <- x + torque * 0.3 * |Δangle| * r * (kbest - x)
//! ```
//!
//! with `Δangle` the wrapped body/tail angle difference and `r ~ U(0, 1)`.
//! Random draws for lizard `u` at iteration `l` come from a stream keyed by
//! `(seed, u, l)`, so fitness evaluation can run in parallel without changing
//! results.

use std::fmt::Display;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum AlsoaError {
    #[error("invalid ALSOA configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lizard<T> {
    pub position: Vec<T>,
    pub body_angle: T,
    pub tail_angle: T,
    pub torque: T,
    /// `None` until evaluated.
    pub fitness: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlsoaConfig<T> {
    pub population_m: usize,
    /// Per-dimension `(low, high)`; the search dimension is `bounds.len()`.
    pub bounds: Vec<(T, T)>,
    pub max_iterations: usize,
    pub seed: u64,
    /// Contraction constant of the exploitation jump.
    pub exploit_scale: T,
    /// Initial exploration step as a fraction of the bound width; decays
    /// quadratically to zero over the run.
    pub explore_scale: T,
}

impl<T: Scalar> AlsoaConfig<T> {
    pub fn new(bounds: Vec<(T, T)>, seed: u64) -> Self {
        Self {
            population_m: 20,
            bounds,
            max_iterations: 50,
            seed,
            exploit_scale: T::lit(0.3),
            explore_scale: T::lit(0.2),
        }
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<(), AlsoaError> {
        if self.population_m < 2 {
            return Err(AlsoaError::Config(format!("population must be >= 2, got {}", self.population_m)));
        }
        if self.bounds.is_empty() {
            return Err(AlsoaError::Config("at least one search dimension required".into()));
        }
        for (v, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(AlsoaError::Config(format!("dimension {v}: bounds ({lo}, {hi}) need low < high")));
            }
        }
        if !(self.exploit_scale > T::zero() && self.explore_scale >= T::zero() && self.explore_scale <= T::one()) {
            return Err(AlsoaError::Config("exploit_scale must be > 0 and explore_scale in [0, 1]".into()));
        }
        Ok(())
    }

    fn width(&self, v: usize) -> T {
        self.bounds[v].1 - self.bounds[v].0
    }

    fn mean_width(&self) -> T {
        (0..self.dims()).fold(T::zero(), |s, v| s + self.width(v)) / T::from_usize_lossy(self.dims())
    }

    fn clamp(&self, v: usize, x: T) -> T {
        x.max(self.bounds[v].0).min(self.bounds[v].1)
    }

    /// Exploration step fraction at `iteration` of `max_iterations`.
    pub fn explore_fraction(&self, iteration: usize) -> T {
        let progress = T::from_usize_lossy(iteration) / T::from_usize_lossy(self.max_iterations.max(1) + 1);
        let rest = T::one() - progress;
        self.explore_scale * rest * rest
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlsoaResult<T> {
    pub best_position: Vec<T>,
    pub best_fitness: T,
    /// Best-so-far fitness after initialization (index 0) and each iteration.
    pub history: Vec<T>,
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let tau = T::TAU();
    let w = a % tau;
    let w = if w < T::zero() { w + tau } else { w };
    // `w + tau` can round up to exactly tau
    if w >= tau {
        T::zero()
    } else {
        w
    }
}

/// Signed difference `a - b` wrapped into `(-π, π]`.
pub fn angle_difference<T: Scalar>(a: T, b: T) -> T {
    let d = wrap_angle(a - b);
    if d > T::PI() {
        d - T::TAU()
    } else {
        d
    }
}

fn uniform_unit<T: Scalar>(rng: &mut impl Rng) -> T {
    T::lit(rng.random::<f64>())
}

/// Torque draw in `(0, 1]`.
fn draw_torque<T: Scalar>(rng: &mut impl Rng) -> T {
    T::one() - uniform_unit::<T>(rng)
}

pub fn init_population<T: Scalar>(config: &AlsoaConfig<T>) -> Result<Vec<Lizard<T>>, AlsoaError> {
    config.validate()?;
    Ok((0..config.population_m)
        .map(|u| {
            let mut rng = seed::stream(config.seed, u as u64, 0);
            let position = config
                .bounds
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * uniform_unit::<T>(&mut rng))
                .collect();
            Lizard {
                position,
                body_angle: T::TAU() * uniform_unit::<T>(&mut rng),
                tail_angle: T::TAU() * uniform_unit::<T>(&mut rng),
                torque: draw_torque(&mut rng),
                fitness: None,
            }
        })
        .collect())
}

/// Fitness of `position`; errors and non-finite values become `+inf`.
pub fn evaluate_fitness<T, E, F>(position: &[T], objective: &F) -> T
where
    T: Scalar,
    E: Display,
    F: Fn(&[T]) -> Result<T, E>,
{
    match objective(position) {
        Ok(v) if v.is_finite() => v,
        Ok(v) => {
            log::debug!("non-finite fitness {v} at {position:?}");
            T::infinity()
        }
        Err(e) => {
            log::warn!("fitness evaluation failed at {position:?}: {e}");
            T::infinity()
        }
    }
}

/// Angular update and bounded jump.
///
/// The angle increments follow the derivative structure
/// `[θb, (θb² - y)/(w - f), θt, (-θt² + z)/(w - f)]` with `y = z` the mean
/// position mapped onto `[0, 2π]`, `w - f` the mean bound width, plus a
/// uniform jitter in `[-π, π)`. The jump moves every coordinate by at most
/// `torque * step_fraction * width` along a unit direction built from the
/// new angles.
pub fn explore_step<T: Scalar>(
    lizard: &Lizard<T>,
    config: &AlsoaConfig<T>,
    step_fraction: T,
    rng: &mut impl Rng,
) -> Lizard<T> {
    let dims = config.dims();
    let tau = T::TAU();
    let projected = (0..dims).fold(T::zero(), |s, v| {
        s + (lizard.position[v] - config.bounds[v].0) / config.width(v)
    }) / T::from_usize_lossy(dims)
        * tau;
    let span = config.mean_width();
    let (b, t) = (lizard.body_angle, lizard.tail_angle);
    let body_rate = (b * b - projected) / span;
    let tail_rate = (-(t * t) + projected) / span;
    let jitter_b = T::PI() * (T::lit(2.0) * uniform_unit::<T>(rng) - T::one());
    let jitter_t = T::PI() * (T::lit(2.0) * uniform_unit::<T>(rng) - T::one());
    let body_angle = wrap_angle(b + body_rate + jitter_b);
    let tail_angle = wrap_angle(t + tail_rate + jitter_t);

    let raw: Vec<T> = (0..dims)
        .map(|v| match v {
            0 => body_angle.cos(),
            _ => (body_angle + T::from_usize_lossy(v) * (tail_angle + T::FRAC_PI_2())).cos(),
        })
        .collect();
    let norm = raw.iter().fold(T::zero(), |s, &c| s + c * c).sqrt();
    let step = lizard.torque * step_fraction;
    let position = if norm > T::lit(1e-12) && step > T::zero() {
        raw.iter()
            .enumerate()
            .map(|(v, &c)| config.clamp(v, lizard.position[v] + step * config.width(v) * c / norm))
            .collect()
    } else {
        lizard.position.clone()
    };
    Lizard { position, body_angle, tail_angle, torque: lizard.torque, fitness: None }
}

/// Contraction towards `kbest` with an explicit uniform draw `r`.
pub fn exploit_with_draw<T: Scalar>(lizard: &Lizard<T>, kbest: &[T], config: &AlsoaConfig<T>, r: T) -> Lizard<T> {
    let delta = angle_difference(lizard.body_angle, lizard.tail_angle).abs();
    let factor = lizard.torque * config.exploit_scale * delta * r;
    let position = lizard
        .position
        .iter()
        .zip(kbest)
        .enumerate()
        .map(|(v, (&x, &best))| config.clamp(v, x + factor * (best - x)))
        .collect();
    Lizard { position, fitness: None, ..lizard.clone() }
}

pub fn exploit_step<T: Scalar>(
    lizard: &Lizard<T>,
    kbest: &[T],
    config: &AlsoaConfig<T>,
    rng: &mut impl Rng,
) -> Lizard<T> {
    exploit_with_draw(lizard, kbest, config, uniform_unit(rng))
}

/// Index of the first strictly smallest fitness.
fn argmin_first<T: Scalar>(pop: &[Lizard<T>]) -> usize {
    let mut best = 0;
    for (u, l) in pop.iter().enumerate() {
        if l.fitness.unwrap_or(T::infinity()) < pop[best].fitness.unwrap_or(T::infinity()) {
            best = u;
        }
    }
    best
}

fn evaluate_all<T, E, F>(pop: &mut [Lizard<T>], objective: &F)
where
    T: Scalar,
    E: Display,
    F: Fn(&[T]) -> Result<T, E> + Sync,
{
    pop.par_iter_mut().for_each(|l| l.fitness = Some(evaluate_fitness(&l.position, objective)));
}

pub fn optimize<T, E, F>(objective: &F, config: &AlsoaConfig<T>) -> Result<AlsoaResult<T>, AlsoaError>
where
    T: Scalar,
    E: Display,
    F: Fn(&[T]) -> Result<T, E> + Sync,
{
    let mut pop = init_population(config)?;
    evaluate_all(&mut pop, objective);
    let first = argmin_first(&pop);
    let mut best_position = pop[first].position.clone();
    let mut best_fitness = pop[first].fitness.unwrap();
    let mut history = Vec::with_capacity(config.max_iterations + 1);
    history.push(best_fitness);

    for iteration in 1..=config.max_iterations {
        let fraction = config.explore_fraction(iteration);
        let kbest = best_position.clone();
        pop = pop
            .iter()
            .enumerate()
            .map(|(u, l)| {
                let mut rng = seed::stream(config.seed, u as u64, iteration as u64);
                let mut l = Lizard { torque: draw_torque(&mut rng), ..l.clone() };
                l = explore_step(&l, config, fraction, &mut rng);
                exploit_step(&l, &kbest, config, &mut rng)
            })
            .collect();
        evaluate_all(&mut pop, objective);
        let u = argmin_first(&pop);
        let f = pop[u].fitness.unwrap();
        if f < best_fitness {
            best_fitness = f;
            best_position = pop[u].position.clone();
        }
        history.push(best_fitness);
    }
    Ok(AlsoaResult { best_position, best_fitness, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn sphere(x: &[f64]) -> Result<f64, Infallible> {
        Ok(x.iter().map(|v| v * v).sum())
    }

    fn lizard(position: Vec<f64>, body: f64, tail: f64, torque: f64) -> Lizard<f64> {
        Lizard { position, body_angle: body, tail_angle: tail, torque, fitness: None }
    }

    #[test]
    fn init_within_bounds_and_deterministic() {
        let mut cfg = AlsoaConfig::new(vec![(0.0, 10.0)], 5);
        cfg.population_m = 3;
        let pop = init_population(&cfg).unwrap();
        assert_eq!(pop.len(), 3);
        for l in &pop {
            assert!((0.0..=10.0).contains(&l.position[0]));
            assert!(l.torque > 0.0 && l.torque <= 1.0);
            assert!((0.0..std::f64::consts::TAU).contains(&l.body_angle));
        }
        assert_eq!(init_population(&cfg).unwrap(), pop);
    }

    #[test]
    fn degenerate_bounds_rejected() {
        let cfg = AlsoaConfig::new(vec![(1.0, 1.0)], 0);
        assert!(matches!(init_population(&cfg), Err(AlsoaError::Config(_))));
    }

    #[test]
    fn sphere_origin_fitness_zero() {
        assert_eq!(evaluate_fitness(&[0.0, 0.0], &sphere), 0.0);
    }

    #[test]
    fn failing_or_nan_objective_is_infinite() {
        let failing = |_: &[f64]| Err::<f64, _>("boom");
        assert_eq!(evaluate_fitness(&[1.0], &failing), f64::INFINITY);
        let nan = |_: &[f64]| Ok::<f64, Infallible>(f64::NAN);
        assert_eq!(evaluate_fitness(&[1.0], &nan), f64::INFINITY);
    }

    #[test]
    fn zero_torque_explore_keeps_position() {
        let cfg = AlsoaConfig::new(vec![(-5.0, 5.0), (-5.0, 5.0)], 1);
        let l = lizard(vec![1.0, -2.0], 0.0, 0.0, 0.0);
        let out = explore_step(&l, &cfg, 1.0, &mut seed::stream(1, 2, 3));
        assert_eq!(out.position, l.position);
    }

    #[test]
    fn exploit_fixed_points() {
        let cfg = AlsoaConfig::new(vec![(-5.0, 5.0)], 1);
        let l = lizard(vec![2.0], 0.3, 2.5, 0.9);
        assert_eq!(exploit_with_draw(&l, &[2.0], &cfg, 0.7).position, vec![2.0]);
        assert_eq!(exploit_with_draw(&l, &[-3.0], &cfg, 0.0).position, vec![2.0]);
    }

    #[test]
    fn exploit_contracts_scalar() {
        let cfg = AlsoaConfig::new(vec![(-5.0, 5.0)], 1);
        let l = lizard(vec![4.0], 3.0, 1.0, 0.8);
        let r = 0.6;
        let factor = 0.8 * 0.3 * 2.0 * r;
        let out = exploit_with_draw(&l, &[-1.0], &cfg, r);
        assert!((out.position[0] - (4.0 + factor * (-5.0))).abs() < 1e-12);
        assert!((out.position[0] + 1.0).abs() < 5.0);
    }

    #[test]
    fn zero_iterations_returns_initial_best() {
        let mut cfg = AlsoaConfig::new(vec![(-5.0, 5.0), (-5.0, 5.0)], 11);
        cfg.max_iterations = 0;
        let res = optimize(&sphere, &cfg).unwrap();
        let pop = init_population(&cfg).unwrap();
        let best = pop.iter().map(|l| sphere(&l.position).unwrap()).fold(f64::INFINITY, f64::min);
        assert_eq!(res.best_fitness, best);
        assert_eq!(res.history, vec![best]);
    }

    #[test]
    fn wrap_angle_range() {
        for a in [-100.0, -1e-18, 0.0, 6.283185307179586, 1e6] {
            let w = wrap_angle(a);
            assert!((0.0..std::f64::consts::TAU).contains(&w), "{a} -> {w}");
        }
        assert!((angle_difference(0.1, 6.2) - (0.1 - 6.2 + std::f64::consts::TAU)).abs() < 1e-12);
    }
}
