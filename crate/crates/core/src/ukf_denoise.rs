//! Scanline unscented Kalman filtering for image denoising.
//!
//! Each scanline is treated as a time series observed through the identity
//! measurement map, with a random-walk state model. The sigma-point set uses
//! the symmetric `2m + 1` construction: the mean, then the mean plus and minus
//! each column of the Cholesky factor of `(m + beta) * P`. Offset points carry
//! weight `1 / (2 (m + beta))` and the centre carries `beta / (m + beta)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{clamp_unit, GrayImage};
use crate::linalg::{Cholesky, SquareMatrix};
use crate::Scalar;

/// Pivot tolerance when factoring covariances.
const PSD_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum UkfError {
    #[error("covariance is not positive semidefinite")]
    NotPositiveSemidefinite,
    #[error("invalid UKF parameters: {0}")]
    InvalidParams(String),
    #[error("state dimension mismatch: mean has {mean}, covariance has {cov}")]
    DimensionMismatch { mean: usize, cov: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanPasses {
    Rows,
    Columns,
    RowsThenColumnsAveraged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Scalar"))]
pub struct UkfParams<T> {
    /// Sigma-point spread.
    pub beta: T,
    /// Random-walk variance added per step.
    pub process_noise_q: T,
    pub measurement_noise_r: T,
    pub passes: ScanPasses,
}

impl<T: Scalar> Default for UkfParams<T> {
    fn default() -> Self {
        Self {
            beta: T::lit(2.0),
            process_noise_q: T::lit(1e-4),
            measurement_noise_r: T::lit(1e-2),
            passes: ScanPasses::RowsThenColumnsAveraged,
        }
    }
}

impl<T: Scalar> UkfParams<T> {
    pub fn validate(&self) -> Result<(), UkfError> {
        if !(self.beta > T::zero() && self.beta.is_finite()) {
            return Err(UkfError::InvalidParams(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.process_noise_q >= T::zero() && self.process_noise_q.is_finite()) {
            return Err(UkfError::InvalidParams(format!("q must be >= 0, got {}", self.process_noise_q)));
        }
        if !(self.measurement_noise_r > T::zero()) {
            return Err(UkfError::InvalidParams(format!("R must be > 0, got {}", self.measurement_noise_r)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPointSet<T> {
    pub points: Vec<Vec<T>>,
    pub weights: Vec<T>,
}

impl<T> SigmaPointSet<T> {
    pub fn count(&self) -> usize {
        self.points.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UkfState<T> {
    pub mean: Vec<T>,
    pub covariance: SquareMatrix<T>,
    pub step: u64,
}

impl<T: Scalar> UkfState<T> {
    pub fn new(mean: Vec<T>, covariance: SquareMatrix<T>) -> Result<Self, UkfError> {
        if mean.len() != covariance.dim() {
            return Err(UkfError::DimensionMismatch { mean: mean.len(), cov: covariance.dim() });
        }
        Ok(Self { mean, covariance, step: 0 })
    }

    pub fn scalar(mean: T, variance: T) -> Self {
        Self {
            mean: vec![mean],
            covariance: SquareMatrix::from_row_major(1, vec![variance]).unwrap(),
            step: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

pub fn generate_sigma_points<T: Scalar>(state: &UkfState<T>, beta: T) -> Result<SigmaPointSet<T>, UkfError> {
    let m = state.dim();
    let spread = T::from_usize_lossy(m) + beta;
    let chol = Cholesky::factor_semidefinite(&state.covariance.scaled(spread), T::lit(PSD_TOL))
        .ok_or(UkfError::NotPositiveSemidefinite)?;
    let l = chol.lower();

    let mut points = Vec::with_capacity(2 * m + 1);
    points.push(state.mean.clone());
    for sign in [T::one(), -T::one()] {
        for col in 0..m {
            points.push((0..m).map(|row| state.mean[row] + sign * l[(row, col)]).collect());
        }
    }
    let offset_weight = T::one() / (T::lit(2.0) * spread);
    let mut weights = vec![offset_weight; 2 * m + 1];
    weights[0] = beta / spread;
    Ok(SigmaPointSet { points, weights })
}

/// One predict/correct cycle with a random-walk model and scalar measurement
/// of the first state component.
pub fn unscented_update<T: Scalar>(
    state: &UkfState<T>,
    measurement: T,
    params: &UkfParams<T>,
) -> Result<UkfState<T>, UkfError> {
    let m = state.dim();
    let mut prior = state.covariance.clone();
    for i in 0..m {
        prior[(i, i)] = prior[(i, i)] + params.process_noise_q;
    }
    let predicted = UkfState { mean: state.mean.clone(), covariance: prior, step: state.step };
    let sigma = generate_sigma_points(&predicted, params.beta)?;

    // measurement map: identity on the first component
    let z: Vec<T> = sigma.points.iter().map(|p| p[0]).collect();
    let z_hat = sigma.weights.iter().zip(&z).fold(T::zero(), |acc, (&w, &zi)| acc + w * zi);

    let mut innovation_var = params.measurement_noise_r;
    let mut cross = vec![T::zero(); m];
    for ((w, zi), point) in sigma.weights.iter().zip(&z).zip(&sigma.points) {
        let dz = *zi - z_hat;
        innovation_var = innovation_var + *w * dz * dz;
        for (c, (&x, &mx)) in cross.iter_mut().zip(point.iter().zip(&predicted.mean)) {
            *c = *c + *w * (x - mx) * dz;
        }
    }

    let gain: Vec<T> = cross.iter().map(|&c| c / innovation_var).collect();
    let innovation = measurement - z_hat;
    let mean = predicted.mean.iter().zip(&gain).map(|(&x, &k)| x + k * innovation).collect();
    let mut covariance = predicted.covariance;
    for i in 0..m {
        for j in 0..m {
            covariance[(i, j)] = covariance[(i, j)] - gain[i] * innovation_var * gain[j];
        }
    }
    covariance.symmetrize();
    Ok(UkfState { mean, covariance, step: state.step + 1 })
}

/// Filters one scanline and returns the per-sample posterior means.
pub fn filter_scanline<T: Scalar>(line: &[T], params: &UkfParams<T>) -> Result<Vec<T>, UkfError> {
    let Some(&first) = line.first() else {
        return Ok(Vec::new());
    };
    let mut state = UkfState::scalar(first, params.measurement_noise_r);
    let mut out = Vec::with_capacity(line.len());
    for &z in line {
        state = unscented_update(&state, z, params)?;
        out.push(state.mean[0]);
    }
    Ok(out)
}

pub fn denoise_image<T: Scalar>(image: &GrayImage<T>, params: &UkfParams<T>) -> Result<GrayImage<T>, UkfError> {
    params.validate()?;
    let (h, w) = (image.height(), image.width());
    let rows = || -> Result<Vec<T>, UkfError> {
        let mut out = Vec::with_capacity(h * w);
        for r in 0..h {
            out.extend(filter_scanline(image.row(r), params)?);
        }
        Ok(out)
    };
    let columns = || -> Result<Vec<T>, UkfError> {
        let mut out = vec![T::zero(); h * w];
        for c in 0..w {
            for (r, v) in filter_scanline(&image.column(c), params)?.into_iter().enumerate() {
                out[r * w + c] = v;
            }
        }
        Ok(out)
    };
    let values = match params.passes {
        ScanPasses::Rows => rows()?,
        ScanPasses::Columns => columns()?,
        ScanPasses::RowsThenColumnsAveraged => {
            let half = T::lit(0.5);
            rows()?.into_iter().zip(columns()?).map(|(a, b)| (a + b) * half).collect()
        }
    };
    Ok(GrayImage::new(h, w, values.into_iter().map(clamp_unit).collect())
        .expect("clamped values form a valid image"))
}
