//! Radiomic CT image classification.
//!
//! The pipeline runs five stages, each in its own module:
//!
//! 1. [`ingest`]: load labeled grayscale images, augment, split by source.
//! 2. [`ukf_denoise`]: scanline unscented Kalman filtering.
//! 3. [`ewt_features`]: adaptive spectral band filtering, then grayscale
//!    moments and co-occurrence texture statistics.
//! 4. [`diezin`]: a linear classifier whose normal-equation residual is
//!    driven to zero by double-integral zeroing-neural-network dynamics.
//! 5. [`alsoa`]: lizard-search tuning of the dynamics' coefficients.
//!
//! [`metrics`] scores the result. The numerical code is generic over
//! [`Scalar`] (`f32` or `f64`); the aliases below fix it to `f64`.

pub mod alsoa;
pub mod diezin;
pub mod ewt_features;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod seed;
pub mod ukf_denoise;

mod scalar;

pub use scalar::Scalar;

pub use ingest::Label;

/// Default working precision.
pub type Real = f64;

pub type GrayImage = ingest::GrayImage<Real>;
pub type LabeledSample = ingest::LabeledSample<Real>;
pub type Dataset = ingest::Dataset<Real>;
pub type UkfParams = ukf_denoise::UkfParams<Real>;
pub type FeatureVector = ewt_features::FeatureVector<Real>;
pub type FeatureSettings = ewt_features::FeatureSettings<Real>;
pub type DieznnParams = diezin::DieznnParams<Real>;
pub type NoiseSpec = diezin::NoiseSpec<Real>;
pub type ClassifierModel = diezin::ClassifierModel<Real>;
pub type AlsoaConfig = alsoa::AlsoaConfig<Real>;
pub type AlsoaResult = alsoa::AlsoaResult<Real>;

/// Single-precision variants.
pub mod f32 {
    pub type GrayImage = crate::ingest::GrayImage<f32>;
    pub type UkfParams = crate::ukf_denoise::UkfParams<f32>;
    pub type FeatureVector = crate::ewt_features::FeatureVector<f32>;
    pub type FeatureSettings = crate::ewt_features::FeatureSettings<f32>;
    pub type DieznnParams = crate::diezin::DieznnParams<f32>;
    pub type ClassifierModel = crate::diezin::ClassifierModel<f32>;
}
