//! Radiomic features of a denoised image.
//!
//! The image is first band-limited by an adaptive empirical-wavelet style
//! segmentation of its averaged row spectrum: spectral peaks are detected
//! relative to the strongest non-DC component, boundaries sit at the minima
//! between retained peaks, and everything above the highest boundary is
//! removed. Four grayscale moments and four Haralick statistics are then
//! taken from the filtered image.
//!
//! Two formulas deliberately follow common practice rather than the printed
//! originals: the mean is the arithmetic mean and skewness is the third
//! standardized moment. Entropy is the *sum entropy* of the co-occurrence
//! matrix (the entropy of the distribution of `i + j`), in bits.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{clamp_unit, GrayImage, Label};
use crate::Scalar;

/// Smallest row length accepted by [`row_spectrum`].
pub const MIN_SPECTRUM_WIDTH: usize = 8;

/// Non-DC spectra weaker than this fraction of the total peak are treated as empty.
const FLAT_SPECTRUM_REL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("image width {0} below the minimum of {MIN_SPECTRUM_WIDTH} for spectral analysis")]
    TooNarrow(usize),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("no GLCM offset fits inside a {height}x{width} image")]
    NoUsableOffset { height: usize, width: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    /// Row-averaged `|FFT|` for bins `0..=resolution/2`.
    pub magnitudes: Vec<T>,
    /// FFT length (the image width).
    pub resolution: usize,
    /// Mean squared pixel value.
    pub average_power: T,
}

impl<T: Scalar> Spectrum<T> {
    pub fn scaled(&self, k: T) -> Self {
        Self {
            magnitudes: self.magnitudes.iter().map(|&m| m * k).collect(),
            resolution: self.resolution,
            average_power: self.average_power * k * k,
        }
    }

    /// Power spectral density estimate `|X(k)|^2 / N` per bin.
    pub fn power_density(&self) -> Vec<T> {
        let n = T::from_usize_lossy(self.resolution);
        self.magnitudes.iter().map(|&m| m * m / n).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeVector<T> {
    /// `values[a - 1]` is the envelope at delay `a`.
    pub values: Vec<T>,
    pub lag_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundarySet<T> {
    /// Normalized frequencies in `(0, 0.5]`, strictly increasing.
    pub cut_frequencies: Vec<T>,
}

impl<T: Scalar> BoundarySet<T> {
    pub fn band_count(&self) -> usize {
        self.cut_frequencies.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.cut_frequencies.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrayStats<T> {
    pub mean: T,
    pub std_dev: T,
    pub kurtosis: T,
    pub skewness: T,
    /// Zero variance: kurtosis and skewness are reported as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaralickFeatures<T> {
    pub contrast: T,
    pub energy: T,
    pub entropy: T,
    pub homogeneity: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T> {
    pub mean: T,
    pub std_dev: T,
    pub kurtosis: T,
    pub skewness: T,
    pub contrast: T,
    pub energy: T,
    pub entropy: T,
    pub homogeneity: T,
    pub label: Option<Label>,
    #[serde(default)]
    pub degenerate: bool,
}

impl<T: Scalar> FeatureVector<T> {
    pub const NAMES: [&'static str; 8] =
        ["mean", "std", "kurtosis", "skewness", "contrast", "energy", "entropy", "homogeneity"];

    pub fn from_parts(stats: GrayStats<T>, texture: HaralickFeatures<T>, label: Option<Label>) -> Self {
        Self {
            mean: stats.mean,
            std_dev: stats.std_dev,
            kurtosis: stats.kurtosis,
            skewness: stats.skewness,
            contrast: texture.contrast,
            energy: texture.energy,
            entropy: texture.entropy,
            homogeneity: texture.homogeneity,
            label,
            degenerate: stats.degenerate,
        }
    }

    pub fn from_array(values: [T; 8], label: Option<Label>) -> Self {
        let [mean, std_dev, kurtosis, skewness, contrast, energy, entropy, homogeneity] = values;
        Self { mean, std_dev, kurtosis, skewness, contrast, energy, entropy, homogeneity, label, degenerate: false }
    }

    pub fn to_array(&self) -> [T; 8] {
        [
            self.mean,
            self.std_dev,
            self.kurtosis,
            self.skewness,
            self.contrast,
            self.energy,
            self.entropy,
            self.homogeneity,
        ]
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }
}

/// Normalized symmetric gray-level co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm<T> {
    pub levels: usize,
    /// Row-major `levels x levels`.
    pub probabilities: Vec<T>,
    pub offsets_used: Vec<(isize, isize)>,
}

impl<T: Scalar> Glcm<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.probabilities[i * self.levels + j]
    }

    /// Distribution of `i + j`, indices `0..=2(levels - 1)`.
    pub fn sum_distribution(&self) -> Vec<T> {
        let mut out = vec![T::zero(); 2 * self.levels - 1];
        for i in 0..self.levels {
            for j in 0..self.levels {
                out[i + j] = out[i + j] + self.get(i, j);
            }
        }
        out
    }
}

pub const DEFAULT_OFFSETS: [(isize, isize); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Scalar"))]
pub struct FeatureSettings<T> {
    pub levels: usize,
    pub offsets: Vec<(isize, isize)>,
    pub max_bands: usize,
    pub energy_floor: T,
    /// Shift `p` passed to [`envelope`].
    pub envelope_shift: usize,
}

impl<T: Scalar> Default for FeatureSettings<T> {
    fn default() -> Self {
        Self {
            levels: 8,
            offsets: DEFAULT_OFFSETS.to_vec(),
            max_bands: 4,
            energy_floor: T::lit(0.1),
            envelope_shift: 0,
        }
    }
}

impl<T: Scalar> FeatureSettings<T> {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.levels < 2 {
            return Err(FeatureError::Argument(format!("levels must be >= 2, got {}", self.levels)));
        }
        if self.offsets.is_empty() {
            return Err(FeatureError::Argument("at least one GLCM offset required".into()));
        }
        if self.max_bands == 0 {
            return Err(FeatureError::Argument("max_bands must be >= 1".into()));
        }
        if !(self.energy_floor > T::zero() && self.energy_floor < T::one()) {
            return Err(FeatureError::Argument(format!("energy_floor {} outside (0, 1)", self.energy_floor)));
        }
        Ok(())
    }
}

/// Row-averaged magnitude spectrum and mean pixel power.
pub fn row_spectrum<T: Scalar>(image: &GrayImage<T>) -> Result<Spectrum<T>, FeatureError> {
    let w = image.width();
    if w < MIN_SPECTRUM_WIDTH {
        return Err(FeatureError::TooNarrow(w));
    }
    let fft = FftPlanner::<T>::new().plan_fft_forward(w);
    let bins = w / 2 + 1;
    let mut acc = vec![T::zero(); bins];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); w];
    for r in 0..image.height() {
        for (slot, &p) in buf.iter_mut().zip(image.row(r)) {
            *slot = Complex::new(p, T::zero());
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a = *a + c.norm();
        }
    }
    let rows = T::from_usize_lossy(image.height());
    let magnitudes = acc.into_iter().map(|a| a / rows).collect();
    let px = image.pixels();
    let average_power = px.iter().fold(T::zero(), |s, &p| s + p * p) / T::from_usize_lossy(px.len());
    Ok(Spectrum { magnitudes, resolution: w, average_power })
}

/// Delay-indexed average of `|b(u)|^2 |b(u + a)|^2`.
///
/// Terms run over `u in 0..K-p` with `u + a < K` and are averaged over the
/// number of terms actually present, so a constant signal `c` yields `c^4` at
/// every reachable delay. `lag_cap = K - p`; delays with no terms are 0.
pub fn envelope<T: Scalar>(signal: &[T], shift: usize) -> Result<EnvelopeVector<T>, FeatureError> {
    let k = signal.len();
    if shift >= k {
        return Err(FeatureError::Argument(format!("shift {shift} must be below signal length {k}")));
    }
    let span = k - shift;
    let sq: Vec<T> = signal.iter().map(|&b| b * b).collect();
    let values = (1..=span)
        .map(|delay| {
            let terms = span.min(k.saturating_sub(delay));
            if terms == 0 {
                return T::zero();
            }
            let sum = (0..terms).fold(T::zero(), |s, u| s + sq[u] * sq[u + delay]);
            sum / T::from_usize_lossy(terms)
        })
        .collect();
    Ok(EnvelopeVector { values, lag_cap: span })
}

/// Minimum bin spacing between retained peaks: one plus the run of leading
/// delays whose envelope stays at or above half its maximum.
fn peak_separation<T: Scalar>(envelope: &EnvelopeVector<T>) -> usize {
    let top = envelope.values.iter().copied().fold(T::zero(), T::max);
    if top <= T::zero() {
        return 1;
    }
    let half = top * T::lit(0.5);
    1 + envelope.values.iter().take_while(|&&v| v >= half).count()
}

/// Adaptive spectral segmentation.
///
/// Peaks are local maxima of the non-DC spectrum above `energy_floor` times
/// its maximum, chosen by height (ties to the lower bin) subject to the
/// envelope-derived spacing, at most `max_bands` of them. Boundaries sit at
/// the lowest bin between consecutive peaks.
pub fn detect_boundaries<T: Scalar>(
    spectrum: &Spectrum<T>,
    envelope: &EnvelopeVector<T>,
    max_bands: usize,
    energy_floor: T,
) -> Result<BoundarySet<T>, FeatureError> {
    if spectrum.magnitudes.is_empty() {
        return Err(FeatureError::Argument("empty spectrum".into()));
    }
    if max_bands == 0 {
        return Err(FeatureError::Argument("max_bands must be >= 1".into()));
    }
    let mags = &spectrum.magnitudes;
    let ac = &mags[1..];
    let top = ac.iter().copied().fold(T::zero(), T::max);
    if ac.len() < 2 || top <= T::lit(FLAT_SPECTRUM_REL) * (mags[0] + top) {
        return Ok(BoundarySet::default());
    }
    let floor = energy_floor * top;
    let last = ac.len() - 1;
    let mut candidates: Vec<usize> = (0..ac.len())
        .filter(|&i| {
            (i == 0 || ac[i] > ac[i - 1]) && (i == last || ac[i] >= ac[i + 1]) && ac[i] > floor
        })
        .collect();
    candidates.sort_by(|&a, &b| ac[b].partial_cmp(&ac[a]).unwrap().then(a.cmp(&b)));

    let spacing = peak_separation(envelope);
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if kept.len() == max_bands {
            break;
        }
        if kept.iter().all(|&k| k.abs_diff(c) >= spacing) {
            kept.push(c);
        }
    }
    kept.sort_unstable();

    let n = T::from_usize_lossy(spectrum.resolution);
    let cut_frequencies = kept
        .windows(2)
        .map(|pair| {
            // peak indices are offset by one from FFT bins
            let (lo, hi) = (pair[0] + 1, pair[1] + 1);
            if hi - lo < 2 {
                (T::from_usize_lossy(lo) + T::lit(0.5)) / n
            } else {
                let valley = (lo + 1..hi)
                    .min_by(|&a, &b| mags[a].partial_cmp(&mags[b]).unwrap().then(a.cmp(&b)))
                    .unwrap();
                T::from_usize_lossy(valley) / n
            }
        })
        .collect();
    Ok(BoundarySet { cut_frequencies })
}

/// Removes every row frequency above the highest boundary; the result is
/// clamped back into `[0, 1]`.
pub fn ewt_filter<T: Scalar>(image: &GrayImage<T>, boundaries: &BoundarySet<T>) -> GrayImage<T> {
    let Some(&cut) = boundaries.cut_frequencies.last() else {
        return image.clone();
    };
    let w = image.width();
    let mut planner = FftPlanner::<T>::new();
    let forward = planner.plan_fft_forward(w);
    let inverse = planner.plan_fft_inverse(w);
    let n = T::from_usize_lossy(w);
    let zero = Complex::new(T::zero(), T::zero());
    let mut buf = vec![zero; w];
    let mut out = Vec::with_capacity(image.pixels().len());
    for r in 0..image.height() {
        for (slot, &p) in buf.iter_mut().zip(image.row(r)) {
            *slot = Complex::new(p, T::zero());
        }
        forward.process(&mut buf);
        for (k, slot) in buf.iter_mut().enumerate() {
            if T::from_usize_lossy(k.min(w - k)) / n > cut {
                *slot = zero;
            }
        }
        inverse.process(&mut buf);
        out.extend(buf.iter().map(|c| clamp_unit(c.re / n)));
    }
    GrayImage::new(image.height(), w, out).expect("clamped row data forms a valid image")
}

/// Mean, population standard deviation, non-excess kurtosis, skewness.
pub fn grayscale_stats<T: Scalar>(image: &GrayImage<T>) -> GrayStats<T> {
    let px = image.pixels();
    let first = px[0];
    if px.iter().all(|&p| p == first) {
        return GrayStats { mean: first, std_dev: T::zero(), kurtosis: T::zero(), skewness: T::zero(), degenerate: true };
    }
    let n = T::from_usize_lossy(px.len());
    let mean = px.iter().fold(T::zero(), |s, &p| s + p) / n;
    let (mut m2, mut m3, mut m4) = (T::zero(), T::zero(), T::zero());
    for &p in px {
        let d = p - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let std_dev = m2.sqrt();
    if std_dev <= T::epsilon() * mean.abs().max(T::one()) {
        return GrayStats { mean, std_dev, kurtosis: T::zero(), skewness: T::zero(), degenerate: true };
    }
    GrayStats {
        mean,
        std_dev,
        kurtosis: m4 / (m2 * m2),
        skewness: m3 / (m2 * std_dev),
        degenerate: false,
    }
}

/// Gray level of `p` in `0..levels` (uniform bins over `[0, 1]`).
pub fn quantize<T: Scalar>(p: T, levels: usize) -> usize {
    (p * T::from_usize_lossy(levels)).floor().to_usize().unwrap_or(0).min(levels - 1)
}

/// Symmetric co-occurrence over all offsets that fit inside the image.
pub fn compute_glcm<T: Scalar>(
    image: &GrayImage<T>,
    levels: usize,
    offsets: &[(isize, isize)],
) -> Result<Glcm<T>, FeatureError> {
    if levels < 2 {
        return Err(FeatureError::Argument(format!("levels must be >= 2, got {levels}")));
    }
    if offsets.is_empty() {
        return Err(FeatureError::Argument("at least one offset required".into()));
    }
    let (h, w) = (image.height() as isize, image.width() as isize);
    let q: Vec<usize> = image.pixels().iter().map(|&p| quantize(p, levels)).collect();
    let mut counts = vec![0u64; levels * levels];
    let mut used = Vec::new();
    for &(dr, dc) in offsets {
        if dr.abs() >= h || dc.abs() >= w {
            continue;
        }
        used.push((dr, dc));
        for r in 0..h {
            for c in 0..w {
                let (r2, c2) = (r + dr, c + dc);
                if r2 < 0 || r2 >= h || c2 < 0 || c2 >= w {
                    continue;
                }
                let a = q[(r * w + c) as usize];
                let b = q[(r2 * w + c2) as usize];
                counts[a * levels + b] += 1;
                counts[b * levels + a] += 1;
            }
        }
    }
    if used.is_empty() {
        return Err(FeatureError::NoUsableOffset { height: image.height(), width: image.width() });
    }
    let total: u64 = counts.iter().sum();
    let total_t = T::from_u64(total).unwrap();
    let probabilities = counts.iter().map(|&c| T::from_u64(c).unwrap() / total_t).collect();
    Ok(Glcm { levels, probabilities, offsets_used: used })
}

pub fn haralick<T: Scalar>(glcm: &Glcm<T>) -> HaralickFeatures<T> {
    let (mut contrast, mut energy, mut homogeneity) = (T::zero(), T::zero(), T::zero());
    for i in 0..glcm.levels {
        for j in 0..glcm.levels {
            let p = glcm.get(i, j);
            let d = T::from_usize_lossy(i.abs_diff(j));
            contrast = contrast + d * d * p;
            energy = energy + p * p;
            homogeneity = homogeneity + p / (T::one() + d);
        }
    }
    let entropy = glcm
        .sum_distribution()
        .into_iter()
        .filter(|&p| p > T::zero())
        .fold(T::zero(), |s, p| s - p * p.log2());
    HaralickFeatures { contrast, energy, entropy: entropy.max(T::zero()), homogeneity }
}

/// Intermediate products of [`extract_features`], for inspection.
#[derive(Debug, Clone)]
pub struct FeatureTrace<T> {
    pub spectrum: Spectrum<T>,
    pub envelope: EnvelopeVector<T>,
    pub boundaries: BoundarySet<T>,
    pub filtered: GrayImage<T>,
    pub glcm: Glcm<T>,
}

pub fn extract_features_traced<T: Scalar>(
    image: &GrayImage<T>,
    settings: &FeatureSettings<T>,
) -> Result<(FeatureVector<T>, FeatureTrace<T>), FeatureError> {
    settings.validate()?;
    let spectrum = row_spectrum(image)?;
    let envelope = envelope(&spectrum.magnitudes[1..], settings.envelope_shift)?;
    let boundaries = detect_boundaries(&spectrum, &envelope, settings.max_bands, settings.energy_floor)?;
    let filtered = ewt_filter(image, &boundaries);
    let stats = grayscale_stats(&filtered);
    let glcm = compute_glcm(&filtered, settings.levels, &settings.offsets)?;
    let features = FeatureVector::from_parts(stats, haralick(&glcm), None);
    Ok((features, FeatureTrace { spectrum, envelope, boundaries, filtered, glcm }))
}

pub fn extract_features<T: Scalar>(
    image: &GrayImage<T>,
    settings: &FeatureSettings<T>,
) -> Result<FeatureVector<T>, FeatureError> {
    extract_features_traced(image, settings).map(|(f, _)| f)
}
