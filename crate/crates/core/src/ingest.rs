//! Labeled grayscale image datasets: loading from a `cancer/` + `noncancer/`
//! directory tree, deterministic augmentation and leakage-free splitting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::seed;
use crate::Scalar;

/// Standard deviation of the additive intensity jitter used by augmentation.
pub const JITTER_SIGMA: f64 = 0.02;
/// Default augmentation multiplier (32 raw images become 512).
pub const DEFAULT_MULTIPLIER: usize = 15;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Row-major intensity image with every pixel in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrayImage<T> {
    height: usize,
    width: usize,
    pixels: Vec<T>,
}

impl<T: Scalar> GrayImage<T> {
    pub fn new(height: usize, width: usize, pixels: Vec<T>) -> Result<Self, IngestError> {
        if height == 0 || width == 0 {
            return Err(IngestError::InvalidImage(format!("empty dimensions {height}x{width}")));
        }
        if pixels.len() != height * width {
            return Err(IngestError::InvalidImage(format!(
                "{} pixels for a {height}x{width} image",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().position(|&p| !(p >= T::zero() && p <= T::one())) {
            return Err(IngestError::InvalidImage(format!(
                "pixel {bad} = {} outside [0, 1]",
                pixels[bad]
            )));
        }
        Ok(Self { height, width, pixels })
    }

    /// Builds an image by clamping every value into `[0, 1]` (NaN maps to 0).
    pub fn from_clamped(height: usize, width: usize, values: Vec<T>) -> Result<Self, IngestError> {
        let pixels = values.into_iter().map(clamp_unit).collect();
        Self::new(height, width, pixels)
    }

    pub fn filled(height: usize, width: usize, value: T) -> Result<Self, IngestError> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self, IngestError> {
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self::from_clamped(height, width, values)
    }

    /// 8-bit bytes scaled by 1/255.
    pub fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> Result<Self, IngestError> {
        let scale = T::one() / T::lit(255.0);
        let pixels = bytes.iter().map(|&b| T::from_u8(b).unwrap() * scale).collect();
        Self::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.pixels[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.pixels[row * self.width..(row + 1) * self.width]
    }

    pub fn column(&self, col: usize) -> Vec<T> {
        (0..self.height).map(|r| self.get(r, col)).collect()
    }

    /// Quantizes to 8-bit with round-half-up.
    pub fn to_bytes(&self) -> Vec<u8> {
        let scale = T::lit(255.0);
        self.pixels
            .iter()
            .map(|&p| (p * scale + T::lit(0.5)).floor().to_u8().unwrap_or(255))
            .collect()
    }

    pub fn mean_squared_error(&self, other: &Self) -> T {
        assert_eq!((self.height, self.width), (other.height, other.width), "image shapes differ");
        let sum = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
        sum / T::from_usize_lossy(self.pixels.len())
    }

    /// SHA-256 over the dimensions and little-endian `f64` pixel values.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.height as u64).to_le_bytes());
        h.update((self.width as u64).to_le_bytes());
        for p in &self.pixels {
            h.update(p.to_f64_lossy().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn remap(&self, height: usize, width: usize, src: impl Fn(usize, usize) -> (usize, usize)) -> Self {
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                let (sr, sc) = src(r, c);
                pixels.push(self.get(sr, sc));
            }
        }
        Self { height, width, pixels }
    }

    pub fn flip_horizontal(&self) -> Self {
        let w = self.width;
        self.remap(self.height, w, |r, c| (r, w - 1 - c))
    }

    pub fn flip_vertical(&self) -> Self {
        let h = self.height;
        self.remap(h, self.width, |r, c| (h - 1 - r, c))
    }

    /// Clockwise quarter turns.
    pub fn rotate(&self, quarter_turns: u8) -> Self {
        let (h, w) = (self.height, self.width);
        match quarter_turns % 4 {
            0 => self.clone(),
            1 => self.remap(w, h, |r, c| (h - 1 - c, r)),
            2 => self.remap(h, w, |r, c| (h - 1 - r, w - 1 - c)),
            _ => self.remap(w, h, |r, c| (c, w - 1 - r)),
        }
    }

    pub fn map_clamped(&self, mut f: impl FnMut(T) -> T) -> Self {
        Self {
            height: self.height,
            width: self.width,
            pixels: self.pixels.iter().map(|&p| clamp_unit(f(p))).collect(),
        }
    }
}

pub(crate) fn clamp_unit<T: Scalar>(v: T) -> T {
    if v.is_nan() {
        T::zero()
    } else {
        v.max(T::zero()).min(T::one())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Cancer,
    NonCancer,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Cancer, Label::NonCancer];

    /// Directory / CSV spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Cancer => "cancer",
            Label::NonCancer => "noncancer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cancer" => Some(Label::Cancer),
            "noncancer" => Some(Label::NonCancer),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample<T> {
    pub image: GrayImage<T>,
    pub label: Label,
    pub source_id: String,
    pub augmented_from: Option<String>,
}

impl<T> LabeledSample<T> {
    /// Identifier of the raw image this sample descends from.
    pub fn group(&self) -> &str {
        self.augmented_from.as_deref().unwrap_or(&self.source_id)
    }
}

/// Group key of a source id produced by [`augment`] (`parent#augNNN`).
pub fn group_of(source_id: &str) -> &str {
    source_id.split_once('#').map_or(source_id, |(parent, _)| parent)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    samples: Vec<LabeledSample<T>>,
    manifest_hash: String,
}

impl<T: Scalar> Dataset<T> {
    /// Sorts by source id and checks id uniqueness and augmentation parents.
    pub fn new(mut samples: Vec<LabeledSample<T>>) -> Result<Self, IngestError> {
        samples.sort_by(|a, b| a.source_id.cmp(&b.source_id));
        if let Some(w) = samples.windows(2).find(|w| w[0].source_id == w[1].source_id) {
            return Err(IngestError::Argument(format!("duplicate source_id {}", w[0].source_id)));
        }
        let ids: BTreeSet<&str> = samples.iter().map(|s| s.source_id.as_str()).collect();
        for s in &samples {
            if let Some(parent) = &s.augmented_from {
                if !ids.contains(parent.as_str()) {
                    return Err(IngestError::Argument(format!(
                        "{} is augmented from unknown source {parent}",
                        s.source_id
                    )));
                }
            }
        }
        let manifest_hash = manifest_hash(samples.iter().map(|s| (s.source_id.as_str(), s.label)));
        Ok(Self { samples, manifest_hash })
    }

    pub fn samples(&self) -> &[LabeledSample<T>] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<LabeledSample<T>> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn manifest_hash(&self) -> &str {
        &self.manifest_hash
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    /// Manifest CSV: `source_id,label,augmented_from,sha256`.
    pub fn manifest_csv(&self) -> String {
        let mut out = String::from("source_id,label,augmented_from,sha256\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{}\n",
                s.source_id,
                s.label,
                s.augmented_from.as_deref().unwrap_or(""),
                s.image.digest()
            ));
        }
        out
    }

    /// Appends `multiplier` augmented children for every raw sample.
    pub fn augmented(self, multiplier: usize, seed: u64) -> Result<Self, IngestError> {
        let mut all = Vec::with_capacity(self.samples.len() * (multiplier + 1));
        for s in &self.samples {
            if s.augmented_from.is_none() {
                all.extend(augment(s, multiplier, seed::mix(seed, seed::text_key(&s.source_id), 0))?);
            }
        }
        all.extend(self.samples);
        Self::new(all)
    }
}

/// Hex SHA-256 over `source_id,label` lines.
pub fn manifest_hash<'a>(pairs: impl IntoIterator<Item = (&'a str, Label)>) -> String {
    let mut h = Sha256::new();
    for (id, label) in pairs {
        h.update(id.as_bytes());
        h.update(b",");
        h.update(label.as_str().as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// A file that could not be decoded during [`load_dataset`].
#[derive(Debug, Clone)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug)]
pub struct Loaded<T> {
    pub dataset: Dataset<T>,
    pub skipped: Vec<SkippedFile>,
}

/// Loads `<root>/{cancer,noncancer}/*.{png,pgm}`.
///
/// Undecodable files are collected in [`Loaded::skipped`]; loading still
/// succeeds as long as every class keeps at least one image.
pub fn load_dataset<T: Scalar>(root: &Path) -> Result<Loaded<T>, IngestError> {
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for label in Label::ALL {
        let dir = root.join(label.as_str());
        if !dir.is_dir() {
            return Err(IngestError::Config(format!("missing directory {}", dir.display())));
        }
        let entries = fs::read_dir(&dir).map_err(|source| IngestError::Io { path: dir.clone(), source })?;
        let mut files: Vec<PathBuf> = Vec::new();
        for entry in entries {
            let path = entry.map_err(|source| IngestError::Io { path: dir.clone(), source })?.path();
            let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            if path.is_file() && matches!(ext.as_deref(), Some("png" | "pgm")) {
                files.push(path);
            }
        }
        files.sort();
        let mut kept = 0;
        for path in files {
            match decode_gray8(&path) {
                Ok((h, w, bytes)) => {
                    let name = path.file_name().unwrap().to_string_lossy();
                    samples.push(LabeledSample {
                        image: GrayImage::from_bytes(h, w, &bytes)?,
                        label,
                        source_id: format!("{}/{}", label.as_str(), name),
                        augmented_from: None,
                    });
                    kept += 1;
                }
                Err(reason) => {
                    log::warn!("skipping {}: {reason}", path.display());
                    skipped.push(SkippedFile { path, reason });
                }
            }
        }
        if kept == 0 {
            return Err(IngestError::Config(format!("no decodable images in {}", dir.display())));
        }
    }
    Ok(Loaded { dataset: Dataset::new(samples)?, skipped })
}

fn decode_gray8(path: &Path) -> Result<(usize, usize, Vec<u8>), String> {
    let img = image::ImageReader::open(path)
        .map_err(|e| e.to_string())?
        .with_guessed_format()
        .map_err(|e| e.to_string())?
        .decode()
        .map_err(|e| e.to_string())?;
    match img {
        image::DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            Ok((h as usize, w as usize, buf.into_raw()))
        }
        other => Err(format!("expected 8-bit grayscale, found {:?}", other.color())),
    }
}

/// Writes an 8-bit binary PGM (`P5`).
pub fn write_pgm<T: Scalar>(path: &Path, image: &GrayImage<T>) -> Result<(), IngestError> {
    let mut bytes = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    bytes.extend(image.to_bytes());
    fs::write(path, bytes).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

/// One label-preserving augmentation transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AugmentOp {
    FlipHorizontal,
    FlipVertical,
    /// Clockwise quarter turns (1, 2 or 3).
    Rotate(u8),
    /// Additive Gaussian jitter; the per-pixel draws come from this seed.
    Jitter { seed: u64 },
    Scale(f64),
}

impl AugmentOp {
    pub fn apply<T: Scalar>(&self, image: &GrayImage<T>) -> GrayImage<T> {
        match *self {
            AugmentOp::FlipHorizontal => image.flip_horizontal(),
            AugmentOp::FlipVertical => image.flip_vertical(),
            AugmentOp::Rotate(q) => image.rotate(q),
            AugmentOp::Jitter { seed } => {
                let mut rng = seed::stream(seed, 0, 0);
                let normal = Normal::new(0.0, JITTER_SIGMA).unwrap();
                image.map_clamped(|p| p + T::lit(normal.sample(&mut rng)))
            }
            AugmentOp::Scale(k) => image.map_clamped(|p| p * T::lit(k)),
        }
    }
}

/// Transform sequence for the `index`-th augmented child under `seed`:
/// one geometric transform, then each intensity transform with probability 1/2.
pub fn augmentation_plan(seed: u64, index: usize) -> Vec<AugmentOp> {
    let mut rng = seed::stream(seed, 0xA06, index as u64);
    let mut plan = vec![match rng.random_range(0..5u8) {
        0 => AugmentOp::FlipHorizontal,
        1 => AugmentOp::FlipVertical,
        k => AugmentOp::Rotate(k - 1),
    }];
    if rng.random_bool(0.5) {
        plan.push(AugmentOp::Jitter { seed: rng.random() });
    }
    if rng.random_bool(0.5) {
        plan.push(AugmentOp::Scale(rng.random_range(0.9..=1.1)));
    }
    plan
}

/// Produces exactly `multiplier` augmented copies of `sample`.
pub fn augment<T: Scalar>(
    sample: &LabeledSample<T>,
    multiplier: usize,
    seed: u64,
) -> Result<Vec<LabeledSample<T>>, IngestError> {
    if multiplier == 0 {
        return Err(IngestError::Argument("augmentation multiplier must be at least 1".into()));
    }
    Ok((0..multiplier)
        .map(|k| {
            let image = augmentation_plan(seed, k)
                .iter()
                .fold(sample.image.clone(), |img, op| op.apply(&img));
            LabeledSample {
                image,
                label: sample.label,
                source_id: format!("{}#aug{:03}", sample.source_id, k),
                augmented_from: Some(sample.source_id.clone()),
            }
        })
        .collect())
}

/// Which side of a split each group landed on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSplit {
    pub test_groups: BTreeSet<String>,
}

impl GroupSplit {
    pub fn is_test(&self, group: &str) -> bool {
        self.test_groups.contains(group)
    }
}

/// Stratified group split over `(group, label)` pairs.
///
/// Per label, `round(test_fraction * groups)` groups (clamped to leave at
/// least one on each side) go to test. Groups are shuffled from their sorted
/// order with a label-specific stream, so the result depends only on the
/// group set and the seed.
pub fn split_groups<'a>(
    items: impl IntoIterator<Item = (&'a str, Label)>,
    test_fraction: f64,
    seed: u64,
) -> Result<GroupSplit, IngestError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(IngestError::Argument(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let mut by_label: BTreeMap<Label, BTreeSet<&str>> = BTreeMap::new();
    for (group, label) in items {
        by_label.entry(label).or_default().insert(group);
    }
    let mut test_groups = BTreeSet::new();
    for label in Label::ALL {
        let groups: Vec<&str> = by_label.get(&label).map(|g| g.iter().copied().collect()).unwrap_or_default();
        if groups.len() < 2 {
            return Err(IngestError::Split(format!(
                "label {label} has {} source group(s); at least 2 required",
                groups.len()
            )));
        }
        let n = groups.len();
        let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
        let mut shuffled = groups;
        shuffled.shuffle(&mut seed::stream(seed, 0x5917, label as u64));
        test_groups.extend(shuffled[..n_test].iter().map(|g| g.to_string()));
    }
    Ok(GroupSplit { test_groups })
}

/// Splits into `(train, test)` without letting augmented siblings straddle the cut.
pub fn split<T: Scalar>(
    dataset: &Dataset<T>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>), IngestError> {
    let plan = split_groups(dataset.samples.iter().map(|s| (s.group(), s.label)), test_fraction, seed)?;
    let (test, train): (Vec<_>, Vec<_>) = dataset.samples.iter().cloned().partition(|s| plan.is_test(s.group()));
    Ok((Dataset::new(train)?, Dataset::new(test)?))
}
