//! On-disk formats exchanged between stages.
//!
//! Every artifact carries the digest of the configuration that produced it.
//! Binary and JSON artifacts also carry a format version that readers check.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use znnrad::{ClassifierModel, FeatureVector, GrayImage, Label, LabeledSample};

use crate::error::CliError;

pub const DENOISED_MAGIC: &[u8; 8] = b"ZNRDENOI";
pub const DENOISED_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: u32 = 1;

const NO_PARENT: u32 = u32::MAX;

pub const FEATURES_HEADER: [&str; 10] =
    ["source_id", "label", "mean", "std", "kurtosis", "skewness", "contrast", "energy", "entropy", "homogeneity"];

/// Trailing comment line shared by the CSV artifacts.
pub fn digest_line(digest: &str) -> String {
    format!("# config_digest={digest}\n")
}

pub fn write_text(path: &Path, text: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact types serialize");
    text.push('\n');
    write_text(path, text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e.to_string()))
}

fn check_version(path: &Path, found: u32, expected: u32) -> Result<(), CliError> {
    if found == expected {
        Ok(())
    } else {
        Err(CliError::format(path, format!("artifact version {found}, this build reads {expected}")))
    }
}

/// Denoised images plus their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoisedSet {
    pub config_digest: String,
    pub samples: Vec<LabeledSample>,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, u32::try_from(s.len()).expect("string fits u32 length"));
    out.extend_from_slice(s.as_bytes());
}

impl DenoisedSet {
    /// Little-endian layout: magic, version, digest, sample count, then per
    /// sample the id, label byte, parent id (or `u32::MAX`), height, width
    /// and `f64` pixels.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(DENOISED_MAGIC);
        put_u32(&mut out, DENOISED_VERSION);
        put_str(&mut out, &self.config_digest);
        out.extend_from_slice(&(self.samples.len() as u64).to_le_bytes());
        for s in &self.samples {
            put_str(&mut out, &s.source_id);
            out.push(match s.label {
                Label::Cancer => 0,
                Label::NonCancer => 1,
            });
            match &s.augmented_from {
                Some(p) => put_str(&mut out, p),
                None => put_u32(&mut out, NO_PARENT),
            }
            put_u32(&mut out, s.image.height() as u32);
            put_u32(&mut out, s.image.width() as u32);
            for p in s.image.pixels() {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self, CliError> {
        let mut r = Reader { path, bytes, pos: 0 };
        if r.take(8)? != DENOISED_MAGIC {
            return Err(CliError::format(path, "not a denoised-image artifact"));
        }
        check_version(path, r.u32()?, DENOISED_VERSION)?;
        let config_digest = r.string()?;
        let count = r.u64()?;
        let mut samples = Vec::new();
        for _ in 0..count {
            let source_id = r.string()?;
            let label = match r.take(1)?[0] {
                0 => Label::Cancer,
                1 => Label::NonCancer,
                b => return Err(CliError::format(path, format!("bad label byte {b}"))),
            };
            let augmented_from = r.optional_string()?;
            let (h, w) = (r.u32()? as usize, r.u32()? as usize);
            let raw = r.take(h.checked_mul(w).and_then(|n| n.checked_mul(8)).ok_or_else(|| r.err("size"))?)?;
            let pixels = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            let image = GrayImage::new(h, w, pixels).map_err(|e| CliError::format(path, e.to_string()))?;
            samples.push(LabeledSample { image, label, source_id, augmented_from });
        }
        if r.pos != bytes.len() {
            return Err(CliError::format(path, "trailing bytes"));
        }
        Ok(Self { config_digest, samples })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_text(path, self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(path, &bytes)
    }
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, what: &str) -> CliError {
        CliError::format(self.path, format!("truncated or corrupt {what} at byte {}", self.pos))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| self.err("record"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string_of_len(&mut self, len: u32) -> Result<String, CliError> {
        let raw = self.take(len as usize)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.err("string"))
    }

    fn string(&mut self) -> Result<String, CliError> {
        let len = self.u32()?;
        self.string_of_len(len)
    }

    fn optional_string(&mut self) -> Result<Option<String>, CliError> {
        match self.u32()? {
            NO_PARENT => Ok(None),
            len => self.string_of_len(len).map(Some),
        }
    }
}

/// One row of `features.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub source_id: String,
    pub features: FeatureVector,
}

impl FeatureRow {
    pub fn label(&self) -> Label {
        self.features.label.expect("feature rows are labelled")
    }
}

pub fn features_csv(rows: &[FeatureRow], digest: &str) -> String {
    let mut out = FEATURES_HEADER.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.source_id);
        out.push(',');
        out.push_str(row.label().as_str());
        for v in row.features.to_array() {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    out.push_str(&digest_line(digest));
    out
}

pub fn read_features(path: &Path) -> Result<(Vec<FeatureRow>, Option<String>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let digest = text.lines().rev().find_map(|l| l.strip_prefix("# config_digest=")).map(str::to_string);
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| CliError::format(path, e.to_string()))?;
    if header.iter().ne(FEATURES_HEADER) {
        return Err(CliError::format(path, format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::format(path, e.to_string()))?;
        let bad = |what: &str| CliError::format(path, format!("row {}: bad {what}", line + 1));
        let label = Label::parse(&record[1]).ok_or_else(|| bad("label"))?;
        let mut values = [0.0; 8];
        for (k, v) in values.iter_mut().enumerate() {
            *v = record[k + 2].parse().map_err(|_| bad(FEATURES_HEADER[k + 2]))?;
        }
        rows.push(FeatureRow {
            source_id: record[0].to_string(),
            features: FeatureVector::from_array(values, Some(label)),
        });
    }
    Ok((rows, digest))
}

/// `model.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub config_digest: String,
    pub model: ClassifierModel,
}

impl ModelArtifact {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let artifact: Self = read_json(path)?;
        check_version(path, artifact.format_version, ARTIFACT_VERSION)?;
        check_version(path, artifact.model.format_version, znnrad::diezin::MODEL_FORMAT_VERSION)?;
        Ok(artifact)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub eta: f64,
    pub phi: f64,
    pub mu: f64,
}

/// `tune.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneArtifact {
    pub format_version: u32,
    pub config_digest: String,
    pub best: Gains,
    /// `1 - validation accuracy` of `best`.
    pub best_fitness: f64,
    pub history: Vec<f64>,
}

impl TuneArtifact {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let artifact: Self = read_json(path)?;
        check_version(path, artifact.format_version, ARTIFACT_VERSION)?;
        Ok(artifact)
    }
}

/// Two-column numeric CSV with the digest trailer.
pub fn series_csv(header: &str, rows: impl IntoIterator<Item = (String, f64)>, digest: &str) -> String {
    let mut out = format!("{header}\n");
    for (key, v) in rows {
        out.push_str(&format!("{key},{v:.16e}\n"));
    }
    out.push_str(&digest_line(digest));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

/// `run_manifest.json`: the only artifact holding wall-clock data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub seed: u64,
    pub config_digest: String,
    pub jobs: usize,
    pub timings: Vec<StageTiming>,
    pub artifacts: Vec<ArtifactEntry>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, parent: Option<&str>) -> LabeledSample {
        LabeledSample {
            image: GrayImage::from_fn(3, 5, |r, c| (r * 5 + c) as f64 / 15.0).unwrap(),
            label: Label::NonCancer,
            source_id: id.into(),
            augmented_from: parent.map(String::from),
        }
    }

    #[test]
    fn denoised_round_trip() {
        let set = DenoisedSet {
            config_digest: "d1".into(),
            samples: vec![sample("noncancer/a.pgm", None), sample("noncancer/a.pgm#aug000", Some("noncancer/a.pgm"))],
        };
        let bytes = set.to_bytes();
        assert_eq!(DenoisedSet::from_bytes(Path::new("x"), &bytes).unwrap(), set);
    }

    #[test]
    fn denoised_rejects_other_version_and_truncation() {
        let set = DenoisedSet { config_digest: "d".into(), samples: vec![sample("noncancer/a.pgm", None)] };
        let mut bytes = set.to_bytes();
        let path = Path::new("x");
        assert!(DenoisedSet::from_bytes(path, &bytes[..bytes.len() - 3]).is_err());
        bytes[8] = 9;
        let err = DenoisedSet::from_bytes(path, &bytes).unwrap_err();
        assert!(err.to_string().contains("version 9"), "{err}");
    }

    #[test]
    fn features_round_trip_exactly() {
        let rows = vec![FeatureRow {
            source_id: "cancer/x.pgm#aug003".into(),
            features: FeatureVector::from_array(
                [0.1, 1.0 / 3.0, 2.5e-17, -0.7, 1e300, 0.0, std::f64::consts::PI, 5e-324],
                Some(Label::Cancer),
            ),
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_text(&path, features_csv(&rows, "abc")).unwrap();
        let (back, digest) = read_features(&path).unwrap();
        assert_eq!(back, rows);
        assert_eq!(digest.as_deref(), Some("abc"));
    }
}
