//! Binary classification metrics with cancer as the positive class.
//!
//! `roc_score` is the scalar `0.5 * (sensitivity + specificity)`, i.e. the
//! balanced accuracy, not the area under an ROC curve.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Label;
use crate::Scalar;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("argument error: {0}")]
    Argument(String),
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn confusion(truth: &[Label], predicted: &[Label]) -> Result<ConfusionCounts, MetricsError> {
    if truth.len() != predicted.len() {
        return Err(MetricsError::Argument(format!(
            "{} truth labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(MetricsError::Argument("no samples".into()));
    }
    let mut c = ConfusionCounts::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (Label::Cancer, Label::Cancer) => c.tp += 1,
            (Label::NonCancer, Label::NonCancer) => c.tn += 1,
            (Label::NonCancer, Label::Cancer) => c.fp += 1,
            (Label::Cancer, Label::NonCancer) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio<T: Scalar>(num: u64, den: u64) -> T {
    T::from_u64(num).unwrap() / T::from_u64(den).unwrap()
}

/// `(tp + tn) / total`
pub fn accuracy<T: Scalar>(c: &ConfusionCounts) -> Result<T, MetricsError> {
    match c.total() {
        0 => Err(MetricsError::Argument("accuracy of zero samples".into())),
        total => Ok(ratio(c.tp + c.tn, total)),
    }
}

/// `0.5 * (tp / (tp + fn) + tn / (tn + fp))`; both classes must be present.
pub fn roc_score<T: Scalar>(c: &ConfusionCounts) -> Result<T, MetricsError> {
    if c.tp + c.fn_ == 0 {
        return Err(MetricsError::Undefined("no positive (cancer) samples".into()));
    }
    if c.tn + c.fp == 0 {
        return Err(MetricsError::Undefined("no negative (non-cancer) samples".into()));
    }
    let sensitivity: T = ratio(c.tp, c.tp + c.fn_);
    let specificity: T = ratio(c.tn, c.tn + c.fp);
    Ok(T::lit(0.5) * (sensitivity + specificity))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub source_id: String,
    pub truth: Label,
    pub predicted: Label,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub roc: f64,
    pub seed: u64,
    pub config_digest: String,
    pub per_sample: Vec<SampleOutcome>,
}

impl EvalReport {
    pub fn from_outcomes(per_sample: Vec<SampleOutcome>, seed: u64, config_digest: String) -> Result<Self, MetricsError> {
        let truth: Vec<Label> = per_sample.iter().map(|s| s.truth).collect();
        let predicted: Vec<Label> = per_sample.iter().map(|s| s.predicted).collect();
        let counts = confusion(&truth, &predicted)?;
        Ok(Self {
            schema: REPORT_SCHEMA,
            counts,
            accuracy: accuracy(&counts)?,
            roc: roc_score(&counts)?,
            seed,
            config_digest,
            per_sample,
        })
    }

    pub fn per_sample_csv(&self) -> String {
        let mut out = String::from("source_id,true_label,predicted_label,score\n");
        for s in &self.per_sample {
            let _ = writeln!(out, "{},{},{},{:.16e}", s.source_id, s.truth, s.predicted, s.score);
        }
        let _ = writeln!(out, "# config_digest={}", self.config_digest);
        out
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), MetricsError> {
    fs::write(path, contents).map_err(|source| MetricsError::Io { path: path.to_path_buf(), source })
}

/// Writes `report.json`, `per_sample.csv` and `metrics.svg` into `out_dir`.
pub fn emit_report(report: &EvalReport, out_dir: &Path) -> Result<Vec<PathBuf>, MetricsError> {
    emit_reports(&[("run", report)], out_dir)
}

/// Like [`emit_report`]; the JSON and CSV describe the last run, the chart
/// overlays all of them.
pub fn emit_reports(runs: &[(&str, &EvalReport)], out_dir: &Path) -> Result<Vec<PathBuf>, MetricsError> {
    let (_, last) = runs.last().ok_or_else(|| MetricsError::Argument("no runs to emit".into()))?;
    fs::create_dir_all(out_dir).map_err(|source| MetricsError::Io { path: out_dir.to_path_buf(), source })?;
    let json = out_dir.join("report.json");
    let csv = out_dir.join("per_sample.csv");
    let svg = out_dir.join("metrics.svg");
    let mut text = serde_json::to_string_pretty(last)?;
    text.push('\n');
    write_file(&json, text)?;
    write_file(&csv, last.per_sample_csv())?;
    let bars: Vec<(&str, f64, f64)> = runs.iter().map(|(name, r)| (*name, r.accuracy, r.roc)).collect();
    write_file(&svg, metrics_svg(&bars, &last.config_digest))?;
    Ok(vec![json, csv, svg])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 360.0;
const MARGIN: f64 = 48.0;

/// Grouped bar chart: accuracy and ROC score for each `(name, accuracy, roc)`.
pub fn metrics_svg(runs: &[(&str, f64, f64)], config_digest: &str) -> String {
    let plot_w = SVG_W - 2.0 * MARGIN;
    let plot_h = SVG_H - 2.0 * MARGIN;
    let group_w = plot_w / runs.len().max(1) as f64;
    let bar_w = group_w * 0.35;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    );
    let _ = writeln!(s, "<desc>config_digest={}</desc>", escape(config_digest));
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{SVG_W}" height="{SVG_H}" fill="#ffffff"/>"##);
    let base = SVG_H - MARGIN;
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN}" y1="{base}" x2="{}" y2="{base}" stroke="#000000"/>"##,
        SVG_W - MARGIN
    );
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let y = base - v * plot_h;
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{y:.2}" font-size="10" text-anchor="end">{v:.2}</text>"##,
            MARGIN - 4.0
        );
    }
    for (i, (name, acc, roc)) in runs.iter().enumerate() {
        let x0 = MARGIN + i as f64 * group_w + group_w * 0.15;
        for (k, (metric, value, color)) in [("accuracy", acc, "#4477aa"), ("roc", roc, "#ee6677")].iter().enumerate() {
            let h = value.clamp(0.0, 1.0) * plot_h;
            let x = x0 + k as f64 * bar_w;
            let _ = writeln!(
                s,
                r#"<rect class="bar" data-run="{}" data-metric="{metric}" x="{x:.2}" y="{:.2}" width="{bar_w:.2}" height="{h:.2}" fill="{color}"><title>{} {metric} {value:.4}</title></rect>"#,
                escape(name),
                base - h,
                escape(name)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            x0 + bar_w,
            base + 16.0,
            escape(name)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-size="13" text-anchor="middle">Accuracy and ROC score</text>"#,
        SVG_W / 2.0
    );
    s.push_str("</svg>\n");
    s
}

/// Residual traces on a log10 axis, one polyline per named series.
pub fn traces_svg(series: &[(String, Vec<(f64, f64)>)], config_digest: &str) -> String {
    const PALETTE: [&str; 9] =
        ["#4477aa", "#66ccee", "#228833", "#ccbb44", "#ee6677", "#aa3377", "#bbbbbb", "#000000", "#994455"];
    let floor = 1e-16;
    let points = series.iter().flat_map(|(_, t)| t.iter());
    let (mut x_max, mut lo, mut hi) = (0f64, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x_max = x_max.max(x);
        let ly = y.max(floor).log10();
        lo = lo.min(ly);
        hi = hi.max(ly);
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let (lo, hi) = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));
    let x_max = if x_max > 0.0 { x_max } else { 1.0 };
    let plot_w = SVG_W - 2.0 * MARGIN;
    let plot_h = SVG_H - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + x / x_max * plot_w;
    let py = |y: f64| SVG_H - MARGIN - (y.max(floor).log10() - lo) / (hi - lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    );
    let _ = writeln!(s, "<desc>config_digest={}</desc>", escape(config_digest));
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{SVG_W}" height="{SVG_H}" fill="#ffffff"/>"##);
    for decade in (lo as i64)..=(hi as i64) {
        let y = SVG_H - MARGIN - (decade as f64 - lo) / (hi - lo) * plot_h;
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{y:.2}" font-size="10" text-anchor="end">1e{decade}</text>"##,
            MARGIN - 4.0
        );
    }
    for (i, (name, trace)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = String::new();
        // thin long traces to at most ~500 vertices
        let stride = (trace.len() / 500).max(1);
        for (k, &(x, y)) in trace.iter().enumerate() {
            if k % stride == 0 || k + 1 == trace.len() {
                let _ = write!(pts, "{:.2},{:.2} ", px(x), py(y));
            }
        }
        let _ = writeln!(
            s,
            r#"<polyline class="trace" data-series="{}" fill="none" stroke="{color}" points="{}"/>"#,
            escape(name),
            pts.trim_end()
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="10" fill="{color}">{}</text>"#,
            SVG_W - MARGIN - 110.0,
            MARGIN + 12.0 * i as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}
