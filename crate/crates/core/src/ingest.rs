//! Per-frame detection records: schema, streaming parser, writer and validation.
//!
//! The wire format is newline-delimited JSON. The first non-blank line is a
//! [`VideoMeta`] object; every following non-blank line is one [`FrameRecord`].
//! See `docs/ingest-schema.md` for the field-level contract.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{self, BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::bbox::BBox;
use crate::config::PipelineConfig;

pub type FrameIndex = u32;
pub type TrackId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub video_id: String,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_label: Option<String>,
}

/// One pixel of a person mask in HSV: hue in degrees, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct HsvSample {
    pub hue: f64,
    pub saturation: f64,
    pub value: f64,
}

impl HsvSample {
    pub const fn new(hue: f64, saturation: f64, value: f64) -> Self {
        Self { hue, saturation, value }
    }

    /// Hue 360 is accepted as the wrap of 0.
    pub fn in_range(&self) -> bool {
        (0.0..=360.0).contains(&self.hue)
            && (0.0..=1.0).contains(&self.saturation)
            && (0.0..=1.0).contains(&self.value)
    }
}

impl From<[f64; 3]> for HsvSample {
    fn from([hue, saturation, value]: [f64; 3]) -> Self {
        Self { hue, saturation, value }
    }
}

impl From<HsvSample> for [f64; 3] {
    fn from(s: HsvSample) -> Self {
        [s.hue, s.saturation, s.value]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonDetection {
    pub track_id: TrackId,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_depth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_samples: Option<Vec<HsvSample>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDetection {
    pub track_id: TrackId,
    pub label: String,
    pub confidence: f64,
    pub bbox: BBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectSource {
    #[default]
    Detector,
    Segmentation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectDetection {
    pub label: String,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_depth: Option<f64>,
    #[serde(default)]
    pub source: ObjectSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: FrameIndex,
    #[serde(default)]
    pub persons: Vec<PersonDetection>,
    #[serde(default)]
    pub actions: Vec<ActionDetection>,
    #[serde(default)]
    pub objects: Vec<ObjectDetection>,
}

impl FrameRecord {
    pub fn empty(frame_index: FrameIndex) -> Self {
        Self {
            frame_index,
            persons: Vec::new(),
            actions: Vec::new(),
            objects: Vec::new(),
        }
    }

    pub fn person(&self, track_id: TrackId) -> Option<&PersonDetection> {
        self.persons.iter().find(|p| p.track_id == track_id)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("input has no metadata record")]
    MissingMetadata,
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown field `{path}`")]
    UnknownField { line: usize, path: String },
    #[error("line {line}: duplicate frame_index {frame_index}")]
    DuplicateFrame { line: usize, frame_index: FrameIndex },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Fail on malformed lines and unknown fields instead of skipping them.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedVideo {
    pub meta: VideoMeta,
    /// Sorted by `frame_index`, no duplicates.
    pub frames: Vec<FrameRecord>,
    pub warnings: Vec<ParseWarning>,
}

fn decode_line<T: DeserializeOwned>(text: &str, line: usize) -> Result<(T, Vec<String>), IngestError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let mut ignored = Vec::new();
    let value = serde_ignored::deserialize(&mut de, |path| ignored.push(path.to_string()))
        .map_err(|e| IngestError::Malformed {
            line,
            message: e.to_string(),
        })?;
    de.end().map_err(|e| IngestError::Malformed {
        line,
        message: e.to_string(),
    })?;
    Ok((value, ignored))
}

/// Reads a metadata record followed by frame records.
pub fn parse_video_record<R: BufRead>(mut reader: R, opts: ParseOptions) -> Result<ParsedVideo, IngestError> {
    let mut meta: Option<VideoMeta> = None;
    let mut frames: Vec<(usize, FrameRecord)> = Vec::new();
    let mut warnings = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0usize;

    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let text = match std::str::from_utf8(&buf) {
            Ok(t) => t.trim(),
            Err(e) => {
                let err = IngestError::Malformed {
                    line: line_no,
                    message: format!("invalid UTF-8: {e}"),
                };
                if opts.strict || meta.is_none() {
                    return Err(err);
                }
                warnings.push(ParseWarning {
                    line: line_no,
                    message: format!("skipped: {err}"),
                });
                continue;
            }
        };
        if text.is_empty() {
            continue;
        }

        if meta.is_none() {
            let (m, ignored) = decode_line::<VideoMeta>(text, line_no)?;
            check_ignored(ignored, line_no, opts, &mut warnings)?;
            meta = Some(m);
            continue;
        }

        match decode_line::<FrameRecord>(text, line_no) {
            Ok((frame, ignored)) => {
                check_ignored(ignored, line_no, opts, &mut warnings)?;
                frames.push((line_no, frame));
            }
            Err(e) if !opts.strict => warnings.push(ParseWarning {
                line: line_no,
                message: format!("skipped: {e}"),
            }),
            Err(e) => return Err(e),
        }
    }

    let meta = meta.ok_or(IngestError::MissingMetadata)?;

    let in_order = frames.windows(2).all(|w| w[0].1.frame_index < w[1].1.frame_index);
    if !in_order {
        // stable, so the later line of a duplicate pair is reported
        frames.sort_by_key(|(_, f)| f.frame_index);
        if let Some(w) = frames.windows(2).find(|w| w[0].1.frame_index == w[1].1.frame_index) {
            return Err(IngestError::DuplicateFrame {
                line: w[1].0,
                frame_index: w[1].1.frame_index,
            });
        }
        warnings.push(ParseWarning {
            line: 0,
            message: "frame records were out of order and have been sorted by frame_index".into(),
        });
    }

    Ok(ParsedVideo {
        meta,
        frames: frames.into_iter().map(|(_, f)| f).collect(),
        warnings,
    })
}

fn check_ignored(
    ignored: Vec<String>,
    line: usize,
    opts: ParseOptions,
    warnings: &mut Vec<ParseWarning>,
) -> Result<(), IngestError> {
    if ignored.is_empty() {
        return Ok(());
    }
    if opts.strict {
        return Err(IngestError::UnknownField {
            line,
            path: ignored.into_iter().next().unwrap_or_default(),
        });
    }
    warnings.push(ParseWarning {
        line,
        message: format!("ignored unknown fields: {}", ignored.join(", ")),
    });
    Ok(())
}

pub fn parse_video_bytes(data: &[u8], opts: ParseOptions) -> Result<ParsedVideo, IngestError> {
    parse_video_record(data, opts)
}

/// Writes the metadata record and one line per frame.
pub fn write_video_record<W: Write>(mut out: W, meta: &VideoMeta, frames: &[FrameRecord]) -> io::Result<()> {
    serde_json::to_writer(&mut out, meta)?;
    out.write_all(b"\n")?;
    for f in frames {
        serde_json::to_writer(&mut out, f)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warn,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    InvalidMeta,
    FrameOrder,
    DuplicateTrack,
    OrphanAction,
    ConfidenceOutOfRange,
    MalformedBBox,
    BBoxOutsideFrame,
    DepthOutOfRange,
    PixelSampleOutOfRange,
    PixelSampleCapExceeded,
    EmptyLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub kind: IssueKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_index: Option<FrameIndex>,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warn => "warning",
            Severity::Error => "error",
        };
        match self.frame_index {
            Some(i) => write!(f, "{sev}: frame {i}: {}", self.message),
            None => write!(f, "{sev}: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warn)
    }

    fn push(&mut self, severity: Severity, kind: IssueKind, frame_index: Option<FrameIndex>, message: String) {
        self.issues.push(ValidationIssue {
            severity,
            kind,
            frame_index,
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

fn unit_range(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

/// Checks a parsed video against the schema's semantic constraints.
pub fn validate(meta: &VideoMeta, frames: &[FrameRecord], cfg: &PipelineConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    use IssueKind::*;
    use Severity::*;

    if !(meta.fps.is_finite() && meta.fps > 0.0) {
        report.push(Error, InvalidMeta, None, format!("fps must be positive, got {}", meta.fps));
    }
    if meta.width == 0 || meta.height == 0 {
        report.push(
            Error,
            InvalidMeta,
            None,
            format!("frame size must be positive, got {}x{}", meta.width, meta.height),
        );
    }
    let (w, h) = (meta.width as f64, meta.height as f64);

    let check_box = |report: &mut ValidationReport, frame: FrameIndex, what: &str, b: &BBox| {
        if !b.is_well_formed() {
            report.push(Error, MalformedBBox, Some(frame), format!("{what}: malformed bbox {b:?}"));
        } else if b.x2 > w || b.y2 > h {
            report.push(
                Warn,
                BBoxOutsideFrame,
                Some(frame),
                format!("{what}: bbox {b:?} exceeds {}x{}", meta.width, meta.height),
            );
        }
    };

    for pair in frames.windows(2) {
        if pair[0].frame_index >= pair[1].frame_index {
            report.push(
                Error,
                FrameOrder,
                Some(pair[1].frame_index),
                format!(
                    "frame_index {} does not increase after {}",
                    pair[1].frame_index, pair[0].frame_index
                ),
            );
        }
    }

    for frame in frames {
        let fi = frame.frame_index;
        let mut seen = HashSet::new();
        for p in &frame.persons {
            let what = format!("person {}", p.track_id);
            if !seen.insert(p.track_id) {
                report.push(Error, DuplicateTrack, Some(fi), format!("{what} appears twice"));
            }
            check_box(&mut report, fi, &what, &p.bbox);
            if let Some(d) = p.mean_depth {
                if !unit_range(d) {
                    report.push(Error, DepthOutOfRange, Some(fi), format!("{what}: mean_depth {d} outside [0, 1]"));
                }
            }
            if let Some(samples) = &p.pixel_samples {
                if let Some(bad) = samples.iter().find(|s| !s.in_range()) {
                    report.push(
                        Error,
                        PixelSampleOutOfRange,
                        Some(fi),
                        format!("{what}: pixel sample {:?} out of range", <[f64; 3]>::from(*bad)),
                    );
                }
                if samples.len() > cfg.pixel_sample_cap as usize {
                    report.push(
                        Warn,
                        PixelSampleCapExceeded,
                        Some(fi),
                        format!("{what}: {} pixel samples exceed cap {}", samples.len(), cfg.pixel_sample_cap),
                    );
                }
            }
        }

        let persons: BTreeSet<TrackId> = frame.persons.iter().map(|p| p.track_id).collect();
        for a in &frame.actions {
            let what = format!("action `{}` of track {}", a.label, a.track_id);
            if a.label.trim().is_empty() {
                report.push(Error, EmptyLabel, Some(fi), format!("track {}: empty action label", a.track_id));
            }
            if !unit_range(a.confidence) {
                report.push(
                    Error,
                    ConfidenceOutOfRange,
                    Some(fi),
                    format!("{what}: confidence {} outside [0, 1]", a.confidence),
                );
            }
            if !persons.contains(&a.track_id) {
                report.push(Warn, OrphanAction, Some(fi), format!("{what}: no person with that track_id"));
            }
            check_box(&mut report, fi, &what, &a.bbox);
        }

        for o in &frame.objects {
            let what = format!("object `{}`", o.label);
            if o.label.trim().is_empty() {
                report.push(Error, EmptyLabel, Some(fi), "empty object label".into());
            }
            check_box(&mut report, fi, &what, &o.bbox);
            if let Some(d) = o.mean_depth {
                if !unit_range(d) {
                    report.push(Error, DepthOutOfRange, Some(fi), format!("{what}: mean_depth {d} outside [0, 1]"));
                }
            }
        }
    }
    report
}
