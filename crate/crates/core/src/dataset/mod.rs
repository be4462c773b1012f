//! Training data: QuickDraw-style NDJSON parsing, preprocessing into padded
//! stroke-5 sequences, and recovery of artist sketches from canvas photos.

mod store;
pub mod synthetic;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::calibration::Homography;
use crate::par::{map_collect, Execution};
use crate::stroke::{
    offset_rms, rdp_simplify, to_stroke5, PlayerChannel, Point, Sketch, Stroke, Stroke5Row,
    StrokeError,
};
use crate::vision::{vectorize, ColorPalette, Raster, TraceOptions};

pub use store::{read_dataset, write_dataset, Manifest};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("need at least 2 sketches, got {0}")]
    TooFew(usize),
    #[error("no sketch survived preprocessing ({0} dropped)")]
    Empty(usize),
    #[error(transparent)]
    Stroke(#[from] StrokeError),
    #[error("store: {0}")]
    Store(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A drawing with the category it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSketch {
    pub label: String,
    pub sketch: Sketch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    /// Exactly `max_seq_len` rows; rows from `true_len` on are end tokens.
    pub rows: Vec<Stroke5Row>,
    pub true_len: usize,
    pub label: String,
}

impl TrainingExample {
    /// The unpadded sequence.
    pub fn sequence(&self) -> &[Stroke5Row] {
        &self.rows[..self.true_len]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub max_seq_len: usize,
    pub rdp_epsilon: f64,
    /// Train and validation fractions.
    pub split: (f64, f64),
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            max_seq_len: 250,
            rdp_epsilon: 2.0,
            split: (0.9, 0.1),
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let (t, v) = self.split;
        let open = |f: f64| f > 0.0 && f < 1.0;
        if !open(t) || !open(v) || t + v > 1.0 + 1e-12 {
            return Err(DatasetError::Config(format!(
                "split fractions must lie in (0, 1) and sum to at most 1, got ({t}, {v})"
            )));
        }
        if self.max_seq_len < 2 {
            return Err(DatasetError::Config(
                "max_seq_len must be at least 2".into(),
            ));
        }
        if self.rdp_epsilon.is_nan() || self.rdp_epsilon < 0.0 {
            return Err(DatasetError::Config(
                "rdp_epsilon must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// What happened to the input sketches.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub input: usize,
    pub too_long: usize,
    pub empty: usize,
}

impl BuildReport {
    pub fn dropped(&self) -> usize {
        self.too_long + self.empty
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<TrainingExample>,
    pub val: Vec<TrainingExample>,
    /// Offsets were divided by this value.
    pub offset_scale: f64,
    pub report: BuildReport,
    pub config: DatasetConfig,
}

impl Dataset {
    pub fn train_sequences(&self) -> Vec<&[Stroke5Row]> {
        self.train.iter().map(|e| e.sequence()).collect()
    }

    pub fn val_sequences(&self) -> Vec<&[Stroke5Row]> {
        self.val.iter().map(|e| e.sequence()).collect()
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> DatasetError {
    DatasetError::Parse {
        line,
        message: message.into(),
    }
}

fn number_array(v: &Value, line: usize, what: &str) -> Result<Vec<f64>, DatasetError> {
    let arr = v
        .as_array()
        .ok_or_else(|| parse_err(line, format!("{what} is not an array")))?;
    arr.iter()
        .map(|x| {
            x.as_f64()
                .filter(|f| f.is_finite())
                .ok_or_else(|| parse_err(line, format!("{what} holds a non-number")))
        })
        .collect()
}

/// Parses one drawing. `line` is 1-based and only used in error messages.
///
/// Each `[xs, ys]` pair of the `drawing` field becomes one black stroke in
/// raw dataset units. The canvas is the bounding box of the coordinates,
/// at least 1 x 1.
pub fn parse_quickdraw_line(text: &str, line: usize) -> Result<LabeledSketch, DatasetError> {
    let v: Value = serde_json::from_str(text).map_err(|e| parse_err(line, e.to_string()))?;
    let obj = v
        .as_object()
        .ok_or_else(|| parse_err(line, "not a JSON object"))?;
    let label = obj
        .get("word")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let drawing = obj
        .get("drawing")
        .ok_or_else(|| parse_err(line, "missing \"drawing\" field"))?
        .as_array()
        .ok_or_else(|| parse_err(line, "\"drawing\" is not an array"))?;
    let mut strokes = Vec::with_capacity(drawing.len());
    let (mut max_x, mut max_y) = (1.0f64, 1.0f64);
    for (si, s) in drawing.iter().enumerate() {
        let pair = s
            .as_array()
            .filter(|a| a.len() >= 2)
            .ok_or_else(|| parse_err(line, format!("stroke {si} is not an [xs, ys] pair")))?;
        let xs = number_array(&pair[0], line, "xs")?;
        let ys = number_array(&pair[1], line, "ys")?;
        if xs.len() != ys.len() {
            return Err(parse_err(
                line,
                format!("stroke {si} has {} xs but {} ys", xs.len(), ys.len()),
            ));
        }
        if xs.is_empty() {
            continue;
        }
        if xs.iter().chain(&ys).any(|c| *c < 0.0) {
            return Err(parse_err(
                line,
                format!("stroke {si} has a negative coordinate"),
            ));
        }
        max_x = xs.iter().copied().fold(max_x, f64::max);
        max_y = ys.iter().copied().fold(max_y, f64::max);
        let points = xs.into_iter().zip(ys).map(|(x, y)| Point::new(x, y));
        strokes.push(Stroke::new(PlayerChannel::Black, points.collect()));
    }
    Ok(LabeledSketch {
        label,
        sketch: Sketch::new((max_x, max_y), strokes),
    })
}

/// Parses every non-blank line of an NDJSON document.
pub fn parse_ndjson(text: &str) -> Result<Vec<LabeledSketch>, DatasetError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    map_collect(Execution::Parallel, &lines, |(n, l)| {
        parse_quickdraw_line(l, *n)
    })
    .into_iter()
    .collect()
}

fn simplify(sketch: &Sketch, epsilon: f64) -> Sketch {
    let strokes = sketch
        .strokes
        .iter()
        .map(|s| Stroke::merged(s.channel, rdp_simplify(&s.points, epsilon)))
        .collect();
    Sketch::new(sketch.canvas_size, strokes)
}

fn scaled(rows: &[Stroke5Row], factor: f64) -> Vec<Stroke5Row> {
    crate::stroke::scale_offsets(rows, factor)
}

/// Simplifies, encodes, filters by length, splits and normalizes.
///
/// The split shuffles the surviving sketches with a generator seeded by
/// `cfg.seed`. Offsets of both splits are divided by the root mean square of
/// the non-zero train offsets.
pub fn build_dataset(
    sketches: &[LabeledSketch],
    cfg: &DatasetConfig,
) -> Result<Dataset, DatasetError> {
    cfg.validate()?;
    if sketches.len() < 2 {
        return Err(DatasetError::TooFew(sketches.len()));
    }
    let encoded = map_collect(Execution::Parallel, sketches, |s| {
        to_stroke5(&simplify(&s.sketch, cfg.rdp_epsilon), usize::MAX)
    });
    let mut report = BuildReport {
        input: sketches.len(),
        ..BuildReport::default()
    };
    let mut kept = Vec::new();
    for (s, rows) in sketches.iter().zip(encoded) {
        let rows = rows?;
        if rows.len() < 2 {
            report.empty += 1;
        } else if rows.len() > cfg.max_seq_len {
            report.too_long += 1;
        } else {
            kept.push((s.label.clone(), rows));
        }
    }
    if kept.is_empty() {
        return Err(DatasetError::Empty(report.dropped()));
    }

    let mut order: Vec<usize> = (0..kept.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let n = kept.len();
    let n_train = ((cfg.split.0 * n as f64).round() as usize).clamp(1, n);
    let n_val = ((cfg.split.1 * n as f64).round() as usize).min(n - n_train);

    let train_rows: Vec<Stroke5Row> = order[..n_train]
        .iter()
        .flat_map(|&i| kept[i].1.iter().copied())
        .collect();
    let offset_scale = match offset_rms(&train_rows) {
        Some(s) if s > 0.0 => s,
        _ => 1.0,
    };
    let example = |i: usize| {
        let (label, rows) = &kept[i];
        let mut rows = scaled(rows, 1.0 / offset_scale);
        let true_len = rows.len();
        rows.resize(cfg.max_seq_len, Stroke5Row::END);
        TrainingExample {
            rows,
            true_len,
            label: label.clone(),
        }
    };
    Ok(Dataset {
        train: order[..n_train].iter().map(|&i| example(i)).collect(),
        val: order[n_train..n_train + n_val]
            .iter()
            .map(|&i| example(i))
            .collect(),
        offset_scale,
        report,
        config: cfg.clone(),
    })
}

/// Outcome of vectorizing a set of canvas photos.
#[derive(Debug, Clone)]
pub struct ArchiveReport {
    /// One entry per capture; `None` where the pipeline failed.
    pub sketches: Vec<Option<Sketch>>,
    /// `(capture index, error message)` for each failure.
    pub failures: Vec<(usize, String)>,
}

impl ArchiveReport {
    pub fn recovered(&self) -> Vec<Sketch> {
        self.sketches.iter().flatten().cloned().collect()
    }
}

/// Recovers strokes from photos of finished paintings. A failing capture is
/// reported and skipped; the rest of the batch still runs.
pub fn ingest_artist_archive(
    captures: &[Raster],
    px_to_mm: &Homography,
    palette: &ColorPalette,
    canvas_size: (f64, f64),
) -> ArchiveReport {
    let opts = TraceOptions::default();
    let results = map_collect(Execution::Parallel, captures, |c| {
        vectorize(c, palette, px_to_mm, canvas_size, &opts).map(|v| v.sketch)
    });
    let mut report = ArchiveReport {
        sketches: Vec::with_capacity(results.len()),
        failures: Vec::new(),
    };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => report.sketches.push(Some(s)),
            Err(e) => {
                report.failures.push((i, e.to_string()));
                report.sketches.push(None);
            }
        }
    }
    report
}
