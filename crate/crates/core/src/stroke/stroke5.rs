use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{PlayerChannel, Point, Sketch, Stroke, StrokeError};

/// Pen state after reaching the point of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pen {
    /// The pen stays on the paper: this point connects to the next one.
    Down,
    /// The stroke ends at this point.
    Up,
    /// End of drawing. Carries no point.
    End,
}

impl Pen {
    pub fn one_hot(&self) -> [f64; 3] {
        match self {
            Pen::Down => [1.0, 0.0, 0.0],
            Pen::Up => [0.0, 1.0, 0.0],
            Pen::End => [0.0, 0.0, 1.0],
        }
    }

    pub fn index(&self) -> usize {
        match self {
            Pen::Down => 0,
            Pen::Up => 1,
            Pen::End => 2,
        }
    }

    pub fn from_index(i: usize) -> Self {
        match i {
            0 => Pen::Down,
            1 => Pen::Up,
            _ => Pen::End,
        }
    }
}

/// One step of the model-facing encoding: `(dx, dy, p_down, p_up, p_end)`.
///
/// The pen flag is an enum, so exactly one of the three flags is set by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stroke5Row {
    pub dx: f64,
    pub dy: f64,
    pub pen: Pen,
}

impl Stroke5Row {
    pub const START: Stroke5Row = Stroke5Row {
        dx: 0.0,
        dy: 0.0,
        pen: Pen::Down,
    };
    pub const END: Stroke5Row = Stroke5Row {
        dx: 0.0,
        dy: 0.0,
        pen: Pen::End,
    };

    pub fn new(dx: f64, dy: f64, pen: Pen) -> Self {
        Self { dx, dy, pen }
    }

    pub fn to_array(&self) -> [f64; 5] {
        let [a, b, c] = self.pen.one_hot();
        [self.dx, self.dy, a, b, c]
    }

    pub fn from_array(v: [f64; 5]) -> Result<Self, StrokeError> {
        let flags = [v[2], v[3], v[4]];
        let hot: Vec<usize> = flags
            .iter()
            .enumerate()
            .filter(|(_, f)| **f == 1.0)
            .map(|(i, _)| i)
            .collect();
        let cold = flags.iter().filter(|f| **f == 0.0).count();
        if hot.len() != 1 || cold != 2 {
            return Err(StrokeError::InvalidInput(format!(
                "pen flags {flags:?} are not one-hot"
            )));
        }
        if !(v[0].is_finite() && v[1].is_finite()) {
            return Err(StrokeError::InvalidInput("non-finite offset".into()));
        }
        Ok(Self::new(v[0], v[1], Pen::from_index(hot[0])))
    }
}

impl Serialize for Stroke5Row {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Stroke5Row {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = <[f64; 5]>::deserialize(deserializer)?;
        Stroke5Row::from_array(v).map_err(D::Error::custom)
    }
}

/// Encodes a sketch as stroke-5 rows.
///
/// Row 0 is the start token and stands for the first point of the first
/// stroke; every later row carries the offset from the previous point. The
/// last point of each stroke is flagged `Up`, and a single `End` row closes
/// the drawing. When the encoding would exceed `max_len` rows, whole strokes
/// are dropped from the tail.
pub fn to_stroke5(sketch: &Sketch, max_len: usize) -> Result<Vec<Stroke5Row>, StrokeError> {
    let (w, h) = sketch.canvas_size;
    if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
        return Err(StrokeError::InvalidInput(format!(
            "canvas size must be positive, got {w} x {h}"
        )));
    }
    if max_len < 2 {
        return Err(StrokeError::InvalidInput(format!(
            "max_len must be at least 2, got {max_len}"
        )));
    }
    let mut rows = Vec::new();
    let mut prev: Option<Point> = None;
    for (si, stroke) in sketch.strokes.iter().enumerate() {
        if stroke.points.is_empty() {
            return Err(StrokeError::InvalidInput(format!(
                "stroke {si} has no points"
            )));
        }
        let mut group = Vec::with_capacity(stroke.points.len() + 1);
        let last = stroke.points.len() - 1;
        for (pi, p) in stroke.points.iter().enumerate() {
            if !p.is_finite() {
                return Err(StrokeError::NonFinite {
                    stroke: si,
                    point: pi,
                });
            }
            let pen = if pi == last { Pen::Up } else { Pen::Down };
            match prev {
                None => {
                    group.push(Stroke5Row::START);
                    if pi == last {
                        // single-point first stroke: close it with a zero move
                        group.push(Stroke5Row::new(0.0, 0.0, Pen::Up));
                    }
                }
                Some(q) => group.push(Stroke5Row::new(p.x - q.x, p.y - q.y, pen)),
            }
            prev = Some(*p);
        }
        if rows.len() + group.len() + 1 > max_len {
            break;
        }
        rows.extend(group);
    }
    rows.push(Stroke5Row::END);
    Ok(rows)
}

/// Result of decoding stroke-5 rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub sketch: Sketch,
    /// Set when the rows ran out before an `End` row and the drawing was
    /// closed implicitly.
    pub missing_end: bool,
    /// Number of rows consumed, including the `End` row if present.
    pub rows_used: usize,
}

/// Decodes stroke-5 rows, starting the cursor at `origin`.
///
/// Rows produced by [`to_stroke5`] start with the start token, which places
/// the first point at `origin`. Continuation rows (no start token) are
/// decoded the same way, with `origin` being the point the pen left from.
/// Consecutive duplicate points inside a stroke are merged.
pub fn from_stroke5(
    rows: &[Stroke5Row],
    origin: Point,
    channel: PlayerChannel,
    canvas_size: (f64, f64),
) -> Decoded {
    let mut strokes = Vec::new();
    let mut current: Vec<Point> = Vec::new();
    let mut cursor = origin;
    let mut missing_end = true;
    let mut rows_used = 0;
    for row in rows {
        rows_used += 1;
        if row.pen == Pen::End {
            missing_end = false;
            break;
        }
        cursor = Point::new(cursor.x + row.dx, cursor.y + row.dy);
        if current.last() != Some(&cursor) {
            current.push(cursor);
        }
        if row.pen == Pen::Up {
            strokes.push(Stroke::new(channel, std::mem::take(&mut current)));
        }
    }
    if !current.is_empty() {
        strokes.push(Stroke::new(channel, current));
    }
    Decoded {
        sketch: Sketch::new(canvas_size, strokes),
        missing_end,
        rows_used,
    }
}
