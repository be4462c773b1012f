use super::Stroke5Row;

/// Spread of the offsets: root mean square of every non-zero `dx` and `dy`
/// component, taken about zero. `None` when there is no non-zero component.
pub fn offset_rms(rows: &[Stroke5Row]) -> Option<f64> {
    let (sum_sq, n) = rows
        .iter()
        .flat_map(|r| [r.dx, r.dy])
        .filter(|v| *v != 0.0)
        .fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (n > 0).then(|| (sum_sq / n as f64).sqrt())
}

/// Divides every offset by [`offset_rms`] and returns the scale used.
///
/// Multiplying the normalized offsets by the scale restores the input. With
/// no non-zero offsets the rows come back unchanged with scale 1.
pub fn normalize_offsets(rows: &[Stroke5Row]) -> (Vec<Stroke5Row>, f64) {
    let scale = match offset_rms(rows) {
        Some(s) if s > 0.0 && s.is_finite() => s,
        _ => return (rows.to_vec(), 1.0),
    };
    (scale_offsets(rows, 1.0 / scale), scale)
}

pub(crate) fn scale_offsets(rows: &[Stroke5Row], factor: f64) -> Vec<Stroke5Row> {
    rows.iter()
        .map(|r| Stroke5Row::new(r.dx * factor, r.dy * factor, r.pen))
        .collect()
}
