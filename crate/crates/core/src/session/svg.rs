use std::fmt::Write;

use crate::stroke::{Sketch, Stroke};

fn polyline(out: &mut String, s: &Stroke, dashed: bool) {
    let [r, g, b] = s.channel.rgb();
    let points: Vec<String> = s
        .points
        .iter()
        .map(|p| format!("{:.3},{:.3}", p.x, p.y))
        .collect();
    let dash = if dashed {
        r#" stroke-dasharray="6 4""#
    } else {
        ""
    };
    let _ = writeln!(
        out,
        r#"  <polyline class="{}" points="{}" fill="none" stroke="rgb({r},{g},{b})" stroke-width="2" stroke-linecap="round" stroke-linejoin="round"{dash}/>"#,
        s.channel,
        points.join(" ")
    );
}

/// SVG in canvas millimeters. A pending suggestion, if given, is drawn
/// dashed on top.
pub fn render_svg(sketch: &Sketch, pending: Option<&Sketch>) -> String {
    let (w, h) = sketch.canvas_size;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}mm" height="{h}mm" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"  <rect width="{w}" height="{h}" fill="white"/>"#);
    for s in &sketch.strokes {
        polyline(&mut out, s, false);
    }
    for s in pending.iter().flat_map(|p| p.strokes.iter()) {
        polyline(&mut out, s, true);
    }
    out.push_str("</svg>\n");
    out
}
