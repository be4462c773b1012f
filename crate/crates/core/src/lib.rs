//! Engine for a turn-based drawing game between two painters and a machine.
//!
//! Humans draw in red and green over a black theme; a recurrent
//! mixture-density sketcher proposes continuation strokes in blue, which the
//! painters accept, edit or reject. Around that loop sit the pieces needed to
//! run it on a physical canvas: stroke recovery from camera captures and
//! projective calibration between camera, canvas and projector.

pub mod calibration;
pub mod dataset;
pub mod par;
pub mod session;
pub mod sketcher;
pub mod stroke;
pub mod vision;

pub use stroke::{PlayerChannel, Point, Sketch, Stroke, Stroke5Row};
