use super::{Point, Sketch, Stroke, StrokeError};

/// A plane-to-plane map between coordinate frames.
pub trait PlaneMap {
    fn map(&self, p: Point) -> Result<Point, StrokeError>;
    fn is_invertible(&self) -> bool;
}

/// `p -> A p + t` with `A = [[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            tx,
            ty,
            ..Self::IDENTITY
        }
    }

    pub fn scale(sx: f64, sy: f64) -> Self {
        Self {
            a: sx,
            d: sy,
            ..Self::IDENTITY
        }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn inverse(&self) -> Result<Self, StrokeError> {
        let det = self.det();
        if !self.is_invertible() {
            return Err(StrokeError::NotInvertible);
        }
        let (a, b, c, d) = (self.d / det, -self.b / det, -self.c / det, self.a / det);
        Ok(Self {
            a,
            b,
            c,
            d,
            tx: -(a * self.tx + b * self.ty),
            ty: -(c * self.tx + d * self.ty),
        })
    }
}

impl PlaneMap for Affine {
    fn map(&self, p: Point) -> Result<Point, StrokeError> {
        Ok(Point::new(
            self.a * p.x + self.b * p.y + self.tx,
            self.c * p.x + self.d * p.y + self.ty,
        ))
    }

    fn is_invertible(&self) -> bool {
        let det = self.det();
        det.is_finite() && det.abs() > 1e-12
    }
}

/// Maps every point of a sketch. Channels, stroke structure and the canvas
/// size are carried over unchanged.
pub fn transform_sketch<M: PlaneMap + ?Sized>(
    sketch: &Sketch,
    map: &M,
) -> Result<Sketch, StrokeError> {
    if !map.is_invertible() {
        return Err(StrokeError::NotInvertible);
    }
    let strokes = sketch
        .strokes
        .iter()
        .map(|s| {
            Ok(Stroke::new(
                s.channel,
                s.points
                    .iter()
                    .map(|p| map.map(*p))
                    .collect::<Result<_, _>>()?,
            ))
        })
        .collect::<Result<_, StrokeError>>()?;
    Ok(Sketch::new(sketch.canvas_size, strokes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stroke::PlayerChannel;

    fn sample() -> Sketch {
        Sketch::new(
            (100.0, 100.0),
            vec![
                Stroke::new(
                    PlayerChannel::Red,
                    vec![Point::new(1.0, 2.0), Point::new(30.0, 40.5)],
                ),
                Stroke::new(PlayerChannel::Blue, vec![Point::new(7.25, 9.0)]),
            ],
        )
    }

    #[test]
    fn identity_keeps_sketch() {
        assert_eq!(
            transform_sketch(&sample(), &Affine::IDENTITY).unwrap(),
            sample()
        );
    }

    #[test]
    fn translation_shifts_x() {
        let out = transform_sketch(&sample(), &Affine::translation(10.0, 0.0)).unwrap();
        for (a, b) in sample().strokes.iter().zip(&out.strokes) {
            assert_eq!(a.channel, b.channel);
            for (p, q) in a.points.iter().zip(&b.points) {
                assert_eq!(q.x, p.x + 10.0);
                assert_eq!(q.y, p.y);
            }
        }
    }

    #[test]
    fn map_then_inverse() {
        let m = Affine {
            a: 1.3,
            b: -0.4,
            c: 0.2,
            d: 0.9,
            tx: 12.0,
            ty: -3.0,
        };
        let there = transform_sketch(&sample(), &m).unwrap();
        let back = transform_sketch(&there, &m.inverse().unwrap()).unwrap();
        for (a, b) in sample().strokes.iter().zip(&back.strokes) {
            for (p, q) in a.points.iter().zip(&b.points) {
                assert!(p.distance(q) < 1e-9);
            }
        }
    }

    #[test]
    fn singular_map_is_rejected() {
        let m = Affine::scale(1.0, 0.0);
        assert_eq!(
            transform_sketch(&sample(), &m),
            Err(StrokeError::NotInvertible)
        );
    }
}
