use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// A point (or displacement) in the plane, metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance_sq(self, other: Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(self, other: Self) -> T {
        self.distance_sq(other).sqrt()
    }

    pub fn sub(self, other: Self) -> Self {
        Self::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(self, other: Self) -> Self {
        Self::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k)
    }

    pub fn norm(self) -> T {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    /// z-component of the 2-D cross product; positive when `other` lies to the left of `self`.
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn lerp(self, other: Self, w: T) -> Self {
        self.add(other.sub(self).scale(w))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Piecewise-linear curve parameterised by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline<T> {
    points: Vec<Point2<T>>,
    cumulative: Vec<T>,
}

/// Closest-point query result against a [`Polyline`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection<T> {
    /// Arc-length coordinate, may fall outside `[0, length]` when the query lies beyond an end.
    pub arc: T,
    /// Signed lateral offset, positive to the left of the direction of travel.
    pub lateral: T,
}

impl<T: Scalar> Polyline<T> {
    /// Returns `None` for fewer than two points or zero-length segments.
    pub fn new(points: Vec<Point2<T>>) -> Option<Self> {
        if points.len() < 2 {
            return None;
        }
        let mut cumulative = Vec::with_capacity(points.len());
        cumulative.push(T::zero());
        for w in points.windows(2) {
            let len = w[0].distance(w[1]);
            if !(len > T::zero()) {
                return None;
            }
            let last = *cumulative.last().unwrap();
            cumulative.push(last + len);
        }
        Some(Self { points, cumulative })
    }

    pub fn points(&self) -> &[Point2<T>] {
        &self.points
    }

    pub fn length(&self) -> T {
        *self.cumulative.last().unwrap()
    }

    fn segment_for(&self, arc: T) -> usize {
        let n = self.points.len() - 1;
        match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&arc).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    pub fn tangent(&self, arc: T) -> Point2<T> {
        let i = self.segment_for(arc);
        let d = self.points[i + 1].sub(self.points[i]);
        d.scale(T::one() / d.norm())
    }

    /// Position at arc length `arc`; extrapolates linearly past either end.
    pub fn point_at(&self, arc: T) -> Point2<T> {
        let i = self.segment_for(arc);
        let t = self.tangent(arc);
        self.points[i].add(t.scale(arc - self.cumulative[i]))
    }

    /// Left-pointing unit normal at `arc`.
    pub fn normal(&self, arc: T) -> Point2<T> {
        let t = self.tangent(arc);
        Point2::new(-t.y, t.x)
    }

    /// Closest point on the curve, with the first and last segments extended to infinity.
    pub fn project(&self, p: Point2<T>) -> Projection<T> {
        let n = self.points.len() - 1;
        let mut best: Option<(T, Projection<T>)> = None;
        for i in 0..n {
            let a = self.points[i];
            let d = self.points[i + 1].sub(a);
            let len = self.cumulative[i + 1] - self.cumulative[i];
            let mut u = p.sub(a).dot(d) / (len * len);
            if i > 0 && u < T::zero() {
                u = T::zero();
            }
            if i + 1 < n && u > T::one() {
                u = T::one();
            }
            let foot = a.add(d.scale(u));
            let dist = foot.distance_sq(p);
            let lateral = d.cross(p.sub(a)) / len;
            let proj = Projection {
                arc: self.cumulative[i] + u * len,
                lateral,
            };
            if best.map_or(true, |(bd, _)| dist < bd) {
                best = Some((dist, proj));
            }
        }
        best.unwrap().1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_arc_and_projection() {
        let line = Polyline::<f64>::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 0.0),
            Point2::new(10.0, 10.0),
        ])
        .unwrap();
        assert_eq!(line.length(), 20.0);
        assert_eq!(line.point_at(15.0), Point2::new(10.0, 5.0));
        let p = line.project(Point2::new(5.0, 1.0));
        assert!((p.arc - 5.0).abs() < 1e-12);
        assert!((p.lateral - 1.0).abs() < 1e-12);
        // beyond the far end extrapolates along the last segment
        let p = line.project(Point2::new(9.0, 14.0));
        assert!((p.arc - 24.0).abs() < 1e-12);
        assert!((p.lateral - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_polylines_rejected() {
        assert!(Polyline::<f64>::new(vec![Point2::new(0.0, 0.0)]).is_none());
        assert!(Polyline::new(vec![Point2::new(1.0, 1.0), Point2::new(1.0, 1.0)]).is_none());
    }

    #[test]
    fn cross_sign_is_left_positive() {
        let heading = Point2::new(1.0f32, 0.0);
        assert!(heading.cross(Point2::new(0.0, 1.0)) > 0.0);
        assert!(heading.cross(Point2::new(0.0, -1.0)) < 0.0);
    }
}
