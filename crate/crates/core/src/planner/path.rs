use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{self, Point};

/// Desired path as a polyline with per-sample tangent headings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub waypoints: Vec<Point>,
    pub goal: Point,
    pub headings: Vec<f64>,
    #[serde(skip)]
    arclength: Vec<f64>,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PathError {
    #[error("a path needs at least two waypoints")]
    TooShort,
    #[error("waypoints {0} and {1} coincide")]
    RepeatedWaypoint(usize, usize),
}

impl PathSpec {
    /// Path through `waypoints`, goal at the last one; headings follow the
    /// polyline (central differences inside, one-sided at the ends).
    pub fn from_waypoints(waypoints: Vec<Point>) -> Result<Self, PathError> {
        let n = waypoints.len();
        if n < 2 {
            return Err(PathError::TooShort);
        }
        if let Some(i) = (1..n).find(|&i| waypoints[i] == waypoints[i - 1]) {
            return Err(PathError::RepeatedWaypoint(i - 1, i));
        }
        let dir = |a: Point, b: Point| (b[1] - a[1]).atan2(b[0] - a[0]);
        let headings = (0..n)
            .map(|i| {
                let (a, b) = (waypoints[i.saturating_sub(1)], waypoints[(i + 1).min(n - 1)]);
                dir(a, b)
            })
            .collect();
        Ok(Self::with_headings(waypoints, headings))
    }

    fn with_headings(waypoints: Vec<Point>, headings: Vec<f64>) -> Self {
        let mut arclength = vec![0.0];
        for w in waypoints.windows(2) {
            let last = *arclength.last().unwrap();
            arclength.push(last + geometry::dist(w[0], w[1]));
        }
        PathSpec {
            goal: *waypoints.last().unwrap(),
            waypoints,
            headings,
            arclength,
        }
    }

    /// S-shaped path from the origin heading +x: a left half-circle followed
    /// by a right half-circle, both of radius `radius`, sampled every
    /// `spacing` metres of arc.
    pub fn s_path(radius: f64, spacing: f64) -> Self {
        let per_arc = ((PI * radius / spacing).ceil() as usize).max(2);
        let mut pts = Vec::with_capacity(2 * per_arc + 1);
        let mut hdg = Vec::with_capacity(2 * per_arc + 1);
        for k in 0..=per_arc {
            let a = PI * k as f64 / per_arc as f64;
            pts.push([radius * a.sin(), radius * (1.0 - a.cos())]);
            hdg.push(a);
        }
        for k in 1..=per_arc {
            let a = PI * k as f64 / per_arc as f64;
            pts.push([-radius * a.sin(), 3.0 * radius - radius * a.cos()]);
            hdg.push(PI - a);
        }
        let hdg = hdg.into_iter().map(crate::sim::vehicle::wrap_angle).collect();
        Self::with_headings(pts, hdg)
    }

    /// Rebuilds derived data after deserialization.
    pub fn reindex(self) -> Self {
        Self::with_headings(self.waypoints, self.headings)
    }

    pub fn length(&self) -> f64 {
        *self.arclength.last().unwrap_or(&0.0)
    }

    /// Arc length of the path point nearest to `p` (first one on ties).
    pub fn project(&self, p: Point) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for (i, w) in self.waypoints.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let ab = geometry::sub(b, a);
            let len2 = ab[0] * ab[0] + ab[1] * ab[1];
            let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
            let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
            let d = geometry::dist(p, q);
            if d < best.0 {
                best = (d, self.arclength[i] + t * len2.sqrt());
            }
        }
        best.1
    }

    /// Point and heading at arc length `s`; beyond either end the path
    /// continues straight along its end tangent.
    pub fn sample(&self, s: f64) -> (Point, f64) {
        let n = self.waypoints.len();
        let total = self.length();
        if s >= total {
            let h = self.headings[n - 1];
            let e = s - total;
            let g = self.waypoints[n - 1];
            return ([g[0] + e * h.cos(), g[1] + e * h.sin()], h);
        }
        if s <= 0.0 {
            let h = self.headings[0];
            let g = self.waypoints[0];
            return ([g[0] + s * h.cos(), g[1] + s * h.sin()], h);
        }
        let i = self.arclength.partition_point(|&a| a <= s).clamp(1, n - 1) - 1;
        let seg = self.arclength[i + 1] - self.arclength[i];
        let t = (s - self.arclength[i]) / seg;
        let (a, b) = (self.waypoints[i], self.waypoints[i + 1]);
        let dh = crate::sim::vehicle::wrap_angle(self.headings[i + 1] - self.headings[i]);
        (
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
            crate::sim::vehicle::wrap_angle(self.headings[i] + t * dh),
        )
    }

    /// `count` points evenly spaced over arc lengths `[s0, s0 + length]`,
    /// and the heading at the window end.
    pub fn window(&self, s0: f64, length: f64, count: usize) -> (Vec<Point>, f64) {
        let count = count.max(1);
        let step = if count > 1 { length / (count - 1) as f64 } else { 0.0 };
        let pts = (0..count).map(|k| self.sample(s0 + step * k as f64).0).collect();
        (pts, self.sample(s0 + length).1)
    }

    /// Distance from `p` to the path polyline.
    pub fn distance(&self, p: Point) -> f64 {
        geometry::point_polyline_distance(p, &self.waypoints)
    }
}
