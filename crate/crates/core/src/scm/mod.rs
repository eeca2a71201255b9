//! Conformal maps from generalized quadrilaterals onto rectangles.
//!
//! A [`RectangleMap`] composes two maps: a Schwarz–Christoffel strip map from
//! the strip `0 ≤ Im z ≤ 1` onto the polygon, and `z = ln(sn(q | m)) / π`
//! from the rectangle `[-K, K] × [0, K']` onto the strip. The four marked
//! polygon corners go to the rectangle corners `K`, `K + iK'`, `-K + iK'`
//! and `-K` (in that order).

pub mod elliptic;
pub mod polygon;
pub mod quadrature;
pub mod strip;

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

pub use elliptic::jacobi_sn;
pub use polygon::{validate_polygon, Polygon};
pub use strip::{
    integrate_strip, solve_parameter_problem, strip_factor, strip_to_polygon, StripMap, StripMapParams,
};

use elliptic::{ellipk_pair, inverse_sn, modulus_from_strip_length, sncndn};
use strip::upper_arg;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScmError {
    #[error("polygon needs at least 4 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("corner indices {0:?} are not strictly increasing vertex indices")]
    InvalidCorners([usize; 4]),
    #[error("polygon is self-intersecting")]
    NotSimple,
    #[error("polygon vertices are in clockwise order")]
    ClockwiseOrder,
    #[error("degenerate vertex {0} (repeated point or zero/full interior angle)")]
    DegenerateVertex(usize),
    #[error("prevertex {prevertex} lies strictly inside the integration segment")]
    SingularInterior { prevertex: usize },
    #[error("quadrature subdivision budget exhausted")]
    QuadratureBudget,
    #[error("parameter problem did not converge (residual {residual:.3e})")]
    NoConvergence { residual: f64 },
    #[error("prevertex crowding: gap {gap:.3e}")]
    Crowding { gap: f64 },
    #[error("solved parameters do not match the polygon")]
    ParamsMismatch,
    #[error("point {0} is outside the strip")]
    OutsideStrip(Complex64),
    #[error("point {0} is outside the polygon")]
    OutsidePolygon(Complex64),
    #[error("point {0} is outside the rectangle")]
    OutsideRectangle(Complex64),
    #[error("inverse map failed to converge at {0}")]
    InverseNoConvergence(Complex64),
    #[error("elliptic parameter m = {0} outside [0, 1)")]
    ModulusOutOfRange(f64),
}

/// Solved map between a marked polygon and its rectangle.
#[derive(Clone, Debug)]
pub struct RectangleMap {
    strip: StripMap,
    polygon: Polygon,
    m: f64,
    m1: f64,
    k: f64,
    kp: f64,
}

impl RectangleMap {
    pub fn new(polygon: &Polygon) -> Result<Self, ScmError> {
        let strip = StripMap::solve(polygon)?;
        Ok(Self::from_strip(polygon, strip))
    }

    pub fn from_strip(polygon: &Polygon, strip: StripMap) -> Self {
        let (m, m1) = modulus_from_strip_length(strip.params().length);
        let (k, kp) = ellipk_pair(m, m1);
        RectangleMap {
            strip,
            polygon: polygon.clone(),
            m,
            m1,
            k,
            kp,
        }
    }

    pub fn polygon(&self) -> &Polygon {
        &self.polygon
    }

    pub fn strip(&self) -> &StripMap {
        &self.strip
    }

    /// Elliptic parameter `m` of the rectangle.
    pub fn modulus_m(&self) -> f64 {
        self.m
    }

    /// Rectangle height over width, `K' / 2K`.
    pub fn aspect(&self) -> f64 {
        self.kp / (2.0 * self.k)
    }

    /// Half-width `K` and height `K'` of the rectangle `[-K, K] × [0, K']`.
    pub fn rectangle(&self) -> (f64, f64) {
        (self.k, self.kp)
    }

    /// Rectangle corners in marked-corner order.
    pub fn rectangle_corners(&self) -> [Complex64; 4] {
        let (k, kp) = (self.k, self.kp);
        [
            Complex64::new(k, 0.0),
            Complex64::new(k, kp),
            Complex64::new(-k, kp),
            Complex64::new(-k, 0.0),
        ]
    }

    fn in_rectangle(&self, q: Complex64) -> bool {
        let tol = 1e-12 * (self.k + self.kp);
        q.is_finite() && q.re.abs() <= self.k + tol && q.im >= -tol && q.im <= self.kp + tol
    }

    /// Rectangle → strip, `z = ln(sn(q | m)) / π`.
    pub fn rect_to_strip(&self, q: Complex64) -> Result<Complex64, ScmError> {
        if !self.in_rectangle(q) {
            return Err(ScmError::OutsideRectangle(q));
        }
        let q = Complex64::new(q.re.clamp(-self.k, self.k), q.im.clamp(0.0, self.kp));
        let s = sncndn(q, self.m, self.m1).0;
        let r = s.norm();
        let re = if r == 0.0 {
            f64::NEG_INFINITY
        } else if r.is_finite() {
            r.ln() / PI
        } else {
            f64::INFINITY
        };
        // Strip ends are clamped by the strip map itself.
        let re = re.clamp(-1e3, 1e3);
        Ok(Complex64::new(re, upper_arg(s) / PI))
    }

    /// Strip → rectangle, the inverse of [`Self::rect_to_strip`].
    pub fn strip_to_rect(&self, z: Complex64) -> Result<Complex64, ScmError> {
        if z.is_nan() || z.im < -1e-12 || z.im > 1.0 + 1e-12 {
            return Err(ScmError::OutsideStrip(z));
        }
        let z = Complex64::new(z.re.clamp(-200.0, 200.0), z.im.clamp(0.0, 1.0));
        let s = (z * PI).exp();
        // exp(iπ) has a rounding-level imaginary part; keep it on the real axis.
        let s = if z.im == 1.0 || z.im == 0.0 { Complex64::new(s.re, 0.0) } else { s };
        Ok(inverse_sn(s, self.m, self.m1))
    }

    /// Rectangle → polygon.
    pub fn rect_to_polygon(&self, q: Complex64) -> Result<Complex64, ScmError> {
        let z = self.rect_to_strip(q)?;
        self.strip.strip_to_polygon(z)
    }

    /// Polygon → rectangle.
    pub fn polygon_to_rect(&self, w: Complex64) -> Result<Complex64, ScmError> {
        let z = self.strip.polygon_to_strip(w)?;
        self.strip_to_rect(z)
    }

    /// Rectangle point → unit square, corners in marked order going to
    /// `(1, 0)`, `(1, 1)`, `(0, 1)`, `(0, 0)`.
    pub fn rect_to_unit(&self, q: Complex64) -> Complex64 {
        Complex64::new((q.re + self.k) / (2.0 * self.k), q.im / self.kp)
    }

    pub fn unit_to_rect(&self, u: Complex64) -> Complex64 {
        Complex64::new(-self.k + 2.0 * self.k * u.re, self.kp * u.im)
    }
}

/// Free-function form of [`RectangleMap::rect_to_strip`].
pub fn rect_to_strip(q: Complex64, map: &RectangleMap) -> Result<Complex64, ScmError> {
    map.rect_to_strip(q)
}

/// Free-function form of [`RectangleMap::polygon_to_rect`].
pub fn polygon_to_rect(w: Complex64, map: &RectangleMap) -> Result<Complex64, ScmError> {
    map.polygon_to_rect(w)
}

/// Free-function form of [`RectangleMap::rect_to_polygon`].
pub fn rect_to_polygon(q: Complex64, map: &RectangleMap) -> Result<Complex64, ScmError> {
    map.rect_to_polygon(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rect(w: f64, h: f64) -> Polygon {
        validate_polygon(&[c(0.0, 0.0), c(w, 0.0), c(w, h), c(0.0, h)], [0, 1, 2, 3]).unwrap()
    }

    #[test]
    fn unit_square_has_unit_aspect() {
        let map = RectangleMap::new(&rect(1.0, 1.0)).unwrap();
        assert!((map.aspect() - 1.0).abs() < 1e-6, "aspect {}", map.aspect());
        assert!(map.modulus_m() > 0.0 && map.modulus_m() < 1.0);
    }

    #[test]
    fn two_by_one_rectangle() {
        let map = RectangleMap::new(&rect(2.0, 1.0)).unwrap();
        assert!((map.aspect() - 2.0).abs() < 1e-6, "aspect {}", map.aspect());
    }

    #[test]
    fn corners_map_to_rectangle_corners() {
        let poly = validate_polygon(
            &[c(0.0, 0.0), c(2.0, -0.3), c(2.4, 1.3), c(0.3, 1.8), c(-0.6, 0.9)],
            [0, 1, 2, 4],
        )
        .unwrap();
        let map = RectangleMap::new(&poly).unwrap();
        let corners = map.rectangle_corners();
        for (i, &ci) in poly.corner_indices().iter().enumerate() {
            let q = map.polygon_to_rect(poly.vertices()[ci]).unwrap();
            assert!((q - corners[i]).norm() < 1e-6, "corner {i}: {q} vs {}", corners[i]);
            let w = map.rect_to_polygon(corners[i]).unwrap();
            assert!((w - poly.vertices()[ci]).norm() < 1e-6 * poly.diameter());
        }
    }

    #[test]
    fn square_center_maps_to_rectangle_center() {
        let map = RectangleMap::new(&rect(1.0, 1.0)).unwrap();
        let (k, kp) = map.rectangle();
        let q = map.polygon_to_rect(c(0.5, 0.5)).unwrap();
        assert!((q - c(0.0, 0.5 * kp)).norm() < 1e-6 * k, "q = {q}");
        let w = map.rect_to_polygon(c(0.0, 0.5 * kp)).unwrap();
        assert!((w - c(0.5, 0.5)).norm() < 1e-6);
    }

    #[test]
    fn outside_rectangle_rejected() {
        let map = RectangleMap::new(&rect(1.0, 1.0)).unwrap();
        let (k, _) = map.rectangle();
        assert!(matches!(map.rect_to_polygon(c(2.0 * k, 0.1)), Err(ScmError::OutsideRectangle(_))));
    }
}
