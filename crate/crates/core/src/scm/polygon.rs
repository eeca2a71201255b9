use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ScmError;
use crate::geometry::{self, Point};

/// Interior angles closer than this (in units of π) to 0 or 2 are rejected.
const ANGLE_MARGIN: f64 = 1e-9;

/// A simple counterclockwise polygon with four vertices marked as the
/// images of rectangle corners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Complex64>,
    alphas: Vec<f64>,
    corners: [usize; 4],
}

impl Polygon {
    pub fn vertices(&self) -> &[Complex64] {
        &self.vertices
    }

    /// Interior angle at each vertex divided by π.
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn corner_indices(&self) -> [usize; 4] {
        self.corners
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn points(&self) -> Vec<Point> {
        self.vertices.iter().map(|w| [w.re, w.im]).collect()
    }

    pub fn diameter(&self) -> f64 {
        geometry::diameter(&self.points())
    }

    /// Same polygon with vertex `start` moved to index 0.
    pub(crate) fn rotated(&self, start: usize) -> Polygon {
        let n = self.len();
        let reindex = |k: usize| (k + n - start) % n;
        let mut corners = self.corners.map(reindex);
        corners.sort_unstable();
        Polygon {
            vertices: (0..n).map(|k| self.vertices[(k + start) % n]).collect(),
            alphas: (0..n).map(|k| self.alphas[(k + start) % n]).collect(),
            corners,
        }
    }
}

/// Checks the polygon preconditions and computes interior angles.
pub fn validate_polygon(vertices: &[Complex64], corner_indices: [usize; 4]) -> Result<Polygon, ScmError> {
    let n = vertices.len();
    if n < 4 {
        return Err(ScmError::TooFewVertices(n));
    }
    if vertices.iter().any(|w| !w.is_finite()) {
        return Err(ScmError::NonFinite);
    }
    if corner_indices.windows(2).any(|w| w[0] >= w[1]) || corner_indices[3] >= n {
        return Err(ScmError::InvalidCorners(corner_indices));
    }
    let pts: Vec<Point> = vertices.iter().map(|w| [w.re, w.im]).collect();
    let scale = geometry::diameter(&pts);
    for i in 0..n {
        if geometry::dist(pts[i], pts[(i + 1) % n]) <= 1e-14 * scale {
            return Err(ScmError::DegenerateVertex(i));
        }
    }
    if !geometry::is_simple(&pts) {
        return Err(ScmError::NotSimple);
    }
    if geometry::signed_area(&pts) <= 0.0 {
        return Err(ScmError::ClockwiseOrder);
    }
    let alphas: Vec<f64> = (0..n)
        .map(|j| {
            let incoming = vertices[j] - vertices[(j + n - 1) % n];
            let outgoing = vertices[(j + 1) % n] - vertices[j];
            let turn = (outgoing / incoming).arg();
            1.0 - turn / PI
        })
        .collect();
    if let Some(j) = alphas
        .iter()
        .position(|&a| a <= ANGLE_MARGIN || a >= 2.0 - ANGLE_MARGIN)
    {
        return Err(ScmError::DegenerateVertex(j));
    }
    Ok(Polygon {
        vertices: vertices.to_vec(),
        alphas,
        corners: corner_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn unit_square_has_right_angles() {
        let sq = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)];
        let p = validate_polygon(&sq, [0, 1, 2, 3]).unwrap();
        for &a in p.alphas() {
            assert!((a - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn clockwise_square_rejected() {
        let sq = [c(0.0, 0.0), c(0.0, 1.0), c(1.0, 1.0), c(1.0, 0.0)];
        assert!(matches!(validate_polygon(&sq, [0, 1, 2, 3]), Err(ScmError::ClockwiseOrder)));
    }

    #[test]
    fn l_shaped_hexagon() {
        let l = [c(0.0, 0.0), c(2.0, 0.0), c(2.0, 1.0), c(1.0, 1.0), c(1.0, 2.0), c(0.0, 2.0)];
        let p = validate_polygon(&l, [0, 1, 4, 5]).unwrap();
        let reflex = p.alphas().iter().filter(|&&a| (a - 1.5).abs() < 1e-12).count();
        let right = p.alphas().iter().filter(|&&a| (a - 0.5).abs() < 1e-12).count();
        assert_eq!((reflex, right), (1, 5));
        assert!((p.alphas().iter().sum::<f64>() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn bowtie_and_spike_rejected() {
        let bow = [c(0.0, 0.0), c(1.0, 1.0), c(1.0, 0.0), c(0.0, 1.0)];
        assert!(matches!(validate_polygon(&bow, [0, 1, 2, 3]), Err(ScmError::NotSimple)));
        let dup = [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)];
        assert!(matches!(validate_polygon(&dup, [0, 1, 2, 3]), Err(ScmError::DegenerateVertex(_))));
        let tri = [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)];
        assert!(matches!(validate_polygon(&tri, [0, 1, 2, 2]), Err(ScmError::TooFewVertices(3))));
    }

    #[test]
    fn corners_must_increase() {
        let sq = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)];
        assert!(matches!(validate_polygon(&sq, [0, 2, 1, 3]), Err(ScmError::InvalidCorners(_))));
    }

    #[test]
    fn rotation_keeps_corners_sorted() {
        let pent = [c(0.0, 0.0), c(2.0, 0.0), c(2.5, 1.0), c(1.0, 2.0), c(-0.5, 1.0)];
        let p = validate_polygon(&pent, [0, 1, 3, 4]).unwrap();
        let r = p.rotated(3);
        assert_eq!(r.vertices()[0], pent[3]);
        assert_eq!(r.corner_indices(), [0, 1, 2, 3]);
    }
}
