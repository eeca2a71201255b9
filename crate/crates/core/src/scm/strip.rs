//! Schwarz–Christoffel map from the strip `0 ≤ Im z ≤ 1` onto a polygon.
//!
//! The polygon is walked counterclockwise starting at its first marked
//! corner. The four marked corners sit at the strip points `0`, `L`, `L + i`
//! and `i`; the remaining vertices sit on the bottom edge (walk order =
//! increasing `Re z`) or on the top edge (walk order = decreasing `Re z`).
//! Both ends of the strip map to ordinary boundary points of the polygon.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::elliptic::{ellipk_pair, modulus_from_strip_length, sncndn, strip_length_for_aspect};
use super::polygon::Polygon;
use super::quadrature::GaussRule;
use super::ScmError;
use crate::geometry::{self, Location};

/// Nodes per compound subinterval.
pub const DEFAULT_QUAD_ORDER: usize = 8;
/// Nondimensional side-length residual accepted by the parameter solver.
pub const SOLVER_TOLERANCE: f64 = 1e-8;
const SOLVER_MAX_ITER: usize = 100;
const CROWDING_GAP: f64 = 1e-12;
/// Strip points farther out than this (beyond the outermost prevertex) are
/// pulled in; the integrand there is below `exp(-40π)` relative to O(1).
const END_MARGIN: f64 = 40.0;
const MAX_SUBINTERVALS: usize = 20_000;
const NEWTON_ITER: usize = 50;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Solved parameters of a strip map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripMapParams {
    /// Polygon index of the walk start (first marked corner).
    pub start: usize,
    /// Real parts of the prevertices in walk order.
    pub prevertices: Vec<f64>,
    /// Whether each prevertex lies on the top edge `Im z = 1`.
    pub on_top: Vec<bool>,
    /// Strip length `L = z_2 - z_1` between the first two marked corners.
    pub length: f64,
    pub a: Complex64,
    pub c: Complex64,
    pub theta_plus: f64,
    pub theta_minus: f64,
}

impl StripMapParams {
    /// Prevertex of walk index `k` as a strip point.
    pub fn prevertex(&self, k: usize) -> Complex64 {
        Complex64::new(self.prevertices[k], if self.on_top[k] { 1.0 } else { 0.0 })
    }

    /// Number of prevertices on the bottom edge.
    pub fn bottom_count(&self) -> usize {
        self.on_top.iter().filter(|t| !**t).count()
    }

    fn nodes(&self) -> Vec<Complex64> {
        (0..self.prevertices.len()).map(|k| self.prevertex(k)).collect()
    }
}

/// The bracketed term `-i·sinh(±(π/2)(z - z_j))` of the factor for
/// prevertex `j` (walk order), before exponentiation.
pub fn factor_base(z: Complex64, zj: Complex64, top: bool) -> Complex64 {
    let arg = (z - zj) * FRAC_PI_2;
    let s = if top { (-arg).sinh() } else { arg.sinh() };
    -I * s
}

/// One factor of the strip-map integrand.
///
/// `j = 0` is the divergence factor `exp(½(θ₊ − θ₋) z)`; `j = 1..=N` is the
/// vertex factor of walk index `j - 1`, raised to the turning exponent
/// `α_j − 1` (interior angle `α_j π`).
pub fn strip_factor(z: Complex64, j: usize, params: &StripMapParams, polygon: &Polygon) -> Complex64 {
    if j == 0 {
        return (0.5 * (params.theta_plus - params.theta_minus) * z).exp();
    }
    let k = j - 1;
    let n = polygon.len();
    let alpha = polygon.alphas()[(k + params.start) % n];
    factor_base(z, params.prevertex(k), params.on_top[k]).powf(alpha - 1.0)
}

/// Integrand data: prevertices, exponents and the quadrature rules bound to
/// those exponents.
#[derive(Clone, Debug)]
struct Integrand {
    nodes: Vec<Complex64>,
    top: Vec<bool>,
    betas: Vec<f64>,
    divergence: f64,
    legendre: GaussRule,
    jacobi: Vec<GaussRule>,
}

impl Integrand {
    fn new(betas: Vec<f64>, order: usize) -> Self {
        let jacobi = betas.iter().map(|&b| GaussRule::jacobi(order, 0.0, b)).collect();
        Integrand {
            nodes: Vec::new(),
            top: Vec::new(),
            betas,
            divergence: 0.0,
            legendre: GaussRule::legendre(order),
            jacobi,
        }
    }

    fn set_nodes(&mut self, nodes: Vec<Complex64>, top: Vec<bool>) {
        self.nodes = nodes;
        self.top = top;
    }

    fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = (self.divergence * z).exp();
        for ((&zj, &top), &beta) in self.nodes.iter().zip(&self.top).zip(&self.betas) {
            acc *= factor_base(z, zj, top).powf(beta);
        }
        acc
    }

    fn prevertex_at(&self, z: Complex64) -> Option<usize> {
        self.nodes
            .iter()
            .position(|&p| (p - z).norm() <= 1e-14 * (1.0 + p.norm()))
    }

    fn nearest_distance(&self, z: Complex64, skip: Option<usize>) -> f64 {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(k, _)| Some(*k) != skip)
            .map(|(_, &p)| (p - z).norm())
            .fold(f64::INFINITY, f64::min)
    }

    fn integrate(&self, a: Complex64, b: Complex64) -> Result<Complex64, ScmError> {
        if a == b {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let sa = self.prevertex_at(a);
        let sb = self.prevertex_at(b);
        if sa.is_some() && sa == sb {
            // Both ends round to the same prevertex.
            return Ok(Complex64::new(0.0, 0.0));
        }
        let pa = [a.re, a.im];
        let pb = [b.re, b.im];
        for (k, &p) in self.nodes.iter().enumerate() {
            if Some(k) == sa || Some(k) == sb {
                continue;
            }
            if geometry::point_segment_distance([p.re, p.im], pa, pb) <= 1e-14 * (1.0 + p.norm()) {
                return Err(ScmError::SingularInterior { prevertex: k });
            }
        }
        match (sa, sb) {
            (None, None) => self.integrate_from(a, b, None),
            (Some(j), None) => self.integrate_from(a, b, Some(j)),
            (None, Some(j)) => Ok(-self.integrate_from(b, a, Some(j))?),
            (Some(i), Some(j)) => {
                let mid = 0.5 * (a + b);
                Ok(self.integrate_from(a, mid, Some(i))? - self.integrate_from(b, mid, Some(j))?)
            }
        }
    }

    /// Compound rule from `a` (possibly the prevertex `sing`) to the regular
    /// point `b`. Each subinterval is at most half as long as the distance
    /// from its left end to the nearest other prevertex.
    fn integrate_from(&self, a: Complex64, b: Complex64, sing: Option<usize>) -> Result<Complex64, ScmError> {
        let total = b - a;
        let len = total.norm();
        let dir = total / len;
        let mut done = 0.0;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut first = true;
        for _ in 0..MAX_SUBINTERVALS {
            if done >= len {
                return Ok(sum);
            }
            let x = a + dir * done;
            let skip = if first { sing } else { None };
            let d = self.nearest_distance(x, skip);
            let mut h = (0.5 * d).min(len - done);
            if len - done - h < 1e-3 * h {
                h = len - done;
            }
            let half = 0.5 * h;
            match (first, sing) {
                (true, Some(j)) => {
                    let beta = self.betas[j];
                    let rule = &self.jacobi[j];
                    for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                        let z = x + dir * (half * (1.0 + t));
                        sum += self.eval(z) * (w / (1.0 + t).powf(beta)) * dir * half;
                    }
                }
                _ => {
                    let rule = &self.legendre;
                    for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                        let z = x + dir * (half * (1.0 + t));
                        sum += self.eval(z) * *w * dir * half;
                    }
                }
            }
            first = false;
            done += h;
        }
        Err(ScmError::QuadratureBudget)
    }
}

/// Which run of boundary the non-corner vertices of each chain occupy.
#[derive(Clone, Debug)]
struct Layout {
    n: usize,
    corners: [usize; 4],
    /// Number of vertices of chain c1→c2 placed on the bottom edge.
    split12: usize,
    /// Number of vertices of chain c3→c0 placed on the top edge.
    split30: usize,
}

impl Layout {
    fn on_top(&self) -> Vec<bool> {
        let [_, c1, c2, c3] = self.corners;
        (0..self.n)
            .map(|k| {
                if k <= c1 {
                    false
                } else if k < c2 {
                    k - c1 > self.split12
                } else if k <= c3 {
                    true
                } else {
                    k - c3 <= self.split30
                }
            })
            .collect()
    }

    fn unknowns(&self) -> usize {
        self.n - 3
    }

    /// Unconstrained variables → prevertex real parts (walk order).
    fn decode(&self, y: &[f64]) -> (f64, Vec<f64>) {
        let [_, c1, c2, c3] = self.corners;
        let n = self.n;
        let len = y[0].exp();
        let mut x = vec![0.0; n];
        let mut it = y[1..].iter().copied();
        // Chain c0→c1: fractions of [0, L].
        let k1 = c1 - 1;
        let gaps: Vec<f64> = it.by_ref().take(k1).map(f64::exp).chain(std::iter::once(1.0)).collect();
        let total: f64 = gaps.iter().sum();
        let mut acc = 0.0;
        for (i, g) in gaps.iter().take(k1).enumerate() {
            acc += g;
            x[1 + i] = len * acc / total;
        }
        x[c1] = len;
        // Chain c1→c2: bottom run right of L, then top run right of L.
        let inner12 = c2 - c1 - 1;
        let bottom12 = self.split12;
        let top12 = inner12 - bottom12;
        let mut acc = len;
        for i in 0..bottom12 {
            acc += it.next().unwrap().exp();
            x[c1 + 1 + i] = acc;
        }
        let mut acc = len;
        for i in 0..top12 {
            acc += it.next().unwrap().exp();
            x[c2 - 1 - i] = acc;
        }
        x[c2] = len;
        // Chain c2→c3: fractions of [0, L], decreasing.
        let k3 = c3 - c2 - 1;
        let gaps: Vec<f64> = it.by_ref().take(k3).map(f64::exp).chain(std::iter::once(1.0)).collect();
        let total: f64 = gaps.iter().sum();
        let mut acc = 0.0;
        for (i, g) in gaps.iter().take(k3).enumerate() {
            acc += g;
            x[c2 + 1 + i] = len - len * acc / total;
        }
        x[c3] = 0.0;
        // Chain c3→c0: top run left of 0, then bottom run left of 0.
        let inner30 = n - 1 - c3;
        let top30 = self.split30;
        let bottom30 = inner30 - top30;
        let mut acc = 0.0;
        for i in 0..top30 {
            acc -= it.next().unwrap().exp();
            x[c3 + 1 + i] = acc;
        }
        let mut acc = 0.0;
        for i in 0..bottom30 {
            acc -= it.next().unwrap().exp();
            x[n - 1 - i] = acc;
        }
        (len, x)
    }

    /// Inverse of `decode` for consistently ordered positions.
    fn encode(&self, len: f64, x: &[f64]) -> Vec<f64> {
        let [_, c1, c2, c3] = self.corners;
        let n = self.n;
        let mut y = vec![len.ln()];
        let k1 = c1 - 1;
        let last = x[c1] - x[c1 - 1];
        for i in 0..k1 {
            y.push(((x[1 + i] - x[i]) / last).ln());
        }
        let bottom12 = self.split12;
        let top12 = c2 - c1 - 1 - bottom12;
        for i in 0..bottom12 {
            y.push((x[c1 + 1 + i] - x[c1 + i]).ln());
        }
        for i in 0..top12 {
            y.push((x[c2 - 1 - i] - x[c2 - i]).ln());
        }
        let k3 = c3 - c2 - 1;
        let last = x[c3 - 1] - x[c3];
        for i in 0..k3 {
            y.push(((x[c2 + i] - x[c2 + 1 + i]) / last).ln());
        }
        let top30 = self.split30;
        let bottom30 = n - 1 - c3 - top30;
        for i in 0..top30 {
            y.push((x[c3 + i] - x[c3 + 1 + i]).ln());
        }
        for i in 0..bottom30 {
            let right = if i == 0 { 0.0 } else { x[n - i] };
            y.push((right - x[n - 1 - i]).ln());
        }
        y
    }
}

/// Argument of a point of the closed upper half-plane, in `[0, π]`.
pub(crate) fn upper_arg(s: Complex64) -> f64 {
    let im = if s.im > 0.0 { s.im } else { 0.0 };
    im.atan2(s.re)
}

/// Initial layout and prevertex guess from a rectangle model: each vertex is
/// placed at its arc-length fraction along the matching rectangle side and
/// pushed through the rectangle→strip map.
fn initial_guess(polygon: &Polygon) -> (Layout, f64, Vec<f64>) {
    let n = polygon.len();
    let corners = polygon.corner_indices();
    let [_, c1, c2, c3] = corners;
    let w = polygon.vertices();
    let side: Vec<f64> = (0..n).map(|k| (w[(k + 1) % n] - w[k]).norm()).collect();
    let chain = |from: usize, to: usize| -> f64 { (from..to).map(|k| side[k % n]).sum() };
    let p01 = chain(0, c1);
    let p12 = chain(c1, c2);
    let p23 = chain(c2, c3);
    let p30 = chain(c3, n);
    let aspect = (p01 + p23) / (p12 + p30);
    let len = strip_length_for_aspect(aspect).clamp(1e-3, 30.0);
    let (m, m1) = modulus_from_strip_length(len);
    let (kk, kp) = ellipk_pair(m, m1);
    let to_strip = |q: Complex64| -> Complex64 {
        let s = sncndn(q, m, m1).0;
        Complex64::new(s.norm().ln(), upper_arg(s)) / PI
    };
    // Arc-length fraction of each vertex along its chain.
    let fraction = |k: usize, from: usize, total: f64| chain(from, k) / total;

    let mut x = vec![0.0; n];
    x[c1] = len;
    x[c2] = len;
    for k in 1..c1 {
        let f = fraction(k, 0, p01);
        x[k] = to_strip(Complex64::new(kk, f * kp)).re;
    }
    let mut split12 = 0;
    for k in c1 + 1..c2 {
        let f = fraction(k, c1, p12).clamp(1e-6, 1.0 - 1e-6);
        let z = to_strip(Complex64::new(kk * (1.0 - 2.0 * f), kp));
        if f < 0.5 && z.im < 0.5 {
            split12 += 1;
        }
        x[k] = z.re;
    }
    for k in c2 + 1..c3 {
        let f = fraction(k, c2, p23);
        x[k] = to_strip(Complex64::new(-kk, (1.0 - f) * kp)).re;
    }
    let mut split30 = 0;
    for k in c3 + 1..n {
        let f = fraction(k, c3, p30).clamp(1e-6, 1.0 - 1e-6);
        let z = to_strip(Complex64::new(kk * (2.0 * f - 1.0), 0.0));
        if f < 0.5 && z.im > 0.5 {
            split30 += 1;
        }
        x[k] = z.re;
    }
    let layout = Layout { n, corners, split12, split30 };
    // Enforce strict ordering on each run so the encoding is defined.
    let x = sanitize(&layout, len, x);
    (layout, len, x)
}

fn sanitize(layout: &Layout, len: f64, x: Vec<f64>) -> Vec<f64> {
    let y: Vec<f64> = layout
        .encode(len, &x)
        .into_iter()
        .map(|v| if v.is_finite() { v.clamp(-20.0, 5.0) } else { -2.0 })
        .collect();
    layout.decode(&y).1
}

/// Evaluation object for a solved strip map.
#[derive(Debug)]
pub struct StripMap {
    polygon: Polygon,
    params: StripMapParams,
    integrand: Integrand,
    diameter: f64,
    seeds: OnceLock<Vec<(Complex64, Complex64)>>,
}

impl Clone for StripMap {
    fn clone(&self) -> Self {
        StripMap {
            polygon: self.polygon.clone(),
            params: self.params.clone(),
            integrand: self.integrand.clone(),
            diameter: self.diameter,
            seeds: OnceLock::new(),
        }
    }
}

impl StripMap {
    /// Solve the parameter problem for `polygon`.
    pub fn solve(polygon: &Polygon) -> Result<Self, ScmError> {
        let params = solve_parameter_problem(polygon)?;
        Self::from_params(polygon, params)
    }

    /// Rebuild the evaluator for already solved parameters.
    pub fn from_params(polygon: &Polygon, params: StripMapParams) -> Result<Self, ScmError> {
        Self::with_order(polygon, params, DEFAULT_QUAD_ORDER)
    }

    /// As `from_params`, with a chosen number of quadrature nodes.
    pub fn with_order(polygon: &Polygon, params: StripMapParams, order: usize) -> Result<Self, ScmError> {
        let n = polygon.len();
        if params.prevertices.len() != n || params.on_top.len() != n {
            return Err(ScmError::ParamsMismatch);
        }
        let walk = polygon.rotated(params.start);
        let betas = walk.alphas().iter().map(|a| a - 1.0).collect();
        let mut integrand = Integrand::new(betas, order);
        integrand.set_nodes(params.nodes(), params.on_top.clone());
        integrand.divergence = 0.5 * (params.theta_plus - params.theta_minus);
        Ok(StripMap {
            diameter: walk.diameter(),
            polygon: walk,
            params,
            integrand,
            seeds: OnceLock::new(),
        })
    }

    pub fn params(&self) -> &StripMapParams {
        &self.params
    }

    /// The polygon in walk order (first marked corner at index 0).
    pub fn polygon(&self) -> &Polygon {
        &self.polygon
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Derivative of the map, `A·∏ f_j(z)`.
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        self.params.a * self.integrand.eval(z)
    }

    /// `∫_a^b ∏ f_j(z) dz` along the straight segment.
    pub fn integrate(&self, a: Complex64, b: Complex64) -> Result<Complex64, ScmError> {
        self.integrand.integrate(a, b)
    }

    fn clamp_ends(&self, z: Complex64) -> Complex64 {
        let (lo, hi) = self
            .params
            .prevertices
            .iter()
            .fold((0.0_f64, 0.0_f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        Complex64::new(z.re.clamp(lo - END_MARGIN, hi + END_MARGIN), z.im.clamp(0.0, 1.0))
    }

    /// Image of a strip point.
    pub fn strip_to_polygon(&self, z: Complex64) -> Result<Complex64, ScmError> {
        if !z.im.is_finite() || z.is_nan() || z.im < -1e-12 || z.im > 1.0 + 1e-12 {
            return Err(ScmError::OutsideStrip(z));
        }
        let z = self.clamp_ends(z);
        let nodes = &self.integrand.nodes;
        let (k, _) = nodes
            .iter()
            .enumerate()
            .map(|(k, p)| (k, (p - z).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("polygon has vertices");
        let base = self.polygon.vertices()[k];
        Ok(base + self.params.a * self.integrand.integrate(nodes[k], z)?)
    }

    /// Vertices rebuilt by chaining the side integrals from the first vertex,
    /// paired with the true vertices.
    pub fn reproduced_vertices(&self) -> Result<Vec<Complex64>, ScmError> {
        let n = self.polygon.len();
        let nodes = &self.integrand.nodes;
        let mut w = self.params.c;
        let mut out = Vec::with_capacity(n);
        out.push(w);
        for k in 0..n - 1 {
            w += self.params.a * self.integrand.integrate(nodes[k], nodes[k + 1])?;
            out.push(w);
        }
        Ok(out)
    }

    /// Largest vertex reproduction error relative to the polygon diameter.
    pub fn vertex_error(&self) -> Result<f64, ScmError> {
        let rebuilt = self.reproduced_vertices()?;
        Ok(rebuilt
            .iter()
            .zip(self.polygon.vertices())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
            / self.diameter)
    }

    /// Side-length residuals `| |A|·I_k − |w_{k+1} − w_k| | / diameter` for
    /// the sides constrained by the solver.
    pub fn side_residuals(&self) -> Result<Vec<f64>, ScmError> {
        side_residuals(&self.integrand, &self.polygon, self.diameter)
    }

    fn seed_table(&self) -> &[(Complex64, Complex64)] {
        self.seeds.get_or_init(|| {
            let xs = &self.params.prevertices;
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min) - 3.0;
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0;
            let cols = 80;
            let rows = [0.02, 0.1, 0.25, 0.5, 0.75, 0.9, 0.98];
            let mut table = Vec::with_capacity(cols * rows.len());
            for c in 0..=cols {
                let x = lo + (hi - lo) * c as f64 / cols as f64;
                for &y in &rows {
                    let z = Complex64::new(x, y);
                    if let Ok(w) = self.strip_to_polygon(z) {
                        table.push((z, w));
                    }
                }
            }
            table
        })
    }

    fn vertex_seed(&self, k: usize, w: Complex64) -> Option<Complex64> {
        let zk = self.params.prevertex(k);
        let top = self.params.on_top[k];
        let alpha = self.polygon.alphas()[k];
        let inward = if top { -1.0 } else { 1.0 };
        let probe = Complex64::new(0.0, 1e-3 * inward);
        // w − w_k ≈ c·(z − z_k)^α / α with c read off the derivative.
        let c = self.derivative(zk + probe) / probe.powf(alpha - 1.0);
        let rhs = (w - self.polygon.vertices()[k]) * alpha / c;
        if !rhs.is_finite() || rhs.norm() == 0.0 {
            return None;
        }
        let mut phi = rhs.arg();
        let (lo, hi) = if top { (-PI, 0.0) } else { (0.0, PI) };
        for _ in 0..4 {
            if phi / alpha < lo {
                phi += 2.0 * PI;
            } else if phi / alpha > hi {
                phi -= 2.0 * PI;
            }
        }
        let arg = (phi / alpha).clamp(lo, hi);
        let z = zk + Complex64::from_polar(rhs.norm().powf(1.0 / alpha), arg);
        z.is_finite().then(|| self.clamp_ends(z))
    }

    fn newton(&self, z0: Complex64, target: Complex64, iters: usize, tol: f64) -> Option<Complex64> {
        let mut z = z0;
        let mut res = self.strip_to_polygon(z).ok()? - target;
        for _ in 0..iters {
            if res.norm() <= tol {
                return Some(z);
            }
            let d = self.derivative(z);
            if !d.is_finite() || d.norm() == 0.0 {
                return None;
            }
            let step = res / d;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let cand = self.clamp_ends(z - step * lambda);
                if let Ok(w) = self.strip_to_polygon(cand) {
                    let r = w - target;
                    if r.norm() < res.norm() {
                        z = cand;
                        res = r;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        // Near a sharp vertex the preimage sits within a few ulps of a
        // prevertex, so the attainable residual is bounded by |f'|·ulp(z).
        let attainable = 256.0 * f64::EPSILON * (z.norm() + 1.0) * self.derivative(z).norm();
        let accept = tol.max(attainable.min(1e-7 * self.diameter));
        (res.norm() <= accept).then_some(z)
    }

    /// Preimage of a point of the closed polygon.
    pub fn polygon_to_strip(&self, w: Complex64) -> Result<Complex64, ScmError> {
        let scale = self.diameter;
        let pts = self.polygon.points();
        if geometry::locate([w.re, w.im], &pts, 1e-12 * scale) == Location::Outside {
            return Err(ScmError::OutsidePolygon(w));
        }
        if let Some(k) = self.polygon.vertices().iter().position(|&v| (v - w).norm() <= 1e-13 * scale) {
            return Ok(self.params.prevertex(k));
        }
        let tol = 1e-13 * scale;
        // Seeds whose image sees `w` along a straight segment inside the
        // polygon, nearest first; the homotopy below follows that segment.
        let mut seeds: Vec<(Complex64, Complex64)> = self.seed_table().to_vec();
        seeds.sort_by(|a, b| (a.1 - w).norm().total_cmp(&(b.1 - w).norm()));
        let n = pts.len();
        let visible = |ws: Complex64| {
            let (a, b) = ([ws.re, ws.im], [w.re, w.im]);
            (0..n).all(|i| !geometry::segments_intersect(a, b, pts[i], pts[(i + 1) % n], 0.0))
        };
        let mut candidates = seeds.iter().filter(|s| visible(s.1)).take(4).peekable();
        let &(z_seed, w_seed) = match candidates.peek() {
            Some(s) => *s,
            None => seeds.first().ok_or(ScmError::InverseNoConvergence(w))?,
        };
        for &(zs, _) in candidates {
            if let Some(z) = self.newton(zs, w, NEWTON_ITER, tol) {
                return Ok(z);
            }
        }
        // Close to a sharp vertex the map behaves like (z − z_k)^α; seed from
        // that local power law.
        let mut near: Vec<usize> = (0..n).collect();
        near.sort_by(|&i, &j| {
            (self.polygon.vertices()[i] - w)
                .norm()
                .total_cmp(&(self.polygon.vertices()[j] - w).norm())
        });
        for &k in near.iter().take(2) {
            if let Some(zs) = self.vertex_seed(k, w) {
                if let Some(z) = self.newton(zs, w, NEWTON_ITER, tol) {
                    return Ok(z);
                }
            }
        }
        // Continuation along the segment from the seed image to the target,
        // halving the step whenever the corrector fails.
        let mut z = z_seed;
        let mut t = 0.0_f64;
        let mut dt = 0.25_f64;
        while t < 1.0 {
            let t1 = (t + dt).min(1.0);
            let target = w_seed + (w - w_seed) * t1;
            match self.newton(z, target, 12, 1e-10 * scale) {
                Some(z1) => {
                    z = z1;
                    t = t1;
                    dt = (dt * 1.5).min(0.25);
                }
                None => {
                    dt *= 0.5;
                    if dt < 1e-6 {
                        return Err(ScmError::InverseNoConvergence(w));
                    }
                }
            }
        }
        match self.newton(z, w, NEWTON_ITER, tol) {
            Some(z) => Ok(z),
            None => {
                let res = (self.strip_to_polygon(z)? - w).norm();
                if res <= 1e-10 * scale {
                    Ok(z)
                } else {
                    Err(ScmError::InverseNoConvergence(w))
                }
            }
        }
    }
}

fn side_residuals(integrand: &Integrand, walk: &Polygon, diameter: f64) -> Result<Vec<f64>, ScmError> {
    let n = walk.len();
    let w = walk.vertices();
    let nodes = &integrand.nodes;
    let first = integrand.integrate(nodes[0], nodes[1])?.norm();
    let scale = (w[1] - w[0]).norm() / first;
    (1..n)
        .map(|k| {
            let ik = integrand.integrate(nodes[k], nodes[(k + 1) % n])?.norm();
            Ok((scale * ik - (w[(k + 1) % n] - w[k]).norm()).abs() / diameter)
        })
        .collect()
}

fn log_residuals(integrand: &Integrand, walk: &Polygon) -> Result<Vec<f64>, ScmError> {
    let n = walk.len();
    let w = walk.vertices();
    let nodes = &integrand.nodes;
    let first = integrand.integrate(nodes[0], nodes[1])?.norm();
    let side0 = (w[1] - w[0]).norm();
    // Every side but the reference one: with a straight-angle vertex the
    // first n - 3 ratios can be satisfied identically, leaving the strip
    // length free.
    (1..n)
        .map(|k| {
            let ik = integrand.integrate(nodes[k], nodes[(k + 1) % n])?.norm();
            Ok((ik / first).ln() - ((w[(k + 1) % n] - w[k]).norm() / side0).ln())
        })
        .collect()
}

fn strip_nodes(x: &[f64], top: &[bool]) -> Vec<Complex64> {
    x.iter()
        .zip(top)
        .map(|(&x, &t)| Complex64::new(x, if t { 1.0 } else { 0.0 }))
        .collect()
}

/// Locate the prevertices so that the strip map reproduces the polygon's
/// side lengths (the angles are built into the integrand).
pub fn solve_parameter_problem(polygon: &Polygon) -> Result<StripMapParams, ScmError> {
    let start = polygon.corner_indices()[0];
    let walk = polygon.rotated(start);
    let (guess, len0, x0) = initial_guess(&walk);
    // The strip ends must land on the c1→c2 and c3→c0 chains at points fixed
    // by the polygon; if the guessed split is wrong the solve diverges, so
    // the other splits are tried in order of distance from the guess.
    let [_, c1, c2, c3] = guess.corners;
    let mut layouts: Vec<Layout> = (0..c2 - c1)
        .flat_map(|s12| (0..walk.len() - c3).map(move |s30| (s12, s30)))
        .map(|(split12, split30)| Layout { split12, split30, ..guess.clone() })
        .collect();
    layouts.sort_by_key(|l| l.split12.abs_diff(guess.split12) + l.split30.abs_diff(guess.split30));
    let mut first_err = None;
    for layout in &layouts {
        // Rectangle-model guess first, then evenly spaced prevertices at a
        // few strip lengths.
        let x = sanitize(layout, len0, x0.clone());
        let mut starts = vec![layout.encode(len0, &x)];
        for scale in [1.0, 2.0, 0.5] {
            let mut y = vec![0.0; layout.unknowns()];
            y[0] = (len0 * scale).ln();
            starts.push(y);
        }
        for y0 in starts {
            match solve_layout(&walk, start, layout, y0) {
                Ok(params) => return Ok(params),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
    }
    Err(first_err.unwrap_or(ScmError::NoConvergence { residual: f64::INFINITY }))
}

fn solve_layout(walk: &Polygon, start: usize, layout: &Layout, y0: Vec<f64>) -> Result<StripMapParams, ScmError> {
    let walk = walk.clone();
    let diameter = walk.diameter();
    let betas: Vec<f64> = walk.alphas().iter().map(|a| a - 1.0).collect();
    let mut integrand = Integrand::new(betas, DEFAULT_QUAD_ORDER);
    let top = layout.on_top();
    let mut y = DVector::from_vec(y0);
    let nu = layout.unknowns();

    let mut eval = |y: &[f64]| -> Result<DVector<f64>, ScmError> {
        let (_, x) = layout.decode(y);
        check_crowding(&x, &top)?;
        integrand.set_nodes(strip_nodes(&x, &top), top.clone());
        Ok(DVector::from_vec(log_residuals(&integrand, &walk)?))
    };

    let mut f = eval(y.as_slice())?;
    let mut converged = f.amax() < 1e-14;
    for _ in 0..SOLVER_MAX_ITER {
        if converged || nu == 0 {
            break;
        }
        let h = 1e-6;
        let mut jac = DMatrix::<f64>::zeros(f.len(), nu);
        for j in 0..nu {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += h;
            ym[j] -= h;
            let col = (eval(yp.as_slice())? - eval(ym.as_slice())?) / (2.0 * h);
            jac.set_column(j, &col);
        }
        // Gauss-Newton step; the system is overdetermined but consistent.
        let Ok(step) = jac.svd(true, true).solve(&(-&f), 1e-14) else {
            break;
        };
        let norm0 = f.norm();
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand = &y + &step * lambda;
            if let Ok(fc) = eval(cand.as_slice()) {
                if fc.iter().all(|v| v.is_finite()) && fc.norm() < norm0 {
                    y = cand;
                    f = fc;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
        converged = f.amax() < 1e-14;
    }

    let (length, x) = layout.decode(y.as_slice());
    check_crowding(&x, &top)?;
    integrand.set_nodes(strip_nodes(&x, &top), top.clone());
    let residual = side_residuals(&integrand, &walk, diameter)?
        .into_iter()
        .fold(0.0, f64::max);
    if !(residual < SOLVER_TOLERANCE) {
        return Err(ScmError::NoConvergence { residual });
    }
    let w = walk.vertices();
    let a = (w[1] - w[0]) / integrand.integrate(integrand.nodes[0], integrand.nodes[1])?;
    Ok(StripMapParams {
        start,
        prevertices: x,
        on_top: top,
        length,
        a,
        c: w[0],
        theta_plus: PI,
        theta_minus: PI,
    })
}

fn check_crowding(x: &[f64], top: &[bool]) -> Result<(), ScmError> {
    for edge in [false, true] {
        let mut xs: Vec<f64> = x.iter().zip(top).filter(|(_, &t)| t == edge).map(|(&x, _)| x).collect();
        xs.sort_by(f64::total_cmp);
        if let Some(gap) = xs.windows(2).map(|w| w[1] - w[0]).reduce(f64::min) {
            if gap < CROWDING_GAP {
                return Err(ScmError::Crowding { gap });
            }
        }
    }
    Ok(())
}

/// `∫_a^b ∏ f_j dz` for a solved parameter set.
pub fn integrate_strip(a: Complex64, b: Complex64, params: &StripMapParams, polygon: &Polygon) -> Result<Complex64, ScmError> {
    StripMap::from_params(polygon, params.clone())?.integrate(a, b)
}

/// Forward strip map `w = A ∫_0^z ∏ f_j dz + C`.
pub fn strip_to_polygon(z: Complex64, params: &StripMapParams, polygon: &Polygon) -> Result<Complex64, ScmError> {
    StripMap::from_params(polygon, params.clone())?.strip_to_polygon(z)
}
