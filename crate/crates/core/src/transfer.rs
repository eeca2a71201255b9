//! Teacher→learner command transfer through pairs of rectangle maps.
//!
//! A desired teacher command is surrounded by a small polygon of teacher-side
//! pair commands. The same pairs, read on the learner side, give a second
//! polygon. Each polygon is mapped conformally onto a rectangle with its four
//! marked corners fixed; the two rectangles are bridged through the unit
//! square.

use std::collections::{HashMap, VecDeque};
use std::io::{Read, Write};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Point};
use crate::scm::{validate_polygon, Polygon, RectangleMap, ScmError};

/// Tolerance of the hull containment tests (signed area units).
pub const HULL_TOL: f64 = 1e-12;
pub const DEFAULT_PSI: f64 = 0.02;
pub const DEFAULT_REGION_VERTICES: usize = 4;
pub const MAX_REGION_VERTICES: usize = 12;
const CACHE_CAPACITY: usize = 64;

/// Normalized command: speed `v ∈ [0, 1]`, steering `gamma ∈ [−1, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub v: f64,
    pub gamma: f64,
}

impl Command {
    pub fn new(v: f64, gamma: f64) -> Self {
        Command { v, gamma }
    }

    pub fn point(&self) -> Point {
        [self.v, self.gamma]
    }

    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.v, self.gamma)
    }

    pub fn from_complex(w: Complex64) -> Self {
        Command::new(w.re, w.im)
    }

    pub fn distance(&self, other: &Command) -> f64 {
        geometry::dist(self.point(), other.point())
    }
}

/// Teacher and learner commands that produce the same motion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandPair {
    pub teacher: Command,
    pub learner: Command,
}

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("teacher commands of the pairs are collinear or fewer than three")]
    DegenerateHull,
    #[error("command {0:?} is outside the learner's capability hull")]
    OutsideCapability(Command),
    #[error("no simple pair polygon strictly contains {0:?}")]
    NoContainingPolygon(Command),
    #[error("mapping regions need 4..=12 vertices, got {0}")]
    InvalidVertexCount(usize),
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error("pairs file: {0}")]
    PairsFile(String),
}

/// Convex hull of the teacher-side pair commands.
#[derive(Clone, Debug)]
pub struct CapabilityHull {
    pairs: Vec<CommandPair>,
    /// Hull boundary in counterclockwise order, including pairs lying on
    /// hull edges.
    hull_vertices: Vec<usize>,
    /// Strict hull (no collinear boundary points) used for containment.
    corners: Vec<Point>,
}

/// Builds the capability hull of the teacher-side commands.
pub fn build_capability_hull(pairs: &[CommandPair]) -> Result<CapabilityHull, TransferError> {
    let pts: Vec<Point> = pairs.iter().map(|p| p.teacher.point()).collect();
    let strict = geometry::convex_hull_indices(&pts);
    if strict.len() < 3 {
        return Err(TransferError::DegenerateHull);
    }
    let corners: Vec<Point> = strict.iter().map(|&i| pts[i]).collect();
    let scale = geometry::diameter(&corners);
    let mut hull_vertices = Vec::new();
    let m = strict.len();
    for e in 0..m {
        let (a, b) = (pts[strict[e]], pts[strict[(e + 1) % m]]);
        let len = geometry::dist(a, b);
        hull_vertices.push(strict[e]);
        let mut on_edge: Vec<(f64, usize)> = Vec::new();
        for (i, &p) in pts.iter().enumerate() {
            if geometry::cross(a, b, p).abs() > HULL_TOL * scale * len {
                continue;
            }
            let ab = geometry::sub(b, a);
            let t = ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / (ab[0] * ab[0] + ab[1] * ab[1]);
            if p != a && p != b && t > 0.0 && t < 1.0 && !on_edge.iter().any(|&(_, j)| pts[j] == p) {
                on_edge.push((t, i));
            }
        }
        on_edge.sort_by(|x, y| x.0.total_cmp(&y.0));
        hull_vertices.extend(on_edge.into_iter().map(|(_, i)| i));
    }
    Ok(CapabilityHull {
        pairs: pairs.to_vec(),
        hull_vertices,
        corners,
    })
}

impl CapabilityHull {
    pub fn pairs(&self) -> &[CommandPair] {
        &self.pairs
    }

    pub fn hull_vertices(&self) -> &[usize] {
        &self.hull_vertices
    }

    /// Hull polygon in teacher command space.
    pub fn polygon(&self) -> &[Point] {
        &self.corners
    }

    fn edge_margins(&self, c: Command) -> impl Iterator<Item = f64> + '_ {
        let p = c.point();
        let m = self.corners.len();
        (0..m).map(move |e| {
            let (a, b) = (self.corners[e], self.corners[(e + 1) % m]);
            geometry::cross(a, b, p) / geometry::dist(a, b)
        })
    }

    /// Inside or on the hull boundary.
    pub fn contains(&self, c: Command) -> bool {
        self.edge_margins(c).all(|d| d >= -HULL_TOL)
    }

    /// Strictly inside, farther than the tolerance from every edge.
    pub fn contains_strictly(&self, c: Command) -> bool {
        self.edge_margins(c).all(|d| d > HULL_TOL)
    }

    /// Pair whose teacher command is nearest to `c` (lowest index on ties).
    pub fn nearest_pair(&self, c: Command) -> Option<(usize, f64)> {
        self.pairs
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.teacher.distance(&c)))
            .fold(None, |best, cur| match best {
                Some(b) if b.1 <= cur.1 => Some(b),
                _ => Some(cur),
            })
    }
}

/// Corresponding teacher and learner polygons with their solved maps.
#[derive(Clone, Debug)]
pub struct MappingRegion {
    pub pair_indices: Vec<usize>,
    pub teacher_polygon: Polygon,
    pub learner_polygon: Polygon,
    pub teacher_map: RectangleMap,
    pub learner_map: RectangleMap,
}

impl MappingRegion {
    /// Builds and solves the region spanned by `pair_indices` (in polygon
    /// order).
    pub fn build(hull: &CapabilityHull, pair_indices: &[usize]) -> Result<Self, TransferError> {
        let n = pair_indices.len();
        if !(4..=MAX_REGION_VERTICES).contains(&n) {
            return Err(TransferError::InvalidVertexCount(n));
        }
        let pairs = hull.pairs();
        let tw: Vec<Complex64> = pair_indices.iter().map(|&i| pairs[i].teacher.complex()).collect();
        let lw: Vec<Complex64> = pair_indices.iter().map(|&i| pairs[i].learner.complex()).collect();
        let corners = pick_corners(&tw);
        let teacher_polygon = validate_polygon(&tw, corners)?;
        let learner_polygon = validate_polygon(&lw, corners)?;
        let teacher_map = RectangleMap::new(&teacher_polygon)?;
        let learner_map = RectangleMap::new(&learner_polygon)?;
        Ok(MappingRegion {
            pair_indices: pair_indices.to_vec(),
            teacher_polygon,
            learner_polygon,
            teacher_map,
            learner_map,
        })
    }

    /// Teacher command in the region closure → learner command.
    pub fn map(&self, desired: Command) -> Result<Command, TransferError> {
        let q = self.teacher_map.polygon_to_rect(desired.complex())?;
        let u = self.teacher_map.rect_to_unit(q);
        let u = Complex64::new(u.re.clamp(0.0, 1.0), u.im.clamp(0.0, 1.0));
        let q = self.learner_map.unit_to_rect(u);
        Ok(Command::from_complex(self.learner_map.rect_to_polygon(q)?))
    }
}

/// For more than four vertices, the four sharpest teacher-side vertices act
/// as rectangle corners.
fn pick_corners(w: &[Complex64]) -> [usize; 4] {
    let n = w.len();
    if n == 4 {
        return [0, 1, 2, 3];
    }
    let mut turn: Vec<(f64, usize)> = (0..n)
        .map(|j| {
            let a = w[j] - w[(j + n - 1) % n];
            let b = w[(j + 1) % n] - w[j];
            (-(b / a).arg(), j)
        })
        .collect();
    turn.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut c: Vec<usize> = turn[..4].iter().map(|t| t.1).collect();
    c.sort_unstable();
    [c[0], c[1], c[2], c[3]]
}

/// Candidate vertex sets around `desired`, best first. Each is ordered
/// counterclockwise about `desired` and rotated to start at its smallest
/// pair index.
pub fn candidate_regions(desired: Command, hull: &CapabilityHull, n_vertices: usize) -> Vec<Vec<usize>> {
    let pairs = hull.pairs();
    let mut pool: Vec<(f64, usize)> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| (p.teacher.distance(&desired), i))
        .filter(|&(d, _)| d > 0.0)
        .collect();
    pool.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    // Drop repeated teacher points, keeping the lowest index.
    let mut seen: Vec<Point> = Vec::new();
    pool.retain(|&(_, i)| {
        let p = pairs[i].teacher.point();
        if seen.contains(&p) {
            false
        } else {
            seen.push(p);
            true
        }
    });
    for size in [(n_vertices + 4).min(MAX_REGION_VERTICES), 16] {
        let size = size.min(pool.len());
        let found = containing_sets(desired, hull, &pool[..size], n_vertices);
        if !found.is_empty() || size == pool.len() {
            return found;
        }
    }
    Vec::new()
}

fn containing_sets(desired: Command, hull: &CapabilityHull, pool: &[(f64, usize)], n: usize) -> Vec<Vec<usize>> {
    let pairs = hull.pairs();
    let d = desired.point();
    let mut scored: Vec<(f64, f64, Vec<usize>)> = Vec::new();
    for combo in combinations(pool.len(), n) {
        let mut ring: Vec<(f64, usize)> = combo
            .iter()
            .map(|&k| {
                let p = pairs[pool[k].1].teacher.point();
                ((p[1] - d[1]).atan2(p[0] - d[0]), pool[k].1)
            })
            .collect();
        ring.sort_by(|a, b| a.0.total_cmp(&b.0));
        let gaps_ok = (0..n).all(|i| {
            let next = if i + 1 < n { ring[i + 1].0 } else { ring[0].0 + std::f64::consts::TAU };
            let gap = next - ring[i].0;
            gap > 1e-12 && gap < std::f64::consts::PI - 1e-12
        });
        if !gaps_ok {
            continue;
        }
        let mut idx: Vec<usize> = ring.iter().map(|r| r.1).collect();
        let lo = (0..n).min_by_key(|&i| idx[i]).unwrap_or(0);
        idx.rotate_left(lo);
        let pts: Vec<Point> = idx.iter().map(|&i| pairs[i].teacher.point()).collect();
        let total: f64 = combo.iter().map(|&k| pool[k].0).sum();
        scored.push((total, geometry::signed_area(&pts), idx));
    }
    scored.sort_by(|a, b| {
        let tie = 1e-12 * a.0.max(b.0);
        if (a.0 - b.0).abs() > tie {
            a.0.total_cmp(&b.0)
        } else {
            a.1.total_cmp(&b.1).then_with(|| a.2.cmp(&b.2))
        }
    });
    scored.into_iter().map(|s| s.2).collect()
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let mut i = k;
        while i > 0 && c[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        c[i - 1] += 1;
        for j in i..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// Selects and solves the best mapping region around `desired`.
pub fn select_mapping_region(
    desired: Command,
    hull: &CapabilityHull,
    n_vertices: usize,
) -> Result<MappingRegion, TransferError> {
    if !(4..=MAX_REGION_VERTICES).contains(&n_vertices) {
        return Err(TransferError::InvalidVertexCount(n_vertices));
    }
    if !hull.contains(desired) {
        return Err(TransferError::OutsideCapability(desired));
    }
    let mut last = None;
    for idx in candidate_regions(desired, hull, n_vertices) {
        match MappingRegion::build(hull, &idx) {
            Ok(region) => return Ok(region),
            Err(e) => last = Some(e),
        }
    }
    Err(match last {
        Some(TransferError::Scm(e)) if !matches!(e, ScmError::NotSimple | ScmError::ClockwiseOrder) => {
            TransferError::Scm(e)
        }
        _ => TransferError::NoContainingPolygon(desired),
    })
}

/// Whether the nearest-pair shortcut applies: closer than `psi`, or an
/// exact hit (so `psi = 0` still honours exact pairs).
fn shortcut(hull: &CapabilityHull, desired: Command, psi: f64) -> Option<Command> {
    let (i, d) = hull.nearest_pair(desired)?;
    (d < psi || d == 0.0).then(|| hull.pairs()[i].learner)
}

/// Maps a desired teacher command to the learner.
pub fn map_command(desired: Command, hull: &CapabilityHull, psi: f64) -> Result<Command, TransferError> {
    if !hull.contains(desired) {
        return Err(TransferError::OutsideCapability(desired));
    }
    if let Some(u) = shortcut(hull, desired, psi) {
        return Ok(u);
    }
    select_mapping_region(desired, hull, DEFAULT_REGION_VERTICES)?.map(desired)
}

type RegionCache = (HashMap<Vec<usize>, Arc<MappingRegion>>, VecDeque<Vec<usize>>);

/// `map_command` with a bounded cache of solved regions.
#[derive(Debug)]
pub struct CommandMapper {
    hull: CapabilityHull,
    psi: f64,
    n_vertices: usize,
    cache: Mutex<RegionCache>,
}

impl CommandMapper {
    pub fn new(hull: CapabilityHull, psi: f64, n_vertices: usize) -> Result<Self, TransferError> {
        if !(4..=MAX_REGION_VERTICES).contains(&n_vertices) {
            return Err(TransferError::InvalidVertexCount(n_vertices));
        }
        Ok(CommandMapper {
            hull,
            psi,
            n_vertices,
            cache: Mutex::new((HashMap::new(), VecDeque::new())),
        })
    }

    pub fn hull(&self) -> &CapabilityHull {
        &self.hull
    }

    pub fn cached_regions(&self) -> usize {
        self.cache.lock().map(|c| c.0.len()).unwrap_or(0)
    }

    pub fn region(&self, desired: Command) -> Result<Arc<MappingRegion>, TransferError> {
        if !self.hull.contains(desired) {
            return Err(TransferError::OutsideCapability(desired));
        }
        let mut last = None;
        for idx in candidate_regions(desired, &self.hull, self.n_vertices) {
            if let Some(r) = self.cache.lock().ok().and_then(|c| c.0.get(&idx).cloned()) {
                return Ok(r);
            }
            match MappingRegion::build(&self.hull, &idx) {
                Ok(region) => {
                    let region = Arc::new(region);
                    if let Ok(mut c) = self.cache.lock() {
                        if c.1.len() >= CACHE_CAPACITY {
                            if let Some(old) = c.1.pop_front() {
                                c.0.remove(&old);
                            }
                        }
                        c.1.push_back(idx.clone());
                        c.0.insert(idx, region.clone());
                    }
                    return Ok(region);
                }
                Err(e) => last = Some(e),
            }
        }
        Err(match last {
            Some(TransferError::Scm(e)) if !matches!(e, ScmError::NotSimple | ScmError::ClockwiseOrder) => {
                TransferError::Scm(e)
            }
            _ => TransferError::NoContainingPolygon(desired),
        })
    }

    pub fn map(&self, desired: Command) -> Result<Command, TransferError> {
        if !self.hull.contains(desired) {
            return Err(TransferError::OutsideCapability(desired));
        }
        if let Some(u) = shortcut(&self.hull, desired, self.psi) {
            return Ok(u);
        }
        self.region(desired)?.map(desired)
    }
}

#[derive(Serialize, Deserialize)]
struct PairRow {
    #[serde(rename = "vT")]
    vt: f64,
    #[serde(rename = "gammaT")]
    gt: f64,
    #[serde(rename = "vL")]
    vl: f64,
    #[serde(rename = "gammaL")]
    gl: f64,
}

/// Writes pairs as CSV with header `vT,gammaT,vL,gammaL`.
pub fn write_pairs_csv<W: Write>(pairs: &[CommandPair], out: W) -> Result<(), TransferError> {
    let mut w = csv::Writer::from_writer(out);
    for p in pairs {
        w.serialize(PairRow {
            vt: p.teacher.v,
            gt: p.teacher.gamma,
            vl: p.learner.v,
            gl: p.learner.gamma,
        })
        .map_err(|e| TransferError::PairsFile(e.to_string()))?;
    }
    w.flush().map_err(|e| TransferError::PairsFile(e.to_string()))
}

pub fn read_pairs_csv<R: Read>(input: R) -> Result<Vec<CommandPair>, TransferError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    r.deserialize::<PairRow>()
        .map(|row| {
            let row = row.map_err(|e| TransferError::PairsFile(e.to_string()))?;
            Ok(CommandPair {
                teacher: Command::new(row.vt, row.gt),
                learner: Command::new(row.vl, row.gl),
            })
        })
        .collect()
}
