//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints its own verdict line.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scm_transfer::calibration::{build_command_pairs, command_grid, probe_learner, retrieve_teacher_equivalent, CalibrationError};
use scm_transfer::config::{parse_config, ScenarioConfig};
use scm_transfer::geometry::{self, Location, Point};
use scm_transfer::planner::{build_library, dtw};
use scm_transfer::scm::{jacobi_sn, validate_polygon, RectangleMap};
use scm_transfer::sim::{run_scenario, trace_metrics, Mode, SimError, SimTrace, SimulatedVehicle, TraceMetrics, VehicleParams};
use scm_transfer::transfer::{
    build_capability_hull, map_command, select_mapping_region, Command, CommandPair, MappingRegion, DEFAULT_REGION_VERTICES,
};

// Pinned tolerances.
const ROUND_TRIP_REL: f64 = 1e-6;
const ROUND_TRIP_BUDGET: Duration = Duration::from_secs(60);
const ASPECT_TOL: f64 = 1e-6;
const SN_ORACLE_TOL: f64 = 1e-10;
const SN_SIN_TOL: f64 = 1e-12;
const AFFINE_TOL: f64 = 1e-4;
const NOISELESS_RETRIEVAL_TOL: f64 = 1e-6;
const NOISY_RETRIEVAL_MAE: f64 = 0.15;
const MAX_DEVIATION: f64 = 0.3;
const SCENARIO_BUDGET: Duration = Duration::from_secs(120);
const BASELINE_FACTOR: f64 = 2.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

// ---------------------------------------------------------------- 1

/// Random star-shaped simple polygon with every interior angle at least
/// `0.2π`.
fn random_polygon(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    loop {
        let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        angles.sort_by(f64::total_cmp);
        let gaps_ok = (0..n).all(|i| {
            let next = if i + 1 < n { angles[i + 1] } else { angles[0] + 2.0 * PI };
            next - angles[i] > 0.3
        });
        if !gaps_ok {
            continue;
        }
        let w: Vec<Complex64> = angles
            .iter()
            .map(|&a| Complex64::from_polar(rng.gen_range(0.5..1.5), a))
            .collect();
        let pts: Vec<Point> = w.iter().map(|z| [z.re, z.im]).collect();
        if !geometry::is_simple(&pts) || geometry::signed_area(&pts) <= 0.0 {
            continue;
        }
        let min_angle = (0..n)
            .map(|j| {
                let a = w[j] - w[(j + n - 1) % n];
                let b = w[(j + 1) % n] - w[j];
                PI - (b / a).arg()
            })
            .fold(f64::INFINITY, f64::min);
        if min_angle >= 0.2 * PI {
            return w;
        }
    }
}

fn interior_points(rng: &mut ChaCha8Rng, w: &[Complex64], count: usize) -> Vec<Complex64> {
    let pts: Vec<Point> = w.iter().map(|z| [z.re, z.im]).collect();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &pts {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = [rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])];
        if geometry::locate(p, &pts, 1e-12) == Location::Inside {
            out.push(Complex64::new(p[0], p[1]));
        }
    }
    out
}

fn criterion_round_trip() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    let mut failures = Vec::new();
    for case in 0..40 {
        let n = if case < 20 { 4 } else { 5 };
        let w = random_polygon(&mut rng, n);
        let corners = if n == 4 {
            [0, 1, 2, 3]
        } else {
            let skip = rng.gen_range(0..5);
            let c: Vec<usize> = (0..5).filter(|&k| k != skip).collect();
            [c[0], c[1], c[2], c[3]]
        };
        let map = match validate_polygon(&w, corners).and_then(|p| RectangleMap::new(&p)) {
            Ok(m) => m,
            Err(e) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        let diam = map.polygon().diameter();
        for p in interior_points(&mut rng, &w, 100) {
            match map.polygon_to_rect(p).and_then(|q| map.rect_to_polygon(q)) {
                Ok(back) => worst = worst.max((back - p).norm() / diam),
                Err(e) => failures.push(format!("case {case} point {p}: {e}")),
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        failures.is_empty() && worst < ROUND_TRIP_REL && elapsed < ROUND_TRIP_BUDGET,
        format!(
            "20 quadrilaterals + 20 pentagons x 100 points, worst relative error {worst:.2e}, {} failures, {:.1} s{}",
            failures.len(),
            elapsed.as_secs_f64(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------- 2

fn criterion_aspect() -> Verdict {
    let mut worst = 0.0_f64;
    let mut detail = Vec::new();
    for (a, b) in [(1.0, 4.0), (1.0, 2.0), (1.0, 1.0), (2.0, 1.0), (3.0, 1.0), (4.0, 1.0)] {
        let w = [
            Complex64::new(0.0, 0.0),
            Complex64::new(a, 0.0),
            Complex64::new(a, b),
            Complex64::new(0.0, b),
        ];
        let got = validate_polygon(&w, [0, 1, 2, 3])
            .and_then(|p| RectangleMap::new(&p))
            .map(|m| m.aspect())
            .unwrap_or(f64::NAN);
        let err = (got - a / b).abs();
        worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
        detail.push(format!("{}", a / b));
    }
    verdict(
        worst < ASPECT_TOL,
        format!("ratios [{}], worst aspect error {worst:.2e}", detail.join(", ")),
    )
}

// ---------------------------------------------------------------- 3

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        let (an, bn) = (0.5 * (a + b), (a * b).sqrt());
        a = an;
        b = bn;
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
    }
    a
}

/// sn through Jacobi theta series in the nome.
fn sn_theta(u: Complex64, m: f64) -> Complex64 {
    let k = PI / (2.0 * agm(1.0, (1.0 - m).sqrt()));
    let kp = PI / (2.0 * agm(1.0, m.sqrt()));
    let q = (-PI * kp / k).exp();
    let v = u * (PI / (2.0 * k));
    let terms = 40;
    let mut th1 = Complex64::new(0.0, 0.0);
    let mut th4 = Complex64::new(1.0, 0.0);
    let (mut th2_0, mut th3_0) = (0.0, 1.0);
    for n in 0..terms {
        let nf = n as f64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let qh = q.powf((nf + 0.5) * (nf + 0.5));
        th1 += 2.0 * sign * qh * (v * (2.0 * nf + 1.0)).sin();
        th2_0 += 2.0 * qh;
        if n >= 1 {
            let qn = q.powf(nf * nf);
            th4 += 2.0 * sign * qn * (v * (2.0 * nf)).cos();
            th3_0 += 2.0 * qn;
        }
    }
    th1 / th4 * (th3_0 / th2_0)
}

fn criterion_elliptic() -> Verdict {
    let mut worst = 0.0_f64;
    for i in 0..10 {
        let m = 0.05 + 0.9 * i as f64 / 9.0;
        let k = PI / (2.0 * agm(1.0, (1.0 - m).sqrt()));
        let kp = PI / (2.0 * agm(1.0, m.sqrt()));
        for j in 0..10 {
            // Points spread over the rectangle, away from the pole at iK'.
            let re = -k + 2.0 * k * (j as f64 + 0.5) / 10.0;
            let im = 0.85 * kp * ((j * 7) % 10) as f64 / 9.0;
            let u = Complex64::new(re, im);
            let got = jacobi_sn(u, m).unwrap_or(Complex64::new(f64::NAN, 0.0));
            let want = sn_theta(u, m);
            let err = (got - want).norm() / want.norm().max(1.0);
            worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
        }
    }
    let mut worst_sin = 0.0_f64;
    for j in 0..10 {
        let u = Complex64::new(-3.0 + 0.6 * j as f64, 0.1 * j as f64);
        let got = jacobi_sn(u, 0.0).unwrap_or(Complex64::new(f64::NAN, 0.0));
        let err = (got - u.sin()).norm();
        worst_sin = worst_sin.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    verdict(
        worst < SN_ORACLE_TOL && worst_sin < SN_SIN_TOL,
        format!("theta-series oracle worst {worst:.2e} on 10x10 grid, sn(q|0) vs sin worst {worst_sin:.2e}"),
    )
}

// ---------------------------------------------------------------- 4

fn affine_pairs() -> Vec<CommandPair> {
    command_grid(5, 5)
        .into_iter()
        .map(|l| CommandPair {
            teacher: Command::new(l.v / 3.0, l.gamma * 3.0 / 8.0),
            learner: l,
        })
        .collect()
}

/// Whether the region is an axis-aligned rectangle in teacher space.
fn is_rectangular_cell(region: &MappingRegion) -> bool {
    let w = region.teacher_polygon.vertices();
    let (vs, gs): (Vec<f64>, Vec<f64>) = w.iter().map(|z| (z.re, z.im)).unzip();
    let distinct = |xs: &[f64]| {
        let mut d: Vec<f64> = Vec::new();
        for &x in xs {
            if !d.iter().any(|&y| (x - y).abs() < 1e-12) {
                d.push(x);
            }
        }
        d.len()
    };
    w.len() == 4 && distinct(&vs) == 2 && distinct(&gs) == 2
}

fn criterion_affine() -> Verdict {
    let hull = match build_capability_hull(&affine_pairs()) {
        Ok(h) => h,
        Err(e) => return verdict(false, format!("hull: {e}")),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0_f64;
    let mut errors = 0;
    let (mut accepted, mut skipped) = (0, 0);
    while accepted < 50 && accepted + skipped < 10_000 {
        let t = Command::new(rng.gen_range(0.0..1.0 / 3.0), rng.gen_range(-0.375..0.375));
        match select_mapping_region(t, &hull, DEFAULT_REGION_VERTICES) {
            Ok(region) if is_rectangular_cell(&region) => accepted += 1,
            Ok(_) => {
                skipped += 1;
                continue;
            }
            Err(_) => {
                errors += 1;
                accepted += 1;
                continue;
            }
        }
        // The nearest-pair shortcut is disabled so every command goes
        // through the maps.
        match map_command(t, &hull, 0.0) {
            Ok(u) => {
                let want = Command::new(3.0 * t.v, t.gamma * 8.0 / 3.0);
                worst = worst.max(u.distance(&want));
            }
            Err(_) => errors += 1,
        }
    }
    verdict(
        errors == 0 && accepted == 50 && worst < AFFINE_TOL,
        format!(
            "50 random commands in rectangular cells ({skipped} draws skipped for non-rectangular regions), \
             worst deviation from v_L = 3 v_T, g_L = 8/3 g_T: {worst:.2e}, {errors} errors"
        ),
    )
}

// ---------------------------------------------------------------- 5

fn brute_force_alignment(a: &[Point], b: &[Point], i: usize, j: usize, acc: f64, best: &mut f64) {
    let acc = geometry::dist(a[i], b[j]) + acc;
    if i + 1 == a.len() && j + 1 == b.len() {
        *best = best.min(acc);
        return;
    }
    if i + 1 < a.len() {
        brute_force_alignment(a, b, i + 1, j, acc, best);
    }
    if j + 1 < b.len() {
        brute_force_alignment(a, b, i, j + 1, acc, best);
    }
    if i + 1 < a.len() && j + 1 < b.len() {
        brute_force_alignment(a, b, i + 1, j + 1, acc, best);
    }
}

fn criterion_dtw() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    let mut checked = 0;
    for _ in 0..100 {
        for la in 1..=6 {
            for lb in 1..=6 {
                let mut seq = |n: usize| -> Vec<Point> {
                    (0..n).map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect()
                };
                let a = seq(la);
                let b = seq(lb);
                let mut best = f64::INFINITY;
                brute_force_alignment(&a, &b, 0, 0, 0.0, &mut best);
                checked += 1;
                if dtw(&a, &b) != best {
                    mismatches += 1;
                }
            }
        }
    }
    verdict(
        mismatches == 0,
        format!("{checked} instances (100 per length pair up to 6x6), {mismatches} mismatches"),
    )
}

// ---------------------------------------------------------------- 6

fn teacher() -> VehicleParams {
    VehicleParams::new(3.0, PI / 3.0)
}

fn criterion_calibration() -> Verdict {
    let grid = command_grid(5, 5);
    let mut bb = SimulatedVehicle::new(teacher(), 0.05, 0.0, 0);
    let mut worst = 0.0_f64;
    match probe_learner(&mut bb, &grid, 1.0) {
        Ok(obs) => {
            for o in &obs {
                match retrieve_teacher_equivalent(o, &teacher()) {
                    Ok(r) => worst = worst.max(r.command.distance(&o.command)),
                    Err(_) => worst = f64::INFINITY,
                }
            }
        }
        Err(_) => worst = f64::INFINITY,
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for seed in 0..10 {
        let mut bb = SimulatedVehicle::new(teacher(), 0.05, 0.1, seed);
        let Ok(obs) = probe_learner(&mut bb, &grid, 1.0) else {
            return verdict(false, format!("noisy probe failed for seed {seed}"));
        };
        for o in &obs {
            let got = match retrieve_teacher_equivalent(o, &teacher()) {
                Ok(r) => r.command,
                Err(CalibrationError::InconsistentMotion(raw)) => raw,
                Err(e) => return verdict(false, format!("seed {seed}: {e}")),
            };
            total += (got.v - o.command.v).abs() + (got.gamma - o.command.gamma).abs();
            count += 2;
        }
    }
    let mae = total / count as f64;
    verdict(
        worst < NOISELESS_RETRIEVAL_TOL && mae < NOISY_RETRIEVAL_MAE,
        format!("noiseless worst {worst:.2e} over 25 commands, sigma 0.1 MAE {mae:.4} over 10 seeds"),
    )
}

// ---------------------------------------------------------------- 7, 8, 10

fn reference_config(seed: u64) -> ScenarioConfig {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/ref_s_path.json");
    let text = std::fs::read_to_string(path).expect("reference config is readable");
    let mut cfg = parse_config(&text).expect("reference config is valid");
    cfg.seed = seed;
    cfg
}

struct Run {
    metrics: TraceMetrics,
    trace: SimTrace,
}

fn run(seed: u64, mode: Mode) -> Result<Run, String> {
    let cfg = reference_config(seed);
    match run_scenario(&cfg, mode) {
        Ok(r) => Ok(Run {
            metrics: r.metrics,
            trace: r.trace,
        }),
        Err(SimError::MissionFailed { trace, .. }) => Ok(Run {
            metrics: trace_metrics(&trace, &cfg.path()),
            trace: *trace,
        }),
        Err(e) => Err(e.to_string()),
    }
}

fn trace_csv(trace: &SimTrace) -> Vec<u8> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).expect("in-memory write");
    trace.write_plans_csv(&mut buf).expect("in-memory write");
    buf
}

fn criterion_scenario(runs: &[Result<Run, String>], elapsed: Duration) -> Verdict {
    let mut ok = elapsed < SCENARIO_BUDGET;
    let mut parts = Vec::new();
    for (seed, r) in runs.iter().enumerate() {
        match r {
            Ok(r) => {
                let m = &r.metrics;
                ok &= m.success && m.max_deviation < MAX_DEVIATION;
                parts.push(format!(
                    "seed {seed}: {} max dev {:.3} m",
                    m.outcome.map_or("no outcome".to_string(), |o| o.to_string()),
                    m.max_deviation
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("seed {seed}: {e}"));
            }
        }
    }
    verdict(ok, format!("{}; {:.1} s", parts.join("; "), elapsed.as_secs_f64()))
}

fn criterion_baseline(scm: &[Result<Run, String>]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (seed, s) in scm.iter().enumerate() {
        let (Ok(s), Ok(b)) = (s, run(seed as u64, Mode::Baseline)) else {
            ok = false;
            parts.push(format!("seed {seed}: run error"));
            continue;
        };
        let failed = !b.metrics.success;
        let ratio = b.metrics.max_deviation / s.metrics.max_deviation;
        ok &= failed || ratio >= BASELINE_FACTOR;
        parts.push(format!(
            "seed {seed}: {}, max dev {:.3} m ({ratio:.1}x)",
            b.metrics.outcome.map_or("no outcome".to_string(), |o| o.to_string()),
            b.metrics.max_deviation
        ));
    }
    verdict(ok, parts.join("; "))
}

fn criterion_determinism(first: &Result<Run, String>) -> Verdict {
    let (Ok(a), Ok(b)) = (first, run(0, Mode::Transfer)) else {
        return verdict(false, "run error".to_string());
    };
    let (x, y) = (trace_csv(&a.trace), trace_csv(&b.trace));
    verdict(x == y, format!("seed 0 trace CSV, {} bytes, identical: {}", x.len(), x == y))
}

// ---------------------------------------------------------------- 9

/// Strictly inside the convex hull of `set`: strictly on the inner side of
/// every supporting line through two of its points.
fn strictly_inside_brute_force(p: Point, set: &[Point]) -> bool {
    let tol = 1e-12;
    for i in 0..set.len() {
        for j in 0..set.len() {
            if set[i] == set[j] {
                continue;
            }
            let supporting = set.iter().all(|&s| geometry::cross(set[i], set[j], s) >= -tol);
            if supporting && geometry::cross(set[i], set[j], p) <= tol {
                return false;
            }
        }
    }
    true
}

fn criterion_library() -> Verdict {
    let learner = VehicleParams::new(1.0, PI / 8.0);
    let mut bb = SimulatedVehicle::new(learner, 0.05, 0.0, 0);
    let pairs = match build_command_pairs(&mut bb, &command_grid(5, 5), 1.0, &teacher()) {
        Ok(p) => p,
        Err(e) => return verdict(false, format!("calibration: {e}")),
    };
    let hull = match build_capability_hull(&pairs) {
        Ok(h) => h,
        Err(e) => return verdict(false, format!("hull: {e}")),
    };
    let grid = command_grid(11, 11);
    let lib = match build_library(&grid, &hull, &teacher(), 1.0, 0.05) {
        Ok(l) => l,
        Err(e) => return verdict(false, format!("library: {e}")),
    };
    let set: Vec<Point> = pairs.iter().map(|p| p.teacher.point()).collect();
    let sound = lib
        .primitives
        .iter()
        .zip(&lib.admissible)
        .all(|(p, &a)| a == strictly_inside_brute_force(p.command.point(), &set));
    // Teacher-equivalent capability of the learner: v < 1/3, |gamma| < 3/8,
    // and v > 0 off the zero-speed edge.
    let v_lim = learner.v_max / teacher().v_max;
    let g_lim = learner.gamma_max / teacher().gamma_max;
    let predicted = grid
        .iter()
        .filter(|c| c.v > 0.0 && c.v < v_lim && c.gamma.abs() < g_lim)
        .count();
    let count = lib.admissible_indices().len();
    verdict(
        sound && count == predicted,
        format!("admissible {count}, predicted {predicted}, brute-force containment agrees: {sound}"),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    results.push((1, "conformal round trip", criterion_round_trip()));
    results.push((2, "modulus oracle", criterion_aspect()));
    results.push((3, "elliptic oracle", criterion_elliptic()));
    results.push((4, "affine transfer fidelity", criterion_affine()));
    results.push((5, "DTW brute-force equivalence", criterion_dtw()));
    results.push((6, "calibration inversion", criterion_calibration()));

    let start = Instant::now();
    let scm: Vec<Result<Run, String>> = (0..5).map(|seed| run(seed, Mode::Transfer)).collect();
    let elapsed = start.elapsed();
    results.push((7, "S-path scenario with transfer", criterion_scenario(&scm, elapsed)));
    results.push((8, "baseline failure", criterion_baseline(&scm)));
    results.push((9, "hull and primitive soundness", criterion_library()));
    results.push((10, "determinism", criterion_determinism(&scm[0])));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (n, name, v) in &results {
        println!("criterion {n:>2} {}: {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
