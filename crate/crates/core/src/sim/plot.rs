//! Minimal SVG rendering of a run.

use std::fmt::Write;

use super::trace::SimTrace;
use super::Environment;
use crate::geometry::Point;

const SIZE: f64 = 800.0;
const MARGIN: f64 = 40.0;

fn polyline(out: &mut String, pts: &[Point], map: &impl Fn(Point) -> (f64, f64), style: &str) {
    if pts.is_empty() {
        return;
    }
    let coords: Vec<String> = pts
        .iter()
        .map(|&p| {
            let (x, y) = map(p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(out, r#"<polyline fill="none" {style} points="{}"/>"#, coords.join(" "));
}

/// Desired path (grey), obstacles with their radii, true trajectory (blue)
/// and replanning events (red dots).
pub fn render_svg(env: &Environment, trace: &SimTrace) -> String {
    let mut pts: Vec<Point> = env.path.waypoints.clone();
    pts.extend(trace.positions());
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &pts {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    for o in &env.obstacles {
        lo[0] = lo[0].min(o.x - o.radius);
        lo[1] = lo[1].min(o.y - o.radius);
        hi[0] = hi[0].max(o.x + o.radius);
        hi[1] = hi[1].max(o.y + o.radius);
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let map = |p: Point| (MARGIN + (p[0] - lo[0]) * scale, SIZE - MARGIN - (p[1] - lo[1]) * scale);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    polyline(&mut out, &env.path.waypoints, &map, r##"stroke="#999" stroke-width="3" stroke-dasharray="8 4""##);
    for o in &env.obstacles {
        let (x, y) = map(o.centre());
        let _ = writeln!(
            out,
            r##"<circle cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="#444" fill-opacity="0.6"/>"##,
            o.radius * scale
        );
    }
    polyline(&mut out, &trace.positions(), &map, r##"stroke="#1f5fbf" stroke-width="2""##);
    for r in trace.records.iter().filter(|r| r.replan) {
        let (x, y) = map([r.state.x, r.state.y]);
        let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="#d62728"/>"##);
    }
    let (gx, gy) = map(env.path.goal);
    let _ = writeln!(out, r##"<circle cx="{gx:.2}" cy="{gy:.2}" r="6" fill="none" stroke="#2ca02c" stroke-width="2"/>"##);
    out.push_str("</svg>\n");
    out
}
