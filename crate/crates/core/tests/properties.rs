use num_complex::Complex64;
use proptest::prelude::*;
use scm_transfer::planner::dtw;
use scm_transfer::scm::{validate_polygon, RectangleMap, ScmError};

fn polyline() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y)| [x, y]), 1..12)
}

fn c(x: f64, y: f64) -> Complex64 {
    Complex64::new(x, y)
}

proptest! {
    #[test]
    fn dtw_is_a_symmetric_nonnegative_dissimilarity(a in polyline(), b in polyline()) {
        let ab = dtw(&a, &b);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - dtw(&b, &a)).abs() <= 1e-9 * (1.0 + ab));
        prop_assert_eq!(dtw(&a, &a), 0.0);
    }

    // Much thinner along the first marked side, the strip length drops
    // below double precision; see `thin_rectangles_report_crowding`.
    #[test]
    fn rectangles_keep_their_aspect(ln_ratio in (0.1f64).ln()..(25.0f64).ln(), h in 0.2..5.0f64, x in -3.0..3.0f64, y in -3.0..3.0f64) {
        let w = h * ln_ratio.exp();
        let poly = validate_polygon(&[c(x, y), c(x + w, y), c(x + w, y + h), c(x, y + h)], [0, 1, 2, 3]).unwrap();
        let map = RectangleMap::new(&poly).unwrap();
        prop_assert!((map.aspect() - w / h).abs() < 1e-6 * (w / h));
    }

    #[test]
    fn trapezoid_round_trip(top in 0.3..0.9f64, h in 0.3..2.0f64, s in 0.05..0.95f64, t in 0.05..0.95f64) {
        let off = (1.0 - top) / 2.0;
        let poly = validate_polygon(&[c(0.0, 0.0), c(1.0, 0.0), c(1.0 - off, h), c(off, h)], [0, 1, 2, 3]).unwrap();
        let map = RectangleMap::new(&poly).unwrap();
        let w = c(off * t + (1.0 - 2.0 * off * t) * s, h * t);
        let q = map.polygon_to_rect(w).unwrap();
        let back = map.rect_to_polygon(q).unwrap();
        prop_assert!((back - w).norm() < 1e-8, "{} -> {} -> {}", w, q, back);
    }
}

#[test]
fn thin_rectangles_report_crowding() {
    let poly = validate_polygon(&[c(0.0, 0.0), c(0.04, 0.0), c(0.04, 1.0), c(0.0, 1.0)], [0, 1, 2, 3]).unwrap();
    assert!(matches!(RectangleMap::new(&poly), Err(ScmError::Crowding { .. })));
    let turned = validate_polygon(&[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.04), c(0.0, 0.04)], [0, 1, 2, 3]).unwrap();
    assert!((RectangleMap::new(&turned).unwrap().aspect() - 25.0).abs() < 1e-9);
}
