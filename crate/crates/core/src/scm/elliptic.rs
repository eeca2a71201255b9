//! Jacobi elliptic functions and complete elliptic integrals.
//!
//! Everything here uses the parameter convention `m = k²`. The complementary
//! parameter `m1 = 1 - m` is accepted separately wherever it matters, since
//! maps with a long strip produce `m` so close to one (or zero) that forming
//! `1 - m` in floating point would lose all significant digits.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use super::ScmError;

const AGM_TOL: f64 = 1e-16;
const MAX_AGM_STEPS: usize = 64;

/// Arithmetic-geometric mean of two non-negative reals.
pub fn agm(a: f64, b: f64) -> f64 {
    let (mut a, mut b) = (a, b);
    for _ in 0..MAX_AGM_STEPS {
        if (a - b).abs() <= AGM_TOL * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    0.5 * (a + b)
}

/// Complete elliptic integral of the first kind, K(m), given `m1 = 1 - m`.
pub fn ellipk_from_complement(m1: f64) -> f64 {
    if m1 <= 0.0 {
        return f64::INFINITY;
    }
    FRAC_PI_2 / agm(1.0, m1.sqrt())
}

/// Complete elliptic integral of the first kind, K(m).
pub fn ellipk(m: f64) -> f64 {
    ellipk_from_complement(1.0 - m)
}

/// The pair (K(m), K'(m)) = (K(m), K(1 - m)) computed without cancellation.
pub fn ellipk_pair(m: f64, m1: f64) -> (f64, f64) {
    (ellipk_from_complement(m1), ellipk_from_complement(m))
}

/// sn, cn, dn of a real argument with parameter `m` (complement `m1 = 1 - m`),
/// by Bulirsch's descending Gauss transformation.
pub fn sncndn_real(u: f64, m: f64, m1: f64) -> (f64, f64, f64) {
    if m <= 0.0 {
        return (u.sin(), u.cos(), 1.0);
    }
    if m1 <= 0.0 {
        let sech = 1.0 / u.cosh();
        return (u.tanh(), sech, sech);
    }
    const CONVERGED: f64 = 1e-8;
    let mut em = [0.0_f64; 16];
    let mut en = [0.0_f64; 16];
    let mut a = 1.0;
    let mut emc = m1;
    let mut c = 1.0;
    let mut last = 0;
    for i in 0..16 {
        last = i;
        em[i] = a;
        emc = emc.sqrt();
        en[i] = emc;
        c = 0.5 * (a + emc);
        if (a - emc).abs() <= CONVERGED * a {
            break;
        }
        emc *= a;
        a = c;
    }
    let v = u * c;
    let (mut sn, mut cn) = v.sin_cos();
    let mut dn = 1.0;
    if sn != 0.0 {
        let mut a = cn / sn;
        c *= a;
        for i in (0..=last).rev() {
            let b = em[i];
            a *= c;
            c *= dn;
            dn = (en[i] + a) / (b + a);
            a = c / b;
        }
        let r = 1.0 / (c * c + 1.0).sqrt();
        sn = if sn >= 0.0 { r } else { -r };
        cn = c * sn;
    }
    (sn, cn, dn)
}

/// sn, cn, dn of a complex argument.
///
/// Built from the real-argument values at `Re q` with parameter `m` and at
/// `Im q` with the complementary parameter `m1` (Jacobi's imaginary
/// transformation combined with the addition theorem).
pub fn sncndn(q: Complex64, m: f64, m1: f64) -> (Complex64, Complex64, Complex64) {
    let (s, c, d) = sncndn_real(q.re, m, m1);
    if q.im == 0.0 {
        return (Complex64::new(s, 0.0), Complex64::new(c, 0.0), Complex64::new(d, 0.0));
    }
    let (s1, c1, d1) = sncndn_real(q.im, m1, m);
    let delta = c1 * c1 + m * s * s * s1 * s1;
    let sn = Complex64::new(s * d1, c * d * s1 * c1) / delta;
    let cn = Complex64::new(c * c1, -s * d * s1 * d1) / delta;
    let dn = Complex64::new(d * c1 * d1, -m * s * c * s1) / delta;
    (sn, cn, dn)
}

/// Jacobi elliptic sine sn(q | m) for complex `q` and `m ∈ [0, 1)`.
pub fn jacobi_sn(q: Complex64, m: f64) -> Result<Complex64, ScmError> {
    if !(0.0..1.0).contains(&m) || !m.is_finite() {
        return Err(ScmError::ModulusOutOfRange(m));
    }
    Ok(sncndn(q, m, 1.0 - m).0)
}

/// Carlson's symmetric integral R_F(x, y, z) for complex arguments off the
/// negative real axis.
pub fn carlson_rf(x: Complex64, y: Complex64, z: Complex64) -> Complex64 {
    let (mut x, mut y, mut z) = (x, y, z);
    let a0 = (x + y + z) / 3.0;
    let spread = (a0 - x).norm().max((a0 - y).norm()).max((a0 - z).norm());
    let mut q = spread / (3.0 * f64::EPSILON).powf(1.0 / 6.0);
    let mut a = a0;
    let mut scale = 1.0;
    for _ in 0..200 {
        if q < a.norm() {
            break;
        }
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * sy + sx * sz + sy * sz;
        x = (x + lambda) * 0.25;
        y = (y + lambda) * 0.25;
        z = (z + lambda) * 0.25;
        a = (a + lambda) * 0.25;
        q *= 0.25;
        scale *= 0.25;
    }
    let xx = (a0 - x) * scale / a;
    let yy = (a0 - y) * scale / a;
    let zz = -(xx + yy);
    let e2 = xx * yy - zz * zz;
    let e3 = xx * yy * zz;
    (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - e3 * e2 * (3.0 / 44.0)) / a.sqrt()
}

/// Inverse of sn on the closed upper half-plane: returns `q` in the rectangle
/// `[-K, K] × [0, K']` with `sn(q | m) = s`.
///
/// Real `s` (the rectangle boundary) is treated as the limit from above.
pub fn inverse_sn(s: Complex64, m: f64, m1: f64) -> Complex64 {
    let s = if s.im > 0.0 {
        s
    } else {
        // Smallest positive imaginary part that survives squaring: keeps every
        // square root in the Carlson iteration on the upper-half-plane branch.
        Complex64::new(s.re, 1e-150_f64.max(s.re.abs() * 1e-300))
    };
    let one = Complex64::new(1.0, 0.0);
    let s2 = s * s;
    let mut q = s * carlson_rf(one - s2, one - s2 * m, one);
    // Newton polish on sn(q) = s; sn' = cn·dn.
    let (k, kp) = ellipk_pair(m, m1);
    for _ in 0..4 {
        let (sn, cn, dn) = sncndn(q, m, m1);
        let deriv = cn * dn;
        if !sn.is_finite() || deriv.norm() < 1e-12 {
            break;
        }
        let step = (sn - s) / deriv;
        if !(step.norm() < 1e-3 * (k + kp)) {
            break;
        }
        q -= step;
    }
    Complex64::new(q.re.clamp(-k, k), q.im.clamp(0.0, kp))
}

/// Conformal modulus (height / width) of the rectangle `[-K, K] × [0, K']`.
pub fn rectangle_aspect(m: f64, m1: f64) -> f64 {
    let (k, kp) = ellipk_pair(m, m1);
    kp / (2.0 * k)
}

/// Parameter pair `(m, 1 - m)` of the rectangle whose strip image has length
/// `L`, i.e. `m = exp(-2πL)`.
pub fn modulus_from_strip_length(length: f64) -> (f64, f64) {
    let m = (-2.0 * PI * length).exp();
    let m1 = -(-2.0 * PI * length).exp_m1();
    (m, m1)
}

/// Strip length whose rectangle has the given aspect (height / width).
///
/// Bisection on the monotone map `L ↦ aspect(exp(-2πL))`.
pub fn strip_length_for_aspect(aspect: f64) -> f64 {
    let (mut lo, mut hi) = (1e-6_f64, 60.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (m, m1) = modulus_from_strip_length(mid);
        if rectangle_aspect(m, m1) < aspect {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sn_at_zero_argument() {
        for m in [0.0, 0.1, 0.5, 0.99] {
            let sn = jacobi_sn(Complex64::new(0.0, 0.0), m).unwrap();
            assert_eq!(sn.norm(), 0.0);
        }
    }

    #[test]
    fn sn_degenerates_to_sine() {
        let sn = jacobi_sn(Complex64::new(0.3, 0.0), 0.0).unwrap();
        assert!((sn.re - 0.3_f64.sin()).abs() < 1e-15);
        assert_relative_eq!(sn.re, 0.29552, epsilon = 1e-5);
    }

    #[test]
    fn sn_reaches_one_at_quarter_period() {
        let m = 0.5;
        // K(0.5) from the Legendre relation Γ(1/4)² / (4√π).
        let k_ref = 1.854_074_677_301_372;
        assert_relative_eq!(ellipk(m), k_ref, epsilon = 1e-14);
        let sn = jacobi_sn(Complex64::new(k_ref, 0.0), m).unwrap();
        assert!((sn.re - 1.0).abs() < 1e-12 && sn.im.abs() < 1e-12);
    }

    #[test]
    fn modulus_out_of_range() {
        let q = Complex64::new(0.1, 0.1);
        assert!(matches!(jacobi_sn(q, 1.0), Err(ScmError::ModulusOutOfRange(_))));
        assert!(matches!(jacobi_sn(q, -0.1), Err(ScmError::ModulusOutOfRange(_))));
        assert!(jacobi_sn(q, f64::NAN).is_err());
    }

    #[test]
    fn rectangle_corners_under_sn() {
        let (m, m1) = modulus_from_strip_length(0.7);
        let (k, kp) = ellipk_pair(m, m1);
        let kk = m.sqrt();
        let corner = sncndn(Complex64::new(k, kp), m, m1).0;
        assert_relative_eq!(corner.re, 1.0 / kk, max_relative = 1e-11);
        assert!(corner.im.abs() < 1e-9);
        let corner = sncndn(Complex64::new(-k, kp), m, m1).0;
        assert_relative_eq!(corner.re, -1.0 / kk, max_relative = 1e-11);
    }

    #[test]
    fn inverse_sn_recovers_interior_and_boundary_points() {
        let (m, m1) = modulus_from_strip_length(0.4);
        let (k, kp) = ellipk_pair(m, m1);
        for &(fx, fy) in &[(0.3, 0.2), (-0.9, 0.95), (0.0, 0.5), (0.99, 0.01), (1.0, 0.5), (0.5, 1.0), (-0.4, 0.0)] {
            let q = Complex64::new(fx * k, fy * kp);
            let s = sncndn(q, m, m1).0;
            let back = inverse_sn(s, m, m1);
            assert!((back - q).norm() < 1e-10, "q={q} back={back}");
        }
        // At a corner sn' = 0, so the inverse is square-root conditioned.
        for q in [Complex64::new(-k, 0.0), Complex64::new(k, kp)] {
            let back = inverse_sn(sncndn(q, m, m1).0, m, m1);
            assert!((back - q).norm() < 1e-7, "q={q} back={back}");
        }
    }

    #[test]
    fn square_aspect_round_trip() {
        let l = strip_length_for_aspect(1.0);
        let (m, m1) = modulus_from_strip_length(l);
        assert_relative_eq!(rectangle_aspect(m, m1), 1.0, epsilon = 1e-12);
    }
}
