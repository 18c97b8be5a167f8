//! Scalar quadrature and root-finding building blocks.
//!
//! Adaptive Simpson integration is used both by the deformed-logarithm
//! calculus (which is defined through an integral) and by the numerical
//! oracles that cross-check closed-form entropies and distances.

use crate::error::{Error, Result};

/// Maximum recursion depth for adaptive Simpson refinement.
const MAX_DEPTH: u32 = 60;

/// Integrate `f` over `[a, b]` with adaptive Simpson refinement.
///
/// `abs_tol` is the requested absolute error; intervals are split until the
/// local Richardson estimate drops below the locally allotted tolerance.
/// A relative floor of `1e-14 * |estimate|` guards against unattainable
/// requests on large-magnitude integrals.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "integration bounds must be finite, got [{a}, {b}]"
        )));
    }
    if abs_tol <= 0.0 {
        return Err(Error::InvalidInput(
            "quadrature tolerance must be positive".into(),
        ));
    }
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let m = 0.5 * (lo + hi);
    let flo = f(lo);
    let fm = f(m);
    let fhi = f(hi);
    if !(flo.is_finite() && fm.is_finite() && fhi.is_finite()) {
        return Err(Error::NumericalError(
            "integrand evaluated to a non-finite value".into(),
        ));
    }
    let whole = simpson(lo, hi, flo, fm, fhi);
    let v = simpson_step(&f, lo, m, hi, flo, fm, fhi, whole, abs_tol, MAX_DEPTH)?;
    Ok(sign * v)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    if !(flm.is_finite() && frm.is_finite()) {
        return Err(Error::NumericalError(
            "integrand evaluated to a non-finite value".into(),
        ));
    }
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // 15 = Richardson factor for Simpson's rule; the relative floor keeps the
    // recursion from chasing digits f64 cannot represent.
    let local_tol = tol.max(1e-14 * (left + right).abs());
    if delta.abs() <= 15.0 * local_tol || (b - a) < 1e-300 {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::NumericalError(format!(
            "adaptive quadrature failed to converge on [{a}, {b}]"
        )));
    }
    let half = 0.5 * tol;
    let vl = simpson_step(f, a, lm, m, fa, flm, fm, left, half, depth - 1)?;
    let vr = simpson_step(f, m, rm, b, fm, frm, fb, right, half, depth - 1)?;
    Ok(vl + vr)
}

/// Bisection on a sign change of `f` over `[lo, hi]`.
///
/// Stops when the bracket width drops below `tol * (1 + |x|)` and returns the
/// bracket midpoint.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NumericalError(format!(
            "bisection bracket [{lo}, {hi}] carries no sign change"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= tol * (1.0 + mid.abs()) {
            return Ok(mid);
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bisection over `[lo0, hi0]`, expanding the bracket geometrically until a
/// sign change is found (or the expansion limits are hit).
pub fn bisect_with_expansion<F: Fn(f64) -> f64>(f: F, lo0: f64, hi0: f64, tol: f64) -> Result<f64> {
    let mut lo = lo0;
    let mut hi = hi0;
    let mut tries = 0;
    while f(lo).signum() == f(hi).signum() && tries < 40 {
        lo = (lo / 10.0).max(1e-300);
        hi = (hi * 10.0).min(1e300);
        tries += 1;
    }
    bisect(f, lo, hi, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        // Simpson is exact for cubics.
        let v = integrate(|x| x * x * x - 2.0 * x + 1.0, -1.0, 3.0, 1e-12).unwrap();
        let exact = |x: f64| x.powi(4) / 4.0 - x * x + x;
        assert!((v - (exact(3.0) - exact(-1.0))).abs() < 1e-10);
    }

    #[test]
    fn integrates_gaussian_density() {
        let v = integrate(
            |x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            -40.0,
            40.0,
            1e-12,
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let a = integrate(|x| x.exp(), 0.0, 1.0, 1e-12).unwrap();
        let b = integrate(|x| x.exp(), 1.0, 0.0, 1e-12).unwrap();
        assert!((a + b).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonfinite_integrand() {
        assert!(integrate(|x| x.ln(), -1.0, 1.0, 1e-9).is_err());
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn bisect_requires_sign_change() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn expansion_reaches_distant_root() {
        let r = bisect_with_expansion(|x| x - 5.0e4, 1e-2, 1.0, 1e-12).unwrap();
        assert!((r - 5.0e4).abs() / 5.0e4 < 1e-10);
    }
}
