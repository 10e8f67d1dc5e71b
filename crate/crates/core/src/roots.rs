//! Scalar bracketing root finders shared by the model code.

/// Bisection on `[lo, hi]`. `f(lo)` and `f(hi)` must differ in sign (a zero at
/// either end is accepted). Stops when the bracket is narrower than `x_tol`.
/// Returns the end of the final bracket on the same side as `hi`, so callers
/// that need a point satisfying `f >= 0` (or `<= 0`) can orient the bracket.
pub fn bisect<F>(mut lo: f64, mut hi: f64, f: F, x_tol: f64, max_iter: usize) -> Option<f64>
where
    F: Fn(f64) -> f64,
{
    let flo = f(lo);
    let fhi = f(hi);
    if flo.is_nan() || fhi.is_nan() {
        return None;
    }
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    let lo_sign = flo.signum();
    for _ in 0..max_iter {
        if (hi - lo).abs() <= x_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// Bisection followed by a few safeguarded Newton steps. `df` is the
/// derivative of `f`; a Newton step leaving the final bracket is rejected.
pub fn bisect_newton<F, D>(lo: f64, hi: f64, f: F, df: D, x_tol: f64) -> Option<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut x = bisect(lo, hi, &f, x_tol, 400)?;
    for _ in 0..4 {
        let fx = f(x);
        if fx == 0.0 {
            break;
        }
        let d = df(x);
        if !d.is_finite() || d == 0.0 {
            break;
        }
        let next = x - fx / d;
        if !(next >= a && next <= b) || f(next).abs() > fx.abs() {
            break;
        }
        x = next;
    }
    Some(x)
}
