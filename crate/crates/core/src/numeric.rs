//! Scalar root finding and maximization on brackets.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("bracket [{lo}, {hi}] does not enclose a sign change")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("no convergence after {iterations} iterations (last x = {last_x})")]
    IterationLimit { iterations: usize, last_x: f64 },
}

/// Finds a root of `f` on `[lo, hi]` with a secant step safeguarded by
/// bisection. Stops when `|f(x)| < ftol` or the bracket is narrower than
/// `xtol`.
pub fn bracketed_root<F>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
    ftol: f64,
    max_iter: usize,
) -> Result<f64, NumericError>
where
    F: Fn(f64) -> f64,
{
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(NumericError::NoSignChange { lo, hi });
    }
    let mut use_bisection = false;
    for _ in 0..max_iter {
        let width = hi - lo;
        let mut x = if use_bisection {
            0.5 * (lo + hi)
        } else {
            hi - fhi * (hi - lo) / (fhi - flo)
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx.abs() < ftol {
            return Ok(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        // alternate to bisection whenever the secant step stalls
        use_bisection = !use_bisection && (hi - lo) > 0.5 * width;
        if hi - lo < xtol {
            return Ok(if flo.abs() < fhi.abs() { lo } else { hi });
        }
    }
    Err(NumericError::IterationLimit {
        iterations: max_iter,
        last_x: 0.5 * (lo + hi),
    })
}

/// Bisection for the first point where `g` becomes non-positive, given
/// `g(lo) > 0 >= g(hi)`. Returns the upper end of the final bracket, so the
/// returned point always lies on the crossed side.
pub fn locate_crossing<G>(g: G, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> Result<f64, NumericError>
where
    G: Fn(f64) -> f64,
{
    for _ in 0..max_iter {
        if hi - lo <= tol {
            return Ok(hi);
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(hi);
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= tol {
        Ok(hi)
    } else {
        Err(NumericError::IterationLimit {
            iterations: max_iter,
            last_x: hi,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_of_quadratic() {
        let r = bracketed_root(|x| -x * x + 2.0 * x + 1.0, 2.0, 3.0, 1e-14, 1e-14, 200).unwrap();
        assert!((r - (1.0 + 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn root_requires_sign_change() {
        let err = bracketed_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 1e-12, 50).unwrap_err();
        assert!(matches!(err, NumericError::NoSignChange { .. }));
    }

    #[test]
    fn root_on_flat_steep_function() {
        // secant alone crawls on this one
        let r = bracketed_root(|x: f64| x.powi(9) - 1e-9, 0.0, 4.0, 1e-15, 0.0, 400).unwrap();
        assert!((r - 0.1).abs() < 1e-12, "{r}");
    }

    #[test]
    fn crossing_of_linear_function() {
        let root = 0.123_456_789_012;
        let t = locate_crossing(|t| root - t, 0.0, 1.0, 1e-14, 200).unwrap();
        assert!(t >= root && t - root <= 1e-14);
    }

    #[test]
    fn crossing_iteration_limit() {
        let err = locate_crossing(|t| 0.5 - t, 0.0, 1.0, 1e-14, 3).unwrap_err();
        assert!(matches!(err, NumericError::IterationLimit { .. }));
    }
}
