use crate::error::{Error, Result};

/// Bisection on a bracket with a sign change.
///
/// Stops when the bracket is narrower than `x_tol` or after `max_iter`
/// halvings, returning the midpoint of the final bracket.
pub fn bisect<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    x_tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.signum() * fb.signum() < 0.0) {
        return Err(Error::Bracket { lo, hi });
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= x_tol {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    if (b - a).abs() <= x_tol {
        Ok(0.5 * (a + b))
    } else {
        Err(Error::NonConvergence {
            routine: "bisection",
            estimate: 0.5 * (a + b),
            error: (b - a).abs(),
            target: x_tol,
        })
    }
}
