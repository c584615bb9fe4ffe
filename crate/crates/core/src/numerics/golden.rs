//! Golden-section search for the maximum of a unimodal function.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
    /// True when the maximiser sits within one tolerance of either end of
    /// the search interval.
    pub at_boundary: bool,
}

/// Maximises `f` on `[lo, hi]`, shrinking the bracket until it is narrower
/// than `x_tol`. The interior points reuse one evaluation per iteration.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, x_tol: f64) -> Maximum {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evaluations = 2;
    while (b - a) > x_tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        evaluations += 1;
    }
    let (x, value) = if fc >= fd { (c, fc) } else { (d, fd) };
    // Compare against the endpoints so monotone objectives report the edge.
    let (flo, fhi) = (f(lo.min(hi)), f(lo.max(hi)));
    evaluations += 2;
    let (x, value) = if flo > value {
        (lo.min(hi), flo)
    } else if fhi > value {
        (lo.max(hi), fhi)
    } else {
        (x, value)
    };
    let at_boundary = (x - lo.min(hi)).abs() <= x_tol || (lo.max(hi) - x).abs() <= x_tol;
    Maximum {
        x,
        value,
        evaluations,
        at_boundary,
    }
}
