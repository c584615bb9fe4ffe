//! Cyclic Jacobi eigenvalue iteration for small dense symmetric matrices.

/// Eigenvalues of a symmetric `N x N` matrix, sorted ascending.
///
/// Only the upper triangle is read.
pub fn symmetric_eigenvalues<const N: usize>(matrix: &[[f64; N]; N]) -> [f64; N] {
    let mut flat: Vec<f64> = matrix.iter().flatten().copied().collect();
    jacobi_in_place(&mut flat, N);
    let mut out = [0.0; N];
    for (i, v) in out.iter_mut().enumerate() {
        *v = flat[i * N + i];
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Eigenvalues of a symmetric matrix given as rows, sorted ascending.
///
/// Panics if the rows do not form a square matrix.
pub fn symmetric_eigenvalues_dyn(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
    let mut flat: Vec<f64> = rows.iter().flatten().copied().collect();
    jacobi_in_place(&mut flat, n);
    let mut out: Vec<f64> = (0..n).map(|i| flat[i * n + i]).collect();
    out.sort_by(f64::total_cmp);
    out
}

// Cyclic Jacobi rotations on a row-major n x n buffer. Sweeps continue until
// the off-diagonal mass drops below 1e-30 of the total or 64 sweeps elapse.
fn jacobi_in_place(a: &mut [f64], n: usize) {
    for i in 0..n {
        for j in 0..i {
            a[i * n + j] = a[j * n + i];
        }
    }
    let total: f64 = a.iter().map(|x| x * x).sum();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[i * n + j] * a[i * n + j];
                }
            }
        }
        if off == 0.0 || off <= 1e-30 * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
}
