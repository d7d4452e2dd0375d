//! Symmetric tridiagonal eigenproblems: Sturm-sequence bisection for
//! eigenvalues, inverse iteration for eigenvectors.
//!
//! Used for the radial eigenvalue problems, where the discretized operator
//! is tridiagonal after a diagonal similarity transform.

/// Number of eigenvalues of the symmetric tridiagonal (diag, off) strictly
/// below `x` (Sturm count via the LDLᵀ recurrence).
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let n = diag.len();
    debug_assert_eq!(off.len(), n.saturating_sub(1));
    let mut count = 0usize;
    let mut d = diag[0] - x;
    if d < 0.0 {
        count += 1;
    }
    for i in 1..n {
        if d == 0.0 {
            d = 1e-300;
        }
        d = (diag[i] - x) - off[i - 1] * off[i - 1] / d;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k`-th largest eigenvalue (k = 0 is the largest), by bisection.
pub fn kth_largest_eigenvalue(diag: &[f64], off: &[f64], k: usize, tol: f64) -> f64 {
    let n = diag.len();
    // Gershgorin bounds.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut r = 0.0;
        if i > 0 {
            r += off[i - 1].abs();
        }
        if i + 1 < n {
            r += off[i].abs();
        }
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    // Eigenvalue λ_{n-1-k} in ascending order: find smallest x with
    // count(x) >= n - k, i.e. at least n-k eigenvalues below x.
    let target = n - k;
    let mut a = lo;
    let mut b = hi + (hi - lo).abs() * 1e-12 + 1e-12;
    while b - a > tol * (1.0 + a.abs().max(b.abs())) {
        let mid = 0.5 * (a + b);
        if sturm_count(diag, off, mid) >= target {
            b = mid;
        } else {
            a = mid;
        }
    }
    0.5 * (a + b)
}

/// Eigenvector by inverse iteration at shift `sigma` (assumed close to an
/// isolated eigenvalue). Deterministic start; returns a max-normalized
/// vector.
pub fn inverse_iteration(diag: &[f64], off: &[f64], sigma: f64, iters: usize) -> Vec<f64> {
    let n = diag.len();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7).sin()).collect();
    normalize_max(&mut v);
    for _ in 0..iters {
        let mut w = v.clone();
        solve_shifted(diag, off, sigma, &mut w);
        normalize_max(&mut w);
        v = w;
    }
    // Fix sign: make the largest-|.| entry positive.
    let imax = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    if v[imax] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
    v
}

fn normalize_max(v: &mut [f64]) {
    let m = v.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1e-300);
    for x in v.iter_mut() {
        *x /= m;
    }
}

/// Solve (T - sigma I) x = b by LU with partial pivoting between adjacent
/// rows (standard stable tridiagonal elimination).
fn solve_shifted(diag: &[f64], off: &[f64], sigma: f64, b: &mut [f64]) {
    let n = diag.len();
    // Rows: [c_i, a_i, u_i, (fill) s_i]; partial pivoting introduces one
    // extra superdiagonal.
    let mut a: Vec<f64> = diag.iter().map(|&d| d - sigma).collect();
    let mut u: Vec<f64> = off.to_vec();
    u.push(0.0);
    let mut s = vec![0.0f64; n];
    let mut low: Vec<f64> = off.to_vec(); // subdiagonal entries c_{i+1}
    for i in 0..n - 1 {
        if low[i].abs() > a[i].abs() {
            // Swap row i and i+1.
            b.swap(i, i + 1);
            std::mem::swap(&mut a[i], &mut low[i]);
            let tmp_u = u[i];
            u[i] = a[i + 1];
            a[i + 1] = tmp_u;
            // s[i] takes row i+1's superdiagonal.
            let tmp_s = s[i];
            s[i] = u[i + 1];
            u[i + 1] = tmp_s;
        }
        let piv = if a[i] == 0.0 { 1e-300 } else { a[i] };
        let m = low[i] / piv;
        a[i + 1] -= m * u[i];
        u[i + 1] -= m * s[i];
        b[i + 1] -= m * b[i];
    }
    // Back substitution.
    for i in (0..n).rev() {
        let mut acc = b[i];
        if i + 1 < n {
            acc -= u[i] * b[i + 1];
        }
        if i + 2 < n {
            acc -= s[i] * b[i + 2];
        }
        let piv = if a[i] == 0.0 { 1e-300 } else { a[i] };
        b[i] = acc / piv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Free 1D Laplacian with Dirichlet ends has eigenvalues
    /// 2 - 2 cos(kπ/(n+1)) for the (-u'') sign convention.
    #[test]
    fn sturm_bisection_matches_closed_form() {
        let n = 64;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let exact_min = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let exact_max = 2.0 - 2.0 * ((n as f64) * std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let max = kth_largest_eigenvalue(&diag, &off, 0, 1e-13);
        let min = kth_largest_eigenvalue(&diag, &off, n - 1, 1e-13);
        assert!((max - exact_max).abs() < 1e-10);
        assert!((min - exact_min).abs() < 1e-10);
    }

    #[test]
    fn inverse_iteration_finds_ground_mode() {
        let n = 64;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let lam = kth_largest_eigenvalue(&diag, &off, n - 1, 1e-13);
        let v = inverse_iteration(&diag, &off, lam + 1e-10, 3);
        // Ground mode of the Dirichlet chain is sin(π(i+1)/(n+1)).
        let exact: Vec<f64> =
            (0..n).map(|i| ((i as f64 + 1.0) * std::f64::consts::PI / (n as f64 + 1.0)).sin()).collect();
        let m = exact.iter().fold(0.0f64, |a, &x| a.max(x));
        let mut worst = 0.0f64;
        for i in 0..n {
            worst = worst.max((v[i] - exact[i] / m).abs());
        }
        assert!(worst < 1e-8, "eigenvector error {worst}");
    }
}
