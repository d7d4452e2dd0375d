//! Small dense solves: LU with partial pivoting, least squares via normal
//! equations. Sized for Schur complements and coefficient fits (m ≲ 50), not
//! for grid operators.

use crate::error::{Error, Result};

/// Dense LU factorization with partial pivoting (row-major storage).
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn factor(a: &[f64], n: usize) -> Result<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let mut pmax = lu[k * n + k].abs();
            let mut prow = k;
            for i in (k + 1)..n {
                let v = lu[i * n + k].abs();
                if v > pmax {
                    pmax = v;
                    prow = i;
                }
            }
            if pmax == 0.0 {
                return Err(Error::SaddleSingular(format!("dense LU: zero column {k}")));
            }
            piv[k] = prow;
            if prow != k {
                for j in 0..n {
                    lu.swap(k * n + j, prow * n + j);
                }
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let m = lu[i * n + k] / pivot;
                lu[i * n + k] = m;
                if m != 0.0 {
                    for j in (k + 1)..n {
                        lu[i * n + j] -= m * lu[k * n + j];
                    }
                }
            }
        }
        Ok(DenseLu { n, lu, piv })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        // The multipliers are stored in final row order (factor swaps whole
        // rows), so the permutation must be applied in full before the
        // forward sweep reads any of them.
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for k in 0..n {
            let bk = b[k];
            if bk != 0.0 {
                for i in (k + 1)..n {
                    b[i] -= self.lu[i * n + k] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            b[k] /= self.lu[k * n + k];
            let bk = b[k];
            if bk != 0.0 {
                for i in 0..k {
                    b[i] -= self.lu[i * n + k] * bk;
                }
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Weighted least squares: minimize Σ_x w_x (f_x - Σ_c coef_c basis_c(x))².
///
/// `basis` holds the basis vectors; returns the coefficient vector. Solved
/// through the normal equations, which is adequate for the short, nearly
/// orthogonal bases used in the decomposition diagnostics.
pub fn weighted_least_squares(basis: &[Vec<f64>], f: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let m = basis.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let n = f.len();
    let mut gram = vec![0.0f64; m * m];
    let mut rhs = vec![0.0f64; m];
    for a in 0..m {
        debug_assert_eq!(basis[a].len(), n);
        for b in a..m {
            let mut acc = 0.0;
            for x in 0..n {
                acc += w[x] * basis[a][x] * basis[b][x];
            }
            gram[a * m + b] = acc;
            gram[b * m + a] = acc;
        }
        let mut acc = 0.0;
        for x in 0..n {
            acc += w[x] * basis[a][x] * f[x];
        }
        rhs[a] = acc;
    }
    let lu = DenseLu::factor(&gram, m)?;
    Ok(lu.solve(&rhs))
}

/// Eigenvalues of a small dense symmetric matrix (row-major), by cyclic
/// Jacobi rotations. Used for inertia counts of Schur complements, where
/// only the signs matter, so the stopping bar is generous.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    debug_assert!(a.len() >= n * n);
    let mut m = a[..n * n].to_vec();
    let scale = m.iter().fold(0.0f64, |s, &v| s.max(v.abs())).max(1e-300);
    for _ in 0..60 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m[i * n + j].abs());
            }
        }
        if off < 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-16 * scale {
                    continue;
                }
                let theta = 0.5 * (m[q * n + q] - m[p * n + p]) / apq;
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).collect()
}
