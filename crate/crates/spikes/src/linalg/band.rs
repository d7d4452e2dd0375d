//! LDLᵀ factorization of symmetric band matrices.
//!
//! No pivoting: the matrices we factor are discretized elliptic operators
//! (or their negatives) whose leading minors are well behaved except for a
//! handful of near-kernel directions. Pivots whose magnitude falls below a
//! dynamic threshold are replaced by a signed regularization value, and the
//! caller compensates with iterative refinement on the unmodified system.
//! This is the usual regularized-LDLᵀ compromise for indefinite saddle
//! blocks; refinement restores the lost digits because the perturbation is
//! tiny and low rank.

use super::sparse::SparseSym;
use crate::error::{Error, Result};

/// Factorized symmetric band matrix.
pub struct BandLdl {
    n: usize,
    bw: usize,
    /// Unit lower triangle, by column: `l[j*bw + (i-j-1)] = L[i][j]`.
    l: Vec<f64>,
    d: Vec<f64>,
    /// Number of pivots that needed regularization.
    pub regularized: usize,
}

impl BandLdl {
    /// Factor `a`, which must have bandwidth at most `bw`.
    ///
    /// `expected_sign` is the sign (+1/-1) substituted for near-zero pivots.
    /// Returns `SaddleSingular` only if a pivot is exactly zero even after
    /// regularization was disabled (`reg = 0`).
    pub fn factor(a: &SparseSym, bw: usize, expected_sign: f64, reg: f64) -> Result<Self> {
        let n = a.n;
        let mut l = vec![0.0f64; n * bw];
        let mut d = vec![0.0f64; n];

        // Scale for the dynamic pivot threshold.
        let mut scale = 0.0f64;
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                if a.col_idx[k] == i {
                    scale = scale.max(a.vals[k].abs());
                }
            }
        }
        if scale == 0.0 {
            scale = 1.0;
        }
        let pivot_tol = 1e-14 * scale;
        let reg_val = reg * scale;

        // work[i-j] holds the running column j below the diagonal.
        let mut work = vec![0.0f64; bw + 1];
        let mut regularized = 0usize;

        for j in 0..n {
            let mlen = bw.min(n - 1 - j);
            for w in work.iter_mut().take(mlen + 1) {
                *w = 0.0;
            }
            // Scatter A[j.., j] from row j (upper triangle of column j equals
            // row j right of the diagonal, by symmetry).
            for k in a.row_ptr[j]..a.row_ptr[j + 1] {
                let c = a.col_idx[k];
                if c >= j {
                    let off = c - j;
                    if off > bw {
                        return Err(Error::LinearSolveFailed(format!(
                            "entry ({j},{c}) outside declared bandwidth {bw}"
                        )));
                    }
                    if off <= mlen {
                        work[off] = a.vals[k];
                    }
                }
            }
            // Subtract contributions of previous columns k with L[j][k] != 0.
            let klo = j.saturating_sub(bw);
            for k in klo..j {
                let ljk = l[k * bw + (j - k - 1)];
                if ljk == 0.0 {
                    continue;
                }
                let s = ljk * d[k];
                if s == 0.0 {
                    continue;
                }
                let imax = (k + bw).min(n - 1).min(j + mlen);
                for i in j..=imax {
                    work[i - j] -= s * l[k * bw + (i - k - 1)];
                }
            }
            let mut piv = work[0];
            if piv.abs() < pivot_tol {
                if reg_val > 0.0 {
                    piv = expected_sign * reg_val.max(pivot_tol);
                    regularized += 1;
                } else if piv == 0.0 {
                    return Err(Error::SaddleSingular(format!("zero pivot at column {j}")));
                }
            }
            d[j] = piv;
            for i in (j + 1)..=(j + mlen) {
                l[j * bw + (i - j - 1)] = work[i - j] / piv;
            }
        }

        Ok(BandLdl { n, bw, l, d, regularized })
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        let (n, bw) = (self.n, self.bw);
        // Forward: L z = b.
        for j in 0..n {
            let bj = b[j];
            if bj != 0.0 {
                let imax = (j + bw).min(n - 1);
                for i in (j + 1)..=imax {
                    b[i] -= self.l[j * bw + (i - j - 1)] * bj;
                }
            }
        }
        // Diagonal.
        for j in 0..n {
            b[j] /= self.d[j];
        }
        // Backward: Lᵀ x = z.
        for j in (0..n).rev() {
            let imax = (j + bw).min(n - 1);
            let mut acc = b[j];
            for i in (j + 1)..=imax {
                acc -= self.l[j * bw + (i - j - 1)] * b[i];
            }
            b[j] = acc;
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Signs of the diagonal (inertia check helper for tests).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }
}
