//! Block elimination for bordered saddle systems.
//!
//! Systems have the shape
//!
//! ```text
//!   [ A  B ] [x]   [f]
//!   [ Bᵀ 0 ] [y] = [g]
//! ```
//!
//! with `A` symmetric banded (n×n, possibly indefinite and nearly singular
//! along a few directions) and `B` a thin dense border (n×m, m = k·dim).
//! Elimination through `A` is backed by the regularized [`BandLdl`] and the
//! whole solve is finished with iterative refinement on the full system, so
//! the near-kernel of `A` (which the border is designed to pin down) does
//! not poison the computed solution.

use super::band::BandLdl;
use super::dense::DenseLu;
use super::sparse::SparseSym;
use crate::error::{Error, Result};

pub struct BorderedSolver {
    n: usize,
    m: usize,
    a: SparseSym,
    border: Vec<Vec<f64>>,
    band: BandLdl,
    xcols: Vec<Vec<f64>>,
    schur: Option<DenseLu>,
}

impl BorderedSolver {
    /// Factor the saddle system. `bw` is the bandwidth of `a`;
    /// `expected_sign` the dominant sign of `a`'s spectrum (used when a
    /// pivot needs regularization).
    pub fn new(a: SparseSym, border: Vec<Vec<f64>>, bw: usize, expected_sign: f64) -> Result<Self> {
        let n = a.n;
        let m = border.len();
        let band = BandLdl::factor(&a, bw, expected_sign, 1e-12)?;
        let mut xcols = Vec::with_capacity(m);
        for col in &border {
            debug_assert_eq!(col.len(), n);
            xcols.push(band.solve(col));
        }
        let schur = if m > 0 {
            let mut s = vec![0.0f64; m * m];
            for i in 0..m {
                for j in 0..m {
                    let mut acc = 0.0;
                    for x in 0..n {
                        acc += border[i][x] * xcols[j][x];
                    }
                    s[i * m + j] = acc;
                }
            }
            Some(DenseLu::factor(&s, m).map_err(|_| {
                Error::SaddleSingular("Schur complement of the border is singular".into())
            })?)
        } else {
            None
        };
        Ok(BorderedSolver { n, m, a, border, band, xcols, schur })
    }

    fn solve_raw(&self, f: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let x0 = self.band.solve(f);
        if self.m == 0 {
            return (x0, Vec::new());
        }
        let mut rhs = vec![0.0f64; self.m];
        for i in 0..self.m {
            let mut acc = 0.0;
            for x in 0..self.n {
                acc += self.border[i][x] * x0[x];
            }
            rhs[i] = acc - g[i];
        }
        self.schur.as_ref().unwrap().solve_in_place(&mut rhs);
        let y = rhs;
        let mut x = x0;
        for j in 0..self.m {
            let yj = y[j];
            if yj != 0.0 {
                for i in 0..self.n {
                    x[i] -= yj * self.xcols[j][i];
                }
            }
        }
        (x, y)
    }

    fn residual(&self, f: &[f64], g: &[f64], x: &[f64], y: &[f64], rf: &mut [f64], rg: &mut [f64]) -> f64 {
        self.a.matvec(x, rf);
        for i in 0..self.n {
            let mut acc = rf[i];
            for j in 0..self.m {
                acc += self.border[j][i] * y[j];
            }
            rf[i] = f[i] - acc;
        }
        let mut worst = rf.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        for j in 0..self.m {
            let mut acc = 0.0;
            for i in 0..self.n {
                acc += self.border[j][i] * x[i];
            }
            rg[j] = g[j] - acc;
            worst = worst.max(rg[j].abs());
        }
        worst
    }

    /// Solve with iterative refinement. `g` must have length m.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        debug_assert_eq!(f.len(), self.n);
        debug_assert_eq!(g.len(), self.m);
        let scale = f
            .iter()
            .chain(g.iter())
            .fold(0.0f64, |a, &v| a.max(v.abs()))
            .max(1e-300);
        let (mut x, mut y) = self.solve_raw(f, g);
        let mut rf = vec![0.0f64; self.n];
        let mut rg = vec![0.0f64; self.m];
        for _ in 0..3 {
            let worst = self.residual(f, g, &x, &y, &mut rf, &mut rg);
            if !worst.is_finite() {
                return Err(Error::SaddleSingular("refinement produced non-finite residual".into()));
            }
            if worst < 1e-14 * scale.max(x.iter().fold(0.0f64, |a, &v| a.max(v.abs()))) {
                break;
            }
            let (dx, dy) = self.solve_raw(&rf, &rg);
            for i in 0..self.n {
                x[i] += dx[i];
            }
            for j in 0..self.m {
                y[j] += dy[j];
            }
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::SaddleSingular("non-finite solution".into()));
        }
        Ok((x, y))
    }

    /// Residual of a candidate solution, max-norm, for back-substitution
    /// audits.
    pub fn backsub_residual(&self, f: &[f64], g: &[f64], x: &[f64], y: &[f64]) -> f64 {
        let mut rf = vec![0.0f64; self.n];
        let mut rg = vec![0.0f64; self.m];
        self.residual(f, g, x, y, &mut rf, &mut rg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Small saddle system with a nearly singular A along the border
    /// direction, mimicking the translation-mode geometry.
    #[test]
    fn bordered_solve_handles_near_singular_block() {
        let n = 60;
        let mut t = Vec::new();
        // A = -(tridiagonal Laplacian) - small I, so one direction is close
        // to flat after the border pins it.
        for i in 0..n {
            let mut diag = -1e-8;
            if i > 0 {
                t.push((i, i - 1, 1.0));
                diag -= 1.0;
            }
            if i + 1 < n {
                t.push((i, i + 1, 1.0));
                diag -= 1.0;
            }
            t.push((i, i, diag));
        }
        let a = SparseSym::from_triplets(n, &mut t);
        // Border = constant vector (the near-kernel of the Neumann Laplacian).
        let border = vec![vec![1.0; n]];
        let solver = BorderedSolver::new(a.clone(), border.clone(), 1, -1.0).unwrap();
        let f: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.21).cos()).collect();
        let g = vec![0.0];
        let (x, y) = solver.solve(&f, &g).unwrap();
        let res = solver.backsub_residual(&f, &g, &x, &y);
        assert!(res < 1e-10, "residual {res}");
        // Constraint satisfied.
        let s: f64 = x.iter().sum();
        assert!(s.abs() < 1e-9, "constraint violation {s}");
        assert_eq!(y.len(), 1);
    }
}
