//! Symmetric sparse matrices in CSR form.

/// Symmetric sparse matrix with both triangles stored explicitly.
///
/// Assembled once per operator; rows are sorted by column index. Symmetry is
/// a structural promise of the assembly routines, not re-checked here (the
/// grid tests assert it through the discrete Green identity).
#[derive(Clone, Debug)]
pub struct SparseSym {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseSym {
    /// Build from unsorted triplets. Duplicate entries are summed.
    pub fn from_triplets(n: usize, triplets: &mut Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in triplets.iter() {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                row_ptr[i + 1] += 1;
                col_idx.push(j);
                vals.push(v);
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSym { n, row_ptr, col_idx, vals }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    /// y = A x as a fresh vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Maximum |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                bw = bw.max(self.col_idx[k].abs_diff(i));
            }
        }
        bw
    }

    /// A copy with `delta` added to every diagonal entry (structure must
    /// already contain the diagonal, which our assemblies guarantee).
    pub fn shifted_diag(&self, delta: &[f64]) -> SparseSym {
        let mut out = self.clone();
        for i in 0..self.n {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                if out.col_idx[k] == i {
                    out.vals[k] += delta[i];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_assemble_and_sum_duplicates() {
        let mut t = vec![(0, 0, 1.0), (1, 1, 2.0), (0, 1, -0.5), (1, 0, -0.5), (0, 0, 1.0)];
        let a = SparseSym::from_triplets(2, &mut t);
        let y = a.apply(&[1.0, 1.0]);
        assert_eq!(y, vec![1.5, 1.5]);
        assert_eq!(a.bandwidth(), 1);
    }
}
