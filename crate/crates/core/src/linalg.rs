// SPDX-License-Identifier: Apache-2.0

//! Dense LU factorisation with partial pivoting for the small square
//! projection matrices used by the LSH partitioner.

/// `P A = L U` packed into one row-major buffer (unit diagonal of `L` implied).
#[derive(Debug, Clone, PartialEq)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    det: f64,
}

impl Lu {
    /// Factorises the `n x n` row-major matrix `a`. Never fails; a singular
    /// matrix shows up as `det() == 0` and must be rejected by the caller
    /// before calling [`Lu::solve`].
    pub fn new(a: &[f64], n: usize) -> Self {
        assert_eq!(a.len(), n * n, "matrix buffer has wrong length");
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut det = 1.0;

        for k in 0..n {
            let pivot_row = (k..n)
                .max_by(|&i, &j| lu[i * n + k].abs().total_cmp(&lu[j * n + k].abs()))
                .unwrap();
            if pivot_row != k {
                for c in 0..n {
                    lu.swap(k * n + c, pivot_row * n + c);
                }
                perm.swap(k, pivot_row);
                det = -det;
            }
            let pivot = lu[k * n + k];
            det *= pivot;
            if pivot == 0.0 {
                continue;
            }
            for i in (k + 1)..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                for c in (k + 1)..n {
                    lu[i * n + c] -= factor * lu[k * n + c];
                }
            }
        }

        Lu { n, lu, perm, det }
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}
