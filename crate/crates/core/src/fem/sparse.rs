//! Row-compressed symmetric sparse matrices.
//!
//! Both triangles are stored; symmetry comes from the assembly producing
//! bitwise-identical `(i, j)` and `(j, i)` element contributions.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetricMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymmetricMatrix {
    /// Build from unsorted triplets; duplicate entries are summed in sorted
    /// order, which is deterministic for a given triplet sequence.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, _) in &triplets {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch(format!(
                    "triplet ({i}, {j}) outside {n}x{n} matrix"
                )));
            }
        }
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_counts = vec![0usize; n];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_counts[i] += 1;
                last = Some((i, j));
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + row_counts[i];
        }
        Ok(SparseSymmetricMatrix {
            n,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.cols[k] == i {
                    d[i] = self.vals[k];
                }
            }
        }
        d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.cols[lo..hi].binary_search(&j) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Largest relative asymmetry `|a_ij - a_ji| / max|a|`.
    pub fn max_relative_asymmetry(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                worst = worst.max((self.vals[k] - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Sum of two matrices of equal dimension. Matrices assembled from the
    /// same mesh traversal share their sparsity pattern, which gives a cheap
    /// value-wise path; otherwise the entries are merged.
    pub fn add(&self, other: &SparseSymmetricMatrix) -> Result<SparseSymmetricMatrix> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{} matrices",
                self.n, self.n, other.n, other.n
            )));
        }
        if self.row_ptr == other.row_ptr && self.cols == other.cols {
            let vals = self
                .vals
                .iter()
                .zip(&other.vals)
                .map(|(a, b)| a + b)
                .collect();
            return Ok(SparseSymmetricMatrix {
                n: self.n,
                row_ptr: self.row_ptr.clone(),
                cols: self.cols.clone(),
                vals,
            });
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for m in [self, other] {
            for i in 0..m.n {
                for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                    triplets.push((i, m.cols[k], m.vals[k]));
                }
            }
        }
        SparseSymmetricMatrix::from_triplets(self.n, triplets)
    }

    /// Principal submatrix on the given (strictly increasing) index set.
    pub fn restrict(&self, keep: &[usize]) -> SparseSymmetricMatrix {
        let mut new_index = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            new_index[old] = new;
        }
        let mut row_ptr = vec![0usize; keep.len() + 1];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (new_i, &old_i) in keep.iter().enumerate() {
            for k in self.row_ptr[old_i]..self.row_ptr[old_i + 1] {
                let new_j = new_index[self.cols[k]];
                if new_j != usize::MAX {
                    cols.push(new_j);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr[new_i + 1] = cols.len();
        }
        SparseSymmetricMatrix {
            n: keep.len(),
            row_ptr,
            cols,
            vals,
        }
    }

    /// Coordinate text export, one `i j value` line per stored entry.
    pub fn to_coo_string(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                writeln!(out, "{} {} {:.16e}", i, self.cols[k], self.vals[k]).unwrap();
            }
        }
        out
    }
}
